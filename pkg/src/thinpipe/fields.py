"""Composite three-dimensional flow field: assembly, norms, export.

The reduced solution lives on the reference grid (rho, theta, s).  The
physical point of section node xi = rho R (cos theta, sin theta) at
station s is c(s) + h (xi1 e1 + xi2 e2) with (e1, e2) the transported
section pair, so the map to physical coordinates is orthogonal with
stretch factors (h, h, beta) and the volume element is h^2 beta dsigma ds.

Assembly composes the axial profile at order 1/h with the transverse
correction, the latter optionally ramped to zero near the ends by a cubic
smoothstep (default on; the inlet data then hold exactly).  The pressure
is the line pressure at order 1/h^3, constant over each section.

Norms use the physical measure.  The gradient seminorm differentiates the
Cartesian velocity components: section derivatives through the mesh
operators at 1/h, axial derivatives by second-order FD in s shifted to
fixed section coordinates and scaled by 1/beta.  The reported composite
h ||grad v|| + ||v|| + h^2 ||p - mean p|| is the combination that stays
bounded as the pipe gets thin.

Exports: delimited text, one row per node at 17 significant digits
(round-trip exact), and legacy ASCII VTK structured grids with the theta
seam repeated so the surface closes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .prandtl import _fd_s

__all__ = [
    "FlowField",
    "NormReport",
    "assemble",
    "cutoff_profile",
    "geometry_fingerprint",
    "norms",
    "write_field_csv",
    "read_field_csv",
    "write_field_vtk",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("s", "theta", "rho", "eta", "x", "y", "z",
               "v1", "v2", "v3", "vx", "vy", "vz", "p")


def cutoff_profile(s, h):
    """End ramp: 0 on [0, h] and [1-h, 1], 1 on [2h, 1-2h], smooth blend.

    The blend is the cubic smoothstep, monotone with bounded derivatives
    of size 1/h per order taken.
    """
    s = np.asarray(s, dtype=float)
    t = np.clip((s - h) / h, 0.0, 1.0)
    u = np.clip((1.0 - s - h) / h, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t) * u * u * (3.0 - 2.0 * u)


def geometry_fingerprint(geometry):
    """Hash of the defining arrays; identifies the geometry in run reports."""
    digest = hashlib.sha256()
    for arr in (
        geometry.centerline.c,
        geometry.R,
        np.array([geometry.h, float(geometry.n_theta)]),
    ):
        digest.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    return digest.hexdigest()[:16]


@dataclass
class FlowField:
    """Assembled velocity and pressure on the (s, rho, theta) node grid.

    v1, v2 are components along the transported section pair, v3 along the
    tangent; vx, vy, vz are the same vector in fixed Cartesian axes.  The
    pressure is constant per section.  flux holds the physical volume flux
    of the axial part through each section.
    """

    geometry: object
    s: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    meshes: list
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    vz: np.ndarray
    pressure: np.ndarray
    flux: np.ndarray
    meta: dict

    @property
    def shape(self):
        return self.v3.shape


def assemble(geometry, profile, pressure, transverse=None, cutoff=True):
    """Compose the solved pieces into the physical field.

    profile holds the per-station section solutions, pressure the line
    solve on the same stations, transverse (optional) the list of section
    corrections.  With cutoff on, the correction is ramped to zero near
    the ends, so the inlet sees the pure axial profile.
    """
    s = np.asarray(geometry.s)
    n_st = len(s)
    if len(profile.s) != n_st or not np.allclose(profile.s, s):
        raise SolverError("station mismatch between geometry and section profile")
    if len(pressure.s) != n_st or not np.allclose(pressure.s, s):
        raise SolverError("station mismatch between geometry and pressure line")
    if transverse is not None:
        if len(transverse) != n_st or any(t.station != i for i, t in enumerate(transverse)):
            raise SolverError("station mismatch between geometry and correction profile")

    h = geometry.h
    meshes = [sol.mesh for sol in profile.solutions]
    nr, nt = meshes[0].xi1.shape
    shape = (n_st, nr, nt)
    ramp = cutoff_profile(s, h) if cutoff else np.ones(n_st)

    e1 = geometry.frame.e1[:, 0, :]  # transported pair at theta = 0
    e2 = geometry.frame.e2[:, 0, :]
    tang = geometry.centerline.d1
    cpos = geometry.centerline.c

    v1 = np.zeros(shape)
    v2 = np.zeros(shape)
    v3 = np.empty(shape)
    x = np.empty(shape)
    y = np.empty(shape)
    z = np.empty(shape)
    flux = np.empty(n_st)
    for i, mesh in enumerate(meshes):
        v3[i] = (-0.5 / h) * profile.solutions[i].psi * pressure.dp0[i]
        if transverse is not None:
            v1[i] = ramp[i] * transverse[i].v1
            v2[i] = ramp[i] * transverse[i].v2
        flux[i] = h * h * mesh.integrate(v3[i])
        for out, ax in ((x, 0), (y, 1), (z, 2)):
            out[i] = cpos[i, ax] + h * (mesh.xi1 * e1[i, ax] + mesh.xi2 * e2[i, ax])

    vx = v1 * e1[:, None, None, 0] + v2 * e2[:, None, None, 0] + v3 * tang[:, None, None, 0]
    vy = v1 * e1[:, None, None, 1] + v2 * e2[:, None, None, 1] + v3 * tang[:, None, None, 1]
    vz = v1 * e1[:, None, None, 2] + v2 * e2[:, None, None, 2] + v3 * tang[:, None, None, 2]

    meta = {
        "h": h,
        "geometry_hash": geometry_fingerprint(geometry),
        "flow_rate": pressure.F0,
        "outlet_pressure": pressure.p_per,
        "cutoff": bool(cutoff),
        "section_residual": float(np.max(profile.residual)),
        "flux_defect": pressure.flux_defect,
        "correction_residual": (
            max(t.residual for t in transverse) if transverse is not None else 0.0
        ),
        "correction_divergence": (
            max(t.div_residual for t in transverse) if transverse is not None else 0.0
        ),
    }
    return FlowField(
        geometry=geometry,
        s=s.copy(),
        rho=meshes[0].rho.copy(),
        theta=meshes[0].theta.copy(),
        meshes=meshes,
        x=x, y=y, z=z,
        v1=v1, v2=v2, v3=v3,
        vx=vx, vy=vy, vz=vz,
        pressure=pressure.p0 / h**3,
        flux=flux,
        meta=meta,
    )


@dataclass
class NormReport:
    """Physical-measure L2 norms of one field (or of a field difference)."""

    velocity: float
    velocity_gradient: float
    pressure_fluctuation: float
    composite: float
    h: float


def _check_same_grid(field, other):
    same = (
        field.shape == other.shape
        and np.allclose(field.s, other.s)
        and np.allclose(field.rho, other.rho)
        and np.allclose(field.theta, other.theta)
    )
    if not same:
        raise SolverError("grids incompatible between field and reference")


def norms(field, reference=None):
    """Norm report over the pipe volume; with a reference, of the difference."""
    if reference is not None:
        _check_same_grid(field, reference)
        comps = (
            field.vx - reference.vx,
            field.vy - reference.vy,
            field.vz - reference.vz,
        )
        press = field.pressure - reference.pressure
    else:
        comps = (field.vx, field.vy, field.vz)
        press = field.pressure

    h = field.meta["h"]
    s = field.s
    meshes = field.meshes
    ds = s[1] - s[0]

    sec_v = np.zeros(len(s))
    sec_g = np.zeros(len(s))
    for w in comps:
        dref = _fd_s(w, ds)
        for i, mesh in enumerate(meshes):
            sec_v[i] += mesh.integrate(w[i] ** 2, weight=mesh.beta)
            g1, g2 = mesh.gradient_cartesian(w[i])
            f_eta, _ = mesh.gradient(w[i])
            dfix = mesh.s_shift(dref[i], f_eta)
            sec_g[i] += mesh.integrate(g1**2 + g2**2, weight=mesh.beta) / h**2
            sec_g[i] += mesh.integrate(dfix**2 / mesh.beta)

    area = np.array([mesh.integrate(1.0, weight=mesh.beta) for mesh in meshes])
    pbar = np.trapezoid(press * area, s) / np.trapezoid(area, s)
    pfluc = np.sqrt(h * h * np.trapezoid((press - pbar) ** 2 * area, s))

    vel = np.sqrt(h * h * np.trapezoid(sec_v, s))
    grad = np.sqrt(h * h * np.trapezoid(sec_g, s))
    return NormReport(
        velocity=float(vel),
        velocity_gradient=float(grad),
        pressure_fluctuation=float(pfluc),
        composite=float(h * grad + vel + h * h * pfluc),
        h=h,
    )


def write_field_csv(field, path):
    """One row per node, stations outer, radius middle, angle inner."""
    n_st, nr, nt = field.shape
    blocks = []
    for i, mesh in enumerate(field.meshes):
        blocks.append(np.column_stack([
            np.full(nr * nt, field.s[i]),
            np.tile(field.theta, nr),
            np.repeat(field.rho, nt),
            mesh.eta.ravel(),
            field.x[i].ravel(), field.y[i].ravel(), field.z[i].ravel(),
            field.v1[i].ravel(), field.v2[i].ravel(), field.v3[i].ravel(),
            field.vx[i].ravel(), field.vy[i].ravel(), field.vz[i].ravel(),
            np.full(nr * nt, field.pressure[i]),
        ]))
    np.savetxt(
        path,
        np.vstack(blocks),
        fmt="%.17g",
        delimiter=",",
        header=",".join(CSV_COLUMNS),
        comments="",
    )


def read_field_csv(path):
    """Columns of a field export, keyed by header name."""
    table = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(table[name]) for name in table.dtype.names}


def _seam_closed(arr):
    # repeat theta = 0 so the structured grid closes in the angle
    return np.concatenate([arr, arr[:, :, :1]], axis=2)


def write_field_vtk(field, path, title="pipe flow field"):
    """Legacy ASCII structured grid with VELOCITY vectors and PRESSURE."""
    n_st, nr, nt = field.shape
    npts = n_st * nr * (nt + 1)

    def flat(a):
        # VTK wants the first grid dimension fastest: rho, then theta, then s
        return _seam_closed(a).transpose(0, 2, 1).reshape(-1)

    pts = np.column_stack([flat(field.x), flat(field.y), flat(field.z)])
    vel = np.column_stack([flat(field.vx), flat(field.vy), flat(field.vz)])
    press = np.repeat(field.pressure, nr * (nt + 1))

    def rows(a):
        return "\n".join(" ".join(f"{v:.17g}" for v in row) for row in a)

    parts = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_GRID",
        f"DIMENSIONS {nr} {nt + 1} {n_st}",
        f"POINTS {npts} double",
        rows(pts),
        f"POINT_DATA {npts}",
        "VECTORS VELOCITY double",
        rows(vel),
        "SCALARS PRESSURE double",
        "LOOKUP_TABLE default",
        "\n".join(f"{v:.17g}" for v in press),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
