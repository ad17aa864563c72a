"""Transverse correction flow on each cross-section.

The in-plane correction (v, p) solves a weighted Stokes system with zero
wall velocity,

    -beta^-1 div'(beta grad' v_c) + d_c p = f_c,    -div'(beta v) = g,

where the data (f, g) are built from the axial velocity and the centerline
curvature.  Discretization: bilinear velocity on the section mesh with the
divergence constraint enforced by a penalty (eps = 1e-8) on one element
value per cell,

    D_e(v) = (1/A_e) * (flux of the nodal field beta*v through the cell edges),

a Green-Gauss divergence with midpoint edge fluxes over the straight-sided
quads.  Interior edge fluxes cancel pairwise, so the area-weighted rows sum
to zero for any velocity vanishing at the wall: the constant is the exact
left null vector and the mean-free part of g is exactly attainable.
Eliminating the element pressure p_e = -(g_e + D_e(v)) / eps yields an
SPD system

    [A(beta)  0; 0  A(beta)] + (1/eps) sum_e A_e D_e^T D_e,

solved directly.  Element pressures are cleaned of the collocated-grid
checkerboard mode, averaged to the nodes, and shifted to exact mean zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import spsolve

from .cross_section import build_mesh, interpolate_to_centers, _corner_values
from .errors import SolverError
from .prandtl import _fd_s, assemble_load, assemble_stiffness

PENALTY = 1e-8
RESIDUAL_TOL = 1e-8
COMPAT_TOL = 1e-6

__all__ = [
    "TransverseSolution",
    "solve_transverse",
    "solve_transverse_system",
    "transverse_profile",
    "transverse_s_derivative",
    "check_compatibility",
    "check_claim_identity",
    "ClaimResidual",
]


@dataclass
class TransverseSolution:
    """Section correction velocity (frame Cartesian components) and pressure."""

    mesh: object
    v1: np.ndarray
    v2: np.ndarray
    p2: np.ndarray
    residual: float
    div_residual: float
    compat_residual: float
    station: int

    @property
    def speed(self):
        return np.hypot(self.v1, self.v2)


def check_compatibility(mesh, dsv31):
    """Section integral of the divergence data; zero for consistent inputs."""
    return abs(mesh.integrate(dsv31))


def _element_divergence_rows(mesh):
    """Green-Gauss rows for the element value of div'(beta v).

    Corner order per cell is [(k,j), (k+1,j), (k,j+1), (k+1,j+1)]; the
    cyclic boundary path is 0 -> 1 -> 3 -> 2.  Vertex p of the midpoint
    edge quadrature picks up (y_next - y_prev)/2, so a shared edge enters
    its two cells with opposite signs and the area-weighted rows telescope
    exactly.  beta multiplies the velocity at the nodes (the constraint is
    the divergence of the product beta*v).  The collapsed pole cells are
    triangles with the pole vertex stored twice; both copies map to the
    shared pole unknown.
    """
    ops = mesh.element_ops()
    x = _corner_values(mesh, mesh.xi1)
    y = _corner_values(mesh, mesh.xi2)
    cb = _corner_values(mesh, mesh.beta)
    nxt = np.array([1, 3, 0, 2])
    prv = np.array([2, 0, 3, 1])
    area = 0.5 * np.sum(x * y[:, nxt] - x[:, nxt] * y, axis=1)
    if area.min() <= 0.0:
        raise SolverError("degenerate cell in the section mesh")
    d1 = cb * (y[:, nxt] - y[:, prv]) / (2.0 * area[:, None])
    d2 = -cb * (x[:, nxt] - x[:, prv]) / (2.0 * area[:, None])
    return ops, d1, d2, area


def solve_transverse_system(mesh, f1, f2, g, compat_tol=COMPAT_TOL, penalty=PENALTY):
    """Penalty solve of the section system for explicit data (f1, f2, g)."""
    norm_g = np.sqrt(mesh.integrate(g**2))
    compat = check_compatibility(mesh, g)
    if norm_g > 0.0 and compat > compat_tol * norm_g:
        raise SolverError(
            f"incompatible divergence data: |integral g| = {compat:.3e} "
            f"exceeds {compat_tol:.1e} * ||g|| = {compat_tol * norm_g:.3e}"
        )

    a = assemble_stiffness(mesh, weight="beta")
    n_red = a.shape[0]
    ops, d1, d2, c_area = _element_divergence_rows(mesh)
    conn = ops.conn
    conn2 = np.where(conn >= 0, conn + n_red, -1)
    dofs8 = np.concatenate([conn, conn2], axis=1)
    d8 = np.concatenate([d1, d2], axis=1)
    n_th = mesh.n_theta

    # the collapsed pole cells would contribute n_theta nearly parallel
    # constraint rows; their pressure is merged into one ring value
    pole_row = np.zeros(2 * n_red)
    pm = dofs8[:n_th].ravel() >= 0
    np.add.at(
        pole_row,
        dofs8[:n_th].ravel()[pm],
        (c_area[:n_th, None] * d8[:n_th]).ravel()[pm],
    )
    pole_area = float(c_area[:n_th].sum())
    pole_row /= pole_area

    scale = c_area[n_th:] / penalty
    dofs_o = dofs8[n_th:]
    d_o = d8[n_th:]
    rows = np.repeat(dofs_o[:, :, None], 8, axis=2)
    cols = np.repeat(dofs_o[:, None, :], 8, axis=1)
    vals = scale[:, None, None] * d_o[:, :, None] * d_o[:, None, :]
    mask = (rows >= 0) & (cols >= 0)
    pen = sparse.coo_matrix(
        (vals[mask], (rows[mask], cols[mask])), shape=(2 * n_red, 2 * n_red)
    )
    nz = np.nonzero(pole_row)[0]
    pole_pen = sparse.coo_matrix(
        (
            (pole_area / penalty) * np.outer(pole_row[nz], pole_row[nz]).ravel(),
            (np.repeat(nz, nz.size), np.tile(nz, nz.size)),
        ),
        shape=(2 * n_red, 2 * n_red),
    )
    k = (sparse.block_diag((a, a)) + pen + pole_pen).tocsr()

    b = np.concatenate(
        [assemble_load(mesh, mesh.beta * f1), assemble_load(mesh, mesh.beta * f2)]
    )
    g_c = interpolate_to_centers(mesh, g)
    # exactly the mean-free part of g is attainable under zero wall
    # velocity (the rows telescope); remove the O(quadrature) mean
    g_c = g_c - np.sum(c_area * g_c) / np.sum(c_area)
    g_pole = float(np.sum(c_area[:n_th] * g_c[:n_th])) / pole_area
    load = scale * g_c[n_th:]
    flat_mask = dofs_o.ravel() >= 0
    np.add.at(b, dofs_o.ravel()[flat_mask], -(load[:, None] * d_o).ravel()[flat_mask])
    b -= (pole_area / penalty) * g_pole * pole_row

    x = spsolve(k, b)
    res = float(np.linalg.norm(k @ x - b) / max(np.linalg.norm(b), 1.0))
    if res > RESIDUAL_TOL:
        raise SolverError(f"transverse solve residual {res:.3e} above tolerance")

    v1 = mesh.expand_dofs(x[:n_red])
    v2 = mesh.expand_dofs(x[n_red:])

    div_v = (d1 * _corner_values(mesh, v1)).sum(axis=1) + (
        d2 * _corner_values(mesh, v2)
    ).sum(axis=1)
    p_e = -(g_c + div_v) / penalty
    pole_div = float(pole_row @ x)
    p_e[:n_th] = -(g_pole + pole_div) / penalty
    div_residual = float(
        np.sqrt(
            np.sum(c_area[n_th:] * (div_v[n_th:] + g_c[n_th:]) ** 2)
            + pole_area * (pole_div + g_pole) ** 2
        )
    )

    p2 = _filtered_nodal_pressure(mesh, c_area, p_e)
    return TransverseSolution(
        mesh=mesh,
        v1=v1,
        v2=v2,
        p2=p2,
        residual=res,
        div_residual=div_residual,
        compat_residual=compat,
        station=mesh.station,
    )


def _filtered_nodal_pressure(mesh, area, p_e):
    """Strip the checkerboard mode, average to nodes, enforce mean zero."""
    n_th = mesh.n_theta
    cells = np.arange(p_e.size)
    sign = np.where((cells // n_th + cells % n_th) % 2 == 0, 1.0, -1.0)
    sign[:n_th] = 0.0  # merged pole ring carries no checkerboard content
    denom = np.sum(area * sign**2)
    p = p_e - (np.sum(area * sign * p_e) / denom) * sign
    p = p - np.sum(area * p) / np.sum(area)

    kk = cells // n_th
    jj = cells % n_th
    jp = (jj + 1) % n_th
    corners_k = np.stack([kk, kk + 1, kk, kk + 1], axis=1)
    corners_j = np.stack([jj, jj, jp, jp], axis=1)
    acc = np.zeros((mesh.n_rho + 1, n_th))
    wgt = np.zeros_like(acc)
    np.add.at(acc, (corners_k.ravel(), corners_j.ravel()), np.repeat(area * p, 4))
    np.add.at(wgt, (corners_k.ravel(), corners_j.ravel()), np.repeat(area, 4))
    nodal = acc / wgt
    # the pole is one physical point: share the area-weighted ring average
    ring = slice(0, n_th)
    nodal[0, :] = np.sum(area[ring] * p[ring]) / np.sum(area[ring])
    nodal -= mesh.integrate(nodal) / mesh.integrate(np.ones_like(nodal))
    return nodal


def axial_velocity_data(profile, pressure, station):
    """v3 and its fixed-section s-derivative at one station.

    v3 = -Psi dp/ds / 2, so d_s v3 = -(d_s Psi dp + Psi d2p) / 2.  Both use
    the profile's stored s-derivatives, which keeps the compatibility
    integral telescoping down to roundoff.
    """
    if profile.dpsi is None:
        raise SolverError("rigidity profile lacks s-derivatives (needs 3 stations)")
    sol = profile.solutions[station]
    v31 = -0.5 * sol.psi * pressure.dp0[station]
    dsv31 = -0.5 * (
        profile.dpsi[station] * pressure.dp0[station]
        + sol.psi * pressure.d2p0[station]
    )
    return sol.mesh, v31, dsv31


def solve_transverse(profile, pressure, station, compat_tol=COMPAT_TOL):
    """Correction flow at one station of a solved pipe."""
    mesh, v31, dsv31 = axial_velocity_data(profile, pressure, station)
    beta = mesh.beta
    h = mesh.h
    common = (2.0 * beta * dsv31 - v31 * mesh.ds_beta) / beta**3
    f1 = h * (mesh.l1 * v31 / beta**2 + mesh.k1 * common)
    f2 = h * (mesh.l2 * v31 / beta**2 + mesh.k2 * common)
    return solve_transverse_system(mesh, f1, f2, dsv31, compat_tol=compat_tol)


def transverse_profile(profile, pressure, compat_tol=COMPAT_TOL):
    """Correction flow at every station."""
    return [
        solve_transverse(profile, pressure, i, compat_tol=compat_tol)
        for i in range(len(profile.s))
    ]


def transverse_s_derivative(solutions):
    """Reference-grid FD in s of the correction velocity components."""
    if len(solutions) < 3:
        raise SolverError("s-derivatives need at least 3 stations")
    geo = solutions[0].mesh.geometry
    s = np.array([geo.s[sol.station] for sol in solutions])
    ds = np.diff(s)
    if not np.allclose(ds, ds[0], rtol=1e-12, atol=1e-14):
        raise SolverError("stations must be uniformly spaced")
    dv1 = _fd_s(np.stack([sol.v1 for sol in solutions]), ds[0])
    dv2 = _fd_s(np.stack([sol.v2 for sol in solutions]), ds[0])
    return dv1, dv2


class ClaimResidual(NamedTuple):
    total: float
    area_part: float
    boundary_part: float


def check_claim_identity(geometry, station, n_rho, velocity, g_scale=1.0):
    """Numerically evaluate the moving-section divergence identity.

    For a velocity u(xi1, xi2, s) the consistent data are
    g = -beta^-1 div'(beta u) and h = u on the wall; then the area integral
    of beta (d_s g + beta^-1 div'((d_s beta) u) - beta^-2 (d_s beta) div'(beta u))
    plus the wall integral of beta (d_s h - (d_s R) d_eta u) . (R e_r - R_theta e_t)
    vanishes.  g_scale != 1 breaks the triple's consistency on purpose
    (negative control).
    """
    if not 1 <= station <= len(geometry.s) - 2:
        raise SolverError("claim check needs an interior station")
    ds = geometry.s[station + 1] - geometry.s[station]
    meshes = [build_mesh(geometry, station + k, n_rho) for k in (-1, 0, 1)]
    u_samples, g_samples = [], []
    for m in meshes:
        u1, u2 = velocity(m.xi1, m.xi2, geometry.s[m.station])
        g = -g_scale * m.divergence(u1, u2, weight=m.beta) / m.beta
        u_samples.append((u1, u2))
        g_samples.append(g)

    m = meshes[1]
    u1, u2 = u_samples[1]
    dsg_ref = (g_samples[2] - g_samples[0]) / (2.0 * ds)
    dsg = m.s_shift(dsg_ref, m.gradient(g_samples[1])[0])

    div_dsb = m.divergence(u1, u2, weight=m.ds_beta)
    div_b = m.divergence(u1, u2, weight=m.beta)
    area_part = m.integrate(m.beta * dsg + div_dsb - (m.ds_beta / m.beta) * div_b)

    dsh1 = (u_samples[2][0][-1] - u_samples[0][0][-1]) / (2.0 * ds)
    dsh2 = (u_samples[2][1][-1] - u_samples[0][1][-1]) / (2.0 * ds)
    u1_eta = m.gradient(u1)[0][-1]
    u2_eta = m.gradient(u2)[0][-1]
    beta_w = m.beta[-1]
    q1 = beta_w * (dsh1 - m.R_s * u1_eta)
    q2 = beta_w * (dsh2 - m.R_s * u2_eta)
    cth, sth = np.cos(m.theta), np.sin(m.theta)
    m1 = m.R * cth + m.R_theta * sth
    m2 = m.R * sth - m.R_theta * cth
    boundary_part = m.boundary_integral(q1 * m1 + q2 * m2)
    return ClaimResidual(
        total=float(area_part + boundary_part),
        area_part=float(area_part),
        boundary_part=float(boundary_part),
    )
