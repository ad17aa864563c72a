"""Cross-section meshes on the boundary-fitted polar map.

A section at station s is the star-shaped region eta < R(theta, s).  The
reference grid lives in (rho, theta) with eta = rho * R(theta, s), so the
wall is exactly the grid line rho = 1 and the domain is logically
rectangular.  The map to section Cartesian coordinates

    xi1 = rho R(theta) cos(theta),   xi2 = rho R(theta) sin(theta)

has Jacobian determinant rho R^2, which is also the area element
d(sigma) = eta d(eta) d(theta).  The map is non-orthogonal whenever
d(theta) R != 0; the chain rule for a scalar f is

    f_eta           = f_rho / R,
    (1/eta) df/dtheta|eta = (f_theta - (rho R_theta / R) f_rho) / (rho R).

Scalars keep a single shared value at the pole (stored on the whole rho=0
row); vector fields are stored as section Cartesian components so the pole
holds one well-defined pair.

Besides nodal finite differences and trapezoid quadrature, the mesh exposes
per-cell bilinear element data (2x2 Gauss points plus cell centers) used by
the elliptic and saddle-point solvers.  The pole ring uses collapsed
quadrilaterals whose two inner corners share the pole unknown.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

# 2x2 Gauss points on the unit square
_GP = 0.5 + np.array([-1.0, 1.0]) / (2.0 * np.sqrt(3.0))


def _shape_values(u, v):
    """Bilinear shape functions at (u, v), corner order (00, 10, 01, 11)."""
    return np.stack([(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v], axis=-1)


def _shape_du(u, v):
    return np.stack([-(1 - v), (1 - v), -v, v], axis=-1)


def _shape_dv(u, v):
    return np.stack([-(1 - u), -u, (1 - u), u], axis=-1)


@dataclass
class ElementOps:
    """Per-cell bilinear element data on a SectionMesh.

    Arrays are indexed (cell, gauss, local-node) with cells flattened
    rho-major.  `conn` maps local nodes to solver unknowns: the pole is
    unknown 0, interior node (k, j) is 1 + (k-1)*n_theta + j, and wall nodes
    are -1 (strong Dirichlet).
    """

    conn: np.ndarray  # (n_cells, 4) int
    n_dofs: int
    shape: np.ndarray  # (n_gauss, 4)
    w: np.ndarray  # (n_cells, n_gauss) quadrature weight * detJ
    dx: np.ndarray  # (n_cells, n_gauss, 4) d(shape)/d(xi1)
    dy: np.ndarray  # (n_cells, n_gauss, 4)
    beta: np.ndarray  # (n_cells, n_gauss)
    xi1: np.ndarray  # (n_cells, n_gauss)
    xi2: np.ndarray
    eta: np.ndarray
    theta: np.ndarray
    # one-point (cell center) data for reduced integration
    c_shape: np.ndarray  # (4,)
    c_area: np.ndarray  # (n_cells,)
    c_dx: np.ndarray  # (n_cells, 4)
    c_dy: np.ndarray
    c_beta: np.ndarray  # (n_cells,)


class SectionMesh:
    """Reference polar grid for one cross-section.

    Parameters
    ----------
    geometry : PipeGeometry
    station : int
        Index into the geometry's s-grid.
    n_rho : int
        Number of radial intervals (>= 4); the grid has n_rho+1 radial nodes.

    Attributes (all at this station)
    --------------------------------
    rho : (n_rho+1,), theta : (n_theta,)
    R, R_theta, R_s, R_ss : (n_theta,) radius law samples
    eta, xi1, xi2 : (n_rho+1, n_theta) physical node coordinates
    beta, ds_beta, ds2_beta : (n_rho+1, n_theta)
    jac : (n_rho+1, n_theta) area-element Jacobian rho R^2
    weights : (n_rho+1, n_theta) quadrature weights for integral over dsigma
    """

    def __init__(self, geometry, station, n_rho):
        if n_rho < 4:
            raise GeometryError(f"need at least 4 radial intervals, got {n_rho}")
        self.geometry = geometry
        self.station = int(station)
        self.s = float(geometry.s[station])
        self.h = geometry.h
        self.n_rho = int(n_rho)
        self.n_theta = geometry.n_theta
        self.rho = np.linspace(0.0, 1.0, n_rho + 1)
        self.theta = geometry.theta
        self.drho = 1.0 / n_rho
        self.dtheta = 2.0 * np.pi / self.n_theta

        self.R = geometry.R[station]
        self.R_theta = geometry.R_theta[station]
        self.R_s = geometry.R_s[station]
        self.R_ss = geometry.R_ss[station]
        (self.k1, self.k2, self.l1, self.l2,
         self.m1, self.m2, self.curv_sq) = geometry.curvature_projections(station)

        self.eta = self.rho[:, None] * self.R[None, :]
        cth, sth = np.cos(self.theta), np.sin(self.theta)
        self.xi1 = self.eta * cth[None, :]
        self.xi2 = self.eta * sth[None, :]
        self.beta, self.ds_beta, self.ds2_beta = geometry.scale_factor(
            self.eta, self.theta[None, :], station
        )
        self.jac = self.rho[:, None] * (self.R**2)[None, :]

        coeff = np.full(n_rho + 1, self.drho)
        coeff[0] = coeff[-1] = 0.5 * self.drho
        self.weights = self.jac * coeff[:, None] * self.dtheta
        self._elem = None

    # ------------------------------------------------------------- helpers

    def zeros(self):
        return np.zeros((self.n_rho + 1, self.n_theta))

    def radius_at(self, theta):
        return self.geometry.radius.value(theta, self.s)

    def radius_dtheta_at(self, theta):
        return self.geometry.radius.d_theta(theta, self.s)

    def beta_at(self, xi1, xi2):
        """beta is affine in the section Cartesian coordinates."""
        return 1.0 - self.h * (self.k1 * xi1 + self.k2 * xi2)

    def to_cartesian(self, u1, u2):
        """Frame components (along e1, e2) -> section Cartesian components."""
        cth, sth = np.cos(self.theta)[None, :], np.sin(self.theta)[None, :]
        return u1 * cth - u2 * sth, u1 * sth + u2 * cth

    def to_frame(self, ux, uy):
        cth, sth = np.cos(self.theta)[None, :], np.sin(self.theta)[None, :]
        return ux * cth + uy * sth, -ux * sth + uy * cth

    # ---------------------------------------------------------- quadrature

    def integrate(self, f, weight=None):
        """Integral of f over the section, optionally against a weight field."""
        val = self.weights * f
        if weight is not None:
            val = val * weight
        return float(val.sum())

    def boundary_integral(self, values):
        """Periodic trapezoid of nodal wall values over theta."""
        return float(np.sum(values) * self.dtheta)

    # ------------------------------------------------- finite differences

    def _d_rho(self, f):
        g = np.empty_like(f)
        d = self.drho
        g[1:-1] = (f[2:] - f[:-2]) / (2.0 * d)
        g[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * d)
        g[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * d)
        return g

    def _d_theta(self, f):
        return (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * self.dtheta)

    def _pole_fit(self, f_eta0):
        """Cartesian gradient at the pole by least squares over the rays.

        Near the pole a smooth field is f0 + a xi1 + b xi2 + O(eta^2), so the
        one-sided radial slope along ray theta_j is a cos + b sin; the
        first-harmonic projection recovers (a, b).
        """
        cth, sth = np.cos(self.theta), np.sin(self.theta)
        a = 2.0 * np.mean(f_eta0 * cth)
        b = 2.0 * np.mean(f_eta0 * sth)
        return a, b

    def gradient(self, f):
        """(d/d eta, (1/eta) d/d theta) components of grad f along (e1, e2)."""
        f_rho = self._d_rho(f)
        f_th = self._d_theta(f)
        f_eta = f_rho / self.R[None, :]
        az = np.empty_like(f)
        chain = f_th - (self.rho[:, None] * self.R_theta[None, :] / self.R[None, :]) * f_rho
        az[1:] = chain[1:] / self.eta[1:]
        a, b = self._pole_fit(f_eta[0])
        cth, sth = np.cos(self.theta), np.sin(self.theta)
        f_eta[0] = a * cth + b * sth
        az[0] = -a * sth + b * cth
        return f_eta, az

    def gradient_cartesian(self, f):
        """Section Cartesian components (d/d xi1, d/d xi2) of grad f."""
        g1, g2 = self.gradient(f)
        cth, sth = np.cos(self.theta)[None, :], np.sin(self.theta)[None, :]
        return g1 * cth - g2 * sth, g1 * sth + g2 * cth

    def divergence(self, ux, uy, weight=None):
        """div(w u) for Cartesian components, nodal second-order FD."""
        if weight is not None:
            ux, uy = weight * ux, weight * uy
        fx, _ = self.gradient_cartesian(ux)
        _, gy = self.gradient_cartesian(uy)
        return fx + gy

    # ---------------------------------------------------------- s-coupling

    def s_shift(self, f_ref_ds, f_eta):
        """Convert a reference-grid s-derivative to fixed-(eta, theta) form.

        d/ds|_eta f = d/ds|_rho f - rho (ds R) (d/d eta f).
        """
        return f_ref_ds - self.rho[:, None] * self.R_s[None, :] * f_eta

    # ------------------------------------------------------------ elements

    def element_ops(self):
        """Bilinear element data, built lazily and cached."""
        if self._elem is None:
            self._elem = _build_element_ops(self)
        return self._elem

    def node_dofs(self):
        """(n_rho+1, n_theta) array of solver unknown indices (-1 at wall)."""
        n_th = self.n_theta
        dofs = np.empty((self.n_rho + 1, n_th), dtype=np.int64)
        dofs[0] = 0
        interior = np.arange(1, (self.n_rho - 1) * n_th + 1, dtype=np.int64)
        dofs[1:-1] = interior.reshape(self.n_rho - 1, n_th)
        dofs[-1] = -1
        return dofs

    def expand_dofs(self, vec):
        """Solver vector -> nodal field (zero at the wall, shared pole)."""
        out = self.zeros()
        dofs = self.node_dofs()
        mask = dofs >= 0
        out[mask] = vec[dofs[mask]]
        return out

    def restrict_nodal(self, f):
        """Nodal field -> solver vector (wall dropped, pole read once)."""
        dofs = self.node_dofs()
        vec = np.zeros(1 + (self.n_rho - 1) * self.n_theta)
        mask = dofs >= 0
        vec[dofs[mask]] = f[mask]
        return vec


def build_mesh(geometry, station, n_rho):
    """SectionMesh for the given station (spec'd entry point)."""
    return SectionMesh(geometry, station, n_rho)


def _geometry_at(mesh, rho_g, theta_g):
    """Map geometry at scattered reference points (element assembly)."""
    R = mesh.radius_at(theta_g)
    Rt = mesh.radius_dtheta_at(theta_g)
    cth, sth = np.cos(theta_g), np.sin(theta_g)
    j11 = R * cth
    j12 = rho_g * (Rt * cth - R * sth)
    j21 = R * sth
    j22 = rho_g * (Rt * sth + R * cth)
    det = rho_g * R**2
    xi1 = rho_g * R * cth
    xi2 = rho_g * R * sth
    return j11, j12, j21, j22, det, xi1, xi2


def _build_element_ops(mesh):
    n_rho, n_th = mesh.n_rho, mesh.n_theta
    n_cells = n_rho * n_th
    kk, jj = np.meshgrid(np.arange(n_rho), np.arange(n_th), indexing="ij")
    kk, jj = kk.ravel(), jj.ravel()

    dofs = mesh.node_dofs()
    jp = (jj + 1) % n_th
    conn = np.stack(
        [dofs[kk, jj], dofs[kk + 1, jj], dofs[kk, jp], dofs[kk + 1, jp]], axis=1
    )
    n_dofs = 1 + (n_rho - 1) * n_th

    uu, vv = np.meshgrid(_GP, _GP, indexing="ij")
    ug, vg = uu.ravel(), vv.ravel()  # 4 Gauss points
    shape = _shape_values(ug, vg)  # (4, 4)
    du = _shape_du(ug, vg)
    dv = _shape_dv(ug, vg)

    rho_g = mesh.rho[kk][:, None] + ug[None, :] * mesh.drho  # (n_cells, 4)
    theta_g = mesh.theta[jj][:, None] + vg[None, :] * mesh.dtheta
    j11, j12, j21, j22, det, xi1, xi2 = _geometry_at(mesh, rho_g, theta_g)
    if det.min() <= 0.0:
        raise GeometryError("section map Jacobian is nonpositive")

    d_rho = du[None, :, :] / mesh.drho  # (1, 4, 4) broadcast over cells
    d_th = dv[None, :, :] / mesh.dtheta
    dx = (j22 / det)[:, :, None] * d_rho - (j21 / det)[:, :, None] * d_th
    dy = -(j12 / det)[:, :, None] * d_rho + (j11 / det)[:, :, None] * d_th
    w = det * (0.25 * mesh.drho * mesh.dtheta)
    beta_g = mesh.beta_at(xi1, xi2)
    eta_g = np.hypot(xi1, xi2)

    # cell centers for reduced (one-point) integration
    rho_c = mesh.rho[kk] + 0.5 * mesh.drho
    theta_c = mesh.theta[jj] + 0.5 * mesh.dtheta
    c11, c12, c21, c22, cdet, cxi1, cxi2 = _geometry_at(mesh, rho_c, theta_c)
    cdu = _shape_du(0.5, 0.5)[None, :] / mesh.drho
    cdv = _shape_dv(0.5, 0.5)[None, :] / mesh.dtheta
    c_dx = (c22 / cdet)[:, None] * cdu - (c21 / cdet)[:, None] * cdv
    c_dy = -(c12 / cdet)[:, None] * cdu + (c11 / cdet)[:, None] * cdv

    return ElementOps(
        conn=conn,
        n_dofs=n_dofs,
        shape=shape,
        w=w,
        dx=dx,
        dy=dy,
        beta=beta_g,
        xi1=xi1,
        xi2=xi2,
        eta=eta_g,
        theta=theta_g,
        c_shape=_shape_values(0.5, 0.5),
        c_area=cdet * (mesh.drho * mesh.dtheta),
        c_dx=c_dx,
        c_dy=c_dy,
        c_beta=mesh.beta_at(cxi1, cxi2),
    )


def interpolate_to_gauss(mesh, f):
    """Nodal field -> values at the element Gauss points, (n_cells, 4)."""
    ops = mesh.element_ops()
    corners = _corner_values(mesh, f)
    return np.einsum("ga,ca->cg", ops.shape, corners)


def interpolate_to_centers(mesh, f):
    """Nodal field -> cell-center values (plain 4-corner average)."""
    corners = _corner_values(mesh, f)
    return corners.mean(axis=1)


def _corner_values(mesh, f):
    n_rho, n_th = mesh.n_rho, mesh.n_theta
    kk, jj = np.meshgrid(np.arange(n_rho), np.arange(n_th), indexing="ij")
    kk, jj = kk.ravel(), jj.ravel()
    jp = (jj + 1) % n_th
    return np.stack([f[kk, jj], f[kk + 1, jj], f[kk, jp], f[kk + 1, jp]], axis=1)
