"""Weighted cross-section problem and the rigidity profile G(s).

The section function Psi solves

    -div'( beta grad' Psi ) = 2 in omega(s),    Psi = 0 on the wall,

the divergence form of the beta-weighted problem (multiply through by
beta > 0).  The rigidity

    G(s) = 2 int Psi dsigma = int beta |grad' Psi|^2 dsigma

is the conductivity of the 1D pressure equation.  The two expressions are
computed by independent discrete routes (nodal quadrature vs nodal FD
energy), so their defect measures discretization error honestly.

Assembly uses the mesh's bilinear elements: symmetric positive definite,
9-point stencil in the interior, degenerating to the classical 5-point one
when the radius law has no theta-dependence.  The same kernel accepts a
general right-hand side and a general coefficient, which serves the
perturbation solves and the manufactured-solution tests.

s-derivatives of Psi are taken on the reference (rho, theta) grid, which
follows the moving wall; the fixed-(eta, theta) derivative used in section
integrals is recovered by the chain-rule shift -rho (ds R) (d Psi / d eta).
The rigidity derivative uses the differentiated quadrature

    ds G = 2 int ds Psi |_(eta fixed) dsigma

(the wall-motion term vanishes because Psi is zero there).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, diags
from scipy.sparse.linalg import cg, spsolve

from .cross_section import SectionMesh, build_mesh, interpolate_to_gauss
from .errors import SolverError

DIRECT_SOLVE_MAX_DOFS = 10_000
CG_RTOL = 1e-10


def assemble_stiffness(mesh, weight="beta"):
    """SPD stiffness matrix for -div(w grad u) with zero wall data.

    weight is "beta", "one", or an (n_cells, n_gauss) coefficient array.
    """
    ops = mesh.element_ops()
    if isinstance(weight, str):
        wg = ops.beta if weight == "beta" else np.ones_like(ops.beta)
    else:
        wg = np.asarray(weight)
    coef = wg * ops.w
    ke = np.einsum("cg,cga,cgb->cab", coef, ops.dx, ops.dx)
    ke += np.einsum("cg,cga,cgb->cab", coef, ops.dy, ops.dy)

    rows = np.broadcast_to(ops.conn[:, :, None], ke.shape)
    cols = np.broadcast_to(ops.conn[:, None, :], ke.shape)
    mask = (rows >= 0) & (cols >= 0)
    a = coo_matrix(
        (ke[mask], (rows[mask], cols[mask])), shape=(ops.n_dofs, ops.n_dofs)
    )
    return a.tocsr()


def assemble_load(mesh, rhs):
    """Consistent load vector; rhs is a constant, nodal array, or callable.

    Callables receive the section Cartesian Gauss coordinates (xi1, xi2).
    """
    ops = mesh.element_ops()
    if callable(rhs):
        fg = rhs(ops.xi1, ops.xi2)
    elif np.ndim(rhs) == 0:
        fg = np.full_like(ops.w, float(rhs))
    else:
        fg = interpolate_to_gauss(mesh, np.asarray(rhs))
    fe = np.einsum("cg,ga->ca", ops.w * fg, ops.shape)
    b = np.zeros(ops.n_dofs)
    mask = ops.conn >= 0
    np.add.at(b, ops.conn[mask], fe[mask])
    return b


def convective_load(mesh, scalar, kvec):
    """Load vector of (k . grad f) tested against the basis, by parts.

    With test functions vanishing on the wall and k a constant vector,
    int (k . grad f) phi = -int f (k . grad phi), which avoids an extra
    layer of FD error when f is only known nodally.
    """
    ops = mesh.element_ops()
    fg = interpolate_to_gauss(mesh, np.asarray(scalar))
    kx, ky = float(kvec[0]), float(kvec[1])
    le = -np.einsum("cg,cga->ca", ops.w * fg, kx * ops.dx + ky * ops.dy)
    b = np.zeros(ops.n_dofs)
    mask = ops.conn >= 0
    np.add.at(b, ops.conn[mask], le[mask])
    return b


def solve_spd(a, b):
    """Direct factorization for small systems, Jacobi-CG above.

    Returns (solution, relative residual).
    """
    bn = np.linalg.norm(b)
    if bn == 0.0:
        return np.zeros_like(b), 0.0
    if a.shape[0] <= DIRECT_SOLVE_MAX_DOFS:
        x = spsolve(a.tocsc(), b)
    else:
        m = diags(1.0 / a.diagonal())
        try:
            x, info = cg(a, b, rtol=CG_RTOL, maxiter=20 * a.shape[0], M=m)
        except TypeError:  # older scipy spells the tolerance 'tol'
            x, info = cg(a, b, tol=CG_RTOL, maxiter=20 * a.shape[0], M=m)
        if info != 0:
            raise SolverError(f"conjugate gradients failed to converge (info={info})")
    res = float(np.linalg.norm(a @ x - b) / bn)
    if res > 1e-6:
        raise SolverError(f"linear solve residual {res:.2e} too large")
    return x, res


@dataclass
class PrandtlSolution:
    """Nodal section function with its rigidity quadratures."""

    mesh: SectionMesh
    psi: np.ndarray
    residual: float
    station: int
    G_bulk: float = field(init=False)
    G_energy: float = field(init=False)

    def __post_init__(self):
        self.G_bulk = 2.0 * self.mesh.integrate(self.psi)
        g1, g2 = self.mesh.gradient(self.psi)
        self.G_energy = self.mesh.integrate(g1**2 + g2**2, weight=self.mesh.beta)


def solve_prandtl(mesh, rhs=2.0, weight="beta"):
    """Solve -div(w grad Psi) = rhs with zero wall data on one section."""
    a = assemble_stiffness(mesh, weight=weight)
    b = assemble_load(mesh, rhs)
    x, res = solve_spd(a, b)
    return PrandtlSolution(mesh=mesh, psi=mesh.expand_dofs(x), residual=res, station=mesh.station)


def rigidity(sol):
    """Both rigidity quadratures (bulk, energy); their gap is discretization error."""
    return sol.G_bulk, sol.G_energy


@dataclass
class RigidityProfile:
    """G(s) on the station grid plus the per-station section solutions."""

    s: np.ndarray
    G: np.ndarray
    G_energy: np.ndarray
    residual: np.ndarray
    solutions: list
    dsG: np.ndarray | None = None
    dpsi: np.ndarray | None = None  # fixed-(eta, theta) s-derivative
    dpsi_ref: np.ndarray | None = None  # reference-grid s-derivative

    @property
    def bounds(self):
        return float(self.G.min()), float(self.G.max())


def rigidity_profile(geometry, n_rho, threads=None):
    """Solve every station and assemble the rigidity profile.

    Stations are independent; with threads > 1 they are solved from a
    thread pool into preallocated slots, so the result does not depend on
    scheduling order.
    """
    n_st = geometry.n_s + 1
    sols = [None] * n_st

    def work(i):
        sols[i] = solve_prandtl(build_mesh(geometry, i, n_rho))

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(n_st)))
    else:
        for i in range(n_st):
            work(i)

    prof = RigidityProfile(
        s=geometry.s.copy(),
        G=np.array([s.G_bulk for s in sols]),
        G_energy=np.array([s.G_energy for s in sols]),
        residual=np.array([s.residual for s in sols]),
        solutions=sols,
    )
    if np.any(prof.G <= 0.0):
        raise SolverError("nonpositive rigidity on the profile")
    return prandtl_s_derivatives(prof)


def _fd_s(values, ds):
    """Second-order d/ds along axis 0 with one-sided ends."""
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * ds)
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * ds)
    out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * ds)
    return out


def prandtl_s_derivatives(profile):
    """Fill ds Psi (reference and fixed-eta forms) and ds G on the profile."""
    if len(profile.s) < 3:
        raise SolverError("s-derivatives need at least 3 stations")
    ds = profile.s[1] - profile.s[0]
    psis = np.stack([sol.psi for sol in profile.solutions])
    dref = _fd_s(psis, ds)
    dpsi = np.empty_like(dref)
    dsg = np.empty(len(profile.s))
    for i, sol in enumerate(profile.solutions):
        f_eta, _ = sol.mesh.gradient(sol.psi)
        dpsi[i] = sol.mesh.s_shift(dref[i], f_eta)
        dsg[i] = 2.0 * sol.mesh.integrate(dpsi[i])
    profile.dpsi_ref = dref
    profile.dpsi = dpsi
    profile.dsG = dsg
    return profile
