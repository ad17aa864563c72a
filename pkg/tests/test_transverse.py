"""Section correction flow: manufactured solution, compatibility, scaling."""

import numpy as np
import pytest
import sympy as sp

from thinpipe import Centerline, PipeGeometry, RadiusLaw
from thinpipe.cross_section import build_mesh
from thinpipe.errors import SolverError
from thinpipe.prandtl import rigidity_profile
from thinpipe.reynolds import solve_reynolds
from thinpipe.transverse import (
    axial_velocity_data,
    check_claim_identity,
    check_compatibility,
    solve_transverse,
    solve_transverse_system,
    transverse_s_derivative,
)


def bent_disk(n_theta=64, n_s=8, h=0.12, rc=0.9):
    return PipeGeometry(
        Centerline.circular_arc(rc, n_s), RadiusLaw.constant(1.0), h, n_theta
    )


def orders(errs):
    e = np.asarray(errs)
    return np.log2(e[:-1] / e[1:])


def mms_data(mesh):
    """Polynomial (v, p) on the unit disk with the section's beta weight."""
    x1, x2 = sp.symbols("x1 x2")
    bubble = 1 - x1**2 - x2**2
    v1 = bubble * (sp.Rational(3, 10) + x2)
    v2 = bubble * (x1 - sp.Rational(1, 5))
    p = x1 + 2 * x2 + x1 * x2
    beta = 1 - mesh.h * (mesh.k1 * x1 + mesh.k2 * x2)
    forces = []
    for comp, direction in ((v1, x1), (v2, x2)):
        lap = sp.diff(beta * sp.diff(comp, x1), x1) + sp.diff(
            beta * sp.diff(comp, x2), x2
        )
        forces.append(sp.simplify(-lap / beta + sp.diff(p, direction)))
    g = sp.simplify(-(sp.diff(beta * v1, x1) + sp.diff(beta * v2, x2)))
    make = lambda e: sp.lambdify((x1, x2), e, "numpy")
    return tuple(make(e) for e in (forces[0], forces[1], g, v1, v2, p))


# -------------------------------------------------------------- zero oracles


def test_zero_data_zero_solution():
    mesh = build_mesh(bent_disk(16), 2, 12)
    zero = mesh.zeros()
    sol = solve_transverse_system(mesh, zero, zero, zero)
    assert np.all(sol.v1 == 0.0)
    assert np.all(sol.v2 == 0.0)
    assert np.max(np.abs(sol.p2)) == 0.0
    assert sol.compat_residual == 0.0


def test_straight_pipe_zero_correction():
    g = PipeGeometry(Centerline.straight(7), RadiusLaw.constant(1.0), 0.05, 16)
    prof = rigidity_profile(g, 12)
    p = solve_reynolds(prof, flow_rate=1.0)
    sol = solve_transverse(prof, p, 3)
    assert np.max(np.abs(sol.v1)) < 1e-10
    assert np.max(np.abs(sol.v2)) < 1e-10
    assert np.max(np.abs(sol.p2)) < 1e-6


# ----------------------------------------------------- manufactured solution


def test_manufactured_solution_orders():
    errs_v, errs_vl2, errs_p = [], [], []
    for n in (16, 32, 64):
        mesh = build_mesh(bent_disk(n), 3, n)
        f1, f2, g, v1x, v2x, px = mms_data(mesh)
        x1, x2 = mesh.xi1, mesh.xi2
        sol = solve_transverse_system(
            mesh, f1(x1, x2), f2(x1, x2), g(x1, x2), compat_tol=1e-2
        )
        d1 = sol.v1 - v1x(x1, x2)
        d2 = sol.v2 - v2x(x1, x2)
        pm = px(x1, x2)
        pm = pm - mesh.integrate(pm) / mesh.integrate(np.ones_like(pm))
        errs_v.append(max(np.max(np.abs(d1)), np.max(np.abs(d2))))
        errs_vl2.append(np.sqrt(mesh.integrate(d1**2 + d2**2)))
        errs_p.append(np.sqrt(mesh.integrate((sol.p2 - pm) ** 2)))
        assert np.all(sol.v1[-1] == 0.0)
        assert np.all(sol.v2[-1] == 0.0)
        assert abs(mesh.integrate(sol.p2)) < 1e-12
    assert np.all(orders(errs_v) >= 1.9)
    assert np.all(orders(errs_vl2) >= 1.9)
    assert np.all(orders(errs_p) >= 1.8)
    assert errs_v[-1] < 5e-3
    assert errs_p[-1] < 2e-2


def test_linearity_in_data():
    mesh = build_mesh(bent_disk(24), 3, 20)
    f1, f2, g, *_ = mms_data(mesh)
    x1, x2 = mesh.xi1, mesh.xi2
    a = solve_transverse_system(mesh, f1(x1, x2), f2(x1, x2), g(x1, x2), compat_tol=1e-2)
    b = solve_transverse_system(
        mesh, 2 * f1(x1, x2), 2 * f2(x1, x2), 2 * g(x1, x2), compat_tol=1e-2
    )
    scale = np.max(np.abs(a.v1))
    assert np.max(np.abs(b.v1 - 2 * a.v1)) < 1e-9 * scale
    assert np.max(np.abs(b.v2 - 2 * a.v2)) < 1e-9 * scale


# ------------------------------------------------------------- compatibility


def wavy_bent_pipe(n_theta=24, n_s=17):
    law = RadiusLaw.s_sine(1.0, 0.2)
    return PipeGeometry(Centerline.circular_arc(0.9, n_s), law, 0.08, n_theta)


def test_compatibility_telescopes():
    g = wavy_bent_pipe()
    prof = rigidity_profile(g, 16)
    p = solve_reynolds(prof, flow_rate=1.0)
    for i in (4, 8, 12):
        mesh, _, dsv31 = axial_velocity_data(prof, p, i)
        norm = np.sqrt(mesh.integrate(dsv31**2))
        assert norm > 1e-6  # data actually nonzero here
        assert check_compatibility(mesh, dsv31) < 1e-12 * norm


def test_wrong_flux_detected():
    g = wavy_bent_pipe()
    prof = rigidity_profile(g, 16)
    p = solve_reynolds(prof, flow_rate=1.0)
    p.dp0 = p.dp0 * (1.0 + 0.1 * p.s)  # breaks the flux law on purpose
    with pytest.raises(SolverError, match="incompatible"):
        solve_transverse(prof, p, 8)


def test_pipeline_solve_runs_clean():
    g = wavy_bent_pipe()
    prof = rigidity_profile(g, 16)
    p = solve_reynolds(prof, flow_rate=1.0)
    sol = solve_transverse(prof, p, 8)
    mesh, _, dsv31 = axial_velocity_data(prof, p, 8)
    norm = np.sqrt(mesh.integrate(dsv31**2))
    assert sol.div_residual < 1e-6 * norm
    assert np.all(sol.v1[-1] == 0.0)
    assert abs(mesh.integrate(sol.p2)) < 1e-12


# ------------------------------------------------------------------- scaling


def physical_norm(mesh, v1, v2):
    """Station L2 norm with the physical volume weight h^2 * beta."""
    return mesh.h * np.sqrt(mesh.integrate(mesh.beta * (v1**2 + v2**2)))


def test_constant_radius_torus_correction_vanishes():
    # c''' of a circle is tangential, so every data term of the correction
    # problem is zero on a constant-radius bent pipe.
    g = PipeGeometry(Centerline.circular_arc(0.8, 9), RadiusLaw.constant(1.0), 0.1, 16)
    prof = rigidity_profile(g, 12)
    p = solve_reynolds(prof, flow_rate=1.0)
    sol = solve_transverse(prof, p, 4)
    assert np.max(np.abs(sol.v1)) < 1e-12
    assert np.max(np.abs(sol.v2)) < 1e-12


def test_torus_family_scaling_of_correction():
    hs = (0.1, 0.05, 0.025)
    norms = []
    for h in hs:
        g = PipeGeometry(
            Centerline.circular_arc(0.8, 9), RadiusLaw.s_sine(1.0, 0.2), h, 16
        )
        prof = rigidity_profile(g, 12)
        p = solve_reynolds(prof, flow_rate=1.0)
        sol = solve_transverse(prof, p, 4)
        norms.append(physical_norm(sol.mesh, sol.v1, sol.v2))
    slope = np.polyfit(np.log(hs), np.log(norms), 1)[0]
    assert slope >= 0.8
    assert norms[0] > norms[1] > norms[2]


def test_helix_curvature_scaling_of_correction():
    # pure-curvature forcing: transverse part of c''' drives the correction
    hs = (0.1, 0.05, 0.025)
    norms = []
    for h in hs:
        g = PipeGeometry(Centerline.helix(1.0, 0.8, 9), RadiusLaw.constant(1.0), h, 16)
        prof = rigidity_profile(g, 12)
        p = solve_reynolds(prof, flow_rate=1.0)
        sol = solve_transverse(prof, p, 4)
        norms.append(physical_norm(sol.mesh, sol.v1, sol.v2))
    slope = np.polyfit(np.log(hs), np.log(norms), 1)[0]
    assert slope >= 0.8


# ------------------------------------------------------------- s-derivatives


def test_s_derivative_straight_zero():
    g = PipeGeometry(Centerline.straight(7), RadiusLaw.constant(1.0), 0.05, 12)
    prof = rigidity_profile(g, 10)
    p = solve_reynolds(prof, flow_rate=1.0)
    sols = [solve_transverse(prof, p, i) for i in range(len(prof.s))]
    dv1, dv2 = transverse_s_derivative(sols)
    assert np.max(np.abs(dv1)) < 1e-8
    assert np.max(np.abs(dv2)) < 1e-8


def test_s_derivative_needs_three_stations():
    g = PipeGeometry(Centerline.straight(7), RadiusLaw.constant(1.0), 0.05, 12)
    prof = rigidity_profile(g, 10)
    p = solve_reynolds(prof, flow_rate=1.0)
    sols = [solve_transverse(prof, p, i) for i in range(2)]
    with pytest.raises(SolverError, match="3 stations"):
        transverse_s_derivative(sols)


# ------------------------------------------------------------ claim identity


def claim_geometry(n):
    law = RadiusLaw.mixed(1.0, 0.2, 1, 0.3)
    return PipeGeometry(Centerline.circular_arc(0.9, n), law, 0.12, n)


def claim_velocity(x1, x2, s):
    return (
        (1.0 + 0.2 * s) * (x1**2 * x2 + 0.3),
        (1.0 - 0.1 * s) * (x2**2 - x1),
    )


def test_claim_identity_vanishes_at_quadrature_level():
    res = {}
    for n in (16, 32, 64):
        g = claim_geometry(n)
        res[n] = check_claim_identity(g, n // 2, n, claim_velocity)
    quad_err = abs(res[16].area_part - res[32].area_part) + abs(
        res[16].boundary_part - res[32].boundary_part
    )
    assert abs(res[16].total) <= 10.0 * quad_err
    totals = [abs(res[n].total) for n in (16, 32, 64)]
    assert np.all(orders(totals) >= 1.9)


def test_claim_identity_negative_control():
    g = claim_geometry(96)
    good = check_claim_identity(g, 48, 96, claim_velocity)
    bad = check_claim_identity(g, 48, 96, claim_velocity, g_scale=2.0)
    assert abs(bad.total) > 1e3 * abs(good.total)


def test_claim_identity_needs_interior_station():
    g = claim_geometry(16)
    with pytest.raises(SolverError, match="interior"):
        check_claim_identity(g, 0, 16, claim_velocity)
