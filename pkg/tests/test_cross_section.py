"""Section mesh: quadrature, gradients, divergence, element data."""

import numpy as np
import pytest

from thinpipe import Centerline, GeometryError, PipeGeometry, RadiusLaw
from thinpipe.cross_section import build_mesh, interpolate_to_gauss


def disk_geometry(n_theta=64, n_s=8, h=0.05):
    return PipeGeometry(Centerline.straight(n_s), RadiusLaw.constant(1.0), h, n_theta)


def wavy_geometry(n_theta=64, n_s=8, h=0.05):
    law = RadiusLaw.theta_cosine(1.0, 0.2, mode=1)
    return PipeGeometry(Centerline.straight(n_s), law, h, n_theta)


def torus_geometry(n_theta=64, n_s=8, h=0.05, rc=1.0):
    return PipeGeometry(Centerline.circular_arc(rc, n_s), RadiusLaw.constant(1.0), h, n_theta)


def convergence_orders(errs):
    e = np.asarray(errs)
    return np.log2(e[:-1] / e[1:])


def test_minimum_radial_resolution():
    with pytest.raises(GeometryError, match="at least 4"):
        build_mesh(disk_geometry(8), 0, 3)


def test_disk_area():
    mesh = build_mesh(disk_geometry(64), 0, 64)
    assert abs(mesh.integrate(np.ones_like(mesh.eta)) - np.pi) < 1e-12


def test_wavy_area():
    # 0.5 * int (1 + 0.2 cos t)^2 dt = pi * 1.02; trapezoid in theta is
    # exact for this trigonometric polynomial
    mesh = build_mesh(wavy_geometry(64), 0, 64)
    assert abs(mesh.integrate(np.ones_like(mesh.eta)) - 1.02 * np.pi) < 1e-12


def test_weighted_area_straight_equals_plain():
    mesh = build_mesh(disk_geometry(32), 0, 16)
    one = np.ones_like(mesh.eta)
    assert mesh.integrate(one, weight=mesh.beta) == pytest.approx(mesh.integrate(one), abs=1e-14)


def test_weight_cancellation_on_torus():
    mesh = build_mesh(torus_geometry(32), 2, 16)
    area = mesh.integrate(np.ones_like(mesh.eta))
    assert mesh.integrate(2.0 / mesh.beta, weight=mesh.beta) == pytest.approx(2.0 * area, rel=1e-13)


def test_gradient_constant_field():
    mesh = build_mesh(wavy_geometry(32), 0, 16)
    g1, g2 = mesh.gradient(np.full_like(mesh.eta, 3.7))
    assert np.max(np.abs(g1)) < 1e-13
    assert np.max(np.abs(g2)) < 1e-13


def test_gradient_radial_quadratic_on_disk():
    mesh = build_mesh(disk_geometry(64), 0, 32)
    g1, g2 = mesh.gradient(mesh.eta**2)
    assert np.max(np.abs(g1 - 2.0 * mesh.eta)) < 1e-12  # FD exact for quadratics
    assert np.max(np.abs(g2)) < 1e-12


def test_gradient_unit_on_cartesian_coordinate():
    errs = []
    for n in (32, 64, 128):
        mesh = build_mesh(wavy_geometry(n), 0, n)
        g1, g2 = mesh.gradient(mesh.xi1)
        errs.append(np.max(np.abs(np.hypot(g1, g2) - 1.0)))
    assert errs[1] < 2.5e-3  # 64 x 64
    assert np.all(convergence_orders(errs) >= 1.9)


def test_gradient_cartesian_pole_row():
    mesh = build_mesh(wavy_geometry(64), 0, 32)
    f = mesh.xi1 + mesh.xi2**2
    fx, fy = mesh.gradient_cartesian(f)
    assert np.max(np.abs(fx[0] - 1.0)) < 1e-3
    assert np.max(np.abs(fy[0])) < 1e-3
    assert np.max(np.abs(fx - 1.0)) < 1e-2
    assert np.max(np.abs(fy - 2.0 * mesh.xi2)) < 1e-2


def test_divergence_theorem_weighted():
    # int div(beta v) dsigma = 0 for v vanishing on the wall
    errs = []
    for n in (16, 32, 64):
        mesh = build_mesh(torus_geometry(n, h=0.2), 3, n)
        bubble = 1.0 - (mesh.eta / mesh.R[None, :]) ** 2
        ux = bubble * np.sin(mesh.xi1 + 0.3)
        uy = bubble * np.cos(0.7 * mesh.xi2)
        div = mesh.divergence(ux, uy, weight=mesh.beta)
        scale = mesh.integrate(np.abs(div))
        errs.append(abs(mesh.integrate(div)) / scale)
    assert errs[-1] < 1e-3
    assert np.all(convergence_orders(errs) >= 1.8)


def test_quadrature_refinement_order():
    ref = build_mesh(wavy_geometry(512), 0, 512)
    f_ref = np.exp(ref.xi1) * np.cos(ref.xi2)
    exact = ref.integrate(f_ref)
    errs = []
    for n in (16, 32, 64):
        mesh = build_mesh(wavy_geometry(n), 0, n)
        errs.append(abs(mesh.integrate(np.exp(mesh.xi1) * np.cos(mesh.xi2)) - exact))
    assert np.all(convergence_orders(errs) >= 1.9)


def test_frame_cartesian_roundtrip():
    mesh = build_mesh(wavy_geometry(16), 0, 8)
    u1 = np.cos(mesh.eta)
    u2 = mesh.eta * 0.5 + 0.1
    ux, uy = mesh.to_cartesian(u1, u2)
    v1, v2 = mesh.to_frame(ux, uy)
    assert np.allclose(v1, u1, atol=1e-14)
    assert np.allclose(v2, u2, atol=1e-14)


def test_element_areas_match_quadrature():
    for make in (disk_geometry, wavy_geometry):
        mesh = build_mesh(make(32), 0, 16)
        ops = mesh.element_ops()
        area = mesh.integrate(np.ones_like(mesh.eta))
        assert abs(ops.w.sum() - area) < 1e-6
        assert abs(ops.c_area.sum() - area) < 1e-3


def test_element_connectivity():
    mesh = build_mesh(disk_geometry(8), 0, 4)
    ops = mesh.element_ops()
    assert ops.n_dofs == 1 + 3 * 8
    assert ops.conn.shape == (4 * 8, 4)
    # pole ring cells share unknown 0; wall corners are eliminated
    assert np.all(ops.conn[: mesh.n_theta, 0] == 0)
    assert np.all(ops.conn[: mesh.n_theta, 2] == 0)
    assert np.all(ops.conn[-mesh.n_theta :, 1] == -1)
    assert np.all(ops.conn[-mesh.n_theta :, 3] == -1)


def test_gauss_interpolation_constant_exact():
    mesh = build_mesh(wavy_geometry(16), 0, 8)
    vals = interpolate_to_gauss(mesh, np.full_like(mesh.eta, 2.5))
    assert np.allclose(vals, 2.5, atol=1e-14)


def test_dof_expand_restrict_roundtrip():
    mesh = build_mesh(disk_geometry(8), 0, 5)
    rng = np.random.default_rng(7)
    vec = rng.standard_normal(1 + 4 * 8)
    f = mesh.expand_dofs(vec)
    assert np.allclose(mesh.restrict_nodal(f), vec)
    assert np.all(f[-1] == 0.0)
    assert np.all(f[0] == vec[0])
