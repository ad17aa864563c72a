"""Assembled field: closed-form profiles, norms, cutoff, exports."""

import numpy as np
import pytest

from thinpipe.errors import SolverError
from thinpipe.fields import (
    CSV_COLUMNS,
    assemble,
    cutoff_profile,
    geometry_fingerprint,
    norms,
    read_field_csv,
    write_field_csv,
    write_field_vtk,
)
from thinpipe.geometry import Centerline, PipeGeometry, RadiusLaw
from thinpipe.prandtl import rigidity_profile
from thinpipe.reynolds import solve_reynolds
from thinpipe.transverse import transverse_profile


def straight_case(h=0.1, n_s=16, n=32, flow=1.0, outlet=0.0):
    geo = PipeGeometry(Centerline.straight(n_s=n_s), RadiusLaw.constant(1.0), h=h, n_theta=n)
    prof = rigidity_profile(geo, n)
    pres = solve_reynolds(prof, flow, outlet)
    return geo, prof, pres


def bent_case(h=0.1, n_s=12, n=16):
    geo = PipeGeometry(Centerline.circular_arc(0.9, n_s=n_s), RadiusLaw.s_sine(1.0, 0.2), h=h, n_theta=n)
    prof = rigidity_profile(geo, n)
    pres = solve_reynolds(prof, 1.0, 0.0)
    return geo, prof, pres, transverse_profile(prof, pres)


def small_field():
    geo = PipeGeometry(Centerline.circular_arc(0.9, n_s=4), RadiusLaw.constant(1.0), h=0.1, n_theta=8)
    prof = rigidity_profile(geo, 4)
    pres = solve_reynolds(prof, 1.0, 0.0)
    return assemble(geo, prof, pres)


def test_straight_disk_axial_profile():
    h = 0.1
    geo, prof, pres = straight_case(h=h)
    fld = assemble(geo, prof, pres)
    mesh = fld.meshes[0]
    v3_exact = (2.0 / (np.pi * h)) * (1.0 - mesh.eta**2)
    assert np.abs(fld.v3[0] - v3_exact).max() <= 5e-3 * v3_exact.max()
    p_exact = (8.0 / np.pi) * (1.0 - fld.s) / h**3
    assert np.abs(fld.pressure - p_exact).max() <= 5e-3 * p_exact.max()
    assert not np.any(fld.v1) and not np.any(fld.v2)


def test_straight_disk_norms():
    h = 0.1
    geo, prof, pres = straight_case(h=h)
    rep = norms(assemble(geo, prof, pres))
    vel_exact = 2.0 / np.sqrt(3.0 * np.pi)
    assert abs(rep.velocity - vel_exact) <= 5e-3 * vel_exact
    grad_exact = np.sqrt(8.0 / np.pi)  # of the parabolic profile, h-free scaling
    assert abs(h * rep.velocity_gradient - grad_exact) <= 5e-3 * grad_exact
    pfl_exact = 8.0 / np.sqrt(12.0 * np.pi)
    assert abs(h**2 * rep.pressure_fluctuation - pfl_exact) <= 1e-2 * pfl_exact
    assert rep.composite == rep.h * rep.velocity_gradient + rep.velocity + rep.h**2 * rep.pressure_fluctuation


def test_station_flux_matches_flow_rate():
    geo, prof, pres = straight_case(n_s=8, flow=1.3)
    fld = assemble(geo, prof, pres)
    assert np.abs(fld.flux - geo.h * 1.3).max() <= 1e-12
    geo2, prof2, pres2, tr2 = bent_case()
    fld2 = assemble(geo2, prof2, pres2, transverse=tr2)
    assert np.abs(fld2.flux - geo2.h * 1.0).max() <= 1e-12


def test_no_slip_exact_at_wall():
    geo, prof, pres, tr = bent_case(n_s=8)
    fld = assemble(geo, prof, pres, transverse=tr)
    for comp in (fld.v1, fld.v2, fld.v3, fld.vx, fld.vy, fld.vz):
        assert np.all(comp[:, -1, :] == 0.0)


def test_inlet_condition():
    geo, prof, pres, tr = bent_case(n_s=8)
    fld = assemble(geo, prof, pres, transverse=tr)
    assert not np.any(fld.v1[0]) and not np.any(fld.v2[0])
    v3_inlet = 2.0 / (geo.h * prof.G[0]) * pres.F0 * prof.solutions[0].psi
    assert np.abs(fld.v3[0] - v3_inlet).max() <= 1e-12 * np.abs(v3_inlet).max()


def test_zero_flow_rate():
    geo, prof, pres = straight_case(n_s=8, flow=0.0, outlet=0.7)
    fld = assemble(geo, prof, pres)
    for comp in (fld.v1, fld.v2, fld.v3, fld.vx, fld.vy, fld.vz):
        assert not np.any(comp)
    assert np.all(fld.pressure == 0.7 / geo.h**3)
    rep = norms(fld)
    assert rep.velocity == 0.0 and rep.velocity_gradient == 0.0
    assert rep.pressure_fluctuation == 0.0


def test_frame_cartesian_isometry():
    geo, prof, pres, tr = bent_case()
    fld = assemble(geo, prof, pres, transverse=tr)
    sq_frame = fld.v1**2 + fld.v2**2 + fld.v3**2
    sq_cart = fld.vx**2 + fld.vy**2 + fld.vz**2
    assert np.abs(sq_frame - sq_cart).max() <= 1e-12 * sq_cart.max()


def test_cutoff_ramp_values():
    h = 0.1
    s = np.array([0.0, h, 1.5 * h, 2.0 * h, 0.5, 1.0 - 2.0 * h, 1.0 - 1.5 * h, 1.0 - h, 1.0])
    ramp = cutoff_profile(s, h)
    assert np.allclose(ramp, [0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 0.5, 0.0, 0.0])
    fine = cutoff_profile(np.linspace(h, 2 * h, 101), h)
    assert np.all(np.diff(fine) >= 0.0)


def test_cutoff_flag():
    geo, prof, pres, tr = bent_case(n_s=8)
    on = assemble(geo, prof, pres, transverse=tr)
    off = assemble(geo, prof, pres, transverse=tr, cutoff=False)
    assert np.abs(off.v1[0]).max() > 1e-3  # the correction is genuinely nonzero there
    assert not np.any(on.v1[0])
    mid = len(geo.s) // 2  # ramp is exactly 1 away from the ends
    assert np.array_equal(on.v1[mid], off.v1[mid])
    assert np.array_equal(on.v2[mid], off.v2[mid])


def test_norms_bounded_across_slenderness():
    cl = Centerline.circular_arc(0.9, n_s=12)
    rl = RadiusLaw.s_sine(1.0, 0.2)
    comps = []
    for h in (0.2, 0.1, 0.05):
        geo = PipeGeometry(cl, rl, h=h, n_theta=16)
        prof = rigidity_profile(geo, 16)
        pres = solve_reynolds(prof, 1.0, 0.0)
        rep = norms(assemble(geo, prof, pres, transverse=transverse_profile(prof, pres)))
        comps.append(rep.composite)
    comps = np.array(comps)
    assert comps.max() <= 1.1 * comps.min()


def test_difference_norms_linearity():
    geo, prof, pres = straight_case(n_s=8)
    pres2 = solve_reynolds(prof, 2.0, 0.0)
    f1 = assemble(geo, prof, pres)
    f2 = assemble(geo, prof, pres2)
    # the field is linear in the flow rate, so f2 - f1 has the norms of f1
    diff = norms(f2, f1)
    ref = norms(f1)
    assert abs(diff.velocity - ref.velocity) <= 1e-12 * ref.velocity
    assert abs(diff.pressure_fluctuation - ref.pressure_fluctuation) <= 1e-12 * ref.pressure_fluctuation
    zero = norms(f1, f1)
    assert zero.velocity == 0.0 and zero.composite == 0.0


def test_station_mismatch_rejected():
    geo, prof, pres = straight_case(n_s=8, n=8)
    other_geo = PipeGeometry(Centerline.straight(n_s=4), RadiusLaw.constant(1.0), h=0.1, n_theta=8)
    other_prof = rigidity_profile(other_geo, 8)
    other_pres = solve_reynolds(other_prof, 1.0, 0.0)
    with pytest.raises(SolverError, match="station mismatch"):
        assemble(geo, prof, other_pres)
    with pytest.raises(SolverError, match="station mismatch"):
        assemble(geo, other_prof, pres)
    tr = transverse_profile(prof, pres)
    with pytest.raises(SolverError, match="station mismatch"):
        assemble(geo, prof, pres, transverse=tr[:-1])


def test_incompatible_grids_rejected():
    geo, prof, pres = straight_case(n_s=8, n=8)
    fld = assemble(geo, prof, pres)
    prof2 = rigidity_profile(geo, 12)
    fld2 = assemble(geo, prof2, solve_reynolds(prof2, 1.0, 0.0))
    with pytest.raises(SolverError, match="grids incompatible"):
        norms(fld, fld2)


def test_csv_round_trip(tmp_path):
    fld = small_field()
    path = tmp_path / "field.csv"
    write_field_csv(fld, path)
    lines = path.read_text().splitlines()
    n_st, nr, nt = fld.shape
    assert len(lines) == 1 + n_st * nr * nt
    assert lines[0] == ",".join(CSV_COLUMNS)
    cols = read_field_csv(path)
    assert np.array_equal(cols["v3"], fld.v3.reshape(n_st, -1).ravel())
    assert np.array_equal(cols["x"], fld.x.reshape(n_st, -1).ravel())
    assert np.array_equal(cols["p"], np.repeat(fld.pressure, nr * nt))
    assert np.array_equal(cols["s"], np.repeat(fld.s, nr * nt))


def test_vtk_structure(tmp_path):
    fld = small_field()
    path = tmp_path / "field.vtk"
    write_field_vtk(fld, path)
    lines = path.read_text().splitlines()
    n_st, nr, nt = fld.shape
    npts = n_st * nr * (nt + 1)
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[3] == "DATASET STRUCTURED_GRID"
    assert lines[4] == f"DIMENSIONS {nr} {nt + 1} {n_st}"
    assert lines[5] == f"POINTS {npts} double"
    assert "VECTORS VELOCITY double" in lines
    assert "SCALARS PRESSURE double" in lines
    assert "LOOKUP_TABLE default" in lines
    pts = np.array([[float(v) for v in lines[6 + i].split()] for i in range(npts)])
    first = pts[[k + nr * (0 + (nt + 1) * i) for i in range(n_st) for k in range(nr)]]
    seam = pts[[k + nr * (nt + (nt + 1) * i) for i in range(n_st) for k in range(nr)]]
    assert np.array_equal(first, seam)


def test_unwritable_path():
    fld = small_field()
    with pytest.raises(OSError):
        write_field_csv(fld, "/no-such-directory/field.csv")


def test_metadata():
    geo, prof, pres = straight_case(n_s=8, n=8)
    fld = assemble(geo, prof, pres)
    assert fld.meta["h"] == geo.h
    assert len(fld.meta["geometry_hash"]) == 16
    assert fld.meta["cutoff"] is True
    assert fld.meta["flux_defect"] <= 1e-10
    geo2 = PipeGeometry(Centerline.straight(n_s=8), RadiusLaw.constant(1.0), h=0.2, n_theta=8)
    assert geometry_fingerprint(geo2) != geometry_fingerprint(geo)
    rebuilt = PipeGeometry(Centerline.straight(n_s=8), RadiusLaw.constant(1.0), h=0.1, n_theta=8)
    assert geometry_fingerprint(rebuilt) == geometry_fingerprint(geo)
