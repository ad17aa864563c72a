"""Command-line front end.

Pipeline order: geometry, section solves, pressure line, transverse
correction, assembled field.  Four subcommands:

  solve                 full pipeline, artifacts into the output directory
  converge              section-mesh refinement study
  compare-perturbation  slenderness-family defect slopes
  validate              built-in oracle battery (no config needed)

Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.
CSV artifacts carry 17 significant digits and no timestamps, so identical
configs reproduce them bitwise; wall-clock data lives only in
run_report.json.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .config import build_geometry, load_config, resolve_threads
from .cross_section import build_mesh
from .errors import ConfigError, ThinPipeError
from .fields import assemble, norms, write_field_csv, write_field_vtk
from .geometry import Centerline, PipeGeometry, RadiusLaw
from .perturbation import compare_full_vs_perturbative, solve_psi1
from .prandtl import rigidity_profile, solve_prandtl
from .report import plot_convergence, plot_pressure, plot_profiles, plot_slopes
from .reynolds import solve_reynolds, solve_reynolds_fd
from .transverse import (
    axial_velocity_data,
    check_claim_identity,
    check_compatibility,
    transverse_profile,
)

__all__ = ["main", "build_parser", "run_validation", "refinement_summary"]


class _Parser(argparse.ArgumentParser):
    """Routes usage errors through the exit-code contract instead of exit 2."""

    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _Parser(prog="thinpipe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def common(p, needs_config):
        p.add_argument(
            "--config",
            metavar="PATH",
            default=None,
            required=False,
            help="run configuration file" + ("" if needs_config else " (optional)"),
        )
        p.add_argument("--output", metavar="DIR", default=None, help="output directory override")
        p.add_argument("--threads", metavar="N", type=int, default=None, help="worker count")

    solve = sub.add_parser("solve", help="run the full pipeline and write artifacts")
    common(solve, True)
    solve.add_argument(
        "--format", choices=("csv", "vtk", "both"), default=None, help="field export format"
    )
    solve.set_defaults(handler=cmd_solve)

    converge = sub.add_parser("converge", help="section-mesh refinement study")
    common(converge, True)
    converge.set_defaults(handler=cmd_converge)

    compare = sub.add_parser(
        "compare-perturbation", help="slenderness-family defect slopes"
    )
    common(compare, True)
    compare.set_defaults(handler=cmd_compare_perturbation)

    validate = sub.add_parser("validate", help="run the built-in oracle battery")
    common(validate, False)
    validate.add_argument(
        "--tolerance-scale",
        metavar="X",
        type=float,
        default=1.0,
        help="multiply every pass threshold by X",
    )
    validate.set_defaults(handler=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except ConfigError as exc:
        print(f"thinpipe: config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"thinpipe: config error: {exc}", file=sys.stderr)
        return 1
    except ThinPipeError as exc:
        print(f"thinpipe: {exc}", file=sys.stderr)
        return 2


# ------------------------------------------------------------ shared pieces


def _load(args):
    if args.config is None:
        raise ConfigError("--config PATH is required for this command")
    return load_config(args.config)


def _resolve_outdir(args, cfg):
    directory = args.output or os.environ.get("THINPIPE_OUTPUT")
    if directory is None:
        directory = cfg.directory if cfg is not None else None
    if directory is None:
        return None
    outdir = Path(directory)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


@contextmanager
def _stage(name, timings):
    t0 = time.perf_counter()
    try:
        yield
    except ThinPipeError as exc:
        raise type(exc)(f"{name} stage: {exc}") from exc
    finally:
        timings[name] = time.perf_counter() - t0


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _write_csv(path, names, columns):
    table = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header=",".join(names), comments="")


def _fit_order(sizes, defects):
    defects = np.asarray(defects, dtype=float)
    if defects.size < 2 or np.any(defects <= 0.0):
        return float("nan")
    return float(-np.polyfit(np.log(np.asarray(sizes, dtype=float)), np.log(defects), 1)[0])


def _step_orders(sizes, defects):
    sizes = np.asarray(sizes, dtype=float)
    defects = np.asarray(defects, dtype=float)
    out = []
    for i in range(len(defects) - 1):
        if defects[i] > 0.0 and defects[i + 1] > 0.0:
            out.append(float(np.log(defects[i] / defects[i + 1]) / np.log(sizes[i + 1] / sizes[i])))
        else:
            out.append(float("nan"))
    return out


def refinement_summary(sizes, defects):
    """Fitted order, per-step orders, and a monotone-decrease flag.

    A defect sequence that grows somewhere under refinement is the classic
    sign of a wired-in bug or an unconverged reference, so it gets flagged
    rather than silently fitted.
    """
    defects = np.asarray(defects, dtype=float)
    return {
        "order": _fit_order(sizes, defects),
        "steps": _step_orders(sizes, defects),
        "monotone": bool(np.all(np.diff(defects) <= 0.0)),
    }


# ------------------------------------------------------------------- solve


def cmd_solve(args):
    cfg = _load(args)
    threads = resolve_threads(args.threads)
    formats = cfg.formats
    if args.format is not None:
        formats = ("csv", "vtk") if args.format == "both" else (args.format,)
    timings = {}
    total0 = time.perf_counter()

    with _stage("geometry", timings):
        geometry = build_geometry(cfg)
        greport = geometry.report()
    with _stage("sections", timings):
        profile = rigidity_profile(geometry, cfg.n_rho, threads=threads)
    with _stage("pressure", timings):
        pressure = solve_reynolds(profile, cfg.flow_rate, cfg.outlet_pressure)
    correction = None
    if cfg.transverse:
        with _stage("correction", timings):
            correction = transverse_profile(profile, pressure)
    with _stage("fields", timings):
        field = assemble(geometry, profile, pressure, correction, cutoff=cfg.cutoff)
        size = norms(field)

    outdir = _resolve_outdir(args, cfg)
    written = []
    _write_csv(
        outdir / "rigidity_profile.csv",
        ("s", "G_bulk", "G_energy", "residual"),
        (profile.s, profile.G, profile.G_energy, profile.residual),
    )
    written.append("rigidity_profile.csv")
    _write_csv(
        outdir / "pressure_profile.csv",
        ("s", "p0", "dp0", "flux"),
        (pressure.s, pressure.p0, pressure.dp0, pressure.flux),
    )
    written.append("pressure_profile.csv")
    if "csv" in formats:
        write_field_csv(field, outdir / "field.csv")
        written.append("field.csv")
    if "vtk" in formats:
        write_field_vtk(field, outdir / "field.vtk")
        written.append("field.vtk")
    for fig in (plot_profiles(profile, outdir), plot_pressure(pressure, outdir)):
        written.append(fig.name)

    compat = None
    if correction is not None:
        compat = float(max(t.compat_residual for t in correction))
    report = {
        "config": cfg.echo(),
        "geometry": {**greport.as_dict(), "fingerprint": field.meta["geometry_hash"]},
        "solver": {
            "threads": threads,
            "stations": int(len(profile.s)),
            "pressure_route": pressure.route,
            "section_residual": float(np.max(profile.residual)),
            "flux_defect": float(pressure.flux_defect),
            "compatibility_residual": compat,
            "correction_residual": field.meta["correction_residual"],
            "correction_divergence": field.meta["correction_divergence"],
        },
        "norms": {
            "velocity": size.velocity,
            "velocity_gradient": size.velocity_gradient,
            "pressure_fluctuation": size.pressure_fluctuation,
            "composite": size.composite,
        },
        "artifacts": written,
        "timing": {
            "stages": timings,
            "total_seconds": time.perf_counter() - total0,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        },
    }
    _write_json(outdir / "run_report.json", report)

    print(f"stations:        {len(profile.s)}")
    print(f"slenderness:     h = {greport.h:g}, lam = {greport.lam:g}, gamma = {greport.gamma:g}")
    print(f"rigidity range:  [{profile.G.min():.6g}, {profile.G.max():.6g}]")
    print(f"flux defect:     {pressure.flux_defect:.3e}")
    print(f"composite norm:  {size.composite:.6g}")
    print(f"wrote {len(written) + 1} files to {outdir}")
    return 0


# ---------------------------------------------------------------- converge


def cmd_converge(args):
    cfg = _load(args)
    if cfg.mesh_values is None:
        raise ConfigError("converge needs a study.mesh_values list in the config")
    sizes = sorted(cfg.mesh_values)
    if len(sizes) < 3:
        raise ConfigError(f"mesh study needs at least 3 sizes, got {len(sizes)}")
    if len(set(sizes)) != len(sizes):
        raise ConfigError("mesh sizes must be distinct")
    threads = resolve_threads(args.threads)
    timings = {}
    total0 = time.perf_counter()

    runs = []
    for n in sizes:
        with _stage(f"mesh {n}", timings):
            geometry = build_geometry(cfg, n_theta=n)
            profile = rigidity_profile(geometry, n, threads=threads)
            pressure = solve_reynolds(profile, cfg.flow_rate, cfg.outlet_pressure)
        runs.append((profile, pressure))

    ref_profile, ref_pressure = runs[-1]
    coarse = sizes[:-1]
    defect_g = np.array(
        [np.max(np.abs(p.G - ref_profile.G)) for p, _ in runs[:-1]]
    )
    defect_p = np.array(
        [np.max(np.abs(q.p0 - ref_pressure.p0)) for _, q in runs[:-1]]
    )
    flux = np.array([q.flux_defect for _, q in runs[:-1]])

    quantities = (("rigidity", defect_g), ("pressure", defect_p))
    summaries = {name: refinement_summary(coarse, d) for name, d in quantities}
    orders = {name: s["order"] for name, s in summaries.items()}
    steps = {name: s["steps"] for name, s in summaries.items()}
    monotone = {name: s["monotone"] for name, s in summaries.items()}

    outdir = _resolve_outdir(args, cfg)
    _write_csv(
        outdir / "convergence.csv",
        ("n", "defect_G", "defect_p0", "flux_defect"),
        (np.asarray(coarse, dtype=float), defect_g, defect_p, flux),
    )
    plot_convergence(
        coarse,
        np.column_stack([defect_g, defect_p, flux]),
        ("rigidity", "pressure", "flux constancy"),
        outdir,
    )
    _write_json(
        outdir / "run_report.json",
        {
            "config": cfg.echo(),
            "mesh_sizes": sizes,
            "defects": {"rigidity": defect_g, "pressure": defect_p, "flux": flux},
            "fitted_orders": orders,
            "step_orders": steps,
            "monotone": monotone,
            "reference": {
                "mesh": sizes[-1],
                "flux_defect": float(ref_pressure.flux_defect),
            },
            "timing": {
                "stages": timings,
                "total_seconds": time.perf_counter() - total0,
                "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            },
        },
    )

    print(f"{'n':>6} {'defect_G':>13} {'defect_p0':>13} {'flux_defect':>13}")
    for i, n in enumerate(coarse):
        print(f"{n:>6} {defect_g[i]:>13.3e} {defect_p[i]:>13.3e} {flux[i]:>13.3e}")
    print(f"reference mesh {sizes[-1]}, flux defect {ref_pressure.flux_defect:.3e}")
    for name, _ in quantities:
        print(f"fitted order, {name}: {orders[name]:.2f}")
        if not monotone[name]:
            print(f"warning: {name} defect sequence is not monotone under refinement")
    print(f"wrote convergence study to {outdir}")
    return 0


# ---------------------------------------------------- compare-perturbation


def cmd_compare_perturbation(args):
    cfg = _load(args)
    if cfg.h_values is None:
        raise ConfigError("compare-perturbation needs a study.h_values list in the config")
    if len(cfg.h_values) < 3:
        raise ConfigError(f"slenderness study needs at least 3 values, got {len(cfg.h_values)}")
    if len(set(cfg.h_values)) != len(cfg.h_values):
        raise ConfigError("slenderness values must be distinct")
    for h in cfg.h_values:
        if not 0.0 < h < 1.0:
            raise ConfigError(f"slenderness values must lie in (0, 1), got {h}")
    threads = resolve_threads(args.threads)
    total0 = time.perf_counter()

    geometries = [build_geometry(cfg, h=h) for h in sorted(cfg.h_values, reverse=True)]
    report = compare_full_vs_perturbative(
        geometries, cfg.flow_rate, cfg.outlet_pressure, threads=threads
    )

    outdir = _resolve_outdir(args, cfg)
    report.to_csv(outdir / "perturbation_slopes.csv")
    plot_slopes(report, outdir)
    _write_json(
        outdir / "run_report.json",
        {
            "config": cfg.echo(),
            "h": report.h,
            "defects": {
                "section": report.section,
                "rigidity": report.rigidity,
                "pressure": report.pressure,
                "velocity": report.velocity,
            },
            "slopes": report.slopes,
            "section_mesh": report.n_rho,
            "timing": {
                "total_seconds": time.perf_counter() - total0,
                "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            },
        },
    )

    print(f"section mesh settled at n = {report.n_rho}")
    for name in ("section", "rigidity", "pressure", "velocity"):
        print(f"slope, {name}: {report.slopes[name]:.3f}")
    print(f"wrote slope report to {outdir}")
    return 0


# ---------------------------------------------------------------- validate


class Check(NamedTuple):
    name: str
    value: float
    threshold: float
    passed: bool


def _check(name, value, threshold, scale):
    value = float(value)
    bound = threshold * scale
    return Check(name, value, threshold, bool(value <= bound))


def run_validation(tolerance_scale=1.0):
    """Built-in oracle battery; returns one Check per row of the table."""
    checks = []
    scale = float(tolerance_scale)

    # Straight unit disk: closed-form section function and rigidity.
    disk = PipeGeometry(Centerline.straight(4), RadiusLaw.constant(1.0), 0.1, n_theta=64)
    mesh = build_mesh(disk, 0, 64)
    sol = solve_prandtl(mesh)
    exact = 0.5 * (1.0 - mesh.eta**2)
    checks.append(
        _check("disk section function, max error", np.max(np.abs(sol.psi - exact)), 1e-3, scale)
    )
    checks.append(
        _check(
            "disk rigidity vs pi/2, relative error",
            abs(sol.G_bulk - np.pi / 2.0) / (np.pi / 2.0),
            1e-3,
            scale,
        )
    )

    # Unit-curvature response on the disk against separation of variables.
    first = solve_psi1(mesh, sol, curvature=(1.0, 0.0))
    exact1 = 0.375 * (1.0 - mesh.eta**2) * mesh.xi1
    checks.append(
        _check("curvature response, max error", np.max(np.abs(first.psi - exact1)), 1e-3, scale)
    )

    # Energy identity on a bent pipe with an off-round section.
    bent = PipeGeometry(
        Centerline.circular_arc(0.9, 4), RadiusLaw.theta_cosine(1.0, 0.2, 1), 0.1, n_theta=64
    )
    bsol = solve_prandtl(build_mesh(bent, 2, 64))
    checks.append(
        _check(
            "energy identity, relative defect",
            abs(bsol.G_bulk - bsol.G_energy) / bsol.G_bulk,
            1e-3,
            scale,
        )
    )

    # Flux constancy along a torus, both pressure routes.
    torus = PipeGeometry(
        Centerline.circular_arc(0.9, 16), RadiusLaw.constant(1.0), 0.05, n_theta=16
    )
    tprof = rigidity_profile(torus, 16)
    checks.append(
        _check(
            "flux constancy, closed-form route",
            solve_reynolds(tprof, 1.0).flux_defect,
            1e-10,
            scale,
        )
    )
    checks.append(
        _check(
            "flux constancy, conservative route",
            solve_reynolds_fd(tprof, 1.0).flux_defect,
            1e-10,
            scale,
        )
    )

    # Moving-section divergence identity, with its negative control.
    wavy = PipeGeometry(
        Centerline.circular_arc(0.9, 96), RadiusLaw.mixed(1.0, 0.2, 1, 0.3), 0.12, n_theta=96
    )

    def probe_velocity(x1, x2, s):
        return (
            (1.0 + 0.2 * s) * (x1**2 * x2 + 0.3),
            (1.0 - 0.1 * s) * (x2**2 - x1),
        )

    good = check_claim_identity(wavy, 48, 96, probe_velocity)
    bad = check_claim_identity(wavy, 48, 96, probe_velocity, g_scale=2.0)
    checks.append(
        _check("moving-section identity residual", abs(good.total), _CLAIM_THRESHOLD, scale)
    )
    checks.append(
        _check(
            "identity negative-control ratio",
            abs(good.total) / abs(bad.total),
            1e-3,
            scale,
        )
    )

    # Compatibility of the transverse data, with a broken-flux control.
    pipe = PipeGeometry(
        Centerline.circular_arc(0.9, 12), RadiusLaw.s_sine(1.0, 0.2), 0.1, n_theta=16
    )
    prof = rigidity_profile(pipe, 16)
    pres = solve_reynolds(prof, 1.0)
    station = 6
    cmesh, _, dsv31 = axial_velocity_data(prof, pres, station)
    rel = check_compatibility(cmesh, dsv31) / np.sqrt(cmesh.integrate(dsv31**2))
    broken = -0.5 * prof.dpsi[station] * pres.dp0[station]
    rel_bad = check_compatibility(cmesh, broken) / np.sqrt(cmesh.integrate(broken**2))
    checks.append(_check("compatibility residual, relative", rel, 1e-6, scale))
    checks.append(_check("wrong-flux detection ratio", rel / rel_bad, 1e-3, scale))
    return checks


# Frozen from a mesh study of the identity residual: 9.9e-6 at the battery's
# 96x96 section with decay order about 2; 1e-4 leaves a factor-10 margin.
_CLAIM_THRESHOLD = 1e-4


def cmd_validate(args):
    if args.config is not None:
        load_config(args.config)
    if args.tolerance_scale <= 0.0:
        raise ConfigError(f"--tolerance-scale must be positive, got {args.tolerance_scale}")
    checks = run_validation(args.tolerance_scale)

    width = max(len(c.name) for c in checks)
    print(f"{'check':<{width}} {'value':>12} {'threshold':>12} {'status':>7}")
    for c in checks:
        status = "pass" if c.passed else "FAIL"
        print(
            f"{c.name:<{width}} {c.value:>12.3e} "
            f"{c.threshold * args.tolerance_scale:>12.3e} {status:>7}"
        )
    failed = [c.name for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)} of {len(checks)} checks passed")
    for name in failed:
        print(f"failed: {name}")

    outdir = _resolve_outdir(args, None)
    if outdir is not None:
        with open(outdir / "validation_report.csv", "w", encoding="utf-8") as fh:
            fh.write("check,value,threshold,passed\n")
            for c in checks:
                fh.write(
                    f"\"{c.name}\",{c.value:.17g},"
                    f"{c.threshold * args.tolerance_scale:.17g},{int(c.passed)}\n"
                )
    return 0 if not failed else 2


if __name__ == "__main__":
    sys.exit(main())
