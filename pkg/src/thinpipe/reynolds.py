"""Leading-order pressure along the pipe.

With station rigidity G(s), prescribed flux F and outlet value p_per, the
pressure solves the two-point problem

    -d/ds (G dp/ds) = 0,   -G(0) p'(0) / 4 = F,   p(1) = p_per,

whose solution is p(s) = p_per + 4 F * integral_s^1 dt / G(t), with the
station flux -G p' / 4 constant in s.  The primary route evaluates the
closed form with composite Simpson applied to a cubic interpolant of 1/G
(Simpson is exact on cubics, so this integrates the interpolant exactly).
A conservative three-point scheme on the same stations serves as an
independent oracle: its face fluxes telescope, so they match F to solver
roundoff regardless of resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .errors import SolverError

__all__ = [
    "PressureProfile",
    "solve_reynolds",
    "solve_reynolds_fd",
    "longitudinal_velocity",
    "pressure_derivative_bounds",
]


@dataclass
class PressureProfile:
    """Pressure and its s-derivatives on the station grid."""

    s: np.ndarray
    p0: np.ndarray
    dp0: np.ndarray
    d2p0: np.ndarray
    d3p0: np.ndarray
    F0: float
    p_per: float
    flux: np.ndarray
    flux_defect: float
    route: str


def _check_rigidity(profile):
    g = np.asarray(profile.G, dtype=float)
    if g.size < 2:
        raise SolverError("pressure solve needs at least 2 stations")
    if np.any(g <= 0.0):
        raise SolverError("rigidity must be positive at every station")
    return np.asarray(profile.s, dtype=float), g


def _rigidity_slope(profile, s, g):
    # quadrature of the section s-derivative when available, else spline slope
    if profile.dsG is not None:
        return np.asarray(profile.dsG, dtype=float)
    return CubicSpline(s, g).derivative()(s)


def solve_reynolds(profile, flow_rate, outlet_pressure=0.0):
    """Closed-form pressure from the rigidity profile."""
    s, g = _check_rigidity(profile)
    inv = 1.0 / g
    interp = CubicSpline(s, inv)
    mid = 0.5 * (s[:-1] + s[1:])
    seg = (s[1:] - s[:-1]) / 6.0 * (inv[:-1] + 4.0 * interp(mid) + inv[1:])
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])

    p0 = outlet_pressure + 4.0 * flow_rate * tail
    p0[-1] = outlet_pressure
    dp0 = -4.0 * flow_rate / g

    dg = _rigidity_slope(profile, s, g)
    d2p0 = 4.0 * flow_rate * dg / g**2
    d2g = CubicSpline(s, dg).derivative()(s)
    d3p0 = 4.0 * flow_rate * (d2g / g**2 - 2.0 * dg**2 / g**3)

    flux = -0.25 * g * dp0
    defect = float(np.max(np.abs(flux - flow_rate)))
    return PressureProfile(
        s=s,
        p0=p0,
        dp0=dp0,
        d2p0=d2p0,
        d3p0=d3p0,
        F0=float(flow_rate),
        p_per=float(outlet_pressure),
        flux=flux,
        flux_defect=defect,
        route="quadrature",
    )


def solve_reynolds_fd(profile, flow_rate, outlet_pressure=0.0):
    """Conservative finite-difference oracle on the same stations.

    Unknowns sit at the stations; faces between stations carry the flux
    -G_face (p_next - p_prev) / (4 ds) with arithmetic-mean face rigidity.
    Row 0 pins the inlet face flux to the flow rate, interior rows balance
    adjacent faces, and the last row is the outlet Dirichlet value.
    """
    s, g = _check_rigidity(profile)
    n = s.size
    ds = np.diff(s)
    cond = 0.5 * (g[:-1] + g[1:]) / ds  # face conductance * 4

    ab = np.zeros((3, n))
    rhs = np.zeros(n)
    ab[1, 0] = 0.25 * cond[0]
    ab[0, 1] = -0.25 * cond[0]
    rhs[0] = flow_rate
    for i in range(1, n - 1):
        ab[2, i - 1] = -0.25 * cond[i - 1]
        ab[1, i] = 0.25 * (cond[i - 1] + cond[i])
        ab[0, i + 1] = -0.25 * cond[i]
    ab[1, n - 1] = 1.0
    ab[2, n - 2] = 0.0
    rhs[n - 1] = outlet_pressure
    p0 = solve_banded((1, 1), ab, rhs)

    face_flux = -0.25 * cond * (p0[1:] - p0[:-1])
    defect = float(np.max(np.abs(face_flux - flow_rate)))

    dp0 = np.gradient(p0, s, edge_order=2)
    d2p0 = np.gradient(dp0, s, edge_order=2)
    d3p0 = np.gradient(d2p0, s, edge_order=2)
    flux = -0.25 * g * dp0
    return PressureProfile(
        s=s,
        p0=p0,
        dp0=dp0,
        d2p0=d2p0,
        d3p0=d3p0,
        F0=float(flow_rate),
        p_per=float(outlet_pressure),
        flux=flux,
        flux_defect=defect,
        route="conservative-fd",
    )


def longitudinal_velocity(solution, pressure):
    """Leading axial velocity on the solution's section, with its flux.

    v = -Psi dp/ds / 2.  Because the station rigidity is twice the same
    nodal quadrature of Psi, the returned flux reproduces the profile flux
    of the pressure solve to roundoff.
    """
    i = solution.station
    if not 0 <= i < pressure.s.size:
        raise SolverError(f"station {i} outside pressure grid")
    v31 = -0.5 * solution.psi * pressure.dp0[i]
    return v31, float(solution.mesh.integrate(v31))


def _ratio(numer, denom):
    # a zero scale only pairs with a (numerically) zero derivative
    if denom <= 0.0:
        return 0.0 if numer < 1e-9 else float("inf")
    return numer / denom


def pressure_derivative_bounds(pressure, report):
    """Derivative maxima and their ratios to the geometry modulation scales.

    Accepts a single (pressure, report) pair or equal-length sequences; the
    sequence form appends a least-squares fit of max |p''| against the
    first-order scale across the family.
    """
    if isinstance(pressure, PressureProfile):
        pressures, reports = [pressure], [report]
        single = True
    else:
        pressures, reports = list(pressure), list(report)
        single = False

    rows = []
    for p, rep in zip(pressures, reports):
        scale1 = rep.lam + rep.gamma
        scale2 = (
            rep.lam_star
            + rep.gamma_star
            + rep.lam**1.5 / np.sqrt(rep.h)
            + rep.gamma**2
        )
        rows.append(
            {
                "max_dp0": float(np.max(np.abs(p.dp0))),
                "max_d2p0": float(np.max(np.abs(p.d2p0))),
                "max_d3p0": float(np.max(np.abs(p.d3p0))),
                "first_order_scale": float(scale1),
                "second_order_scale": float(scale2),
                "ratio_d2p0": float(_ratio(np.max(np.abs(p.d2p0)), scale1)),
                "ratio_d3p0": float(_ratio(np.max(np.abs(p.d3p0)), scale2)),
            }
        )
    if single:
        return rows[0]

    x = np.array([r["first_order_scale"] for r in rows])
    y = np.array([r["max_d2p0"] for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return {"rows": rows, "slope": float(slope), "r_squared": float(r_squared)}
