"""Pipe geometry: centerline, transported frame, radius law, scale factor.

The pipe is a thin tube of slenderness h around an arc-length parameterized
centerline c(s), s in [0, 1], with c'(0) = (0, 0, 1).  Cross-sections are
star-shaped regions eta < R(theta, s) drawn in the plane of an orthonormal
frame {e1, e2, c'} obtained by integrating

    d/ds e_i = -(c'' . e_i) c',
    e1(theta, 0) = (cos theta, sin theta, 0),
    e2(theta, 0) = (-sin theta, cos theta, 0).

The longitudinal metric coefficient is beta = 1 - h*eta*(c'' . e1).  A valid
geometry keeps beta > 0 on the closed tube; beta <= 0 means the wall folds
onto itself and every downstream solve is meaningless.

s-derivatives of beta are algebraic in the curve derivatives: using
c''.c' = 0 and c'''.c' = -|c''|^2 together with the frame equation,

    d/ds beta  = -h*eta*(c''' . e1),
    d2/ds2 beta = -h*eta*(c'''' . e1 + (c'' . e1)*|c''|^2),

so no finite differencing of beta is ever needed for analytic centerlines.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import GeometryError

_UNIT_SPEED_TOL = 1e-10


def _rotation_onto_ez(u):
    """Rotation matrix sending the unit vector u onto (0, 0, 1)."""
    u = np.asarray(u, dtype=float)
    w = np.array([0.0, 0.0, 1.0])
    v = np.cross(u, w)
    s = np.linalg.norm(v)
    c = float(u @ w)
    if s < 1e-14:
        if c > 0.0:
            return np.eye(3)
        # antiparallel: rotate by pi about the x-axis
        return np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + vx + vx @ vx * ((1.0 - c) / s**2)


class Centerline:
    """Arc-length parameterized centerline with derivatives up to fourth order.

    Instances are built through the factory classmethods (`straight`,
    `circular_arc`, `helix`, `from_points`, `from_analytic`).  The curve is
    sampled on the uniform station grid ``s`` but stays evaluable at
    arbitrary s in [0, 1], which the frame integrator uses for its
    half-steps.

    Attributes
    ----------
    s : ndarray, shape (n_s+1,)
        Uniform station grid on [0, 1].
    c, d1, d2, d3, d4 : ndarray, shape (n_s+1, 3)
        Position and first to fourth s-derivatives at the stations.
    kind : str
        Preset name, for reports.
    speed_defect : float
        max | |c'| - 1 | over the stations (only nonzero for tabulated input).
    """

    def __init__(self, fn, n_s, kind, speed_tol=_UNIT_SPEED_TOL, rotation=None):
        if n_s < 4:
            raise GeometryError(f"need at least 4 s-intervals, got n_s={n_s}")
        self._fn = fn
        self.kind = kind
        self.rotation = rotation
        self.s = np.linspace(0.0, 1.0, n_s + 1)
        self.c = fn(self.s, 0)
        self.d1 = fn(self.s, 1)
        self.d2 = fn(self.s, 2)
        self.d3 = fn(self.s, 3)
        self.d4 = fn(self.s, 4)

        speed = np.linalg.norm(self.d1, axis=1)
        self.speed_defect = float(np.max(np.abs(speed - 1.0)))
        if self.speed_defect > speed_tol:
            raise GeometryError(
                f"centerline is not arc-length parameterized: "
                f"max | |c'| - 1 | = {self.speed_defect:.3e} > {speed_tol:.1e}"
            )
        t0 = self.d1[0]
        if np.linalg.norm(t0 - [0.0, 0.0, 1.0]) > 1e-8:
            raise GeometryError(
                f"initial tangent must be (0,0,1), got {t0}; "
                "presets are pre-rotated, tabulated input is rotated on load"
            )

    @property
    def n_s(self):
        return len(self.s) - 1

    def derivatives(self, s, order):
        """Evaluate the curve (order=0) or its s-derivative at arbitrary s."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return self._fn(s, order)

    # ----------------------------------------------------------- factories

    @classmethod
    def straight(cls, n_s=64):
        """c(s) = (0, 0, s)."""

        def fn(s, order):
            out = np.zeros((len(s), 3))
            if order == 0:
                out[:, 2] = s
            elif order == 1:
                out[:, 2] = 1.0
            return out

        return cls(fn, n_s, kind="straight")

    @classmethod
    def circular_arc(cls, bend_radius, n_s=64):
        """Planar arc of radius rho_c in the x-z plane, |c''| = 1/rho_c."""
        rc = float(bend_radius)
        if rc <= 0.0:
            raise GeometryError(f"bend radius must be positive, got {rc}")

        def fn(s, order):
            a = s / rc
            out = np.empty((len(s), 3))
            out[:, 1] = 0.0
            if order == 0:
                out[:, 0] = rc * (1.0 - np.cos(a))
                out[:, 2] = rc * np.sin(a)
            elif order == 1:
                out[:, 0] = np.sin(a)
                out[:, 2] = np.cos(a)
            elif order == 2:
                out[:, 0] = np.cos(a) / rc
                out[:, 2] = -np.sin(a) / rc
            elif order == 3:
                out[:, 0] = -np.sin(a) / rc**2
                out[:, 2] = -np.cos(a) / rc**2
            else:
                out[:, 0] = -np.cos(a) / rc**3
                out[:, 2] = np.sin(a) / rc**3
            return out

        return cls(fn, n_s, kind="arc")

    @classmethod
    def helix(cls, curvature, torsion, n_s=64):
        """Circular helix with constant curvature kappa and torsion tau.

        The base parameterization (a cos ws, a sin ws, b w s) with
        w^2 = kappa^2 + tau^2, a = kappa/w^2, b = tau/w^2 is unit speed; it
        is rigidly rotated so that c'(0) = (0, 0, 1) and shifted so that
        c(0) = 0.
        """
        kappa = float(curvature)
        tau = float(torsion)
        if kappa < 0.0:
            raise GeometryError(f"curvature must be nonnegative, got {kappa}")
        w2 = kappa**2 + tau**2
        if w2 == 0.0:
            return cls.straight(n_s)
        w = np.sqrt(w2)
        a, b = kappa / w2, tau / w2
        # rotation about the x-axis taking p'(0) = (0, kappa/w, tau/w) to e_z
        sa, ca = kappa / w, tau / w
        rot = np.array([[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]])
        p0 = rot @ np.array([a, 0.0, 0.0])

        def fn(s, order):
            ws = w * s
            out = np.empty((len(s), 3))
            f = w**order
            # derivatives of (a cos ws, a sin ws, bws) cycle through sin/cos
            if order == 0:
                out[:, 0] = a * np.cos(ws)
                out[:, 1] = a * np.sin(ws)
                out[:, 2] = b * ws
            else:
                phase = order * np.pi / 2.0
                out[:, 0] = a * f * np.cos(ws + phase)
                out[:, 1] = a * f * np.sin(ws + phase)
                out[:, 2] = b * w if order == 1 else 0.0
            out = out @ rot.T
            if order == 0:
                out -= p0
            return out

        return cls(fn, n_s, kind="helix", rotation=rot)

    @classmethod
    def from_points(cls, points, n_s=64):
        """Centerline through tabulated points, reparameterized to arc length.

        Fits a cubic spline through the points on a chordal parameter,
        measures cumulative length by dense quadrature, inverts the length
        function by Newton iteration to resample at equal arc length, and
        fits the final spline on the arc-length parameter.  Derivatives come
        from that spline; its fourth derivative is identically zero, which is
        reported with a warning the first time it is requested.

        The resampled curve is rigidly moved so c(0) = 0 and c'(0) = (0,0,1).
        """
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise GeometryError(f"points must be (m, 3), got {pts.shape}")
        m = len(pts)
        if m < 4:
            raise GeometryError(f"need at least 4 tabulated points, got {m}")
        chord = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(chord <= 0.0):
            raise GeometryError("tabulated points contain repeats")
        t = np.concatenate([[0.0], np.cumsum(chord)])
        t /= t[-1]
        spl = CubicSpline(t, pts, axis=0)
        dspl = spl.derivative()

        # cumulative length on a fine grid, then Newton with interp start
        tf = np.linspace(0.0, 1.0, max(40 * m, 800) + 1)
        speed = np.linalg.norm(dspl(tf), axis=1)
        seg = 0.5 * (speed[1:] + speed[:-1]) * np.diff(tf)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        total = cum[-1]

        def invert(target):
            ti = np.interp(target, cum, tf)
            for _ in range(30):
                li = np.interp(ti, tf, cum)  # refreshed from the fine table
                sp = np.linalg.norm(dspl(np.atleast_1d(ti)), axis=1)
                step = (li - target) / np.maximum(sp, 1e-14)
                ti = np.clip(ti - step, 0.0, 1.0)
                if np.max(np.abs(step)) < 1e-14:
                    break
            return ti

        m_fine = max(4 * m, n_s + 1, 33)
        sf = np.linspace(0.0, 1.0, m_fine)
        tz = invert(sf * total)
        resampled = spl(tz)

        # fit, then align using the fitted spline's own initial tangent
        # (CubicSpline commutes with rigid rotation, so the refit is exact)
        trial = CubicSpline(sf, (resampled - resampled[0]) / total, axis=0)
        u = trial(0.0, nu=1)
        rot = _rotation_onto_ez(u / np.linalg.norm(u))
        final = CubicSpline(sf, (resampled - resampled[0]) / total @ rot.T, axis=0)
        # the resampled curve has unit speed only to spline accuracy
        warned = [False]

        def fn(s, order):
            if order <= 3:
                return np.atleast_2d(final(np.atleast_1d(s), nu=order))
            if not warned[0]:
                warnings.warn(
                    "fourth derivative of a tabulated centerline is not "
                    "available from a cubic spline; returning zeros",
                    RuntimeWarning,
                    stacklevel=2,
                )
                warned[0] = True
            return np.zeros((len(np.atleast_1d(s)), 3))

        return cls(fn, n_s, kind="points", speed_tol=5e-3, rotation=rot)

    @classmethod
    def from_analytic(cls, fn, n_s=64, kind="analytic"):
        """Centerline from a callable fn(s, order) -> (len(s), 3) array.

        The curve must already be arc-length parameterized with
        c'(0) = (0,0,1); non-unit-speed input is rejected, not normalized.
        """
        return cls(fn, n_s, kind=kind)


def transport_frame(centerline, n_theta):
    """Integrate the frame equation d/ds e_i = -(c''.e_i) c' along s.

    Classical RK4 over each station interval with Gram-Schmidt
    renormalization against the exact tangent after every step.  The
    recorded drift is the worst orthonormality defect seen *before*
    renormalization, which is pure integrator error.

    Parameters
    ----------
    centerline : Centerline
    n_theta : int
        Number of uniform theta nodes on [0, 2*pi).

    Returns
    -------
    FrameField
    """
    if n_theta < 4:
        raise GeometryError(f"need at least 4 theta nodes, got {n_theta}")
    cl = centerline
    n_s = cl.n_s
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)

    e1 = np.empty((n_s + 1, n_theta, 3))
    e2 = np.empty((n_s + 1, n_theta, 3))
    e1[0] = np.stack([np.cos(theta), np.sin(theta), np.zeros(n_theta)], axis=1)
    e2[0] = np.stack([-np.sin(theta), np.cos(theta), np.zeros(n_theta)], axis=1)

    def rhs(e, c1, c2):
        return -(e @ c2)[..., None] * c1

    ds = cl.s[1] - cl.s[0]
    drift = 0.0
    y = np.stack([e1[0], e2[0]])  # (2, n_theta, 3), marched jointly
    for i in range(n_s):
        s0 = cl.s[i]
        sm = s0 + 0.5 * ds
        s1 = cl.s[i + 1]
        c1_0, c2_0 = cl.derivatives(s0, 1)[0], cl.derivatives(s0, 2)[0]
        c1_m, c2_m = cl.derivatives(sm, 1)[0], cl.derivatives(sm, 2)[0]
        c1_1, c2_1 = cl.derivatives(s1, 1)[0], cl.derivatives(s1, 2)[0]

        k1 = rhs(y, c1_0, c2_0)
        k2 = rhs(y + 0.5 * ds * k1, c1_m, c2_m)
        k3 = rhs(y + 0.5 * ds * k2, c1_m, c2_m)
        k4 = rhs(y + ds * k3, c1_1, c2_1)
        y = y + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        t = c1_1
        a, b = y[0], y[1]
        drift = max(
            drift,
            float(np.max(np.abs(a @ t))),
            float(np.max(np.abs(b @ t))),
            float(np.max(np.abs(np.einsum("ij,ij->i", a, b)))),
            float(np.max(np.abs(np.linalg.norm(a, axis=1) - 1.0))),
            float(np.max(np.abs(np.linalg.norm(b, axis=1) - 1.0))),
        )
        a = a - (a @ t)[:, None] * t
        a /= np.linalg.norm(a, axis=1)[:, None]
        b = b - (b @ t)[:, None] * t - np.einsum("ij,ij->i", b, a)[:, None] * a
        b /= np.linalg.norm(b, axis=1)[:, None]
        y = np.stack([a, b])
        e1[i + 1], e2[i + 1] = a, b

    if drift > 1e-3:
        raise GeometryError(
            f"frame integrator drift {drift:.2e} before renormalization; "
            f"the s-grid (n_s = {n_s}) is too coarse for this curvature"
        )
    hand = np.einsum("ij,ij->i", np.cross(e1[:, 0], e2[:, 0]), cl.d1)
    if np.any(hand <= 0.0):
        raise GeometryError("frame lost right-handedness during transport")
    return FrameField(theta=theta, e1=e1, e2=e2, drift=drift)


@dataclass(frozen=True)
class FrameField:
    """Transported frame vectors on the (s, theta) grid.

    e1, e2 have shape (n_s+1, n_theta, 3); drift is the maximum
    orthonormality defect seen before per-step renormalization.
    """

    theta: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    drift: float


class RadiusLaw:
    """Cross-section radius R(theta, s) > 0 with its first derivatives.

    The callables `value`, `d_theta`, `d_s`, `d_s2` broadcast over numpy
    arguments.  Analytic presets evaluate exactly at arbitrary (theta, s);
    tabulated laws interpolate periodically in theta and are restricted to
    the stations they were given in s.
    """

    def __init__(self, value, d_theta, d_s, d_s2, kind, params=None):
        self.value = value
        self.d_theta = d_theta
        self.d_s = d_s
        self.d_s2 = d_s2
        self.kind = kind
        self.params = dict(params or {})

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"RadiusLaw({self.kind}: {inner})"

    @staticmethod
    def _check_base(r0):
        if r0 <= 0.0:
            raise GeometryError(f"radius law must stay positive, minimum is {r0}")

    @classmethod
    def constant(cls, base=1.0):
        cls._check_base(base)
        r0 = float(base)

        def const(x):
            def f(theta, s):
                return np.broadcast_arrays(np.asarray(theta, float) * 0.0 + x, s)[0]

            return f

        return cls(const(r0), const(0.0), const(0.0), const(0.0), "constant", {"base": r0})

    @classmethod
    def s_sine(cls, base=1.0, amplitude=0.3, turns=1):
        """R = base + amplitude * sin(2*pi*turns*s)."""
        cls._check_base(base - abs(amplitude))
        r0, a, k = float(base), float(amplitude), 2.0 * np.pi * float(turns)

        def mk(which):
            def f(theta, s):
                s = np.asarray(s, float)
                if which == 0:
                    out = r0 + a * np.sin(k * s)
                elif which == 1:
                    out = a * k * np.cos(k * s)
                else:
                    out = -a * k**2 * np.sin(k * s)
                return np.broadcast_arrays(out, theta)[0]

            return f

        zero = cls.constant(r0).d_theta
        return cls(mk(0), zero, mk(1), mk(2), "s_sine", {"base": r0, "amplitude": a, "turns": turns})

    @classmethod
    def theta_cosine(cls, base=1.0, amplitude=0.2, mode=1):
        """R = base + amplitude * cos(mode*theta)."""
        cls._check_base(base - abs(amplitude))
        r0, a, m = float(base), float(amplitude), int(mode)

        def val(theta, s):
            return np.broadcast_arrays(r0 + a * np.cos(m * np.asarray(theta, float)), s)[0]

        def dth(theta, s):
            return np.broadcast_arrays(-a * m * np.sin(m * np.asarray(theta, float)), s)[0]

        zero = cls.constant(r0).d_theta
        return cls(val, dth, zero, zero, "theta_cosine", {"base": r0, "amplitude": a, "mode": m})

    @classmethod
    def mixed(cls, base=1.0, amplitude=0.2, mode=1, slope=0.3):
        """R = base + amplitude * cos(mode*theta) * (1 + slope*s)."""
        g = float(amplitude) * (1.0 + max(0.0, float(slope)))
        cls._check_base(base - abs(g))
        r0, a, m, b = float(base), float(amplitude), int(mode), float(slope)

        def val(theta, s):
            th, sv = np.broadcast_arrays(np.asarray(theta, float), np.asarray(s, float))
            return r0 + a * np.cos(m * th) * (1.0 + b * sv)

        def dth(theta, s):
            th, sv = np.broadcast_arrays(np.asarray(theta, float), np.asarray(s, float))
            return -a * m * np.sin(m * th) * (1.0 + b * sv)

        def dsv(theta, s):
            th, sv = np.broadcast_arrays(np.asarray(theta, float), np.asarray(s, float))
            return a * b * np.cos(m * th) + 0.0 * sv

        zero = cls.constant(r0).d_theta
        return cls(val, dth, dsv, zero, "mixed", {"base": r0, "amplitude": a, "mode": m, "slope": b})

    @classmethod
    def from_table(cls, theta, s, values):
        """Tabulated R on a (theta, s) grid; periodic cubic in theta, FD in s.

        values has shape (n_theta, n_s+1).  Evaluation in s is restricted to
        the tabulated stations (nearest match within 1e-9).
        """
        th = np.asarray(theta, float)
        sv = np.asarray(s, float)
        vals = np.asarray(values, float)
        if vals.shape != (len(th), len(sv)):
            raise GeometryError(f"radius table shape {vals.shape} != ({len(th)}, {len(sv)})")
        if np.any(vals <= 0.0):
            raise GeometryError("tabulated radius must be positive everywhere")
        th_ext = np.concatenate([th, [th[0] + 2.0 * np.pi]])
        vals_ext = np.vstack([vals, vals[:1]])
        spl = CubicSpline(th_ext, vals_ext, axis=0, bc_type="periodic")
        ds = sv[1] - sv[0] if len(sv) > 1 else 1.0
        dvds = np.gradient(vals, ds, axis=1, edge_order=2)
        d2vds2 = np.gradient(dvds, ds, axis=1, edge_order=2)
        spl_ds = CubicSpline(th_ext, np.vstack([dvds, dvds[:1]]), axis=0, bc_type="periodic")
        spl_ds2 = CubicSpline(th_ext, np.vstack([d2vds2, d2vds2[:1]]), axis=0, bc_type="periodic")

        def station(sq):
            idx = np.rint(np.asarray(sq, float) / ds).astype(int)
            if np.any(np.abs(np.asarray(sq, float) - idx * ds) > 1e-9):
                raise GeometryError("tabulated radius evaluated off the s-grid")
            return idx

        def pick(interp):
            def f(theta_q, s_q):
                thq, sq = np.broadcast_arrays(np.asarray(theta_q, float), np.asarray(s_q, float))
                cols = interp(np.mod(thq.ravel(), 2.0 * np.pi))
                idx = station(sq.ravel())
                return cols[np.arange(cols.shape[0]), idx].reshape(thq.shape)

            return f

        return cls(pick(spl), pick(lambda q: spl(q, nu=1)), pick(spl_ds), pick(spl_ds2), "table")


@dataclass(frozen=True)
class GeometryReport:
    """Grid maxima of the geometric smallness parameters and validity flags."""

    h: float
    lam: float  # max |h c'''|
    lam_star: float  # max |h c''''|
    gamma: float  # max |ds R|
    gamma_star: float  # max |ds2 R|
    max_curvature: float  # max |c''|
    min_beta: float
    min_radius: float
    max_radius: float
    beta_positive: bool
    curvature_bound_ok: bool  # |c''| <= sqrt(lam / h)
    lam_times_h: float
    frame_drift: float
    worst_station: int

    def as_dict(self):
        return {
            "h": self.h,
            "lambda": self.lam,
            "lambda_star": self.lam_star,
            "gamma": self.gamma,
            "gamma_star": self.gamma_star,
            "max_curvature": self.max_curvature,
            "min_beta": self.min_beta,
            "min_radius": self.min_radius,
            "max_radius": self.max_radius,
            "beta_positive": self.beta_positive,
            "curvature_bound_ok": self.curvature_bound_ok,
            "lambda_times_h": self.lam_times_h,
            "frame_drift": self.frame_drift,
            "worst_station": self.worst_station,
        }


class PipeGeometry:
    """Bundle of centerline, frame, radius law, and slenderness h.

    Precomputes, per station, the projections of c'', c''', c'''' onto the
    theta = 0 frame pair (k1, k2), (l1, l2), (m1, m2).  Because the frame
    rotates rigidly in theta, c''(s).e1(theta, s) = k1 cos(theta) +
    k2 sin(theta), which makes beta an affine function of the section
    Cartesian coordinates xi = eta*(cos theta, sin theta).

    Parameters
    ----------
    centerline : Centerline
    radius : RadiusLaw
    h : float
        Slenderness, 0 < h < 1.
    n_theta : int
    validate : bool
        When True (default), raise GeometryError if min beta <= 0.
    """

    def __init__(self, centerline, radius, h, n_theta=64, validate=True):
        if not 0.0 < h < 1.0:
            raise GeometryError(f"slenderness must satisfy 0 < h < 1, got {h}")
        self.centerline = centerline
        self.radius = radius
        self.h = float(h)
        self.frame = transport_frame(centerline, n_theta)
        self.s = centerline.s
        self.theta = self.frame.theta

        te1 = self.frame.e1[:, 0, :]  # the theta = 0 pair
        te2 = self.frame.e2[:, 0, :]
        self.k1 = np.einsum("ij,ij->i", centerline.d2, te1)
        self.k2 = np.einsum("ij,ij->i", centerline.d2, te2)
        self.l1 = np.einsum("ij,ij->i", centerline.d3, te1)
        self.l2 = np.einsum("ij,ij->i", centerline.d3, te2)
        self.m1 = np.einsum("ij,ij->i", centerline.d4, te1)
        self.m2 = np.einsum("ij,ij->i", centerline.d4, te2)
        self.curv_sq = np.einsum("ij,ij->i", centerline.d2, centerline.d2)

        th = self.theta[None, :]
        self.R = radius.value(th, self.s[:, None])
        self.R_theta = radius.d_theta(th, self.s[:, None])
        self.R_s = radius.d_s(th, self.s[:, None])
        self.R_ss = radius.d_s2(th, self.s[:, None])
        if np.any(self.R <= 0.0):
            raise GeometryError("radius law is nonpositive somewhere on the grid")

        # beta at the wall, where the affine function is extremal
        kth = self.k1[:, None] * np.cos(th) + self.k2[:, None] * np.sin(th)
        beta_wall = 1.0 - self.h * self.R * kth
        self._min_beta = float(min(1.0, beta_wall.min()))
        self._worst_station = int(np.unravel_index(beta_wall.argmin(), beta_wall.shape)[0])
        if validate and self._min_beta <= 0.0:
            raise GeometryError(
                f"pipe wall self-intersects: min beta = {self._min_beta:.4f} <= 0 "
                f"at station s = {self.s[self._worst_station]:.4f} "
                f"(h = {self.h}, max |c''| = {np.sqrt(self.curv_sq.max()):.4f})"
            )

    @property
    def n_s(self):
        return self.centerline.n_s

    @property
    def n_theta(self):
        return len(self.theta)

    def curvature_projections(self, i):
        """(k1, k2, l1, l2, m1, m2, |c''|^2) at station i."""
        return (
            self.k1[i], self.k2[i], self.l1[i], self.l2[i],
            self.m1[i], self.m2[i], self.curv_sq[i],
        )

    def scale_factor(self, eta, theta, i):
        """beta and its two s-derivatives at station i.

        eta and theta broadcast against each other; eta must lie inside the
        section (0 <= eta <= R).  All three fields are exact in the curve
        derivatives (no finite differencing).
        """
        eta = np.asarray(eta, float)
        theta = np.asarray(theta, float)
        cth, sth = np.cos(theta), np.sin(theta)
        k = self.k1[i] * cth + self.k2[i] * sth
        l = self.l1[i] * cth + self.l2[i] * sth
        m = self.m1[i] * cth + self.m2[i] * sth
        beta = 1.0 - self.h * eta * k
        ds_beta = -self.h * eta * l
        ds2_beta = -self.h * eta * (m + k * self.curv_sq[i])
        if np.any(beta <= 0.0):
            raise GeometryError(
                f"beta <= 0 inside the section at station s = {self.s[i]:.4f}"
            )
        return beta, ds_beta, ds2_beta

    def report(self):
        """Grid maxima of the geometric parameters; reports, never raises."""
        d3 = np.linalg.norm(self.centerline.d3, axis=1)
        d4 = np.linalg.norm(self.centerline.d4, axis=1)
        curv = np.sqrt(self.curv_sq)
        lam = self.h * float(d3.max())
        bound = np.sqrt(lam / self.h) if lam > 0.0 else 0.0
        return GeometryReport(
            h=self.h,
            lam=lam,
            lam_star=self.h * float(d4.max()),
            gamma=float(np.abs(self.R_s).max()),
            gamma_star=float(np.abs(self.R_ss).max()),
            max_curvature=float(curv.max()),
            min_beta=self._min_beta,
            min_radius=float(self.R.min()),
            max_radius=float(self.R.max()),
            beta_positive=self._min_beta > 0.0,
            curvature_bound_ok=bool(curv.max() <= bound + 1e-12),
            lam_times_h=lam * self.h,
            frame_drift=self.frame.drift,
            worst_station=self._worst_station,
        )
