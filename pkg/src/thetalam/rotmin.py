"""Rotationally invariant minimal surfaces bounded by the circle pair c(a).

Euclidean: flat disk pairs and catenoids r = c cosh(z / c) through the
circles of the unit sphere at heights +-a.

Hyperbolic: rotational surfaces are geodesics of the strip metric
lambda(theta) |d(theta, t)| with lambda = 2 pi cos(theta) / sin(theta)^2.
Clairaut's relation lambda sin(beta) = c (beta the angle of the tangent
with the theta-direction) is the first integral. A geodesic leaving the
ideal boundary theta = 0 at t_ideal is t_ideal +- U_c(theta) with

    U_c(theta) = int_0^theta c / sqrt(lambda^2 - c^2),

defined up to the waist theta_w where lambda(theta_w) = c. The circle of the
sphere at height a sits at t = artanh(a); the reflection z -> -z becomes
t -> -t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .geom import (
    ALPHA0,
    DomainError,
    MetricProfile,
    cone_angle,
    lambda_weight,
    sphere_height_to_t,
    strip_to_ball,
)

TWO_PI = 2.0 * math.pi
THETA_START = 1e-4
EPS_AREA = 1e-7
S_STEP = 0.5
S_CAUCHY = 1e-6


# ---------------------------------------------------------------------------
# data types


@dataclass
class GeodesicSolution:
    """One branch t(theta) = t_ideal + orientation * U_c(theta), 0 < theta <= theta_max."""

    c_const: float
    t_ideal: float
    theta_max: float
    theta_waist: float
    orientation: int = 1
    samples: np.ndarray = field(default_factory=lambda: np.empty((0, 2)), repr=False)
    beta: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    _dev: Optional["_Deviation"] = field(default=None, repr=False)

    @property
    def theta(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def t(self) -> np.ndarray:
        return self.samples[:, 1]

    def t_at(self, theta):
        th = np.asarray(theta, dtype=float)
        if np.any(th <= 0) or np.any(th > self.theta_max * (1 + 1e-12)):
            raise DomainError("theta outside the solution domain")
        if self.c_const == 0:
            return _scalar(np.full(th.shape, self.t_ideal))
        return _scalar(self.t_ideal + self.orientation * self._dev.U(th))

    def slope_at(self, theta):
        """dt/dtheta from the first integral."""
        th = np.asarray(theta, dtype=float)
        lam = lambda_weight(th)
        c = self.c_const
        return _scalar(self.orientation * c / np.sqrt(np.maximum(lam * lam - c * c, 0.0)))

    def first_integral_residual(self) -> np.ndarray:
        """lambda * t' / sqrt(1 + t'^2) - c at every sample (t'/sqrt(1+t'^2) = sin beta)."""
        return lambda_weight(self.theta) * np.sin(self.beta) - self.c_const


@dataclass
class RotSurface:
    """Rotational surface bounded by c(a).

    Ball model kinds carry an (r, z) profile; hyperbolic kinds carry their
    strip geodesic branches (upper branch first).
    """

    kind: str
    a: float
    profile: np.ndarray = field(repr=False)
    area: float = float("nan")
    params: dict = field(default_factory=dict)
    branches: tuple = field(default=(), repr=False)
    metric: MetricProfile = field(default_factory=MetricProfile.euclidean)

    @property
    def is_annulus(self) -> bool:
        return self.kind in ("Catenoid", "HyperbolicCatenoid")

    def ball_profile(self) -> np.ndarray:
        """(r, z) samples in the ball for either metric."""
        if not self.branches:
            return self.profile
        r, z = strip_to_ball(self.profile[:, 0], self.profile[:, 1])
        return np.column_stack([r, z])


@dataclass
class MaClassification:
    a: float
    metric: MetricProfile
    minimizers: list
    verdict: str
    difference: float
    candidates: list = field(default_factory=list, repr=False)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _check_a(a):
    if not (0.0 < a < 1.0):
        raise DomainError(f"a={a} outside (0, 1)")


# ---------------------------------------------------------------------------
# shared helpers


def theta_of_lambda(k):
    """Inverse of lambda_weight: the theta in (0, pi/2] with lambda(theta) = k >= 0."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise DomainError("lambda values are nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        # 2 pi x = k (1 - x^2) with x = cos(theta); stable root of k x^2 + 2 pi x - k = 0
        x = np.where(k > 0, k / (math.pi + np.sqrt(math.pi**2 + k * k)), 0.0)
    return _scalar(np.arccos(x))


def _dlog_lam(theta):
    return -math.tan(theta) - 2.0 / math.tan(theta)


def profile_residual(r, z, metric: MetricProfile) -> np.ndarray:
    """Stationarity residual kappa - d_n log(r phi^2) along a sampled (r, z) profile.

    Rotational surfaces are critical for the weighted length of the profile
    with weight r phi^2. Derivatives come from a cubic spline in the chord
    parameter; the first and last samples are dropped.
    """
    from scipy.interpolate import CubicSpline

    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(r), np.diff(z)))])
    sr, sz = CubicSpline(s, r), CubicSpline(s, z)
    x1, y1, x2, y2 = sr(s, 1), sz(s, 1), sr(s, 2), sz(s, 2)
    v = np.hypot(x1, y1)
    kappa = (x1 * y2 - y1 * x2) / v**3
    nx, ny = -y1 / v, x1 / v
    gr, gz = metric.log_factor_grad(r, z)
    dn = nx * (1.0 / r + 2.0 * gr) + ny * (2.0 * gz)
    return (kappa - dn)[1:-1]


# ---------------------------------------------------------------------------
# Euclidean family


def disk_pair_area(a: float, metric: Optional[MetricProfile] = None, s: Optional[float] = None) -> float:
    """Area of the disk pair bounded by c(a).

    Euclidean: two flat disks of radius sqrt(1 - a^2). Poincare: the
    totally geodesic pair, clipped to Cyl(s); s is then required.
    """
    _check_a(a)
    metric = metric or MetricProfile.euclidean()
    if not metric.is_hyperbolic:
        return 2.0 * math.pi * (1.0 - a * a)
    if s is None:
        raise DomainError("hyperbolic disk areas are infinite; pass a cutoff s")
    return clipped_area(hyp_disk_pair(a), s)


def _log_cosh(x):
    return x + math.log1p(math.exp(-2.0 * x)) - math.log(2.0)


def _catenoid_f(c, a):
    # log-form of c cosh(a/c) - sqrt(1 - a^2); no overflow for small c
    return math.log(c) + _log_cosh(a / c) - 0.5 * math.log1p(-a * a)


def _catenoid_area_quad(c, a):
    val, _ = quad(lambda z: TWO_PI * c * math.cosh(z / c) ** 2, -a, a, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def catenoid_area(c: float, a: float) -> float:
    """Closed form pi c (2 a + c sinh(2 a / c)) of the catenoid area."""
    return math.pi * c * (2.0 * a + c * math.sinh(2.0 * a / c))


def euclid_catenoid_params(a: float, n_brackets: int = 10_000) -> list[float]:
    """All c in [1e-4, 1] with c cosh(a/c) = sqrt(1 - a^2), ascending."""
    _check_a(a)
    cs = np.geomspace(1e-4, 1.0, n_brackets + 1)
    f = np.array([_catenoid_f(c, a) for c in cs])
    roots = []
    for i in np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) <= 0)[0]:
        if f[i] == 0.0:
            c = float(cs[i])
        elif f[i + 1] == 0.0:
            continue
        else:
            c = brentq(_catenoid_f, cs[i], cs[i + 1], args=(a,), xtol=1e-15, rtol=1e-15)
        # Newton polish on g(c) = c cosh(a/c) - sqrt(1-a^2)
        target = math.sqrt(1.0 - a * a)
        for _ in range(3):
            u = a / c
            g = c * math.cosh(u) - target
            dg = math.cosh(u) - u * math.sinh(u)
            if dg == 0.0:
                break
            step = g / dg
            if abs(step) > 1e-3 * c:
                break
            c -= step
        if not roots or abs(c - roots[-1]) > 1e-12:
            roots.append(float(c))
    return roots


def euclid_catenoid(c: float, a: float, m: int = 201, branch: str = "") -> RotSurface:
    z = np.linspace(-a, a, m)
    prof = np.column_stack([c * np.cosh(z / c), z])
    return RotSurface(
        "Catenoid", a, prof, area=_catenoid_area_quad(c, a), params={"c": c, "branch": branch}
    )


def euclid_catenoids(a: float) -> list[RotSurface]:
    """Catenoids r = c cosh(z/c) through c(a), sorted by area (0, 1 or 2 of them)."""
    cs = euclid_catenoid_params(a)
    out = [euclid_catenoid(c, a) for c in cs]
    out.sort(key=lambda s: s.area)
    for i, s in enumerate(out):
        s.params["branch"] = "stable" if i == 0 else "unstable"
    return out


def euclid_disk_pair(a: float, m: int = 101) -> RotSurface:
    _check_a(a)
    rr = np.linspace(0.0, math.sqrt(1.0 - a * a), m)
    prof = np.column_stack([rr, np.full(m, a)])
    return RotSurface("DiskPair", a, prof, area=disk_pair_area(a), params={"radius": rr[-1]})


def catenoid_ode_residual(surface: RotSurface) -> np.ndarray:
    """r r'' - (1 + r'^2) at the interior samples of a Euclidean catenoid."""
    c = surface.params["c"]
    z = surface.profile[1:-1, 1]
    r = c * np.cosh(z / c)
    r1 = np.sinh(z / c)
    r2 = np.cosh(z / c) / c
    return r * r2 - (1.0 + r1 * r1)


# ---------------------------------------------------------------------------
# hyperbolic geodesics


class _Deviation:
    """U_c(theta) on (0, theta_max], theta_max <= theta_waist.

    Integrated in theta while c / lambda <= 0.8, where the slope is mild,
    then in strip arclength through the vertical tangent at the waist.
    """

    def __init__(self, c: float, theta_max: float, rtol: float = 1e-13):
        self.c = c
        self.theta_w = float(theta_of_lambda(c))
        self.theta_max = float(theta_max)
        self.theta_sw = min(float(theta_of_lambda(1.25 * c)), self.theta_max)
        t0 = THETA_START
        if self.theta_sw <= t0:
            raise DomainError("geodesic domain too close to the ideal boundary")
        u0 = self._series(t0)

        def rhs(th, y):
            lam = lambda_weight(th)
            return [c / math.sqrt(lam * lam - c * c)]

        self.p1 = solve_ivp(rhs, (t0, self.theta_sw), [u0], method="DOP853", rtol=rtol, atol=1e-300, dense_output=True)
        self.p2 = None
        self.s_end = 0.0
        self.at_waist = False
        if self.theta_max > self.theta_sw:
            th1 = self.theta_sw
            b1 = math.asin(c / lambda_weight(th1))

            def rhs2(s, y):
                th, u, b = y
                sb = math.sin(b)
                return [math.cos(b), sb, -sb * _dlog_lam(th)]

            def ev_waist(s, y):
                return y[2] - 0.5 * math.pi

            ev_waist.terminal = True
            ev_waist.direction = 1
            events = [ev_waist]
            if self.theta_max < self.theta_w - 1e-13:

                def ev_th(s, y):
                    return y[0] - self.theta_max

                ev_th.terminal = True
                ev_th.direction = 1
                events.append(ev_th)
            span = 4.0 * (self.theta_w - th1) + 1.0
            self.p2 = solve_ivp(
                rhs2, (0.0, span), [th1, float(self.p1.sol(th1)[0]), b1], method="DOP853",
                rtol=1e-13, atol=[1e-16, 1e-16, 1e-16], dense_output=True, events=events,
            )
            self.s_end = float(self.p2.t[-1])
            self.at_waist = bool(self.p2.t_events[0].size)
            y_end = self.p2.y[:, -1]
            self.theta_end = float(y_end[0])
        else:
            self.theta_end = self.theta_max

    def _series(self, th):
        return self.c / TWO_PI * (th**3 / 3.0 + th**5 / 30.0)

    def U(self, theta):
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        out = np.empty_like(th)
        lo = th < THETA_START
        out[lo] = self._series(th[lo])
        mid = (~lo) & (th <= self.theta_sw)
        if mid.any():
            out[mid] = self.p1.sol(th[mid])[0]
        hi = th > self.theta_sw
        for k in np.nonzero(hi)[0]:
            out[k] = self._arc_state(th[k])[1]
        return out if np.ndim(theta) else out[0]

    def _arc_state(self, th):
        if th >= self.theta_end:
            return self.p2.y[:, -1]
        s = brentq(lambda s: self.p2.sol(s)[0] - th, 0.0, self.s_end, xtol=1e-15, rtol=1e-15)
        return self.p2.sol(s)

    def samples(self, m1=240, m2=120):
        th1 = np.geomspace(THETA_START, self.theta_sw, m1)
        u1 = self.p1.sol(th1)[0]
        lam = lambda_weight(th1)
        b1 = np.arcsin(np.minimum(self.c / lam, 1.0))
        if self.p2 is None:
            return th1, u1, b1
        s = np.linspace(0.0, self.s_end, m2)[1:]
        y = self.p2.sol(s)
        return np.concatenate([th1, y[0]]), np.concatenate([u1, y[1]]), np.concatenate([b1, y[2]])


@lru_cache(maxsize=4096)
def _deviation(c: float, theta_max: float) -> _Deviation:
    return _Deviation(c, theta_max)


def hyp_geodesic(c_const: float, t_ideal: float, theta_max: Optional[float] = None) -> GeodesicSolution:
    """Strip geodesic leaving the ideal boundary at t_ideal with first integral c_const.

    Negative c_const is mapped to the mirror branch t_ideal - U_|c|.
    theta_max defaults to the waist (pi/2 for c_const = 0).
    """
    orient = -1 if c_const < 0 else 1
    c = abs(float(c_const))
    theta_w = float(theta_of_lambda(c))
    if theta_max is None:
        theta_max = theta_w
    if not (0.0 < theta_max <= theta_w * (1 + 1e-14)):
        raise DomainError(f"theta_max={theta_max} beyond the waist {theta_w}")
    theta_max = min(float(theta_max), theta_w)
    if c == 0.0:
        th = np.geomspace(THETA_START, theta_max, 200)
        return GeodesicSolution(0.0, float(t_ideal), theta_max, theta_w, 1,
                                np.column_stack([th, np.full(th.size, float(t_ideal))]), np.zeros(th.size))
    dev = _deviation(c, theta_max)
    th, u, b = dev.samples()
    sol = GeodesicSolution(c, float(t_ideal), theta_max, theta_w, orient,
                           np.column_stack([th, t_ideal + orient * u]), b, dev)
    return sol


def separation(theta_waist: float) -> float:
    """Ideal-boundary separation t_ideal+ - t_ideal- of the catenoid with that waist."""
    c = lambda_weight(theta_waist)
    return 2.0 * float(_deviation(c, float(theta_of_lambda(c))).U(theta_of_lambda(c)))


def hyp_catenoid(theta_waist: float, waist_t: float = 0.0, a: Optional[float] = None) -> RotSurface:
    """Hyperbolic catenoid whose waist circle sits at (theta_waist, waist_t)."""
    if not (0.0 < theta_waist < 0.5 * math.pi):
        raise DomainError("theta_waist must lie in (0, pi/2)")
    c = float(lambda_weight(theta_waist))
    theta_w = float(theta_of_lambda(c))
    half = float(_deviation(c, theta_w).U(theta_w))
    up = hyp_geodesic(-c, waist_t + half, theta_w)
    down = hyp_geodesic(c, waist_t - half, theta_w)
    # both branches end at the waist; keep a single exact waist sample
    prof = np.vstack([up.samples[:-1], [[theta_w, waist_t]], down.samples[::-1][1:]])
    if a is None:
        a = math.tanh(abs(waist_t) + half) if waist_t == 0 else float("nan")
    return RotSurface(
        "HyperbolicCatenoid", a, prof, params={"c": c, "theta_waist": theta_w, "waist_t": waist_t,
                                               "t_ideal": (up.t_ideal, down.t_ideal)},
        branches=(up, down), metric=MetricProfile.poincare(),
    )


def hyp_disk_pair(a: float) -> RotSurface:
    """Totally geodesic disks t = +-artanh(a)."""
    _check_a(a)
    T = sphere_height_to_t(a)
    up = hyp_geodesic(0.0, T)
    down = hyp_geodesic(0.0, -T)
    prof = np.vstack([up.samples, down.samples[::-1]])
    return RotSurface("TotallyGeodesicDiskPair", a, prof, params={"T": T}, branches=(up, down),
                      metric=MetricProfile.poincare())


def ribbon_length(sol1: GeodesicSolution, sol2: GeodesicSolution, theta):
    """lambda(theta) |t1(theta) - t2(theta)|: area of the cone ribbon between two branches."""
    # waists come from a root find, so ideal heights agree to ~1e-10 only
    if abs(sol1.t_ideal - sol2.t_ideal) > 1e-8 * max(1.0, abs(sol1.t_ideal)):
        raise DomainError("branches do not share an ideal boundary circle")
    th = np.asarray(theta, dtype=float)
    if sol1.c_const == sol2.c_const and sol1.orientation == sol2.orientation:
        return _scalar(np.zeros(th.shape))
    u1 = sol1.t_at(th) - sol1.t_ideal
    u2 = sol2.t_at(th) - sol2.t_ideal
    return _scalar(lambda_weight(th) * np.abs(u1 - u2))


# ---------------------------------------------------------------------------
# clipped areas


def _branch_length(c, theta_w, lo, hi):
    """int_lo^hi lambda^2 / sqrt(lambda^2 - c^2) d theta for lo < hi <= theta_w."""
    if hi <= lo:
        return 0.0
    if c == 0.0:
        return TWO_PI * (1.0 / math.sin(lo) - 1.0 / math.sin(hi))

    def f(th):
        lam = lambda_weight(th)
        return lam * lam / math.sqrt(max(lam * lam - c * c, 0.0))

    cut = theta_w - 0.5 * (theta_w - lo)
    if hi <= cut:
        return quad(f, lo, hi, epsabs=1e-15, epsrel=1e-12, limit=400)[0]
    return quad(f, lo, cut, epsabs=1e-15, epsrel=1e-12, limit=400)[0] + _waist_part(c, theta_w, cut, hi)


def _lam_gap(theta_w, d):
    """lambda(theta_w - d) - lambda(theta_w) without cancellation for small d."""
    theta = theta_w - d
    st, sw = math.sin(theta), math.sin(theta_w)
    dcos = 2.0 * math.sin(theta_w - 0.5 * d) * math.sin(0.5 * d)
    return TWO_PI * dcos * (1.0 + math.cos(theta) * math.cos(theta_w)) / (st * st * sw * sw)


def _waist_part(c, theta_w, lo, hi):
    """int_lo^hi lambda^2 / sqrt(lambda^2 - c^2), hi <= theta_w, with theta = theta_w - v^2."""

    def g(v):
        if v == 0.0:
            return 2.0 * c / math.sqrt(-2.0 * _dlog_lam(theta_w))
        th = theta_w - v * v
        lam = lambda_weight(th)
        return 2.0 * v * lam * lam / math.sqrt(_lam_gap(theta_w, v * v) * (lam + c))

    v_hi = math.sqrt(max(theta_w - lo, 0.0))
    v_lo = math.sqrt(max(theta_w - hi, 0.0))
    return quad(g, v_lo, v_hi, epsabs=1e-15, epsrel=1e-12, limit=400)[0]


def _branch_intervals(sol: GeodesicSolution, lo: float, hi: float, h: float, m: int = 400):
    """Sub-intervals of [lo, hi] where the branch is within distance h of the plane t = 0."""
    if not math.isfinite(h):
        return [(lo, hi)]
    sh = math.sinh(h)

    def g(th):
        return sh * math.sin(th) - abs(math.sinh(float(sol.t_at(th))))

    grid = np.linspace(lo, hi, m)
    vals = np.array([g(x) for x in grid])
    out, start = [], (lo if vals[0] >= 0 else None)
    for i in range(m - 1):
        if (vals[i] >= 0) != (vals[i + 1] >= 0):
            x = brentq(g, grid[i], grid[i + 1], xtol=1e-14)
            if vals[i] >= 0:
                out.append((start, x))
                start = None
            else:
                start = x
    if start is not None:
        out.append((start, hi))
    return out


def clipped_area(surface: RotSurface, s: float, h: float = math.inf) -> float:
    """Area of a hyperbolic rotational surface inside Cyl(s, h).

    Cyl(s) is the set within distance s of the axis (theta >= cone_angle(s));
    h clips to distance < h from the totally geodesic plane t = 0. The area
    is the weighted length int lambda sqrt(dt^2 + dtheta^2) of the profile,
    with dt / dtheta taken from the first integral.
    """
    if not s > 0:
        raise DomainError("cutoff radius s must be positive")
    if not surface.branches:
        raise DomainError("clipped areas apply to hyperbolic surfaces")
    alpha = cone_angle(s)
    total = 0.0
    for b in surface.branches:
        if alpha <= 0:
            raise DomainError("surface samples do not reach the cutoff cone")
        hi = b.theta_max
        if alpha >= hi:
            continue
        for lo_i, hi_i in _branch_intervals(b, alpha, hi, h):
            total += _branch_length(b.c_const, b.theta_waist, lo_i, hi_i)
    return total


def delta_clipped(theta_waist: float, s: float) -> float:
    """Clipped catenoid area minus clipped disk-pair area, without cancellation."""
    c = float(lambda_weight(theta_waist))
    tw = float(theta_of_lambda(c))
    alpha = cone_angle(s)
    if alpha >= tw:
        return -TWO_PI * 2.0 * (1.0 / math.sin(alpha) - 1.0) if alpha < 0.5 * math.pi else 0.0

    def f(th):
        lam = lambda_weight(th)
        root = math.sqrt(max(lam * lam - c * c, 0.0))
        return lam * c * c / (root * (lam + root))

    cut = tw - 0.5 * (tw - alpha) if tw - alpha > 0 else alpha
    v1 = quad(f, alpha, cut, epsabs=1e-15, epsrel=1e-12, limit=400)[0]
    # near the waist: lambda^2/sqrt(.) - lambda, using the substitution there
    v2 = _waist_part(c, tw, cut, tw) - TWO_PI * (1.0 / math.sin(cut) - 1.0 / math.sin(tw))
    return 2.0 * (v1 + v2) - 2.0 * TWO_PI * (1.0 / math.sin(tw) - 1.0)


def delta_limit(theta_waist: float, s_step: float = S_STEP, tol: float = S_CAUCHY, s_max: float = 60.0):
    """Limit of delta_clipped along s_k = k s_step; returns (value, s_k)."""
    k = 1
    prev = delta_clipped(theta_waist, s_step)
    while k * s_step < s_max:
        k += 1
        cur = delta_clipped(theta_waist, k * s_step)
        if abs(cur - prev) <= tol:
            return cur, k * s_step
        prev = cur
    raise RuntimeError("clipped-area difference did not settle")


# ---------------------------------------------------------------------------
# hyperbolic catenoid family through c(a)


@lru_cache(maxsize=1)
def _separation_table():
    # clustered at both ends, where the waist approaches the ideal boundary or the axis
    th = np.concatenate([
        np.geomspace(1e-3, 0.05, 24, endpoint=False),
        np.linspace(0.05, 0.5 * math.pi - 0.05, 100, endpoint=False),
        0.5 * math.pi - np.geomspace(0.05, 1e-4, 24),
    ])
    return th, np.array([separation(x) for x in th])


def hyp_catenoid_waists(a: float) -> list[float]:
    """Waist angles of the symmetric hyperbolic catenoids bounded by c(a)."""
    _check_a(a)
    target = 2.0 * sphere_height_to_t(a)
    th, sep = _separation_table()
    f = sep - target
    roots = []
    for i in np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) <= 0)[0]:
        if f[i] == 0:
            roots.append(float(th[i]))
            continue
        if f[i + 1] == 0:
            continue
        roots.append(brentq(lambda x: separation(x) - target, th[i], th[i + 1], xtol=1e-14, rtol=1e-15))
    return roots


def hyp_catenoids(a: float) -> list[RotSurface]:
    out = []
    for tw in hyp_catenoid_waists(a):
        cat = hyp_catenoid(tw, 0.0, a=a)
        cat.params["delta"], cat.params["s_cut"] = delta_limit(tw)
        out.append(cat)
    out.sort(key=lambda s: s.params["delta"])
    for i, s in enumerate(out):
        s.params["branch"] = "stable" if i == 0 else "unstable"
    return out


# ---------------------------------------------------------------------------
# classification


def classify_Ma(a: float, metric: Optional[MetricProfile] = None, eps_area: float = EPS_AREA) -> MaClassification:
    """Decide which rotational surfaces bounded by c(a) have least area.

    The signed difference is (best annulus) - (disk pair): the area
    difference in the Euclidean case, the limit of clipped differences in
    the hyperbolic case. No annulus counts as +inf.
    """
    _check_a(a)
    metric = metric or MetricProfile.euclidean()
    if metric.is_hyperbolic:
        cats = hyp_catenoids(a)
        disks = hyp_disk_pair(a)
        diffs = [c.params["delta"] for c in cats]
    else:
        cats = euclid_catenoids(a)
        disks = euclid_disk_pair(a)
        diffs = [c.area - disks.area for c in cats]
    d = min(diffs) if diffs else math.inf
    if d < -eps_area:
        verdict = "AnnuliOnly"
        mins = [c for c, x in zip(cats, diffs) if abs(x - d) <= eps_area]
    elif d > eps_area:
        verdict = "DisksOnly"
        mins = [disks]
    else:
        verdict = "Both"
        mins = [disks] + [c for c, x in zip(cats, diffs) if abs(x) <= eps_area]
    return MaClassification(a, metric, mins, verdict, d, candidates=[disks] + cats)


def _signed_difference(a: float, metric: MetricProfile) -> float:
    if metric.is_hyperbolic:
        ws = hyp_catenoid_waists(a)
        return min((delta_limit(w)[0] for w in ws), default=math.inf)
    cs = euclid_catenoid_params(a)
    disk = disk_pair_area(a)
    return min((catenoid_area(c, a) - disk for c in cs), default=math.inf)


@dataclass
class ACrit:
    a_crit: float
    bracket: tuple
    metric: str


def find_a_crit(metric: Optional[MetricProfile] = None, delta: float = 1e-3, width: float = 1e-8) -> ACrit:
    """Height where the least-area rotational surface switches from annuli to disks."""
    metric = metric or MetricProfile.euclidean()
    return _find_a_crit(metric, float(delta), float(width))


@lru_cache(maxsize=16)
def _find_a_crit(metric, delta, width):
    grid = np.linspace(delta, 1.0 - delta, 41)
    vals = [_signed_difference(float(a), metric) for a in grid]
    lo = hi = None
    for i in range(len(grid) - 1):
        if vals[i] < 0 <= vals[i + 1] or (vals[i] < 0 and vals[i + 1] == math.inf):
            lo, hi = float(grid[i]), float(grid[i + 1])
            break
    if lo is None:
        raise RuntimeError("no sign change of the area difference on (delta, 1 - delta)")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if _signed_difference(mid, metric) < 0:
            lo = mid
        else:
            hi = mid
    return ACrit(0.5 * (lo + hi), (lo, hi), metric.kind)


# ---------------------------------------------------------------------------
# crossings


def _branches(x):
    if isinstance(x, GeodesicSolution):
        return [x]
    if isinstance(x, RotSurface) and x.branches:
        return list(x.branches)
    raise DomainError("expected a strip geodesic or a hyperbolic rotational surface")


def count_crossings(sol1, sol2, region=(0.0, ALPHA0), m: int = 2000) -> int:
    """Sign changes of t1 - t2 over all branch pairs restricted to theta in region."""
    total = 0
    overlap = False
    for b1 in _branches(sol1):
        for b2 in _branches(sol2):
            lo = max(region[0], THETA_START)
            hi = min(region[1], b1.theta_max, b2.theta_max)
            if hi <= lo:
                continue
            overlap = True
            th = np.linspace(lo, hi, m)
            d = b1.t_at(th) - b2.t_at(th)
            sg = np.sign(d)
            sg = sg[sg != 0]
            total += int(np.count_nonzero(sg[1:] != sg[:-1]))
    if not overlap:
        raise DomainError("no common theta domain in the region")
    return total


def geodesics_cross_at_most_once(sol1, sol2, region=(0.0, ALPHA0)) -> bool:
    """True iff the two rotational surfaces meet in at most one circle within region.

    The default region is the negatively curved part theta <= arctan(sqrt 2)
    of the strip, i.e. outside Cyl(|ln tan(alpha0 / 2)|).
    """
    return count_crossings(sol1, sol2, region) <= 1
