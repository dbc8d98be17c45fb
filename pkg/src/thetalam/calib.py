"""Calibration checks for the rotational foliation generated by a theta-graph.

Rotating a theta-graph D about the axis gives a foliation of B \\ Z by the
level sets of F(r, z, phi) = phi - theta(r, z). Its unit normal in the metric
psi^2 |dx|^2 is nu = psi^{-1} n, with n the Euclidean unit normal

    n = (-r theta_r, 1, -r theta_z) / W,  W = sqrt(1 + r^2 |grad theta|^2)

in the cylindrical frame (e_r, e_phi, e_z). Div_g nu = psi^{-3} div(psi^2 n),
which vanishes exactly when the leaves are minimal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .geom import DomainError, MetricProfile, cone_angle, lambda_weight, strip_to_ball
from .rotmin import RotSurface

TWO_PI = 2.0 * math.pi


@dataclass
class NormalField:
    """Unit normal of the rotated foliation on the lattice (r_i, z_j) times phi samples.

    `cyl` holds the Euclidean unit normal n in (e_r, e_phi, e_z) components;
    `nu` holds the metric-unit normal psi^{-1} n in Cartesian components for
    every phi sample. Entries are nan where the lattice stencil is incomplete.
    """

    r: np.ndarray
    z: np.ndarray
    phi: np.ndarray
    cyl: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)
    metric: MetricProfile
    h: float
    radius: float
    orientation: int = 1

    def psi(self, r, z):
        return self.metric.conformal_factor(np.asarray(r, dtype=float), np.asarray(z, dtype=float))

    def cyl_at(self, r, z):
        """Bilinear interpolation of the cylindrical components at (r, z)."""
        key = "_interp"
        if not hasattr(self, key):
            self._interp = [
                RegularGridInterpolator((self.r, self.z), self.cyl[..., k], bounds_error=False, fill_value=np.nan)
                for k in range(3)
            ]
        pts = np.column_stack([np.ravel(r), np.ravel(z)])
        return np.stack([f(pts).reshape(np.shape(r)) for f in self._interp], axis=-1)

    def at(self, r, z, phi):
        """Metric-unit normal in Cartesian components at (r, z, phi)."""
        c = self.cyl_at(r, z)
        return _to_cartesian(c, np.asarray(phi, dtype=float)) / self.psi(r, z)[..., None]


def _to_cartesian(c, phi):
    cp, sp = np.cos(phi), np.sin(phi)
    x = c[..., 0] * cp - c[..., 1] * sp
    y = c[..., 0] * sp + c[..., 1] * cp
    return np.stack(np.broadcast_arrays(x, y, c[..., 2]), axis=-1)


def foliation_normal(g, n_phi: int = 16, orientation: int = 1) -> NormalField:
    """Normal field of the foliation by rotated copies of the theta-graph g.

    Derivatives of theta are centered differences on the grid lattice;
    on the axis n = e_phi whatever theta does there.
    """
    if orientation not in (1, -1):
        raise DomainError("orientation must be +1 or -1")
    grid = g.grid
    N, h = grid.grid_n, grid.h
    lat = grid.lattice
    T = np.where(lat >= 0, g.theta[np.maximum(lat, 0)], np.nan)
    tr = np.full(T.shape, np.nan)
    tz = np.full(T.shape, np.nan)
    tr[1:-1] = (T[2:] - T[:-2]) / (2 * h)
    tz[:, 1:-1] = (T[:, 2:] - T[:, :-2]) / (2 * h)
    r = np.arange(N + 1) * h
    z = np.arange(-N, N + 1) * h
    R = r[:, None]
    tr[0] = 0.0  # multiplied by r = 0
    W = np.sqrt(1.0 + R * R * (tr * tr + tz * tz))
    cyl = np.stack([-R * tr / W, 1.0 / W, -R * tz / W], axis=-1) * orientation
    axis = np.isfinite(T[0])
    cyl[0, axis] = (0.0, float(orientation), 0.0)
    phi = np.arange(n_phi) * (TWO_PI / n_phi)
    with np.errstate(divide="ignore"):
        psi = g.metric.conformal_factor(np.broadcast_to(R, T.shape), np.broadcast_to(z[None, :], T.shape))
    nu = _to_cartesian(cyl[:, :, None, :], phi[None, None, :]) / psi[:, :, None, None]
    return NormalField(r, z, phi, cyl, nu, g.metric, h, grid.radius, orientation)


# ---------------------------------------------------------------------------
# divergence


@dataclass
class DivergenceReport:
    sup: float
    mean: float
    r: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


def divergence_field(nf: NormalField) -> np.ndarray:
    """Div_g nu on the lattice by centered differences in r, z and phi (nan where undefined)."""
    h = nf.h
    R = nf.r[:, None]
    Z = nf.z[None, :]
    with np.errstate(divide="ignore"):
        psi = nf.psi(np.broadcast_to(R, nf.cyl.shape[:2]), np.broadcast_to(Z, nf.cyl.shape[:2]))
    w = psi**2
    div = np.full(w.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        Fr = R * w * nf.cyl[..., 0]
        Fz = w * nf.cyl[..., 2]
        dr = (Fr[2:, 1:-1] - Fr[:-2, 1:-1]) / (2 * h) / R[1:-1]
        dz = (Fz[1:-1, 2:] - Fz[1:-1, :-2]) / (2 * h)
        # the phi term, from the stored Cartesian samples
        m = len(nf.phi)
        dphi = nf.phi[1] - nf.phi[0] if m > 1 else TWO_PI
        ephi = np.stack([-np.sin(nf.phi), np.cos(nf.phi), np.zeros(m)], axis=-1)
        Fphi = np.einsum("ijpk,pk->ijp", nf.nu, ephi) * (psi**3)[:, :, None]
        dphi_term = (np.roll(Fphi, -1, axis=2) - np.roll(Fphi, 1, axis=2)) / (2 * dphi)
        dp = dphi_term[1:-1, 1:-1, 0] / R[1:-1]
        div[1:-1, 1:-1] = (dr + dz + dp) / psi[1:-1, 1:-1] ** 3
    return div


def divergence_residual(
    nf: NormalField, min_axis_distance: Optional[float] = None, rho_max: Optional[float] = None
) -> DivergenceReport:
    """sup and mean of |Div nu| over samples at distance >= 3h from the axis.

    Samples within 3h of the outer circle are also left out; `min_axis_distance`
    and `rho_max` fix a window in absolute units instead (for step-halving
    studies on a common set).
    """
    h = nf.h
    d0 = 3 * h if min_axis_distance is None else min_axis_distance
    rho_max = nf.radius - 3 * h if rho_max is None else rho_max
    div = divergence_field(nf)
    R, Z = np.meshgrid(nf.r, nf.z, indexing="ij")
    m = np.isfinite(div) & (R >= d0 - 1e-12) & (np.hypot(R, Z) <= rho_max)
    vals = np.abs(div[m])
    if vals.size == 0:
        return DivergenceReport(math.nan, math.nan, R[m], Z[m], vals)
    return DivergenceReport(float(vals.max()), float(vals.mean()), R[m], Z[m], div[m])


# ---------------------------------------------------------------------------
# generalized divergence theorem


@dataclass(frozen=True)
class CylinderShell:
    """{r_in <= r <= r_out, z0 <= z <= z1}; r_in = 0 contains an axis segment."""

    r_in: float
    r_out: float
    z0: float
    z1: float
    phi0: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.r_in < self.r_out and self.z0 < self.z1):
            raise DomainError("invalid cylinder shell")

    @property
    def meets_axis(self) -> bool:
        return self.r_in == 0.0


@dataclass
class GDTReport:
    flux: float
    eps: list
    volume: list
    residual: list
    bound: list
    monotone: bool
    passed: bool


def _mid(a, b, m):
    return a + (np.arange(m) + 0.5) * (b - a) / m


def boundary_flux(nf: NormalField, omega: CylinderShell, m: int = 256, m_phi: int = 32) -> float:
    """int over the boundary of omega of g(nu, n) dA_g, midpoint rule in every patch."""
    phis = omega.phi0 + _mid(0.0, TWO_PI, m_phi)
    dphi = TWO_PI / m_phi
    total = 0.0

    def integrate(r, z, normal, jac):
        # r, z: (k,) sample points; normal: (k, m_phi, 3) Euclidean unit normals
        nu = nf.at(r[:, None] * np.ones(m_phi), z[:, None] * np.ones(m_phi), phis[None, :])
        psi = nf.psi(r, z)[:, None]
        return float(np.sum(psi**3 * np.einsum("kpd,kpd->kp", nu, normal) * jac[:, None]) * dphi)

    zs = _mid(omega.z0, omega.z1, m)
    dz = (omega.z1 - omega.z0) / m
    er = np.stack([np.cos(phis), np.sin(phis), np.zeros(m_phi)], axis=-1)
    for rad, sgn in ((omega.r_out, 1.0), (omega.r_in, -1.0)):
        if rad == 0.0:
            continue
        normal = np.broadcast_to(sgn * er, (m, m_phi, 3))
        total += integrate(np.full(m, rad), zs, normal, np.full(m, rad * dz))
    rs = _mid(omega.r_in, omega.r_out, m)
    dr = (omega.r_out - omega.r_in) / m
    for zc, sgn in ((omega.z1, 1.0), (omega.z0, -1.0)):
        normal = np.broadcast_to(np.array([0.0, 0.0, sgn]), (m, m_phi, 3))
        total += integrate(rs, np.full(m, zc), normal, rs * dr)
    return total


def _div_interpolator(nf):
    div = divergence_field(nf)
    # below r = h use the first computed column
    div[0] = div[1]
    div = np.where(np.isfinite(div), div, np.nan)
    return RegularGridInterpolator((nf.r, nf.z), div, bounds_error=False, fill_value=np.nan)


def volume_divergence(nf: NormalField, omega: CylinderShell, eps: float, m: int = 256, interp=None) -> float:
    """int over omega minus the tube r < eps of Div_g nu dV_g."""
    lo = max(omega.r_in, eps)
    if lo >= omega.r_out:
        return 0.0
    f = interp or _div_interpolator(nf)
    rs = _mid(lo, omega.r_out, m)
    zs = _mid(omega.z0, omega.z1, m)
    R, Z = np.meshgrid(rs, zs, indexing="ij")
    d = f(np.column_stack([R.ravel(), Z.ravel()])).reshape(R.shape)
    psi = nf.psi(R, Z)
    cell = (omega.r_out - lo) * (omega.z1 - omega.z0) / m**2
    return float(TWO_PI * np.nansum(d * psi**3 * R) * cell)


def generalized_divergence_check(
    nf: NormalField,
    omega: CylinderShell,
    eps0: float = 0.1,
    k_max: int = 5,
    c_h: float = 50.0,
    m: int = 256,
) -> GDTReport:
    """Flux through the boundary of omega against the divergence integral outside tubes.

    Tubes of radius eps_k = eps0 / 2^k around the axis are removed; the
    residual flux - volume(eps_k) is compared with the tube bound
    psi_max^2 * (area of the tube boundary inside omega) + c_h h^2.
    """
    rho = math.hypot(omega.r_out, max(abs(omega.z0), abs(omega.z1)))
    if rho >= nf.radius - 3 * nf.h:
        raise DomainError("omega must stay inside the ball (3h away from the boundary circle)")
    flux = boundary_flux(nf, omega, m)
    interp = _div_interpolator(nf)
    eps = [eps0 / 2**k for k in range(k_max + 1)]
    vol, res, bound = [], [], []
    zmax = max(abs(omega.z0), abs(omega.z1))
    for e in eps:
        v = volume_divergence(nf, omega, e, m, interp)
        vol.append(v)
        res.append(flux - v)
        if omega.meets_axis:
            psi2 = float(nf.psi(np.array([e]), np.array([zmax]))[0]) ** 2
            tube = psi2 * (TWO_PI * e * (omega.z1 - omega.z0) + 2 * math.pi * e * e)
        else:
            tube = 0.0
        bound.append(tube + c_h * nf.h**2)
    a = np.abs(res)
    # trend in eps, up to the h^2 discretization floor
    floor = nf.h**2
    monotone = bool(np.all(np.diff(a) <= floor) or np.all(np.diff(a) >= -floor))
    passed = bool(np.all(a <= np.array(bound)))
    return GDTReport(flux, eps, vol, res, bound, monotone, passed)


# ---------------------------------------------------------------------------
# calibration inequality and competitors


def calibration_flux(nf: NormalField, profile: np.ndarray, m_sub: int = 4):
    """(int_M' g(nu, n') dA, area(M')) for the rotational surface with ball profile (r, z).

    Quadrature points where the lattice stencil is incomplete (next to the
    outer circle) are skipped in both sums, so the ratio |flux| / area is
    the meaningful output: it is at most 1, with equality on leaves.
    """
    P = np.asarray(profile, dtype=float)
    a, b = P[:-1], P[1:]
    t = (np.arange(m_sub) + 0.5) / m_sub
    mids = a[:, None, :] + (b - a)[:, None, :] * t[None, :, None]
    seg = (b - a) / m_sub
    ds = np.hypot(seg[:, 0], seg[:, 1])[:, None] * np.ones(m_sub)
    with np.errstate(invalid="ignore", divide="ignore"):
        nrm = np.stack([seg[:, 1], -seg[:, 0]], axis=-1) / np.hypot(seg[:, 0], seg[:, 1])[:, None]
    r, z = mids[..., 0], mids[..., 1]
    c = nf.cyl_at(r, z)
    dot = c[..., 0] * nrm[:, None, 0] + c[..., 2] * nrm[:, None, 1]
    psi2 = nf.psi(r, z) ** 2
    dA = TWO_PI * r * ds * psi2
    ok = np.isfinite(dot)
    return float(np.sum((dot * dA)[ok])), float(np.sum(dA[ok]))


@dataclass
class CompetitorResult:
    name: str
    area: float
    difference: float  # area(M) - area(M'), or the clipped analogue
    allowance: float
    beats_M: bool


@dataclass
class CompetitorReport:
    M: str
    metric: str
    results: list = field(repr=False)
    passed: bool = True

    @property
    def n_competitors(self) -> int:
        return len(self.results)

    @property
    def worst(self) -> CompetitorResult:
        return max(self.results, key=lambda c: c.difference - c.allowance)


def _bumps(rng, k=3):
    """Smooth bump profile on [0, 1] vanishing with its derivative at both ends."""
    centers = rng.uniform(0.15, 0.85, k)
    widths = rng.uniform(0.05, 0.25, k)
    amps = rng.normal(0.0, 1.0, k)

    def f(u):
        out = np.zeros_like(u)
        for c, w, a in zip(centers, widths, amps):
            x = (u - c) / w
            out += a * np.where(np.abs(x) < 1, np.cos(0.5 * math.pi * x) ** 4, 0.0)
        return out * (np.sin(math.pi * u) ** 2)

    return f


def _ball_area(P, metric):
    """Polyline quadrature of 2 pi int r psi^2 ds (midpoint per segment)."""
    a, b = P[:-1], P[1:]
    mid = 0.5 * (a + b)
    ds = np.hypot(*(b - a).T)
    psi = metric.conformal_factor(mid[:, 0], mid[:, 1])
    return float(TWO_PI * np.sum(mid[:, 0] * psi**2 * ds))


def _strip_area(P, alpha):
    """Polyline quadrature of int lambda ds over the part with theta >= alpha."""
    a, b = P[:-1], P[1:]
    keep = (a[:, 0] >= alpha) & (b[:, 0] >= alpha)
    mid = 0.5 * (a + b)[keep]
    ds = np.hypot(*(b - a)[keep].T)
    return float(np.sum(lambda_weight(mid[:, 0]) * ds))


def _perturb(P, bump, amp):
    """Move polyline samples along their normals by amp * bump(arclength fraction)."""
    seg = np.diff(P, axis=0)
    s = np.r_[0.0, np.cumsum(np.hypot(*seg.T))]
    u = s / s[-1]
    tang = np.gradient(P, s, axis=0)
    tang /= np.hypot(*tang.T)[:, None]
    nrm = np.stack([-tang[:, 1], tang[:, 0]], axis=-1)
    return P + (amp * bump(u))[:, None] * nrm


def _dense(P, m=4000):
    s = np.r_[0.0, np.cumsum(np.hypot(*np.diff(P, axis=0).T))]
    u = np.linspace(0.0, s[-1], m)
    return np.column_stack([np.interp(u, s, P[:, 0]), np.interp(u, s, P[:, 1])])


def _pieces(surface: RotSurface):
    """Connected profile pieces in the coordinates used for area quadrature."""
    if surface.branches:
        if surface.is_annulus:
            return [surface.profile]
        return [b.samples for b in surface.branches]
    if surface.is_annulus:
        return [surface.profile]
    P = surface.profile
    return [P, P * np.array([1.0, -1.0])]


def competitor_test(
    M: RotSurface,
    competitors: Sequence[RotSurface],
    metric: MetricProfile,
    n_random: int = 200,
    seed: int = 0,
    amplitude: float = 0.02,
    tol: float = 1e-9,
    s: Optional[float] = None,
) -> CompetitorReport:
    """Compare M with every competitor sharing its boundary c(a).

    Each competitor (M itself included) is also deformed by `n_random`
    seeded smooth bumps normal to its profile that keep the ends fixed.
    Deformed areas are the exact area of the undeformed surface plus the
    polyline quadrature difference, so the comparison does not pick up
    quadrature error. Euclidean: passes when no competitor has area below
    area(M) - tol. Poincare: areas are clipped to Cyl(s) and a competitor
    may undercut M by at most the cone ribbon between them at s, which
    tends to 0 as s grows.
    """
    for c in competitors:
        if abs(c.a - M.a) > 1e-12:
            raise DomainError(f"competitor {c.kind} bounds c({c.a}) but M bounds c({M.a})")
    rng = np.random.default_rng(seed)
    hyper = metric.is_hyperbolic
    if hyper:
        from .rotmin import clipped_area, ribbon_length

        s = 8.0 if s is None else float(s)
        alpha = cone_angle(s)
        area_of = lambda surf: clipped_area(surf, s)
        quad_of = lambda P: _strip_area(P, alpha)
    else:
        area_of = lambda surf: surf.area
        quad_of = lambda P: _ball_area(P, metric)
    base_M = area_of(M)
    pool = [M] + [c for c in competitors if c is not M]
    results = []
    for k, c in enumerate(pool):
        exact = area_of(c)
        allow = tol
        if hyper:
            allow += _ribbon_allowance(M, c, alpha, ribbon_length)
        name = c.kind if k else f"M:{c.kind}"
        results.append(CompetitorResult(name, exact, base_M - exact, allow, base_M - exact > allow))
        pieces = [_dense(P) for P in _pieces(c)]
        base_quad = [quad_of(P) for P in pieces]
        for j in range(n_random):
            bump = _bumps(rng)
            scale = amplitude * (1.0 if not hyper else 0.5)
            which = j % len(pieces)
            Q = _perturb(pieces[which], bump, scale)
            if not hyper and np.any(Q[:, 0] < 0):
                continue
            area = exact + quad_of(Q) - base_quad[which]
            d = base_M - area
            results.append(CompetitorResult(f"{name}+bump{j}", area, d, allow, d > allow))
    return CompetitorReport(M.kind, metric.kind, results, not any(r.beats_M for r in results))


def _ribbon_allowance(M, c, alpha, ribbon_length):
    """Sum over matched branches of the ribbon between them at the cutoff cone."""
    if not (M.branches and c.branches):
        return 0.0
    total = 0.0
    for b1, b2 in zip(M.branches, c.branches):
        if abs(b1.t_ideal - b2.t_ideal) > 1e-8:
            continue
        th = min(alpha, b1.theta_max, b2.theta_max)
        total += float(ribbon_length(b1, b2, th))
    return total
