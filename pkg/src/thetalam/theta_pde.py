"""Minimal theta-graphs: discrete area energy, Newton solver and diagnostics.

A theta-graph over the half-disk V = {(r, z): r > 0, r^2 + z^2 < 1} is the
surface (r cos theta, r sin theta, z). Its area in the conformal metric
phi^2 |dx|^2 is the integral of phi^2 sqrt(1 + r^2 |grad theta|^2) dr dz.
The energy is discretized with piecewise linear theta on the half-disk mesh
and one-point (centroid) quadrature per triangle.
"""

from __future__ import annotations

import hashlib
import math
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _kernels as K
from .geom import AXIS, OUTER, DomainError, HalfDiskGrid, MetricProfile

log = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    """Newton iteration hit its cap before the residual tolerance."""

    def __init__(self, message, residual=float("nan"), n=None):
        super().__init__(message)
        self.residual = residual
        self.n = n


class IllConditionedBoundary(ValueError):
    """Boundary data that the grid cannot resolve."""


# ---------------------------------------------------------------------------
# boundary data


@dataclass
class BoundaryCurve:
    """Boundary theta-graph on the sphere: theta_bd(z) for z in [-1, 1]."""

    theta_bd: Callable[[np.ndarray], np.ndarray]
    class_G: bool = False
    label: str = "custom"

    def __call__(self, z):
        return np.asarray(self.theta_bd(np.asarray(z, dtype=float)), dtype=float)

    @classmethod
    def constant(cls, c: float = 0.0) -> "BoundaryCurve":
        return cls(lambda z: np.full(np.shape(z), float(c)), class_G=False, label=f"constant:{c!r}")

    @classmethod
    def helicoid(cls, alpha: float) -> "BoundaryCurve":
        if alpha == 0:
            raise DomainError("helicoid pitch parameter must be nonzero")
        return cls(lambda z: z / alpha, class_G=False, label=f"helicoid:{alpha!r}")

    @classmethod
    def from_samples(cls, z, theta, label="samples") -> "BoundaryCurve":
        z = np.asarray(z, dtype=float)
        theta = np.asarray(theta, dtype=float)
        order = np.argsort(z)
        z, theta = z[order], theta[order]
        if np.any(np.diff(z) <= 0):
            raise DomainError("boundary samples need distinct heights")
        sym = np.allclose(np.interp(-z, z, theta), theta, atol=1e-12)
        inc = np.all(np.diff(theta[z < 0]) > 0)
        return cls(lambda q: np.interp(q, z, theta), class_G=bool(sym and inc), label=label)

    def shifted(self, c: float) -> "BoundaryCurve":
        f = self.theta_bd
        return BoundaryCurve(lambda z: f(z) + c, self.class_G, f"{self.label}+{c!r}")

    def digest(self, m: int = 2049) -> str:
        """Hash of the curve sampled on a fixed height grid."""
        z = np.linspace(-1.0, 1.0, m)
        v = np.round(self(z), 12) + 0.0
        return hashlib.sha256(v.tobytes()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# discrete energy


class _Model:
    """Energy, gradient and Hessian of one (grid, metric) pair."""

    def __init__(self, grid: HalfDiskGrid, metric: MetricProfile):
        self.grid = grid
        self.metric = metric
        c = grid.centroid
        phi = metric.conformal_factor(c[:, 0], c[:, 1])
        self.w = np.ascontiguousarray(grid.area * phi * phi)
        self.q = np.ascontiguousarray(c[:, 0] ** 2)
        self.tri = np.ascontiguousarray(grid.triangles)
        self.gr = np.ascontiguousarray(grid.grad)
        n = grid.n_nodes
        self.n = n
        self.free = np.nonzero(grid.free)[0]
        fmap = -np.ones(n, dtype=np.int64)
        fmap[self.free] = np.arange(self.free.size)
        rows = self.tri[:, [0, 0, 0, 1, 1, 1, 2, 2, 2]].ravel()
        cols = self.tri[:, [0, 1, 2, 0, 1, 2, 0, 1, 2]].ravel()
        fr, fc = fmap[rows], fmap[cols]
        self.keep = np.nonzero((fr >= 0) & (fc >= 0))[0]
        nf = self.free.size
        key = fr[self.keep] * nf + fc[self.keep]
        ukey, self.inv = np.unique(key, return_inverse=True)
        self.indices = (ukey % nf).astype(np.int32)
        self.indptr = np.searchsorted(ukey // nf, np.arange(nf + 1)).astype(np.int32)
        self.nf = nf
        self.mass = K.scatter(self.tri, np.repeat(grid.area[:, None] / 3.0, 3, axis=1), n)

    def energy(self, theta):
        return float(np.sum(K.energy_terms(theta, self.tri, self.gr, self.w, self.q)))

    def gradient(self, theta):
        return K.scatter(self.tri, K.gradient_terms(theta, self.tri, self.gr, self.w, self.q), self.n)

    def hessian_free(self, theta):
        loc = K.hessian_terms(theta, self.tri, self.gr, self.w, self.q).ravel()
        data = np.bincount(self.inv, weights=loc[self.keep], minlength=len(self.indices))
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.nf, self.nf))

    def hessian_pd_free(self, theta, y):
        loc = K.hessian_pd_terms(theta, self.tri, self.gr, self.w, self.q, y).ravel()
        data = np.bincount(self.inv, weights=loc[self.keep], minlength=len(self.indices))
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.nf, self.nf))

    def _slopes(self, theta):
        p = np.einsum("tk,tkd->td", theta[self.tri], self.gr)
        return p, np.sqrt(1.0 + self.q * np.einsum("td,td->t", p, p))

    def dual(self, theta):
        """Dual field y = sqrt(q) grad(theta) / S consistent with theta."""
        p, S = self._slopes(theta)
        return np.ascontiguousarray((np.sqrt(self.q) / S)[:, None] * p)

    def dual_direction(self, theta, y, dtheta):
        p, S = self._slopes(theta)
        dp = np.einsum("tk,tkd->td", dtheta[self.tri], self.gr)
        rq = np.sqrt(self.q)
        pdp = np.einsum("td,td->t", p, dp)
        return (rq[:, None] * dp - (self.q * pdp / S)[:, None] * y) / S[:, None] - (y - (rq / S)[:, None] * p)


def _dual_step(y, dy, safety=0.99):
    """Largest step in (0, 1] keeping every |y + b dy| < 1, times safety."""
    yy = np.einsum("td,td->t", y, y)
    ydy = np.einsum("td,td->t", y, dy)
    dd = np.einsum("td,td->t", dy, dy)
    if np.all(yy + 2 * ydy + dd < 1.0):
        return 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        b = (-ydy + np.sqrt(ydy**2 + dd * (1.0 - yy))) / dd
    b = np.where(dd > 0, b, np.inf)
    return float(min(1.0, safety * np.min(b)))


def energy_model(grid: HalfDiskGrid, metric: MetricProfile) -> _Model:
    key = ("model", metric.kind)
    if key not in grid.cache:
        grid.cache[key] = _Model(grid, metric)
    return grid.cache[key]


@dataclass
class ThetaGraph:
    grid: HalfDiskGrid
    theta: np.ndarray
    metric: MetricProfile = field(default_factory=MetricProfile.euclidean)
    bc: Optional[BoundaryCurve] = None
    iterations: int = 0
    residual: float = float("nan")
    _energy: Optional[float] = field(default=None, repr=False)

    @property
    def energy(self) -> float:
        if self._energy is None:
            self._energy = area_energy(self)
        return self._energy

    def copy_with(self, theta) -> "ThetaGraph":
        return ThetaGraph(self.grid, np.asarray(theta, dtype=float).copy(), self.metric, self.bc)


def area_energy(g: ThetaGraph) -> float:
    """Discrete area of the theta-graph in the metric of g."""
    return energy_model(g.grid, g.metric).energy(np.ascontiguousarray(g.theta, dtype=float))


def energy_gradient(g: ThetaGraph) -> np.ndarray:
    """Exact derivative of area_energy with respect to every nodal value."""
    return energy_model(g.grid, g.metric).gradient(np.ascontiguousarray(g.theta, dtype=float))


def euler_lagrange_residual(g: ThetaGraph) -> np.ndarray:
    """Nodal residual of div(W r^2 grad theta), W = phi^2 / sqrt(1 + r^2 |grad theta|^2).

    Weak-form residual divided by the lumped nodal area; zero on OuterSphere
    nodes, where the Dirichlet data is imposed.
    """
    m = energy_model(g.grid, g.metric)
    res = -m.gradient(np.ascontiguousarray(g.theta, dtype=float)) / m.mass
    res[g.grid.outer] = 0.0
    return res


# ---------------------------------------------------------------------------
# solver


def boundary_values(bc: BoundaryCurve, grid: HalfDiskGrid) -> np.ndarray:
    """Dirichlet values on the arc nodes; heights are rescaled to the sphere."""
    z = grid.z[grid.outer] / grid.radius
    return bc(np.clip(z, -1.0, 1.0))


def _check_boundary(vals, grid, max_jump):
    if not np.all(np.isfinite(vals)):
        raise IllConditionedBoundary("boundary data is not finite")
    z = grid.z[grid.outer]
    jumps = np.abs(np.diff(vals[np.argsort(z)]))
    if jumps.size and jumps.max() > max_jump:
        raise IllConditionedBoundary(
            f"boundary data jumps by {jumps.max():.3g} between adjacent nodes (limit {max_jump:.3g})"
        )


def initial_guess(bc: BoundaryCurve, grid: HalfDiskGrid, kind: str = "boundary") -> np.ndarray:
    if kind == "zero":
        th = np.zeros(grid.n_nodes)
    elif kind == "boundary":
        th = bc(np.clip(grid.z / grid.radius, -1.0, 1.0))
    else:
        raise DomainError(f"unknown initialization {kind!r}")
    th[grid.outer] = boundary_values(bc, grid)
    return th


def solve_dirichlet(
    bc: BoundaryCurve,
    metric: MetricProfile,
    grid: HalfDiskGrid,
    init: Optional[ThetaGraph | np.ndarray | str] = None,
    tol: float = 1e-8,
    max_iters: int = 60,
    polish: bool = True,
    max_boundary_jump: float = np.pi,
    n_index: Optional[int] = None,
    method: str = "primal-dual",
) -> ThetaGraph:
    """Minimize the discrete area with Dirichlet data on the outer arc.

    The axis carries no condition: the r^2 weight makes it natural. Newton
    steps use a sparse direct solve and Armijo backtracking on the energy;
    if a Newton direction fails, a Jacobi-preconditioned gradient phase of
    up to 500 steps takes over. With method="primal-dual" the Newton matrix
    is built from a separately updated dual field y (|y| < 1) instead of
    sqrt(q) grad(theta) / S; the right-hand side is still the exact
    gradient, but far fewer damped steps are needed when theta is steep.
    Converged when the weak residual satisfies max |grad E| <= tol, i.e.
    the nodal residual is below tol / h^2.
    """
    if method not in ("primal-dual", "newton"):
        raise DomainError(f"unknown method {method!r}")
    pd = method == "primal-dual"
    m = energy_model(grid, metric)
    bvals = boundary_values(bc, grid)
    _check_boundary(bvals, grid, max_boundary_jump)
    if init is None or isinstance(init, str):
        theta = initial_guess(bc, grid, init or "boundary")
    else:
        theta = np.array(init.theta if isinstance(init, ThetaGraph) else init, dtype=float)
        if theta.shape != (grid.n_nodes,):
            raise DomainError("initial state does not match the grid")
    theta[grid.outer] = bvals
    theta = np.ascontiguousarray(theta)
    free = m.free

    E = m.energy(theta)
    g = m.gradient(theta)[free]
    res = float(np.max(np.abs(g))) if g.size else 0.0
    it = 0
    polished = False
    y = m.dual(theta) if pd else None
    while it < max_iters:
        if res <= tol and (polished or not polish or res < 1e-14):
            break
        it += 1
        d = None
        try:
            H = m.hessian_pd_free(theta, y) if pd else m.hessian_free(theta)
            d = -splu(H.tocsc(), permc_spec="MMD_AT_PLUS_A").solve(g)
            if not np.all(np.isfinite(d)) or g @ d >= 0:
                d = None
        except RuntimeError:
            d = None
        if d is None:
            theta, E, g = _gradient_phase(m, theta, E, g, steps=500)
            res = float(np.max(np.abs(g)))
            y = m.dual(theta) if pd else None
            continue
        if pd:
            full = np.zeros_like(theta)
            full[free] = d
            dy = m.dual_direction(theta, y, full)
        theta, E, g, ok = _line_search(m, theta, E, g, d)
        if pd:
            y = np.ascontiguousarray(y + _dual_step(y, dy) * dy)
        new_res = float(np.max(np.abs(g)))
        if res <= tol:
            polished = True
        if not ok:
            log.debug("line search stalled at residual %.3e", new_res)
            res = new_res
            if res <= tol:
                break
            theta, E, g = _gradient_phase(m, theta, E, g, steps=500)
            res = float(np.max(np.abs(g)))
            y = m.dual(theta) if pd else None
            continue
        res = new_res
        log.debug("newton %d: E=%.15g res=%.3e", it, E, res)
    if res > tol:
        raise NonConvergence(f"residual {res:.3e} above tolerance {tol:.1e} after {it} iterations", res, n_index)
    out = ThetaGraph(grid, theta, metric, bc, iterations=it, residual=res)
    out._energy = E
    return out


def _line_search(m, theta, E0, g, d):
    free = m.free
    slope = float(g @ d)
    g0 = float(np.max(np.abs(g)))
    step = 1.0
    trial = theta.copy()
    while step > 1e-12:
        trial[free] = theta[free] + step * d
        E1 = m.energy(trial)
        noise = 1e-14 * max(abs(E0), 1.0)
        if E1 <= E0 + 1e-4 * step * slope:
            return trial, E1, m.gradient(trial)[free], True
        if abs(E1 - E0) <= noise:
            g1 = m.gradient(trial)[free]
            if np.max(np.abs(g1)) < g0:
                return trial, E1, g1, True
        step *= 0.5
    return theta, E0, g, False


def _gradient_phase(m, theta, E, g, steps=500):
    H = m.hessian_free(theta)
    diag = np.maximum(H.diagonal(), 1e-300)
    for _ in range(steps):
        theta_new, E_new, g_new, ok = _line_search(m, theta, E, g, -g / diag)
        if not ok:
            break
        theta, E, g = theta_new, E_new, g_new
    return theta, E, g


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class Box:
    """Axis-aligned product [r0, r1] x [z0, z1] x [t0, t1] in the cover V x R."""

    r0: float
    r1: float
    z0: float
    z1: float
    t0: float
    t1: float

    def __post_init__(self):
        if not (self.r0 < self.r1 and self.z0 < self.z1 and self.t0 < self.t1):
            raise DomainError("box sides must have positive length")

    def boundary_area(self, metric: MetricProfile, m: int = 400) -> float:
        """Area of the six faces in the metric phi^2 (dr^2 + r^2 dtheta^2 + dz^2)."""
        f = metric.conformal_factor
        dt = self.t1 - self.t0
        zs = _midpoints(self.z0, self.z1, m)
        rs = _midpoints(self.r0, self.r1, m)
        dz, dr = (self.z1 - self.z0) / m, (self.r1 - self.r0) / m
        side = sum(r * np.sum(f(np.full(m, r), zs) ** 2) * dz for r in (self.r0, self.r1))
        caps = sum(np.sum(rs * f(rs, np.full(m, z)) ** 2) * dr for z in (self.z0, self.z1))
        R, Z = np.meshgrid(rs, zs, indexing="ij")
        flat = 2.0 * np.sum(f(R, Z) ** 2) * dr * dz
        return float(dt * (side + caps) + flat)


@dataclass
class HalfAreaReport:
    ratio: float
    passed: bool
    area_inside: float
    boundary_area: float
    approximate: bool = False


def _midpoints(a, b, m):
    return a + (np.arange(m) + 0.5) * (b - a) / m


def half_area_bound_check(g: ThetaGraph, box: Box, m: int = 400) -> HalfAreaReport:
    """Compare the area of the lifted graph inside box with half the box boundary area.

    The graph area uses m x m midpoint samples of the P1 solution. For the
    Poincare metric only boxes on which phi varies by at most 10% are
    accepted and the report is flagged approximate.
    """
    grid = g.grid
    rho = np.hypot([box.r0, box.r1, box.r1, box.r0], [box.z0, box.z0, box.z1, box.z1])
    if box.r0 <= 0.0 or rho.max() >= grid.radius - grid.h:
        raise DomainError("box must lie inside the interior of the half-disk")
    approximate = g.metric.is_hyperbolic
    if approximate:
        zn = 0.0 if box.z0 <= 0.0 <= box.z1 else min(abs(box.z0), abs(box.z1))
        phi_lo, phi_hi = g.metric.conformal_factor(np.array([box.r0, 0.0]), np.array([zn, rho.max()]))
        if phi_hi / phi_lo > 1.1:
            raise DomainError("Poincare boxes must be small enough that phi varies by at most 10%")
    rs = _midpoints(box.r0, box.r1, m)
    zs = _midpoints(box.z0, box.z1, m)
    R, Z = np.meshgrid(rs, zs, indexing="ij")
    interp = grid.interpolate(g.theta)
    th = np.asarray(interp(R, Z).filled(np.nan))
    gr, gz = (np.asarray(x.filled(np.nan)) for x in interp.gradient(R, Z))
    phi = g.metric.conformal_factor(R, Z)
    dens = phi**2 * np.sqrt(1.0 + R**2 * (gr**2 + gz**2))
    inside = (th >= box.t0) & (th <= box.t1)
    cell = (box.r1 - box.r0) * (box.z1 - box.z0) / m**2
    area = float(np.sum(dens[inside]) * cell)
    bd = box.boundary_area(g.metric, m)
    ratio = area / bd
    return HalfAreaReport(ratio, bool(ratio <= 0.5 + 10.0 * grid.h), area, bd, approximate)


def _lattice_field(g: ThetaGraph):
    grid = g.grid
    lat = grid.lattice
    vals = np.where(lat >= 0, g.theta[np.maximum(lat, 0)], np.nan)
    return vals


def second_fundamental_norm(g: ThetaGraph):
    """|A| of the theta-graph at lattice nodes with a full 3 x 3 stencil.

    Returns (r, z, |A|) for nodes with r > 0. Derivatives are centered
    differences; for a conformal metric phi^2 the principal curvatures
    become (kappa - d_nu log phi) / phi.
    """
    grid = g.grid
    N, h = grid.grid_n, grid.h
    T = _lattice_field(g)
    c = T[1:-1, 1:-1]
    ok = np.isfinite(T[:-2, :-2]) & np.isfinite(T[2:, 2:]) & np.isfinite(T[:-2, 2:]) & np.isfinite(T[2:, :-2])
    ok &= np.isfinite(T[:-2, 1:-1]) & np.isfinite(T[2:, 1:-1]) & np.isfinite(T[1:-1, :-2]) & np.isfinite(T[1:-1, 2:])
    ok &= np.isfinite(c)
    tr = (T[2:, 1:-1] - T[:-2, 1:-1]) / (2 * h)
    tz = (T[1:-1, 2:] - T[1:-1, :-2]) / (2 * h)
    trr = (T[2:, 1:-1] - 2 * c + T[:-2, 1:-1]) / h**2
    tzz = (T[1:-1, 2:] - 2 * c + T[1:-1, :-2]) / h**2
    trz = (T[2:, 2:] - T[2:, :-2] - T[:-2, 2:] + T[:-2, :-2]) / (4 * h * h)
    i = np.arange(1, N)[:, None]
    j = np.arange(-N + 1, N)[None, :]
    r = np.broadcast_to(i * h, c.shape)
    z = np.broadcast_to(j * h, c.shape)
    sel = ok
    r, z = r[sel], z[sel]
    tr, tz, trr, tzz, trz = tr[sel], tz[sel], trr[sel], tzz[sel], trz[sel]
    A = _curvatures(r, tr, tz, trr, trz, tzz)
    W = np.sqrt(1.0 + r * r * (tr * tr + tz * tz))
    if g.metric.is_hyperbolic:
        fr, fz = g.metric.log_factor_grad(r, z)
        dnu = r * (tr * fr + tz * fz) / W
        phi = g.metric.conformal_factor(r, z)
        k1, k2 = A
        norm = np.sqrt((k1 - dnu) ** 2 + (k2 - dnu) ** 2) / phi
    else:
        k1, k2 = A
        norm = np.sqrt(k1 * k1 + k2 * k2)
    return r, z, norm


def _curvatures(r, tr, tz, trr, trz, tzz):
    """Principal curvatures of (r cos theta, r sin theta, z) from derivatives of theta."""
    W = np.sqrt(1.0 + r * r * (tr * tr + tz * tz))
    L = -(r * r * tr**3 + 2 * tr + r * trr) / W
    M = -(r * r * tr * tr * tz + tz + r * trz) / W
    Nn = -(r * r * tr * tz * tz + r * tzz) / W
    E = 1.0 + r * r * tr * tr
    F = r * r * tr * tz
    G = 1.0 + r * r * tz * tz
    det = E * G - F * F
    # shape operator I^{-1} II
    s11 = (G * L - F * M) / det
    s12 = (G * M - F * Nn) / det
    s21 = (E * M - F * L) / det
    s22 = (E * Nn - F * M) / det
    half_tr = 0.5 * (s11 + s22)
    disc = np.sqrt(np.maximum(half_tr**2 - (s11 * s22 - s12 * s21), 0.0))
    return half_tr + disc, half_tr - disc


@dataclass(frozen=True)
class Region:
    """Rotationally symmetric region {r < r_max, z_min < z < z_max} inside the ball."""

    r_max: float
    z_min: float
    z_max: float

    def distance_to_complement(self, r, z):
        return np.minimum(np.minimum(self.r_max - r, z - self.z_min), self.z_max - z)


@dataclass
class CurvatureReport:
    sup: float
    at: tuple
    r: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    norm: np.ndarray = field(repr=False)


def curvature_diagnostic(g: ThetaGraph, subdomain: Region) -> CurvatureReport:
    """sup of |A|(p) dist(p, complement of subdomain) over lattice nodes in subdomain."""
    r, z, A = second_fundamental_norm(g)
    d = subdomain.distance_to_complement(r, z)
    inside = d > 0
    if not np.any(inside):
        return CurvatureReport(0.0, (math.nan, math.nan), r[inside], z[inside], A[inside])
    prod = A[inside] * d[inside]
    k = int(np.argmax(prod))
    return CurvatureReport(float(prod[k]), (float(r[inside][k]), float(z[inside][k])), r[inside], z[inside], A[inside])
