"""Boundary sequences accumulating on c(T) and lamination diagnostics.

Boundary data are even functions of z written through u = z^2:

    theta_n(z) = -(beta u + w sum_k G_k(u)) / 2,
    G_k(u) = int_0^u du' / (d_k(u')^2 + eps_k^2),

with d_k the distance from u' to [a_k^2, b_k^2] and eps_k = 2 a_k / n.
Then d theta / dz = -z (beta + w sum_k 1 / (d_k^2 + eps_k^2)), which is
positive for z < 0, of order n^2 within 1/n of each height in T and bounded
elsewhere. Across a point a of T the data drop by about w pi n / (4 a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geom import OUTER, DomainError, HalfDiskGrid, MetricProfile
from .theta_pde import BoundaryCurve

DEFAULT_BETA = 1.0
DEFAULT_WEIGHT = 0.5


@dataclass(frozen=True)
class TargetSet:
    """Finite union of closed intervals and points in (0, 1)."""

    components: tuple = ()

    def __post_init__(self):
        comps = []
        for c in self.components:
            lo, hi = (float(c), float(c)) if np.ndim(c) == 0 else (float(c[0]), float(c[1]))
            if not (0.0 < lo <= hi < 1.0):
                raise DomainError(f"component {c!r} not inside (0, 1)")
            comps.append((lo, hi))
        comps.sort()
        for (l1, h1), (l2, h2) in zip(comps, comps[1:]):
            if l2 <= h1:
                raise DomainError("target components overlap")
        object.__setattr__(self, "components", tuple(comps))

    @classmethod
    def parse(cls, text: str) -> "TargetSet":
        """'0.3' or '0.3,0.7' or '[0.2:0.3],0.8'; empty string or 'empty' is the empty set."""
        text = text.strip()
        if text in ("", "empty", "{}", "[]"):
            return cls(())
        comps = []
        for part in _split_top(text):
            part = part.strip()
            if part.startswith("["):
                lo, hi = part.strip("[]").split(":")
                comps.append((float(lo), float(hi)))
            else:
                comps.append(float(part))
        return cls(tuple(comps))

    @classmethod
    def cantor(cls, lo: float, hi: float, stages: int) -> "TargetSet":
        """Finite stage of the middle-thirds construction on [lo, hi]."""
        ivs = [(lo, hi)]
        for _ in range(stages):
            nxt = []
            for a, b in ivs:
                d = (b - a) / 3.0
                nxt += [(a, a + d), (b - d, b)]
            ivs = nxt
        return cls(tuple(ivs))

    @property
    def is_empty(self) -> bool:
        return not self.components

    @property
    def points(self) -> list:
        return [lo for lo, hi in self.components if lo == hi]

    def heights(self) -> np.ndarray:
        """Representative heights (points and interval endpoints)."""
        return np.unique(np.array([x for c in self.components for x in c], dtype=float))

    def describe(self) -> str:
        return ",".join(f"{lo:g}" if lo == hi else f"[{lo:g}:{hi:g}]" for lo, hi in self.components) or "empty"


def _split_top(text):
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return [p for p in out if p.strip()]


def _band_integral(u, A, B, eps):
    """int_0^u du' / (dist(u', [A, B])^2 + eps^2), vectorized in u >= 0."""
    u = np.asarray(u, dtype=float)
    below = (np.arctan(A / eps) - np.arctan((A - np.minimum(u, A)) / eps)) / eps
    inside = np.clip(u - A, 0.0, B - A) / eps**2
    above = np.arctan(np.maximum(u - B, 0.0) / eps) / eps
    return below + inside + above


def _band_density(u, A, B, eps):
    d = np.maximum(np.maximum(A - u, u - B), 0.0)
    return 1.0 / (d * d + eps * eps)


def make_boundary_sequence(T: TargetSet, n: int, beta: float = DEFAULT_BETA, weight: float = DEFAULT_WEIGHT) -> BoundaryCurve:
    """Class-G boundary data for index n whose windings concentrate at heights +-T."""
    if n < 1:
        raise DomainError("sequence index must be >= 1")
    bands = [(lo * lo, hi * hi, 2.0 * lo / n) for lo, hi in T.components]

    def theta(z):
        u = np.asarray(z, dtype=float) ** 2
        acc = beta * u
        for A, B, eps in bands:
            acc = acc + weight * _band_integral(u, A, B, eps)
        return -0.5 * acc

    curve = BoundaryCurve(theta, class_G=True, label=f"lam:{T.describe()}:n={n}:beta={beta!r}:w={weight!r}")
    curve.slope = lambda z: _slope(np.asarray(z, dtype=float), bands, beta, weight)
    return curve


def _slope(z, bands, beta, weight):
    u = z * z
    dens = beta + sum(weight * _band_density(u, A, B, eps) for A, B, eps in bands)
    return -z * dens


# ---------------------------------------------------------------------------
# leaf detection


@dataclass
class Leaf:
    """Profile (r, z) of one detected rotational leaf, ordered along the curve."""

    kind: str  # "disk", "annulus", "closed" or "arc"
    profile: np.ndarray = field(repr=False)
    level: float = math.nan
    s_min: float = math.nan
    size: int = 0
    cut: np.ndarray = field(default=None, repr=False)

    @property
    def center(self) -> float:
        """Height where a disk meets the axis (nan for other kinds)."""
        if self.kind != "disk":
            return math.nan
        return float(self.profile[0, 1])

    @property
    def height(self) -> float:
        return float(np.mean(self.profile[:, 1]))


def transversality(g) -> np.ndarray:
    """s = (1 + r^2 |grad theta|^2)^(-1/2) on every triangle (centroid value)."""
    grid = g.grid
    G = np.einsum("tk,tkd->td", g.theta[grid.triangles], grid.grad)
    return 1.0 / np.sqrt(1.0 + grid.centroid[:, 0] ** 2 * np.einsum("td,td->t", G, G))


def _triangle_adjacency(grid):
    key = "tri_adjacency"
    if key not in grid.cache:
        from scipy.sparse import coo_matrix

        tri = grid.triangles
        nt = len(tri)
        e = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
        owner = np.tile(np.arange(nt), 3)
        code = e[:, 0] * grid.n_nodes + e[:, 1]
        order = np.argsort(code, kind="stable")
        cs, os_ = code[order], owner[order]
        same = np.nonzero(cs[1:] == cs[:-1])[0]
        a, b = os_[same], os_[same + 1]
        grid.cache[key] = coo_matrix((np.ones(len(a)), (a, b)), shape=(nt, nt)).tocsr()
    return grid.cache[key]


TAU_FLOOR = 0.01


def _components(grid, tris, min_size):
    from scipy.sparse.csgraph import connected_components

    if tris.size == 0:
        return []
    adj = _triangle_adjacency(grid)[tris][:, tris]
    k, lab = connected_components(adj, directed=False)
    comps = [tris[lab == i] for i in range(k)]
    return [c for c in comps if c.size >= min_size]


def _split(grid, s, comp, t, min_size):
    """Split a band component into leaf cores by lowering the threshold."""
    if t / 2 < TAU_FLOOR:
        return [comp]
    subs = _components(grid, comp[s[comp] < t / 2], min_size)
    if len(subs) >= 2:
        return [c for sub in subs for c in _split(grid, s, sub, t / 2, min_size)]
    if len(subs) == 1:
        deeper = _split(grid, s, subs[0], t / 2, min_size)
        if len(deeper) >= 2:
            return deeper
    return [comp]


def _band_components(g, s, tau, min_size):
    grid = g.grid
    comps = []
    for c in _components(grid, np.nonzero(s < tau)[0], min_size):
        comps += _split(grid, s, c, tau, min_size)
    comps.sort(key=lambda c: (float(np.min(grid.centroid[c, 1])), float(np.min(grid.centroid[c, 0]))))
    return comps


def _weighted_median(x, w):
    order = np.argsort(x)
    cw = np.cumsum(w[order])
    return float(x[order][np.searchsorted(cw, 0.5 * cw[-1])])


def level_curves(grid, values, level):
    """Marching triangles for a P1 field: list of (points (m, 2), triangle ids, closed)."""
    tri = grid.triangles
    up = values[tri] >= level
    cnt = up.sum(axis=1)
    cross = np.nonzero((cnt == 1) | (cnt == 2))[0]
    n = grid.n_nodes
    seg_edges = []
    for t in cross:
        a, b, c = tri[t]
        ua, ub, uc = up[t]
        es = [(p, q) for p, q, x, y in ((a, b, ua, ub), (b, c, ub, uc), (c, a, uc, ua)) if x != y]
        seg_edges.append(tuple(min(p, q) * n + max(p, q) for p, q in es))
    nbr = {}
    for k, (e1, e2) in enumerate(seg_edges):
        nbr.setdefault(e1, []).append(k)
        nbr.setdefault(e2, []).append(k)
    used = np.zeros(len(seg_edges), dtype=bool)

    def walk(k, e_from):
        chain, edges = [], [e_from]
        while True:
            used[k] = True
            chain.append(k)
            e1, e2 = seg_edges[k]
            e_next = e2 if e1 == e_from else e1
            edges.append(e_next)
            nxt = [j for j in nbr[e_next] if not used[j]]
            if not nxt:
                return chain, edges
            k, e_from = nxt[0], e_next

    curves = []
    # open curves start at edges with a single segment, in a fixed order
    starts = sorted(e for e, ks in nbr.items() if len(ks) == 1)
    for e in starts:
        k = nbr[e][0]
        if not used[k]:
            curves.append(walk(k, e) + (False,))
    for k in range(len(seg_edges)):
        if not used[k]:
            chain, edges = walk(k, seg_edges[k][0])
            curves.append((chain, edges, True))
    out = []
    nodes = grid.nodes
    for chain, edges, closed in curves:
        p = np.array(edges) // n
        q = np.array(edges) % n
        vp, vq = values[p], values[q]
        lam = (level - vp) / (vq - vp)
        pts = nodes[p] + lam[:, None] * (nodes[q] - nodes[p])
        out.append((pts, cross[np.array(chain)], closed))
    return out


def _crossed_edges(grid, values, level, tris):
    """Mesh edges (p, q) of the listed triangles that the level curve crosses."""
    tri = grid.triangles[tris]
    up = values[tri] >= level
    e = []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        m = up[:, a] != up[:, b]
        e.append(np.sort(tri[m][:, [a, b]], axis=1))
    return np.unique(np.concatenate(e), axis=0)


def detect_rotational_leaves(g, tau: float = 0.1, min_size: Optional[int] = None) -> list:
    """Rotational leaves of a lamination-regime solution.

    Triangles with s < tau are grouped into edge-connected components. The
    ridge of each component is traced as the level curve of theta at the
    median theta of the component (weighted by the jump density r |grad theta|),
    followed through the whole mesh so that disks reach the axis even where
    r |grad theta| is too small to register in the band.
    """
    grid = g.grid
    s = transversality(g)
    if min_size is None:
        min_size = max(8, grid.grid_n // 4)
    comps = _band_components(g, s, tau, min_size)
    cen = grid.centroid
    tc = g.theta[grid.triangles].mean(axis=1)
    leaves = []
    seen = set()
    for comp in comps:
        w = grid.area[comp] * np.sqrt(np.maximum(1.0 / s[comp] ** 2 - 1.0, 0.0))
        level = _weighted_median(tc[comp], w)
        in_comp = np.zeros(len(grid.triangles), dtype=bool)
        in_comp[comp] = True
        best = None
        for pts, tris, closed in level_curves(grid, g.theta, level):
            hit = int(np.count_nonzero(in_comp[tris]))
            if hit and (best is None or hit > best[0]):
                best = (hit, pts, closed, tris)
        if best is None:
            continue
        _, pts, closed, tris = best
        key = (round(level, 9), round(float(pts[:, 1].mean()), 6))
        if key in seen:
            continue
        seen.add(key)
        leaf = _classify(pts, closed, grid, level, float(s[comp].min()), comp.size)
        leaf.cut = _crossed_edges(grid, g.theta, level, tris)
        leaves.append(leaf)
    return leaves


def _classify(pts, closed, grid, level, s_min, size):
    tol = 0.5 * grid.h
    rho = np.hypot(pts[:, 0], pts[:, 1])
    if closed:
        return Leaf("closed", pts, level, s_min, size)
    on_axis = pts[[0, -1], 0] <= tol
    on_outer = rho[[0, -1]] >= grid.radius - tol
    if on_axis[1] and not on_axis[0]:
        pts = pts[::-1]
        on_axis, on_outer = on_axis[::-1], on_outer[::-1]
    if on_axis[0] and on_outer[1]:
        kind = "disk"
    elif on_outer.all() and pts[0, 1] * pts[-1, 1] < 0:
        kind = "annulus"
        if pts[0, 1] > pts[-1, 1]:
            pts = pts[::-1]
    else:
        kind = "arc"
    return Leaf(kind, pts, level, s_min, size)


def hausdorff(p: np.ndarray, q: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two densely sampled polylines."""
    from scipy.spatial import cKDTree

    p, q = _densify(p), _densify(q)
    d1 = cKDTree(q).query(p)[0].max()
    d2 = cKDTree(p).query(q)[0].max()
    return float(max(d1, d2))


def _densify(p, step=1e-3):
    p = np.asarray(p, dtype=float)
    out = [p[:1]]
    for a, b in zip(p[:-1], p[1:]):
        k = max(1, int(math.ceil(np.hypot(*(b - a)) / step)))
        out.append(a + (b - a) * (np.arange(1, k + 1) / k)[:, None])
    return np.concatenate(out)


# ---------------------------------------------------------------------------
# sequences


class DiagnosticInapplicable(ValueError):
    """The requested diagnostic needs structure that was not detected."""


@dataclass
class LaminationEstimate:
    target: TargetSet
    metric: MetricProfile
    n_list: list
    rotational_leaves: list
    blowup_K: list
    nonlimit_leaf_samples: dict = field(repr=False)
    winding_diagnostic: dict
    s_min_near_targets: list
    tau: float
    solutions: list = field(default_factory=list, repr=False)

    @property
    def grid(self) -> HalfDiskGrid:
        return self.solutions[-1].grid

    @property
    def final(self):
        return self.solutions[-1]


def run_sequence(
    T: TargetSet,
    metric: MetricProfile,
    n_list: Sequence[int],
    grid: HalfDiskGrid,
    tau: float = 0.1,
    beta: float = DEFAULT_BETA,
    weight: float = DEFAULT_WEIGHT,
    tol: float = 1e-8,
    max_iters: int = 300,
    callback=None,
) -> LaminationEstimate:
    """Solve along gamma_n for n in n_list, each warm-started from the last.

    NonConvergence from any solve propagates with its index n attached.
    """
    from .theta_pde import NonConvergence, solve_dirichlet

    n_list = [int(n) for n in n_list]
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DomainError("n_list must be nonempty and increasing")
    sols, prev = [], None
    for n in n_list:
        bc = make_boundary_sequence(T, n, beta, weight)
        try:
            prev = solve_dirichlet(bc, metric, grid, init=prev, tol=tol, max_iters=max_iters, n_index=n)
        except NonConvergence as exc:
            exc.n = n
            raise
        sols.append(prev)
        if callback is not None:
            callback(n, prev)
    return estimate_from_solutions(T, metric, n_list, sols, tau)


def estimate_from_solutions(T, metric, n_list, sols, tau=0.1) -> LaminationEstimate:
    final = sols[-1]
    leaves = detect_rotational_leaves(final, tau)
    K = blowup_K(sols)
    labels = partition_regions(final.grid, leaves)
    samples, winding = {}, {}
    interior = final.grid.tags != OUTER
    for lab in np.unique(labels):
        m = (labels == lab) & interior
        name = region_name(final.grid, labels, int(lab))
        samples[name] = np.column_stack([final.grid.r[m], final.grid.z[m], final.theta[m]])
        winding[name] = [_variation(g, m) for g in sols]
    smin = [s_min_near(g, T) for g in sols]
    return LaminationEstimate(T, metric, list(n_list), leaves, K, samples, winding, smin, tau, list(sols))


def _variation(g, mask):
    if not np.any(mask):
        return 0.0
    v = g.theta[mask]
    return float(v.max() - v.min())


def node_transversality(g) -> np.ndarray:
    """Smallest s over the triangles around each node."""
    s = transversality(g)
    out = np.ones(g.grid.n_nodes)
    np.minimum.at(out, g.grid.triangles.ravel(), np.repeat(s, 3))
    return out


def s_min_near(g, T: TargetSet, width: Optional[float] = None) -> float:
    """min of s over triangles within `width` of the heights +-T (nan if T is empty)."""
    if T.is_empty:
        return math.nan
    grid = g.grid
    width = 4 * grid.h if width is None else width
    z = np.abs(grid.centroid[:, 1]) / grid.radius
    near = np.zeros(len(z), dtype=bool)
    for lo, hi in T.components:
        near |= (z > lo - width) & (z < hi + width)
    return float(transversality(g)[near].min())


def partition_regions(grid: HalfDiskGrid, leaves: list) -> np.ndarray:
    """Label nodes by the complementary region of the leaf curves they lie in."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    key = "edges"
    if key not in grid.cache:
        t = grid.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        grid.cache[key] = np.unique(e, axis=0)
    edges = grid.cache[key]
    n = grid.n_nodes
    code = edges[:, 0] * n + edges[:, 1]
    cut = [lf.cut for lf in leaves if lf.cut is not None and len(lf.cut)]
    if cut:
        c = np.concatenate(cut)
        edges = edges[~np.isin(code, c[:, 0] * n + c[:, 1])]
    adj = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    _, lab = connected_components(adj, directed=False)
    # relabel in order of first appearance along a fixed node order for determinism
    _, first = np.unique(lab, return_index=True)
    rank = np.argsort(np.argsort(first))
    return rank[lab]


def region_name(grid, labels, lab) -> str:
    m = labels == lab
    touches_axis = bool(np.any(m & (grid.r <= 0.5 * grid.h)))
    zc = float(np.mean(grid.z[m]))
    where = "axis" if touches_axis else "off-axis"
    return f"region{lab}:{where}:zmean={zc:+.3f}"


def blowup_K(sols: list, growth: float = 2.0, contrast: float = 3.0) -> list:
    """Axis heights where |A| next to the axis blows up along the sequence.

    Uses the lattice column r = h. A height is kept when the final |A| is
    at least `growth` times the previous one there and `contrast` times
    the median over the column; nearby candidates are merged to their peak.
    """
    if len(sols) < 2:
        return []
    profs = []
    for g in sols[-2:]:
        r, z, A = _axis_column(g)
        profs.append((z, A))
    (z0, A0), (z1, A1) = profs
    prev = np.interp(z1, z0, A0)
    cand = np.nonzero((A1 >= growth * prev) & (A1 >= contrast * np.median(A1)))[0]
    if cand.size == 0:
        return []
    h = sols[-1].grid.h
    clusters, cur = [], [cand[0]]
    for i in cand[1:]:
        if z1[i] - z1[cur[-1]] <= 4 * h:
            cur.append(i)
        else:
            clusters.append(cur)
            cur = [i]
    clusters.append(cur)
    return [float(z1[c][np.argmax(A1[c])]) for c in clusters]


def _axis_column(g):
    from .theta_pde import second_fundamental_norm

    r, z, A = second_fundamental_norm(g)
    m = np.abs(r - g.grid.h) < 1e-9 * g.grid.radius
    order = np.argsort(z[m])
    return r[m][order], z[m][order], A[m][order]


@dataclass
class NonproperReport:
    n_list: list
    variation: dict
    ratios: dict
    passed: bool
    adjacent: list


def nonproper_diagnostic(est: LaminationEstimate, growth: float = 1.5) -> NonproperReport:
    """Winding growth of theta on the regions adjacent to a detected annulus.

    Passes when, on the region containing the axis next to the annulus, the
    theta variation increases along the sequence by at least `growth` per
    doubling of n.
    """
    cats = [lf for lf in est.rotational_leaves if lf.kind == "annulus"]
    if not cats:
        raise DiagnosticInapplicable("no annulus-type leaf detected")
    grid = est.grid
    labels = partition_regions(grid, est.rotational_leaves)
    adj = set()
    for lf in cats:
        adj |= set(np.unique(labels[lf.cut.ravel()]).tolist())
    names = [region_name(grid, labels, lab) for lab in sorted(adj)]
    var = {k: est.winding_diagnostic[k] for k in names}
    ratios = {}
    ns = np.asarray(est.n_list, dtype=float)
    for k, v in var.items():
        v = np.asarray(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            per_doubling = (v[1:] / v[:-1]) ** (1.0 / np.log2(ns[1:] / ns[:-1]))
        ratios[k] = per_doubling.tolist()
    axis_side = [k for k in names if ":axis:" in k]
    ok = bool(axis_side) and all(
        np.all(np.diff(var[k]) > 0) and min(ratios[k]) >= growth for k in axis_side
    )
    return NonproperReport(list(est.n_list), var, ratios, ok, names)


def winding_bound(est: LaminationEstimate) -> list:
    """theta variation over all interior nodes for each n (control runs)."""
    m = est.grid.tags != OUTER
    return [_variation(g, m) for g in est.solutions]


# ---------------------------------------------------------------------------
# leaf checks


def _fit(leaf, h, spacing, m=3000):
    """Cubic spline through bin averages of the profile at a fixed arclength spacing."""
    from scipy.interpolate import CubicSpline

    P = _densify(leaf.profile, step=h / 8)
    s = np.r_[0.0, np.cumsum(np.hypot(*np.diff(P, axis=0).T))]
    nb = max(4, int(s[-1] / spacing))
    idx = np.minimum((s / s[-1] * nb).astype(int), nb - 1)
    Q = np.vstack([P[:1], [P[idx == k].mean(axis=0) for k in range(nb)], P[-1:]])
    sq = np.r_[0.0, np.cumsum(np.hypot(*np.diff(Q, axis=0).T))]
    cr, cz = CubicSpline(sq, Q[:, 0]), CubicSpline(sq, Q[:, 1])
    u = np.linspace(0.0, sq[-1], m)
    return u / sq[-1], (cr(u), cz(u)), (cr(u, 1), cz(u, 1)), (cr(u, 2), cz(u, 2))


@dataclass
class Stationarity:
    mean_residual: float
    scale: float
    normalized: float


def leaf_stationarity(
    leaf: Leaf, metric: MetricProfile, h: float, trim: float = 0.1, rho_max: Optional[float] = None, spacing: float = 8.0
) -> Stationarity:
    """Arclength mean of |kappa - d_n log(r phi^2)| along a leaf profile.

    The profile is averaged over arclength bins of `spacing` * h and
    interpolated by a cubic spline, which suppresses the kinks of the
    piecewise-linear level curve.
    The end portions (a fraction `trim` of the parameter at each end) and
    points with r^2 + z^2 > rho_max^2 are dropped (default 0.9 for the
    Poincare metric, where the exhaustion boundary distorts the leaf, and
    no cut for the Euclidean one). `normalized` divides by
    max(1, mean |d_n log(r phi^2)|), so the Poincare factor, whose
    log-gradient is large near the sphere, does not inflate the number.
    """
    if rho_max is None:
        rho_max = 0.9 if metric.is_hyperbolic else math.inf
    u, (x, y), (x1, y1), (x2, y2) = _fit(leaf, h, spacing * h)
    v = np.hypot(x1, y1)
    kappa = (x1 * y2 - y1 * x2) / v**3
    nx, ny = -y1 / v, x1 / v
    gr, gz = metric.log_factor_grad(x, y)
    with np.errstate(divide="ignore"):
        dn = nx * (1.0 / x + 2.0 * gr) + ny * (2.0 * gz)
    m = (u > trim) & (u < 1.0 - trim) & (np.hypot(x, y) <= rho_max)
    if not np.any(m):
        raise DiagnosticInapplicable("no profile points inside the evaluation window")
    w = v[m] / np.sum(v[m])
    mean = float(np.sum(w * np.abs(kappa[m] - dn[m])))
    scale = float(max(1.0, np.sum(w * np.abs(dn[m]))))
    return Stationarity(mean, scale, mean / scale)


def axis_slope(leaf: Leaf, r_max: float = 0.1) -> float:
    """dz/dr of a disk-type profile from a line fit over r <= r_max."""
    if leaf.kind != "disk":
        raise DiagnosticInapplicable("axis slope only applies to disk-type leaves")
    P = leaf.profile
    m = P[:, 0] <= r_max
    if np.count_nonzero(m) < 3:
        m = np.arange(len(P)) < 3
    return float(np.polyfit(P[m, 0], P[m, 1], 1)[0])


# ---------------------------------------------------------------------------
# comparison with the rotational minimizers


def reference_profiles(surface, radius: float = 1.0) -> list:
    """Connected (r, z) pieces of a rotational surface, cut to r^2 + z^2 <= radius^2.

    A disk pair gives two pieces (a Euclidean pair stores only the upper
    disk); an annulus gives one.
    """
    if surface.branches and not surface.is_annulus:
        from .geom import strip_to_ball

        pieces = [np.column_stack(strip_to_ball(b.theta, b.t)) for b in surface.branches]
    elif surface.is_annulus:
        pieces = [surface.ball_profile()]
    else:
        P = surface.profile
        pieces = [P, P * np.array([1.0, -1.0])]
    out = []
    for P in pieces:
        keep = np.hypot(P[:, 0], P[:, 1]) <= radius + 1e-12
        if np.count_nonzero(keep) >= 2:
            out.append(P[keep])
    return out


@dataclass
class MinimizerMatch:
    a: float
    verdict: str
    surface: str
    piece: int
    leaf: int  # index into the detected leaves, -1 when none were detected
    leaf_kind: str
    distance: float


def match_minimizers(est: LaminationEstimate, heights=None) -> list:
    """Pair every piece of every minimizer in M(a), a in T, with its nearest detected leaf."""
    from .rotmin import classify_Ma

    heights = est.target.heights() if heights is None else heights
    radius = est.grid.radius
    leaves = est.rotational_leaves
    out = []
    for a in heights:
        cls = classify_Ma(float(a), est.metric)
        for surf in cls.minimizers:
            for j, P in enumerate(reference_profiles(surf, radius)):
                d = [hausdorff(lf.profile, P) for lf in leaves]
                k = int(np.argmin(d)) if d else -1
                out.append(MinimizerMatch(float(a), cls.verdict, surf.kind, j, k,
                                          leaves[k].kind if k >= 0 else "", d[k] if d else math.inf))
    return out
