"""Metric profiles, the (theta, t) strip chart and the half-disk mesh.

Two charts are used throughout. Ball-model rotational geometry lives in the
(r, z) half-disk; hyperbolic rotational surfaces live in the strip
(theta, t) obtained from the upper half-space by polar coordinates about
the vertical axis. The two are related only through the upper half-space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay

INTERIOR = 0
AXIS = 1
OUTER = 2
TAG_NAMES = {INTERIOR: "Interior", AXIS: "Axis", OUTER: "OuterSphere"}

ALPHA0 = float(np.arctan(np.sqrt(2.0)))


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


# ---------------------------------------------------------------------------
# metric profiles


@dataclass(frozen=True)
class MetricProfile:
    """Rotationally invariant conformal metric phi(r, z)^2 (dr^2 + dz^2 + r^2 dphi^2)."""

    kind: str = "euclidean"

    def __post_init__(self):
        if self.kind not in ("euclidean", "poincare"):
            raise DomainError(f"unknown metric kind {self.kind!r}")

    @classmethod
    def euclidean(cls) -> "MetricProfile":
        return cls("euclidean")

    @classmethod
    def poincare(cls) -> "MetricProfile":
        return cls("poincare")

    @property
    def is_hyperbolic(self) -> bool:
        return self.kind == "poincare"

    def conformal_factor(self, r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.kind == "euclidean":
            return np.ones(np.broadcast(r, z).shape)
        return 2.0 / (1.0 - r * r - z * z)

    def log_factor_grad(self, r, z):
        """Gradient of log(phi) with respect to (r, z)."""
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.kind == "euclidean":
            zero = np.zeros(np.broadcast(r, z).shape)
            return zero, zero.copy()
        d = 1.0 - r * r - z * z
        return 2.0 * r / d, 2.0 * z / d


# ---------------------------------------------------------------------------
# strip chart


@dataclass(frozen=True)
class StripPoint:
    theta: float
    t: float

    def __post_init__(self):
        if not (0.0 < self.theta <= np.pi / 2):
            raise DomainError(f"theta={self.theta} outside (0, pi/2]")


def _check_angle(theta, upper_open=False, name="theta"):
    a = np.asarray(theta, dtype=float)
    hi_ok = a < np.pi / 2 if upper_open else a <= np.pi / 2 + 1e-15
    if not np.all((a > 0.0) & hi_ok):
        raise DomainError(f"{name} outside (0, pi/2{')' if upper_open else ']'}")
    return a


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def cone_distance(alpha):
    """Hyperbolic distance from the axis to the cone of angle alpha."""
    a = _check_angle(alpha, name="alpha")
    return _out(np.abs(np.log(np.tan(a / 2.0))))


def cone_angle(s):
    """Inverse of cone_distance on s >= 0."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("cone distance must be nonnegative")
    return _out(2.0 * np.arctan(np.exp(-s)))


def strip_coords(x: float, y: float, z: float) -> StripPoint:
    """Upper half-space point (x, y, z), z > 0, to strip coordinates."""
    if not z > 0:
        raise DomainError("upper half-space point needs z > 0")
    R = float(np.sqrt(x * x + y * y + z * z))
    return StripPoint(float(np.arcsin(min(z / R, 1.0))), float(np.log(R)))


def lambda_weight(theta):
    """Strip metric weight 2 pi cos(theta) / sin(theta)^2."""
    a = _check_angle(theta)
    return _out(2.0 * np.pi * np.cos(a) / np.sin(a) ** 2)


def dlog_lambda(theta):
    """d/dtheta of log(lambda) = -tan(theta) - 2 cot(theta)."""
    a = np.asarray(theta, dtype=float)
    return _out(-np.tan(a) - 2.0 / np.tan(a))


def strip_curvature(theta):
    """Gauss curvature of the strip metric, tan^2 (tan^2 - 2) / (4 pi^2)."""
    a = _check_angle(theta, upper_open=True)
    t2 = np.tan(a) ** 2
    return _out(t2 * (t2 - 2.0) / (4.0 * np.pi**2))


def ball_to_uhs(r, z):
    """Poincare ball (r, z) to upper half-space (horizontal radius, height).

    Reflection composed with inversion in the sphere about the north pole;
    the origin goes to height 1 and the circle of the sphere at height z
    goes to the ideal circle of radius sqrt((1+z)/(1-z)).
    """
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    d = r * r + (1.0 - z) ** 2
    return 2.0 * r / d, (1.0 - r * r - z * z) / d


def uhs_to_ball(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x * x + (y + 1.0) ** 2
    return 2.0 * x / d, 1.0 - 2.0 * (y + 1.0) / d


def ball_to_strip(r, z):
    x, y = ball_to_uhs(r, z)
    R = np.hypot(x, y)
    return np.arcsin(np.clip(y / R, -1.0, 1.0)), np.log(R)


def strip_to_ball(theta, t):
    R = np.exp(np.asarray(t, dtype=float))
    th = np.asarray(theta, dtype=float)
    return uhs_to_ball(R * np.cos(th), R * np.sin(th))


def sphere_height_to_t(a):
    """t of the ideal circle that is the sphere circle at height a."""
    return _out(np.arctanh(np.asarray(a, dtype=float)))


# ---------------------------------------------------------------------------
# half-disk mesh


def _union_jack(i, j, lat):
    """Two triangles per lattice square (i, j); the diagonal alternates with parity."""
    a, b = lat[i, j], lat[i + 1, j]
    c, d = lat[i + 1, j + 1], lat[i, j + 1]
    even = ((i + j) % 2 == 0)[:, None]
    t1 = np.where(even, np.column_stack([a, b, c]), np.column_stack([a, b, d]))
    t2 = np.where(even, np.column_stack([a, c, d]), np.column_stack([b, c, d]))
    return np.vstack([t1, t2])


def _arc_nodes(R, h):
    """Quarter-arc nodes above lattice columns (upper half) and beside lattice rows.

    Projecting lattice lines onto the arc keeps the gap layer near the poles
    and the equator geometrically similar under refinement.
    """
    s = R / np.sqrt(2.0)
    k = np.arange(int(np.ceil((s - 0.3 * h) / h)))
    k = k[k * h < s - 0.3 * h]
    c = k * h
    far = np.sqrt(R * R - c * c)
    top = np.column_stack([c, far])
    side = np.column_stack([far, c])
    arc = np.vstack([side, [[s, s]], top[::-1]])
    arc[0] = (R, 0.0)
    arc[-1] = (0.0, R)
    return arc


@dataclass
class HalfDiskGrid:
    """Triangulated half-disk {r >= 0, r^2 + z^2 <= R^2} with spacing h = 1/grid_n.

    Interior nodes are the lattice points (i h, j h) strictly inside the
    circle of radius R - h/2. Boundary nodes sit on the semicircle where the
    lattice lines cross it (columns near the poles, rows near the equator),
    so their spacing lies between h and about 1.5 h. The mesh is symmetric
    under z -> -z.
    """

    grid_n: int
    radius: float
    nodes: np.ndarray
    tags: np.ndarray
    triangles: np.ndarray
    lattice: np.ndarray
    area: np.ndarray = field(repr=False)
    centroid: np.ndarray = field(repr=False)
    grad: np.ndarray = field(repr=False)
    mirror: np.ndarray = field(repr=False)
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def h(self) -> float:
        return 1.0 / self.grid_n

    @property
    def r(self) -> np.ndarray:
        return self.nodes[:, 0]

    @property
    def z(self) -> np.ndarray:
        return self.nodes[:, 1]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def outer(self) -> np.ndarray:
        return self.tags == OUTER

    @property
    def free(self) -> np.ndarray:
        return self.tags != OUTER

    @classmethod
    def build(cls, grid_n: int, radius: float = 1.0) -> "HalfDiskGrid":
        if grid_n < 4:
            raise DomainError("grid_n must be at least 4")
        if not 0.5 < radius <= 1.0:
            raise DomainError("radius must lie in (0.5, 1]")
        N = int(grid_n)
        h = 1.0 / N
        R = float(radius)

        # upper quarter: lattice nodes first, then the arc
        ii, jj = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
        keep = np.hypot(ii * h, jj * h) < R - 0.5 * h
        lat_q = -np.ones((N + 1, N + 1), dtype=np.int64)
        li, lj = ii[keep], jj[keep]
        lat_q[li, lj] = np.arange(li.size)
        pts = [np.column_stack([li * h, lj * h])]
        pts.append(_arc_nodes(R, h))
        qpts = np.vstack(pts)
        n_lat = li.size
        qtags = np.full(len(qpts), INTERIOR, dtype=np.int8)
        qtags[:n_lat][li == 0] = AXIS
        qtags[n_lat:] = OUTER

        # lattice squares with all four corners present
        sq = (lat_q[:-1, :-1] >= 0) & (lat_q[1:, :-1] >= 0) & (lat_q[1:, 1:] >= 0) & (lat_q[:-1, 1:] >= 0)
        si, sj = np.nonzero(sq)
        tris = _union_jack(si, sj, lat_q)

        # fill the gap between the lattice staircase and the arc
        dt = Delaunay(qpts)
        simp = dt.simplices
        c = qpts[simp].mean(axis=1)
        ci = np.floor(c[:, 0] / h).astype(int)
        cj = np.floor(c[:, 1] / h).astype(int)
        inside = (ci < N) & (cj < N)
        in_sq = np.zeros(len(simp), dtype=bool)
        in_sq[inside] = sq[ci[inside], cj[inside]]
        gap = simp[~in_sq]
        qtris = np.vstack([tris, gap])
        qtris = _orient(qpts, qtris)
        a2 = _signed_area2(qpts, qtris)
        qtris = qtris[a2 > 1e-10 * h * h]

        # mirror to z < 0
        upper = qpts[:, 1] > 0.5 * h * 1e-6
        nq = len(qpts)
        low_ids = -np.ones(nq, dtype=np.int64)
        low_ids[upper] = nq + np.arange(upper.sum())
        low_ids[~upper] = np.nonzero(~upper)[0]
        nodes = np.vstack([qpts, qpts[upper] * np.array([1.0, -1.0])])
        tags = np.concatenate([qtags, qtags[upper]])
        ltris = low_ids[qtris][:, [0, 2, 1]]
        triangles = np.vstack([qtris, ltris])
        mirror = np.concatenate([low_ids, np.nonzero(upper)[0]])

        lattice = -np.ones((N + 1, 2 * N + 1), dtype=np.int64)
        lattice[:, N:] = lat_q
        lower_lat = lat_q[:, 1:][:, ::-1]
        lattice[:, :N] = np.where(lower_lat >= 0, low_ids[np.maximum(lower_lat, 0)], -1)

        used = np.zeros(len(nodes), dtype=bool)
        used[triangles.ravel()] = True
        if not used.all():
            raise RuntimeError("mesh construction left unused nodes")

        area, centroid, grad = _geometry(nodes, triangles)
        return cls(N, R, nodes, tags, triangles, lattice, area, centroid, grad, mirror)

    def lattice_index(self, i, j):
        """Node index of lattice point (i h, j h), or -1."""
        return self.lattice[i, j + self.grid_n]

    def boundary_polygon_area(self) -> float:
        """Area of the polygon bounded by the arc nodes and the axis."""
        arc = self.nodes[self.outer]
        ang = np.arctan2(arc[:, 1], arc[:, 0])
        p = arc[np.argsort(ang)]
        x, y = p[:, 0], p[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    @cached_property
    def _mpl_triangulation(self):
        import matplotlib.tri as mtri

        return mtri.Triangulation(self.nodes[:, 0], self.nodes[:, 1], self.triangles)

    def interpolate(self, values: np.ndarray):
        """Linear interpolator over the mesh (matplotlib triangulation).

        The triangulation and its point locator are built once per grid;
        they hold a reference cycle, so rebuilding them per call would leave
        large locators waiting for the cyclic collector.
        """
        import matplotlib.tri as mtri

        tri = self._mpl_triangulation
        return mtri.LinearTriInterpolator(tri, values, trifinder=tri.get_trifinder())


def _signed_area2(p, t):
    a, b, c = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
    return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])


def _orient(p, t):
    t = t.copy()
    neg = _signed_area2(p, t) < 0
    t[neg] = t[neg][:, [0, 2, 1]]
    return t


def _geometry(p, t):
    a, b, c = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
    a2 = _signed_area2(p, t)
    # gradients of the barycentric hat functions, shape (T, 3, 2)
    g = np.empty((len(t), 3, 2))
    g[:, 0, 0] = b[:, 1] - c[:, 1]
    g[:, 0, 1] = c[:, 0] - b[:, 0]
    g[:, 1, 0] = c[:, 1] - a[:, 1]
    g[:, 1, 1] = a[:, 0] - c[:, 0]
    g[:, 2, 0] = a[:, 1] - b[:, 1]
    g[:, 2, 1] = b[:, 0] - a[:, 0]
    g /= a2[:, None, None]
    return 0.5 * a2, (a + b + c) / 3.0, g
