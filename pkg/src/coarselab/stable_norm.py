"""Stable norms of Z^2-periodic metric graphs.

A periodic graph is a finite metric graph whose edges carry integer
translation labels. Its Z^2-cover has vertex copies ``(v, m)``; an edge from
``u`` to ``v`` with label ``t`` joins ``(u, m)`` to ``(v, m + t)``. The stable
norm of ``v`` is the limit of ``d((o, 0), (o, n v)) / n``.

Periodic graphs stand in for periodic Riemannian metrics on the plane. The
geometry differs but the properties tested here do not depend on it.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .cover import BudgetExceeded
from .metric_graph import Edge, GraphError, MetricGraph, generators

DEFAULT_NODE_BUDGET = 5_000_000


@dataclass(frozen=True)
class PeriodicGraph:
    graph: MetricGraph

    def __post_init__(self):
        g = self.graph
        if any(e.translation is None for e in g.edges):
            raise GraphError("every edge of a periodic graph needs a translation label")
        vecs = self.cycle_translations()
        minors = [abs(a[0] * b[1] - a[1] * b[0]) for i, a in enumerate(vecs) for b in vecs[i + 1 :]]
        if reduce(math.gcd, minors, 0) != 1:
            raise GraphError("cycle translations do not span Z^2; the cover is disconnected")
        adj = []
        for i in range(g.n_vertices):
            adj.append(
                tuple(
                    (g.target_index(h), g.half_length(h), *g.half_translation(h))
                    for h in g.out_at(i)
                )
            )
        object.__setattr__(self, "_adj", tuple(adj))

    def cycle_translations(self) -> list[tuple[int, int]]:
        """Translation of each based loop in a cycle basis."""
        out = []
        for loop in generators(self.graph):
            tx = sum(self.graph.half_translation(h)[0] for h in loop)
            ty = sum(self.graph.half_translation(h)[1] for h in loop)
            out.append((tx, ty))
        return out


def displacement(pg: PeriodicGraph, m: tuple[int, int], node_budget: int = DEFAULT_NODE_BUDGET) -> float:
    """Distance in the cover from the base copy at 0 to the base copy at ``m``."""
    mx, my = int(m[0]), int(m[1])
    # d(0, m) = d(0, -m) by translating and reversing; fix one representative
    # so the two agree bit for bit
    if (mx, my) < (-mx, -my):
        mx, my = -mx, -my
    if mx == 0 and my == 0:
        return 0.0
    adj = pg._adj
    # pack (vertex, x, y) into one int; coordinates stay far below 2**30
    span = 1 << 31

    def pack(v, x, y):
        return (v * span + (x + span // 2)) * span + (y + span // 2)

    src = pack(pg.graph.base_index, 0, 0)
    dst = pack(pg.graph.base_index, mx, my)
    dist = {src: 0.0}
    heap = [(0.0, src, pg.graph.base_index, 0, 0)]
    settled = 0
    while heap:
        d, key, v, x, y = heapq.heappop(heap)
        if key == dst:
            return d
        if d > dist[key]:
            continue
        settled += 1
        if settled > node_budget:
            raise BudgetExceeded(f"displacement search settled more than {node_budget} nodes", d)
        for w, length, tx, ty in adj[v]:
            nx, ny = x + tx, y + ty
            nkey = pack(w, nx, ny)
            nd = d + length
            if nd < dist.get(nkey, math.inf):
                dist[nkey] = nd
                heapq.heappush(heap, (nd, nkey, w, nx, ny))
    raise GraphError("target copy unreachable")


@dataclass(frozen=True)
class NormEstimate:
    vector: tuple[int, int]
    n: int
    value: float
    error_bound: float


def stable_norm(pg: PeriodicGraph, v: tuple[int, int], n: int = 16, **kw) -> NormEstimate:
    """``d(0, n v) / n`` with a bound on its excess over the limit.

    By subadditivity ``a(m) = d(0, m v)`` satisfies ``a(m) >= m |v|``. The
    defect ``2 a(m) - a(2m)`` over the doubling sequence ``n, 2n`` measures
    how far ``a`` sits above its linear part; divided by ``n`` it bounds the
    error of the estimate.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    v = (int(v[0]), int(v[1]))
    if v == (0, 0):
        return NormEstimate(v, n, 0.0, 0.0)
    a = [displacement(pg, (k * v[0], k * v[1]), **kw) for k in (n, 2 * n, 4 * n)]
    defect = max(2 * a[0] - a[1], 2 * a[1] - a[2], 0.0)
    return NormEstimate(v, n, a[0] / n, defect / n)


def primitive_directions(count: int, max_entry: int = 3) -> list[tuple[int, int]]:
    """Primitive integer vectors closest in angle to ``count`` evenly spread
    directions, closed under negation."""
    if count < 8:
        raise ValueError("need at least 8 directions")
    cands = [
        (p, q)
        for p in range(-max_entry, max_entry + 1)
        for q in range(-max_entry, max_entry + 1)
        if math.gcd(p, q) == 1
    ]
    angles = np.array([math.atan2(q, p) for p, q in cands])
    norms = np.array([math.hypot(p, q) for p, q in cands])
    picked = []
    for k in range(count // 2):
        target = 2 * math.pi * k / (2 * (count // 2))
        gap = np.abs(np.angle(np.exp(1j * (angles - target))))
        # closest angle, then the shortest vector
        best = min(range(len(cands)), key=lambda i: (round(gap[i], 12), norms[i]))
        if cands[best] not in picked:
            picked.append(cands[best])
    return picked + [(-p, -q) for p, q in picked]


@dataclass(frozen=True)
class BallSample:
    vector: tuple[int, int]
    norm: float
    err: float

    @property
    def point(self) -> tuple[float, float]:
        return (self.vector[0] / self.norm, self.vector[1] / self.norm)


def _norm_job(args):
    pg, v, n = args
    return stable_norm(pg, v, n)


def unit_ball(pg: PeriodicGraph, directions: int = 16, n: int = 16, workers: int = 1) -> list[BallSample]:
    """Boundary points ``v / |v|`` of the unit ball in sampled directions."""
    dirs = primitive_directions(directions)
    half = dirs[: len(dirs) // 2]
    jobs = [(pg, v, n) for v in half]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            ests = list(pool.map(_norm_job, jobs))
    else:
        ests = [_norm_job(j) for j in jobs]
    out = [BallSample(e.vector, e.value, e.error_bound) for e in ests]
    out += [BallSample((-e.vector[0], -e.vector[1]), e.value, e.error_bound) for e in ests]
    return out


def unit_ball_csv(samples: list[BallSample]) -> str:
    lines = ["vx,vy,norm,err"]
    lines += [f"{s.vector[0]},{s.vector[1]},{s.norm!r},{s.err!r}" for s in samples]
    return "\n".join(lines) + "\n"


class EllipseFitError(ValueError):
    pass


@dataclass(frozen=True)
class EllipseFit:
    form: np.ndarray  # symmetric 2x2 matrix Q with Q(p) = p^T Q p
    residual: float


def fit_ellipse(points) -> EllipseFit:
    """Least-squares quadratic form through centrally symmetric points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 6:
        raise EllipseFitError("need at least 6 planar points")
    x, y = pts[:, 0], pts[:, 1]
    design = np.column_stack([x * x, x * y, y * y])
    if np.linalg.matrix_rank(design, tol=1e-12 * max(1.0, np.abs(design).max())) < 3:
        raise EllipseFitError("degenerate sample: points lie on too few lines through the origin")
    (a, b, c), *_ = np.linalg.lstsq(design, np.ones(len(pts)), rcond=None)
    form = np.array([[a, b / 2], [b / 2, c]])
    if not (a > 0 and a * c - b * b / 4 > 0):
        raise EllipseFitError(f"fitted form is not positive definite: {form.tolist()}")
    resid = float(np.abs(design @ np.array([a, b, c]) - 1.0).max())
    return EllipseFit(form, resid)


def ellipse_residual(points) -> float:
    """Max of ``|Q(p) - 1|`` for the best-fitting positive definite form ``Q``."""
    return fit_ellipse(points).residual


# ----------------------------------------------------------------------
# Example lattices


def _one_vertex(loops) -> PeriodicGraph:
    edges = tuple(Edge("o", "o", float(length), t) for length, t in loops)
    return PeriodicGraph(MetricGraph(("o",), edges))


def rect_grid(dx: float = 1.0, dy: float = 1.0) -> PeriodicGraph:
    """Square lattice with horizontal edges of length ``dx``, vertical ``dy``."""
    return _one_vertex([(dx, (1, 0)), (dy, (0, 1))])


def unit_grid() -> PeriodicGraph:
    return rect_grid(1.0, 1.0)


def triangular_grid(length: float = 1.0) -> PeriodicGraph:
    return _one_vertex([(length, (1, 0)), (length, (0, 1)), (length, (-1, 1))])


def honeycomb(length: float = 1.0) -> PeriodicGraph:
    edges = (
        Edge("a", "b", length, (0, 0)),
        Edge("a", "b", length, (-1, 0)),
        Edge("a", "b", length, (0, -1)),
    )
    return PeriodicGraph(MetricGraph(("a", "b"), edges))
