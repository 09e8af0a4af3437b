"""Volume growth entropy of universal-cover trees.

The exact value is the unique ``h`` at which the weighted non-backtracking
matrix ``A(h)[e, f] = exp(-h * len(f))`` (``f`` follows ``e`` without
backtracking) has spectral radius one. Empirical values come from slopes of
log ball measure, or log covering counts, against the radius.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import brentq

from .cover import DEFAULT_BUDGET, BudgetExceeded, TreePoint, ball_measure, covering_number
from .metric_graph import GraphError, MetricGraph, spanning_tree, tree_path


class TreeQuotient(GraphError):
    """The graph is a tree after pruning: its cover grows linearly, entropy 0."""


class ConvergenceError(RuntimeError):
    pass


def prune_leaves(g: MetricGraph) -> tuple[MetricGraph, list]:
    """Iteratively strip degree-1 vertices. Returns the core and the removed labels."""
    alive_v = set(g.vertices)
    alive_e = set(range(g.n_edges))
    removed = []
    changed = True
    while changed:
        changed = False
        deg = {v: 0 for v in alive_v}
        for i in alive_e:
            e = g.edges[i]
            deg[e.u] += 1
            deg[e.v] += 1
        for v in [v for v in g.vertices if v in alive_v and deg[v] <= 1]:
            alive_v.discard(v)
            removed.append(v)
            alive_e = {i for i in alive_e if v not in (g.edges[i].u, g.edges[i].v)}
            changed = True
    if not alive_e:
        raise TreeQuotient("graph has no cycles; the universal cover grows linearly (entropy 0)")
    vertices = tuple(v for v in g.vertices if v in alive_v)
    edges = tuple(g.edges[i] for i in sorted(alive_e))
    base = g.base if g.base in alive_v else vertices[0]
    return MetricGraph(vertices, edges, base), removed


def nonbacktracking_pattern(g: MetricGraph) -> np.ndarray:
    """0/1 matrix on half-edges: entry (e, f) is 1 when f may follow e."""
    n = g.n_half_edges
    m = np.zeros((n, n))
    for e in range(n):
        m[e, list(g.followers(e))] = 1.0
    return m


def weighted_matrix(g: MetricGraph, rate: float, pattern: np.ndarray | None = None) -> np.ndarray:
    if pattern is None:
        pattern = nonbacktracking_pattern(g)
    half_len = np.repeat(g.lengths, 2)
    return pattern * np.exp(-rate * half_len)[None, :]


def perron_value(a: np.ndarray, rtol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Perron root of a nonnegative matrix by power iteration on a resolvent.

    Starting from the all-ones vector, each step multiplies by
    ``(sigma*I - a)^-1`` with ``sigma`` just above the current upper bound on
    the root. For ``sigma`` above the root the resolvent is nonnegative with
    the same Perron vector, so the Collatz-Wielandt ratios of ``a`` keep
    bracketing the root while the bracket closes in a handful of steps even
    when the spectral gap is tiny. A step that loses positivity falls back to
    plain power iteration with ``a + hi*I``.

    Stops once the bracket is relatively narrower than ``rtol``. An ``rtol``
    below the rounding floor is met as closely as arithmetic allows: a
    bracket that has stopped shrinking for 200 steps is accepted once under
    1e-10.
    """
    n = a.shape[0]
    if not a.any():
        return 0.0
    eye = np.eye(n)
    x = np.ones(n)
    best, stale = math.inf, 0
    for _ in range(max_iter):
        ax = a @ x
        ratios = ax / x
        lo, hi = ratios.min(), ratios.max()
        gap = (hi - lo) / hi
        if gap <= rtol:
            return 0.5 * (lo + hi)
        if gap < best:
            best, stale = gap, 0
        else:
            stale += 1
            if stale >= 200 and gap <= 1e-10:
                return 0.5 * (lo + hi)
        sigma = hi + (hi - lo)
        try:
            y = np.linalg.solve(sigma * eye - a, x)
        except np.linalg.LinAlgError:
            y = None
        if y is None or not np.all(np.isfinite(y)) or not np.all(y > 0):
            y = ax + hi * x
        x = y / y.max()
    raise ConvergenceError(f"power iteration did not reach rtol={rtol} in {max_iter} iterations")


def spectral_radius(g: MetricGraph, rate: float, rtol: float = 1e-12) -> float:
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    core, _ = prune_leaves(g)
    return perron_value(weighted_matrix(core, rate), rtol)


@dataclass
class EntropyReport:
    upper_rate: float
    lower_rate: float
    method: Literal["perron", "ball_slope", "covering_slope"]
    samples: list = field(default_factory=list)
    fit_window: tuple = (math.nan, math.nan)
    residual: float = 0.0
    slope: float = math.nan
    pruned: list = field(default_factory=list)
    note: str = ""

    @property
    def rate(self) -> float:
        return self.slope if self.method != "perron" else self.upper_rate

    def to_tsv(self) -> str:
        lines = [
            f"# method\t{self.method}",
            f"# upper_rate\t{self.upper_rate!r}",
            f"# lower_rate\t{self.lower_rate!r}",
        ]
        if self.method != "perron":
            lines += [
                f"# slope\t{self.slope!r}",
                f"# residual\t{self.residual!r}",
                f"# fit_window\t{self.fit_window[0]!r}\t{self.fit_window[1]!r}",
            ]
        if self.pruned:
            lines.append("# pruned\t" + "\t".join(map(str, self.pruned)))
        if self.note:
            lines.append(f"# note\t{self.note}")
        lines.append("r\tvalue")
        lines += [f"{r!r}\t{v!r}" for r, v in self.samples]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["samples"] = [list(s) for s in self.samples]
        d["fit_window"] = list(self.fit_window)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def perron_entropy(g: MetricGraph, tol: float = 1e-12, rtol: float = 1e-12) -> EntropyReport:
    """Exact volume entropy: the rate at which ``spectral_radius`` equals 1."""
    try:
        core, removed = prune_leaves(g)
    except TreeQuotient:
        return EntropyReport(0.0, 0.0, "perron", pruned=list(g.vertices), note="tree quotient")
    pattern = nonbacktracking_pattern(core)
    radius0 = perron_value(pattern, rtol)
    if radius0 <= 1.0 + 10 * rtol:
        return EntropyReport(0.0, 0.0, "perron", pruned=removed, note="spectral radius at rate 0 is 1")
    # radius0 * exp(-t*max_len) <= radius(t) <= radius0 * exp(-t*min_len)
    lo = math.log(radius0) / core.max_length

    def excess(t):
        return perron_value(weighted_matrix(core, t, pattern), rtol) - 1.0

    if excess(lo) <= 0.0:
        return EntropyReport(lo, lo, "perron", pruned=removed)
    hi = 2.0 * lo
    while excess(hi) > 0.0:
        lo, hi = hi, 2.0 * hi
    rate = brentq(excess, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return EntropyReport(rate, rate, "perron", pruned=removed)


def empirical_entropy(
    g: MetricGraph,
    r_min: float,
    r_max: float,
    step: float = 1.0,
    source: Literal["ball_measure", "covering_s1"] = "ball_measure",
    s: float = 1.0,
    budget: float = DEFAULT_BUDGET,
) -> EntropyReport:
    """Growth rate from samples of ln(ball measure) or ln(covering count) vs r.

    ``upper_rate``/``lower_rate`` are the extreme slopes between consecutive samples;
    ``slope`` is the least-squares slope over the window.
    """
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    rs = r_min + step * np.arange(int(math.floor((r_max - r_min) / step + 1e-9)) + 1)
    if rs.size < 3:
        raise ValueError("fewer than 3 samples in the window")
    if ball_measure(g, rs[-1]) > budget:
        raise BudgetExceeded(f"ball of radius {rs[-1]:g} exceeds the measure budget")
    if source == "ball_measure":
        vals = [ball_measure(g, float(r)) for r in rs]
        method = "ball_slope"
    elif source == "covering_s1":
        vals = [float(covering_number(g, s, float(r), budget=budget)) for r in rs]
        method = "covering_slope"
    else:
        raise ValueError(f"unknown source {source!r}")
    logs = np.log(vals)
    slopes = np.diff(logs) / np.diff(rs)
    coef = np.polyfit(rs, logs, 1)
    resid = logs - np.polyval(coef, rs)
    return EntropyReport(
        upper_rate=float(slopes.max()),
        lower_rate=float(slopes.min()),
        method=method,
        samples=[(float(r), float(v)) for r, v in zip(rs, vals)],
        fit_window=(float(rs[0]), float(rs[-1])),
        residual=float(np.sqrt(np.mean(resid**2))),
        slope=float(coef[0]),
    )


@dataclass(frozen=True)
class BallVolumeBounds:
    s: float
    min_half_ball: float  # smallest measure of an s/2-ball
    max_ball: float  # largest measure of an s-ball


def edge_point(g: MetricGraph, edge: int, t: float) -> TreePoint:
    """A lift of the point at distance ``t`` from ``u`` along quotient edge ``edge``."""
    parent = spanning_tree(g)
    head = tree_path(g, parent, g.source_index(2 * edge))
    if head and head[-1] == 2 * edge + 1:
        return TreePoint(g, tuple(head), g.edges[edge].length - t)
    return TreePoint(g, tuple(head) + (2 * edge,), t)


def ball_measure_bounds(g: MetricGraph, s: float, center_resolution: float = 0.05) -> BallVolumeBounds:
    """Extreme ball measures over centers sampled along every quotient edge.

    By periodicity every point of the tree is a lift of one of these.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    small, big = math.inf, 0.0
    for i, e in enumerate(g.edges):
        ts = np.arange(0.0, e.length + 1e-12, center_resolution)
        if ts[-1] < e.length - 1e-12:
            ts = np.append(ts, e.length)
        for t in ts:
            c = edge_point(g, i, float(t))
            small = min(small, ball_measure(g, s / 2, c))
            big = max(big, ball_measure(g, s, c))
    return BallVolumeBounds(s, small, big)


@dataclass(frozen=True)
class EntropyComparison:
    entropy1: float
    entropy2: float
    gap: float
    tolerance: float
    verdict: str


def compare_entropies(g1: MetricGraph, g2: MetricGraph, tol: float = 1e-9) -> EntropyComparison:
    """Almost-isometric covers have equal entropy, so a gap rules out an AI."""
    e1 = perron_entropy(g1, tol).upper_rate
    e2 = perron_entropy(g2, tol).upper_rate
    gap = abs(e1 - e2)
    combined = 2 * tol + 1e-12 * max(e1, e2, 1.0)
    verdict = "NOT-almost-isometric" if gap > combined else "inconclusive"
    return EntropyComparison(e1, e2, gap, combined, verdict)
