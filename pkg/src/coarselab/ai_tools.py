"""Quasi-isometry constants on finite metric spaces, and bound checks on trees.

A map ``phi: X -> Y`` between finite metric spaces is stored as a dict from
X-labels to Y-labels. Its additive distortion at a given stretch factor is
the least ``additive`` with

    d_X(a, b) / stretch - additive <= d_Y(phi a, phi b) <= stretch * d_X(a, b) + additive

for all pairs, and its onto radius is the largest distance from a point of
``Y`` to the image. An almost-isometry has stretch factor 1.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .cover import (
    TreePoint,
    Word,
    act,
    covering_centers,
    covering_number,
    translation_length,
    tree_distance,
    walk,
    word_path,
)
from .metric_graph import GraphError, MetricGraph, generators

TRIANGLE_TOL = 1e-9
CMP_TOL = 1e-9
DEFAULT_MAX_POINTS = 12


class MetricSpaceError(ValueError):
    pass


class SizeBoundExceeded(ValueError):
    pass


@dataclass(frozen=True)
class FiniteMetricSpace:
    labels: tuple[str, ...]
    dist: np.ndarray = field(compare=False)

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        d = np.array(self.dist, dtype=float)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dist", d)
        n = len(labels)
        if len(set(labels)) != n:
            raise MetricSpaceError("duplicate labels")
        if d.shape != (n, n):
            raise MetricSpaceError(f"distance matrix has shape {d.shape}, expected {(n, n)}")
        if not np.all(np.isfinite(d)) or (d < 0).any():
            raise MetricSpaceError("distances must be finite and nonnegative")
        if np.diag(d).any():
            raise MetricSpaceError("nonzero diagonal entry")
        if not np.array_equal(d, d.T):
            i, j = np.argwhere(d != d.T)[0]
            raise MetricSpaceError(f"asymmetric entry at ({labels[i]}, {labels[j]})")
        # d[i, k] <= d[i, j] + d[j, k] for all triples
        slack = d[:, None, :] - d[:, :, None] - d[None, :, :]
        if n and slack.max() > TRIANGLE_TOL:
            i, j, k = np.unravel_index(np.argmax(slack), slack.shape)
            raise MetricSpaceError(
                f"triangle inequality fails for ({labels[i]}, {labels[j]}, {labels[k]})"
            )

    def __len__(self):
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise MetricSpaceError(f"unknown label {label!r}") from None

    def eccentricities(self) -> np.ndarray:
        return self.dist.max(axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.labels)
        for row in self.dist:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def parse_metric_space(text: str) -> FiniteMetricSpace:
    """CSV with a header row of labels. Rows may carry a leading label column."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise MetricSpaceError("empty metric space file")
    labels = [c.strip() for c in rows[0]]
    if labels and labels[0] == "":
        labels = labels[1:]
    n = len(labels)
    body = []
    for r in rows[1:]:
        cells = [c.strip() for c in r]
        if len(cells) == n + 1:
            cells = cells[1:]
        if len(cells) != n:
            raise MetricSpaceError(f"row {r!r} has {len(cells)} entries, expected {n}")
        try:
            body.append([float(c) for c in cells])
        except ValueError as exc:
            raise MetricSpaceError(str(exc)) from None
    if len(body) != n:
        raise MetricSpaceError(f"distance matrix has {len(body)} rows, expected shape {(n, n)}")
    return FiniteMetricSpace(tuple(labels), np.array(body).reshape(n, n))


def load_metric_space(path: str | Path) -> FiniteMetricSpace:
    return parse_metric_space(Path(path).read_text())


def parse_assignment(text: str) -> dict[str, str]:
    table = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line:
            raise MetricSpaceError(f"line {lineno}: expected 'x -> y'")
        a, b = (s.strip() for s in line.split("->", 1))
        if a in table:
            raise MetricSpaceError(f"line {lineno}: {a!r} assigned twice")
        table[a] = b
    return table


def format_assignment(table: Mapping[str, str]) -> str:
    return "".join(f"{a} -> {b}\n" for a, b in table.items())


# ----------------------------------------------------------------------
# Certificates


@dataclass(frozen=True)
class MapCertificate:
    """Minimal constants of a stored map: the stretch factor with no
    additive slack, the additive distortion with stretch 1, and the onto radius."""

    assignment: dict
    stretch: float
    additive: float
    onto_radius: float

    def almost_isometry_constant(self) -> float:
        return max(self.additive, self.onto_radius)


def _image_indices(x: FiniteMetricSpace, y: FiniteMetricSpace, table: Mapping[str, str]) -> np.ndarray:
    missing = [a for a in x.labels if a not in table]
    if missing:
        raise MetricSpaceError(f"assignment is not total: missing {missing}")
    extra = [a for a in table if a not in x.labels]
    if extra:
        raise MetricSpaceError(f"assignment mentions unknown source labels {extra}")
    return np.array([y.index(table[a]) for a in x.labels], dtype=int)


def _pulled_back(x, y, idx):
    return y.dist[np.ix_(idx, idx)]


def additive_constant(
    x: FiniteMetricSpace, y: FiniteMetricSpace, table: Mapping[str, str], stretch: float = 1.0
) -> float:
    """Least additive constant making the map quasi-isometric with the given stretch factor."""
    if stretch < 1:
        raise ValueError("stretch must be at least 1")
    idx = _image_indices(x, y, table)
    dy = _pulled_back(x, y, idx)
    excess = np.maximum(dy - stretch * x.dist, x.dist / stretch - dy)
    return float(max(excess.max(initial=0.0), 0.0))


def multiplicative_constant(x: FiniteMetricSpace, y: FiniteMetricSpace, table: Mapping[str, str]) -> float:
    """Least stretch factor with no additive slack; inf if the map collapses a pair."""
    idx = _image_indices(x, y, table)
    dy = _pulled_back(x, y, idx)
    k = 1.0
    iu = np.triu_indices(len(x), 1)
    for a, b in zip(x.dist[iu], dy[iu]):
        if a == b:
            continue
        if a == 0 or b == 0:
            return math.inf
        k = max(k, float(a / b), float(b / a))
    return k


def onto_radius(x: FiniteMetricSpace, y: FiniteMetricSpace, table: Mapping[str, str]) -> float:
    idx = np.unique(_image_indices(x, y, table))
    if idx.size == 0:
        return math.inf
    return float(y.dist[:, idx].min(axis=1).max())


def verify_map(x: FiniteMetricSpace, y: FiniteMetricSpace, table: Mapping[str, str]) -> MapCertificate:
    table = dict(table)
    return MapCertificate(
        assignment=table,
        stretch=multiplicative_constant(x, y, table),
        additive=additive_constant(x, y, table),
        onto_radius=onto_radius(x, y, table),
    )


def coarse_inverse(x: FiniteMetricSpace, y: FiniteMetricSpace, cert: MapCertificate) -> MapCertificate:
    """Send each point of Y to a nearest preimage of its nearest image point.

    Ties go to the earlier X label. The result is a certificate for the map
    ``Y -> X``.
    """
    idx = _image_indices(x, y, cert.assignment)
    if idx.size == 0:
        raise MetricSpaceError("empty image")
    inverse = {}
    for j, label in enumerate(y.labels):
        # argmin takes the first minimum, i.e. the earliest X label
        k = int(np.argmin(y.dist[j, idx]))
        inverse[label] = x.labels[k]
    return verify_map(y, x, inverse)


@dataclass(frozen=True)
class RoundTrip:
    inverse: MapCertificate
    source_displacement: float  # max_x d(psi phi x, x)
    target_displacement: float  # max_y d(phi psi y, y)


def round_trip(x: FiniteMetricSpace, y: FiniteMetricSpace, cert: MapCertificate) -> RoundTrip:
    inv = coarse_inverse(x, y, cert)
    phi, psi = cert.assignment, inv.assignment
    src = max(x.dist[x.index(a), x.index(psi[phi[a]])] for a in x.labels)
    tgt = max(y.dist[y.index(b), y.index(phi[psi[b]])] for b in y.labels)
    return RoundTrip(inv, float(src), float(tgt))


# ----------------------------------------------------------------------
# Search


def _check_size(x: FiniteMetricSpace, max_points: int) -> None:
    if len(x) > max_points:
        raise SizeBoundExceeded(f"|X| = {len(x)} exceeds the search bound {max_points}")


def search_ai(
    x: FiniteMetricSpace,
    y: FiniteMetricSpace,
    bound: float,
    max_points: int = DEFAULT_MAX_POINTS,
) -> dict[str, str] | None:
    """Exhaustive backtracking for a map with additive distortion and onto
    radius both at most ``bound``. Returns ``None`` when none exists."""
    _check_size(x, max_points)
    if len(x) == 0 or len(y) == 0:
        return None
    limit = float(bound) + CMP_TOL
    order = sorted(range(len(x)), key=lambda i: (-x.eccentricities()[i], i))
    dx, dy = x.dist, y.dist
    near = dy <= limit  # near[y0, y1]: y1 covers y0
    assigned: list[int] = []
    chosen: list[int] = []
    cover_count = np.zeros(len(y), dtype=int)

    def rec(depth: int) -> bool:
        if depth == len(order):
            return not (cover_count == 0).any()
        i = order[depth]
        if assigned:
            prev_x = np.array(assigned)
            prev_y = np.array(chosen)
            # distortion against every earlier choice, for each candidate image
            dist = np.abs(dy[:, prev_y] - dx[i, prev_x][None, :]).max(axis=1)
        else:
            dist = np.zeros(len(y))
        for j in sorted(np.flatnonzero(dist <= limit), key=lambda j: (dist[j], j)):
            assigned.append(i)
            chosen.append(int(j))
            cover_count[near[:, j]] += 1
            if rec(depth + 1):
                return True
            cover_count[near[:, j]] -= 1
            assigned.pop()
            chosen.pop()
        return False

    if not rec(0):
        return None
    table = {}
    for i, j in zip(assigned, chosen):
        table[x.labels[i]] = y.labels[j]
    return {a: table[a] for a in x.labels}


def candidate_constants(x: FiniteMetricSpace, y: FiniteMetricSpace) -> np.ndarray:
    """Every value the optimal constant can take.

    The distortion of a map is some |d_X - d_Y| and its onto radius is some
    Y-distance, so the optimum lies in the union of the two sets.
    """
    diffs = np.abs(x.dist.ravel()[:, None] - y.dist.ravel()[None, :]).ravel()
    vals = np.concatenate([diffs, y.dist.ravel(), [0.0]])
    return np.unique(np.round(vals, 12))


def min_ai_constant(x: FiniteMetricSpace, y: FiniteMetricSpace, max_points: int = DEFAULT_MAX_POINTS) -> float:
    _check_size(x, max_points)
    cands = candidate_constants(x, y)
    lo, hi = 0, len(cands) - 1
    if search_ai(x, y, cands[hi], max_points) is None:
        return math.inf
    while lo < hi:
        mid = (lo + hi) // 2
        if search_ai(x, y, cands[mid], max_points) is not None:
            hi = mid
        else:
            lo = mid + 1
    return float(cands[lo])


# ----------------------------------------------------------------------
# Tree maps


def tree_rng(seed: int, p: TreePoint) -> np.random.Generator:
    """A generator determined by the seed and the point, so maps are functions."""
    offset_key = int(round(p.offset * 1e9))
    return np.random.default_rng(np.random.SeedSequence([seed, len(p.path), *p.path, offset_key]))


@dataclass(frozen=True)
class JitterMap:
    """A self-map of the tree moving every point by at most ``constant/2``.

    Any such map distorts distances by at most ``constant`` and has every
    point within ``constant/2`` of its image, so it is an almost-isometry
    with that constant.
    """

    constant: float
    seed: int

    def __call__(self, p: TreePoint) -> TreePoint:
        if self.constant == 0:
            return p
        rng = tree_rng(self.seed, p)
        dirs = p.directions()
        d = int(rng.integers(len(dirs)))
        dist = float(rng.uniform(0.0, self.constant / 2))
        return walk(p, d, dist, lambda k: int(rng.integers(k)))


def identity_map(p: TreePoint) -> TreePoint:
    return p


def sample_ball(g: MetricGraph, r: float, n: int, rng: np.random.Generator) -> list[TreePoint]:
    """Points of the ball about the base, reached by random non-backtracking walks."""
    base = TreePoint.base(g)
    out = []
    for _ in range(n):
        d = int(rng.integers(len(base.directions())))
        out.append(walk(base, d, float(rng.uniform(0.0, r)), lambda k: int(rng.integers(k))))
    return out


@dataclass(frozen=True)
class PushforwardReport:
    word: str
    constant: float
    seed: int
    n_pairs: int
    max_distortion: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.max_distortion <= self.bound + CMP_TOL


def pushforward_check(
    g: MetricGraph,
    phi,
    psi,
    w: Word,
    r: float,
    constant: float,
    n_pairs: int = 200,
    seed: int = 0,
) -> PushforwardReport:
    """Additive distortion of ``phi . w . psi`` on sampled pairs of ``B(r)``.

    ``w`` acts as a deck transformation; the maps are callables on tree points.
    """
    rng = np.random.default_rng(seed)
    w_path = word_path(g, w)
    pts = sample_ball(g, r, 2 * n_pairs, rng)
    worst = 0.0
    for p, q in zip(pts[::2], pts[1::2]):
        gp = phi(act(w_path, psi(p)))
        gq = phi(act(w_path, psi(q)))
        worst = max(worst, abs(tree_distance(gp, gq) - tree_distance(p, q)))
    return PushforwardReport(w.format(), constant, seed, n_pairs, worst, 3 * constant)


@dataclass(frozen=True)
class CountingCheck:
    r: float
    constant: float
    source_count: int  # N(1, r) about the base
    target_count: int  # N(1 + 2 constant, r - 2 constant) about phi(base)
    pushed_centers_cover: bool

    @property
    def ok(self) -> bool:
        return self.source_count >= self.target_count and self.pushed_centers_cover


def counting_check(
    g: MetricGraph,
    phi,
    r: float,
    constant: float,
    s: float = 1.0,
    n_samples: int = 300,
    seed: int = 0,
) -> CountingCheck:
    """Compare covering counts across an almost-isometry ``phi`` with the given constant.

    Also checks directly that the images of an optimal s-covering of ``B(r)``
    cover sampled points of ``B(phi(base), r - 2 constant)`` with radius
    ``s + 2 constant``.
    """
    margin = 2 * constant
    n1 = covering_number(g, s, r)
    center = phi(TreePoint.base(g))
    n2 = covering_number(g, s + margin, r - margin, center=center)
    pushed = [phi(c) for c in covering_centers(g, s, r)]
    rng = np.random.default_rng(seed)
    covered = True
    for _ in range(n_samples):
        d = rng.integers(len(center.directions()))
        y = walk(center, int(d), float(rng.uniform(0, r - margin)), lambda k: int(rng.integers(k)))
        if min(tree_distance(y, c) for c in pushed) > s + margin + CMP_TOL:
            covered = False
            break
    return CountingCheck(r, constant, n1, n2, covered)


# ----------------------------------------------------------------------
# Marked length spectrum


@dataclass(frozen=True)
class MLSRow:
    word: str
    length0: float
    length1: float

    @property
    def equal(self) -> bool:
        return abs(self.length0 - self.length1) <= CMP_TOL


@dataclass(frozen=True)
class MLSComparison:
    rows: tuple[MLSRow, ...]

    @property
    def witness(self) -> str | None:
        return next((r.word for r in self.rows if not r.equal), None)

    @property
    def verdict(self) -> str:
        w = self.witness
        return "MLS agrees on sample" if w is None else f"MLS differs (witness {w})"

    def to_tsv(self) -> str:
        lines = [f"# verdict\t{self.verdict}", "word\ttau0\ttau1\tequal"]
        lines += [f"{r.word}\t{r.length0!r}\t{r.length1!r}\t{int(r.equal)}" for r in self.rows]
        return "\n".join(lines) + "\n"


def compare_mls(
    g: MetricGraph,
    lengths0: Sequence[float],
    lengths1: Sequence[float],
    words: Sequence[Word],
    names: Sequence[str] | None = None,
) -> MLSComparison:
    g0, g1 = g.with_lengths(lengths0), g.with_lengths(lengths1)
    n_gens = len(generators(g))
    rows = []
    for w in words:
        if any(abs(k) > n_gens for k in w.letters):
            raise GraphError(f"word {w.format(names)} uses a letter beyond the {n_gens} generators")
        rows.append(MLSRow(w.format(names), translation_length(g0, w), translation_length(g1, w)))
    return MLSComparison(tuple(rows))

