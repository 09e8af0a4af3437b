"""The universal-cover tree of a metric graph, unfolded lazily.

A point of the tree is a non-backtracking half-edge path from the base
vertex together with how far along its last half-edge the point sits.
Everything that only depends on the local shape of the tree (ball measures,
covering counts) is computed by recursion on ``(half-edge, remaining
radius)`` with memoization, so balls with millions of edges cost little.
Explicit enumeration (:func:`ball`) is budgeted.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .metric_graph import GraphError, MetricGraph, generators, reverse

OFFSET_TOL = 1e-9
EPS = 1e-9
DEFAULT_BUDGET = 1e8
DEFAULT_MAX_SEGMENTS = 2_000_000


class BudgetExceeded(RuntimeError):
    def __init__(self, message: str, depth: float | None = None):
        self.depth = depth
        super().__init__(message if depth is None else f"{message} (partial depth reached: {depth:g})")


# ----------------------------------------------------------------------
# Words in the free fundamental group


@dataclass(frozen=True)
class Word:
    """Signed generator indices: ``k`` is generator ``k-1``, ``-k`` its inverse."""

    letters: tuple[int, ...] = ()

    def __post_init__(self):
        letters = tuple(int(x) for x in self.letters)
        if any(x == 0 for x in letters):
            raise ValueError("0 is not a valid letter")
        object.__setattr__(self, "letters", letters)

    def __len__(self):
        return len(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def __pow__(self, n: int) -> "Word":
        if n < 0:
            return self.inverse() ** (-n)
        return Word(self.letters * n)

    def inverse(self) -> "Word":
        return Word(tuple(-x for x in reversed(self.letters)))

    def free_reduce(self) -> "Word":
        return Word(tuple(_cancel(self.letters, lambda a, b: a == -b)))

    @property
    def is_identity(self) -> bool:
        return not self.free_reduce().letters

    def format(self, names: Sequence[str] | None = None) -> str:
        if names is None:
            names = [chr(ord("a") + i) for i in range(26)]
        out = []
        for x in self.letters:
            name = names[abs(x) - 1]
            out.append(name if x > 0 else name.upper())
        return " ".join(out)

    def __str__(self):
        return self.format()


def parse_word(text: str, names: Sequence[str] | None = None) -> Word:
    """Whitespace-separated generator names; uppercase means inverse."""
    if names is None:
        names = [chr(ord("a") + i) for i in range(26)]
    lookup = {n: i + 1 for i, n in enumerate(names)}
    letters = []
    for tok in text.split():
        if tok in lookup:
            letters.append(lookup[tok])
        elif tok.lower() in lookup and tok == tok.upper():
            letters.append(-lookup[tok.lower()])
        else:
            raise ValueError(f"unknown generator {tok!r}")
    return Word(tuple(letters))


def _cancel(seq: Iterable, inverse_pair) -> list:
    out: list = []
    for x in seq:
        if out and inverse_pair(out[-1], x):
            out.pop()
        else:
            out.append(x)
    return out


def cyclic_reduce(w: Word) -> Word:
    letters = w.free_reduce().letters
    i, j = 0, len(letters)
    while j - i >= 2 and letters[i] == -letters[j - 1]:
        i += 1
        j -= 1
    return Word(letters[i:j])


# ----------------------------------------------------------------------
# Half-edge paths and the deck action


def reduce_path(path: Iterable[int]) -> list[int]:
    return _cancel(path, lambda a, b: a == reverse(b))


def cyclic_reduce_path(path: Sequence[int]) -> list[int]:
    p = reduce_path(path)
    i, j = 0, len(p)
    while j - i >= 2 and p[i] == reverse(p[j - 1]):
        i += 1
        j -= 1
    return p[i:j]


def word_path(g: MetricGraph, w: Word, gens: Sequence[Sequence[int]] | None = None) -> list[int]:
    """Reduced based loop representing ``w``."""
    if gens is None:
        gens = generators(g)
    seq: list[int] = []
    for x in w.letters:
        if abs(x) > len(gens):
            raise ValueError(f"letter {x} out of range for {len(gens)} generators")
        loop = gens[abs(x) - 1]
        seq.extend(loop if x > 0 else [reverse(h) for h in reversed(loop)])
    return reduce_path(seq)


def path_length(g: MetricGraph, path: Iterable[int]) -> float:
    return math.fsum(g.half_length(h) for h in path)


def translation_length(g: MetricGraph, w: Word, gens=None) -> float:
    """Length of the closed geodesic in the free homotopy class of ``w``."""
    return path_length(g, cyclic_reduce_path(word_path(g, cyclic_reduce(w), gens)))


def orbit_displacement(g: MetricGraph, w: Word, n: int = 1, gens=None) -> float:
    """d(base, w^n . base) in the universal cover."""
    return path_length(g, word_path(g, w**n, gens))


# ----------------------------------------------------------------------
# Tree points


@dataclass(frozen=True)
class TreePoint:
    """Point of the universal cover.

    ``path[:-1]`` is traversed fully, then ``offset`` along ``path[-1]``.
    Canonical form keeps ``0 < offset <= length(last)``; a vertex is the path
    ending at it with ``offset = length(last)``. The base point is ``((), 0)``.
    """

    graph: MetricGraph = field(compare=False, repr=False)
    path: tuple[int, ...] = ()
    offset: float = 0.0

    def __post_init__(self):
        g, path, off = self.graph, tuple(self.path), float(self.offset)
        if path:
            if g.source_index(path[0]) != g.base_index:
                raise GraphError("tree path must start at the base vertex")
            for a, b in zip(path, path[1:]):
                if g.target_index(a) != g.source_index(b):
                    raise GraphError("tree path is not contiguous")
                if b == reverse(a):
                    raise GraphError("tree path backtracks")
            length = g.half_length(path[-1])
            if off < -OFFSET_TOL or off > length + OFFSET_TOL:
                raise GraphError(f"offset {off} outside [0, {length}]")
            if off <= OFFSET_TOL:
                path = path[:-1]
                off = g.half_length(path[-1]) if path else 0.0
            elif off >= length - OFFSET_TOL:
                off = length
        elif abs(off) > OFFSET_TOL:
            raise GraphError("base point must have offset 0")
        else:
            off = 0.0
        object.__setattr__(self, "path", path)
        object.__setattr__(self, "offset", off)

    @classmethod
    def base(cls, g: MetricGraph) -> "TreePoint":
        return cls(g)

    @classmethod
    def vertex(cls, g: MetricGraph, path: Sequence[int]) -> "TreePoint":
        path = tuple(path)
        return cls(g, path, g.half_length(path[-1]) if path else 0.0)

    @property
    def is_vertex(self) -> bool:
        return not self.path or self.offset == self.graph.half_length(self.path[-1])

    @property
    def depth(self) -> float:
        """Distance to the base point."""
        if not self.path:
            return 0.0
        return path_length(self.graph, self.path[:-1]) + self.offset

    def directions(self) -> list[tuple[int, float]]:
        """Local branches ``(half-edge, distance to its far end)`` at this point."""
        g = self.graph
        if self.is_vertex:
            at = g.target_index(self.path[-1]) if self.path else g.base_index
            return [(h, g.half_length(h)) for h in g.out_at(at)]
        h = self.path[-1]
        return [(h, g.half_length(h) - self.offset), (reverse(h), self.offset)]


def _same_graph(a: TreePoint, b: TreePoint) -> None:
    if a.graph is not b.graph and a.graph != b.graph:
        raise GraphError("points belong to different graphs")


def tree_distance(a: TreePoint, b: TreePoint) -> float:
    _same_graph(a, b)
    g = a.graph
    pa, pb = a.path, b.path
    k = 0
    while k < len(pa) and k < len(pb) and pa[k] == pb[k]:
        k += 1
    if k == len(pa) and k == len(pb):
        return abs(a.offset - b.offset)

    def rest(p, off):
        # distance from the vertex after p[:k] out to the point
        if len(p) == k:
            return None
        return path_length(g, p[k:-1]) + off

    def back(p, off):
        # a point whose whole path is the common prefix sits this far
        # before the vertex at the prefix's end (the base has no path)
        return g.half_length(p[-1]) - off if p else 0.0

    ra, rb = rest(pa, a.offset), rest(pb, b.offset)
    if ra is None:
        return back(pa, a.offset) + rb
    if rb is None:
        return back(pb, b.offset) + ra
    return ra + rb


def act(w_path: Sequence[int], p: TreePoint) -> TreePoint:
    """Deck transformation given by the based loop ``w_path`` applied to ``p``."""
    g = p.graph
    if not p.path:
        return TreePoint.vertex(g, reduce_path(w_path))
    head = reduce_path(list(w_path) + list(p.path[:-1]))
    last = p.path[-1]
    if head and head[-1] == reverse(last):
        return TreePoint(g, tuple(head), g.half_length(last) - p.offset)
    return TreePoint(g, tuple(head) + (last,), p.offset)


def walk(p: TreePoint, direction: int, dist: float, choose) -> TreePoint:
    """Move ``dist`` from ``p`` along branch ``direction`` of :meth:`TreePoint.directions`.

    At vertices ``choose(k)`` picks one of the ``k`` non-backtracking
    continuations. A dead end stops the walk early.
    """
    g = p.graph
    h, room = p.directions()[direction]
    start = g.half_length(h) - room
    if p.is_vertex or direction == 1:
        head = list(p.path)
    else:
        head = list(p.path[:-1])
    while dist > room + OFFSET_TOL:
        nxt = g.followers(h)
        if not nxt:
            dist = room
            break
        dist -= room
        head = head[:-1] if head and head[-1] == reverse(h) else head + [h]
        h = nxt[choose(len(nxt))]
        start, room = 0.0, g.half_length(h)
    return _extend(g, head, h, start + min(dist, room))


def _extend(g: MetricGraph, head: list[int], h: int, off: float) -> TreePoint:
    if head and head[-1] == reverse(h):
        return TreePoint(g, tuple(head), g.half_length(h) - off)
    return TreePoint(g, tuple(head) + (h,), off)


# ----------------------------------------------------------------------
# Balls


@dataclass(frozen=True)
class BallSnapshot:
    radius: float
    segments: tuple[tuple[tuple[int, ...], tuple[float, float]], ...]
    measure: float
    frontier: tuple[TreePoint, ...]


def _check_radius(g: MetricGraph, r: float, budget: float) -> None:
    if r < 0:
        raise ValueError("radius must be nonnegative")
    m = ball_measure(g, r)
    if m > budget:
        raise BudgetExceeded(f"ball of radius {r:g} has measure {m:.4g} > budget {budget:.4g}")


def _key(x: float) -> float:
    return round(x, 11)


def _measure_fn(g: MetricGraph):
    @lru_cache(maxsize=None)
    def meas(h: int, eff: float, rem: float) -> float:
        if eff >= rem:
            return rem
        rest = rem - eff
        return eff + math.fsum(meas(f, g.half_length(f), _key(rest)) for f in g.followers(h))

    return meas


def _deep_recursion(g: MetricGraph, r: float):
    need = int(r / g.min_length) + 100
    return _RecursionLimit(max(sys.getrecursionlimit(), 4 * need))


class _RecursionLimit:
    def __init__(self, n):
        self.n = n

    def __enter__(self):
        self.old = sys.getrecursionlimit()
        sys.setrecursionlimit(self.n)

    def __exit__(self, *exc):
        sys.setrecursionlimit(self.old)


def ball_measure(g: MetricGraph, r: float, center: TreePoint | None = None) -> float:
    """One-dimensional Hausdorff measure of the closed r-ball (memoized)."""
    if r <= 0:
        return 0.0
    center = center or TreePoint.base(g)
    meas = _measure_fn(g)
    with _deep_recursion(g, r):
        return math.fsum(meas(h, room, float(r)) for h, room in center.directions())


def ball(
    g: MetricGraph,
    r: float,
    budget: float = DEFAULT_BUDGET,
    max_segments: int = DEFAULT_MAX_SEGMENTS,
) -> BallSnapshot:
    """Explicit ball about the base point, one segment per (partial) edge."""
    _check_radius(g, r, budget)
    segments: list = []
    frontier: list[TreePoint] = []
    layer = [((h,), float(r)) for h in g.out_at(g.base_index)] if r > 0 else []
    if r == 0:
        frontier.append(TreePoint.base(g))
    while layer:
        nxt = []
        for path, rem in layer:
            h = path[-1]
            length = g.half_length(h)
            if length >= rem - OFFSET_TOL:
                b = min(length, rem)
                segments.append((path, (0.0, b)))
                frontier.append(TreePoint(g, path, b))
                continue
            segments.append((path, (0.0, length)))
            for f in g.followers(h):
                nxt.append((path + (f,), rem - length))
            if len(segments) + len(nxt) > max_segments:
                raise BudgetExceeded(
                    f"ball enumeration exceeded {max_segments} segments",
                    depth=r - max(rm for _, rm in nxt),
                )
        layer = nxt
    segments.sort(key=lambda s: s[0])
    frontier.sort(key=lambda p: p.path)
    measure = math.fsum(b - a for _, (a, b) in segments)
    return BallSnapshot(float(r), tuple(segments), measure, tuple(frontier))


# ----------------------------------------------------------------------
# Covering numbers
#
# Bottom-up greedy: every subtree reports either an uncovered need (distance
# from its top to the farthest point still to be covered) or a spare reach
# (how far past its top the nearest placed center still covers). A center is
# dropped exactly where a need reaches s, i.e. at distance s above the
# deepest uncovered point.

_NEED, _HAVE = 0, 1


def _climb(state, length: float, s: float, marks: list | None = None):
    """Carry a subtree state up an edge of the given length."""
    kind, val = state
    count = 0
    pos = 0.0
    while True:
        rem = length - pos
        if kind == _HAVE:
            if val >= rem - EPS:
                return count, (_HAVE, max(val - rem, 0.0))
            pos += val
            kind, val = _NEED, 0.0
        else:
            if val + rem <= s + EPS:
                return count, (_NEED, val + rem)
            pos += s - val
            count += 1
            if marks is not None:
                marks.append(pos)
            kind, val = _HAVE, s


def _merge(states, s: float):
    """Combine the states arriving at one point; returns (placed, state)."""
    needs = [v for k, v in states if k == _NEED]
    haves = [v for k, v in states if k == _HAVE]
    if not states:
        needs = [0.0]
    if needs and (not haves or max(haves) < max(needs) - EPS):
        n = max(needs)
        if n >= s - EPS:
            return 1, (_HAVE, s)
        return 0, (_NEED, n)
    return 0, (_HAVE, max(haves))


def covering_number(
    g: MetricGraph,
    s: float,
    r: float,
    center: TreePoint | None = None,
    budget: float = DEFAULT_BUDGET,
) -> int:
    """Minimal number of closed s-balls (centers anywhere) covering B(center, r)."""
    if not (s > 0 and r > 0):
        raise ValueError("s and r must be positive")
    center = center or TreePoint.base(g)
    m = ball_measure(g, r, center)
    if m > budget:
        raise BudgetExceeded(f"ball of radius {r:g} has measure {m:.4g} > budget {budget:.4g}")

    @lru_cache(maxsize=None)
    def solve(h: int, eff: float, rem: float):
        if eff >= rem - EPS:
            return _climb((_NEED, 0.0), min(eff, rem), s)
        rest = rem - eff
        total = 0
        states = []
        for f in g.followers(h):
            c, st = solve(f, g.half_length(f), _key(rest))
            total += c
            states.append(st)
        placed, st = _merge(states, s)
        c, st = _climb(st, eff, s)
        return total + placed + c, st

    with _deep_recursion(g, r):
        total = 0
        states = []
        for h, room in center.directions():
            c, st = solve(h, room, float(r))
            total += c
            states.append(st)
    placed, st = _merge(states, s)
    if st[0] == _NEED:
        placed += 1
    return total + placed


def covering_centers(g: MetricGraph, s: float, r: float, **ball_kw) -> list[TreePoint]:
    """Explicit centers of a minimal s-covering of the base ball B(r)."""
    snap = ball(g, r, **ball_kw)
    children: dict[tuple, list] = {}
    for path, (_, b) in snap.segments:
        children.setdefault(path[:-1], []).append((path, b))
    centers: list[TreePoint] = []

    def at_vertex(path) -> TreePoint:
        return TreePoint.vertex(g, path)

    def solve(path, b):
        # state at the source of path[-1]; segment spans [0, b]
        kids = children.get(path, [])
        if b < g.half_length(path[-1]) - OFFSET_TOL or not kids:
            st = (_NEED, 0.0)
        else:
            st = _collect(path, kids)
        marks: list[float] = []
        _, st = _climb(st, b, s, marks)
        for x in marks:
            centers.append(TreePoint(g, path, b - x) if b - x > OFFSET_TOL else at_vertex(path[:-1]))
        return st

    def _collect(path, kids):
        states = [solve(p, b) for p, b in kids]
        placed, st = _merge(states, s)
        if placed:
            centers.append(at_vertex(path))
        return st

    with _deep_recursion(g, r):
        roots = children.get((), [])
        states = [solve(p, b) for p, b in roots]
    placed, st = _merge(states, s)
    if placed or st[0] == _NEED:
        centers.append(TreePoint.base(g))
    return centers


# ----------------------------------------------------------------------
# Packing numbers


def _sample_ball(g: MetricGraph, r: float, resolution: float, **ball_kw):
    """Grid samples of B(r) as (segment, offset) plus the explicit tree."""
    snap = ball(g, r, **ball_kw)
    seg_index = {path: i for i, (path, _) in enumerate(snap.segments)}
    seg_b = np.array([b for _, (_, b) in snap.segments])
    full = np.array([abs(b - g.half_length(p[-1])) <= OFFSET_TOL for p, (_, b) in snap.segments], dtype=bool)
    parent = np.array([seg_index.get(p[:-1], -1) for p, _ in snap.segments])
    seg_ids, offs = [np.array([-1])], [np.array([0.0])]
    for i, (_, (_, b)) in enumerate(snap.segments):
        k = np.arange(1, int(math.floor(b / resolution + 1e-9)) + 1)
        x = k * resolution
        if full[i] and (x.size == 0 or x[-1] < b - OFFSET_TOL):
            x = np.append(x, b)
        seg_ids.append(np.full(x.size, i))
        offs.append(x)
    return snap, seg_b, parent, np.concatenate(seg_ids), np.concatenate(offs)


def _node_depths(seg_b, parent):
    # segment order is lexicographic by path, so parents come first
    depth = np.zeros(len(seg_b))
    for i in range(len(seg_b)):
        depth[i] = seg_b[i] + (depth[parent[i]] if parent[i] >= 0 else 0.0)
    return depth


def _distances_from(seg, x, seg_b, parent, kids, sample_seg, sample_off):
    """Tree distances from point (seg, x) to all sample points.

    Nodes: -1 is the base, segment i's far end is node i.
    """
    n = len(seg_b)
    dnode = np.full(n + 1, np.inf)  # index n stands for the base
    key = lambda i: n if i < 0 else i
    stack = []
    if seg < 0:
        dnode[n] = 0.0
        stack.append(-1)
    else:
        dnode[seg] = seg_b[seg] - x
        dnode[key(parent[seg])] = x
        stack.extend([seg, parent[seg]])
    while stack:
        u = stack.pop()
        du = dnode[key(u)]
        nbrs = list(kids.get(u, ()))
        if u >= 0:
            nbrs.append(parent[u])
        for v in nbrs:
            w = seg_b[v] if v >= 0 and parent[v] == u else seg_b[u]
            if dnode[key(v)] > du + w + 1e-15:
                dnode[key(v)] = du + w
                stack.append(v)
    par = np.where(sample_seg >= 0, parent[np.maximum(sample_seg, 0)], -1)
    d_parent = dnode[np.where(par < 0, n, par)]
    d_end = dnode[np.where(sample_seg < 0, n, sample_seg)]
    seg_len = np.where(sample_seg >= 0, seg_b[np.maximum(sample_seg, 0)], 0.0)
    d = np.minimum(d_parent + sample_off, d_end + seg_len - sample_off)
    d = np.where(sample_seg < 0, dnode[n], d)
    if seg >= 0:
        same = sample_seg == seg
        d[same] = np.abs(sample_off[same] - x)
    return d


def packing_number(
    g: MetricGraph,
    s: float,
    r: float,
    resolution: float = 1e-3,
    return_points: bool = False,
    **ball_kw,
):
    """Size of a greedy maximal packing of B(r) by disjoint closed s/2-balls.

    Candidates are grid points of the ball at the given resolution; the
    greedy takes the farthest remaining candidate from the base and discards
    everything within distance s of it. On a tree this is a maximum packing
    of the candidate set.
    """
    if not (s > 0 and r > 0):
        raise ValueError("s and r must be positive")
    snap, seg_b, parent, sample_seg, sample_off = _sample_ball(g, r, resolution, **ball_kw)
    depth_end = _node_depths(seg_b, parent)
    depth = np.where(
        sample_seg >= 0,
        depth_end[np.maximum(sample_seg, 0)] - seg_b[np.maximum(sample_seg, 0)] + sample_off,
        0.0,
    )
    kids: dict[int, list[int]] = {}
    for i, p in enumerate(parent):
        kids.setdefault(int(p), []).append(i)
    # farthest first; ties broken by sample order
    order = np.lexsort((np.arange(depth.size), -np.round(depth, 9)))
    alive = np.ones(depth.size, dtype=bool)
    chosen = []
    for idx in order:
        if not alive[idx]:
            continue
        chosen.append(idx)
        d = _distances_from(int(sample_seg[idx]), float(sample_off[idx]), seg_b, parent, kids, sample_seg, sample_off)
        alive &= d > s + EPS
    if not return_points:
        return len(chosen)
    pts = []
    for idx in chosen:
        si = int(sample_seg[idx])
        pts.append(TreePoint.base(g) if si < 0 else TreePoint(g, snap.segments[si][0], float(sample_off[idx])))
    return len(chosen), pts

