"""Finite metric graphs: data model, JSON ingestion, rescaling and the
spanning-tree presentation of the fundamental group.

Half-edges are integers: edge ``e`` traversed from ``u`` to ``v`` is ``2*e``,
traversed backwards it is ``2*e + 1``. The reverse of ``h`` is ``h ^ 1``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

LENGTH_TOL = 1e-12


class GraphError(ValueError):
    """Invalid graph content. ``location`` points at the offending entry."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass(frozen=True)
class Edge:
    u: Hashable
    v: Hashable
    length: float
    translation: tuple[int, int] | None = None

    @property
    def is_loop(self) -> bool:
        return self.u == self.v


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple
    edges: tuple[Edge, ...]
    base: Hashable = None
    _index: dict = field(init=False, repr=False, compare=False)
    _out: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vertices = tuple(self.vertices)
        edges = tuple(e if isinstance(e, Edge) else Edge(*e) for e in self.edges)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", edges)
        if not vertices:
            raise GraphError("graph has no vertices")
        if len(set(vertices)) != len(vertices):
            raise GraphError("duplicate vertex labels")
        index = {v: i for i, v in enumerate(vertices)}
        if self.base is None:
            object.__setattr__(self, "base", vertices[0])
        elif self.base not in index:
            raise GraphError(f"unknown base vertex {self.base!r}", "base")
        for i, e in enumerate(edges):
            loc = f"edges[{i}]"
            for end in (e.u, e.v):
                if end not in index:
                    raise GraphError(f"unknown vertex {end!r}", loc)
            if not (isinstance(e.length, (int, float)) and math.isfinite(e.length)):
                raise GraphError("length must be a finite number", loc)
            if e.length <= 0:
                raise GraphError("nonpositive length", loc)
        object.__setattr__(self, "_index", index)
        out = [[] for _ in vertices]
        for i, e in enumerate(edges):
            out[index[e.u]].append(2 * i)
            out[index[e.v]].append(2 * i + 1)
        object.__setattr__(self, "_out", tuple(tuple(o) for o in out))
        if not self._connected():
            raise GraphError("graph is disconnected")

    def _connected(self) -> bool:
        seen = {self._index[self.base]}
        queue = deque(seen)
        while queue:
            i = queue.popleft()
            for h in self._out[i]:
                j = self.target_index(h)
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
        return len(seen) == len(self.vertices)

    # -- basic quantities ------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_half_edges(self) -> int:
        return 2 * len(self.edges)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([e.length for e in self.edges], dtype=float)

    @property
    def total_length(self) -> float:
        return float(sum(e.length for e in self.edges))

    @property
    def min_length(self) -> float:
        return min(e.length for e in self.edges)

    @property
    def max_length(self) -> float:
        return max(e.length for e in self.edges)

    def degree(self, v) -> int:
        return len(self._out[self._index[v]])

    @property
    def degrees(self) -> list[int]:
        return [len(o) for o in self._out]

    @property
    def max_degree(self) -> int:
        return max(self.degrees)

    @property
    def rank(self) -> int:
        """Rank of the (free) fundamental group, E - V + 1."""
        return self.n_edges - self.n_vertices + 1

    def vertex_index(self, v) -> int:
        return self._index[v]

    @property
    def base_index(self) -> int:
        return self._index[self.base]

    # -- half-edges ------------------------------------------------------
    def source_index(self, h: int) -> int:
        e = self.edges[h >> 1]
        return self._index[e.v if h & 1 else e.u]

    def target_index(self, h: int) -> int:
        e = self.edges[h >> 1]
        return self._index[e.u if h & 1 else e.v]

    def source(self, h: int):
        return self.vertices[self.source_index(h)]

    def target(self, h: int):
        return self.vertices[self.target_index(h)]

    def half_length(self, h: int) -> float:
        return self.edges[h >> 1].length

    def out_half_edges(self, v) -> tuple[int, ...]:
        return self._out[self._index[v]]

    def out_at(self, i: int) -> tuple[int, ...]:
        return self._out[i]

    def followers(self, h: int) -> tuple[int, ...]:
        """Half-edges that may follow ``h`` in a non-backtracking path."""
        r = reverse(h)
        return tuple(f for f in self._out[self.target_index(h)] if f != r)

    def half_translation(self, h: int) -> tuple[int, int]:
        t = self.edges[h >> 1].translation or (0, 0)
        return (-t[0], -t[1]) if h & 1 else (t[0], t[1])

    # -- transforms ------------------------------------------------------
    def with_lengths(self, lengths: Sequence[float]) -> "MetricGraph":
        lengths = [float(x) for x in lengths]
        if len(lengths) != self.n_edges:
            raise GraphError(f"expected {self.n_edges} lengths, got {len(lengths)}")
        edges = tuple(Edge(e.u, e.v, ell, e.translation) for e, ell in zip(self.edges, lengths))
        return MetricGraph(self.vertices, edges, self.base)

    def to_dict(self) -> dict:
        out = {"vertices": list(self.vertices), "edges": [], "base": self.base}
        for e in self.edges:
            d = {"u": e.u, "v": e.v, "length": e.length}
            if e.translation is not None:
                d["translation"] = list(e.translation)
            out["edges"].append(d)
        return out

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def reverse(h: int) -> int:
    return h ^ 1


# ----------------------------------------------------------------------
# Parsing


def parse_graph(text: str) -> MetricGraph:
    """Build a validated :class:`MetricGraph` from graph-file JSON text."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"malformed JSON: {exc.msg}", f"line {exc.lineno} col {exc.colno}") from None
    return graph_from_dict(data)


def graph_from_dict(data) -> MetricGraph:
    if not isinstance(data, dict):
        raise GraphError("top level must be an object")
    vertices = data.get("vertices")
    if not isinstance(vertices, list) or not vertices:
        raise GraphError("missing or empty 'vertices' list", "vertices")
    for i, v in enumerate(vertices):
        if not isinstance(v, (str, int)) or isinstance(v, bool):
            raise GraphError("vertex labels must be strings or integers", f"vertices[{i}]")
    raw_edges = data.get("edges")
    if not isinstance(raw_edges, list):
        raise GraphError("missing 'edges' list", "edges")
    edges = []
    for i, raw in enumerate(raw_edges):
        loc = f"edges[{i}]"
        if not isinstance(raw, dict):
            raise GraphError("edge must be an object", loc)
        for key in ("u", "v", "length"):
            if key not in raw:
                raise GraphError(f"missing field '{key}'", loc)
        length = raw["length"]
        if isinstance(length, bool) or not isinstance(length, (int, float)):
            raise GraphError("length must be a number", loc)
        translation = raw.get("translation")
        if translation is not None:
            if (
                not isinstance(translation, list)
                or len(translation) != 2
                or not all(isinstance(t, int) and not isinstance(t, bool) for t in translation)
            ):
                raise GraphError("translation must be a pair of integers", loc)
            translation = (translation[0], translation[1])
        edges.append(Edge(raw["u"], raw["v"], float(length), translation))
    return MetricGraph(tuple(vertices), tuple(edges), data.get("base"))


def load_graph(path) -> MetricGraph:
    with open(path, encoding="utf-8") as f:
        return parse_graph(f.read())


def scale_metric(g: MetricGraph, alpha: float) -> MetricGraph:
    if not alpha > 0:
        raise GraphError(f"scale factor must be positive, got {alpha}")
    return g.with_lengths([alpha * e.length for e in g.edges])


# ----------------------------------------------------------------------
# Normalized lengths


@dataclass(frozen=True)
class NormalizedLengths:
    """Positive edge lengths summing to one."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(x) for x in self.values)
        object.__setattr__(self, "values", vals)
        if not vals or min(vals) <= 0:
            raise GraphError("normalized lengths must be strictly positive")
        if abs(math.fsum(vals) - 1.0) > LENGTH_TOL:
            raise GraphError(f"normalized lengths sum to {math.fsum(vals)!r}, not 1")

    @classmethod
    def normalize(cls, lengths: Iterable[float]) -> "NormalizedLengths":
        arr = np.asarray(list(lengths), dtype=float)
        arr = arr / math.fsum(arr)
        # one correction pass keeps |sum - 1| at the rounding floor
        arr[np.argmax(arr)] += 1.0 - math.fsum(arr)
        return cls(tuple(arr))

    @classmethod
    def uniform(cls, n: int) -> "NormalizedLengths":
        return cls.normalize([1.0] * n)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def __len__(self):
        return len(self.values)


# ----------------------------------------------------------------------
# Fundamental group presentation


def spanning_tree(g: MetricGraph) -> dict[int, int]:
    """BFS tree from the base vertex, ties broken by edge file order.

    Returns ``{vertex_index: half_edge_into_it}``; the base has no entry.
    """
    parent: dict[int, int] = {}
    seen = {g.base_index}
    queue = deque([g.base_index])
    while queue:
        i = queue.popleft()
        for h in sorted(g.out_at(i), key=lambda h: (h >> 1, h & 1)):
            j = g.target_index(h)
            if j not in seen:
                seen.add(j)
                parent[j] = h
                queue.append(j)
    return parent


def tree_path(g: MetricGraph, parent: dict[int, int], i: int) -> list[int]:
    """Half-edges of the spanning-tree path from the base to vertex ``i``."""
    path = []
    while i != g.base_index:
        h = parent[i]
        path.append(h)
        i = g.source_index(h)
    return path[::-1]


def generators(g: MetricGraph) -> list[tuple[int, ...]]:
    """Based closed half-edge paths, one per edge outside the spanning tree.

    The i-th loop is the generator named ``"abc..."[i]`` in word syntax.
    """
    parent = spanning_tree(g)
    tree_edges = {h >> 1 for h in parent.values()}
    loops = []
    for e in range(g.n_edges):
        if e in tree_edges:
            continue
        h = 2 * e
        to_u = tree_path(g, parent, g.source_index(h))
        from_v = [reverse(x) for x in reversed(tree_path(g, parent, g.target_index(h)))]
        loops.append(tuple(to_u + [h] + from_v))
    return loops


def generator_names(g: MetricGraph) -> list[str]:
    n = g.rank
    if n > 26:
        raise GraphError(f"word syntax supports at most 26 generators, graph has {n}")
    return [chr(ord("a") + i) for i in range(n)]


# ----------------------------------------------------------------------
# Standard test topologies


def complete_graph(n: int, length: float = 1.0) -> MetricGraph:
    vs = tuple(f"v{i}" for i in range(n))
    es = tuple(Edge(vs[i], vs[j], length) for i in range(n) for j in range(i + 1, n))
    return MetricGraph(vs, es)


def k4(length: float = 1.0) -> MetricGraph:
    return complete_graph(4, length)


def rose(*lengths: float) -> MetricGraph:
    """One vertex with a loop of each given length."""
    return MetricGraph(("o",), tuple(Edge("o", "o", float(x)) for x in lengths))


def cycle(n: int, length: float = 1.0) -> MetricGraph:
    vs = tuple(f"c{i}" for i in range(n))
    if n == 1:
        return MetricGraph(vs, (Edge(vs[0], vs[0], length),))
    return MetricGraph(vs, tuple(Edge(vs[i], vs[(i + 1) % n], length) for i in range(n)))


def complete_bipartite(m: int, n: int, length: float = 1.0) -> MetricGraph:
    left = [f"l{i}" for i in range(m)]
    right = [f"r{j}" for j in range(n)]
    es = tuple(Edge(a, b, length) for a in left for b in right)
    return MetricGraph(tuple(left + right), es)


def theta(*lengths: float) -> MetricGraph:
    """Two vertices joined by parallel edges of the given lengths."""
    return MetricGraph(("p", "q"), tuple(Edge("p", "q", float(x)) for x in lengths))
