"""
Device model: coupling graph, calibration data and the qubit quality score.

Contains:
    - CouplingGraph / Calibration / QualityWeights and the line5, grid20 presets
    - load_coupling: preset name or coupling-map JSON
    - qubit_quality / rank_qubits_by_quality
    - connected-allocation helpers shared by the scheduler and experiments:
      is_connected_subset, enumerate_connected_allocations, allocation_density
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import UndefinedQualityError

Edge = tuple[int, int]


def _norm(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CouplingGraph:
    num_qubits: int
    edges: frozenset[Edge]
    name: str = ""
    _adj: tuple[tuple[int, ...], ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop on qubit {a}")
            if not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise ValueError(f"edge ({a},{b}) out of range for {self.num_qubits} qubits")
            norm.add(_norm(a, b))
        object.__setattr__(self, "edges", frozenset(norm))
        adj: list[list[int]] = [[] for _ in range(self.num_qubits)]
        for a, b in norm:
            adj[a].append(b)
            adj[b].append(a)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(n)) for n in adj))

    @classmethod
    def from_edges(cls, num_qubits: int, edges: Iterable[Iterable[int]], name: str = "") -> CouplingGraph:
        return cls(num_qubits, frozenset(tuple(e) for e in edges), name)

    def neighbors(self, q: int) -> tuple[int, ...]:
        return self._adj[q]

    def has_edge(self, a: int, b: int) -> bool:
        return _norm(a, b) in self.edges

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def with_edge(self, a: int, b: int) -> CouplingGraph:
        return CouplingGraph(self.num_qubits, self.edges | {_norm(a, b)}, self.name)


@dataclass(frozen=True)
class Calibration:
    """Per-edge connection error and per-qubit readout error, both probabilities."""
    connection_error: dict[Edge, float]
    readout_error: tuple[float, ...]

    def __post_init__(self):
        ce = {_norm(*e): float(v) for e, v in self.connection_error.items()}
        object.__setattr__(self, "connection_error", ce)
        object.__setattr__(self, "readout_error", tuple(float(r) for r in self.readout_error))
        for v in (*ce.values(), *self.readout_error):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"error rate {v} outside [0, 1]")

    def check(self, g: CouplingGraph) -> None:
        missing = g.edges - self.connection_error.keys()
        if missing:
            raise ValueError(f"calibration missing edges {sorted(missing)}")
        if len(self.readout_error) != g.num_qubits:
            raise ValueError("readout_error length does not match qubit count")

    def edge_error(self, a: int, b: int) -> float:
        return self.connection_error[_norm(a, b)]


@dataclass(frozen=True)
class QualityWeights:
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3) < 0:
            raise ValueError("quality weights must be non-negative")


# ---------------------------------------------------------------- presets

def line5() -> CouplingGraph:
    """5-qubit T-shaped device: 0-1, 1-2, 1-3, 3-4."""
    return CouplingGraph.from_edges(5, [(0, 1), (1, 2), (1, 3), (3, 4)], "line5")


def grid(rows: int, cols: int, name: str = "") -> CouplingGraph:
    edges = []
    for r in range(rows):
        for c in range(cols):
            q = r * cols + c
            if c + 1 < cols:
                edges.append((q, q + 1))
            if r + 1 < rows:
                edges.append((q, q + cols))
    return CouplingGraph.from_edges(rows * cols, edges, name or f"grid{rows}x{cols}")


def grid20() -> CouplingGraph:
    return grid(4, 5, "grid20")


PRESETS = {"line5": line5, "grid20": grid20}


def synthetic_calibration(g: CouplingGraph, seed: int = 0) -> Calibration:
    """CE ~ U[0.005, 0.05] per edge, RE ~ U[0.01, 0.05] per qubit."""
    rng = np.random.default_rng(seed)
    edges = g.sorted_edges()
    ce = rng.uniform(0.005, 0.05, size=len(edges))
    re = rng.uniform(0.01, 0.05, size=g.num_qubits)
    return Calibration({e: float(v) for e, v in zip(edges, ce)}, tuple(float(v) for v in re))


def load_coupling(source: str | Path, calibration_seed: int = 0) -> tuple[CouplingGraph, Calibration]:
    """Load a preset name or a coupling-map JSON file.

    Files without calibration entries get the seeded synthetic calibration.
    """
    if str(source) in PRESETS:
        g = PRESETS[str(source)]()
        return g, synthetic_calibration(g, calibration_seed)
    data = json.loads(Path(source).read_text())
    g = CouplingGraph.from_edges(int(data["num_qubits"]), data["edges"], Path(source).stem)
    if "connection_error" not in data and "readout_error" not in data:
        return g, synthetic_calibration(g, calibration_seed)
    ce = {}
    for key, v in data.get("connection_error", {}).items():
        a, b = (int(x) for x in key.split("-"))
        ce[(a, b)] = v
    cal = Calibration(ce, tuple(data.get("readout_error", ())))
    cal.check(g)
    return g, cal


def coupling_to_dict(g: CouplingGraph, cal: Calibration | None = None) -> dict:
    out: dict = {"num_qubits": g.num_qubits, "edges": [list(e) for e in g.sorted_edges()]}
    if cal is not None:
        out["connection_error"] = {f"{a}-{b}": cal.connection_error[(a, b)] for a, b in g.sorted_edges()}
        out["readout_error"] = list(cal.readout_error)
    return out


# ---------------------------------------------------------------- quality metric

def degree(g: CouplingGraph, q: int) -> int:
    if not 0 <= q < g.num_qubits:
        raise ValueError(f"qubit {q} out of range")
    return len(g.neighbors(q))


def qubit_quality(g: CouplingGraph, cal: Calibration, q: int, w: QualityWeights = QualityWeights(),
                  ce_aggregate: str = "mean") -> float:
    """Q = w1/DC + w2*CE_q + w3*RE_q.

    CE_q aggregates the connection error of the qubit's incident edges
    (``"mean"`` or ``"max"``); isolated qubits contribute CE_q = 0.
    """
    dc = degree(g, q)
    if dc == 0 and w.w1 > 0:
        raise UndefinedQualityError(f"undefined 1/DC for isolated qubit {q}")
    errs = [cal.edge_error(q, n) for n in g.neighbors(q)]
    if not errs:
        ce = 0.0
    elif ce_aggregate == "mean":
        ce = sum(errs) / len(errs)
    elif ce_aggregate == "max":
        ce = max(errs)
    else:
        raise ValueError(f"unknown ce_aggregate {ce_aggregate!r}")
    inv_dc = w.w1 / dc if w.w1 > 0 else 0.0
    return inv_dc + ce * w.w2 + cal.readout_error[q] * w.w3


def rank_qubits_by_quality(g: CouplingGraph, cal: Calibration, w: QualityWeights = QualityWeights(),
                           direction: str = "ascending", ce_aggregate: str = "mean") -> list[int]:
    """All qubits ordered by Q; ties always go to the smaller index."""
    if direction not in ("ascending", "descending"):
        raise ValueError(f"direction must be 'ascending' or 'descending', got {direction!r}")
    scores = [qubit_quality(g, cal, q, w, ce_aggregate) for q in range(g.num_qubits)]
    sign = 1.0 if direction == "ascending" else -1.0
    return sorted(range(g.num_qubits), key=lambda q: (sign * scores[q], q))


# ---------------------------------------------------------------- allocations

def is_connected_subset(g: CouplingGraph, subset: Iterable[int]) -> bool:
    nodes = set(subset)
    if not nodes:
        raise ValueError("empty subset")
    for q in nodes:
        if not 0 <= q < g.num_qubits:
            raise ValueError(f"qubit {q} out of range")
    start = next(iter(nodes))
    seen = {start}
    todo = deque([start])
    while todo:
        q = todo.popleft()
        for n in g.neighbors(q):
            if n in nodes and n not in seen:
                seen.add(n)
                todo.append(n)
    return len(seen) == len(nodes)


def iter_connected_subsets(g: CouplingGraph, k: int, available: Iterable[int] | None = None) -> Iterator[tuple[int, ...]]:
    """Yield every connected k-subset of ``available`` exactly once (unordered).

    ESU-style growth: each subset is generated from its smallest member,
    extending only with vertices larger than that root that are exclusive
    neighbours of the newest addition.
    """
    if k < 1:
        return
    avail = set(range(g.num_qubits)) if available is None else set(available)
    nbrs = {q: [n for n in g.neighbors(q) if n in avail] for q in avail}

    def extend(sub: list[int], ext: set[int], border: set[int], root: int):
        if len(sub) == k:
            yield tuple(sorted(sub))
            return
        ext = set(ext)
        while ext:
            w = ext.pop()
            new_border = set(border)
            new_ext = set(ext)
            for u in nbrs[w]:
                if u > root and u not in border:
                    new_ext.add(u)
                    new_border.add(u)
            new_border.add(w)
            sub.append(w)
            yield from extend(sub, new_ext, new_border, root)
            sub.pop()

    for v in sorted(avail):
        ext = {u for u in nbrs[v] if u > v}
        yield from extend([v], ext, {v} | set(nbrs[v]), v)


def enumerate_connected_allocations(g: CouplingGraph, k: int, available: Iterable[int] | None = None) -> list[tuple[int, ...]]:
    """All connected k-subsets of ``available``, lexicographically sorted."""
    return sorted(iter_connected_subsets(g, k, available))


def allocation_density(g: CouplingGraph, subset: Iterable[int]) -> int:
    """Edge count of the induced subgraph."""
    nodes = sorted(set(subset))
    return sum(1 for a, b in combinations(nodes, 2) if g.has_edge(a, b))


def mean_connection_error(g: CouplingGraph, cal: Calibration, subset: Iterable[int]) -> float:
    nodes = sorted(set(subset))
    errs = [cal.edge_error(a, b) for a, b in combinations(nodes, 2) if g.has_edge(a, b)]
    return sum(errs) / len(errs) if errs else 0.0


def induced_degree(g: CouplingGraph, q: int, subset: Iterable[int]) -> int:
    s = set(subset)
    return sum(1 for n in g.neighbors(q) if n in s)


def induced_distances(g: CouplingGraph, subset: Iterable[int]) -> dict[int, dict[int, int]]:
    """All-pairs hop distances inside the induced subgraph (BFS from each node)."""
    nodes = set(subset)
    dist: dict[int, dict[int, int]] = {}
    for s in nodes:
        d = {s: 0}
        todo = deque([s])
        while todo:
            q = todo.popleft()
            for n in g.neighbors(q):
                if n in nodes and n not in d:
                    d[n] = d[q] + 1
                    todo.append(n)
        dist[s] = d
    return dist
