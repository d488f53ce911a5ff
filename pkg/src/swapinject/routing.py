"""
SWAP routing onto an allocated region of the coupling graph.

Contains:
    - Layout / RoutingResult
    - initial_layout: degree-matching placement
    - route: front-layer SWAP heuristic with lookahead
    - optimal_route: exhaustive BFS oracle for small instances
    - swap_overhead: percent CNOT increase against a baseline
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .circuit import Circuit, Gate, GateKind, decompose_swaps, depth, gate_stats, swap
from .errors import CapacityError, OracleSizeError, RoutingInfeasibleError, UndefinedOverheadError
from .hardware import CouplingGraph, induced_degree, induced_distances, is_connected_subset

LOOKAHEAD_SIZE = 20
LOOKAHEAD_WEIGHT = 0.5


@dataclass(frozen=True)
class Layout:
    """Logical -> physical placement; ``mapping[i]`` is the physical home of logical qubit i."""
    mapping: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "mapping", tuple(int(p) for p in self.mapping))
        if len(set(self.mapping)) != len(self.mapping):
            raise ValueError(f"layout is not injective: {self.mapping}")

    def __getitem__(self, logical: int) -> int:
        return self.mapping[logical]

    def __len__(self):
        return len(self.mapping)

    def as_dict(self) -> dict[int, int]:
        return dict(enumerate(self.mapping))

    @classmethod
    def from_dict(cls, d: dict[int, int]) -> Layout:
        return cls(tuple(d[i] for i in range(len(d))))


@dataclass(frozen=True)
class RoutingResult:
    routed: Circuit
    initial_layout: Layout
    final_layout: Layout
    swaps_inserted: int
    cnot_after_decomposition: int
    depth_after: int

    def to_dict(self) -> dict:
        return {
            "routed": self.routed.to_dict(),
            "initial_layout": list(self.initial_layout.mapping),
            "final_layout": list(self.final_layout.mapping),
            "swaps_inserted": self.swaps_inserted,
            "cnot_after_decomposition": self.cnot_after_decomposition,
            "depth_after": self.depth_after,
        }


def _check_allocation(c: Circuit, g: CouplingGraph, allocation: Iterable[int]) -> list[int]:
    alloc = sorted(set(allocation))
    if len(alloc) < c.num_qubits:
        raise CapacityError(f"allocation of {len(alloc)} qubits cannot hold {c.num_qubits} logical qubits")
    if alloc and not is_connected_subset(g, alloc):
        raise RoutingInfeasibleError(f"allocation {alloc} is not connected")
    return alloc


def initial_layout(c: Circuit, g: CouplingGraph, allocation: Iterable[int]) -> Layout:
    """Busiest logical qubits go to the best-connected allocated qubits (ties by index)."""
    alloc = _check_allocation(c, g, allocation)
    busy = [0] * c.num_qubits
    for gate in c.gates:
        if gate.is_two_qubit:
            for q in gate.qubits:
                busy[q] += 1
    logical = sorted(range(c.num_qubits), key=lambda q: (-busy[q], q))
    physical = sorted(alloc, key=lambda p: (-induced_degree(g, p, alloc), p))
    mapping = [0] * c.num_qubits
    for lq, pq in zip(logical, physical):
        mapping[lq] = pq
    return Layout(tuple(mapping))


def _check_layout(c: Circuit, alloc: list[int], layout: Layout) -> None:
    if len(layout) != c.num_qubits:
        raise ValueError(f"layout covers {len(layout)} qubits, circuit has {c.num_qubits}")
    stray = set(layout.mapping) - set(alloc)
    if stray:
        raise ValueError(f"layout uses qubits {sorted(stray)} outside the allocation")


class _Dag:
    """Per-wire gate queues; a gate is ready once it heads the queue of every operand."""

    def __init__(self, c: Circuit):
        self.gates = c.gates
        self.wires: list[list[int]] = [[] for _ in range(c.num_qubits)]
        for i, gate in enumerate(c.gates):
            for q in gate.qubits:
                self.wires[q].append(i)
        self.ptr = [0] * c.num_qubits
        self.done = [False] * len(c.gates)
        self.remaining = len(c.gates)

    def head(self, q: int) -> int | None:
        w = self.wires[q]
        return w[self.ptr[q]] if self.ptr[q] < len(w) else None

    def ready(self) -> list[int]:
        out = set()
        for q in range(len(self.wires)):
            h = self.head(q)
            if h is not None and all(self.head(o) == h for o in self.gates[h].qubits):
                out.add(h)
        return sorted(out)

    def pop(self, i: int) -> None:
        for q in self.gates[i].qubits:
            self.ptr[q] += 1
        self.done[i] = True
        self.remaining -= 1


def route(c: Circuit, g: CouplingGraph, allocation: Iterable[int], layout: Layout, seed: int = 0,
          lookahead: int = LOOKAHEAD_SIZE, lookahead_weight: float = LOOKAHEAD_WEIGHT) -> RoutingResult:
    """
    Insert SWAPs so every two-qubit gate acts on coupled qubits of ``allocation``.

    Executable gates are flushed eagerly. When the front layer is blocked,
    every allocation-internal edge touching a blocked operand is scored by
    the summed distance reduction over the front layer plus
    ``lookahead_weight`` times the reduction over the next ``lookahead``
    two-qubit gates. The best score wins, ties broken by the seeded RNG.
    The pair swapped last is excluded from the next choice. If many SWAPs
    pass without any gate executing, the oldest blocked gate is walked
    along a shortest path so routing always terminates.
    """
    alloc = _check_allocation(c, g, allocation)
    _check_layout(c, alloc, layout)
    rng = np.random.default_rng(seed)
    dist = induced_distances(g, alloc)
    alloc_set = set(alloc)
    nbrs = {p: [n for n in g.neighbors(p) if n in alloc_set] for p in alloc}

    l2p = list(layout.mapping)
    dag = _Dag(c)
    out: list[Gate] = []
    swaps = 0
    last_swap: tuple[int, int] | None = None
    stall = 0
    stall_limit = max(8, 2 * len(alloc))
    lq_at = {p: lq for lq, p in enumerate(l2p)}

    def apply_swap(a: int, b: int):
        nonlocal swaps, last_swap, stall
        la = lq_at.get(a)
        lb = lq_at.get(b)
        if la is not None:
            l2p[la] = b
        if lb is not None:
            l2p[lb] = a
        lq_at.pop(a, None)
        lq_at.pop(b, None)
        if la is not None:
            lq_at[b] = la
        if lb is not None:
            lq_at[a] = lb
        out.append(swap(a, b))
        swaps += 1
        last_swap = (a, b) if a < b else (b, a)
        stall += 1

    while dag.remaining:
        progressed = True
        while progressed:
            progressed = False
            for i in dag.ready():
                gate = dag.gates[i]
                phys = [l2p[q] for q in gate.qubits]
                if gate.is_two_qubit and dist[phys[0]][phys[1]] != 1:
                    continue
                out.append(Gate(gate.kind, tuple(phys), gate.label))
                dag.pop(i)
                progressed = True
                stall = 0
        if not dag.remaining:
            break

        front = dag.ready()
        if stall >= stall_limit:
            a, b = (l2p[q] for q in dag.gates[front[0]].qubits)
            # walk a toward b along a shortest path
            while dist[a][b] > 1:
                step = min(n for n in nbrs[a] if dist[n][b] == dist[a][b] - 1)
                apply_swap(a, step)
                a = step
            stall = 0
            continue

        front_set = set(front)
        look: list[int] = []
        for i, gate in enumerate(dag.gates):
            if len(look) >= lookahead:
                break
            if gate.is_two_qubit and not dag.done[i] and i not in front_set:
                look.append(i)

        cands = set()
        for i in front:
            for q in dag.gates[i].qubits:
                p = l2p[q]
                for n in nbrs[p]:
                    cands.add((p, n) if p < n else (n, p))
        if last_swap in cands and len(cands) > 1:
            cands.discard(last_swap)
        cands = sorted(cands)

        def total(gates_idx, a, b):
            s = 0
            for i in gates_idx:
                x, y = (l2p[q] for q in dag.gates[i].qubits)
                x2 = b if x == a else a if x == b else x
                y2 = b if y == a else a if y == b else y
                s += dist[x][y] - dist[x2][y2]
            return s

        n_look = max(len(look), 1)
        scores = [total(front, a, b) / len(front) + lookahead_weight * total(look, a, b) / n_look
                  for a, b in cands]
        best = max(scores)
        ties = [cand for cand, s in zip(cands, scores) if s == best]
        a, b = ties[int(rng.integers(len(ties)))] if len(ties) > 1 else ties[0]
        apply_swap(a, b)

    routed = Circuit(g.num_qubits, tuple(out))
    lowered = decompose_swaps(routed)
    return RoutingResult(
        routed=routed,
        initial_layout=layout,
        final_layout=Layout(tuple(l2p)),
        swaps_inserted=swaps,
        cnot_after_decomposition=gate_stats(lowered).cnot,
        depth_after=depth(lowered.gates),
    )


def route_auto(c: Circuit, g: CouplingGraph, allocation: Iterable[int], seed: int = 0) -> RoutingResult:
    """``route`` with the default ``initial_layout``."""
    return route(c, g, allocation, initial_layout(c, g, allocation), seed)


def is_legal(routed: Circuit, g: CouplingGraph, allocation: Iterable[int]) -> bool:
    """Every gate stays inside the allocation and every two-qubit gate sits on an edge."""
    alloc = set(allocation)
    for gate in routed.gates:
        if not set(gate.qubits) <= alloc:
            return False
        if gate.is_two_qubit and not g.has_edge(*gate.qubits):
            return False
    return True


def optimal_route(c: Circuit, g: CouplingGraph, allocation: Iterable[int], layout: Layout) -> int:
    """
    Minimum SWAP count over all schedules, by breadth-first search.

    A state is the placement of logical qubits on the allocation plus the
    per-wire progress through the two-qubit gates. Executable gates are
    always flushed (doing so never hurts), so each BFS edge is one SWAP.
    """
    if c.num_qubits > 5 or len(set(allocation)) > 6:
        raise OracleSizeError("optimal_route is limited to 5 logical qubits on 6 physical qubits")
    alloc = _check_allocation(c, g, allocation)
    _check_layout(c, alloc, layout)
    edges = [(a, b) for a in alloc for b in alloc if a < b and g.has_edge(a, b)]

    two_q = [gate.qubits for gate in c.gates if gate.is_two_qubit]
    wires: list[list[int]] = [[] for _ in range(c.num_qubits)]
    for i, (a, b) in enumerate(two_q):
        wires[a].append(i)
        wires[b].append(i)

    def flush(l2p: tuple[int, ...], ptr: tuple[int, ...]) -> tuple[int, ...]:
        ptr = list(ptr)
        moved = True
        while moved:
            moved = False
            for q in range(c.num_qubits):
                if ptr[q] >= len(wires[q]):
                    continue
                i = wires[q][ptr[q]]
                a, b = two_q[i]
                if ptr[a] < len(wires[a]) and ptr[b] < len(wires[b]) \
                        and wires[a][ptr[a]] == i and wires[b][ptr[b]] == i \
                        and g.has_edge(l2p[a], l2p[b]):
                    ptr[a] += 1
                    ptr[b] += 1
                    moved = True
        return tuple(ptr)

    goal = tuple(len(w) for w in wires)
    start = (tuple(layout.mapping), flush(tuple(layout.mapping), (0,) * c.num_qubits))
    if start[1] == goal:
        return 0
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        (l2p, ptr), d = frontier.popleft()
        for a, b in edges:
            nl = tuple(b if p == a else a if p == b else p for p in l2p)
            np_ = flush(nl, ptr)
            if np_ == goal:
                return d + 1
            state = (nl, np_)
            if state not in seen:
                seen.add(state)
                frontier.append((state, d + 1))
    raise RoutingInfeasibleError("no SWAP schedule satisfies the circuit")


def swap_overhead(test_cnots: int, baseline_cnots: int) -> float:
    """Percent increase of ``test_cnots`` over ``baseline_cnots``."""
    if baseline_cnots < 1:
        raise UndefinedOverheadError("overhead undefined for a zero-CNOT baseline")
    return 100.0 * (test_cnots - baseline_cnots) / baseline_cnots
