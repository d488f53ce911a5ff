"""
Multi-tenant fair-share scheduler.

Jobs are ordered by normalised usage (FIFO within ties), split into
high/medium/low thirds, and packed into batches of co-running programs with
disjoint connected qubit allocations. Within a priority level, higher
two-qubit-gate ratio (PM) wins contested allocations.

Contains:
    - Job / Batch / Priority
    - fair_share_order, partition_priority_groups, depth_comparable
    - allocate_qubits, select_batch, update_usage, run_schedule
    - load_queue
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

from .circuit import Circuit, depth, priority_metric
from .errors import CapacityError
from .hardware import (
    Calibration,
    CouplingGraph,
    allocation_density,
    induced_degree,
    is_connected_subset,
    iter_connected_subsets,
    mean_connection_error,
)

DEFAULT_TOL = 0.2
ENUMERATION_CAP = 20_000


class Priority(IntEnum):
    HIGH = 0
    MEDIUM = 1
    LOW = 2


@dataclass(frozen=True)
class Job:
    id: str
    user: str
    circuit: Circuit
    usage_score: float
    arrival_index: int
    priority: Priority | None = None
    requested: tuple[int, ...] | None = None
    solo: bool = False

    def __post_init__(self):
        if self.usage_score < 0:
            raise ValueError(f"job {self.id}: negative usage score")
        if self.requested is not None:
            object.__setattr__(self, "requested", tuple(sorted(self.requested)))

    @property
    def num_qubits(self) -> int:
        return self.circuit.num_qubits

    @property
    def pm(self) -> float:
        return priority_metric(self.circuit)

    @property
    def depth(self) -> int:
        return depth(self.circuit.gates)


@dataclass(frozen=True)
class Batch:
    entries: tuple[tuple[str, tuple[int, ...]], ...]
    hardware: CouplingGraph = field(repr=False)

    @property
    def job_ids(self) -> list[str]:
        return [jid for jid, _ in self.entries]

    def allocation_of(self, job_id: str) -> tuple[int, ...] | None:
        for jid, alloc in self.entries:
            if jid == job_id:
                return alloc
        return None

    def to_dict(self) -> dict:
        return {"entries": [{"job": jid, "allocation": list(a)} for jid, a in self.entries],
                "hardware": self.hardware.name}


# ---------------------------------------------------------------- ordering

def fair_share_order(jobs: Iterable[Job]) -> list[Job]:
    """Least usage first; equal usage served oldest first."""
    return sorted(jobs, key=lambda j: (j.usage_score, j.arrival_index))


def group_sizes(n: int) -> tuple[int, int, int]:
    high = -(-n // 3)
    medium = -(-(n - high) // 2)
    return high, medium, n - high - medium


def partition_priority_groups(ordered: Sequence[Job]) -> tuple[list[Job], list[Job], list[Job]]:
    """Split a fair-share ordered queue into contiguous high/medium/low groups.

    Group sizes are front-loaded (high gets the ceiling), and each job is
    returned with its ``priority`` field set.
    """
    h, m, _ = group_sizes(len(ordered))
    tag = lambda js, p: [replace(j, priority=p) for j in js]
    return (tag(ordered[:h], Priority.HIGH),
            tag(ordered[h:h + m], Priority.MEDIUM),
            tag(ordered[h + m:], Priority.LOW))


def prepare_queue(jobs: Iterable[Job]) -> list[Job]:
    high, medium, low = partition_priority_groups(fair_share_order(jobs))
    return high + medium + low


def depth_comparable(a: Circuit, b: Circuit, tol: float = DEFAULT_TOL) -> bool:
    if tol < 0:
        raise ValueError("tol must be non-negative")
    da, db = depth(a.gates), depth(b.gates)
    return abs(da - db) <= tol * max(da, db)


# ---------------------------------------------------------------- allocation

def _greedy_grow(g: CouplingGraph, k: int, free: set[int], densest: bool) -> tuple[int, ...] | None:
    if len(free) < k:
        return None
    start = min(free, key=lambda q: (-induced_degree(g, q, free), q))
    chosen = {start}
    while len(chosen) < k:
        border = sorted({n for q in chosen for n in g.neighbors(q) if n in free} - chosen)
        if not border:
            return None
        sign = -1 if densest else 1
        chosen.add(min(border, key=lambda q: (sign * induced_degree(g, q, chosen), q)))
    return tuple(sorted(chosen))


def allocate_qubits(c: Circuit, g: CouplingGraph, available: Iterable[int], rank: Priority,
                    requested: Iterable[int] | None = None, cal: Calibration | None = None,
                    cap: int = ENUMERATION_CAP) -> tuple[int, ...] | None:
    """
    Pick a connected allocation of ``c.num_qubits`` qubits from ``available``.

    A well-formed ``requested`` set (right size, connected) is granted if
    all its qubits are free and otherwise yields None, so the job waits;
    malformed requests are ignored. Without a request, high and medium
    priority take the densest subset (most
    induced edges, then lowest mean connection error when ``cal`` is given,
    then lexicographically first); low priority takes the sparsest subset,
    lexicographically last among equals. Returns None when nothing fits.
    """
    k = c.num_qubits
    free = set(available)
    if k < 1 or k > len(free):
        return None
    if requested is not None:
        req = tuple(sorted(set(requested)))
        if len(req) == k and max(req) < g.num_qubits and is_connected_subset(g, req):
            return req if set(req) <= free else None

    cands = []
    for sub in iter_connected_subsets(g, k, free):
        cands.append(sub)
        if len(cands) > cap:
            return _greedy_grow(g, k, free, densest=rank is not Priority.LOW)
    if not cands:
        return None
    if rank is Priority.LOW:
        lo = min(allocation_density(g, s) for s in cands)
        return max(s for s in cands if allocation_density(g, s) == lo)

    def key(s):
        ce = mean_connection_error(g, cal, s) if cal is not None else 0.0
        return (-allocation_density(g, s), ce, s)

    return min(cands, key=key)


# ---------------------------------------------------------------- batching

def select_batch(queue: Sequence[Job], g: CouplingGraph, tol: float = DEFAULT_TOL,
                 cal: Calibration | None = None, cap: int = ENUMERATION_CAP) -> tuple[Batch, list[Job]]:
    """
    Build the next batch from a prepared (ordered and grouped) queue.

    The front job seeds the batch. Remaining jobs are tried by priority
    level, higher PM first within a level (queue order breaks PM ties), and
    admitted when their depth is comparable to the seed's and a connected
    allocation still fits in the free qubits. Solo jobs run alone.
    Returns the batch and the queue without the admitted jobs.
    """
    if not queue:
        return Batch((), g), []
    queue = list(queue)
    if any(j.priority is None for j in queue):
        queue = prepare_queue(queue)

    seed = queue[0]
    free = set(range(g.num_qubits))
    alloc = allocate_qubits(seed.circuit, g, free, seed.priority, seed.requested, cal, cap)
    if alloc is None:
        raise CapacityError(f"job {seed.id} ({seed.num_qubits} qubits) does not fit on {g.name or 'hardware'}")
    entries = [(seed.id, alloc)]
    free -= set(alloc)
    admitted = {seed.id}

    if not seed.solo:
        order = sorted(range(1, len(queue)), key=lambda i: (queue[i].priority, -queue[i].pm, i))
        for i in order:
            if not free:
                break
            job = queue[i]
            if job.solo or not depth_comparable(seed.circuit, job.circuit, tol):
                continue
            alloc = allocate_qubits(job.circuit, g, free, job.priority, job.requested, cal, cap)
            if alloc is None:
                continue
            entries.append((job.id, alloc))
            free -= set(alloc)
            admitted.add(job.id)

    rest = [j for j in queue if j.id not in admitted]
    return Batch(tuple(entries), g), rest


def job_cost(job: Job) -> float:
    return float(len(job.circuit.gates))


def update_usage(queue: Sequence[Job], executed: Sequence[Job],
                 cost: Callable[[Job], float] = job_cost) -> list[Job]:
    """
    Charge executed jobs to their users and renormalise pending users' usage.

    Each executing user gains cost/sum(batch costs); scores of users with
    pending jobs are then rescaled to sum to 1.
    """
    if not executed:
        return list(queue)
    usage: dict[str, float] = {}
    for j in (*queue, *executed):
        usage.setdefault(j.user, j.usage_score)
    costs = [cost(j) for j in executed]
    total = sum(costs)
    for j, c in zip(executed, costs):
        usage[j.user] += c / total if total > 0 else 1.0 / len(executed)
    pending = {j.user for j in queue}
    s = sum(usage[u] for u in pending)
    if s > 0:
        usage = {u: v / s for u, v in usage.items()}
    return [replace(j, usage_score=usage[j.user]) for j in queue]


def run_schedule(jobs: Iterable[Job], g: CouplingGraph, tol: float = DEFAULT_TOL,
                 cal: Calibration | None = None, track_usage: bool = True,
                 max_rounds: int | None = None) -> Iterator[tuple[Batch, list[Job]]]:
    """Yield (batch, executed jobs) until the queue drains."""
    queue = list(jobs)
    rounds = 0
    while queue and (max_rounds is None or rounds < max_rounds):
        prepared = prepare_queue(queue)
        batch, rest = select_batch(prepared, g, tol, cal)
        ids = set(batch.job_ids)
        executed = [j for j in prepared if j.id in ids]
        yield batch, executed
        queue = update_usage(rest, executed) if track_usage else rest
        rounds += 1


# ---------------------------------------------------------------- queue files

def load_queue(path: str | Path) -> list[Job]:
    """
    Read a queue file: ``{"jobs": [{id, user, usage_score, circuit, ...}]}``.

    ``circuit`` is either an inline circuit object or a path relative to the
    queue file. ``arrival_index`` defaults to list position.
    """
    path = Path(path)
    data = json.loads(path.read_text())
    jobs = []
    for i, entry in enumerate(data["jobs"]):
        circ = entry["circuit"]
        if isinstance(circ, str):
            circuit = Circuit.load(path.parent / circ)
        else:
            circuit = Circuit.from_dict(circ)
        req = entry.get("requested")
        jobs.append(Job(
            id=str(entry.get("id", f"job{i}")),
            user=str(entry.get("user", f"user{i}")),
            circuit=circuit,
            usage_score=float(entry.get("usage_score", 0.0)),
            arrival_index=int(entry.get("arrival_index", i)),
            requested=tuple(req) if req is not None else None,
            solo=bool(entry.get("solo", False)),
        ))
    return jobs
