"""
SWAP-injection attack construction and impact measurement.

The attacker ranks qubits by the quality score, then floods the fair-share
queue with high-PM jobs across all three priority tiers that request the
chosen qubits, so whatever position the victim holds, an attacker job tends
to be batched ahead of it and to sit on the well-connected region.

Contains:
    - select_target_qubits, target_request_sets, generate_kitchen_sink_jobs, plan_attack
    - measure_attack_impact and its ImpactReport
    - isolate_users
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from statistics import median
from typing import Iterable, Sequence

import numpy as np

from .circuit import Circuit, ONE_QUBIT_LABELS, cnot, one_qubit, priority_metric
from .hardware import Calibration, CouplingGraph, QualityWeights, is_connected_subset, rank_qubits_by_quality
from .routing import route_auto, swap_overhead
from .scheduler import DEFAULT_TOL, Job, run_schedule

FLOOD_PM_FLOOR = 0.8
TIER_USAGE = (0.0, 0.01, 0.02)


@dataclass(frozen=True)
class AttackPlan:
    target_qubits: tuple[int, ...]
    flood_jobs: tuple[Job, ...]
    weights: QualityWeights = QualityWeights()
    direction: str = "ascending"

    def __post_init__(self):
        if not self.target_qubits:
            raise ValueError("attack plan needs at least one target qubit")

    @property
    def users(self) -> set[str]:
        return {j.user for j in self.flood_jobs}


def default_target_count(g: CouplingGraph) -> int:
    return math.ceil(g.num_qubits / 10)


def select_target_qubits(g: CouplingGraph, cal: Calibration, w: QualityWeights = QualityWeights(),
                         k: int | None = None, direction: str = "ascending") -> tuple[int, ...]:
    """The first ``k`` qubits of the quality ranking (default ceil(n/10))."""
    k = default_target_count(g) if k is None else k
    if not 1 <= k < g.num_qubits:
        raise ValueError(f"k must be in [1, {g.num_qubits - 1}], got {k}")
    return tuple(sorted(rank_qubits_by_quality(g, cal, w, direction)[:k]))


def _flood_circuit(n: int, target_depth: int, rng: np.random.Generator) -> Circuit:
    """Random circuit of roughly ``target_depth`` layers, at least 80% CNOTs when n >= 2."""
    while True:
        gates = []
        level = [0] * n
        while max(level) < target_depth:
            if n >= 2 and rng.random() < 0.9:
                a, b = (int(q) for q in rng.choice(n, size=2, replace=False))
                gates.append(cnot(a, b))
                level[a] = level[b] = max(level[a], level[b]) + 1
            else:
                q = int(rng.integers(n))
                gates.append(one_qubit(ONE_QUBIT_LABELS[int(rng.integers(len(ONE_QUBIT_LABELS)))], q))
                level[q] += 1
        c = Circuit(n, tuple(gates))
        if n < 2 or priority_metric(c) >= FLOOD_PM_FLOOR:
            return c


def target_request_sets(g: CouplingGraph, targets: Sequence[int],
                        pair_isolated: bool | None = None) -> list[tuple[int, ...]]:
    """
    Qubit sets for flood jobs to request, largest first then lexicographic.

    These are the connected subsets of the targets with at least two
    qubits. With ``pair_isolated`` a target with no adjacent target is
    paired with its best-connected neighbour, since a one-qubit job cannot
    reach the flood's PM floor; otherwise it is requested alone. The default
    pairs only when there are several targets, so a lone target is held
    exactly.
    """
    ts = sorted(targets)
    if pair_isolated is None:
        pair_isolated = len(ts) > 1
    subsets = []
    for r in range(len(ts), 1, -1):
        subsets += [s for s in combinations(ts, r) if is_connected_subset(g, s)]
    covered = {q for s in subsets for q in s}
    pairs = []
    for t in ts:
        if t in covered:
            continue
        if not pair_isolated or not g.neighbors(t):
            pairs.append((t,))
            continue
        mate = min(g.neighbors(t), key=lambda n: (-len(g.neighbors(n)), n))
        pairs.append(tuple(sorted((t, mate))))
    return subsets + sorted(set(pairs), key=lambda s: (-len(s), s))


def generate_kitchen_sink_jobs(g: CouplingGraph, targets: Sequence[int], tiers: int = 3,
                               depth_menu: Sequence[int] = (50, 100, 200), seed: int = 0,
                               user_prefix: str = "adv", first_arrival: int = 0,
                               pair_isolated: bool | None = None) -> list[Job]:
    """
    Flood jobs: ``tiers`` jobs for each of the three priority tiers.

    Each tier is submitted from its own account with a staggered low usage
    score, so after fair-share ordering attacker jobs spread across the
    high, medium and low groups. Job i of tier t takes depth
    ``depth_menu[(t + i) % len]`` so each tier leads with a different depth,
    and jobs cycle through ``target_request_sets``, requesting that set.
    Circuits are CNOT-heavy (PM >= 0.8 whenever they have two qubits).
    """
    if tiers < 1:
        raise ValueError("tiers must be >= 1")
    if not depth_menu:
        raise ValueError("depth_menu must be non-empty")
    rng = np.random.default_rng(seed)
    requests = target_request_sets(g, targets, pair_isolated)
    jobs = []
    n = 0
    for tier in range(3):
        for i in range(tiers):
            req = requests[n % len(requests)]
            d = depth_menu[(tier + i) % len(depth_menu)]
            jobs.append(Job(
                id=f"{user_prefix}{tier}-{i}",
                user=f"{user_prefix}{tier}",
                circuit=_flood_circuit(len(req), d, rng),
                usage_score=TIER_USAGE[tier],
                arrival_index=first_arrival + n,
                requested=req,
            ))
            n += 1
    return jobs


def plan_attack(g: CouplingGraph, cal: Calibration, k: int | None = None, tiers: int = 3,
                depth_menu: Sequence[int] = (50, 100, 200), seed: int = 0,
                w: QualityWeights = QualityWeights(), direction: str = "ascending") -> AttackPlan:
    targets = select_target_qubits(g, cal, w, k, direction)
    jobs = generate_kitchen_sink_jobs(g, targets, tiers, depth_menu, seed)
    return AttackPlan(targets, tuple(jobs), w, direction)


@dataclass(frozen=True)
class SchedulerConfig:
    tol: float = DEFAULT_TOL
    track_usage: bool = True
    victim_usage: float = 0.05
    max_rounds: int = 1000


@dataclass(frozen=True)
class ImpactRow:
    seed: int
    swaps_baseline: int
    swaps_attack: int
    cnot_baseline: int
    cnot_attack: int
    overhead_pct: float
    denied: bool
    allocation_baseline: tuple[int, ...] = ()
    allocation_attack: tuple[int, ...] = ()


@dataclass
class ImpactReport:
    rows: list[ImpactRow] = field(default_factory=list)

    @property
    def overheads(self) -> list[float]:
        return [r.overhead_pct for r in self.rows if not r.denied]

    @property
    def median_overhead(self) -> float:
        return median(self.overheads) if self.overheads else 0.0

    @property
    def mean_overhead(self) -> float:
        return float(np.mean(self.overheads)) if self.overheads else 0.0

    @property
    def max_overhead(self) -> float:
        return max(self.overheads) if self.overheads else 0.0

    @property
    def denied_count(self) -> int:
        return sum(r.denied for r in self.rows)


VICTIM_ID = "victim"


def victim_allocation(victim: Circuit, g: CouplingGraph, cal: Calibration | None, others: Iterable[Job],
                      config: SchedulerConfig = SchedulerConfig()) -> tuple[int, ...] | None:
    """Run the scheduler until the victim's batch comes up; return its allocation."""
    vjob = Job(VICTIM_ID, "victim", victim, config.victim_usage, arrival_index=10**9)
    jobs = [*others, vjob]
    for batch, _ in run_schedule(jobs, g, config.tol, cal, config.track_usage, config.max_rounds):
        alloc = batch.allocation_of(VICTIM_ID)
        if alloc is not None:
            return alloc
    return None


def _overhead(test: int, base: int) -> float:
    if base == 0:
        return 0.0 if test == 0 else float("inf")
    return swap_overhead(test, base)


def measure_attack_impact(victim: Circuit, g: CouplingGraph, cal: Calibration | None, plan: AttackPlan | None,
                          config: SchedulerConfig = SchedulerConfig(), seeds: Iterable[int] = (0,),
                          background: Sequence[Job] = ()) -> ImpactReport:
    """
    Baseline vs attack arm for one victim, per routing seed.

    Both arms schedule the victim together with ``background`` jobs; the
    attack arm adds the plan's flood jobs. The victim is routed (confined to
    its granted allocation) with identical seeds in both arms. A victim that
    never gets an allocation in the attack arm is reported as denied.
    """
    flood = list(plan.flood_jobs) if plan is not None else []
    base_alloc = victim_allocation(victim, g, cal, background, config)
    if base_alloc is None:
        raise ValueError("victim cannot be scheduled even without an attack")
    atk_alloc = victim_allocation(victim, g, cal, [*background, *flood], config)
    report = ImpactReport()
    for s in sorted(seeds):
        rb = route_auto(victim, g, base_alloc, s)
        if atk_alloc is None:
            report.rows.append(ImpactRow(s, rb.swaps_inserted, 0, rb.cnot_after_decomposition, 0,
                                         0.0, True, base_alloc, ()))
            continue
        ra = route_auto(victim, g, atk_alloc, s)
        report.rows.append(ImpactRow(
            s, rb.swaps_inserted, ra.swaps_inserted, rb.cnot_after_decomposition, ra.cnot_after_decomposition,
            _overhead(ra.cnot_after_decomposition, rb.cnot_after_decomposition), False, base_alloc, atk_alloc))
    return report


def isolate_users(jobs: Iterable[Job], users: Iterable[str]) -> list[Job]:
    flagged = set(users)
    return [replace(j, solo=True) if j.user in flagged else j for j in jobs]
