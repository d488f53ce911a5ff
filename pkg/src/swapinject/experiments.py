"""
Experiment sweeps and scenario files.

Contains:
    - Scenario (JSON-backed) and its VictimSpec / AttackSpec / DefenseSpec parts
    - run_allocation_sweep, run_complexity_sweep, run_size_sweep, run_end_to_end
    - SweepReport / EndToEndReport with fixed-column CSV output

Scenario JSON keys (all optional except where a sweep needs them)::

    coupling            preset name or coupling-map file        ("grid20")
    calibration_seed    seed of the synthetic calibration      (0)
    victim              {qubits, gates, two_qubit_fraction}
    seeds               {start, stop} half-open range or a list  (0..99)
    allocations         explicit configs, config 1 first; the last one is
                        the baseline unless "baseline" names another index
    num_configs         size of the automatic density ladder  (5)
    gate_menu           gate counts for the complexity sweep
    qubit_range         [lo, hi] inclusive for the size sweep
    routing_scope       "device" or "allocation"              ("device")
    attack              {k, tiers, depth_menu, seed, direction}
    scheduler           {tol, victim_usage, track_usage}
    defense             {enabled, nu, policy, normal_users, train_users,
                         window, seed}

With ``routing_scope = "device"`` the allocation only fixes the initial
placement and SWAPs may pass through any device qubit; ``"allocation"``
confines routing to the allocated qubits.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from statistics import median
from typing import Callable, Sequence

import numpy as np

from .adversary import AttackPlan, SchedulerConfig, default_target_count, measure_attack_impact, plan_attack
from .circuit import Circuit, random_circuit
from .defense import (
    extract_all,
    flood_log,
    respond,
    score_all,
    synthetic_corpus,
    train,
)
from .errors import ScenarioError
from .hardware import (
    Calibration,
    CouplingGraph,
    allocation_density,
    enumerate_connected_allocations,
    is_connected_subset,
    load_coupling,
    mean_connection_error,
)
from .routing import RoutingResult, initial_layout, route, route_auto, swap_overhead

WORKERS_ENV = "SWAPINJECT_WORKERS"


@dataclass(frozen=True)
class VictimSpec:
    qubits: int = 6
    gates: int = 100
    two_qubit_fraction: float = 0.5

    def circuit(self, seed: int, gates: int | None = None, qubits: int | None = None) -> Circuit:
        return random_circuit(qubits or self.qubits, gates or self.gates, self.two_qubit_fraction, seed)


@dataclass(frozen=True)
class AttackSpec:
    k: int | None = None
    tiers: int = 3
    depth_menu: tuple[int, ...] = (36, 44, 52)
    seed: int = 0
    direction: str = "ascending"


@dataclass(frozen=True)
class DefenseSpec:
    enabled: bool = True
    nu: float = 0.05
    policy: str = "isolate"
    normal_users: int = 100
    train_users: int = 100
    window: float = 7.0
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    coupling: str = "grid20"
    calibration_seed: int = 0
    victim: VictimSpec = VictimSpec()
    seeds: tuple[int, ...] = tuple(range(100))
    allocations: tuple[tuple[int, ...], ...] | None = None
    baseline: int | None = None
    num_configs: int = 5
    gate_menu: tuple[int, ...] = (50, 100, 200, 300)
    qubit_range: tuple[int, int] = (4, 10)
    routing_scope: str = "device"
    attack: AttackSpec | None = AttackSpec()
    scheduler: SchedulerConfig = SchedulerConfig()
    defense: DefenseSpec = DefenseSpec()
    name: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> Scenario:
        try:
            seeds = d.get("seeds", {"start": 0, "stop": 100})
            if isinstance(seeds, dict):
                seeds = range(int(seeds["start"]), int(seeds["stop"]))
            allocs = d.get("allocations")
            attack = d.get("attack", {})
            s = cls(
                coupling=str(d.get("coupling", "grid20")),
                calibration_seed=int(d.get("calibration_seed", 0)),
                victim=VictimSpec(**d.get("victim", {})),
                seeds=tuple(int(x) for x in seeds),
                allocations=tuple(tuple(int(q) for q in a) for a in allocs) if allocs else None,
                baseline=None if d.get("baseline") is None else int(d["baseline"]),
                num_configs=int(d.get("num_configs", 5)),
                gate_menu=tuple(int(x) for x in d.get("gate_menu", (50, 100, 200, 300))),
                qubit_range=tuple(int(x) for x in d.get("qubit_range", (4, 10))),
                routing_scope=str(d.get("routing_scope", "device")),
                attack=None if attack is None else AttackSpec(**{
                    **attack, "depth_menu": tuple(attack.get("depth_menu", AttackSpec.depth_menu))}),
                scheduler=SchedulerConfig(**d.get("scheduler", {})),
                defense=DefenseSpec(**d.get("defense", {})),
                name=str(d.get("name", "")),
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise ScenarioError(f"malformed scenario: {exc}") from exc
        s.validate()
        return s

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
        return cls.from_dict(data)

    def validate(self) -> None:
        if not self.seeds:
            raise ScenarioError("seeds must be non-empty")
        if not self.gate_menu:
            raise ScenarioError("gate_menu must be non-empty")
        if list(self.gate_menu) != sorted(self.gate_menu):
            raise ScenarioError("gate_menu must be ascending")
        if self.qubit_range[0] < 1 or self.qubit_range[0] > self.qubit_range[1]:
            raise ScenarioError(f"bad qubit_range {self.qubit_range}")
        if self.routing_scope not in ("device", "allocation"):
            raise ScenarioError(f"routing_scope must be 'device' or 'allocation', got {self.routing_scope!r}")
        if self.allocations is not None and len(self.allocations) < 2:
            raise ScenarioError("need at least two allocation configs")
        if self.num_configs < 2:
            raise ScenarioError("num_configs must be >= 2")

    def hardware(self) -> tuple[CouplingGraph, Calibration]:
        try:
            return load_coupling(self.coupling, self.calibration_seed)
        except (OSError, ValueError, KeyError) as exc:
            raise ScenarioError(f"cannot load coupling {self.coupling!r}: {exc}") from exc


# ---------------------------------------------------------------- reports

ROW_COLUMNS = ("cell", "seed", "num_qubits", "num_gates", "allocation", "baseline_allocation",
               "cnot_baseline", "cnot_test", "swaps_baseline", "swaps_test", "swaps_added", "overhead_pct")
AGG_COLUMNS = ("cell", "n", "overhead_mean", "overhead_median", "overhead_max",
               "swaps_added_mean", "swaps_added_median", "swaps_added_max")


@dataclass(frozen=True)
class SweepRow:
    cell: str
    seed: int
    num_qubits: int
    num_gates: int
    allocation: tuple[int, ...]
    baseline_allocation: tuple[int, ...]
    cnot_baseline: int
    cnot_test: int
    swaps_baseline: int
    swaps_test: int
    swaps_added: int
    overhead_pct: float


@dataclass(frozen=True)
class CellStats:
    cell: str
    n: int
    overhead_mean: float
    overhead_median: float
    overhead_max: float
    swaps_added_mean: float
    swaps_added_median: float
    swaps_added_max: float


def aggregate(rows: Sequence[SweepRow]) -> list[CellStats]:
    cells: dict[str, list[SweepRow]] = {}
    for r in rows:
        cells.setdefault(r.cell, []).append(r)
    out = []
    for cell, rs in cells.items():
        ov = [r.overhead_pct for r in rs]
        sw = [r.swaps_added for r in rs]
        out.append(CellStats(cell, len(rs), float(np.mean(ov)), float(median(ov)), float(max(ov)),
                             float(np.mean(sw)), float(median(sw)), float(max(sw))))
    return out


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return " ".join(map(str, v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(columns: Sequence[str], records: Sequence) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow(_fmt_record(columns, rec))
    return buf.getvalue()


@dataclass
class SweepReport:
    rows: list[SweepRow] = field(default_factory=list)
    aggregates: list[CellStats] = field(default_factory=list)
    configs: dict[str, tuple[int, ...]] = field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows: Sequence[SweepRow], configs: dict | None = None) -> SweepReport:
        return cls(list(rows), aggregate(rows), dict(configs or {}))

    def cell(self, name: str) -> CellStats:
        for a in self.aggregates:
            if a.cell == name:
                return a
        raise KeyError(name)

    def cell_rows(self, name: str) -> list[SweepRow]:
        return [r for r in self.rows if r.cell == name]

    def is_consistent(self) -> bool:
        """Aggregates match a recomputation from the rows."""
        return aggregate(self.rows) == self.aggregates

    def rows_csv(self) -> str:
        return _csv(ROW_COLUMNS, self.rows)

    def aggregates_csv(self) -> str:
        return _csv(AGG_COLUMNS, self.aggregates)

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "rows.csv").write_text(self.rows_csv())
        (out / "aggregates.csv").write_text(self.aggregates_csv())

    @classmethod
    def load(cls, out_dir: str | Path) -> SweepReport:
        """Read ``rows.csv``/``aggregates.csv``; raises ValueError if they disagree."""
        out = Path(out_dir)
        rows = [_parse_row(r) for r in csv.DictReader(io.StringIO((out / "rows.csv").read_text()))]
        report = cls.from_rows(rows)
        stored = list(csv.DictReader(io.StringIO((out / "aggregates.csv").read_text())))
        if [_fmt_record(AGG_COLUMNS, a) for a in report.aggregates] != [[d[c] for c in AGG_COLUMNS] for d in stored]:
            raise ValueError(f"aggregates in {out} do not match their rows")
        return report


def _fmt_record(columns: Sequence[str], rec) -> list[str]:
    return [_fmt(getattr(rec, c)) for c in columns]


def _parse_row(d: dict[str, str]) -> SweepRow:
    conv = {f.name: f.type for f in fields(SweepRow)}
    vals = {}
    for name, typ in conv.items():
        raw = d[name]
        if "tuple" in str(typ):
            vals[name] = tuple(int(x) for x in raw.split())
        elif typ in ("int", int):
            vals[name] = int(raw)
        elif typ in ("float", float):
            vals[name] = float(raw)
        else:
            vals[name] = raw
    return SweepRow(**vals)


# ---------------------------------------------------------------- helpers

def _parallel_map(fn: Callable, items: Sequence) -> list:
    workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def overhead_or_zero(test: int, base: int) -> float:
    """``swap_overhead``, except that two CNOT-free circuits compare as 0%."""
    if base == 0 and test == 0:
        return 0.0
    return swap_overhead(test, base)


def density_key(g: CouplingGraph, cal: Calibration | None):
    def key(s):
        ce = mean_connection_error(g, cal, s) if cal is not None else 0.0
        return (-allocation_density(g, s), ce, s)
    return key


def density_ladder(g: CouplingGraph, k: int, n: int = 5, cal: Calibration | None = None) -> list[tuple[int, ...]]:
    """
    ``n`` connected k-subsets spread evenly over the density ranking.

    Ordered config 1 (least dense) to config n (densest, the baseline).
    Fewer are returned when the graph has fewer connected k-subsets.
    """
    ranked = sorted(enumerate_connected_allocations(g, k), key=density_key(g, cal))
    if not ranked:
        raise ScenarioError(f"no connected {k}-qubit allocation on {g.name}")
    idx = sorted({round(i * (len(ranked) - 1) / (n - 1)) for i in range(n)}) if n > 1 else [0]
    return [ranked[i] for i in reversed(idx)]


def densest_and_sparsest(g: CouplingGraph, k: int, cal: Calibration | None = None) -> tuple[tuple[int, ...], tuple[int, ...]]:
    ladder = density_ladder(g, k, 2, cal)
    return ladder[-1], ladder[0]


def _route(c: Circuit, g: CouplingGraph, alloc: Sequence[int], seed: int, scope: str) -> RoutingResult:
    if scope == "allocation":
        return route_auto(c, g, alloc, seed)
    return route(c, g, range(g.num_qubits), initial_layout(c, g, alloc), seed)


def _compare(cell: str, c: Circuit, g: CouplingGraph, test: Sequence[int], base: Sequence[int],
             seed: int, scope: str) -> SweepRow:
    rb = _route(c, g, base, seed, scope)
    rt = _route(c, g, test, seed, scope)
    return SweepRow(cell, seed, c.num_qubits, len(c.gates), tuple(test), tuple(base),
                    rb.cnot_after_decomposition, rt.cnot_after_decomposition,
                    rb.swaps_inserted, rt.swaps_inserted, rt.swaps_inserted - rb.swaps_inserted,
                    overhead_or_zero(rt.cnot_after_decomposition, rb.cnot_after_decomposition))


def _check_configs(g: CouplingGraph, configs: Sequence[Sequence[int]], k: int) -> None:
    for a in configs:
        if any(not 0 <= q < g.num_qubits for q in a) or not a or not is_connected_subset(g, a):
            raise ScenarioError(f"allocation {list(a)} is not a connected subset of {g.name}")
        if len(set(a)) < k:
            raise ScenarioError(f"allocation {list(a)} is smaller than the {k}-qubit victim")


# ---------------------------------------------------------------- sweeps

def allocation_configs(s: Scenario, g: CouplingGraph, cal: Calibration) -> tuple[list[tuple[int, ...]], int]:
    """Configs (config 1 first) and the baseline index."""
    if s.allocations is not None:
        configs = [tuple(a) for a in s.allocations]
        base = len(configs) - 1 if s.baseline is None else int(s.baseline)
        if not 0 <= base < len(configs):
            raise ScenarioError(f"baseline index {base} out of range")
    else:
        configs = density_ladder(g, s.victim.qubits, s.num_configs, cal)
        base = len(configs) - 1
    _check_configs(g, configs, s.victim.qubits)
    return configs, base


def _alloc_task(args) -> list[SweepRow]:
    s, g, configs, base, seed = args
    c = s.victim.circuit(seed)
    return [_compare(f"config{i + 1}", c, g, a, configs[base], seed, s.routing_scope)
            for i, a in enumerate(configs) if i != base]


def run_allocation_sweep(s: Scenario) -> SweepReport:
    """Route each seed's victim on every config and compare against the baseline config."""
    g, cal = s.hardware()
    configs, base = allocation_configs(s, g, cal)
    chunks = _parallel_map(_alloc_task, [(s, g, configs, base, seed) for seed in s.seeds])
    rows = sorted((r for ch in chunks for r in ch), key=lambda r: (r.cell, r.seed))
    return SweepReport.from_rows(rows, {f"config{i + 1}": a for i, a in enumerate(configs)})


def _complexity_task(args) -> list[SweepRow]:
    s, g, test, base, seed = args
    return [_compare(f"gates={n}", s.victim.circuit(seed, gates=n), g, test, base, seed, s.routing_scope)
            for n in s.gate_menu]


def run_complexity_sweep(s: Scenario) -> SweepReport:
    """Config 1 vs baseline for each gate count of the menu."""
    g, cal = s.hardware()
    configs, base = allocation_configs(s, g, cal)
    test = configs[0] if base != 0 else configs[1]
    chunks = _parallel_map(_complexity_task, [(s, g, test, configs[base], seed) for seed in s.seeds])
    order = {f"gates={n}": i for i, n in enumerate(s.gate_menu)}
    rows = sorted((r for ch in chunks for r in ch), key=lambda r: (order[r.cell], r.seed))
    return SweepReport.from_rows(rows, {"config1": test, "baseline": configs[base]})


def _size_task(args) -> list[SweepRow]:
    s, g, pairs, seed = args
    return [_compare(f"qubits={k}", s.victim.circuit(seed, qubits=k), g, sparse, dense, seed, s.routing_scope)
            for k, (dense, sparse) in pairs]


def run_size_sweep(s: Scenario) -> SweepReport:
    """Least vs most densely connected allocation for each victim size in ``qubit_range``."""
    g, cal = s.hardware()
    lo, hi = s.qubit_range
    if hi > g.num_qubits:
        raise ScenarioError(f"qubit_range {s.qubit_range} exceeds {g.num_qubits} hardware qubits")
    pairs = [(k, densest_and_sparsest(g, k, cal)) for k in range(lo, hi + 1)]
    chunks = _parallel_map(_size_task, [(s, g, pairs, seed) for seed in s.seeds])
    rows = sorted((r for ch in chunks for r in ch), key=lambda r: (r.num_qubits, r.seed))
    configs = {}
    for k, (dense, sparse) in pairs:
        configs[f"qubits={k}:densest"] = dense
        configs[f"qubits={k}:sparsest"] = sparse
    return SweepReport.from_rows(rows, configs)


# ---------------------------------------------------------------- end to end

E2E_COLUMNS = ("seed", "cnot_baseline", "cnot_attack", "overhead_pre", "denied_pre",
               "cnot_defended", "overhead_post", "denied_post", "attackers_flagged", "attackers_total")


@dataclass(frozen=True)
class EndToEndRow:
    seed: int
    cnot_baseline: int
    cnot_attack: int
    overhead_pre: float
    denied_pre: bool
    cnot_defended: int
    overhead_post: float
    denied_post: bool
    attackers_flagged: int
    attackers_total: int


@dataclass
class DetectionOutcome:
    scores: dict[str, float]
    flagged: list[str]
    attackers: list[str]

    @property
    def attackers_flagged(self) -> list[str]:
        return [u for u in self.attackers if u in self.flagged]


@dataclass
class EndToEndReport:
    rows: list[EndToEndRow]
    detection: DetectionOutcome | None
    targets: tuple[int, ...] = ()

    @property
    def pre(self) -> list[float]:
        return [r.overhead_pre for r in self.rows]

    @property
    def post(self) -> list[float]:
        return [r.overhead_post for r in self.rows]

    def rows_csv(self) -> str:
        return _csv(E2E_COLUMNS, self.rows)

    def summary(self) -> dict:
        det = self.detection
        return {
            "seeds": len(self.rows),
            "targets": list(self.targets),
            "median_overhead_pre": float(median(self.pre)) if self.rows else 0.0,
            "median_overhead_post": float(median(self.post)) if self.rows else 0.0,
            "max_overhead_post": float(max(self.post)) if self.rows else 0.0,
            "flagged_users": det.flagged if det else [],
            "attackers": det.attackers if det else [],
        }

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "e2e.csv").write_text(self.rows_csv())
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def detect_attackers(plan: AttackPlan, cfg: DefenseSpec, g: CouplingGraph) -> DetectionOutcome:
    """
    Score the plan's accounts against a model trained on normal users only.

    The evaluation log holds ``cfg.normal_users`` seeded normal users plus
    the flood accounts replaying their jobs in bursts; training uses a
    disjoint seeded population of ``cfg.train_users`` normal users.
    """
    train_log, _ = synthetic_corpus(cfg.train_users, 0, seed=cfg.seed + 1, window=cfg.window, g=g)
    model = train(list(extract_all(train_log, cfg.window).values()), nu=cfg.nu, seed=cfg.seed)
    log, _ = synthetic_corpus(cfg.normal_users, 0, seed=cfg.seed + 2, window=cfg.window, g=g)
    log = log + flood_log(plan.flood_jobs, cfg.window, seed=cfg.seed)
    scores = score_all(model, extract_all(log, cfg.window))
    flagged = sorted(u for u, v in scores.items() if v < 0)
    return DetectionOutcome(scores, flagged, sorted(plan.users))


def _e2e_task(args) -> EndToEndRow:
    s, g, cal, plan, defended, n_flagged, seed = args
    victim = s.victim.circuit(seed)
    pre = measure_attack_impact(victim, g, cal, plan, s.scheduler, [seed]).rows[0]
    post = measure_attack_impact(victim, g, cal, defended, s.scheduler, [seed]).rows[0] \
        if defended is not plan else pre
    n_total = len(plan.users) if plan is not None else 0
    return EndToEndRow(seed, pre.cnot_baseline, pre.cnot_attack, pre.overhead_pct, pre.denied,
                       post.cnot_attack, post.overhead_pct, post.denied, n_flagged, n_total)


def run_end_to_end(s: Scenario) -> EndToEndReport:
    """
    Flood attack through the scheduler, detection, isolation, re-run.

    Each seed draws one victim. Pre-defense overhead compares its routed
    CNOT count under the flood against the flood-free schedule; the flood
    accounts are then scored by the anomaly model, flagged ones isolated,
    and the victim re-measured.
    """
    g, cal = s.hardware()
    plan = None
    if s.attack is not None:
        a = s.attack
        k = a.k if a.k is not None else default_target_count(g)
        plan = plan_attack(g, cal, k, a.tiers, a.depth_menu, a.seed, direction=a.direction)

    detection = None
    defended = plan
    if plan is not None and s.defense.enabled:
        detection = detect_attackers(plan, s.defense, g)
        jobs = list(plan.flood_jobs)
        for user in detection.attackers_flagged:
            jobs = respond(jobs, user, s.defense.policy)
        defended = AttackPlan(plan.target_qubits, tuple(jobs), plan.weights, plan.direction)
    n_flagged = len(detection.attackers_flagged) if detection else 0

    rows = _parallel_map(_e2e_task, [(s, g, cal, plan, defended, n_flagged, seed) for seed in s.seeds])
    rows.sort(key=lambda r: r.seed)
    return EndToEndReport(rows, detection, plan.target_qubits if plan else ())


EXPERIMENTS = {
    "fig4": run_allocation_sweep,
    "fig5": run_complexity_sweep,
    "fig6": run_size_sweep,
    "e2e": run_end_to_end,
}
