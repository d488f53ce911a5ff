"""
Command-line entry point.

Contains:
    route       route one circuit on an allocation, print RoutingResult JSON
    schedule    form the next batch from a queue file, print Batch JSON
    attack      kitchen-sink attack impact per seed, CSV
    defend      train/score the anomaly model, or write a synthetic log
    experiment  scenario-driven sweeps (fig4, fig5, fig6, e2e) to an output dir

Exit status is 0 on success, 2 on invalid input (scenario, files, arguments).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

from . import experiments
from .adversary import SchedulerConfig, measure_attack_impact, plan_attack
from .circuit import Circuit
from .defense import AnomalyModel, extract_all, load_log, save_log, score_all, synthetic_corpus, train
from .errors import ScenarioError, SwapInjectError
from .hardware import load_coupling
from .routing import initial_layout, route
from .scheduler import load_queue, run_schedule, select_batch

ATTACK_COLUMNS = ("seed", "swaps_baseline", "swaps_attack", "cnot_baseline", "cnot_attack", "overhead_pct", "denied")


def parse_int_list(text: str) -> list[int]:
    """``"0,1,3"`` or ``"0..99"`` (inclusive) or a mix of both."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out += range(int(lo), int(hi) + 1)
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty integer list {text!r}")
    return out


def _int_list(text: str) -> list[int]:
    try:
        return parse_int_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_route(a) -> int:
    g, _ = load_coupling(a.coupling, a.calibration_seed)
    c = Circuit.load(a.circuit)
    res = route(c, g, a.allocation, initial_layout(c, g, a.allocation), seed=a.seed)
    _emit(json.dumps(res.to_dict(), indent=2) + "\n", a.out)
    return 0


def _cmd_schedule(a) -> int:
    g, cal = load_coupling(a.coupling, a.calibration_seed)
    jobs = load_queue(a.queue)
    if a.all:
        batches = [b.to_dict() for b, _ in run_schedule(jobs, g, a.tol, cal)]
        _emit(json.dumps({"batches": batches}, indent=2) + "\n", a.out)
    else:
        batch, _ = select_batch(jobs, g, a.tol, cal)
        _emit(json.dumps(batch.to_dict(), indent=2) + "\n", a.out)
    return 0


def _cmd_attack(a) -> int:
    g, cal = load_coupling(a.coupling, a.calibration_seed)
    victim = Circuit.load(a.victim)
    plan = plan_attack(g, cal, a.k, a.tiers, a.depth_menu, a.attack_seed)
    report = measure_attack_impact(victim, g, cal, plan, SchedulerConfig(tol=a.tol), a.seeds)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ATTACK_COLUMNS)
    for r in report.rows:
        w.writerow([r.seed, r.swaps_baseline, r.swaps_attack, r.cnot_baseline, r.cnot_attack,
                    repr(r.overhead_pct), int(r.denied)])
    _emit(buf.getvalue(), a.out)
    return 0


def _cmd_defend_train(a) -> int:
    feats = extract_all(load_log(a.log), a.window)
    model = train(list(feats.values()), nu=a.nu, seed=a.seed)
    model.save(a.out)
    return 0


def _cmd_defend_score(a) -> int:
    model = AnomalyModel.load(a.model)
    scores = score_all(model, extract_all(load_log(a.log), a.window))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("user", "score", "flagged"))
    for user in sorted(scores):
        w.writerow((user, repr(scores[user]), int(scores[user] < 0)))
    _emit(buf.getvalue(), a.out)
    return 0


def _cmd_defend_synth(a) -> int:
    log, labels = synthetic_corpus(a.normal, a.attackers, a.seed, a.window)
    save_log(log, a.out)
    if a.labels:
        Path(a.labels).write_text(json.dumps(labels, indent=1, sort_keys=True) + "\n")
    return 0


def _cmd_experiment(a) -> int:
    scenario = experiments.Scenario.load(a.scenario)
    report = experiments.EXPERIMENTS[a.name](scenario)
    report.write(a.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swapinject", description=__doc__.split("\n\n")[0].strip())
    sub = p.add_subparsers(dest="command", required=True)

    def hw(sp):
        sp.add_argument("--coupling", required=True, help="preset name (line5, grid20, ...) or coupling-map JSON")
        sp.add_argument("--calibration-seed", type=int, default=0,
                        help="seed for synthetic calibration when the map has none")
        sp.add_argument("--out", help="write output here instead of stdout")

    r = sub.add_parser("route", help="route a circuit on an allocation")
    hw(r)
    r.add_argument("--circuit", required=True)
    r.add_argument("--allocation", required=True, type=_int_list, help="physical qubits, e.g. 0,1,3,4")
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=_cmd_route)

    s = sub.add_parser("schedule", help="form the next batch from a queue file")
    hw(s)
    s.add_argument("--queue", required=True)
    s.add_argument("--tol", type=float, default=0.2, help="depth comparability tolerance")
    s.add_argument("--all", action="store_true", help="run until the queue drains and print every batch")
    s.set_defaults(func=_cmd_schedule)

    at = sub.add_parser("attack", help="measure kitchen-sink attack impact on a victim circuit")
    hw(at)
    at.add_argument("--victim", required=True)
    at.add_argument("--k", type=int, default=None, help="number of target qubits (default ceil(n/10))")
    at.add_argument("--seeds", type=_int_list, default=[0], help="routing seeds, e.g. 0..99")
    at.add_argument("--tiers", type=int, default=3, help="flood jobs per priority tier")
    at.add_argument("--depth-menu", type=_int_list, default=[36, 44, 52])
    at.add_argument("--attack-seed", type=int, default=0)
    at.add_argument("--tol", type=float, default=0.2)
    at.set_defaults(func=_cmd_attack)

    d = sub.add_parser("defend", help="behavioural anomaly detection")
    dsub = d.add_subparsers(dest="defend_command", required=True)
    dt = dsub.add_parser("train", help="fit the model on a log of normal users")
    dt.add_argument("--log", required=True)
    dt.add_argument("--nu", type=float, default=0.1)
    dt.add_argument("--window", type=float, default=7.0, help="observation window in days")
    dt.add_argument("--seed", type=int, default=0)
    dt.add_argument("--out", required=True)
    dt.set_defaults(func=_cmd_defend_train)
    ds = dsub.add_parser("score", help="score every user of a log; negative means anomalous")
    ds.add_argument("--model", required=True)
    ds.add_argument("--log", required=True)
    ds.add_argument("--window", type=float, default=7.0)
    ds.add_argument("--out")
    ds.set_defaults(func=_cmd_defend_score)
    dg = dsub.add_parser("synth", help="write a seeded synthetic job log")
    dg.add_argument("--normal", type=int, default=100)
    dg.add_argument("--attackers", type=int, default=10)
    dg.add_argument("--seed", type=int, default=0)
    dg.add_argument("--window", type=float, default=7.0)
    dg.add_argument("--labels", help="also write user -> is_attacker JSON here")
    dg.add_argument("--out", required=True)
    dg.set_defaults(func=_cmd_defend_synth)

    e = sub.add_parser("experiment", help="run a scenario sweep, writing CSV to --out")
    e.add_argument("name", choices=sorted(experiments.EXPERIMENTS))
    e.add_argument("--scenario", required=True)
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(func=_cmd_experiment)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except (SwapInjectError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
