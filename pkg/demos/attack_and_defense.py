"""
Flooding the scheduler, then catching the flooders
==================================================

Three low-usage accounts submit CNOT-heavy jobs around the two
best-connected qubits. That pushes an ordinary tenant into the low-priority
group, which is handed the sparsest free region. A one-class model trained
on ordinary users then flags the accounts, and isolating them restores the
victim's allocation.
"""
from statistics import median

from swapinject.experiments import AttackSpec, DefenseSpec, Scenario, VictimSpec, run_end_to_end

scenario = Scenario(
    coupling="grid20",
    victim=VictimSpec(6, 100, 0.5),
    seeds=tuple(range(10)),
    attack=AttackSpec(k=2, tiers=3, depth_menu=(36, 44, 52)),
    defense=DefenseSpec(nu=0.05, policy="isolate"),
)
result = run_end_to_end(scenario)

print("target qubits:", result.targets)
for row in result.rows:
    print(f"seed {row.seed}: CNOTs {row.cnot_baseline} -> {row.cnot_attack} ({row.overhead_pre:+.1f}%)"
          f"  after isolation {row.cnot_defended} ({row.overhead_post:+.1f}%)")

det = result.detection
print(f"\nflagged {len(det.flagged)} accounts; attackers caught: {det.attackers_flagged} of {det.attackers}")
print("lowest scores:", sorted(det.scores.items(), key=lambda kv: kv[1])[:5])
print(f"median overhead before: {median(result.pre):.1f}%  after: {median(result.post):.1f}%")
