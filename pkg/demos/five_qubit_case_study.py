"""
Squeezing a victim off the hub qubit
====================================

A 4-qubit victim on the T-shaped 5-qubit device normally gets qubits
0, 1, 2, 3. If another tenant holds qubit 2, the only connected 4-qubit
region left is 0, 1, 3, 4, and routing there costs extra SWAPs.
"""
from statistics import median

from swapinject.adversary import AttackPlan, generate_kitchen_sink_jobs, measure_attack_impact
from swapinject.circuit import depth, random_circuit
from swapinject.hardware import enumerate_connected_allocations, line5

g = line5()
print("edges:", g.sorted_edges())
print("connected 4-qubit regions:", enumerate_connected_allocations(g, 4))

# Ten seeded victims. For each, the attacker submits one-qubit jobs pinned
# to qubit 2 with a depth close to the victim's, so they share its batch.
overheads = []
for seed in range(10):
    victim = random_circuit(4, 40, 0.5, seed)
    flood = generate_kitchen_sink_jobs(g, (2,), tiers=1, depth_menu=(depth(victim.gates),), seed=seed)
    row = measure_attack_impact(victim, g, None, AttackPlan((2,), tuple(flood)), seeds=[seed]).rows[0]
    overheads.append(row.overhead_pct)
    print(f"seed {seed}: {row.allocation_baseline} -> {row.allocation_attack}  "
          f"CNOTs {row.cnot_baseline} -> {row.cnot_attack}  ({row.overhead_pct:+.1f}%)")

print(f"median CNOT increase: {median(overheads):.1f}%")
