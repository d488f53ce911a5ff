"""
How much does a sparse allocation cost?
=======================================

Same 6-qubit program, five connected regions of the 4x5 grid ranging from
a tree (5 internal edges) to a 2x3 block (7 edges). Overheads are measured
against the block.
"""
from dataclasses import replace

from swapinject.experiments import Scenario, VictimSpec, run_allocation_sweep
from swapinject.hardware import allocation_density, grid20

# Twenty seeds keeps this quick; the shipped scenarios use a hundred.
scenario = Scenario(coupling="grid20", victim=VictimSpec(6, 100, 0.5), seeds=tuple(range(20)))
report = run_allocation_sweep(scenario)

g = grid20()
for name, alloc in report.configs.items():
    print(f"{name}: {alloc}  density {allocation_density(g, alloc)}")

print()
print(f"{'config':8s} {'median %':>9s} {'max %':>7s} {'extra SWAPs':>12s}")
for a in report.aggregates:
    print(f"{a.cell:8s} {a.overhead_median:9.1f} {a.overhead_max:7.1f} {a.swaps_added_median:12.1f}")

# Confining SWAPs to the allocated qubits makes the sparse shapes much worse.
confined = run_allocation_sweep(replace(scenario, routing_scope="allocation"))
print("\nrouting confined to the allocation:")
for a in confined.aggregates:
    print(f"{a.cell:8s} {a.overhead_median:9.1f}")
