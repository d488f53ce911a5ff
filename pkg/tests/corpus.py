"""Seeded small routing instances shared by the routing tests and the acceptance run."""
import numpy as np

from swapinject.circuit import random_circuit
from swapinject.hardware import line5

LINE5_ALLOCATIONS = ((0, 1, 2, 3), (0, 1, 3, 4), (1, 2, 3, 4), (0, 1, 2, 3, 4))


def routing_corpus(n: int = 200):
    """Yield (seed, circuit, allocation): 2-4 qubits, 1-20 gates, on line5 or its connected 4-subsets."""
    g = line5()
    for seed in range(n):
        rng = np.random.default_rng(10_000 + seed)
        nq = int(rng.integers(2, 5))
        ng = int(rng.integers(1, 21))
        alloc = LINE5_ALLOCATIONS[seed % len(LINE5_ALLOCATIONS)]
        yield seed, random_circuit(nq, ng, 0.6, seed), g, alloc
