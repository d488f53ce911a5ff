"""
Logical circuit representation.

Contains:
    - Gate / GateKind: one-qubit (opaque label), CNOT and SWAP gates
    - Circuit: immutable gate sequence over ``num_qubits`` wires
    - gate_stats, priority_metric: counting helpers used by the scheduler
    - random_circuit: seeded benchmark generator
    - decompose_swaps: SWAP -> 3 CNOT lowering
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import EmptyProgramError

ONE_QUBIT_LABELS = ("h", "x", "s", "t", "sx")


class GateKind(Enum):
    ONE_QUBIT = "1q"
    CNOT = "cnot"
    SWAP = "swap"


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    label: str = ""

    def __post_init__(self):
        arity = 1 if self.kind is GateKind.ONE_QUBIT else 2
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind.value} gate takes {arity} operand(s), got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValueError(f"negative qubit index in {self.qubits}")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise ValueError(f"two-qubit gate on repeated qubit {self.qubits}")

    @property
    def is_two_qubit(self) -> bool:
        return self.kind is not GateKind.ONE_QUBIT

    def remap(self, mapping) -> Gate:
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.label)

    def __repr__(self):
        name = self.label if self.kind is GateKind.ONE_QUBIT else self.kind.value.upper()
        return f"{name}({', '.join(map(str, self.qubits))})"


def one_qubit(label: str, q: int) -> Gate:
    return Gate(GateKind.ONE_QUBIT, (q,), label)


def cnot(control: int, target: int) -> Gate:
    return Gate(GateKind.CNOT, (control, target))


def swap(a: int, b: int) -> Gate:
    return Gate(GateKind.SWAP, (a, b))


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list. Gates are stored as a tuple so circuits hash and compare by value."""
    num_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        if self.num_qubits < 0:
            raise ValueError("num_qubits must be non-negative")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) >= self.num_qubits:
                raise ValueError(f"gate {g!r} out of range for {self.num_qubits} qubits")

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def to_dict(self) -> dict:
        out = []
        for g in self.gates:
            kind = g.label if g.kind is GateKind.ONE_QUBIT else g.kind.value
            out.append({"kind": kind, "operands": list(g.qubits)})
        return {"num_qubits": self.num_qubits, "gates": out}

    @classmethod
    def from_dict(cls, data: dict) -> Circuit:
        gates = []
        for entry in data["gates"]:
            kind = str(entry["kind"]).lower()
            ops = tuple(int(q) for q in entry["operands"])
            if kind in ("cnot", "cx"):
                gates.append(Gate(GateKind.CNOT, ops))
            elif kind == "swap":
                gates.append(Gate(GateKind.SWAP, ops))
            else:
                gates.append(Gate(GateKind.ONE_QUBIT, ops, kind))
        return cls(int(data["num_qubits"]), tuple(gates))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> Circuit:
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> Circuit:
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class GateStats:
    total: int
    two_qubit: int
    cnot: int
    swap: int
    depth: int


def depth(gates: Iterable[Gate]) -> int:
    """ASAP layering depth: each gate lands one layer after the latest busy operand."""
    level: dict[int, int] = {}
    d = 0
    for g in gates:
        layer = 1 + max((level.get(q, 0) for q in g.qubits), default=0)
        for q in g.qubits:
            level[q] = layer
        d = max(d, layer)
    return d


def gate_stats(c: Circuit) -> GateStats:
    n_cx = sum(1 for g in c.gates if g.kind is GateKind.CNOT)
    n_sw = sum(1 for g in c.gates if g.kind is GateKind.SWAP)
    return GateStats(len(c.gates), n_cx + n_sw, n_cx, n_sw, depth(c.gates))


def priority_metric(c: Circuit) -> float:
    """Share of two-qubit gates among all gates."""
    if not c.gates:
        raise EmptyProgramError("empty program")
    return sum(1 for g in c.gates if g.is_two_qubit) / len(c.gates)


def random_circuit(num_qubits: int, num_gates: int, two_qubit_fraction: float, seed: int) -> Circuit:
    """
    Seeded random benchmark circuit.

    Each gate is independently a CNOT on a uniformly drawn ordered pair of
    distinct qubits with probability ``two_qubit_fraction``, otherwise a
    one-qubit gate with a random label on a uniformly drawn qubit.
    """
    if num_qubits < 1:
        raise ValueError("num_qubits must be >= 1")
    if num_gates < 0:
        raise ValueError("num_gates must be >= 0")
    if not 0.0 <= two_qubit_fraction <= 1.0:
        raise ValueError(f"two_qubit_fraction must lie in [0, 1], got {two_qubit_fraction}")
    if two_qubit_fraction > 0 and num_qubits < 2:
        raise ValueError("two-qubit gates need at least 2 qubits")

    rng = np.random.default_rng(seed)
    gates = []
    for _ in range(num_gates):
        if rng.random() < two_qubit_fraction:
            a, b = rng.choice(num_qubits, size=2, replace=False)
            gates.append(cnot(int(a), int(b)))
        else:
            label = ONE_QUBIT_LABELS[int(rng.integers(len(ONE_QUBIT_LABELS)))]
            gates.append(one_qubit(label, int(rng.integers(num_qubits))))
    return Circuit(num_qubits, tuple(gates))


def decompose_swaps(c: Circuit) -> Circuit:
    out = []
    for g in c.gates:
        if g.kind is GateKind.SWAP:
            a, b = g.qubits
            out += [cnot(a, b), cnot(b, a), cnot(a, b)]
        else:
            out.append(g)
    return Circuit(c.num_qubits, tuple(out))
