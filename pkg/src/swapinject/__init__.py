"""
Multi-tenant quantum scheduling with SWAP-injection attacks and a behavioural defense.

Contains:
    circuit      gate/circuit model, depth, priority metric
    hardware     coupling graphs, calibration, qubit quality, connected subsets
    routing      SWAP-insertion router and a small exhaustive oracle
    scheduler    fair-share multi-programming scheduler
    adversary    kitchen-sink flood attack and impact measurement
    defense      behaviour features and a one-class anomaly model
    experiments  scenario-driven sweeps
"""
from .circuit import Circuit, Gate, GateKind, cnot, depth, gate_stats, one_qubit, priority_metric, random_circuit, swap
from .errors import (
    CapacityError,
    EmptyProgramError,
    InsufficientDataError,
    OracleSizeError,
    RoutingInfeasibleError,
    ScenarioError,
    SwapInjectError,
    UndefinedOverheadError,
    UndefinedQualityError,
)
from .hardware import Calibration, CouplingGraph, QualityWeights, grid, grid20, line5, load_coupling, qubit_quality
from .routing import Layout, RoutingResult, initial_layout, optimal_route, route, route_auto, swap_overhead
from .scheduler import Batch, Job, Priority, allocate_qubits, run_schedule, select_batch, update_usage
from .adversary import AttackPlan, measure_attack_impact, plan_attack, select_target_qubits
from .defense import AnomalyModel, LogEntry, UserFeatures, extract_features, respond, score, train

__all__ = [name for name in dir() if not name.startswith("_")]
