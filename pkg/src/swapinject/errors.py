"""Exception types raised across the package."""


class SwapInjectError(Exception):
    """Base class for all package errors."""


class EmptyProgramError(SwapInjectError, ValueError):
    """A circuit with no gates was given where a gate ratio is needed."""


class CapacityError(SwapInjectError, ValueError):
    """An allocation is too small for the circuit placed on it."""


class RoutingInfeasibleError(SwapInjectError):
    """The allocation subgraph is disconnected, so some gates can never be routed."""


class OracleSizeError(SwapInjectError, ValueError):
    """Instance exceeds the exhaustive oracle's tractability guard."""


class UndefinedOverheadError(SwapInjectError, ZeroDivisionError):
    """Overhead requested against a zero-CNOT baseline."""


class UndefinedQualityError(SwapInjectError, ValueError):
    """Inverse degree term requested for an isolated qubit."""


class InsufficientDataError(SwapInjectError, ValueError):
    """Too few samples to fit the anomaly model."""


class ScenarioError(SwapInjectError, ValueError):
    """An experiment scenario failed validation."""
