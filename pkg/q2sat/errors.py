"""
Exception hierarchy for the simulator.

ParameterError subclasses ValueError so callers that only know about bad
arguments can still catch it. NumericalError marks failures of the numerics
themselves (the CLI maps those to exit code 2).
"""
from typing import Optional, Sequence


class Q2SATError(Exception):
    pass


class ParameterError(Q2SATError, ValueError):
    pass


class InstanceParseError(ParameterError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        detail = f"{message} ({', '.join(where)})" if where else message
        super().__init__(detail)


class DimensionError(ParameterError):
    pass


class NumericalError(Q2SATError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message: str, residuals: Sequence[float] = ()):
        self.residuals = list(residuals)
        super().__init__(f"{message}; residual norms: {[f'{r:.3e}' for r in self.residuals]}")


class ZeroGapError(NumericalError):
    pass


class NormDriftError(NumericalError):
    def __init__(self, drift: float, steps: int):
        self.drift = drift
        self.steps = steps
        super().__init__(f"Norm drift {drift:.3e} after {steps} RK4 steps exceeds 1e-4; increase --steps")


class GroundSpaceError(NumericalError):
    pass


class Conflict(Q2SATError):
    """Unsatisfiable propagation. Only general clause families can produce it."""

    def __init__(self, qubit: int, edge: tuple):
        self.qubit = qubit
        self.edge = edge
        super().__init__(f"Inconsistent constraint at qubit {qubit} via edge {edge}")
