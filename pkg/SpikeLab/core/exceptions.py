class SpikeLabError(Exception):
    """Base class for every error raised by SpikeLab."""


# --- INPUT ERRORS ---
class ParameterDomainError(SpikeLabError, ValueError):
    pass


class ConfigError(SpikeLabError):
    pass


# --- SOLVER ERRORS ---
class SolverError(SpikeLabError):
    def __init__(self, message: str = "", partial=None):
        super().__init__(message)
        # whatever was computed before the failure, e.g. a DriftTrajectory
        self.partial = partial
        self.artifacts = []


class NoConvergenceError(SolverError):
    pass


class DegenerateSolutionError(SolverError):
    pass


class BracketError(SolverError):
    pass


class ResolventSingularError(SolverError):
    pass


class NoRootFoundError(SolverError):
    def __init__(self, message: str, best_lambda: complex | None = None, best_abs_f: float | None = None):
        super().__init__(message)
        self.best_lambda = best_lambda
        self.best_abs_f = best_abs_f


class NoCrossingError(SolverError):
    pass


class StepFailure(SolverError):
    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


# --- STATE ERRORS ---
class PositivityError(SpikeLabError):
    pass


class InsufficientExtremaError(SpikeLabError):
    pass


class AcceptanceError(SpikeLabError):
    pass
