"""Exception types shared across the toolkit."""


class FunnelSimError(Exception):
    """Base class for all funnelsim errors."""


class DomainError(FunnelSimError):
    """An argument left the open domain of a gain map (unit-ball or [0,1) violation)."""

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class ShapeError(FunnelSimError):
    """Mismatched block counts or vector dimensions."""


class FunnelViolation(FunnelSimError):
    """Controller evaluation left its domain at time ``t``.

    Signals the integrator that the attempted step must be rejected and
    shrunk; ``level`` identifies the first gain-recursion level that failed
    (``None`` when the guard on the final signal norm tripped instead).
    """

    def __init__(self, t, level=None, message=None):
        super().__init__(message or f"controller domain violation at t={t} (level {level})")
        self.t = t
        self.level = level


class ParameterError(FunnelSimError):
    """Physically inadmissible model parameters."""


class SingularMass(FunnelSimError):
    """Inertia matrix numerically singular; parameters are invalid."""


class HistoryUnderflow(FunnelSimError):
    """A delayed lookup needs values older than the stored history."""


class LookaheadError(FunnelSimError):
    """A causal operator tried to read the history beyond the current time."""


class NoRelativeDegree(FunnelSimError):
    """The Markov-parameter test found no strict relative degree."""


class NumericalRankError(FunnelSimError):
    """A coordinate-change matrix is too ill-conditioned to invert reliably."""


class ConvergenceError(FunnelSimError):
    """Iterative eigenvalue computation exhausted its iteration budget."""


class DegenerateInput(FunnelSimError):
    """A-priori bound recursion produced a constant outside (0, 1)."""


class MismatchedScenario(FunnelSimError):
    """Bounds and trajectory were produced with different design parameters."""


class HypothesisMismatch(FunnelSimError):
    """A verification was requested outside its hypotheses."""


class UnknownPreset(FunnelSimError):
    """No reference-signal preset with the requested name."""


class InitialConditionRejected(FunnelSimError):
    """The scaled initial information vector is outside the controller domain."""

    def __init__(self, level, message=None):
        super().__init__(message or f"initial condition rejected at recursion level {level}")
        self.level = level


class ConfigError(FunnelSimError):
    """A scenario file failed to parse or validate."""
