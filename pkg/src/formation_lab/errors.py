"""Exception hierarchy.

Input problems derive from :class:`ValidationError` (also a ``ValueError``);
numerical failures derive from :class:`NumericError` (also an
``ArithmeticError``). The command line maps them to exit codes 2 and 3.
"""

from __future__ import annotations


class FormationError(Exception):
    """Base class for all errors raised by formation_lab."""


class ValidationError(FormationError, ValueError):
    """Malformed or inconsistent input."""


class UnsupportedTopologyError(ValidationError):
    """The operation needs a graph class (e.g. a tree) that was not supplied."""


class InfeasibleDesignError(ValidationError):
    """No motion parameters reproduce the requested velocity."""

    def __init__(self, message: str, agent: int | None = None) -> None:
        super().__init__(message)
        self.agent = agent


class DegenerateEdgeError(ValidationError):
    """A desired relative position used by the design is zero."""


class DesignInconsistencyError(ValidationError):
    """Agents would not share a common steady-state velocity."""


class NumericError(FormationError, ArithmeticError):
    """A numerical procedure failed or is untrustworthy."""


class SingularityError(NumericError):
    def __init__(self, message: str, condition_number: float) -> None:
        super().__init__(message)
        self.condition_number = condition_number


class EigenSolverError(NumericError):
    """The dense eigensolver did not converge."""


class StepSizeError(NumericError):
    def __init__(self, message: str, suggested_dt: float) -> None:
        super().__init__(message)
        self.suggested_dt = suggested_dt


class DivergenceError(NumericError):
    """The integrated state left the finite range.

    Attributes:
        step: index of the first bad step.
        time: simulation time of that step.
        trajectory: the samples recorded before the bad step.
    """

    def __init__(self, message: str, step: int, time: float, trajectory=None) -> None:
        super().__init__(message)
        self.step = step
        self.time = time
        self.trajectory = trajectory
