"""Exception hierarchy shared by the library and the CLI exit-code map."""

from __future__ import annotations


class NLExchangeError(Exception):
    """Base class for all library errors."""


class InputError(NLExchangeError, ValueError):
    """Malformed or non-finite input."""


class DegenerateProjectionError(InputError):
    """A cell value is too close to zero to be normalized onto the sphere."""

    def __init__(self, cell: tuple[int, int, int], norm: float):
        self.cell = cell
        self.norm = norm
        super().__init__(f"cannot project cell {cell} onto S^2: |m| = {norm:.3e} < 1e-8")


class ResolutionError(NLExchangeError):
    """The interaction range is too short for the grid spacing."""

    def __init__(self, eps: float, min_eps: float):
        self.eps = eps
        self.min_eps = min_eps
        super().__init__(
            f"eps = {eps:g} is below the grid-coupling floor; "
            f"use eps >= {min_eps:g} or refine the grid"
        )


class HypothesisViolation(NLExchangeError):
    """A kernel family violates one of the structural hypotheses."""

    def __init__(self, hypothesis: str, message: str):
        self.hypothesis = hypothesis
        super().__init__(f"{hypothesis}: {message}")


class FitDegenerateError(NLExchangeError):
    """Too few usable points for a convergence-rate fit."""


class ConfigError(NLExchangeError):
    """Invalid run configuration."""


class ConvergenceFailure(NLExchangeError):
    """A sequence that should settle does not (successive differences grow)."""

    def __init__(self, message: str, report: dict | None = None):
        self.report = report or {}
        super().__init__(message)
