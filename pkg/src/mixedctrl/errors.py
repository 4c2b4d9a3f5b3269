"""Exception types shared across the package."""

from __future__ import annotations


class ShapeError(ValueError):
    """Operand dimensions are incompatible."""


class InvariantError(ValueError):
    """A value violates a structural invariant (Hermiticity, trace, ...)."""


class NumericError(ArithmeticError):
    """A numerical routine failed or produced non-finite output."""


class MonotonicityError(RuntimeError):
    """The objective decreased between iterations beyond tolerance."""

    def __init__(self, iteration: int, delta: float, tolerance: float):
        self.iteration = iteration
        self.delta = delta
        self.tolerance = tolerance
        super().__init__(
            f"objective decreased at iteration {iteration}: "
            f"deltaW={delta:.3e} < -{tolerance:.3e}"
        )


class ConfigError(ValueError):
    """Configuration file could not be parsed or validated."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
