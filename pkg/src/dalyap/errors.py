"""Exception types shared across the package."""
from __future__ import annotations


class DalyapError(Exception):
    """Base class for all errors raised by this package."""


class MapSyntaxError(DalyapError, ValueError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"line {line}, column {column}: {message}")


class NotCenteredAtOrigin(DalyapError, ValueError):
    """The map has a nonzero constant term, so f(0) != 0."""


class NotAContraction(DalyapError, ValueError):
    def __init__(self, norm: float):
        self.norm = norm
        super().__init__(f"linear part is not a contraction: ||d0 f|| = {norm!r} >= 1")


class FixedPointMismatch(DalyapError, ValueError):
    def __init__(self, residual: float, tol: float):
        self.residual = residual
        self.tol = tol
        super().__init__(f"not a fixed point: ||g(x0) - x0|| = {residual!r} > tol = {tol!r}")


class CenterMismatch(DalyapError, ValueError):
    pass


class SingularDegreeOperator(DalyapError, ArithmeticError):
    def __init__(self, degree: int):
        self.degree = degree
        super().__init__(f"degree-{degree} homogeneous operator is numerically singular")


class NoConvergence(DalyapError, ArithmeticError):
    def __init__(self, iterations: int, change: float):
        self.iterations = iterations
        self.change = change
        super().__init__(f"no convergence after {iterations} iterations (last change {change:.3g})")


class SeriesOverflow(DalyapError, ArithmeticError):
    """A double-precision kernel left the representable range."""


class EmptyLayer(DalyapError, ValueError):
    pass


class GridMismatch(DalyapError, ValueError):
    pass


class DegenerateBox(DalyapError, ValueError):
    pass
