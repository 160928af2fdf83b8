"""Exception types raised by rydspin."""

from __future__ import annotations


class InvalidArgumentError(ValueError):
    """Malformed input: bad quantum numbers, non-positive separations, unknown tags."""


class PoleError(ArithmeticError):
    """A closed-form potential was evaluated at (or next to) one of its divergence radii."""

    def __init__(self, msg: str, radius: float):
        super().__init__(f"{msg} (divergence radius {radius:.12g} um)")
        self.radius = radius


class ResonanceError(ArithmeticError):
    """A laser-coupled Rydberg block is (nearly) singular at the requested geometry."""

    def __init__(self, msg: str, eigenvalue: float):
        super().__init__(f"{msg} (offending eigenvalue {eigenvalue:.6g} 2pi*MHz)")
        self.eigenvalue = eigenvalue


class NotFoundError(RuntimeError):
    """A root or design point could not be located inside the given bounds."""


class InfeasibleError(RuntimeError):
    """No parameter point inside the bounds satisfies the validity constraints."""

    def __init__(self, msg: str, report=None):
        super().__init__(msg)
        self.report = report


class ConfigError(ValueError):
    """A run configuration or channel file could not be parsed."""
