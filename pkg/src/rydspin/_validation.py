"""Small argument checks shared across modules."""

from __future__ import annotations

import math

import numpy as np

from .exceptions import InvalidArgumentError


def finite(name: str, x) -> float:
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"{name} must be a real number, got {x!r}") from None
    if not math.isfinite(v):
        raise InvalidArgumentError(f"{name} must be finite, got {x!r}")
    return v


def positive(name: str, x) -> float:
    v = finite(name, x)
    if v <= 0:
        raise InvalidArgumentError(f"{name} must be positive, got {x!r}")
    return v


def nonnegative(name: str, x) -> float:
    v = finite(name, x)
    if v < 0:
        raise InvalidArgumentError(f"{name} must be non-negative, got {x!r}")
    return v


def rho_range(rng) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in rng)
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"rho_range must be a (lo, hi) pair, got {rng!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo <= 0 or hi <= lo:
        raise InvalidArgumentError(f"rho_range must satisfy 0 < lo < hi, got {rng!r}")
    return lo, hi


def log_grid(lo: float, hi: float, per_decade: int) -> np.ndarray:
    if per_decade < 1:
        raise InvalidArgumentError(f"points per decade must be >= 1, got {per_decade}")
    n = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)


def is_hermitian(m: np.ndarray, rtol: float = 1e-12) -> bool:
    scale = max(float(np.abs(m).max()), 1e-300)
    return float(np.abs(m - m.conj().T).max()) <= rtol * scale
