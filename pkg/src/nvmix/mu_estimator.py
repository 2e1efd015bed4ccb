"""Estimation of the drift ``mu`` from the zero of a weighted exponential transform.

For an odd weight ``w`` with ``w <= 0`` on the positive half-line, the
empirical transform ``W_n(rho) = mean(exp(-rho X) w(X))`` is nondecreasing in
``rho``; its population counterpart vanishes exactly at ``rho = mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .models import Sample

__all__ = ["WeightFunction", "MuEstimate", "sine_weight", "w_n", "estimate_mu", "WEIGHTS"]

DEFAULT_BIG_M = 10.0
DEFAULT_TOL = 1e-10
MAX_ITER = 200


@dataclass(frozen=True)
class WeightFunction:
    """Odd, nonpositive-on-R+, Lipschitz weight supported on ``[-radius, radius]``."""

    func: Callable[[np.ndarray], np.ndarray]
    radius: float
    tag: str

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= self.radius, self.func(x), 0.0)


def sine_weight() -> WeightFunction:
    """``w(x) = -sin(x) 1(|x| <= pi)``."""
    return WeightFunction(lambda x: -np.sin(x), math.pi, "sine")


WEIGHTS = {"sine": sine_weight}


@dataclass(frozen=True)
class MuEstimate:
    value: float
    bracket_found: bool
    iterations: int
    w_n_at_zero: float


def _support_terms(sample, w: WeightFunction):
    x = sample.values if isinstance(sample, Sample) else np.asarray(sample, dtype=float)
    inside = np.abs(x) <= w.radius
    return x[inside], w(x[inside]), x.size


def w_n(rho, sample, w: WeightFunction):
    """
    Empirical transform ``(1/n) sum exp(-rho X_i) w(X_i)``.

    Only observations inside the weight's support contribute, which bounds
    every exponential by ``exp(|rho| * radius)``. ``rho`` may be an array.
    """
    x, wx, n = _support_terms(sample, w)
    rho = np.asarray(rho, dtype=float)
    # sort so the summation order (and hence the result) ignores sample order
    order = np.lexsort((wx, x))
    x, wx = x[order], wx[order]
    vals = np.exp(-np.multiply.outer(rho, x)) @ wx / n
    return float(vals) if vals.ndim == 0 else vals


def estimate_mu(sample, w: WeightFunction | None = None, big_m: float = DEFAULT_BIG_M,
                tol: float = DEFAULT_TOL) -> MuEstimate:
    """
    ``inf{rho > 0 : W_n(rho) = 0}`` clamped to ``[0, big_m]``, by bisection.

    If ``W_n(0) >= 0`` there is no positive crossing and the estimate is 0
    (``bracket_found`` is False unless ``W_n(0)`` is exactly zero). If
    ``W_n(big_m) < 0`` the estimate is ``big_m`` with ``bracket_found`` False.
    Bisection keeps the left end where ``W_n < 0``, so on a flat zero segment
    it converges to the segment's left end.
    """
    if not big_m > 0 or not tol > 0:
        raise ValueError("big_m and tol must be positive")
    w = w or sine_weight()
    x, wx, n = _support_terms(sample, w)
    order = np.lexsort((wx, x))
    x, wx = x[order], wx[order]

    def f(rho):
        return float(np.exp(-rho * x) @ wx) / n

    f0 = f(0.0)
    if f0 >= 0.0:
        return MuEstimate(0.0, f0 == 0.0, 0, f0)
    if f(big_m) < 0.0:
        return MuEstimate(float(big_m), False, 0, f0)

    lo, hi = 0.0, float(big_m)
    it = 0
    while hi - lo > tol and it < MAX_ITER:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    return MuEstimate(min(max(hi, 0.0), big_m), True, it, f0)
