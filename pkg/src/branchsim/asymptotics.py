"""Finite-depth tail approximation for regularly-varying offspring counts.

When N has a power tail and the weights and additive term are light, the
depth-``k`` value inherits the tail of N up to an explicit constant:

    P(value > x) ~ coefficient * P(N > x)  as x -> inf,

where the coefficient collects the component means, the contraction indices
and a finite geometric-type sum over the levels.  The curve is a reference
overlay for tail plots, never a pass/fail gate: it only bites eventually.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DistributionSpec, zeta_tail_sum, zeta_value


@dataclass(frozen=True)
class TailAsymptotic:
    """Evaluated prefactor of the tail curve ``coefficient * P(N > x)``."""

    alpha: float
    coefficient: float
    k: int

    def __post_init__(self) -> None:
        if self.coefficient < 0:
            raise ValueError("tail coefficient must be nonnegative")
        if self.k < 0:
            raise ValueError("depth must be nonnegative")


def tail_coefficient(
    ec: float, eq: float, rho_1: float, rho_alpha: float, alpha: float, k: int
) -> float:
    """Evaluate the tail prefactor by direct summation:

    ``(ec*eq)^alpha / (1-rho_1)^alpha * sum_{j=0..k} rho_alpha^j
    (1 - rho_1^(k-j))^alpha``.
    """
    if k < 0:
        raise ValueError(f"depth must be >= 0, got {k}")
    if not 0.0 <= rho_1 < 1.0:
        raise ValueError(f"rho_1 must lie in [0, 1), got {rho_1}")
    if rho_alpha < 0.0:
        raise ValueError(f"rho_alpha must be >= 0, got {rho_alpha}")
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    prefactor = (ec * eq) ** alpha / (1.0 - rho_1) ** alpha
    total = sum(rho_alpha**j * (1.0 - rho_1 ** (k - j)) ** alpha for j in range(k + 1))
    return prefactor * total


def zeta_tail(s: float, x: float) -> float:
    """``P(N > x)`` for the zeta law with mass proportional to ``k^(-s)``."""
    if s <= 1.0:
        raise ValueError(f"zeta law requires s > 1, got {s}")
    if x < 0.0:
        raise ValueError(f"x must be >= 0, got {x}")
    if x < 1.0:
        return 1.0
    return zeta_tail_sum(s, int(math.floor(x)) + 1) / zeta_value(s)


def g_k(x, tail: TailAsymptotic, n_spec: DistributionSpec):
    """Tail curve ``coefficient * P(N > x)`` for a zeta offspring law.

    Intended to be evaluated on an integer grid and linearly interpolated
    in between when plotted.
    """
    if n_spec.kind != "zeta":
        raise ValueError(
            f"the tail curve requires a zeta offspring law, got {n_spec.kind}"
        )
    s = n_spec.params[0]
    if np.ndim(x):
        return np.array([tail.coefficient * zeta_tail(s, xi) for xi in np.asarray(x)])
    return tail.coefficient * zeta_tail(s, float(x))
