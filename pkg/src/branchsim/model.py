"""Generic branching vector: component laws, exact samplers, analytic moments.

A branching vector ``(Q, N, C_1, C_2, ...)`` drives the linear recursion
``R <- sum_i C_i * R_i + Q``.  This module holds the parametric scalar laws
used for the components, the vector variants (independent components, the
shared-uniform divide-and-conquer composite, and the homogeneous variant
without an additive term), the moment machinery ``rho`` / ``q_moment``, and
the contraction-condition checker that gates convergence guarantees.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import xlogy


class UnsupportedMomentError(ValueError):
    """Requested moment does not exist or has no implemented closed form."""


# ---------------------------------------------------------------------------
# Draw accounting
# ---------------------------------------------------------------------------


class DrawCounter:
    """Global tally of branching-vector and standalone Q draws.

    Increments are batched (one lock acquisition per vectorized call), so the
    final counts are exact regardless of how work is scheduled.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._vectors = 0
        self._q = 0

    def add_vectors(self, count: int = 1) -> None:
        with self._lock:
            self._vectors += count

    def add_q(self, count: int = 1) -> None:
        with self._lock:
            self._q += count

    def snapshot(self) -> tuple[int, int]:
        """Return ``(vector_draws, q_draws)``."""
        with self._lock:
            return self._vectors, self._q

    def reset(self) -> None:
        with self._lock:
            self._vectors = 0
            self._q = 0


DRAW_COUNTER = DrawCounter()


# ---------------------------------------------------------------------------
# Riemann zeta helpers (direct series + Euler-Maclaurin tail)
# ---------------------------------------------------------------------------

_EM_CUTOFF = 40


def _em_tail(s: float, start: int) -> float:
    # Euler-Maclaurin for sum_{k>=start} k^(-s); error ~ s^7 start^(-s-7)/1.2e6,
    # far below 1e-12 relative for start >= 40 and s > 1.
    k = float(start)
    total = k ** (1.0 - s) / (s - 1.0)
    total += 0.5 * k**-s
    total += s * k ** (-s - 1.0) / 12.0
    total -= s * (s + 1.0) * (s + 2.0) * k ** (-s - 3.0) / 720.0
    total += s * (s + 1) * (s + 2) * (s + 3) * (s + 4) * k ** (-s - 5.0) / 30240.0
    return total


def zeta_tail_sum(s: float, start: int) -> float:
    """``sum_{k >= start} k^(-s)`` for ``s > 1``, to ~1e-13 relative error."""
    if s <= 1.0:
        raise UnsupportedMomentError(f"series diverges for exponent s={s}")
    if start < 1:
        start = 1
    if start >= _EM_CUTOFF:
        return _em_tail(s, start)
    head = sum(k**-s for k in range(start, _EM_CUTOFF))
    return head + _em_tail(s, _EM_CUTOFF)


@lru_cache(maxsize=128)
def zeta_value(s: float) -> float:
    """Riemann zeta at ``s > 1``."""
    return zeta_tail_sum(s, 1)


# ---------------------------------------------------------------------------
# Poisson inversion table
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _poisson_cdf_table(mean: float) -> np.ndarray:
    # Cumulative probabilities built by the stable term recurrence; the table
    # ends at exact 1.0 so searchsorted inversion can never index past it.
    # Mass beyond the table is below 2^-53 and is absorbed into the last atom.
    if mean == 0.0:
        return np.ones(1)
    term = math.exp(-mean)
    cum = [term]
    k = 0
    while 1.0 - cum[-1] > 2.0**-53 and k < 100_000:
        k += 1
        term *= mean / k
        cum.append(cum[-1] + term)
    cum[-1] = 1.0
    return np.asarray(cum)


# ---------------------------------------------------------------------------
# Scalar component laws
# ---------------------------------------------------------------------------

_KINDS = {
    "constant": ("value",),
    "uniform": ("a", "b"),
    "exponential": ("rate",),
    "poisson": ("mean",),
    "zeta": ("s",),
    "bernoulli": ("p",),
}

_DISCRETE_KINDS = {"poisson", "zeta", "bernoulli"}


@dataclass(frozen=True)
class DistributionSpec:
    """Parametric description of one scalar component law.

    Instances are immutable and validated at construction; use the
    per-kind constructors (``DistributionSpec.uniform(0, 1)`` etc.).
    """

    kind: str
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        names = _KINDS[self.kind]
        if len(self.params) != len(names):
            raise ValueError(
                f"{self.kind} takes {len(names)} parameter(s) {names}, "
                f"got {len(self.params)}"
            )
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        p = self.params
        if self.kind == "uniform" and not p[0] < p[1]:
            raise ValueError(f"uniform requires a < b, got a={p[0]}, b={p[1]}")
        if self.kind == "exponential" and not p[0] > 0:
            raise ValueError(f"exponential requires rate > 0, got {p[0]}")
        if self.kind == "poisson" and not p[0] >= 0:
            raise ValueError(f"poisson requires mean >= 0, got {p[0]}")
        if self.kind == "zeta" and not p[0] > 1:
            raise ValueError(f"zeta requires exponent s > 1, got {p[0]}")
        if self.kind == "bernoulli" and not 0 <= p[0] <= 1:
            raise ValueError(f"bernoulli requires 0 <= p <= 1, got {p[0]}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, value: float) -> DistributionSpec:
        return cls("constant", (value,))

    @classmethod
    def uniform(cls, a: float, b: float) -> DistributionSpec:
        return cls("uniform", (a, b))

    @classmethod
    def exponential(cls, rate: float) -> DistributionSpec:
        return cls("exponential", (rate,))

    @classmethod
    def poisson(cls, mean: float) -> DistributionSpec:
        return cls("poisson", (mean,))

    @classmethod
    def zeta(cls, s: float) -> DistributionSpec:
        return cls("zeta", (s,))

    @classmethod
    def bernoulli(cls, p: float) -> DistributionSpec:
        return cls("bernoulli", (p,))

    # -- structural properties ----------------------------------------------

    @property
    def integer_valued(self) -> bool:
        """True when every draw is a nonnegative integer (admissible for N)."""
        if self.kind == "constant":
            v = self.params[0]
            return v >= 0 and v == int(v)
        return self.kind in _DISCRETE_KINDS

    @property
    def nonnegative(self) -> bool:
        """True when the support lies in [0, inf)."""
        if self.kind == "constant":
            return self.params[0] >= 0
        if self.kind == "uniform":
            return self.params[0] >= 0
        return True  # exponential, poisson, zeta, bernoulli

    def canonical(self) -> str:
        args = ",".join(repr(v) for v in self.params)
        return f"{self.kind}({args})"

    # -- sampling -----------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw from the law; scalar for ``size=None``, else an array.

        Continuous kinds and poisson consume exactly one uniform per draw
        (inverse-CDF); zeta uses the exact rejection sampler, bernoulli one
        uniform.  Integer kinds return int64.
        """
        n = 1 if size is None else int(size)
        kind = self.kind
        if kind == "constant":
            v = self.params[0]
            if self.integer_valued:
                out = np.full(n, int(v), dtype=np.int64)
            else:
                out = np.full(n, v)
        elif kind == "uniform":
            a, b = self.params
            out = rng.random(n)
            if b - a != 1.0:
                out *= b - a
            if a != 0.0:
                out += a
        elif kind == "exponential":
            out = rng.random(n)
            np.negative(out, out=out)
            np.log1p(out, out=out)
            out /= -self.params[0]
        elif kind == "poisson":
            table = _poisson_cdf_table(self.params[0])
            out = np.searchsorted(table, rng.random(n), side="left").astype(np.int64)
        elif kind == "zeta":
            out = rng.zipf(self.params[0], n).astype(np.int64)
        else:  # bernoulli
            out = (rng.random(n) < self.params[0]).astype(np.int64)
        if size is None:
            return out[0].item()
        return out

    # -- analytic moments ----------------------------------------------------

    def mean(self) -> float:
        """Exact mean; raises :class:`UnsupportedMomentError` if infinite."""
        kind, p = self.kind, self.params
        if kind == "constant":
            return p[0]
        if kind == "uniform":
            return 0.5 * (p[0] + p[1])
        if kind == "exponential":
            return 1.0 / p[0]
        if kind == "poisson":
            return p[0]
        if kind == "zeta":
            if p[0] <= 2.0:
                raise UnsupportedMomentError(
                    f"zeta(s={p[0]}) has infinite mean (requires s > 2)"
                )
            return zeta_value(p[0] - 1.0) / zeta_value(p[0])
        return p[0]  # bernoulli

    def moment(self, beta: float, absolute: bool = True) -> float:
        """``E[X^beta]`` or ``E[|X|^beta]`` in closed form, ``beta >= 1``.

        Non-absolute moments are available for ``beta in {1, 2}`` only; other
        combinations without a closed form raise UnsupportedMomentError.
        """
        if beta < 1.0:
            raise ValueError(f"moment order must be >= 1, got {beta}")
        if not absolute and beta not in (1.0, 2.0):
            raise UnsupportedMomentError(
                f"signed moment of order {beta} has no closed form"
            )
        if not absolute and beta == 1.0:
            return self.mean()
        kind, p = self.kind, self.params
        if kind == "constant":
            return abs(p[0]) ** beta if absolute else p[0] ** beta
        if kind == "uniform":
            a, b = p
            e = beta + 1.0
            if a >= 0:
                num = b**e - a**e
            elif b <= 0:
                num = abs(a) ** e - abs(b) ** e
            else:
                num = abs(a) ** e + b**e
            return num / ((b - a) * e)
        if kind == "exponential":
            return math.gamma(beta + 1.0) / p[0] ** beta
        if kind == "poisson":
            if beta == 1.0:
                return p[0]
            if beta == 2.0:
                return p[0] + p[0] ** 2
            raise UnsupportedMomentError(
                f"poisson moment of order {beta} has no closed form"
            )
        if kind == "zeta":
            s = p[0]
            if s - beta <= 1.0:
                raise UnsupportedMomentError(
                    f"zeta(s={s}) moment of order {beta} is infinite"
                )
            return zeta_value(s - beta) / zeta_value(s)
        return p[0]  # bernoulli: |X|^beta = X for X in {0,1}


# ---------------------------------------------------------------------------
# Branching vectors
# ---------------------------------------------------------------------------

VARIANTS = ("independent", "quicksort", "homogeneous")


def divide_conquer_toll(u):
    """Additive term of the shared-uniform composite: 2u ln u + 2(1-u) ln(1-u) + 1."""
    return 2.0 * xlogy(u, u) + 2.0 * xlogy(1.0 - u, 1.0 - u) + 1.0


@dataclass(frozen=True)
class BranchingVectorSpec:
    """The generic branching vector ``(Q, N, C_1, C_2, ...)``.

    ``independent``: Q, N, {C_i} mutually independent, C_i i.i.d.
    ``quicksort``:   N = 2, C_1 = U, C_2 = 1-U, Q the toll term, one shared
                     uniform U per draw (dependence within the vector).
    ``homogeneous``: no additive term (Q = 0); requires C_i >= 0.
    """

    q: DistributionSpec | None
    n: DistributionSpec
    c: DistributionSpec
    variant: str = "independent"

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.n.integer_valued:
            raise ValueError(
                f"N law must be integer-valued, got {self.n.canonical()}"
            )
        if self.variant == "independent":
            if self.q is None:
                raise ValueError("independent variant requires a Q law")
        elif self.variant == "homogeneous":
            if self.q is not None:
                raise ValueError("homogeneous variant carries no Q law")
            if not self.c.nonnegative:
                raise ValueError(
                    f"homogeneous variant requires C >= 0, got {self.c.canonical()}"
                )
        else:  # quicksort: components are implied by the construction
            if self.q is not None:
                raise ValueError("quicksort variant carries an implied Q")
            if self.n != DistributionSpec.constant(2) or self.c != (
                DistributionSpec.uniform(0.0, 1.0)
            ):
                raise ValueError(
                    "quicksort variant fixes N = 2 and marginally uniform(0,1) "
                    "weights; use BranchingVectorSpec.quicksort()"
                )

    @classmethod
    def independent(
        cls, q: DistributionSpec, n: DistributionSpec, c: DistributionSpec
    ) -> BranchingVectorSpec:
        return cls(q, n, c, "independent")

    @classmethod
    def quicksort(cls) -> BranchingVectorSpec:
        # N and the C marginals are stored explicitly so E[N], rho and chunk
        # sizing work through the common code paths; sampling is dispatched
        # on the variant and uses the shared uniform.
        return cls(
            None,
            DistributionSpec.constant(2),
            DistributionSpec.uniform(0.0, 1.0),
            "quicksort",
        )

    @classmethod
    def homogeneous(
        cls, n: DistributionSpec, c: DistributionSpec
    ) -> BranchingVectorSpec:
        return cls(None, n, c, "homogeneous")

    @property
    def has_q(self) -> bool:
        return self.variant != "homogeneous"

    def canonical(self) -> str:
        q = self.q.canonical() if self.q is not None else "none"
        return (
            f"variant={self.variant};q={q};n={self.n.canonical()};"
            f"c={self.c.canonical()}"
        )


# ---------------------------------------------------------------------------
# Vector sampling
# ---------------------------------------------------------------------------


def sample_vector(
    spec: BranchingVectorSpec, rng: np.random.Generator
) -> tuple[float, int, np.ndarray]:
    """Draw one generic branching vector ``(q, n, c)``.

    ``c`` has exactly ``n`` entries.  Increments the global vector-draw
    counter by one.
    """
    if spec.variant == "quicksort":
        u = rng.random()
        q = float(divide_conquer_toll(u))
        n = 2
        c = np.array([u, 1.0 - u])
    elif spec.variant == "homogeneous":
        q = 0.0
        n = int(spec.n.sample(rng))
        c = np.asarray(spec.c.sample(rng, n), dtype=float)
    else:
        q = float(spec.q.sample(rng))
        n = int(spec.n.sample(rng))
        c = np.asarray(spec.c.sample(rng, n), dtype=float)
    DRAW_COUNTER.add_vectors(1)
    return q, n, c


def sample_vectors(
    spec: BranchingVectorSpec, size: int, rng: np.random.Generator
) -> tuple[np.ndarray | None, np.ndarray, np.ndarray]:
    """Draw ``size`` vectors at once: ``(q, n, c_flat)``.

    ``c_flat`` concatenates the weight lists in vector order (``n[i]``
    entries each).  ``q`` is None for the homogeneous variant.  Increments
    the vector-draw counter by ``size``.
    """
    if spec.variant == "quicksort":
        u = rng.random(size)
        q = divide_conquer_toll(u)
        n = np.full(size, 2, dtype=np.int64)
        c = np.empty(2 * size)
        c[0::2] = u
        c[1::2] = 1.0 - u
    else:
        if spec.has_q:
            q = np.asarray(spec.q.sample(rng, size), dtype=float)
        else:
            q = None
        n = spec.n.sample(rng, size)
        c = np.asarray(spec.c.sample(rng, int(n.sum())), dtype=float)
    DRAW_COUNTER.add_vectors(size)
    return q, n, c


def sample_q(
    spec: BranchingVectorSpec, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``size`` i.i.d. copies of Q alone (counts as Q draws)."""
    if not spec.has_q:
        raise ValueError("homogeneous variant has no Q component")
    if spec.variant == "quicksort":
        out = divide_conquer_toll(rng.random(size))
    else:
        out = np.asarray(spec.q.sample(rng, size), dtype=float)
    DRAW_COUNTER.add_q(size)
    return out


# ---------------------------------------------------------------------------
# Moment functionals
# ---------------------------------------------------------------------------


def rho(spec: BranchingVectorSpec, beta: float) -> float:
    """``E[sum_{i<=N} |C_i|^beta]``, the contraction index of order ``beta``.

    Closed form per component law; for the quicksort composite the shared
    uniform gives exactly ``2/(beta+1)``.
    """
    if beta < 1.0:
        raise ValueError(f"rho order must be >= 1, got {beta}")
    if spec.variant == "quicksort":
        return 2.0 / (beta + 1.0)
    en = spec.n.mean()  # raises UnsupportedMomentError when infinite
    if en == 0.0:
        return 0.0
    return en * spec.c.moment(beta, absolute=True)


def _quicksort_q_moment(beta: float, absolute: bool) -> float:
    if beta == 1.0 and not absolute:
        # E[2U ln U] = -1/2 per term; the toll mean vanishes exactly.
        return 0.0
    if beta == 2.0:
        absolute = True  # squaring makes the sign irrelevant

    def integrand(u: float) -> float:
        t = divide_conquer_toll(u)
        return abs(t) ** beta if absolute else t**beta

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-11, limit=200)
    return val


def q_moment(spec: BranchingVectorSpec, beta: float, absolute: bool = True) -> float:
    """``E[|Q|^beta]`` (or signed ``E[Q^beta]``) for the vector's Q component."""
    if beta < 1.0:
        raise ValueError(f"moment order must be >= 1, got {beta}")
    if spec.variant == "homogeneous":
        return 0.0
    if spec.variant == "quicksort":
        return _quicksort_q_moment(beta, absolute)
    return spec.q.moment(beta, absolute)


# Tolerance for the exact equalities of the critical case; the inputs are
# analytic, not estimated.
_CRITICAL_TOL = 1e-12


@dataclass(frozen=True)
class MomentReport:
    """Outcome of the convergence-condition check."""

    beta: float
    rho_1: float
    rho_beta: float
    q_abs_moment: float
    q_mean: float
    case: str  # "case_i" | "case_ii" | "fail"
    reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.case != "fail"


def check_conditions(spec: BranchingVectorSpec, beta: float) -> MomentReport:
    """Classify the vector against the two sufficient convergence regimes.

    ``case_i``: max(rho_1, rho_beta) < 1.
    ``case_ii``: beta = 2, rho_1 = 1, rho_2 < 1 and E[Q] = 0 (critical case),
    equalities to 1e-12 absolute.  Anything else (including moments that do
    not exist) reports ``fail`` with a reason.
    """
    if beta < 1.0:
        raise ValueError(f"beta must be >= 1, got {beta}")
    try:
        r1 = rho(spec, 1.0)
        rb = rho(spec, beta)
        qa = q_moment(spec, beta, absolute=True)
        qm = q_moment(spec, 1.0, absolute=False)
    except UnsupportedMomentError as exc:
        return MomentReport(beta, math.nan, math.nan, math.nan, math.nan,
                            "fail", str(exc))
    if max(r1, rb) < 1.0:
        return MomentReport(beta, r1, rb, qa, qm, "case_i")
    if (
        abs(beta - 2.0) <= _CRITICAL_TOL
        and abs(r1 - 1.0) <= _CRITICAL_TOL
        and rb < 1.0
        and abs(qm) <= _CRITICAL_TOL
    ):
        return MomentReport(beta, r1, rb, qa, qm, "case_ii")
    return MomentReport(
        beta, r1, rb, qa, qm, "fail",
        f"rho_1={r1:.6g}, rho_beta={rb:.6g}: neither regime applies",
    )
