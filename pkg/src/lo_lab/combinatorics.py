"""Exact sums of central binomial coefficients and their asymptotics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .core import ExactProb, InvalidInputError, as_fraction


@dataclass(frozen=True)
class BinomialSum:
    """S(n, s): the sum of the s largest binomial coefficients C(n, i)."""

    n: int
    s: int
    value: int


def binom_sum(n: int, s: int) -> BinomialSum:
    """Exact S(n, s) with arbitrary precision.

    The s largest coefficients form a contiguous block of indices around
    n/2; for even block lengths the two symmetric placements tie, and the
    lower one is taken.
    """
    if n < 0 or s < 1:
        raise InvalidInputError("binom_sum needs n >= 0 and s >= 1")
    if s >= n + 1:
        return BinomialSum(n, s, 1 << n)
    lo = (n - s + 1) // 2
    value = sum(math.comb(n, i) for i in range(lo, lo + s))
    return BinomialSum(n, s, value)


def threshold_count(delta) -> int:
    """Number of unit-spaced atoms a closed radius-delta interval can hold."""
    d = as_fraction(delta)
    if d < 0:
        raise InvalidInputError("delta must be nonnegative")
    return int(d.numerator // d.denominator) + 1


def erdos_bound(n: int, delta) -> ExactProb:
    """The exact one-dimensional ceiling 2^-n S(n, floor(delta)+1)."""
    s = threshold_count(delta)
    return ExactProb(binom_sum(n, s).value, n)


def stirling_approx(n: int, s: int) -> float:
    """Large-n value of 2^-n S(n, s) sqrt(n): sqrt(2/pi) * s / sqrt(n) ... times sqrt(n).

    Returns sqrt(2/pi) * s / sqrt(n), the first-order approximation of
    2^-n S(n, s).
    """
    if n < 1:
        raise InvalidInputError("stirling_approx needs n >= 1")
    return math.sqrt(2.0 / math.pi) * s / math.sqrt(n)


def half_sum_average(n: int, s: int) -> tuple[Fraction, Fraction]:
    """The shortened-sum average against the full bound, both exact.

    Returns (lhs, rhs) with lhs = (2^-m S(m,s-1) + 2^-m S(m,s)) / 2 at
    m = n - floor(n^(2/3)) and rhs = 2^-n S(n,s); for s >= 3 and large n
    the average falls strictly below the full bound.
    """
    if s < 2:
        raise InvalidInputError("half_sum_average needs s >= 2")
    m = n - math.isqrt(n * n) ** 0  # placeholder, replaced below
    m = n - round(n ** (2.0 / 3.0))
    lhs = (Fraction(binom_sum(m, s - 1).value, 1 << m)
           + Fraction(binom_sum(m, s).value, 1 << m)) / 2
    rhs = Fraction(binom_sum(n, s).value, 1 << n)
    return lhs, rhs
