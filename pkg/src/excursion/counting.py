"""Exhaustive counting oracles for rationals in intervals.

Counts are exact.  The direct enumeration is the ground truth; a
Moebius-inverted floor-sum path computes the same number in
O(D * log) for bands far beyond direct reach, where D is bounded by
the band top over the minimal height in the interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
import numpy as np

from .cf import PrimitiveVector
from .errors import BudgetExceededError, CertificationError


@dataclass(frozen=True)
class RationalInterval:
    """An interval with exact rational endpoints and per-endpoint openness."""

    lo: Fraction
    hi: Fraction
    lo_open: bool = False
    hi_open: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if not self.lo < self.hi:
            raise ValueError("interval requires lo < hi")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, x: Fraction) -> bool:
        if self.lo_open:
            if not self.lo < x:
                return False
        elif not self.lo <= x:
            return False
        if self.hi_open:
            return x < self.hi
        return x <= self.hi

    def numerator_range(self, q: int) -> tuple[int, int]:
        """Inclusive admissible numerator range for denominator q."""
        lo_scaled = self.lo * q
        hi_scaled = self.hi * q
        p_min = math.floor(lo_scaled) + 1 if self.lo_open else math.ceil(lo_scaled)
        p_max = math.ceil(hi_scaled) - 1 if self.hi_open else math.floor(hi_scaled)
        return p_min, p_max

    def __str__(self) -> str:
        l = "(" if self.lo_open else "["
        r = ")" if self.hi_open else "]"
        return f"{l}{self.lo}, {self.hi}{r}"


# ---------------------------------------------------------------------------
# minimal height by Stern-Brocot / continued-fraction descent
# ---------------------------------------------------------------------------

_INF = object()


def min_height_in_interval(interval: RationalInterval) -> PrimitiveVector:
    """The rational of minimal height in the interval, exactly.

    Walks the continued-fraction digits the two endpoints share; the first
    position where an admissible integer separates them yields the unique
    minimal-height rational (ties possible only at height 1, broken toward
    the smaller value).
    """
    lo, hi = interval.lo, interval.hi
    lo_open, hi_open = interval.lo_open, interval.hi_open
    digits: list[int] = []
    while True:
        if lo.denominator == 1:
            k0 = int(lo) + (1 if lo_open else 0)
        else:
            k0 = math.floor(lo) + 1
        admissible = True if hi is _INF else (k0 < hi if hi_open else k0 <= hi)
        if admissible:
            digits.append(k0)
            break
        a = math.floor(lo)
        digits.append(a)
        new_lo = Fraction(1) / (hi - a)
        new_hi = _INF if lo == a else Fraction(1) / (lo - a)
        lo, hi = new_lo, new_hi
        lo_open, hi_open = hi_open, lo_open
    num, den = digits[-1], 1
    for a in reversed(digits[:-1]):
        num, den = a * num + den, num
    v = PrimitiveVector(num, den)
    assert interval.contains(v.value)
    return v


# ---------------------------------------------------------------------------
# fast exact window counts (no gcd condition) via floor sums
# ---------------------------------------------------------------------------


def floor_sum(n: int, m: int, a: int, b: int) -> int:
    """sum_{i=0}^{n-1} floor((a*i + b) / m), exact for any sign of a, b."""
    assert n >= 0 and m > 0
    ans = 0
    if a < 0:
        a_mod = a % m
        ans -= n * (n - 1) // 2 * ((a_mod - a) // m)
        a = a_mod
    if b < 0:
        b_mod = b % m
        ans -= n * ((b_mod - b) // m)
        b = b_mod
    while True:
        if a >= m:
            ans += n * (n - 1) // 2 * (a // m)
            a %= m
        if b >= m:
            ans += n * (b // m)
            b %= m
        y_max = a * n + b
        if y_max < m:
            return ans
        n, b = divmod(y_max, m)
        m, a = a, m


def _window_count_raw(interval: RationalInterval, q_lo: int, q_hi: int) -> int:
    """#{(p, q) : q_lo <= q <= q_hi, p/q in interval}, gcd-free, exact."""
    if q_hi < q_lo:
        return 0

    def cum(a: int, m: int, shift: int) -> int:
        # sum_{q=q_lo}^{q_hi} floor((a*q + shift)/m)
        return floor_sum(q_hi + 1, m, a, shift) - floor_sum(q_lo, m, a, shift)

    hi_n, hi_d = interval.hi.numerator, interval.hi.denominator
    lo_n, lo_d = interval.lo.numerator, interval.lo.denominator
    upper = cum(hi_n, hi_d, -1 if interval.hi_open else 0)
    lower = cum(lo_n, lo_d, 0 if interval.lo_open else -1)
    return upper - lower


def mobius_sieve(n: int) -> np.ndarray:
    """mu(0..n) as an int8 array."""
    mu = np.ones(n + 1, dtype=np.int8)
    mu[0] = 0
    primes = np.ones(n + 1, dtype=bool)
    primes[:2] = False
    for p in range(2, int(n**0.5) + 1):
        if primes[p]:
            primes[p * p :: p] = False
            mu[p::p] *= -1
            mu[p * p :: p * p] = 0
    for p in range(int(n**0.5) + 1, n + 1):
        if primes[p]:
            mu[p::p] *= -1
    return mu


def _coprime_window_count(
    interval: RationalInterval, q_lo: int, q_hi: int, d_budget: int
) -> int:
    """Exact coprime count over q in [q_lo, q_hi] by Moebius inversion.

    The divisor range is capped by q_hi // (minimal height in the interval):
    beyond it the scaled window holds no rational at all.
    """
    q_min = min_height_in_interval(interval).q
    d_max = q_hi // q_min
    if d_max > d_budget:
        raise BudgetExceededError(
            f"Moebius range {d_max} exceeds budget {d_budget}"
        )
    mu = mobius_sieve(max(1, d_max))
    total = 0
    for d in range(1, d_max + 1):
        m = int(mu[d])
        if m == 0:
            continue
        lo_q = -(-q_lo // d)  # ceil
        hi_q = q_hi // d
        if lo_q > hi_q:
            continue
        total += m * _window_count_raw(interval, lo_q, hi_q)
    return total


# ---------------------------------------------------------------------------
# the two counting operations
# ---------------------------------------------------------------------------

DIRECT_BUDGET = 5_000_000
MOBIUS_BUDGET = 40_000_000


def _count_direct(interval: RationalInterval, q_lo: int, q_hi: int, budget: int) -> int:
    est = (q_hi - q_lo + 1) + int(interval.width * (q_hi * q_hi - q_lo * q_lo) / 2) + 1
    if est > budget:
        raise BudgetExceededError(f"direct enumeration estimate {est} over budget")
    count = 0
    for q in range(q_lo, q_hi + 1):
        p_min, p_max = interval.numerator_range(q)
        for p in range(p_min, p_max + 1):
            if math.gcd(p, q) == 1:
                count += 1
    return count


def count_heights_in_band(
    interval: RationalInterval,
    h: int,
    method: str = "auto",
    direct_budget: int = DIRECT_BUDGET,
    mobius_budget: int = MOBIUS_BUDGET,
) -> int:
    """Exact number of rationals in the interval with height in [h, 2h]."""
    if h < 1:
        raise ValueError("h must be >= 1")
    q_lo, q_hi = h, 2 * h
    if method == "direct":
        return _count_direct(interval, q_lo, q_hi, direct_budget)
    if method == "mobius":
        return _coprime_window_count(interval, q_lo, q_hi, mobius_budget)
    est = (q_hi - q_lo + 1) + int(interval.width * (q_hi * q_hi - q_lo * q_lo) / 2)
    if est <= direct_budget:
        return _count_direct(interval, q_lo, q_hi, direct_budget)
    return _coprime_window_count(interval, q_lo, q_hi, mobius_budget)


def floor_ratio_bound(q: int, b: int, width: Fraction) -> Fraction:
    """The ceiling 2*b*q^2*|I| that the floor-ratio count never exceeds."""
    return 2 * b * q * q * Fraction(width)


def count_floor_ratio(
    interval: RationalInterval,
    q: int,
    b: int,
    budget: int = DIRECT_BUDGET,
    check_bound: bool = True,
) -> int:
    """Exact number of rationals in the interval whose height q' has
    floor(q'/q) = b, where q is the minimal height in the interval.

    Raises CertificationError if q is not minimal, or if the count exceeds
    the provable ceiling 2*b*q^2*|I| + 1.  The +1 is the open-interval grid
    round-up: the projection argument bounds the count by the number of
    multiples of 1/q in an open interval of length (b+1)*q*|I|, which is at
    most (b+1)*q^2*|I| + 1, and boundary-aligned intervals really do attain
    the extra point (e.g. (-5/31, -7373/48019) with q = 13, b = 1 holds
    -2/13, -3/19, -4/25 against a nominal ceiling of 4056/1549 < 3).
    """
    if b < 0:
        raise ValueError("b must be >= 0")
    actual = min_height_in_interval(interval)
    if actual.q != q:
        raise CertificationError(
            "minimal-height precondition",
            f"minimal height in {interval} is {actual.q}, not {q}",
        )
    q_lo, q_hi = max(1, b * q), (b + 1) * q - 1
    count = 0
    if q_hi >= q_lo:
        est = (q_hi - q_lo + 1) + int(interval.width * (q_hi * q_hi - q_lo * q_lo) / 2) + 1
        if est > budget:
            raise BudgetExceededError(f"enumeration estimate {est} over budget")
        for qq in range(q_lo, q_hi + 1):
            p_min, p_max = interval.numerator_range(qq)
            for p in range(p_min, p_max + 1):
                if math.gcd(p, qq) == 1:
                    count += 1
    if check_bound and count > floor_ratio_bound(q, b, interval.width) + 1:
        raise CertificationError(
            "floor-ratio ceiling",
            f"count {count} exceeds 2*b*q^2*|I| + 1 = "
            f"{floor_ratio_bound(q, b, interval.width) + 1}",
        )
    return count
