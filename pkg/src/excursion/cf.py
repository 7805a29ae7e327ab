"""Exact continued-fraction engine.

Primitive vectors (p, q) with gcd(p, q) = 1 and q >= 1 stand for rationals
p/q of height q.  Ladders are the height-increasing recurrence sequences
v[k+1] = a*v[k] + v[k-1] seeded by v[-1] = +-(1, 0); their entries are
exactly the best rational approximations (second kind) of a real number.
All arithmetic is arbitrary precision; nothing here rounds.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .errors import (
    ExcursionError,
    PrecisionError,
    StreamExhaustedError,
    WindowEmptyError,
)


@dataclass(frozen=True)
class PrimitiveVector:
    """A coprime integer pair (p, q) with q >= 1, read as the rational p/q."""

    p: int
    q: int

    def __post_init__(self):
        if self.q < 1:
            raise ValueError(f"height must be >= 1, got {self.q}")
        if math.gcd(self.p, self.q) != 1:
            raise ValueError(f"({self.p}, {self.q}) is not primitive")

    @property
    def value(self) -> Fraction:
        return Fraction(self.p, self.q)

    @property
    def height(self) -> int:
        return self.q

    def cross(self, other: "PrimitiveVector") -> int:
        return self.p * other.q - other.p * self.q

    def __str__(self) -> str:
        return f"{self.p}/{self.q}"


# (p, q) tuples are used internally where +-(1, 0) seeds may occur.
_SEED_PLUS = (1, 0)
_SEED_MINUS = (-1, 0)


def _vec(p: int, q: int) -> PrimitiveVector:
    return PrimitiveVector(p, q)


class PartialQuotientStream:
    """A partial-quotient stream [a0; a1 a2 ...] in canonical form.

    Finite exact streams denote rationals; a ``rule`` callback makes the
    stream lazily extensible (named quadratic irrationals, random streams).
    A finite stream without a rule may also be marked inexact, meaning it is
    a truncation of an unknown irrational.  Lazy extension is the only
    mutation and is guarded by a lock.
    """

    def __init__(
        self,
        a0: int,
        quotients: Sequence[int] = (),
        rule: Optional[Callable[[int], int]] = None,
        exact: Optional[bool] = None,
    ):
        quotients = list(quotients)
        for a in quotients:
            if a < 1:
                raise ValueError("partial quotients after a0 must be >= 1")
        # canonical form for exact finite streams: fold a trailing 1 into the
        # previous quotient (value-preserving); inexact prefixes stay raw so
        # that the ladder they encode is reproduced verbatim.
        if rule is None and exact is not False and quotients and quotients[-1] == 1:
            quotients.pop()
            if quotients:
                quotients[-1] += 1
            else:
                a0 += 1
        self.a0 = a0
        self._quotients = quotients
        self._rule = rule
        self.exact = (rule is None) if exact is None else exact
        self._lock = threading.Lock()

    # -- introspection ----------------------------------------------------

    @property
    def finite(self) -> bool:
        return self._rule is None

    def available(self) -> Optional[int]:
        """Total number of terms (a0 included), or None if unbounded."""
        return 1 + len(self._quotients) if self.finite else None

    def term(self, k: int) -> int:
        """Return a_k, extending via the rule if necessary."""
        if k == 0:
            return self.a0
        if k <= len(self._quotients):
            return self._quotients[k - 1]
        if self._rule is None:
            raise StreamExhaustedError(f"stream has no term a_{k}")
        with self._lock:
            while len(self._quotients) < k:
                a = self._rule(len(self._quotients) + 1)
                if a < 1:
                    raise ValueError("rule produced a quotient < 1")
                self._quotients.append(a)
        return self._quotients[k - 1]

    def prefix(self, count: int) -> list[int]:
        """First min(count, available) terms, a0 included."""
        if count < 1:
            raise ValueError("count must be >= 1")
        n = count if not self.finite else min(count, 1 + len(self._quotients))
        return [self.term(k) for k in range(n)]

    def value(self) -> Fraction:
        """Exact rational value; only meaningful for finite exact streams."""
        if not (self.finite and self.exact):
            raise ExcursionError("stream does not denote an exact rational")
        num, den = 1, 0
        for a in reversed(self.prefix(1 + len(self._quotients))):
            num, den = a * num + den, num
        return Fraction(num, den)

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_rational(cls, x: Fraction) -> "PartialQuotientStream":
        """Euclidean expansion; always lands in canonical form."""
        p, q = x.numerator, x.denominator
        a0 = p // q
        terms = []
        p, q = q, p - a0 * q
        while q:
            a, r = divmod(p, q)
            terms.append(a)
            p, q = q, r
        return cls(a0, terms)

    @classmethod
    def named(cls, name: str) -> "PartialQuotientStream":
        """Shipped constants: sqrt2, sqrt3, golden, e."""
        rules: dict[str, tuple[int, Callable[[int], int]]] = {
            "sqrt2": (1, lambda k: 2),
            "sqrt3": (1, lambda k: 1 if k % 2 == 1 else 2),
            "golden": (1, lambda k: 1),
            "e": (2, lambda k: 2 * (k + 1) // 3 if k % 3 == 2 else 1),
        }
        if name not in rules:
            raise ValueError(f"unknown named stream {name!r}")
        a0, rule = rules[name]
        return cls(a0, (), rule=rule)

    @classmethod
    def random(cls, seed: int, a_max: int = 10) -> "PartialQuotientStream":
        """Seeded infinite stream with quotients uniform on [1, a_max]."""
        import random as _random

        state = _random.Random(seed)
        cache: list[int] = []

        def rule(k: int) -> int:
            while len(cache) < k:
                cache.append(state.randint(1, a_max))
            return cache[k - 1]

        return cls(state.randint(0, 3), (), rule=rule)


def canonical_expand(x, count: int) -> PartialQuotientStream:
    """Canonical partial-quotient prefix of length <= count.

    Rational input expands fully via the Euclidean algorithm (truncated and
    re-canonicalized only if the expansion exceeds ``count`` terms); stream
    input returns its first min(count, available) terms.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if isinstance(x, PartialQuotientStream):
        terms = x.prefix(count)
        if x.finite and len(terms) == x.available():
            return PartialQuotientStream(terms[0], terms[1:], exact=x.exact)
        return PartialQuotientStream(terms[0], terms[1:], exact=False)
    x = Fraction(x)
    stream = PartialQuotientStream.from_rational(x)
    if stream.available() > count:
        terms = stream.prefix(count)
        return PartialQuotientStream(terms[0], terms[1:], exact=False)
    return stream


@dataclass(frozen=True)
class ConvergentLadder:
    """A best-approximation ladder: v[k+1] = a*v[k] + v[k-1], heights rising.

    ``seed`` is the sign s of v[-1] = s*(1, 0); ``quotients`` records the a
    used at each step.  ``exhausted`` flags that a finite stream ran out
    before the requested length was reached.  ``jb_from`` marks the first
    index from which a prescribed growth window is certified, when one is.
    """

    entries: tuple[PrimitiveVector, ...]
    seed: int
    quotients: tuple[int, ...]
    exhausted: bool = False
    jb_from: Optional[int] = None

    def __post_init__(self):
        if not self.entries:
            raise ValueError("ladder must have at least one entry")
        if self.seed not in (1, -1):
            raise ValueError("seed must be +1 or -1")
        if self.entries[0].q != 1:
            raise ValueError("first entry must have height 1")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def heights(self) -> list[int]:
        return [v.q for v in self.entries]

    def check(self) -> None:
        """Assert every ladder invariant entry by entry."""
        prev_p, prev_q = (self.seed, 0)
        for k, (v, a) in enumerate(zip(self.entries[1:], self.quotients)):
            u = self.entries[k]
            lo = 2 if k == 0 else 1
            if a < lo:
                raise ExcursionError(f"quotient a={a} below {lo} at step {k}")
            if v.p != a * u.p + prev_p or v.q != a * u.q + prev_q:
                raise ExcursionError(f"recurrence fails at step {k}")
            if v.q <= u.q:
                raise ExcursionError(f"heights not increasing at step {k}")
            if abs(u.cross(v)) != 1:
                raise ExcursionError(f"cross product != +-1 at step {k}")
            prev_p, prev_q = u.p, u.q


def ladder_from_stream(stream: PartialQuotientStream, count: int) -> ConvergentLadder:
    """Build the first ``count`` ladder entries of a canonical stream.

    When a1 = 1 the standard expansion starts with equal heights, so the
    leading 1 is folded away: a0 becomes a0 + 1, the seed flips to -(1, 0),
    and the first step uses a2 + 1.  This keeps heights strictly increasing
    and yields exactly the best-approximation subsequence.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    a0 = stream.term(0)
    exhausted = False

    def next_term(k: int) -> Optional[int]:
        nonlocal exhausted
        try:
            return stream.term(k)
        except StreamExhaustedError:
            exhausted = True
            return None

    a1 = next_term(1)
    if a1 is None:
        return ConvergentLadder((_vec(a0, 1),), 1, (), exhausted=count > 1)
    if a1 == 1:
        seed = -1
        v0 = _vec(a0 + 1, 1)
        first_index = 2  # stream index feeding step 0
    else:
        seed = 1
        v0 = _vec(a0, 1)
        first_index = 1
    entries = [v0]
    quots: list[int] = []
    prev = (seed, 0)
    idx = first_index
    while len(entries) < count:
        a = next_term(idx)
        if a is None:
            break
        if idx == 2 and seed == -1 and not quots:
            a = a + 1  # fold the leading 1 into the first step
        cur = entries[-1]
        nxt = _vec(a * cur.p + prev[0], a * cur.q + prev[1])
        entries.append(nxt)
        quots.append(a)
        prev = (cur.p, cur.q)
        idx += 1
    ladder = ConvergentLadder(tuple(entries), seed, tuple(quots), exhausted=exhausted)
    ladder.check()
    return ladder


class RealHandle:
    """A real number given by a quotient stream plus a cached ladder prefix.

    The cached prefix only ever grows; growth is locked so handles can be
    shared across threads.
    """

    def __init__(self, stream: PartialQuotientStream, min_entries: int = 2):
        self.stream = stream
        self._lock = threading.Lock()
        self._ladder = ladder_from_stream(stream, max(1, min_entries))

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_rational(cls, x) -> "RealHandle":
        return cls(PartialQuotientStream.from_rational(Fraction(x)))

    @classmethod
    def named(cls, name: str) -> "RealHandle":
        return cls(PartialQuotientStream.named(name))

    @classmethod
    def from_quotients(cls, a0: int, quotients: Sequence[int], exact: bool = True) -> "RealHandle":
        return cls(PartialQuotientStream(a0, quotients, exact=exact))

    @classmethod
    def from_ladder(cls, ladder: ConvergentLadder, exact: bool = False) -> "RealHandle":
        """Wrap an existing ladder, e.g. a prescribed-growth prefix.

        ``exact=False`` marks the handle as a truncation of an irrational:
        its value is only known to lie in the final convergent gap.
        """
        handle = cls.__new__(cls)
        a0 = ladder.entries[0].p if ladder.seed == 1 else ladder.entries[0].p - 1
        quots = list(ladder.quotients)
        if ladder.seed == -1 and quots:
            quots = [1, quots[0] - 1] + quots[1:]
        handle.stream = PartialQuotientStream(a0, quots, exact=exact)
        handle._lock = threading.Lock()
        handle._ladder = ladder
        return handle

    # -- ladder access -----------------------------------------------------

    @property
    def exact(self) -> bool:
        return self.stream.finite and self.stream.exact

    def ladder(self, entries: Optional[int] = None, min_height: Optional[int] = None) -> ConvergentLadder:
        """Return the cached ladder, extended to the requested size."""
        with self._lock:
            need = len(self._ladder)
            if entries is not None:
                need = max(need, entries)
            while True:
                if len(self._ladder) < need:
                    self._ladder = ladder_from_stream(self.stream, need)
                if min_height is not None and self._ladder.entries[-1].q < min_height:
                    if self._ladder.exhausted:
                        if self.exact:
                            break  # complete rational ladder; nothing above
                        raise PrecisionError(
                            f"stream exhausted below height {min_height}"
                        )
                    need = len(self._ladder) + 8
                    continue
                break
            return self._ladder

    def full_ladder(self) -> ConvergentLadder:
        """The complete ladder of an exact rational (exhausted flag set)."""
        if not self.exact:
            raise PrecisionError("only exact rationals have a complete ladder")
        with self._lock:
            if not self._ladder.exhausted:
                self._ladder = ladder_from_stream(
                    self.stream, (self.stream.available() or 1) + 1
                )
        return self._ladder

    def heights(self, min_height: Optional[int] = None) -> list[int]:
        return self.ladder(min_height=min_height).heights

    def value_bracket(self) -> tuple[Fraction, Fraction]:
        """An exact rational interval containing the value."""
        if self.exact:
            v = self.stream.value()
            return (v, v)
        lad = self.ladder(entries=max(2, len(self._ladder)))
        a, b = lad.entries[-2].value, lad.entries[-1].value
        return (a, b) if a <= b else (b, a)

    def exact_value(self) -> Fraction:
        if not self.exact:
            raise PrecisionError("handle does not denote an exact rational")
        return self.stream.value()

    def approx(self, min_height: int = 10**6) -> Fraction:
        """A convergent of height above ``min_height`` (or the exact value)."""
        if self.exact:
            return self.stream.value()
        return self.ladder(min_height=min_height).entries[-1].value


# ---------------------------------------------------------------------------
# successor relations
# ---------------------------------------------------------------------------


def is_best_approx(q: int, x: RealHandle) -> bool:
    """Is q a best-approximation height of x (second kind)?

    Decided by membership among ladder heights, extending the ladder until
    some height exceeds q.  Raises PrecisionError when an inexact stream
    is exhausted before that.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if q == 1:
        return True
    lad = x.ladder(min_height=q)
    return q in set(lad.heights)


def complements(u: PrimitiveVector) -> list[tuple[int, int]]:
    """The vectors w with |w| < |u| and |w x u| = 1 (as raw pairs).

    For |u| = 1 these degenerate to the seeds +-(1, 0); for |u| >= 2 there
    are exactly two, summing to u.
    """
    if u.q == 1:
        return [_SEED_PLUS, _SEED_MINUS]
    # solve w_p * u.q - u.p * w_q = 1 with 0 < w_q < u.q
    inv = pow(u.p, -1, u.q)  # exists: gcd(p, q) = 1 and q >= 2
    w_q = (-inv) % u.q
    w_p = (1 + u.p * w_q) // u.q
    assert w_p * u.q - u.p * w_q == 1 and 0 < w_q < u.q
    return [(w_p, w_q), (u.p - w_p, u.q - w_q)]


def succ_rel(u: PrimitiveVector, v: PrimitiveVector) -> bool:
    """Decide whether v may immediately follow u on some ladder.

    Structural form: |u x v| = 1, |u| < |v|, and v = a*u + w with the
    remainder w below u in height (w a seed when |u| = 1, where a >= 2
    is forced).
    """
    if abs(u.cross(v)) != 1 or u.q >= v.q:
        return False
    if u.q == 1:
        a = v.q
        w = (v.p - a * u.p, 0)
        return a >= 2 and w in (_SEED_PLUS, _SEED_MINUS)
    a, r = divmod(v.q, u.q)
    if a < 1 or r == 0:
        return False
    w_p = v.p - a * u.p
    return math.gcd(w_p, r) == 1 and r < u.q


def predecessors(v: PrimitiveVector) -> list[PrimitiveVector]:
    """All u with u |- v; at most two, with strictly smaller heights."""
    if v.q == 1:
        return []
    return [_vec(p, q) for (p, q) in complements(v)]


def reach_rel(u: PrimitiveVector, v: PrimitiveVector) -> bool:
    """Decide chain-reachability u |- ... |- v (reflexive).

    Backward search from v: each vector has at most two predecessors and
    heights strictly decrease, so the search is finite.  Nodes below u's
    height are pruned.
    """
    if u == v:
        return True
    if u.q >= v.q:
        return False
    seen = {v}
    frontier = [v]
    while frontier:
        nxt = []
        for w in frontier:
            for pre in predecessors(w):
                if pre == u:
                    return True
                if pre.q > u.q and pre not in seen:
                    seen.add(pre)
                    nxt.append(pre)
        frontier = nxt
    return False


def enumerate_successors(u: PrimitiveVector, height_cap: int) -> list[PrimitiveVector]:
    """All v with u |- v and |v| <= height_cap, sorted by (height, value)."""
    if height_cap < u.q:
        raise ValueError("height_cap must be >= |u|")
    out = []
    a_lo = 2 if u.q == 1 else 1
    for w_p, w_q in complements(u):
        a = a_lo
        while a * u.q + w_q <= height_cap:
            out.append(_vec(a * u.p + w_p, a * u.q + w_q))
            a += 1
    return sorted(set(out), key=lambda v: (v.q, v.value))


# ---------------------------------------------------------------------------
# prescribed growth (window) ladders
# ---------------------------------------------------------------------------


def _pow_cmp(q_new: int, q_base: int, delta: Fraction, factor: int = 1) -> int:
    """-1/0/+1 as q_new <, =, > factor * q_base^(1+delta).

    Decided exactly on integer powers: q_new^den vs factor^den * q_base^(den+num).
    """
    num, den = delta.numerator, delta.denominator
    lhs = q_new**den
    rhs = (factor**den) * q_base ** (den + num)
    return (lhs > rhs) - (lhs < rhs)


def in_growth_window(q_prev: int, q_next: int, delta: Fraction) -> bool:
    """Exact test of q_prev^(1+delta) <= q_next <= 2*q_prev^(1+delta)."""
    return _pow_cmp(q_next, q_prev, delta) >= 0 and _pow_cmp(q_next, q_prev, delta, 2) <= 0


def jb_ladder(
    delta,
    count: int,
    start: ConvergentLadder,
    rng=None,
) -> ConvergentLadder:
    """Extend ``start`` by ``count`` entries with heights in the growth window
    [q^(1+delta), 2*q^(1+delta)].

    The quotient is the smallest admissible one (deterministic); pass a
    ``random.Random`` to sample uniformly among admissible quotients instead.
    Window membership is certified by exact integer-power comparison, which
    is available because delta is carried as an exact rational.
    """
    delta = Fraction(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    if count < 1:
        raise ValueError("count must be >= 1")
    start.check()
    entries = list(start.entries)
    quots = list(start.quotients)
    if len(entries) < 2:
        raise ValueError("start ladder needs at least two entries")
    threshold = len(entries) - 1
    num, den = delta.numerator, delta.denominator

    def bisect_first(pred: Callable[[int], bool], lo: int, hi: int) -> int:
        # smallest a in [lo, hi] with pred(a); pred is monotone False->True
        while lo < hi:
            mid = (lo + hi) // 2
            if pred(mid):
                hi = mid
            else:
                lo = mid + 1
        return lo

    for step in range(count):
        u, v = entries[-2], entries[-1]
        # a must satisfy  v.q^(1+delta) <= a*v.q + u.q <= 2*v.q^(1+delta),
        # decided exactly by  (a*v.q + u.q)^den  vs  {1,2}^den * v.q^(den+num)
        rhs_lo = v.q ** (den + num)
        rhs_hi = (2**den) * rhs_lo

        hi = 1
        while (hi * v.q + u.q) ** den < rhs_lo:
            hi *= 2
        a_lo = bisect_first(lambda a: (a * v.q + u.q) ** den >= rhs_lo, max(1, hi // 2), hi)
        if (a_lo * v.q + u.q) ** den > rhs_hi:
            raise WindowEmptyError(
                threshold + step,
                f"no quotient a >= 1 puts a*{v.q}+{u.q} inside "
                f"[{v.q}^(1+{delta}), 2*{v.q}^(1+{delta})]",
            )
        if rng is None:
            a = a_lo
        else:
            hi = max(a_lo, 1)
            while (hi * v.q + u.q) ** den <= rhs_hi:
                hi *= 2
            a_hi = bisect_first(lambda a: (a * v.q + u.q) ** den > rhs_hi, a_lo, hi) - 1
            a = rng.randint(a_lo, a_hi)
        nxt = _vec(a * v.p + u.p, a * v.q + u.q)
        assert in_growth_window(v.q, nxt.q, delta)
        entries.append(nxt)
        quots.append(a)
    ladder = ConvergentLadder(
        tuple(entries), start.seed, tuple(quots), jb_from=threshold
    )
    ladder.check()
    return ladder
