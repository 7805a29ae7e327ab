"""Nested-interval lower-bound construction and dimension estimation.

Starting from a prescribed-growth ladder, each generation j carries
parameters derived from the base heights Q_j:

    h_j = floor(Q_j / ln Q_j),  eps_j = 1/(8 h_j^2),  d_j = 1/Q_j^2.

Level-j intervals have radius d_j, centers of height in [h_j, 2h_j], and
mutual gaps of at least eps_j; children live in the right-of-center
subwindow of their parent.  Every inequality the construction leans on is
checked exactly (integer comparisons, or certified log brackets where a
transcendental ln is unavoidable) and failures name the offending check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from mpmath import mp

from .cf import ConvergentLadder, PrimitiveVector, RealHandle, in_growth_window
from .counting import RationalInterval, count_heights_in_band
from .errors import BudgetExceededError, CertificationError


# ---------------------------------------------------------------------------
# certified comparisons against ln
# ---------------------------------------------------------------------------


def _ln_bracket(n: int, dps: int):
    """[lo, hi] enclosing ln(n), padded by a few ulps."""
    with mp.workdps(dps):
        v = mp.ln(n)
        pad = mp.mpf(10) ** (8 - dps) * abs(v)
        return v - pad, v + pad


def floor_div_ln(n: int) -> int:
    """floor(n / ln n), certified by adaptive-precision brackets."""
    if n < 2:
        raise ValueError("need n >= 2")
    dps = int(n.bit_length() * 0.30103) + 25
    while True:
        ln_lo, ln_hi = _ln_bracket(n, dps)
        with mp.workdps(dps):
            lo = mp.mpf(n) / ln_hi
            hi = mp.mpf(n) / ln_lo
            f_lo, f_hi = int(mp.floor(lo)), int(mp.floor(hi))
        if f_lo == f_hi:
            return f_lo
        dps *= 2


def ln_comparison(coeff: int, n: int, rhs: int) -> bool:
    """Certified decision of coeff * n * ln(n) < rhs."""
    dps = int(n.bit_length() * 0.30103) + 25
    while True:
        ln_lo, ln_hi = _ln_bracket(n, dps)
        with mp.workdps(dps):
            if mp.mpf(coeff) * n * ln_hi < rhs:
                return True
            if mp.mpf(coeff) * n * ln_lo >= rhs:
                return False
        dps *= 2


# ---------------------------------------------------------------------------
# levels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CantorLevel:
    """One generation of the nested construction.

    ``centers`` are the interval centers (all radius ``d``); ``parents``
    maps each interval to its parent's index one level up (-1 at level 0).
    ``child_counts`` records, per interval of the *previous* level, the
    exact number of admissible child centers, or None when counting was
    beyond budget; ``m`` is their minimum.
    """

    j: int
    h: int
    eps: Fraction
    d: Fraction
    centers: tuple[PrimitiveVector, ...]
    parents: tuple[int, ...]
    child_counts: tuple[Optional[int], ...] = ()
    m: Optional[int] = None

    def interval(self, i: int) -> tuple[Fraction, Fraction]:
        c = self.centers[i].value
        return (c - self.d, c + self.d)


# ---------------------------------------------------------------------------
# Farey-neighbour walk: nearest rationals of bounded height around a point
# ---------------------------------------------------------------------------


def _farey_neighbors(
    y: Fraction, n_cap: int
) -> tuple[tuple[int, int], Optional[tuple[int, int]], tuple[int, int]]:
    """(left, y-if-member, right) in the Farey sequence of order n_cap.

    (left, y) and (y, right), or (left, right) when y is not a member, are
    consecutive pairs, so the two-term stepping recurrences apply.
    """
    a, b = math.floor(y), 1
    c, d = a + 1, 1
    while b + d <= n_cap:
        me_p, me_q = a + c, b + d
        if y * me_q < me_p:
            c, d = me_p, me_q
        elif y * me_q > me_p:
            a, b = me_p, me_q
        else:
            # y is a member; push both neighbors to maximal admissible height
            while b + me_q <= n_cap:
                a, b = a + me_p, b + me_q
            while d + me_q <= n_cap:
                c, d = c + me_p, d + me_q
            return (a, b), (me_p, me_q), (c, d)
    return (a, b), None, (c, d)


def nearest_in_band(
    y: Fraction,
    interval: RationalInterval,
    h: int,
    keep: int,
    step_cap: int = 512,
) -> list[PrimitiveVector]:
    """Up to ``keep`` rationals in the interval with height in [h, 2h],
    nearest to y first.

    Walks the Farey sequence of order 2h outward from y in both directions;
    consecutive terms follow from the two-term recurrence, so each step is
    O(1) regardless of the heights involved.
    """
    n_cap = 2 * h
    left, mid, right = _farey_neighbors(y, n_cap)

    def admissible(t: tuple[int, int]) -> bool:
        return t[1] >= h and interval.contains(Fraction(t[0], t[1]))

    found: list[tuple[Fraction, tuple[int, int]]] = []
    if mid is not None and admissible(mid):
        found.append((Fraction(0), mid))
    # walk right: next term after (a/b, c/d) is k*c - a / k*d - b
    (a, b), (c, d) = (mid or left), right
    steps = hits = 0
    while steps < step_cap and hits < keep:
        if Fraction(c, d) > interval.hi:
            break
        if admissible((c, d)):
            found.append((abs(Fraction(c, d) - y), (c, d)))
            hits += 1
        k = (n_cap + b) // d
        a, b, c, d = c, d, k * c - a, k * d - b
        steps += 1
    # walk left: previous term before (a/b, c/d) is k*a - c / k*b - d
    (a, b), (c, d) = left, (mid or right)
    steps = hits = 0
    while steps < step_cap and hits < keep:
        if Fraction(a, b) < interval.lo:
            break
        if admissible((a, b)):
            found.append((abs(Fraction(a, b) - y), (a, b)))
            hits += 1
        k = (n_cap + d) // b
        a, b, c, d = k * a - c, k * b - d, a, b
        steps += 1
    found.sort(key=lambda item: (item[0], item[1][1], item[1][0]))
    out = []
    seen = set()
    for _, (p, q) in found[:keep]:
        if (p, q) not in seen:
            seen.add((p, q))
            out.append(PrimitiveVector(p, q))
    return out


# ---------------------------------------------------------------------------
# the construction
# ---------------------------------------------------------------------------

COUNT_BUDGET_DEFAULT = 2_000_000


def _level_params(base: ConvergentLadder, k0: int, j: int) -> tuple[int, int, Fraction, Fraction]:
    big_q = base.entries[k0 + j].q
    h = floor_div_ln(big_q)
    return big_q, h, Fraction(1, 8 * h * h), Fraction(1, big_q * big_q)


def build_levels(
    base: ConvergentLadder,
    k0: int,
    depth: int,
    branch_cap: int = 4,
    delta=None,
    count_budget: int = COUNT_BUDGET_DEFAULT,
) -> list[CantorLevel]:
    """Build levels 0..depth of the nested construction over ``base``.

    Checks, exactly and at every step, the inequalities the construction
    relies on, raising CertificationError naming the first that fails
    (callers should retry with a larger k0).  Child counts are exact where
    the counting budget allows and None beyond it.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if k0 < 0 or k0 + depth >= len(base.entries):
        raise ValueError("base ladder too short for k0 + depth")
    if base.jb_from is not None and k0 < base.jb_from:
        raise CertificationError(
            "growth-window onset",
            f"k0={k0} precedes the certified growth range (from {base.jb_from})",
        )
    if delta is not None:
        for k in range(k0, k0 + depth):
            if not in_growth_window(base.entries[k].q, base.entries[k + 1].q, Fraction(delta)):
                raise CertificationError(
                    "growth window",
                    f"heights q[{k}], q[{k+1}] violate the delta={delta} window",
                )

    params = [_level_params(base, k0, j) for j in range(depth + 1)]
    for j, (big_q, h, eps, d) in enumerate(params):
        if 8 * h * h > big_q * big_q:
            raise CertificationError(
                "center-containment margin",
                f"level {j}: need 8*h^2 <= Q^2 (h={h}, Q={big_q})",
            )
        if 16 * h * h >= big_q * big_q:
            raise CertificationError(
                "separation margin",
                f"level {j}: need 16*h^2 < Q^2 (h={h}, Q={big_q})",
            )
    for j in range(depth):
        h, h_next = params[j][1], params[j + 1][1]
        if h_next <= 24 * h:
            raise CertificationError(
                "next-height ratio",
                f"level {j}: need h[{j+1}] > 24*h[{j}] ({h_next} vs {24*h})",
            )
        big_q = params[j][0]
        if not ln_comparison(6, big_q, h_next):
            raise CertificationError(
                "next-convergent ceiling",
                f"level {j}: need 6*Q*ln(Q) < h[{j+1}] (Q={big_q}, h_next={h_next})",
            )

    _, h0, eps0, d0 = params[0]
    levels = [
        CantorLevel(0, h0, eps0, d0, (PrimitiveVector(1, h0),), (-1,))
    ]
    for j in range(depth):
        _, h, eps, d = params[j]
        _, h1, eps1, d1 = params[j + 1]
        centers: list[PrimitiveVector] = []
        parents: list[int] = []
        counts: list[Optional[int]] = []
        for idx, parent in enumerate(levels[j].centers):
            mid = parent.value + d / 2
            window = RationalInterval(mid - d / 6, mid + d / 6, True, True)
            kids = nearest_in_band(mid, window, h1, branch_cap)
            if not kids:
                raise CertificationError(
                    "child existence",
                    f"level {j} interval {idx}: no rational of height in "
                    f"[{h1}, {2*h1}] inside the child window",
                )
            for kid in kids:
                lo_ok = kid.value - d1 >= parent.value - d
                hi_ok = kid.value + d1 <= parent.value + d
                if not (lo_ok and hi_ok):
                    raise CertificationError(
                        "child containment",
                        f"level {j+1}: child {kid} leaves its parent interval",
                    )
                centers.append(kid)
                parents.append(idx)
            try:
                counts.append(
                    count_heights_in_band(
                        window, h1, direct_budget=count_budget, mobius_budget=count_budget
                    )
                )
            except BudgetExceededError:
                counts.append(None)
        m = None
        if all(c is not None for c in counts):
            m = min(counts)  # type: ignore[type-var]
        levels.append(
            CantorLevel(
                j + 1, h1, eps1, d1, tuple(centers), tuple(parents), tuple(counts), m
            )
        )
    return levels


def build_levels_auto(
    base: ConvergentLadder,
    depth: int,
    branch_cap: int = 4,
    delta=None,
    k0_start: int = 0,
    count_budget: int = COUNT_BUDGET_DEFAULT,
) -> tuple[int, list[CantorLevel]]:
    """Retry build_levels with increasing k0 until the checks pass."""
    last: Optional[CertificationError] = None
    for k0 in range(k0_start, len(base.entries) - depth):
        try:
            return k0, build_levels(base, k0, depth, branch_cap, delta, count_budget)
        except CertificationError as exc:
            last = exc
    raise CertificationError(
        "base exhausted",
        f"no k0 in [{k0_start}, {len(base.entries) - depth}) passes: last error: {last}",
    )


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelCheck:
    name: str
    level: int
    ok: bool
    detail: str = ""


@dataclass(frozen=True)
class CantorReport:
    checks: tuple[LevelCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list[LevelCheck]:
        return [c for c in self.checks if not c.ok]


def leftmost_chain(levels: Sequence[CantorLevel]) -> list[int]:
    """Indices of the leftmost interval at each level, linked by parent."""
    chain = [0]
    for lvl in levels[1:]:
        prev = chain[-1]
        cands = [
            (lvl.centers[i].value, i)
            for i in range(len(lvl.centers))
            if lvl.parents[i] == prev
        ]
        if not cands:
            raise CertificationError("chain", f"level {lvl.j}: no child of interval {prev}")
        chain.append(min(cands)[1])
    return chain


def nested_point(levels: Sequence[CantorLevel]) -> Fraction:
    """Midpoint of the leftmost leaf interval (its center)."""
    chain = leftmost_chain(levels)
    return levels[-1].centers[chain[-1]].value


def verify_levels(
    levels: Sequence[CantorLevel],
    base: Optional[ConvergentLadder] = None,
    k0: Optional[int] = None,
) -> CantorReport:
    """Certify every construction invariant on built levels.

    Parameter consistency, center heights, pairwise gaps, nesting, the
    convergent-containment margin, and the witness chain of the sampled
    nested point are all checked in exact arithmetic.  Passing the base
    ladder and k0 additionally re-derives each level's (h, d) from the
    base heights.
    """
    checks: list[LevelCheck] = []

    def add(name: str, level: int, ok: bool, detail: str = ""):
        checks.append(LevelCheck(name, level, bool(ok), detail))

    if base is not None and k0 is not None:
        for lvl in levels:
            big_q = base.entries[k0 + lvl.j].q
            ok = lvl.h == floor_div_ln(big_q) and lvl.d == Fraction(1, big_q * big_q)
            add("base-parameters", lvl.j, ok, f"Q={big_q}")

    for lvl in levels:
        add(
            "eps-consistency",
            lvl.j,
            lvl.eps == Fraction(1, 8 * lvl.h * lvl.h),
            f"eps={lvl.eps}",
        )
        for i, c in enumerate(lvl.centers):
            if not lvl.h <= c.q <= 2 * lvl.h:
                add("center-height", lvl.j, False, f"interval {i}: height {c.q}")
                break
        else:
            add("center-height", lvl.j, True)
        # scc containment: every point of the interval keeps the center as a
        # convergent because d <= 1/(2 q^2)
        ok = all(2 * c.q * c.q * lvl.d <= 1 for c in lvl.centers)
        add("convergent-containment", lvl.j, ok)
        vals = sorted(c.value for c in lvl.centers)
        ok, detail = True, ""
        for a, b in zip(vals, vals[1:]):
            if b - a - 2 * lvl.d < lvl.eps:
                ok, detail = False, f"gap {b - a - 2*lvl.d} < eps {lvl.eps}"
                break
        add("gap", lvl.j, ok, detail)
    for lvl, nxt in zip(levels, levels[1:]):
        ok, detail = True, ""
        for i, c in enumerate(nxt.centers):
            plo, phi = lvl.interval(nxt.parents[i])
            if not (plo <= c.value - nxt.d and c.value + nxt.d <= phi):
                ok, detail = False, f"interval {i} escapes parent {nxt.parents[i]}"
                break
        add("nesting", nxt.j, ok, detail)

    # witness chain via the sampled nested point
    try:
        chain = leftmost_chain(levels)
        y = levels[-1].centers[chain[-1]].value
        ladder = RealHandle.from_rational(y).full_ladder()
        entries = set((v.p, v.q) for v in ladder.entries)
        heights = [v.q for v in ladder.entries]
        for lvl, idx in zip(levels, chain):
            c = lvl.centers[idx]
            is_conv = (c.p, c.q) in entries
            add("witness-convergent", lvl.j, is_conv, f"center {c}")
            add("witness-height", lvl.j, c.q < 2 * lvl.h, f"q={c.q} vs 2h={2*lvl.h}")
            if lvl.j < levels[-1].j:
                pos = heights.index(c.q) if is_conv else -1
                if pos < 0 or pos + 1 >= len(heights):
                    add("witness-next", lvl.j, False, "no next convergent")
                else:
                    q_next = heights[pos + 1]
                    add(
                        "witness-next",
                        lvl.j,
                        4 * q_next * lvl.h * lvl.d > 1,
                        f"q'={q_next} vs 1/(4 h d)",
                    )
    except CertificationError as exc:
        add("witness-chain", -1, False, str(exc))
    return CantorReport(tuple(checks))


# ---------------------------------------------------------------------------
# dimension estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DimensionEstimate:
    """Per-depth branching quotients and their running-max proxy."""

    quotients: tuple[float, ...]  # index j-1 holds the depth-j quotient
    proxy: float


def lower_dim_estimate(
    ms: Sequence[int], eps: Sequence[Fraction], j_min: int = 2
) -> DimensionEstimate:
    """Branching lower-bound quotients log(m_1...m_{j-1}) / -log(m_j eps_j).

    ``ms[j-1]`` and ``eps[j-1]`` hold the depth-j branching count and gap.
    The proxy is the max over computed depths j >= j_min.
    """
    if len(ms) != len(eps):
        raise ValueError("ms and eps must align")
    if any(m < 1 for m in ms):
        raise ValueError("branching counts must be >= 1")
    eps = [Fraction(e) for e in eps]
    if any(not b < a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps must strictly decrease")
    quots = []
    log_num = 0.0
    for j in range(1, len(ms) + 1):
        m_j, e_j = ms[j - 1], eps[j - 1]
        prod = m_j * e_j
        if not prod < 1:
            raise ValueError(f"m_{j} * eps_{j} must be < 1")
        denom = -(math.log(prod.numerator) - math.log(prod.denominator))
        quots.append(log_num / denom)
        log_num += math.log(ms[j - 1])
    usable = [q for j, q in enumerate(quots, start=1) if j >= j_min]
    proxy = max(usable) if usable else 0.0
    return DimensionEstimate(tuple(quots), proxy)


def combine_dimensions(fiber_lower: float, base_lower: float) -> float:
    """Combine a fiber bound with a base bound (sum rule for products)."""
    if fiber_lower < 0 or base_lower < 0:
        raise ValueError("dimension bounds must be nonnegative")
    return fiber_lower + base_lower


def pair_handles(
    base: ConvergentLadder, levels: Sequence[CantorLevel]
) -> tuple[RealHandle, RealHandle, float]:
    """(x, y, horizon) for the divergence linkage of a built construction.

    x is the base value, y the nested point; both are carried as inexact
    prefixes so their tents stop at the last certified height.  The horizon
    is the smaller of the two tent validity horizons.
    """
    x = RealHandle.from_ladder(base, exact=False)
    y_val = nested_point(levels)
    y_full = RealHandle.from_rational(y_val).full_ladder()
    leaf_q = levels[-1].centers[leftmost_chain(levels)[-1]].q
    cut = next(i for i, v in enumerate(y_full.entries) if v.q == leaf_q) + 1
    y_trunc = ConvergentLadder(
        y_full.entries[:cut], y_full.seed, y_full.quotients[: cut - 1]
    )
    y = RealHandle.from_ladder(y_trunc, exact=False)
    horizon = min(
        2.0 * math.log(base.entries[-1].q),
        2.0 * math.log(y_trunc.entries[-1].q),
    )
    return x, y, horizon
