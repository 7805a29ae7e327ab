"""Self-similar covering machinery and closed-form dimension bounds.

Covering index nodes are pairs (u, v) of primitive vectors (two coordinates)
or triples (c, i, j) (higher dimension), each carrying a sup-metric ball of
radius 1/(|u||v|) resp. 1/(|c_i||c_j|).  Successor enumeration, fiber
decompositions, and the audited geometric sums are all exact; only the
final power sums use floats.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .cf import (
    PrimitiveVector,
    complements,
    enumerate_successors,
    reach_rel,
    succ_rel,
)
from .counting import RationalInterval, min_height_in_interval
from .errors import CertificationError, ExcursionError


# ---------------------------------------------------------------------------
# two coordinates
# ---------------------------------------------------------------------------


def _lt_scaled(a: int, delta: Fraction, b: int) -> bool:
    """Exact a < delta * b."""
    return a * delta.denominator < delta.numerator * b


@dataclass(frozen=True)
class CoverNode2:
    """Index (u, v) of a covering ball of radius 1/(|u||v|) at (u', v')."""

    u: PrimitiveVector
    v: PrimitiveVector
    delta: Fraction

    def __post_init__(self):
        object.__setattr__(self, "delta", Fraction(self.delta))

    @property
    def in_J(self) -> bool:
        return node2_in_J(self.u, self.v, self.delta)

    @property
    def diam_inverse(self) -> int:
        """|u||v| (diameter is 2 over this)."""
        return self.u.q * self.v.q


def node2_in_J(u: PrimitiveVector, v: PrimitiveVector, delta) -> bool:
    """Membership |u| < delta |v| or |v| < delta |u| (mutually exclusive)."""
    delta = Fraction(delta)
    return _lt_scaled(u.q, delta, v.q) or _lt_scaled(v.q, delta, u.q)


def sequence_closure(v: PrimitiveVector, height_cap: Fraction) -> list[PrimitiveVector]:
    """All w reachable from v along a single ladder, heights < height_cap.

    States are consecutive pairs: from (prev, w) the admissible next entries
    are a*w + prev, a >= 1 (a >= 2 out of a height-1 start).  Both possible
    histories of v seed the walk, and v itself (zero steps) is included.
    The per-step remainder is forced, so this is exactly containment of v
    and w in one ladder, which is strictly finer than chain reachability.
    """
    cap = Fraction(height_cap)
    out = {(v.p, v.q)} if v.q < cap else set()
    if v.q >= cap:
        return []
    if v.q == 1:
        starts = [((1, 0), v), ((-1, 0), v)]
    else:
        starts = [((w_p, w_q), v) for (w_p, w_q) in complements(v)]
    seen = set()
    frontier = starts
    while frontier:
        nxt = []
        for (pp, pq), w in frontier:
            a = 2 if w.q == 1 else 1
            while w.q * a + pq < cap:
                child = PrimitiveVector(a * w.p + pp, a * w.q + pq)
                out.add((child.p, child.q))
                state = ((w.p, w.q), child)
                key = (w.p, w.q, child.p, child.q)
                if key not in seen:
                    seen.add(key)
                    nxt.append(state)
                a += 1
        frontier = nxt
    return sorted(
        (PrimitiveVector(p, q) for p, q in out), key=lambda t: (t.q, t.value)
    )


def pi2_decompose(
    v: PrimitiveVector, v2: PrimitiveVector
) -> tuple[int, int, Optional[tuple[int, int]]]:
    """(b, c, vt) with v2 = b*v + c*vt, b >= 1, c >= 0, |vt| < |v|.

    The two candidate remainders give opposite signs of c, so the
    nonnegative representation is unique (c = 0 exactly when v2 = v).
    """
    if v2 == v:
        return 1, 0, None
    for x_p, x_q in complements(v):
        det = v.p * x_q - x_p * v.q
        assert abs(det) == 1
        b = (v2.p * x_q - x_p * v2.q) * det
        c = (v.p * v2.q - v2.p * v.q) * det
        if b >= 1 and c >= 1:
            return b, c, (x_p, x_q)
    raise CertificationError(
        "fiber decomposition",
        f"{v2} admits no representation b*{v} + c*vt with b >= 1, c >= 0",
    )


@dataclass(frozen=True)
class Successor2:
    """A sigma-successor of a covering node with its fiber index."""

    node: CoverNode2
    a: int
    b: int
    c: int
    ratio: Fraction  # child diameter / parent diameter
    swapped: bool  # parent had |v| < delta|u| (mirrored roles)


def sigma2_enumerate(node: CoverNode2, a_max: int) -> list[Successor2]:
    """All successors with expansion coefficient a <= a_max.

    For a parent with |u| < delta |v|, successors (u', v') satisfy: u' one
    step past u, v' on a common ladder with v, and |v'| < delta |u'|; the
    mirrored parent swaps the roles.  Every returned successor is
    re-verified against the membership predicates.
    """
    delta = node.delta
    if not node.in_J:
        raise ExcursionError("parent node is not in the covering index set")
    swapped = _lt_scaled(node.v.q, delta, node.u.q)
    u, v = (node.v, node.u) if swapped else (node.u, node.v)
    if a_max < 1:
        raise ValueError("a_max must be >= 1")

    max_u2_height = 2 * a_max * u.q  # |u'| <= a|u| + |u| - 1 < 2 a |u|
    closure = sequence_closure(v, delta * max_u2_height)
    closure_qs = [w.q for w in closure]
    out: list[Successor2] = []
    a_lo = 2 if u.q == 1 else 1
    for a in range(a_lo, a_max + 1):
        for w_p, w_q in complements(u):
            u2 = PrimitiveVector(a * u.p + w_p, a * u.q + w_q)
            assert succ_rel(u, u2)
            # admissible closure heights: q * den < num * |u'|
            q_cap = (delta.numerator * u2.q - 1) // delta.denominator
            for v2 in closure[: bisect.bisect_right(closure_qs, q_cap)]:
                b, c, _ = pi2_decompose(v, v2)
                if c > b:
                    raise CertificationError(
                        "fiber coefficient",
                        f"combination coefficient c={c} exceeds b={b}",
                    )
                assert reach_rel(v, v2)
                child = (
                    CoverNode2(v2, u2, delta) if swapped else CoverNode2(u2, v2, delta)
                )
                assert child.in_J
                ratio = Fraction(node.diam_inverse, child.diam_inverse)
                out.append(Successor2(child, a, b, c, ratio, swapped))
    out.sort(key=lambda s: (s.a, s.b, s.c, s.node.u.q, s.node.v.q, s.node.u.p, s.node.v.p))
    return out


@dataclass(frozen=True)
class FiberRecord:
    a: int
    b: int
    count: int
    bound: int


@dataclass(frozen=True)
class CoverAudit:
    node: CoverNode2
    s: float
    a_max: int
    partial_sum: float
    tail_bound: float
    analytic_bound: float
    fibers: tuple[FiberRecord, ...]

    @property
    def certified_total(self) -> float:
        return self.partial_sum + self.tail_bound

    @property
    def ok(self) -> bool:
        return self.certified_total <= self.analytic_bound + 1e-9


def check_successor_brackets(node: CoverNode2, succ: Successor2) -> None:
    """Assert the exact per-successor range and ratio inequalities."""
    delta = node.delta
    a, b, ratio = succ.a, succ.b, succ.ratio
    if not 2 * a * delta * delta > 1:
        raise CertificationError("expansion range", f"a={a} not above 1/(2 delta^2)")
    if not (1 <= b and Fraction(b) <= 2 * a * delta * delta):
        raise CertificationError("fiber range", f"b={b} outside [1, 2 a delta^2]")
    if not (Fraction(1, 4 * a * b) <= ratio <= Fraction(1, a * b)):
        raise CertificationError(
            "diameter bracket", f"ratio {ratio} outside [1/(4ab), 1/(ab)]"
        )
    if not ratio < delta * delta:
        raise CertificationError("contraction", f"ratio {ratio} >= delta^2")


def analytic_bound2(delta: Fraction, s: float) -> float:
    """The closed-form majorant 16 delta / ((2s-3)(2-s)) of the cover sum."""
    return 16.0 * float(delta) / ((2.0 * s - 3.0) * (2.0 - s))


def cover_sum_audit(
    node: CoverNode2,
    s: float,
    a_max: int,
    successors: Optional[Sequence[Successor2]] = None,
) -> CoverAudit:
    """Certified cover-sum audit at exponent s.

    partial_sum enumerates every successor with a <= a_max; tail_bound
    majorizes the rest by the fiber ceiling 8b, the per-fiber ratio ceiling
    1/(ab), and an integral comparison over a > a_max; their total must stay
    within the closed-form bound.
    """
    if not 1.5 < s < 2.0:
        raise ValueError("s must lie in (3/2, 2)")
    delta = node.delta
    if successors is None:
        successors = sigma2_enumerate(node, a_max)
    partial = 0.0
    fibers: dict[tuple[int, int], int] = {}
    for succ in successors:
        check_successor_brackets(node, succ)
        partial += math.exp(
            s * (math.log(succ.ratio.numerator) - math.log(succ.ratio.denominator))
        )
        fibers[(succ.a, succ.b)] = fibers.get((succ.a, succ.b), 0) + 1
    records = []
    for (a, b), count in sorted(fibers.items()):
        if count > 8 * b:
            raise CertificationError(
                "fiber cardinality", f"fiber (a={a}, b={b}) holds {count} > 8b"
            )
        records.append(FiberRecord(a, b, count, 8 * b))
    # sum_{b<=B} b^(1-s) <= B^(2-s)/(2-s); sum_{a>A} a^(2-2s) <= A^(3-2s)/(2s-3)
    d = float(delta)
    tail = (
        8.0
        * (2.0 * d * d) ** (2.0 - s)
        / (2.0 - s)
        * a_max ** (3.0 - 2.0 * s)
        / (2.0 * s - 3.0)
    )
    return CoverAudit(
        node, s, a_max, partial, tail, analytic_bound2(delta, s), tuple(records)
    )


def upper_dim2(delta) -> float:
    """Dimension bound for two coordinates: the smaller root of
    2 s^2 - 7 s + 6 + 16 delta = 0, valid for delta <= 2^-7."""
    delta = Fraction(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    if delta * 128 > 1:
        raise ValueError("delta must be <= 2^-7 (discriminant would go negative)")
    return 1.75 - math.sqrt(1.0 / 16.0 - 8.0 * float(delta))


def upper_dimN(n: int, delta) -> float:
    """Dimension bound for n > 2 coordinates: n - 1/2 + eps with eps the
    smaller root of 2 eps^2 - eps + (2n-3) 8^(n-1) sqrt(delta) = 0."""
    if n < 3:
        raise ValueError("n must be >= 3 (use upper_dim2 for n = 2)")
    delta = Fraction(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    if delta * (2 ** (6 * n)) * (2 * n - 3) ** 2 > 1:
        raise ValueError("delta beyond validity: need delta <= 2^(-6n) (2n-3)^(-2)")
    coeff = (2 * n - 3) * 8 ** (n - 1) * math.sqrt(float(delta))
    eps = (1.0 - math.sqrt(1.0 - 8.0 * coeff)) / 4.0
    return n - 0.5 + eps


def quadratic_residual2(s: float, delta) -> float:
    return 2.0 * s * s - 7.0 * s + 6.0 + 16.0 * float(Fraction(delta))


def quadratic_residualN(eps: float, n: int, delta) -> float:
    return (
        2.0 * eps * eps
        - eps
        + (2 * n - 3) * 8 ** (n - 1) * math.sqrt(float(Fraction(delta)))
    )


# ---------------------------------------------------------------------------
# n > 2 coordinates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverNodeN:
    """Index (c, i, j): ball of radius 1/(|c_i||c_j|) around the rational
    point c, with the i-th coordinate tightened to radius 1/|c_i|^2 in the
    inner set."""

    c: tuple[PrimitiveVector, ...]
    i: int
    j: int
    delta: Fraction

    def __post_init__(self):
        object.__setattr__(self, "delta", Fraction(self.delta))
        n = len(self.c)
        if not (0 <= self.i < n and 0 <= self.j < n and self.i != self.j):
            raise ValueError("i, j must be distinct coordinate indices")

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def diam_inverse(self) -> int:
        return self.c[self.i].q * self.c[self.j].q

    def radius(self, k: int) -> Fraction:
        if k == self.i:
            return Fraction(1, self.c[self.i].q ** 2)
        return Fraction(1, self.diam_inverse)


def nodeN_in_J(node: CoverNodeN) -> bool:
    """|c_j| < sqrt(delta) |c_i| (decided on squares) and every height
    divides |c_i||c_j|."""
    ci, cj = node.c[node.i], node.c[node.j]
    if not cj.q * cj.q * node.delta.denominator < node.delta.numerator * ci.q * ci.q:
        return False
    prod = ci.q * cj.q
    return all(prod % ck.q == 0 for ck in node.c)


def boxes_intersect(a: CoverNodeN, b: CoverNodeN) -> bool:
    """Exact nonempty intersection of the inner boxes of two nodes."""
    if a.n != b.n:
        return False
    for k in range(a.n):
        gap = abs(a.c[k].value - b.c[k].value)
        if gap > a.radius(k) + b.radius(k):
            return False
    return True


def sigmaN_member(parent: CoverNodeN, child: CoverNodeN) -> bool:
    """The five successor conditions, verbatim and exact."""
    if child.n != parent.n:
        return False
    # (a) the child's expanding index is the parent's shrinking one
    if child.i != parent.j:
        return False
    if not succ_rel(parent.c[parent.j], child.c[parent.j]):
        return False
    # (b) if the roles swap back, the old expanding coordinate persists
    if child.j == parent.i:
        if not reach_rel(parent.c[parent.i], child.c[parent.i]):
            return False
    # (c) strict height growth
    if not (
        parent.c[parent.i].q < child.c[parent.j].q
        and parent.c[parent.j].q < child.c[child.j].q
    ):
        return False
    # (d) the inner boxes meet
    if not boxes_intersect(parent, child):
        return False
    # (e) diameter comparison seed
    return parent.c[parent.i].q ** 2 < child.c[child.i].q * child.c[child.j].q


def _chain_closure(u: PrimitiveVector, height_cap: int) -> list[PrimitiveVector]:
    """Chain-reachable vectors from u with height <= cap (u included)."""
    out = {u}
    frontier = [u]
    while frontier:
        nxt = []
        for w in frontier:
            for child in enumerate_successors(w, height_cap):
                if child not in out:
                    out.add(child)
                    nxt.append(child)
        frontier = nxt
    return sorted(out, key=lambda t: (t.q, t.value))


def _rationals_near(center: Fraction, slack: Fraction, q: int) -> list[int]:
    """Numerators p with |p/q - center| <= slack."""
    lo = math.ceil((center - slack) * q)
    hi = math.floor((center + slack) * q)
    return [p for p in range(lo, hi + 1) if math.gcd(p, q) == 1]


def enumerate_sigmaN(
    parent: CoverNodeN, height_cap: int, a_cap: Optional[int] = None
) -> list[CoverNodeN]:
    """Exhaustive successor enumeration for small heights (n = 3 audits).

    Candidate coordinates are drawn from generous supersets (one-step
    successors, chain closures, divisor heights near the parent's point)
    and every assembled triple is filtered through the exact membership
    predicates, so the result is the full successor set within the cap.
    """
    n = parent.n
    if n != 3:
        raise ExcursionError("exhaustive successor enumeration is for n = 3")
    delta = parent.delta
    i2 = parent.j
    slack = 2 * Fraction(2, parent.diam_inverse)
    out = []
    i2_cap = height_cap
    if a_cap is not None:
        i2_cap = min(height_cap, a_cap * parent.c[parent.j].q)
    # heights of the child's shrinking coordinate sit below sqrt(delta)
    # times the expanding one; cap candidate generation there up front
    global_q_max = math.isqrt(
        max(0, (delta.numerator * i2_cap * i2_cap - 1) // delta.denominator)
    )
    chain = _chain_closure(parent.c[parent.i], min(height_cap, global_q_max)) if (
        parent.c[parent.i].q <= global_q_max
    ) else []
    for c2_i2 in enumerate_successors(parent.c[parent.j], i2_cap):
        if not parent.c[parent.i].q < c2_i2.q:
            continue
        q_max_j2 = math.isqrt(
            max(0, (delta.numerator * c2_i2.q * c2_i2.q - 1) // delta.denominator)
        )
        for j2 in range(n):
            if j2 == i2:
                continue
            if j2 == parent.i:
                j2_cands: Iterable[PrimitiveVector] = (
                    w for w in chain if w.q <= q_max_j2
                )
            else:
                j2_cands = (
                    PrimitiveVector(p, q)
                    for q in range(1, q_max_j2 + 1)
                    for p in _rationals_near(parent.c[j2].value, slack, q)
                )
            for c2_j2 in j2_cands:
                if not parent.c[parent.j].q < c2_j2.q:
                    continue
                if not parent.c[parent.i].q ** 2 < c2_i2.q * c2_j2.q:
                    continue
                prod = c2_i2.q * c2_j2.q
                k = next(k for k in range(n) if k not in (i2, j2))
                k_cands = [
                    PrimitiveVector(p, q)
                    for q in range(1, min(height_cap, prod) + 1)
                    if prod % q == 0
                    for p in _rationals_near(parent.c[k].value, slack, q)
                ]
                for c2_k in k_cands:
                    vec: list[Optional[PrimitiveVector]] = [None, None, None]
                    vec[i2], vec[j2], vec[k] = c2_i2, c2_j2, c2_k
                    child = CoverNodeN(tuple(vec), i2, j2, delta)  # type: ignore[arg-type]
                    if nodeN_in_J(child) and sigmaN_member(parent, child):
                        out.append(child)
    out.sort(key=lambda nd: (nd.j, [v.q for v in nd.c], [v.p for v in nd.c]))
    return out


@dataclass(frozen=True)
class FiberRecordN:
    k: int
    a: int
    b: int
    count: int
    bound: Fraction


@dataclass(frozen=True)
class FiberAuditN:
    """Result of a cap-bounded successor audit.

    ``partial`` is always true in the sense that the successor set is
    infinite; the audit certifies the window delimited by the caps.
    """

    parent: CoverNodeN
    height_cap: int
    a_cap: Optional[int]
    children: tuple[CoverNodeN, ...]
    fibers: tuple[FiberRecordN, ...]
    violations: tuple[str, ...]
    partial: bool = True

    @property
    def ok(self) -> bool:
        return not self.violations


def fiberN_audit(
    parent: CoverNodeN, height_cap: int, a_cap: Optional[int] = None
) -> FiberAuditN:
    """Exhaustive fiber audit of an n = 3 parent within a height cap.

    Children are grouped by (k; a, b) with a the expansion step and b the
    floor-ratio of the k-th height against the minimal height of its
    window; every bracket inequality is asserted exactly.
    """
    n = parent.n
    delta = parent.delta
    children = enumerate_sigmaN(parent, height_cap, a_cap)
    q_min_cache: dict[int, int] = {}

    def window_min_height(k: int) -> int:
        if k not in q_min_cache:
            if k == parent.i:
                q_min_cache[k] = parent.c[parent.i].q
            else:
                half = Fraction(2, parent.diam_inverse)
                window = RationalInterval(
                    parent.c[k].value - half, parent.c[k].value + half, True, True
                )
                q_min_cache[k] = min_height_in_interval(window).q
        return q_min_cache[k]

    fibers: dict[tuple[int, int, int], int] = {}
    violations: list[str] = []
    for child in children:
        k = child.j
        q_k = window_min_height(k)
        a = -(-child.c[parent.j].q // parent.c[parent.j].q)  # ceil
        b = child.c[k].q // q_k
        if b < 1:
            violations.append(f"child {child.c}: fiber index b = {b} < 1")
            continue
        ratio = Fraction(parent.diam_inverse, child.diam_inverse)
        lo = Fraction(parent.c[parent.i].q, 2 * a * b * q_k)
        hi = Fraction(2 * parent.c[parent.i].q, a * b * q_k)
        if not lo <= ratio <= hi:
            violations.append(f"child {child.c}: ratio {ratio} outside bracket")
        if not a * a * delta > 1:
            violations.append(f"child {child.c}: a={a} not above 1/sqrt(delta)")
        if (b * q_k) ** 2 > a * a * delta * parent.c[parent.j].q ** 2:
            violations.append(f"child {child.c}: b={b} above a sqrt(delta)|c_j|/q_k")
        if not ratio * ratio < delta:
            violations.append(f"child {child.c}: contraction ratio not below sqrt(delta)")
        fibers[(k, a, b)] = fibers.get((k, a, b), 0) + 1

    records = []
    for (k, a, b), count in sorted(fibers.items()):
        if k == parent.i:
            bound = Fraction(8 ** (n - 1) * a ** (n - 2) * b ** (n - 1))
        else:
            q_k = window_min_height(k)
            bound = (
                2
                * 8 ** (n - 1)
                * Fraction(q_k, parent.c[parent.i].q) ** n
                * a ** (n - 2)
                * b ** (n - 1)
            )
        if count > bound:
            violations.append(f"fiber (k={k}, a={a}, b={b}): {count} > bound {bound}")
        records.append(FiberRecordN(k, a, b, count, bound))
    return FiberAuditN(
        parent, height_cap, a_cap, tuple(children), tuple(records), tuple(violations)
    )
