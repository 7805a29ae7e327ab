"""Tent excursion profiles and sup-norm shortest vectors under diagonal flow.

The tent of a real x is the slope +-1 function vanishing exactly at times
2*log(q) over its best-approximation heights q.  The lattice profile
w(x, t) = -2*log of the sup-norm shortest vector of the flowed lattice
{(e^(t/2)(p - q x), e^(-t/2) q)} tracks the tent within an additive 2*log 2.

Times of the form log(m) for integer m are kept in log-free form so event
identities can be asserted exactly on heights rather than on floats.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .cf import ConvergentLadder, PrimitiveVector, RealHandle
from .errors import ExcursionError, PrecisionError

LOG2 = math.log(2.0)


def _log_int(n: int) -> float:
    """log of a (possibly huge) positive integer, accurate to ~1 ulp."""
    return math.log(n)


def _log_frac(d: Fraction) -> float:
    """log of a positive Fraction without float under/overflow."""
    return math.log(d.numerator) - math.log(d.denominator)


@dataclass(frozen=True)
class TentFunction:
    """Piecewise-linear excursion profile with zeros at 2*log(height).

    For a rational source (``finite``) the profile rises with slope +1
    forever past its last zero; otherwise evaluation is valid only up to
    the horizon 2*log(last height).
    """

    zero_heights: tuple[int, ...]
    finite: bool

    def __post_init__(self):
        hs = self.zero_heights
        if not hs or hs[0] != 1:
            raise ValueError("zero heights must start at 1")
        if any(a >= b for a, b in zip(hs, hs[1:])):
            raise ValueError("zero heights must strictly increase")

    @property
    def zeros(self) -> np.ndarray:
        return np.array([2.0 * _log_int(q) for q in self.zero_heights])

    @property
    def horizon(self) -> Optional[float]:
        """Largest valid evaluation time (None = unbounded)."""
        if self.finite:
            return None
        return 2.0 * _log_int(self.zero_heights[-1])

    def __call__(self, t):
        """Distance to the zero-time set, with slope -1/+1 tails."""
        t_arr = np.asarray(t, dtype=float)
        if self.horizon is not None and np.any(t_arr > self.horizon + 1e-12):
            raise PrecisionError("evaluation beyond the tent validity horizon")
        zs = self.zeros
        idx = np.clip(np.searchsorted(zs, t_arr), 1, len(zs) - 1) if len(zs) > 1 else None
        if idx is None:
            return np.abs(t_arr - zs[0]) if t_arr.shape else float(abs(t_arr - zs[0]))
        left = np.abs(t_arr - zs[idx - 1])
        right = np.abs(zs[idx] - t_arr)
        out = np.minimum(left, right)
        return out if t_arr.shape else float(out)


def tent_from_ladder(ladder: ConvergentLadder, finite: Optional[bool] = None) -> TentFunction:
    """Tent with zeros at the ladder heights.

    ``finite`` defaults to whether the ladder is a complete rational
    expansion (exhausted source); pass it explicitly when wrapping a handle.
    """
    if finite is None:
        finite = ladder.exhausted
    return TentFunction(tuple(ladder.heights), finite)


def tent_of(x: RealHandle, min_height: Optional[int] = None) -> TentFunction:
    if x.exact:
        return TentFunction(tuple(x.full_ladder().heights), True)
    lad = x.ladder(min_height=min_height)
    return TentFunction(tuple(lad.heights), False)


@dataclass(frozen=True)
class LatticeSlice:
    """The flowed lattice {(e^(t/2)(p - q x), e^(-t/2) q) : (p, q) in Z^2}."""

    x: RealHandle
    t: float


# ---------------------------------------------------------------------------
# shortest vectors
# ---------------------------------------------------------------------------


def _x_as_fraction(x: RealHandle, t_max: float) -> Fraction:
    """A rational proxy for x sharp enough for length comparisons up to t_max.

    A convergent of height H approximates x within 1/H^2; taking
    H > e^(t_max/2 + 16) keeps every log-length error far below 1e-9.
    """
    if x.exact:
        return x.exact_value()
    target = int(math.ceil(math.exp(min(t_max / 2.0 + 16.0, 600.0)))) + 1
    return x.ladder(min_height=target).entries[-1].value


def shortest_sup_scan(x: RealHandle, t: float) -> tuple[float, tuple[int, int]]:
    """Brute-force shortest sup-norm vector of the flowed lattice.

    Enumerates q = 0, 1, 2, ... with running-best pruning: once
    e^(-t/2) q meets the best length so far, no larger q can win.  The
    nearest integers to q*x supply the best numerator for each q.  Ties
    break toward smaller q, then smaller |p|.
    """
    xf = _x_as_fraction(x, t)
    half = t / 2.0
    best_log = half  # q = 0, p = +-1: length e^(t/2)
    best_witness = (1, 0)
    q = 1
    while -half + _log_int(q) < best_log:
        qx = q * xf
        p0 = math.floor(qx + Fraction(1, 2))
        p = min({p0, p0 - 1, p0 + 1}, key=lambda c: (abs(qx - c), abs(c)))
        d = abs(qx - p)
        cand = max(
            half + (_log_frac(d) if d else -math.inf),
            -half + _log_int(q),
        )
        if cand < best_log - 1e-15:
            best_log = cand
            best_witness = (p, q)
        q += 1
    return math.exp(best_log), best_witness


class _Profile:
    """Cached per-handle data for fast w evaluation over a time range."""

    def __init__(self, x: RealHandle, t_max: float):
        xf = _x_as_fraction(x, t_max)
        lad = x.full_ladder() if x.exact else x.ladder()
        self.entries = lad.entries
        self.lq = np.array([_log_int(v.q) for v in lad.entries])
        lds = []
        for v in lad.entries:
            d = abs(v.q * xf - v.p)
            lds.append(_log_frac(d) if d else -math.inf)
        self.ld = np.array(lds)

    def w(self, t):
        """-2 log of the shortest sup length, vectorized over t.

        The minimum over all nonzero lattice vectors is attained either at
        q = 0 or at a best-approximation height: any other q is beaten by
        the largest ladder height below it (smaller second coordinate, no
        worse a first).  That reduction keeps the search exact while making
        sweeps O(#heights) per point.
        """
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        cand = np.maximum(
            t_arr[:, None] / 2.0 + self.ld[None, :],
            -t_arr[:, None] / 2.0 + self.lq[None, :],
        )
        best = np.minimum(cand.min(axis=1), t_arr / 2.0)
        out = -2.0 * best + 0.0  # +0.0 normalizes -0.0
        return out if np.asarray(t).shape else float(out[0])

    def witness(self, t: float) -> tuple[float, tuple[int, int]]:
        half = t / 2.0
        best_log, best_wit = half, (1, 0)
        for k, v in enumerate(self.entries):
            cand = max(half + self.ld[k], -half + self.lq[k])
            if cand < best_log - 1e-15:
                best_log, best_wit = cand, (v.p, v.q)
        return math.exp(best_log), best_wit


def _as_slice(x, t: Optional[float]) -> tuple[RealHandle, float]:
    if isinstance(x, LatticeSlice):
        return x.x, x.t
    if t is None:
        raise TypeError("a time is required unless a LatticeSlice is given")
    return x, t


def shortest_sup(
    x, t: Optional[float] = None, method: str = "reduced"
) -> tuple[float, tuple[int, int]]:
    """Shortest sup-norm vector length of the flowed lattice plus a witness.

    Accepts a LatticeSlice or a (handle, time) pair.  ``method="scan"``
    runs the literal integer enumeration (the oracle); ``method="reduced"``
    searches only q = 0 and best-approximation heights, which provably
    contains a minimizer.
    """
    x, t = _as_slice(x, t)
    if method == "scan":
        return shortest_sup_scan(x, t)
    prof = _Profile(x, max(t, 0.0))
    return prof.witness(t)


def w_lattice(x, t: Optional[float] = None, method: str = "reduced") -> float:
    x, t = _as_slice(x, t)
    length, _ = shortest_sup(x, t, method=method)
    return -2.0 * math.log(length)


def w_sweep(x: RealHandle, ts: Sequence[float]) -> np.ndarray:
    """Vectorized w over a time grid."""
    ts = np.asarray(ts, dtype=float)
    prof = _Profile(x, float(ts.max()))
    return prof.w(ts)


def verify_pl(x: RealHandle, t_grid: Sequence[float]) -> tuple[float, float]:
    """Extrema of w - tent over the grid: (max_excess, min_excess).

    The sandwich 0 <= w - tent <= 2 log 2 holds pointwise, so a grid only
    samples it; slopes are +-1, so a step-h grid certifies the bound up
    to h everywhere.
    """
    ts = np.asarray(t_grid, dtype=float)
    t_max = float(ts.max())
    if not x.exact:
        x.ladder(min_height=int(math.ceil(math.exp(t_max / 2.0 + 1))) + 1)
    tent = tent_of(x)
    excess = w_sweep(x, ts) - tent(ts)
    return float(excess.max()), float(excess.min())


# ---------------------------------------------------------------------------
# local minima of max-of-tents, exactly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinimumEvent:
    """A local minimum of the pointwise max of tents, in log-free form.

    The time is t = log(m); the value is log(ratio).  ``desc``/``asc`` name
    the coordinates whose tents descend into and ascend out of the minimum,
    with their nearest-zero ladder vectors as witnesses.  For n = 2 the
    identities m = |u||v| and ratio = max-height/min-height hold exactly.
    """

    m: int
    ratio: Fraction
    desc_index: int
    asc_index: int
    desc_witness: PrimitiveVector
    asc_witness: PrimitiveVector
    witnesses: tuple[PrimitiveVector, ...]  # nearest-zero vector per coordinate

    @property
    def t(self) -> float:
        return _log_int(self.m)

    @property
    def value(self) -> float:
        return math.log(self.ratio.numerator) - math.log(self.ratio.denominator)


def _tent_ratio(m: int, sq: list[int], finite: bool) -> tuple[Fraction, int]:
    """Tent value at time log(m) as an exact ratio >= 1, plus nearest index.

    ``sq`` lists the squared zero heights q_k^2 in increasing order.
    """
    i = bisect.bisect_left(sq, m)
    if i == len(sq):
        if not finite:
            raise PrecisionError("tent evaluated beyond its validity horizon")
        return Fraction(m, sq[-1]), len(sq) - 1
    if sq[i] == m:
        return Fraction(1), i
    if i == 0:
        return Fraction(sq[0], m), 0
    left = Fraction(m, sq[i - 1])
    right = Fraction(sq[i], m)
    # nearer zero on the log scale: compare m/sq[i-1] vs sq[i]/m exactly
    if m * m <= sq[i - 1] * sq[i]:
        return left, i - 1
    return right, i


def _tent_slopes(m: int, sq: list[int], heights: list[int], finite: bool) -> tuple[int, int]:
    """(left, right) slopes of one tent at time log(m)."""
    i = bisect.bisect_left(sq, m)
    if i == len(sq):
        return (1, 1)  # ascending tail (finite sources only reach here)
    if sq[i] == m:
        return (-1, 1)
    if i == 0:
        return (-1, -1)  # left tail, descending into the first zero
    peak = heights[i - 1] * heights[i]  # peak time log(q_lo * q_hi)
    if m < peak:
        return (1, 1)
    if m > peak:
        return (-1, -1)
    return (1, -1)


def minima_from_heights(
    height_lists: Sequence[Sequence[int]],
    finite_flags: Sequence[bool],
    horizon: float,
) -> list[tuple[int, Fraction, int, int, tuple[int, ...]]]:
    """Local minima of max-of-tents given raw zero-height lists.

    Returns (m, ratio, desc_index, asc_index, nearest_zero_indices) tuples
    with times log(m) in (0, horizon].  Every candidate minimum time is
    log(q * q') for zero heights q, q' (possibly from the same tent),
    evaluated and slope-tested in exact integer arithmetic.
    """
    tents = []
    m_cap = None
    for hs, finite in zip(height_lists, finite_flags):
        hs = list(hs)
        if not finite:
            if 2.0 * _log_int(hs[-1]) < horizon - 1e-9:
                raise PrecisionError("horizon beyond tent validity")
            top = hs[-1] * hs[-1]
            m_cap = top if m_cap is None else min(m_cap, top)
        tents.append((hs, [q * q for q in hs], finite))

    candidates: set[int] = set()
    for hs_a, _, _ in tents:
        for hs_b, _, _ in tents:
            for qa in hs_a:
                la = _log_int(qa)
                for qb in hs_b:
                    m = qa * qb
                    if (
                        m > 1
                        and la + _log_int(qb) <= horizon + 1e-12
                        and (m_cap is None or m <= m_cap)
                    ):
                        candidates.add(m)

    out = []
    for m in sorted(candidates):
        ratios = [_tent_ratio(m, sq, finite) for _, sq, finite in tents]
        fmax = max(r for r, _ in ratios)
        attaining = [k for k, (r, _) in enumerate(ratios) if r == fmax]
        slopes = [
            _tent_slopes(m, tents[k][1], tents[k][0], tents[k][2]) for k in attaining
        ]
        left = min(s[0] for s in slopes)
        right = max(s[1] for s in slopes)
        if not (left == -1 and right == 1):
            continue
        desc = next(k for k, s in zip(attaining, slopes) if s[0] == -1)
        asc = next(k for k, s in zip(attaining, slopes) if s[1] == 1)
        out.append((m, fmax, desc, asc, tuple(idx for _, idx in ratios)))
    return out


def local_minima(xs: Sequence[RealHandle], horizon: float) -> list[MinimumEvent]:
    """All local minimum events of max_i tent(x_i) in (0, horizon]."""
    if not xs:
        raise ValueError("need at least one coordinate")
    min_h = int(math.ceil(math.exp(min(horizon, 1300.0) / 2.0))) + 1
    ladders = []
    flags = []
    for x in xs:
        try:
            lad = x.ladder(min_height=min_h)
        except PrecisionError:
            lad = x.ladder()  # validity re-checked on exact heights below
        ladders.append(lad)
        flags.append(x.exact and lad.exhausted)
    raw = minima_from_heights([lad.heights for lad in ladders], flags, horizon)
    events = []
    for m, ratio, desc, asc, nearest in raw:
        witnesses = tuple(lad.entries[idx] for lad, idx in zip(ladders, nearest))
        events.append(
            MinimumEvent(
                m=m,
                ratio=ratio,
                desc_index=desc,
                asc_index=asc,
                desc_witness=witnesses[desc],
                asc_witness=witnesses[asc],
                witnesses=witnesses,
            )
        )
    return events


# ---------------------------------------------------------------------------
# divergence certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DivergenceReport:
    """Horizon-bounded certificate that excursion minima clear -log(delta)."""

    horizon: float
    delta: Fraction
    events: tuple[MinimumEvent, ...]
    verdict: str  # "certified-above-threshold" | "violated-at" | "undecided"
    t0: Optional[float] = None
    violated_at: Optional[float] = None

    @property
    def threshold(self) -> float:
        return -(math.log(self.delta.numerator) - math.log(self.delta.denominator))


def divergence_certificate(
    xs: Sequence[RealHandle], delta, horizon: float
) -> DivergenceReport:
    """Check every excursion minimum beyond some onset clears -log(delta).

    The verdict is ``certified-above-threshold`` when the trailing run of
    events all exceed the threshold (t0 = first event of that run),
    ``violated-at`` the last failing event when the failures persist to the
    horizon, and ``undecided`` when no events fall inside (0, horizon].
    """
    delta = Fraction(delta)
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    for x in xs:
        if x.exact:
            raise ExcursionError(
                "divergence certificates require irrational coordinates"
            )
    events = local_minima(xs, horizon)
    if not events:
        return DivergenceReport(horizon, delta, (), "undecided")
    # value > -log delta  <=>  ratio > 1/delta  <=>  ratio * delta > 1, exact
    clears = [ev.ratio * delta > 1 for ev in events]
    if all(clears):
        return DivergenceReport(
            horizon, delta, tuple(events), "certified-above-threshold", t0=events[0].t
        )
    last_fail = max(i for i, ok in enumerate(clears) if not ok)
    if last_fail == len(events) - 1:
        return DivergenceReport(
            horizon,
            delta,
            tuple(events),
            "violated-at",
            violated_at=events[last_fail].t,
        )
    return DivergenceReport(
        horizon,
        delta,
        tuple(events),
        "certified-above-threshold",
        t0=events[last_fail + 1].t,
    )
