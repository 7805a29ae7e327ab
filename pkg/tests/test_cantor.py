"""Nested-interval construction, its certificates, and dimension estimates."""

import math
from fractions import Fraction

import pytest

from excursion.cantor import (
    CantorLevel,
    build_levels,
    build_levels_auto,
    combine_dimensions,
    floor_div_ln,
    leftmost_chain,
    lower_dim_estimate,
    nearest_in_band,
    pair_handles,
    verify_levels,
)
from excursion.cf import (
    PartialQuotientStream,
    PrimitiveVector,
    jb_ladder,
    ladder_from_stream,
)
from excursion.counting import RationalInterval
from excursion.errors import CertificationError
from excursion.lattice import divergence_certificate


def jb_base(delta=1, entries=7):
    start = ladder_from_stream(PartialQuotientStream(0, [2]), 2)
    return jb_ladder(delta, entries, start)


@pytest.fixture(scope="module")
def built():
    base = jb_base()
    k0, levels = build_levels_auto(base, 3, branch_cap=3, delta=1)
    return base, k0, levels


class TestHelpers:
    def test_floor_div_ln_small(self):
        for n in (2, 3, 10, 734, 538783, 10**9 + 7):
            assert floor_div_ln(n) == int(n / math.log(n))

    def test_nearest_in_band_matches_scan(self):
        y = Fraction(democracy := 355, 113) / 2  # arbitrary midpoint 355/226
        interval = RationalInterval(y - Fraction(1, 300), y + Fraction(1, 300), True, True)
        got = nearest_in_band(y, interval, 40, keep=5)
        brute = []
        for q in range(40, 81):
            p_min, p_max = interval.numerator_range(q)
            for p in range(p_min, p_max + 1):
                if math.gcd(p, q) == 1:
                    brute.append((abs(Fraction(p, q) - y), q, p))
        brute.sort()
        assert [(v.p, v.q) for v in got] == [(p, q) for _, q, p in brute[:5]]


class TestBuild:
    def test_small_k0_fails_loudly(self):
        base = jb_base()
        with pytest.raises(CertificationError):
            build_levels(base, 1, 2, delta=1)

    def test_auto_k0_lands_on_734(self, built):
        base, k0, levels = built
        assert base.entries[k0].q == 734
        assert len(levels) == 4

    def test_parameter_formulas(self, built):
        base, k0, levels = built
        for j, lvl in enumerate(levels):
            big_q = base.entries[k0 + j].q
            assert lvl.h == floor_div_ln(big_q)
            assert lvl.eps == Fraction(1, 8 * lvl.h**2)
            assert lvl.d == Fraction(1, big_q**2)

    def test_exact_counts_at_shallow_levels(self, built):
        _, _, levels = built
        assert levels[1].m == 922
        assert levels[2].m is not None and levels[2].m > 10**8
        assert levels[3].m is None  # beyond exact-count budget

    def test_depth_zero(self, built):
        base, k0, _ = built
        levels = build_levels(base, k0, 0, delta=1)
        assert len(levels) == 1
        assert levels[0].centers == (PrimitiveVector(1, levels[0].h),)

    def test_all_certificates_pass(self, built):
        base, k0, levels = built
        report = verify_levels(levels, base, k0)
        assert report.ok, report.failures()
        assert any(c.name == "base-parameters" for c in report.checks)

    def test_shifted_interval_breaks_gap_certificate(self, built):
        _, _, levels = built
        lvl = levels[1]
        # park an interval eps/2 past a sibling: the gap shrinks to eps/2
        moved = lvl.centers[1].value + 2 * lvl.d + lvl.eps / 2
        bad_center = PrimitiveVector(moved.numerator, moved.denominator)
        bad_level = CantorLevel(
            lvl.j,
            lvl.h,
            lvl.eps,
            lvl.d,
            (bad_center,) + lvl.centers[1:],
            lvl.parents,
            lvl.child_counts,
            lvl.m,
        )
        report = verify_levels([levels[0], bad_level])
        names = {c.name for c in report.failures()}
        assert "gap" in names

    def test_truncated_levels_have_vacuous_leaf_check(self, built):
        _, _, levels = built
        report = verify_levels(levels[:2])
        assert report.ok
        leaf_checks = [c for c in report.checks if c.name == "witness-next"]
        assert all(c.level < 1 for c in leaf_checks)


class TestLinkage:
    def test_divergence_of_constructed_pair(self, built):
        base, _, levels = built
        x, y, horizon = pair_handles(base, levels)
        report = divergence_certificate([x, y], Fraction(1, 2), horizon)
        assert report.verdict == "certified-above-threshold"
        floor = min(ev.value for ev in report.events)
        assert floor > math.log(2)

    def test_nested_point_is_in_all_chain_intervals(self, built):
        base, _, levels = built
        chain = leftmost_chain(levels)
        y = levels[-1].centers[chain[-1]].value
        for lvl, idx in zip(levels, chain):
            lo, hi = lvl.interval(idx)
            assert lo <= y <= hi


class TestEstimator:
    def test_middle_thirds(self):
        ms = [2] * 50
        eps = [Fraction(1, 3**j) for j in range(1, 51)]
        est = lower_dim_estimate(ms, eps)
        assert abs(est.quotients[-1] - math.log(2) / math.log(3)) < 1e-2

    def test_no_branching_gives_zero(self):
        ms = [1] * 20
        eps = [Fraction(1, 2 ** (j + 1)) for j in range(20)]
        est = lower_dim_estimate(ms, eps, j_min=1)
        assert est.quotients == tuple([0.0] * 20)
        assert est.proxy == 0.0

    def test_build_quotients(self, built):
        _, _, levels = built
        ms = [lvl.m for lvl in levels[1:] if lvl.m is not None]
        eps = [lvl.eps for lvl in levels[1 : 1 + len(ms)]]
        est = lower_dim_estimate(ms, eps, j_min=2)
        # deepest exact-count quotient; deeper counts are out of reach, so
        # this sits well below the asymptotic limit 1
        assert 0.20 < est.quotients[-1] < 0.30

    def test_combine(self):
        assert combine_dimensions(1.0, 1 / 2.5) == pytest.approx(1.4)
        assert combine_dimensions(0.0, 0.0) == 0.0
        assert combine_dimensions(1.0, 0.5) == pytest.approx(1.5)
        with pytest.raises(ValueError):
            combine_dimensions(-0.1, 0.2)
