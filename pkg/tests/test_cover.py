"""Covering index sets, successor fibers, sum audits, closed-form bounds."""

import math
import random
from fractions import Fraction

import pytest

from excursion.cf import PrimitiveVector, reach_rel, succ_rel
from excursion.cover import (
    CoverNode2,
    CoverNodeN,
    analytic_bound2,
    boxes_intersect,
    cover_sum_audit,
    enumerate_sigmaN,
    fiberN_audit,
    node2_in_J,
    nodeN_in_J,
    pi2_decompose,
    quadratic_residual2,
    quadratic_residualN,
    sequence_closure,
    sigma2_enumerate,
    sigmaN_member,
    upper_dim2,
    upper_dimN,
)

V = PrimitiveVector
HALF = Fraction(1, 2)


class TestMembership2:
    def test_membership_worked_examples(self):
        assert node2_in_J(V(1, 1), V(5, 3), HALF)
        assert not node2_in_J(V(3, 2), V(5, 3), HALF)
        assert not node2_in_J(V(1, 1), V(1, 1), HALF)

    def test_exclusive_branches(self):
        assert node2_in_J(V(5, 3), V(1, 1), HALF)  # mirrored side


def ladder_cooccurrence_oracle(height_cap: int, value_range=(-1, 3)) -> set:
    """All ordered pairs (u, w) that co-occur, u before w, on some ladder
    with heights <= cap: brute-force forward enumeration over every start
    and quotient choice, carrying each state's full reachable set."""
    pairs = set()

    def walk(prev, cur, ancestors):
        a = 2 if cur[1] == 1 else 1
        while a * cur[1] + prev[1] <= height_cap:
            nxt = (a * cur[0] + prev[0], a * cur[1] + prev[1])
            for anc in ancestors:
                pairs.add((anc, nxt))
            pairs.add((nxt, nxt))
            walk(cur, nxt, ancestors + [nxt])
            a += 1

    for m in range(value_range[0], value_range[1] + 1):
        for seed in ((1, 0), (-1, 0)):
            start = (m, 1)
            pairs.add((start, start))
            walk(seed, start, [start])
    return pairs


class TestSequenceClosure:
    def test_matches_forward_cooccurrence_oracle(self):
        cap = 21
        oracle = ladder_cooccurrence_oracle(cap)
        for q in range(1, 8):
            for p in range(0, q + 1):
                if math.gcd(p, q) != 1:
                    continue
                v = V(p, q)
                got = {(w.p, w.q) for w in sequence_closure(v, Fraction(cap + 1))}
                want = {b for (a, b) in oracle if a == (p, q)}
                assert got == want, (v, got ^ want)

    def test_strictly_finer_than_chain_reachability(self):
        # (1,2) |- (1,3) |- (1,4) is a chain, but no single ladder contains
        # (1,2) and (1,4): the forced middle entry of ((1,3),(1,4)) is (0,1)
        closure = {(w.p, w.q) for w in sequence_closure(V(1, 2), Fraction(50))}
        assert (1, 3) in closure
        assert (1, 4) not in closure
        assert reach_rel(V(1, 2), V(1, 4))

    def test_members_are_chain_reachable(self):
        for w in sequence_closure(V(5, 3), Fraction(40)):
            assert reach_rel(V(5, 3), w)

    def test_includes_self(self):
        assert V(5, 3) in sequence_closure(V(5, 3), Fraction(4))

    def test_height_one_start_respects_first_step(self):
        closure = {(w.p, w.q) for w in sequence_closure(V(2, 1), Fraction(6))}
        # heights 2..5 from a = 2..5 with both seeds; no height-1 successor
        assert (5, 2) in closure and (3, 2) in closure
        assert all(q == 1 or q >= 2 for _, q in closure)
        # a = 1 first step is excluded: (2,1)+(1,0) = (3,1) must be absent
        assert (3, 1) not in closure


class TestSigma2:
    def test_worked_enumeration(self):
        node = CoverNode2(V(1, 1), V(5, 3), HALF)
        succs = sigma2_enumerate(node, 7)
        got = {((s.node.u.p, s.node.u.q), (s.node.v.p, s.node.v.q), s.a, s.b) for s in succs}
        assert got == {((8, 7), (5, 3), 7, 1), ((6, 7), (5, 3), 7, 1)}

    def test_small_cap_empty(self):
        node = CoverNode2(V(1, 1), V(5, 3), HALF)
        assert sigma2_enumerate(node, 1) == []

    def test_successors_reverify_membership(self):
        node = CoverNode2(V(1, 1), V(9, 10), Fraction(1, 8))
        succs = sigma2_enumerate(node, 160)
        assert succs
        u, v = node.u, node.v
        for s in succs:
            assert s.node.in_J
            assert succ_rel(u, s.node.u)
            assert reach_rel(v, s.node.v)
            # diameter brackets, exactly
            assert Fraction(1, 4 * s.a * s.b) <= s.ratio <= Fraction(1, s.a * s.b)
            assert s.ratio < node.delta**2
            assert 2 * s.a * node.delta**2 > 1
            assert 1 <= s.b <= 2 * s.a * node.delta**2
            assert 0 <= s.c <= s.b

    def test_mirrored_parent(self):
        node = CoverNode2(V(9, 10), V(1, 1), Fraction(1, 8))
        succs = sigma2_enumerate(node, 120)
        assert succs
        for s in succs:
            # roles swap: now |u'| < delta |v'|
            assert s.node.u.q * 8 < s.node.v.q
            assert succ_rel(node.v, s.node.v)

    def test_fiber_cardinalities(self):
        node = CoverNode2(V(1, 1), V(9, 10), Fraction(1, 8))
        succs = sigma2_enumerate(node, 300)
        fibers = {}
        for s in succs:
            fibers[(s.a, s.b)] = fibers.get((s.a, s.b), 0) + 1
        assert fibers
        for (a, b), count in fibers.items():
            assert count <= 8 * b

    def test_pi_decomposition_roundtrip(self):
        rng = random.Random(4)
        node = CoverNode2(V(1, 1), V(9, 10), Fraction(1, 8))
        for s in sigma2_enumerate(node, 200):
            b, c, vt = pi2_decompose(node.v, s.node.v)
            if vt is None:
                assert (b, c) == (1, 0) and s.node.v == node.v
            else:
                assert s.node.v.p == b * node.v.p + c * vt[0]
                assert s.node.v.q == b * node.v.q + c * vt[1]


class TestCoverSum:
    def test_analytic_bound_values(self):
        assert analytic_bound2(Fraction(1, 8), 1.75) == pytest.approx(16.0)
        assert analytic_bound2(Fraction(1, 10000), 1.75) == pytest.approx(0.0128)
        assert analytic_bound2(Fraction(1, 16), 1.6) == pytest.approx(12.5)

    def test_audit_certified_under_analytic_bound(self):
        node = CoverNode2(V(1, 1), V(9, 10), Fraction(1, 8))
        succs = sigma2_enumerate(node, 400)
        for s_exp in (1.55, 1.6, 1.75, 1.9, 1.95):
            audit = cover_sum_audit(node, s_exp, 400, successors=succs)
            assert audit.certified_total <= audit.analytic_bound + 1e-9

    def test_s_range_enforced(self):
        node = CoverNode2(V(1, 1), V(9, 10), Fraction(1, 8))
        with pytest.raises(ValueError):
            cover_sum_audit(node, 2.2, 50)

    def test_tail_bound_majorizes_continuation(self):
        # extending the enumeration consumes part of the certified tail
        node = CoverNode2(V(1, 1), V(9, 10), Fraction(1, 8))
        for s_exp in (1.6, 1.75, 1.9):
            small = cover_sum_audit(node, s_exp, 100)
            big = cover_sum_audit(node, s_exp, 400)
            gained = big.partial_sum - small.partial_sum
            assert gained >= -1e-12
            assert gained <= small.tail_bound + 1e-12
            assert big.certified_total <= small.certified_total + 1e-9


class TestClosedForms:
    def test_endpoint_and_limits(self):
        assert upper_dim2(Fraction(1, 128)) == pytest.approx(1.75, abs=1e-12)
        assert upper_dim2(Fraction(1, 10**6)) == pytest.approx(1.5, abs=1e-4)
        with pytest.raises(ValueError):
            upper_dim2(Fraction(1, 100))

    def test_small_delta_linearization(self):
        s = upper_dim2(Fraction(1, 10000))
        gap = s - (1.5 + 16e-4)
        assert 0 <= gap <= 1e-5  # quadratic correction is positive

    def test_n3_endpoint(self):
        delta = Fraction(1, 2**18 * 9)
        assert upper_dimN(3, delta) == pytest.approx(2.75, abs=1e-12)
        with pytest.raises(ValueError):
            upper_dimN(3, delta * 2)

    def test_n4_linearization(self):
        s = upper_dimN(4, Fraction(1, 10**10))
        lin = 3.5 + 5 * 8**3 * math.sqrt(1e-10)
        # remaining correction is ~2 ((2n-3) 8^(n-1))^2 delta
        assert 0 <= s - lin <= 3 * (5 * 8**3) ** 2 * 1e-10

    def test_roots_satisfy_quadratics(self):
        for delta in (Fraction(1, 128), Fraction(1, 500), Fraction(1, 10**5)):
            s = upper_dim2(delta)
            assert abs(quadratic_residual2(s, delta)) < 1e-12 * max(1.0, abs(s))
        for n, delta in ((3, Fraction(1, 2**22)), (4, Fraction(1, 10**9))):
            eps = upper_dimN(n, delta) - (n - 0.5)
            assert abs(quadratic_residualN(eps, n, delta)) < 1e-12


class TestCoverN:
    def parent(self):
        return CoverNodeN((V(7, 5), V(1, 1), V(1, 1)), 0, 1, Fraction(1, 4))

    def test_membership_examples(self):
        assert nodeN_in_J(self.parent())
        swapped = CoverNodeN((V(7, 5), V(1, 1), V(1, 1)), 1, 0, Fraction(1, 4))
        assert not nodeN_in_J(swapped)

    def test_divisibility_required(self):
        node = CoverNodeN((V(7, 5), V(1, 1), V(1, 3)), 0, 1, Fraction(1, 4))
        assert not nodeN_in_J(node)  # 3 does not divide 5

    def test_member_condition_c_violation(self):
        parent = self.parent()
        children = enumerate_sigmaN(parent, 60, a_cap=16)
        assert children
        for child in children:
            assert sigmaN_member(parent, child)
            # (c): heights strictly grow through the role swap
            assert parent.c[parent.i].q < child.c[parent.j].q
            assert parent.c[parent.j].q < child.c[child.j].q

    def test_box_intersection_examples(self):
        parent = self.parent()
        assert boxes_intersect(parent, parent)

    def test_fiber_audit_clean(self):
        audit = fiberN_audit(self.parent(), 200, a_cap=16)
        assert audit.children
        assert audit.ok, audit.violations[:4]
        # every child contracts below sqrt(delta)
        for child in audit.children:
            ratio = Fraction(self.parent().diam_inverse, child.diam_inverse)
            assert ratio * ratio < Fraction(1, 4)

    def test_caps_below_expansion_floor_give_nothing(self):
        # delta^(-1/2) = 2: successors need a > 2
        audit = fiberN_audit(self.parent(), 200, a_cap=2)
        assert audit.children == ()
