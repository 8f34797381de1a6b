import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from branchpath.complex_core import boundary_matrix, build_complex, disjoint_union
from branchpath.errors import BudgetExceeded, ZeroMicrostates
from branchpath.templates import chain, merge_split, random_layered_complex, toy_collapsed, two_strand
from branchpath.weights import (
    WeightConfiguration,
    count_lattice_configs,
    feasible_region,
    null_space,
    rank,
    weight_entropy,
)

from oracles import exact_rank, naive_count, naive_count_vectorized, rank_by_minors


def in_span(basis, v):
    return exact_rank([list(b) for b in basis] + [list(v)], len(v)) == exact_rank(
        [list(b) for b in basis], len(v))


class TestNullSpace:
    def test_merge_split(self):
        D = boundary_matrix(merge_split())
        ns = null_space(D)
        assert (ns.rank, ns.nullity) == (3, 3)
        assert rank_by_minors(D.to_list()) == 3
        for v in ns.basis_vectors:
            assert D.annihilates(v)
        for v in [(1, 0, 1, 1, 0, 1), (0, 1, 1, 1, 0, 1), (0, 0, 0, 0, 1, -1)]:
            assert in_span(ns.basis_vectors, v)

    def test_empty_matrix(self):
        ns = null_space([], n_cols=1)
        assert ns.nullity == 1 and ns.basis_vectors == ((1,),)

    def test_block_sum(self):
        a, b = merge_split(), two_strand(5, [2, 3])
        whole = null_space(boundary_matrix(disjoint_union([a, b]))).nullity
        assert whole == null_space(boundary_matrix(a)).nullity + null_space(boundary_matrix(b)).nullity

    def test_basis_is_independent(self):
        ns = null_space(boundary_matrix(merge_split()))
        assert rank([list(v) for v in ns.basis_vectors]) == ns.nullity

    def test_deterministic(self):
        D = boundary_matrix(merge_split())
        assert null_space(D) == null_space(D)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_rank_nullity_and_soundness(seed):
    cx = random_layered_complex(np.random.default_rng(seed))
    D = boundary_matrix(cx)
    ns = null_space(D)
    assert ns.rank + ns.nullity == len(cx.simplices)
    assert ns.rank == exact_rank(D.to_list(), len(cx.simplices))
    assert all(D.annihilates(v) for v in ns.basis_vectors)


class TestFeasibility:
    def test_merge_split_pinned(self):
        cx = merge_split()
        rep = feasible_region(cx, L=1, w_T=2)
        assert rep.feasible and rep.dimension == 0
        assert [rep.witness.values[s] for s in cx.simplex_ids] == [1, 1, 2, 2, 1, 1]
        assert naive_count(cx, 1, 2) == 1

    def test_merge_split_too_light(self):
        rep = feasible_region(merge_split(), L=1, w_T=1)
        assert not rep.feasible and rep.witness is None
        assert "branches" in rep.reason

    def test_single_branch(self):
        cx = chain(4)
        rep = feasible_region(cx, L=1, w_T=1)
        assert rep.feasible and rep.dimension == 0
        assert set(rep.witness.values.values()) == {1}

    def test_dimension_open(self):
        rep = feasible_region(merge_split(), L=1, w_T=3)
        assert rep.feasible and rep.dimension == 2
        assert not rep.witness.violations(merge_split())

    def test_dead_end_is_infeasible(self):
        # a middle vertex with two incoming and no outgoing edges forces zero flow
        cx = build_complex({
            "n_dim": 0, "lower_bound_L": 1,
            "vertices": [
                {"id": "a", "t": 0, "x": [0]}, {"id": "b", "t": 0, "x": [1]},
                {"id": "m", "t": 1, "x": [0]}, {"id": "z", "t": 1, "x": [1]},
                {"id": "y", "t": 2, "x": [1]},
            ],
            "simplices": [
                {"id": "e1", "vertices": ["a", "m"]}, {"id": "e2", "vertices": ["b", "m"]},
                {"id": "e3", "vertices": ["b", "z"]}, {"id": "e4", "vertices": ["z", "y"]},
            ],
        })
        assert not feasible_region(cx, L=1, w_T=5).feasible

    def test_violation_report(self):
        cx = merge_split()
        cfg = WeightConfiguration(dict(zip(cx.simplex_ids, map(Fraction, [1, 1, 2, 1, 1, 1]))), Fraction(2), Fraction(1))
        msgs = cfg.violations(cx)
        assert any("conservation" in m for m in msgs)
        assert any("cell" in m for m in msgs)


class TestCounting:
    def test_merge_split(self):
        assert count_lattice_configs(merge_split(), 1, 3, 1) == 4

    @pytest.mark.parametrize("w_T", [2, 3, 4, 5, 6])
    def test_merge_split_against_oracle(self, w_T):
        assert count_lattice_configs(merge_split(), 1, w_T) == naive_count(merge_split(), 1, w_T)

    def test_fractional_grid(self):
        cx = merge_split()
        got = count_lattice_configs(cx, "1/2", "5/2", "1/2")
        assert got == naive_count_vectorized(cx, Fraction(1, 2), Fraction(5, 2), Fraction(1, 2))

    def test_pinned_is_one(self):
        for cx in (merge_split(), toy_collapsed(3), two_strand(4, [2])):
            assert count_lattice_configs(cx, 1, cx.max_branching()) == 1

    def test_product_law(self):
        a, b = merge_split(), toy_collapsed(2)
        joint = count_lattice_configs(disjoint_union([a, b]), 1, 4)
        assert joint == count_lattice_configs(a, 1, 4) * count_lattice_configs(b, 1, 4)
        s_joint = weight_entropy(joint)
        assert math.isclose(s_joint, weight_entropy(count_lattice_configs(a, 1, 4))
                            + weight_entropy(count_lattice_configs(b, 1, 4)))

    @pytest.mark.parametrize("w_T", [2, 3, 5, 8])
    def test_toy_per_step(self, w_T):
        assert count_lattice_configs(toy_collapsed(1), 1, w_T) == w_T - 2 + 1

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            count_lattice_configs(toy_collapsed(6), 1, 30, budget=50)

    def test_infeasible_counts_zero(self):
        assert count_lattice_configs(merge_split(), 1, 1) == 0

    def test_total_from_complex(self):
        assert count_lattice_configs(merge_split(total=3)) == 4


class TestEntropy:
    def test_values(self):
        assert weight_entropy(1) == 0.0
        assert weight_entropy(4) == math.log(4)

    def test_zero(self):
        with pytest.raises(ZeroMicrostates):
            weight_entropy(0)

    @pytest.mark.parametrize("excess", [1, 10, 1000])
    def test_discrete_offset(self, excess):
        n = count_lattice_configs(toy_collapsed(1), 1, 2 + excess)
        assert weight_entropy(n) == pytest.approx(math.log(excess + 1))
        assert weight_entropy(n) - math.log(excess) == pytest.approx(math.log1p(1 / excess))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), w_T=st.integers(1, 6))
def test_count_matches_enumeration(seed, w_T):
    cx = random_layered_complex(np.random.default_rng(seed), max_simplices=9, max_width=2)
    levels = w_T
    assume(levels ** len(cx.simplices) <= 2 * 10**5)
    assert count_lattice_configs(cx, 1, w_T) == naive_count_vectorized(cx, 1, w_T)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), w_T=st.integers(1, 7))
def test_count_monotone_in_total(seed, w_T):
    cx = random_layered_complex(np.random.default_rng(seed), max_simplices=14)
    assert count_lattice_configs(cx, 1, w_T) <= count_lattice_configs(cx, 1, w_T + 1)
