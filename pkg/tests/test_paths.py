import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchpath.complex_core import boundary_matrix, refine
from branchpath.errors import DegenerateEnsemble, DimensionMismatch, InvalidEndpoints, PathExplosion
from branchpath.paths import (
    count_paths,
    enumerate_paths,
    incidence_matrix,
    log_partition,
    path_probabilities,
    path_trajectory,
    simplex_weights_from_paths,
)
from branchpath.templates import chain, merge_split, lattice_complex, random_layered_complex, toy_collapsed, two_strand

from oracles import dfs_paths

MERGE_SPLIT_A = [[1, 1, 0, 0], [0, 0, 1, 1], [1, 1, 1, 1], [1, 1, 1, 1], [1, 0, 1, 0], [0, 1, 0, 1]]


class TestEnumerate:
    def test_merge_split_four_paths(self):
        ps = enumerate_paths(merge_split(), ["w1", "w2"], ["w5", "w6"])
        # left/right start, shared middle, left/right end
        assert ps.paths == (
            ("w1", "w3", "w4", "w5"),
            ("w1", "w3", "w4", "w6"),
            ("w2", "w3", "w4", "w5"),
            ("w2", "w3", "w4", "w6"),
        )

    def test_chain(self):
        assert len(enumerate_paths(chain(5))) == 1

    @pytest.mark.parametrize("T", range(1, 11))
    def test_recombining_pair(self, T):
        assert len(enumerate_paths(toy_collapsed(T))) == 2**T

    def test_restricted_endpoints(self):
        ps = enumerate_paths(merge_split(), ["w2"], ["w6"])
        assert ps.paths == (("w2", "w3", "w4", "w6"),)

    def test_disconnected_is_empty(self):
        cx = two_strand(3, [])
        ps = enumerate_paths(cx, ["s0a"], ["s2b"])
        assert len(ps) == 0

    def test_cap(self):
        with pytest.raises(PathExplosion):
            enumerate_paths(toy_collapsed(8), cap=100)

    def test_bad_endpoint(self):
        with pytest.raises(InvalidEndpoints):
            enumerate_paths(merge_split(), ["w3"], ["w5"])

    def test_lattice_count(self):
        cx = lattice_complex(3, 4)
        assert count_paths(cx) == 3**5
        assert len(enumerate_paths(cx)) == 3**5


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_enumeration_matches_dfs(seed):
    cx = random_layered_complex(np.random.default_rng(seed))
    ps = enumerate_paths(cx, cap=10**4)
    assert sorted(ps.paths) == dfs_paths(cx)
    assert list(ps.paths) == sorted(ps.paths)
    assert len(set(ps.paths)) == len(ps.paths)
    assert count_paths(cx) == len(ps)


class TestIncidence:
    def test_merge_split(self):
        A = incidence_matrix(enumerate_paths(merge_split()))
        assert A.to_list() == MERGE_SPLIT_A

    def test_chain_all_ones(self):
        A = incidence_matrix(enumerate_paths(chain(4)))
        assert A.to_list() == [[1]] * 4

    def test_annihilation(self):
        cx = merge_split()
        D = boundary_matrix(cx).data
        A = incidence_matrix(enumerate_paths(cx)).entries
        assert not (D @ A).any()

    def test_refinement_replicates_rows(self):
        cx = merge_split()
        r = refine(cx, "w3", 3)
        A = incidence_matrix(enumerate_paths(cx))
        Ar = incidence_matrix(enumerate_paths(r))
        rows = {sid: tuple(row) for sid, row in zip(A.row_ids, A.to_list())}
        rows_r = {sid: tuple(row) for sid, row in zip(Ar.row_ids, Ar.to_list())}
        for j in (1, 2, 3):
            assert rows_r[f"w3.{j}"] == rows["w3"]
        expect = Counter(rows.values())
        expect[rows["w3"]] += 2
        assert Counter(rows_r.values()) == expect

    def test_column_sums(self):
        cx = lattice_complex(3, 3)
        A = incidence_matrix(enumerate_paths(cx))
        assert (A.entries.sum(axis=0) == 3).all()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_annihilation_random(seed):
    cx = random_layered_complex(np.random.default_rng(seed))
    A = incidence_matrix(enumerate_paths(cx, cap=10**4)).entries
    assert not (boundary_matrix(cx).data @ A).any()


class TestSimplexWeights:
    def test_merge_split_symbolic(self):
        a, b, c, d = (Fraction(v) for v in (2, 3, 5, 7))
        A = incidence_matrix(enumerate_paths(merge_split()))
        assert simplex_weights_from_paths(A, [a, b, c, d]) == [a + b, c + d, a + b + c + d, a + b + c + d, a + c, b + d]

    def test_zero(self):
        A = incidence_matrix(enumerate_paths(merge_split()))
        assert not np.any(simplex_weights_from_paths(A, [0.0] * 4))

    def test_mismatch(self):
        A = incidence_matrix(enumerate_paths(merge_split()))
        with pytest.raises(DimensionMismatch):
            simplex_weights_from_paths(A, [1, 2])

    @settings(max_examples=30, deadline=None)
    @given(w=st.lists(st.fractions(min_value=0, max_value=10), min_size=4, max_size=4))
    def test_conserved(self, w):
        cx = merge_split()
        A = incidence_matrix(enumerate_paths(cx))
        assert boundary_matrix(cx).annihilates(simplex_weights_from_paths(A, w))


class TestProbabilities:
    def test_uniform_at_zero_k(self):
        assert np.allclose(path_probabilities([3.0, -1.0, 8.0], 0.0), 1 / 3)

    def test_two_to_one(self):
        k = 0.7
        p = path_probabilities([0.0, math.log(2) / k], k)
        assert p == pytest.approx([2 / 3, 1 / 3], abs=1e-15)

    def test_empty(self):
        with pytest.raises(DegenerateEnsemble):
            path_probabilities([], 1.0)

    def test_overflow_safe(self):
        p = path_probabilities([-1e6, -1e6 + 1], 1.0)
        assert np.isfinite(p).all() and p.sum() == pytest.approx(1.0)

    def test_log_partition(self):
        assert log_partition([0.0, 0.0], 3.0) == pytest.approx(math.log(2))


finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(acts=st.lists(finite, min_size=1, max_size=12), k=st.floats(0, 5), shift=finite)
def test_shift_invariance(acts, k, shift):
    p = path_probabilities(acts, k)
    q = path_probabilities([a + shift for a in acts], k)
    assert abs(p.sum() - 1) <= 1e-12
    assert np.allclose(p, q, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(acts=st.lists(finite, min_size=1, max_size=12), k=st.floats(0.01, 5), c=st.floats(0.1, 10))
def test_scale_equivariance(acts, k, c):
    p = path_probabilities(acts, k)
    q = path_probabilities([a / c for a in acts], k * c)
    assert np.allclose(p, q, atol=1e-9)


def test_trajectory():
    cx = lattice_complex(3, 2)
    assert path_trajectory(cx, ("t0x0y2", "t1x2y1")) == [0, 2, 1]
