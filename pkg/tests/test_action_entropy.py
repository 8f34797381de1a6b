import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchpath.action_entropy import (
    ActionModel,
    FieldEnsembleModel,
    entropic_action,
    field_microstate_count,
    lattice_action,
    microstate_counts,
    microstate_entropy,
    model_from_block,
    path_actions,
)
from branchpath.complex_core import disjoint_union
from branchpath.errors import BadModelKind, ConfigError, InvalidEndpoints, ZeroMicrostates
from branchpath.paths import enumerate_paths
from branchpath.templates import chain, merge_split, random_layered_complex, toy_collapsed, two_strand

from oracles import naive_field_count

FREE = ActionModel("free_particle")


class TestLatticeAction:
    def test_constant_is_zero(self):
        assert lattice_action([1.5] * 5, FREE) == 0.0

    @pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
    def test_single_step(self, a):
        assert lattice_action([0.0, a], FREE) == pytest.approx(a * a / 2)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=8))
    def test_reversal(self, xs):
        assert lattice_action(xs, FREE) == pytest.approx(lattice_action(xs[::-1], FREE), rel=1e-12, abs=1e-12)

    def test_harmonic_left_point(self):
        m = ActionModel("harmonic_oscillator", m=2.0, omega=0.5, eps=0.1)
        xs = [1.0, 2.0, 2.0]
        kin = 0.5 * 2.0 * (1.0 / 0.1) ** 2 * 0.1
        pot = 0.5 * 2.0 * 0.25 * (1.0 + 4.0) * 0.1
        assert lattice_action(xs, m) == pytest.approx(kin - pot)

    def test_bad_kind(self):
        with pytest.raises(BadModelKind):
            lattice_action([0, 1], ActionModel("entropic"))
        with pytest.raises(BadModelKind):
            ActionModel("quartic")

    def test_short(self):
        with pytest.raises(ValueError):
            lattice_action([0.0], FREE)


class TestModels:
    def test_from_block(self):
        model, field = model_from_block({"kind": "harmonic_oscillator", "m": 2, "omega": 1, "b": 1.1})
        assert model.kind == "harmonic_oscillator" and model.m == 2
        assert field.symbol_count == 3

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            model_from_block({"kind": "free_particle", "mass": 1})

    @pytest.mark.parametrize("field", ["m", "eps", "a", "alpha"])
    def test_positive(self, field):
        with pytest.raises(ConfigError):
            ActionModel(**{field: 0.0})

    def test_rounding_error(self):
        f = FieldEnsembleModel(math.log(2))
        assert f.symbol_count == 2 and f.rounding_error < 1e-15
        g = FieldEnsembleModel(1.0)
        assert g.rounding_error == pytest.approx(abs(math.log(3) - 1))


class TestMicrostateEntropy:
    @pytest.mark.parametrize("T", [1, 3, 6])
    def test_single_branch(self, T):
        b = math.log(3)
        cx = chain(T)
        path = enumerate_paths(cx).paths[0]
        counts = microstate_counts(path, cx, FieldEnsembleModel(b), L=1, w_T=1)
        assert counts.weight_count == 1
        assert counts.entropy == pytest.approx(b * T)

    @pytest.mark.parametrize("T,w_T", [(1, 3), (2, 4), (3, 5), (4, 6)])
    def test_recombining_pair(self, T, w_T):
        b = math.log(2)
        cx = toy_collapsed(T)
        path = enumerate_paths(cx).paths[0]
        counts = microstate_counts(path, cx, FieldEnsembleModel(b), L=1, w_T=w_T)
        assert counts.weight_entropy == pytest.approx(T * math.log(w_T - 2 + 1))
        if T > 1:
            assert b * T < counts.field_entropy < 2 * b * T

    def test_infeasible(self):
        cx = merge_split()
        path = enumerate_paths(cx).paths[0]
        with pytest.raises(ZeroMicrostates):
            microstate_entropy(path, cx, FieldEnsembleModel(1.0), L=1, w_T=1)

    def test_invalid_path(self):
        cx = merge_split()
        with pytest.raises(InvalidEndpoints):
            microstate_entropy(("w1", "w4"), cx, FieldEnsembleModel(1.0), L=1, w_T=3)

    def test_additive_over_unions(self):
        a, b = merge_split(), toy_collapsed(4)
        f = FieldEnsembleModel(math.log(2))
        u = disjoint_union([a, b])
        assert field_microstate_count(u, f) == field_microstate_count(a, f) * field_microstate_count(b, f)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), max_run=st.integers(0, 2))
def test_field_count_matches_enumeration(seed, max_run):
    cx = random_layered_complex(np.random.default_rng(seed), max_simplices=9, max_width=2, parallel_prob=0.3)
    slots = sum(len(cx.simplices_at(t)) for t in range(cx.t_min, cx.t_max))
    if 2**slots > 2**15:
        return
    assert field_microstate_count(cx, FieldEnsembleModel(math.log(2), max_run)) == naive_field_count(cx, 2, max_run)


@settings(max_examples=30, deadline=None)
@given(T=st.integers(2, 12), q=st.integers(2, 5), max_run=st.integers(0, 3))
def test_field_bracket(T, q, max_run):
    b = math.log(q)
    s = math.log(field_microstate_count(toy_collapsed(T), FieldEnsembleModel(b, max_run)))
    assert s > b * T - 1e-12
    assert s < 2 * b * T + 1e-12
    if 1 <= max_run < T:
        assert b * T < s < 2 * b * T


class TestEntropicAction:
    def test_zero(self):
        assert entropic_action(0.0) == 0.0

    def test_value(self):
        assert entropic_action(math.log(4), 2.0) == -2 * math.log(4)

    @settings(max_examples=50)
    @given(a=st.floats(0, 100), d=st.floats(1e-6, 100), alpha=st.floats(1e-3, 10))
    def test_monotone(self, a, d, alpha):
        assert entropic_action(a + d, alpha) < entropic_action(a, alpha)

    def test_alpha_positive(self):
        with pytest.raises(ConfigError):
            entropic_action(1.0, 0.0)


def test_entropy_maximizer_minimizes_action():
    # recombination frequency family: more meetings, more null-space freedom
    f = FieldEnsembleModel(math.log(2))
    T = 6
    family = [two_strand(T, range(1, 1 + m)) for m in range(T)]
    s_en, s_act = [], []
    for cx in family:
        ps = enumerate_paths(cx)
        s = microstate_entropy(ps.paths[0], cx, f, L=1, w_T=5)
        s_en.append(s)
        s_act.append(path_actions(ps, ActionModel("entropic", alpha=1.5), cx, f, L=1, w_T=5)[0])
    assert int(np.argmax(s_en)) == int(np.argmin(s_act))
    assert s_act == pytest.approx([-1.5 * s for s in s_en])


def test_table_actions():
    ps = enumerate_paths(merge_split())
    acts = path_actions(ps, ActionModel("table", table=(1.0, 2.0, 3.0, 4.0)))
    assert acts.tolist() == [1.0, 2.0, 3.0, 4.0]
    with pytest.raises(ConfigError):
        path_actions(ps, ActionModel("table", table=(1.0,)))
