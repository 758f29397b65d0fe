import itertools
import json

import numpy as np
import pytest

from terc.data import SampleTable
from terc.envs import SyntheticSpec, gen_synthetic
from terc.estimators import PhiEstimate, plugin_cond_entropy
from terc.selection import (
    NullModel,
    PhiEvaluator,
    SelectionTooLarge,
    ToleranceConfig,
    is_significant,
    naive_subset,
    null_bound,
    run_selection,
    select_fast,
    select_full,
    to_dot,
)


@pytest.fixture(scope="module")
def four():
    return gen_synthetic(SyntheticSpec("four_redundant", 10000, 0))


@pytest.fixture(scope="module")
def triplets():
    return gen_synthetic(SyntheticSpec("two_triplets", 10000, 0))


def cond_h(t, names):
    return plugin_cond_entropy(t.codes(["action"]), t.codes(names))


def minimal_sets(t):
    """Exhaustive search for the smallest subsets preserving H(A | all)."""
    full = cond_h(t, t.variables)
    for k in range(len(t.variables) + 1):
        hits = [set(c) for c in itertools.combinations(t.variables, k) if abs(cond_h(t, list(c)) - full) < 1e-9]
        if hits:
            return hits
    return []


class TestAlgorithms:
    def test_fast_four_redundant(self, four):
        res = select_fast(four)
        assert res.selected == ["X2", "X3", "X6"]
        assert abs(cond_h(four, res.selected) - cond_h(four, four.variables)) < 1e-9

    def test_naive_four_redundant(self, four):
        assert naive_subset(four).selected == ["X2", "X3"]

    def test_full_four_redundant(self, four):
        assert select_full(four).selected == ["X1", "X2", "X3"]

    def test_naive_triplets_empty(self, triplets):
        assert naive_subset(triplets).selected == []

    def test_full_triplets_minimal(self, triplets):
        sel = set(select_full(triplets).selected)
        assert sel in ({"X1", "X2", "X3"}, {"X4", "X5", "X6"})
        assert sel in minimal_sets(triplets)

    def test_fast_triplets_keeps_one_triplet(self, triplets):
        assert select_fast(triplets).selected == ["X4", "X5", "X6"]

    def test_independent_variables_dropped(self):
        rng = np.random.default_rng(1)
        cols = {f"X{i}": rng.integers(0, 2, 4000) for i in range(1, 4)}
        cols["action"] = cols["X2"].copy()
        t = SampleTable(cols)
        for fn in (naive_subset, select_full, select_fast):
            assert fn(t).selected == ["X2"]

    def test_decision_log_replays(self, four):
        a = select_fast(four).to_json()
        b = select_fast(four).to_json()
        assert a == b
        doc = json.loads(a)
        assert [d["decision"] for d in doc["decisions"]] == ["remove", "keep", "keep", "remove", "remove", "keep"]

    def test_power_set_guard(self):
        rng = np.random.default_rng(0)
        cols = {f"X{i}": rng.integers(0, 2, 50) for i in range(22)}
        cols["action"] = np.zeros(50, dtype=int)
        with pytest.raises(SelectionTooLarge):
            select_full(SampleTable(cols))

    def test_unknown_algorithm(self, four):
        with pytest.raises(ValueError):
            run_selection("alg3", PhiEvaluator(four))


class TestNull:
    def test_bound_formula(self):
        nm = NullModel([0.0, 0.1, 0.2, 0.3])
        assert nm.bound == pytest.approx(0.15 + 2 * np.std([0, 0.1, 0.2, 0.3], ddof=1) / 2)

    def test_needs_two_runs(self):
        with pytest.raises(ValueError):
            NullModel([0.1])

    def test_significance_rule(self):
        nm = NullModel([0.0] * 10)
        assert is_significant(PhiEstimate(("X",), [0.5] * 10), nm)
        assert not is_significant(PhiEstimate(("X",), [0.0] * 10), nm)

    def test_run_count_mismatch(self):
        with pytest.raises(ValueError):
            is_significant(PhiEstimate(("X",), [0.5] * 3), NullModel([0.0] * 10))

    def test_plugin_null_zero_on_deterministic_target(self, four):
        # A is a function of X1..X3, so an extra random column adds nothing
        nm = null_bound(four, runs=10)
        assert np.all(np.abs(nm.values) < 1e-12)

    def test_injected_variable_not_significant(self, four):
        ev = PhiEvaluator(four, tol=ToleranceConfig("statistical"))
        rng = np.random.default_rng(9)
        t = four.with_column("R", rng.integers(0, 2, four.n))
        ev = PhiEvaluator(t, tol=ToleranceConfig("statistical"))
        assert not ev.positive(ev.phi(["R"], t.variables))
        assert ev.positive(ev.phi(["X2"], t.variables))


class TestTolerance:
    def test_modes(self):
        with pytest.raises(ValueError):
            ToleranceConfig("fuzzy")
        with pytest.raises(ValueError):
            ToleranceConfig("exact", 0.0)

    def test_exact_equality(self, four):
        ev = PhiEvaluator(four)
        a = PhiEstimate(("X",), [0.3])
        b = PhiEstimate(("Y",), [0.3 + 1e-12])
        c = PhiEstimate(("Z",), [0.31])
        assert ev.equal(a, b)
        assert not ev.equal(a, b, c)

    def test_statistical_equality_overlap(self, four):
        ev = PhiEvaluator(four, tol=ToleranceConfig("statistical"))
        a = PhiEstimate(("X",), [0.30, 0.32, 0.31, 0.29])
        b = PhiEstimate(("Y",), [0.31, 0.33, 0.30, 0.32])
        c = PhiEstimate(("Z",), [0.60, 0.61, 0.62, 0.59])
        assert ev.equal(a, b)
        assert not ev.equal(a, c)


def test_dot_edges():
    text = to_dot(["X1", "X7", "X9"])
    assert text.count("->") == 3
    assert text.startswith("digraph")
