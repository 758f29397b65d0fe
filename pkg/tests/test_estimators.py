import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from terc.data import SampleTable
from terc.envs import SyntheticSpec, gen_synthetic
from terc.estimators import (
    EstimatorDiverged,
    MineCache,
    MineConfig,
    PhiEstimate,
    conditional_redundancy,
    mine_mi,
    phi_measure,
    plugin_cond_entropy,
    plugin_entropy,
    plugin_mi,
    plugin_transfer_entropy,
    synergy,
    to_bits,
)

LN2 = math.log(2)
H_QUARTER = -(0.25 * math.log(0.25) + 0.75 * math.log(0.75))


def enumerated(kind):
    """Every (x1, x2, x3) combination once, extended like the synthetic generator."""
    rows = np.array(list(itertools.product([0, 1], repeat=3)))
    x1, x2, x3 = rows.T
    extra = (x1, x1, x1) if kind == "four_redundant" else (x1, x2, x3)
    cols = dict(zip(["X1", "X2", "X3", "X4", "X5", "X6"], (x1, x2, x3) + extra))
    cols["action"] = ((x1 == x2) & (x2 == x3)).astype(int)
    return SampleTable(cols)


class TestPlugin:
    def test_fair_coin(self):
        assert plugin_entropy([0, 1, 0, 1]) == pytest.approx(LN2, abs=1e-15)

    def test_constant_zero(self):
        assert plugin_entropy(np.zeros(50, dtype=int)) == 0.0

    def test_quarter_target_entropy(self):
        t = enumerated("four_redundant")
        assert plugin_entropy(t["action"]) == pytest.approx(H_QUARTER, abs=1e-12)
        assert H_QUARTER == pytest.approx(0.5623, abs=1e-4)

    def test_bits(self):
        assert to_bits(LN2) == pytest.approx(1.0)

    def test_xor_synergy(self):
        x1, x2 = np.array(list(itertools.product([0, 1], repeat=2))).T
        a = x1 ^ x2
        assert plugin_mi(x1, a) == 0.0
        assert plugin_mi(x2, a) == 0.0
        assert plugin_mi(np.column_stack([x1, x2]), a) == LN2
        assert synergy(a, [x1, x2]) == LN2

    def test_cond_entropy_given_copy(self):
        x = np.random.default_rng(0).integers(0, 5, 300)
        assert plugin_cond_entropy(x, x) == 0.0

    def test_redundancy_of_copies(self):
        t = enumerated("four_redundant")
        # X1 and its copy X4 carry identical information about A
        r = conditional_redundancy(t["action"], [t["X1"], t["X4"]])
        h = plugin_cond_entropy(t["action"], t["X1"])
        assert r == pytest.approx(h, abs=1e-12)

    def test_real_columns_rejected(self):
        with pytest.raises(ValueError, match="quantize"):
            plugin_entropy(np.array([0.5, 1.5]))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            plugin_mi([0, 1, 0], [0, 1])


class TestTransferEntropy:
    def test_forms_agree(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            k = int(rng.integers(2, 5))
            x = rng.integers(0, k, 1000)
            y = rng.integers(0, k, 1000)
            a = plugin_transfer_entropy(y, x, form="entropy")
            b = plugin_transfer_entropy(y, x, form="mi")
            assert abs(a - b) <= 1e-12

    def test_driven_series(self):
        rng = np.random.default_rng(4)
        y = rng.integers(0, 2, 5000)
        x = np.roll(y, 1)  # x copies y with one step of delay
        assert plugin_transfer_entropy(y, x) == pytest.approx(LN2, abs=0.01)
        assert plugin_transfer_entropy(x, y) < 0.01

    def test_too_short(self):
        with pytest.raises(ValueError):
            plugin_transfer_entropy([1], [0])


class TestPhi:
    def test_four_redundant_values(self):
        t = enumerated("four_redundant")
        assert phi_measure(t, "X2").mean == pytest.approx(0.5 * LN2, abs=1e-12)
        assert phi_measure(t, "X3").mean == pytest.approx(0.5 * LN2, abs=1e-12)
        for v in ("X1", "X4", "X5", "X6"):
            assert phi_measure(t, v).mean == 0.0

    def test_two_triplets_lemma(self):
        # every single variable has a copy, so each single Phi vanishes
        t = enumerated("two_triplets")
        for v in t.variables:
            assert phi_measure(t, v).mean == 0.0
        pair = phi_measure(t, ["X1", "X4"]).mean
        assert pair > 0.2

    def test_cpmcr_pattern(self):
        t = gen_synthetic(SyntheticSpec("two_triplets", 5000, 1))
        a = t.codes(["action"])
        h = lambda names: plugin_cond_entropy(a, t.codes(names))  # noqa: E731
        full = h(t.variables)
        assert h(["X4", "X5", "X6"]) == full
        assert h(["X1", "X2", "X3"]) == full
        assert h([]) > full

    def test_runs_repeat_plugin_value(self):
        t = enumerated("four_redundant")
        est = phi_measure(t, "X2", runs=10)
        assert est.runs == 10
        assert est.std == 0.0
        assert est.lower == est.mean == est.upper

    def test_subset_outside_context(self):
        t = enumerated("four_redundant")
        with pytest.raises(ValueError):
            phi_measure(t, ["X2"], ["X1", "X3"])

    def test_unknown_estimator(self):
        with pytest.raises(ValueError):
            phi_measure(enumerated("four_redundant"), "X1", estimator="kde")

    def test_estimate_interval(self):
        est = PhiEstimate(("X1",), [1.0, 2.0, 3.0, 4.0])
        assert est.std == pytest.approx(np.std([1, 2, 3, 4], ddof=1))
        assert est.lower == pytest.approx(2.5 - 2 * est.std / 2)


@st.composite
def discrete_tables(draw):
    n = draw(st.integers(5, 60))
    k = draw(st.integers(1, 4))
    card = draw(st.integers(2, 4))
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    cols = {f"X{i + 1}": rng.integers(0, card, n) for i in range(k)}
    cols["action"] = rng.integers(0, card, n)
    return SampleTable(cols)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(discrete_tables(), st.data())
    def test_phi_non_negative(self, t, data):
        v = data.draw(st.sampled_from(t.variables))
        assert phi_measure(t, v).mean >= -1e-12

    @settings(max_examples=60, deadline=None)
    @given(discrete_tables())
    def test_phi_monotone_in_subset(self, t):
        # removing more variables can never lower H(A | rest)
        names = t.variables
        assert phi_measure(t, names).mean >= phi_measure(t, names[:1]).mean - 1e-12

    @settings(max_examples=60, deadline=None)
    @given(discrete_tables())
    def test_mi_bounds(self, t):
        x, a = t.codes(t.variables), t.codes(["action"])
        mi = plugin_mi(x, a)
        assert -1e-12 <= mi <= min(plugin_entropy(x), plugin_entropy(a)) + 1e-12
        assert mi == pytest.approx(plugin_mi(a, x), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 4))
    def test_te_identity(self, seed, k):
        rng = np.random.default_rng(seed)
        x, y = rng.integers(0, k, (2, 200))
        assert abs(plugin_transfer_entropy(y, x) - plugin_transfer_entropy(y, x, form="mi")) <= 1e-12


class TestMine:
    CFG = MineConfig(iters=600, batch=512, seed=0)

    def test_gaussian(self):
        rng = np.random.default_rng(0)
        cov = [[1, 0.9], [0.9, 1]]
        xy = rng.multivariate_normal([0, 0], cov, size=10000)
        truth = -0.5 * math.log(1 - 0.81)
        assert mine_mi(xy[:, :1], xy[:, 1], self.CFG) == pytest.approx(truth, abs=0.1)

    def test_independent_near_zero(self):
        rng = np.random.default_rng(1)
        x, y = rng.normal(size=(2, 5000))
        assert abs(mine_mi(x, y, self.CFG)) < 0.05

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        x = rng.integers(0, 2, 2000)
        a = x ^ (rng.random(2000) < 0.1)
        cfg = MineConfig(iters=100, seed=5)
        assert mine_mi(x, a, cfg) == mine_mi(x, a, cfg)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_diverging_reports_iteration(self):
        x = np.random.default_rng(0).normal(size=200)
        with pytest.raises(EstimatorDiverged) as info:
            mine_mi(x, x, MineConfig(lr=1e200, iters=50, optimizer="sgd"))
        assert 0 <= info.value.iteration <= 50

    def test_cache_shares_context_estimates(self):
        t = gen_synthetic(SyntheticSpec("four_redundant", 2000, 0))
        cfg = MineConfig(iters=50, runs=2)
        cache = MineCache(t, cfg)
        phi_measure(t, "X1", estimator="mine", config=cfg, cache=cache)
        n = len(cache.values)
        phi_measure(t, "X2", estimator="mine", config=cfg, cache=cache)
        # the full-context estimates are reused; only the new reduced context is fitted
        assert len(cache.values) == n + 2


@settings(max_examples=60, deadline=None)
@given(discrete_tables())
def test_cmi_matches_entropy_difference(t):
    from terc.estimators import plugin_cmi

    a = t.codes(["action"])
    s, rest = t.codes(t.variables[:1]), t.codes(t.variables[1:])
    diff = plugin_cond_entropy(a, rest) - plugin_cond_entropy(a, t.codes(t.variables))
    assert plugin_cmi(a, s, rest) == pytest.approx(diff, abs=1e-12)
