import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptive_seqstep import asymptotic
from adaptive_seqstep.procedures import AccumulationFn, ProcedureKind, ProcedureSpec
from adaptive_seqstep.simulation import (
    ExperimentConfig,
    SummaryRow,
    binomial_expectation,
    binomial_inequality_check,
    fig1_experiment,
    fig2_b_grid,
    fig2_experiment,
    fig3_experiment,
    monte_carlo,
    run_experiment,
    run_trial,
    simulate_trials,
    fdr_stress_grid,
)
from adaptive_seqstep.vct_model import VCTParams, b_max, f1_cdf

AS = ProcedureSpec(ProcedureKind.ADAPTIVE_SEQSTEP, q=0.1, s=0.1, lam=0.5)
FIG3 = VCTParams(0.2, 3.65, 2.0, n=500)

SPECS = [
    AS,
    ProcedureSpec(ProcedureKind.SELECTIVE_SEQSTEP, q=0.2, s=0.3),
    ProcedureSpec(ProcedureKind.ACCUMULATION_TEST, q=0.2, accumulation=AccumulationFn.forward_stop()),
    ProcedureSpec(ProcedureKind.ACCUMULATION_TEST, q=0.2, accumulation=AccumulationFn.hinge_exp(2.0)),
    ProcedureSpec(ProcedureKind.BH, q=0.1),
    ProcedureSpec(ProcedureKind.STOREY_BH, q=0.1, lam=0.5),
]


class TestRunTrial:
    def test_deterministic(self):
        assert run_trial(FIG3, AS, 11) == run_trial(FIG3, AS, 11)
        assert run_trial(FIG3, AS, 11) != run_trial(FIG3, AS, 12)

    def test_global_null(self):
        params = VCTParams(1e-9, 1.0, 2.0, n=300)
        for seed in range(20):
            r = run_trial(params, AS, seed)
            assert r.power == 0.0
            assert r.fdp in (0.0, 1.0)

    def test_strong_signal(self):
        params = VCTParams(0.5, 0.01, 10.0, n=1000)
        spec = ProcedureSpec(ProcedureKind.ADAPTIVE_SEQSTEP, q=0.2, s=0.1, lam=0.5)
        r = run_trial(params, spec, 5)
        assert f1_cdf(0.1, 10.0) > 0.999
        assert r.power > 0.97
        assert r.k_hat_frac > 0.95

    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
    def test_ranges(self, spec):
        for seed in range(5):
            r = run_trial(FIG3, spec, seed)
            assert 0 <= r.fdp <= 1 and 0 <= r.power <= 1 and 0 <= r.k_hat_frac <= 1


class TestSimulateTrials:
    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
    def test_batch_matches_single_trials(self, spec):
        batch = simulate_trials(FIG3, spec, 70, base_seed=4)
        for i in (0, 1, 63, 64, 69):
            assert batch.trial(i) == run_trial(FIG3, spec, int(batch.seeds[i]))

    def test_order_independent(self):
        ref = monte_carlo(FIG3, AS, 200, base_seed=9)
        perm = np.random.default_rng(0).permutation(200)
        batch = simulate_trials(FIG3, AS, 200, base_seed=9, order=perm)
        from adaptive_seqstep.simulation import summarize
        assert summarize(FIG3, AS, batch, 9) == ref

    def test_worker_count_independent(self):
        assert monte_carlo(FIG3, AS, 200, 9, workers=3) == monte_carlo(FIG3, AS, 200, 9)

    def test_bad_order(self):
        with pytest.raises(ValueError):
            simulate_trials(FIG3, AS, 3, order=[0, 0, 1])
        with pytest.raises(ValueError):
            simulate_trials(FIG3, AS, 0)


class TestMonteCarlo:
    def test_two_reps(self):
        row = monte_carlo(FIG3, AS, 2, base_seed=1)
        assert math.isfinite(row.se_fdr)
        assert row.n_reps == 2

    def test_summary_invariants(self):
        batch = simulate_trials(FIG3, AS, 300, base_seed=2)
        row = monte_carlo(FIG3, AS, 300, base_seed=2)
        assert row.se_fdr == pytest.approx(np.std(batch.fdp, ddof=1) / math.sqrt(300))
        assert row.power_q05 <= row.power_q50 <= row.power_q95
        assert row.asymptotic_power == asymptotic.power_as(0.1, 0.5, 0.1, FIG3).power
        assert set(row.as_dict()) == set(SummaryRow.FIELDS)

    def test_bh_has_no_reference(self):
        row = monte_carlo(FIG3, SPECS[4], 5)
        assert row.asymptotic_power is None and row.s is None

    def test_global_null_fdr(self):
        params = VCTParams(1e-9, 1.0, 2.0, n=200)
        row = monte_carlo(params, AS, 2000, base_seed=21)
        assert row.mean_fdr <= 0.1 + 3 * row.se_fdr

    @pytest.mark.slow
    def test_fig3_cell_median(self):
        params = VCTParams(0.2, 3.65, 2.0, n=10_000)
        row = monte_carlo(params, AS, 500, base_seed=7)
        assert abs(row.power_q50 - row.asymptotic_power) <= 0.03


class TestExperimentConfig:
    def test_round_trip_and_run(self):
        cfg = ExperimentConfig.from_dict({
            "model": {"gamma": [0.2], "b": [1.0, 3.0], "mu": 2.0, "n": [100]},
            "procedures": [AS.to_dict(), SPECS[2].to_dict()],
            "n_reps": 3, "base_seed": 5,
        })
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
        rows = run_experiment(cfg)
        assert len(rows) == 4
        assert [r.b for r in rows] == [1.0, 1.0, 3.0, 3.0]

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(gamma=[], b=[1.0], mu=[2.0], n=[10], procedures=[AS])
        with pytest.raises(ValueError):
            ExperimentConfig(gamma=[0.2], b=[1.0], mu=[2.0], n=[10], procedures=[AS], n_reps=0)


def test_fdr_stress_grid_small():
    rows = fdr_stress_grid(n_reps=50, ns=(100,))
    assert len(rows) == 18
    assert {r["pi0"] for r in rows} == {1.0, 0.8, 0.5}
    for r in rows:
        if r["pi0"] == 0.5:
            assert r["b"] == pytest.approx(b_max(0.5) / 2)


@pytest.fixture(scope="module")
def fig():
    return fig1_experiment()


class TestFig1:
    def test_shape(self, fig):
        assert len(fig["rows"]) == 3000
        assert fig["rows"][-1]["t"] == 1.0

    def test_fdp_star_at_crossing(self, fig):
        p = fig["params"]
        assert asymptotic.fdp_star_as(fig["t_star"], 0.2, 0.5, p) == pytest.approx(0.2, abs=1e-9)

    def test_path_crosses_near_q(self, fig):
        k = int(round(3000 * fig["t_star"]))
        assert abs(fig["rows"][k - 1]["fdp_hat"] - 0.2) <= 0.05

    def test_fdp_star_increasing(self, fig):
        vals = [r["fdp_star"] for r in fig["rows"]]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


@pytest.fixture(scope="module")
def rows():
    return fig2_experiment()


class TestFig2:
    def test_shape(self, rows):
        assert len(rows) == 4 * 100 * 4

    def test_grid(self):
        g = fig2_b_grid(0.2)
        assert g[0] == pytest.approx(0.01) and g[-1] == b_max(0.2)
        assert np.all(np.diff(g) > 0)

    def test_sparse_small_b_powerless(self, rows):
        for r in rows:
            if r["gamma"] == 0.01 and r["b"] < 0.02:
                assert r["asym_power"] == 0.0


class TestBinomial:
    def test_r1(self):
        assert binomial_expectation(1, Fraction(1, 2)) == Fraction(1, 2)

    @given(st.integers(0, 15), st.fractions(min_value=Fraction(1, 100), max_value=Fraction(99, 100)))
    @settings(max_examples=100, deadline=None)
    def test_closed_form(self, r, p):
        # telescoping identity for the binomial weights
        assert binomial_expectation(r, p) == p / (1 - p) * (1 - p ** r)

    def test_small_p(self):
        assert binomial_expectation(10, Fraction(1, 10 ** 6)) < Fraction(2, 10 ** 6)

    def test_full_grid(self):
        assert binomial_inequality_check(12) is True
        ok, viol = binomial_inequality_check(12, return_violations=True)
        assert ok and viol == []

    def test_limit(self):
        with pytest.raises(ValueError):
            binomial_inequality_check(21)


def test_fig3_small():
    rows = fig3_experiment(ns=(100,), n_reps=20, keep_draws=True)
    assert len(rows) == 4
    for r in rows:
        assert len(r["powers"]) == 20
        assert r["power_q25"] <= r["power_q50"] <= r["power_q75"]
