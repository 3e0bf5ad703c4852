"""
End-to-end acceptance criteria.

Each test prints one ``ACn PASS|FAIL`` line (collected again in the
terminal summary) before asserting, so a full run reports every criterion
even when some fail.  Run with ``pytest tests/test_acceptance.py -s``.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from adaptive_seqstep import asymptotic
from adaptive_seqstep.procedures import AccumulationFn, adaptive_seqstep, selective_seqstep
from adaptive_seqstep.simulation import (
    binomial_inequality_check,
    fig2_experiment,
    fig3_experiment,
    monte_carlo,
    fdr_stress_grid,
)
from adaptive_seqstep.procedures import ProcedureKind, ProcedureSpec
from adaptive_seqstep.vct_model import (
    AlternativeCDF,
    VCTParams,
    draw_arrays,
    f1_cdf,
    f1_pdf,
    make_rng,
    norm_cdf,
    norm_isf,
    norm_quantile,
    norm_sf,
    pi_cumulative,
    pi_local,
)


def report(record, tag, ok, detail, t0):
    record(f"{tag} {'PASS' if ok else 'FAIL'}  {detail}  [{time.perf_counter() - t0:.1f}s]")
    return ok


def test_ac1_fdr_control(acceptance_report):
    t0 = time.perf_counter()
    rows = fdr_stress_grid(n_reps=2000)
    extra = monte_carlo(VCTParams(1e-9, 1.0, 2.0, n=200),
                        ProcedureSpec(ProcedureKind.ADAPTIVE_SEQSTEP, q=0.1, s=0.1, lam=0.5),
                        2000, base_seed=2016).as_dict()
    cells = rows + [{"pi0": 1.0, **extra}]
    excess = [r["mean_fdr"] - (r["q"] + 3 * r["se_fdr"]) for r in cells]
    bad = [c for c, e in zip(cells, excess) if e > 0]
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 120
    report(acceptance_report, "AC1", ok,
           f"FDR <= q + 3 SE in {len(cells) - len(bad)}/{len(cells)} cells "
           f"(worst margin {max(excess):+.4f})", t0)
    assert not bad, bad
    assert elapsed < 120


def test_ac2_ss_equals_as(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20160)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(0, 501))
        mix = rng.random(n) < rng.random()
        p = np.where(mix, rng.beta(0.2, 3.0, n), rng.random(n))
        s = float(rng.uniform(0.01, 0.99))
        q = float(rng.uniform(0.01, 0.99))
        ss = selective_seqstep(p, q, s)
        as_ = adaptive_seqstep(p, q, s, s)
        same = (ss.k_hat, ss.rejected, ss.fdp_path, ss.spec_used) == \
               (as_.k_hat, as_.rejected, as_.fdp_path, as_.spec_used)
        # stopping rule written directly in its selective form
        R = np.cumsum(p <= s)
        A = np.cumsum(p > s)
        ok_k = np.nonzero((1 + A) / np.maximum(R, 1) <= (1 - s) / s * q * (1 + 1e-12))[0]
        k_direct = int(ok_k[-1]) + 1 if ok_k.size else 0
        mismatches += (not same) or ss.k_hat != k_direct
    ok = mismatches == 0
    report(acceptance_report, "AC2", ok,
           f"SS == AS(lambda=s) on {1000 - mismatches}/1000 random instances", t0)
    assert ok


def test_ac3_power_convergence(acceptance_report):
    t0 = time.perf_counter()
    params = VCTParams(0.2, 3.65, 2.0, n=10_000)
    spec = ProcedureSpec(ProcedureKind.ADAPTIVE_SEQSTEP, q=0.1, s=0.1, lam=0.5)
    row = monte_carlo(params, spec, 500, base_seed=0)
    d_pow = abs(row.power_q50 - row.asymptotic_power)
    d_k = abs(row.mean_k_hat_frac - row.asymptotic_t_star)
    elapsed = time.perf_counter() - t0
    ok = d_pow <= 0.03 and d_k <= 0.02 and elapsed < 180
    report(acceptance_report, "AC3", ok,
           f"median power {row.power_q50:.4f} vs limit {row.asymptotic_power:.4f} "
           f"(|d|={d_pow:.4f} <= 0.03); mean k/n {row.mean_k_hat_frac:.4f} vs t* "
           f"{row.asymptotic_t_star:.4f} (|d|={d_k:.4f} <= 0.02)", t0)
    assert d_pow <= 0.03 and d_k <= 0.02
    assert elapsed < 180


def test_ac4_fig2_structure(acceptance_report):
    t0 = time.perf_counter()
    rows = fig2_experiment()
    by_key = {(r["regime"], r["b"], r["method"]): r for r in rows}
    points = sorted({(r["regime"], r["b"]) for r in rows})
    a_bad = [k for k in points
             if by_key[k + ("AS(s=q)",)]["asym_power"] < by_key[k + ("SS(s=q)",)]["asym_power"]]
    b_bad = [k for k in points
             if (by_key[k + ("AT(nu=0)",)]["asym_power"] == 0.0)
             != (by_key[k + ("AT(nu=0)",)]["pi0"] < 0.9)]
    dense_weak = [k for k in points if k[0] == "dense/weak"]
    nz_small = {k[1] for k in dense_weak if by_key[k + ("AS(s=0.1q)",)]["asym_power"] > 0}
    nz_q = {k[1] for k in dense_weak if by_key[k + ("AS(s=q)",)]["asym_power"] > 0}
    c_ok = nz_q < nz_small
    elapsed = time.perf_counter() - t0
    ok = not a_bad and not b_bad and c_ok and elapsed < 5
    report(acceptance_report, "AC4", ok,
           f"(a) AS>=SS at {len(points) - len(a_bad)}/{len(points)}; "
           f"(b) AT=0 iff pi(0)<0.9 at {len(points) - len(b_bad)}/{len(points)}; "
           f"(c) dense/weak nonzero b-points AS(0.1q)={len(nz_small)} vs AS(q)={len(nz_q)}", t0)
    assert not a_bad and not b_bad and c_ok
    assert elapsed < 5


def test_ac5_chi_identities(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    err_max, mono_bad, dom_bad = 0.0, 0, 0
    for _ in range(1000):
        mu = float(rng.uniform(0.25, 4.0))
        q = float(rng.uniform(0.01, 0.5))
        lam = float(rng.uniform(0.05, 0.95))
        s = float(rng.uniform(0.001, 1.0)) * lam
        F = AlternativeCDF(mu)
        params = VCTParams(0.2, 1.0, mu)
        chi = asymptotic.chi_as(s, lam, q, F)
        err_max = max(err_max, abs(asymptotic.fdp_star_as(0.5, s, lam, params, Pi_value=chi) - q))
        s_up = s + float(rng.uniform(0.01, 1.0)) * (lam - s)
        lam_up = lam + float(rng.uniform(0.01, 1.0)) * (0.99 - lam)
        if s_up > s and not asymptotic.chi_as(s_up, lam, q, F) > chi:
            mono_bad += 1
        if not asymptotic.chi_as(s, lam_up, q, F) < chi:
            mono_bad += 1
        nu = asymptotic.nu_of_h(AccumulationFn.seqstep_lambda(lam), F)
        if not chi < asymptotic.chi_at(nu, q):
            dom_bad += 1
    elapsed = time.perf_counter() - t0
    ok = err_max <= 1e-9 and mono_bad == 0 and dom_bad == 0 and elapsed < 5
    report(acceptance_report, "AC5", ok,
           f"max |FDP*(chi)-q|={err_max:.1e}; monotonicity violations={mono_bad}; "
           f"chi_AS>=chi_AT cases={dom_bad} (1000 draws)", t0)
    assert err_max <= 1e-9 and mono_bad == 0 and dom_bad == 0
    assert elapsed < 5


def test_ac6_numerics(acceptance_report):
    t0 = time.perf_counter()
    # cumulative non-null fraction against quadrature of the local one
    pi_err = 0.0
    for gamma, b in ((0.2, 3.65), (0.01, 0.5), (0.5, 1.5), (0.2, 1e-4)):
        for t in np.linspace(0.01, 1.0, 25):
            quad = integrate.quad(lambda x: pi_local(x, gamma, b), 0.0, t,
                                  epsabs=1e-14, epsrel=1e-14)[0] / t
            pi_err = max(pi_err, abs(pi_cumulative(t, gamma, b) - quad))
    # normal round trips
    rt_err = 0.0
    for u in np.concatenate([np.geomspace(1e-12, 0.5, 200), 1 - np.geomspace(1e-12, 0.5, 200)]):
        rt_err = max(rt_err, abs(norm_cdf(norm_quantile(float(u))) - u) / min(u, 1 - u))
    # upper tail goes through sf/isf: cdf(z) near 1 cannot hold the digits
    for z in np.linspace(-8, 8, 401):
        z = float(z)
        back = norm_quantile(norm_cdf(z)) if z <= 0 else norm_isf(norm_sf(z))
        rt_err = max(rt_err, abs(back - z))
    # concavity of F1 through the second difference
    x = np.linspace(1e-4, 1 - 1e-4, 2001)
    concave = all(
        np.all(np.diff([f1_cdf(float(v), mu) for v in x], 2) <= 1e-15) and
        np.all(np.diff([f1_pdf(float(v), mu) for v in x]) <= 0)
        for mu in (0.5, 1.0, 2.0, 4.0)
    )
    # sampler against the closed-form CDF, and the CDF against scipy draws
    params = VCTParams(0.2, 1.0, 2.0, n=100_000)
    p, is_null = draw_arrays(params, make_rng(6), pis=np.ones(params.n))
    cdf = np.vectorize(lambda v: f1_cdf(v, 2.0))
    ks1 = stats.kstest(p, cdf).statistic
    ref = stats.norm.sf(stats.norm.rvs(loc=2.0, size=100_000, random_state=7))
    ks2 = stats.kstest(ref, cdf).statistic
    elapsed = time.perf_counter() - t0
    ok = (pi_err <= 1e-10 and rt_err <= 1e-9 and concave and max(ks1, ks2) <= 0.01
          and not is_null.any() and elapsed < 30)
    report(acceptance_report, "AC6", ok,
           f"Pi vs quadrature {pi_err:.1e}; normal round trip {rt_err:.1e}; "
           f"concave={concave}; KS sampler={ks1:.4f} scipy draws={ks2:.4f}", t0)
    assert pi_err <= 1e-10 and rt_err <= 1e-9 and concave and max(ks1, ks2) <= 0.01
    assert elapsed < 30


def test_ac7_binomial_inequality(acceptance_report):
    t0 = time.perf_counter()
    ok_all, violations = binomial_inequality_check(12, return_violations=True)
    elapsed = time.perf_counter() - t0
    ok = ok_all and not violations and elapsed < 1
    report(acceptance_report, "AC7", ok,
           f"r <= 12, p in 0.05..0.95: {len(violations)} violations", t0)
    assert ok_all and not violations
    assert elapsed < 1


def test_ac8_fig3_directional(acceptance_report):
    t0 = time.perf_counter()
    rows = fig3_experiment(ns=(100, 10_000), n_reps=200)
    cell = {(r["lam"], r["s_choice"], r["n"]): r for r in rows}
    iqr = {(lam, c): cell[(lam, c, 100)]["power_iqr"] for lam in (0.5, 0.95) for c in ("q", "s*")}
    a_ok = {c: iqr[(0.95, c)] > iqr[(0.5, c)] for c in ("q", "s*")}
    gaps = {lam: abs(cell[(lam, "q", 10_000)]["power_q50"] - cell[(lam, "s*", 10_000)]["power_q50"])
            for lam in (0.5, 0.95)}
    b_ok = all(g <= 0.05 for g in gaps.values())
    elapsed = time.perf_counter() - t0
    ok = all(a_ok.values()) and b_ok and elapsed < 120
    report(acceptance_report, "AC8", ok,
           "(a) n=100 IQR lam=0.95 vs 0.5: "
           + ", ".join(f"s={c} {iqr[(0.95, c)]:.3f} vs {iqr[(0.5, c)]:.3f}" for c in ("q", "s*"))
           + "; (b) n=1e4 |median(s=q)-median(s*)|: "
           + ", ".join(f"lam={lam} {g:.3f}" for lam, g in gaps.items())
           + " (limit 0.05)", t0)
    assert all(a_ok.values()), iqr
    assert b_ok, gaps
    assert elapsed < 120
