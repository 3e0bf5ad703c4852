"""
Monte Carlo harness for the VCT model.

Trials are independent: trial ``i`` of a run with base seed ``B`` draws
from ``PCG64(mix_seed(B, i))``.  Batches of trials go through the scan
kernels together and results are written back by trial index, so the
summary does not depend on execution order or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from . import asymptotic, kernels
from .procedures import (
    AccumulationFn,
    ProcedureKind,
    ProcedureSpec,
    _q_eff,
    apply_procedure,
)
from .vct_model import VCTParams, b_max, draw_arrays, make_rng, mix_seed, pi_grid

__all__ = [
    "TrialResult",
    "SummaryRow",
    "ExperimentConfig",
    "TrialBatch",
    "run_trial",
    "simulate_trials",
    "monte_carlo",
    "run_experiment",
    "asymptotic_reference",
    "fdr_stress_grid",
    "fig1_experiment",
    "fig2_experiment",
    "fig3_experiment",
    "binomial_expectation",
    "binomial_inequality_check",
]

CHUNK = 64


@dataclass(frozen=True)
class TrialResult:
    fdp: float
    power: float
    k_hat_frac: float
    seed: int


def _trial_metrics(n, n_nonnull, k_hat, n_rej, n_false):
    fdp = n_false / max(n_rej, 1)
    power = (n_rej - n_false) / n_nonnull if n_nonnull > 0 else 0.0
    return fdp, power, (k_hat / n if n else 0.0)


def run_trial(params: VCTParams, spec: ProcedureSpec, seed: int) -> TrialResult:
    """Draw one sample and run ``spec`` on it.

    Power is the fraction of all non-nulls rejected (0 when the sample has
    no non-nulls).
    """
    p, is_null = draw_arrays(params, make_rng(seed))
    out = apply_procedure(p, spec)
    rej = out.rejected_mask(params.n)
    n_false = int(np.count_nonzero(rej & is_null))
    fdp, power, kf = _trial_metrics(params.n, int(np.count_nonzero(~is_null)),
                                    out.k_hat, out.n_rejected, n_false)
    return TrialResult(fdp=fdp, power=power, k_hat_frac=kf, seed=int(seed))


@dataclass
class TrialBatch:
    """Per-trial arrays from :func:`simulate_trials`, indexed by trial number."""

    fdp: np.ndarray
    power: np.ndarray
    k_hat_frac: np.ndarray
    seeds: np.ndarray

    def __len__(self):
        return self.fdp.size

    def trial(self, i: int) -> TrialResult:
        return TrialResult(float(self.fdp[i]), float(self.power[i]),
                           float(self.k_hat_frac[i]), int(self.seeds[i]))


def _run_chunk(params, spec, seeds, pis):
    n = params.n
    reps = len(seeds)
    kind = spec.kind
    if kind in (ProcedureKind.BH, ProcedureKind.STOREY_BH):
        rows = [run_trial(params, spec, s) for s in seeds]
        return (np.array([r.fdp for r in rows]), np.array([r.power for r in rows]),
                np.array([r.k_hat_frac for r in rows]))

    P = np.empty((reps, n))
    null = np.empty((reps, n), dtype=bool)
    for j, s in enumerate(seeds):
        P[j], null[j] = draw_arrays(params, make_rng(s), pis)
    if kind is ProcedureKind.ACCUMULATION_TEST:
        k_hat, n_rej, n_false = kernels.at_batch(spec.accumulation(P), null, _q_eff(spec.q))
    else:
        lam = spec.s if kind is ProcedureKind.SELECTIVE_SEQSTEP else spec.lam
        k_hat, n_rej, n_false = kernels.as_batch(P, null, spec.s, lam, _q_eff(spec.q))
    n_nonnull = n - null.sum(axis=1)
    fdp = n_false / np.maximum(n_rej, 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        power = np.where(n_nonnull > 0, (n_rej - n_false) / np.maximum(n_nonnull, 1), 0.0)
    return fdp, power, k_hat / n


def simulate_trials(params: VCTParams, spec: ProcedureSpec, n_reps: int, base_seed: int = 0,
                    workers: int = 1, order: Optional[Sequence[int]] = None) -> TrialBatch:
    """Run ``n_reps`` independent trials.

    Parameters
    ----------
    workers : int
        Threads used to process chunks of trials.
    order : sequence of int, optional
        Execution order of the trial indices; the result is the same for
        every permutation.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    seeds = np.array([mix_seed(base_seed, i) for i in range(n_reps)], dtype=np.uint64)
    idx = np.arange(n_reps) if order is None else np.asarray(order, dtype=np.int64)
    if sorted(idx.tolist()) != list(range(n_reps)):
        raise ValueError("order must be a permutation of range(n_reps)")
    chunks = [idx[i:i + CHUNK] for i in range(0, n_reps, CHUNK)]
    pis = pi_grid(params)

    def work(chunk):
        return chunk, _run_chunk(params, spec, [int(seeds[i]) for i in chunk], pis)

    fdp = np.empty(n_reps)
    power = np.empty(n_reps)
    kf = np.empty(n_reps)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    for chunk, (f, p, k) in results:
        fdp[chunk], power[chunk], kf[chunk] = f, p, k
    return TrialBatch(fdp=fdp, power=power, k_hat_frac=kf, seeds=seeds)


def asymptotic_reference(params: VCTParams, spec: ProcedureSpec):
    """Limit power for ``spec`` (``None`` for BH-type procedures)."""
    kind = spec.kind
    if kind is ProcedureKind.ADAPTIVE_SEQSTEP:
        return asymptotic.power_as(spec.s, spec.lam, spec.q, params)
    if kind is ProcedureKind.SELECTIVE_SEQSTEP:
        return asymptotic.power_ss(spec.s, spec.q, params)
    if kind is ProcedureKind.ACCUMULATION_TEST:
        nu = asymptotic.nu_of_h(spec.accumulation, params.f1)
        if nu >= 1.0:
            return None
        return asymptotic.power_at(nu, spec.q, params)
    return None


@dataclass(frozen=True)
class SummaryRow:
    gamma: float
    b: float
    mu: float
    n: int
    procedure: str
    q: float
    s: Optional[float]
    lam: Optional[float]
    n_reps: int
    base_seed: int
    mean_fdr: float
    se_fdr: float
    mean_power: float
    power_q05: float
    power_q50: float
    power_q95: float
    mean_k_hat_frac: float
    sd_k_hat_frac: float
    asymptotic_power: Optional[float]
    asymptotic_t_star: Optional[float]

    FIELDS = ()  # filled below

    def as_dict(self) -> dict:
        return asdict(self)


SummaryRow.FIELDS = tuple(f for f in SummaryRow.__dataclass_fields__)


def _sd(x):
    return float(np.std(x, ddof=1)) if x.size > 1 else math.nan


def summarize(params: VCTParams, spec: ProcedureSpec, batch: TrialBatch,
              base_seed: int) -> SummaryRow:
    n_reps = len(batch)
    ref = asymptotic_reference(params, spec)
    q05, q50, q95 = np.quantile(batch.power, [0.05, 0.5, 0.95])
    s = spec.s if spec.kind in (ProcedureKind.ADAPTIVE_SEQSTEP,
                                ProcedureKind.SELECTIVE_SEQSTEP) else None
    lam = spec.s if spec.kind is ProcedureKind.SELECTIVE_SEQSTEP else spec.lam
    return SummaryRow(
        gamma=params.gamma, b=params.b, mu=params.mu, n=params.n,
        procedure=spec.label, q=spec.q, s=s, lam=lam,
        n_reps=n_reps, base_seed=int(base_seed),
        mean_fdr=float(np.mean(batch.fdp)),
        se_fdr=_sd(batch.fdp) / math.sqrt(n_reps),
        mean_power=float(np.mean(batch.power)),
        power_q05=float(q05), power_q50=float(q50), power_q95=float(q95),
        mean_k_hat_frac=float(np.mean(batch.k_hat_frac)),
        sd_k_hat_frac=_sd(batch.k_hat_frac),
        asymptotic_power=None if ref is None else ref.power,
        asymptotic_t_star=None if ref is None else ref.t_star,
    )


def monte_carlo(params: VCTParams, spec: ProcedureSpec, n_reps: int, base_seed: int = 0,
                workers: int = 1) -> SummaryRow:
    """Aggregate ``n_reps`` trials into a :class:`SummaryRow`."""
    batch = simulate_trials(params, spec, n_reps, base_seed, workers)
    return summarize(params, spec, batch, base_seed)


# ---------------------------------------------------------------------------
# experiment configs
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """A sweep over model parameters crossed with a list of procedures."""

    gamma: list
    b: list
    mu: list
    n: list
    procedures: list
    n_reps: int = 100
    base_seed: int = 0
    output: Optional[str] = None

    def __post_init__(self):
        for name in ("gamma", "b", "mu", "n", "procedures"):
            val = getattr(self, name)
            if not isinstance(val, (list, tuple)):
                val = [val]
                setattr(self, name, val)
            if len(val) == 0:
                raise ValueError(f"{name} sweep must be nonempty")
        self.procedures = [p if isinstance(p, ProcedureSpec) else ProcedureSpec.from_dict(p)
                           for p in self.procedures]
        if int(self.n_reps) < 1:
            raise ValueError("n_reps must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        model = d.get("model", d)
        return cls(gamma=model["gamma"], b=model["b"], mu=model["mu"], n=model["n"],
                   procedures=d["procedures"], n_reps=d.get("n_reps", 100),
                   base_seed=d.get("base_seed", 0), output=d.get("output"))

    def to_dict(self) -> dict:
        return {
            "model": {"gamma": list(self.gamma), "b": list(self.b),
                      "mu": list(self.mu), "n": list(self.n)},
            "procedures": [p.to_dict() for p in self.procedures],
            "n_reps": self.n_reps,
            "base_seed": self.base_seed,
            "output": self.output,
        }


def run_experiment(config: ExperimentConfig, workers: int = 1) -> list:
    """One :class:`SummaryRow` per (gamma, b, mu, n, procedure) cell.

    All procedures in a model cell share the same base seed, so they see
    the same simulated p-values.
    """
    rows = []
    for gamma in config.gamma:
        for b in config.b:
            for mu in config.mu:
                for n in config.n:
                    params = VCTParams(float(gamma), float(b), float(mu), int(n))
                    for spec in config.procedures:
                        rows.append(monte_carlo(params, spec, int(config.n_reps),
                                                config.base_seed, workers))
    return rows


# ---------------------------------------------------------------------------
# FDR stress grid and figure tables
# ---------------------------------------------------------------------------

NULL_GAMMA = 1e-9


def fdr_stress_grid(n_reps: int = 2000, base_seed: int = 2016, mu: float = 2.0,
                  pi0s=(1.0, 0.8, 0.5), ns=(100, 1000),
                  s_lams=((0.1, 0.5), (0.1, 0.95), (0.5, 0.5)), qs=(0.05, 0.2),
                  workers: int = 1) -> list:
    """FDR of Adaptive SeqStep over a stress grid of models and tuning values.

    A null fraction ``pi0`` maps to ``gamma = 1 - pi0`` (``1e-9`` for the
    global null) with ordering quality ``b = b_max(gamma) / 2``.
    """
    rows = []
    for pi0 in pi0s:
        gamma = NULL_GAMMA if pi0 >= 1.0 else 1.0 - pi0
        b = 1.0 if pi0 >= 1.0 else 0.5 * b_max(gamma)
        for n in ns:
            params = VCTParams(gamma, b, mu, n)
            for s, lam in s_lams:
                for q in qs:
                    spec = ProcedureSpec(ProcedureKind.ADAPTIVE_SEQSTEP, q=q, s=s, lam=lam)
                    batch = simulate_trials(params, spec, n_reps, base_seed, workers)
                    row = summarize(params, spec, batch, base_seed)
                    rows.append({"pi0": pi0, **row.as_dict()})
    return rows


FIG1_DEFAULTS = dict(gamma=0.2, b=5.0, mu=2.0, s=0.2, q=0.2, lam=0.5, n=3000)


def fig1_experiment(n: int = 3000, seed: int = 1, gamma: float = 0.2, b: float = 5.0,
                    mu: float = 2.0, s: float = 0.2, q: float = 0.2, lam: float = 0.5) -> dict:
    """One realised AS FDP-estimate path alongside its population limit.

    ``b = 5`` sits slightly above ``b_max(0.2)``; the model is run with
    sampling probabilities capped at 1.
    """
    from .procedures import adaptive_seqstep

    params = VCTParams(gamma, b, mu, n, clip_pi=True)
    p, _ = draw_arrays(params, make_rng(seed))
    out = adaptive_seqstep(p, q, s, lam)
    chi = asymptotic.chi_as(s, lam, q, params.f1)
    t_s = asymptotic.t_star(chi, Pi=params.Pi)
    rows = []
    for k in range(1, n + 1):
        t = k / n
        rows.append({
            "k": k,
            "t": t,
            "fdp_hat": out.fdp_path[k - 1],
            "Pi": params.Pi(t),
            "fdp_star": asymptotic.fdp_star_as(t, s, lam, params),
        })
    return {"rows": rows, "chi": chi, "t_star": t_s, "k_hat": out.k_hat,
            "q": q, "params": params}


FIG2_REGIMES = (
    ("sparse/weak", 0.01, 1.0),
    ("sparse/strong", 0.01, 2.0),
    ("dense/weak", 0.2, 1.0),
    ("dense/strong", 0.2, 2.0),
)


def fig2_b_grid(gamma: float, n_points: int = 100, b_min: float = 0.01) -> np.ndarray:
    bm = b_max(gamma)
    grid = np.geomspace(b_min, bm, n_points)
    grid[-1] = bm
    return grid


def fig2_experiment(q: float = 0.1, lam: float = 0.5, n_points: int = 100,
                    b_min: float = 0.01, regimes=FIG2_REGIMES) -> list:
    """Asymptotic power of AS(s=q), AS(s=q/10), SS(s=q) and AT(nu=0) across ``b``."""
    rows = []
    for name, gamma, mu in regimes:
        for b in fig2_b_grid(gamma, n_points, b_min):
            params = VCTParams(gamma, float(b), mu)
            results = {
                "AS(s=q)": asymptotic.power_as(q, lam, q, params),
                "AS(s=0.1q)": asymptotic.power_as(0.1 * q, lam, q, params),
                "SS(s=q)": asymptotic.power_ss(q, q, params),
                "AT(nu=0)": asymptotic.power_at(0.0, q, params),
            }
            for method, res in results.items():
                rows.append({
                    "regime": name, "gamma": gamma, "mu": mu, "b": float(b),
                    "pi0": params.pi0, "method": method, "chi": res.chi,
                    "t_star": res.t_star, "asym_power": res.power,
                })
    return rows


def fig3_experiment(ns=(100, 500, 1000, 10000), n_reps: int = 500, q: float = 0.1,
                    gamma: float = 0.2, mu: float = 2.0, b: float = 3.65,
                    lams=(0.5, 0.95), base_seed: int = 3, workers: int = 1,
                    keep_draws: bool = False) -> list:
    """Finite-sample power of AS for ``s in {q, s*}`` and each ``lam``.

    ``s*`` is the oracle threshold computed from the true model.  Every
    procedure at a given ``n`` sees the same simulated p-values.
    """
    rows = []
    ref_params = VCTParams(gamma, b, mu)
    for lam in lams:
        s_star = asymptotic.oracle_s(lam, q, ref_params)
        for choice, s in (("q", q), ("s*", s_star)):
            asym = asymptotic.power_as(s, lam, q, ref_params)
            for n in ns:
                params = VCTParams(gamma, b, mu, int(n))
                spec = ProcedureSpec(ProcedureKind.ADAPTIVE_SEQSTEP, q=q, s=s, lam=lam)
                batch = simulate_trials(params, spec, n_reps, base_seed, workers)
                qs = np.quantile(batch.power, [0.05, 0.25, 0.5, 0.75, 0.95])
                row = {
                    "lam": lam, "s_choice": choice, "s": s, "n": int(n), "n_reps": n_reps,
                    "mean_power": float(batch.power.mean()),
                    "power_q05": float(qs[0]), "power_q25": float(qs[1]),
                    "power_q50": float(qs[2]), "power_q75": float(qs[3]),
                    "power_q95": float(qs[4]), "power_iqr": float(qs[3] - qs[1]),
                    "mean_k_hat_frac": float(batch.k_hat_frac.mean()),
                    "sd_k_hat_frac": _sd(batch.k_hat_frac),
                    "mean_fdr": float(batch.fdp.mean()),
                    "asym_power": asym.power, "asym_t_star": asym.t_star,
                }
                if keep_draws:
                    row["powers"] = batch.power
                    row["k_hat_fracs"] = batch.k_hat_frac
                rows.append(row)
    return rows


def binomial_expectation(r: int, p) -> Fraction:
    """Exact ``E[X / (r + 1 - X)]`` for ``X ~ Binomial(r, p)``, ``p`` rational."""
    p = Fraction(p)
    total = Fraction(0)
    for i in range(r + 1):
        total += Fraction(i, r + 1 - i) * math.comb(r, i) * p ** i * (1 - p) ** (r - i)
    return total


def binomial_inequality_check(r_max: int = 12, p_grid: Optional[Iterable] = None,
                              return_violations: bool = False):
    """Verify ``E[X/(r+1-X)] <= p/(1-p)`` exactly for ``r <= r_max`` over ``p_grid``.

    The default grid is ``0.05, 0.10, ..., 0.95`` held as exact fractions.
    """
    if r_max > 20:
        raise ValueError("exact enumeration is limited to r_max <= 20")
    if p_grid is None:
        p_grid = [Fraction(k, 20) for k in range(1, 20)]
    violations = []
    for r in range(0, r_max + 1):
        for p in p_grid:
            p = Fraction(p)
            lhs = binomial_expectation(r, p)
            rhs = p / (1 - p)
            if lhs > rhs:
                violations.append((r, p, lhs, rhs))
    ok = not violations
    return (ok, violations) if return_violations else ok
