"""
Varying-coefficient two-groups (VCT) model.

Each hypothesis ``i`` of ``n`` is non-null with probability ``pi(i/n)``.
Null p-values are uniform; non-null p-values are one-sided p-values of a
unit-variance normal test with mean shift ``mu``::

    pi(t) = gamma * exp(-b t) * b / (1 - exp(-b))
    F1(x) = Phi(Phi^{-1}(x) + mu)

The module also carries the normal-distribution numerics used everywhere
else (cdf through ``erfc``, quantile through a rational approximation
polished by one Halley step), so results do not depend on the scipy
version installed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .procedures import PValueSequence

__all__ = [
    "ModelError",
    "VCTParams",
    "AlternativeCDF",
    "LabeledSample",
    "norm_cdf",
    "norm_sf",
    "norm_quantile",
    "norm_isf",
    "norm_cdf_vec",
    "norm_quantile_vec",
    "pi_local",
    "pi_cumulative",
    "b_max",
    "f1_cdf",
    "f1_pdf",
    "f1_quantile",
    "f1_quantile_vec",
    "sample_vct",
    "make_rng",
    "mix_seed",
]

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)
# series branch for b / (1 - exp(-b)) when b is this small
_B_SERIES = 1e-6


class ModelError(ValueError):
    """Raised when VCT parameters violate pi(0) <= 1 or other model constraints."""


# ---------------------------------------------------------------------------
# normal distribution
# ---------------------------------------------------------------------------

_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_cdf(z: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-z / _SQRT2)


def norm_sf(z: float) -> float:
    """Standard normal upper tail ``1 - Phi(z)``, accurate for large ``z``."""
    return 0.5 * math.erfc(z / _SQRT2)


def _quantile_lower(u: float) -> float:
    # u in (0, 0.5]
    if u < _P_LOW:
        r = math.sqrt(-2.0 * math.log(u))
        x = (((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / \
            ((((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0)
    else:
        r = u - 0.5
        w = r * r
        x = (((((_A[0] * w + _A[1]) * w + _A[2]) * w + _A[3]) * w + _A[4]) * w + _A[5]) * r / \
            (((((_B[0] * w + _B[1]) * w + _B[2]) * w + _B[3]) * w + _B[4]) * w + 1.0)
    # one Halley step
    e = 0.5 * math.erfc(-x / _SQRT2) - u
    t = e * _SQRT2PI * math.exp(0.5 * x * x)
    return x - t / (1.0 + 0.5 * x * t)


def norm_quantile(u: float) -> float:
    """Inverse of :func:`norm_cdf`.

    Returns ``-inf``/``inf`` at the endpoints; raises ``ValueError`` for
    ``u`` outside ``[0, 1]``.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {u!r}")
    if u == 0.0:
        return -math.inf
    if u == 1.0:
        return math.inf
    if u <= 0.5:
        return _quantile_lower(u)
    return -_quantile_lower(1.0 - u)


def norm_isf(u: float) -> float:
    """Inverse upper tail, ``Phi^{-1}(1 - u)``, computed without forming ``1 - u``."""
    return -norm_quantile(u)


_erfc_ufunc = np.frompyfunc(math.erfc, 1, 1)


def _erfc(x: np.ndarray) -> np.ndarray:
    return _erfc_ufunc(x).astype(np.float64)


def norm_cdf_vec(z) -> np.ndarray:
    """Vectorised :func:`norm_cdf`."""
    z = np.asarray(z, dtype=np.float64)
    return 0.5 * _erfc(-z / _SQRT2)


def norm_quantile_vec(u) -> np.ndarray:
    """Vectorised :func:`norm_quantile`; same arithmetic as the scalar path."""
    u = np.asarray(u, dtype=np.float64)
    if np.any((u < 0.0) | (u > 1.0)):
        raise ValueError("probabilities must lie in [0, 1]")
    upper = u > 0.5
    v = np.where(upper, 1.0 - u, u)
    out = np.empty_like(v)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tail = v < _P_LOW
        vt = v[tail]
        r = np.sqrt(-2.0 * np.log(vt))
        out[tail] = (((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / \
            ((((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0)
        vc = v[~tail]
        r = vc - 0.5
        w = r * r
        out[~tail] = (((((_A[0] * w + _A[1]) * w + _A[2]) * w + _A[3]) * w + _A[4]) * w + _A[5]) * r / \
            (((((_B[0] * w + _B[1]) * w + _B[2]) * w + _B[3]) * w + _B[4]) * w + 1.0)

        zero = v == 0.0
        x = np.where(zero, 0.0, out)
        e = 0.5 * _erfc(-x / _SQRT2) - v
        t = e * _SQRT2PI * np.exp(0.5 * x * x)
        x = x - t / (1.0 + 0.5 * x * t)
        x = np.where(zero, -np.inf, x)
    return np.where(upper, -x, x)


# ---------------------------------------------------------------------------
# model parameters
# ---------------------------------------------------------------------------

def _norm_factor(b: float) -> float:
    """b / (1 - exp(-b)), with its series near zero."""
    if b < _B_SERIES:
        return 1.0 + b / 2.0 + b * b / 12.0
    return b / -math.expm1(-b)


@dataclass(frozen=True)
class VCTParams:
    """Parameters of the exponential-ordering VCT model.

    Attributes
    ----------
    gamma : float
        Overall non-null fraction, ``Pi(1)``; in (0, 1).
    b : float
        Ordering quality; larger means non-nulls concentrate earlier.
    mu : float
        Mean shift of the non-null z-statistics.
    n : int
        Number of hypotheses.
    clip_pi : bool
        Accept ``pi(0) > 1`` and cap the sampling probabilities at 1.
        Off by default; exists so settings slightly past ``b_max`` can be
        run as stated.
    """

    gamma: float
    b: float
    mu: float
    n: int = 1000
    clip_pi: bool = False

    def __post_init__(self):
        for name in ("gamma", "b", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise ModelError(f"{name} must be finite")
        if not 0.0 < self.gamma < 1.0:
            raise ModelError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.b <= 0.0:
            raise ModelError(f"b must be positive, got {self.b}")
        if self.mu <= 0.0:
            raise ModelError(f"mu must be positive, got {self.mu}")
        if int(self.n) != self.n or self.n < 1:
            raise ModelError(f"n must be a positive integer, got {self.n}")
        pi0 = self.gamma * _norm_factor(self.b)
        if pi0 > 1.0 and not self.clip_pi:
            raise ModelError(
                f"pi(0) = {pi0:.6g} exceeds 1; b must not exceed "
                f"b_max(gamma={self.gamma}) = {b_max(self.gamma):.6g}"
            )

    @property
    def f1(self) -> "AlternativeCDF":
        return AlternativeCDF(self.mu)

    @property
    def pi0(self) -> float:
        """``pi(0)``, which is also ``Pi(0+)``."""
        return self.gamma * _norm_factor(self.b)

    def pi(self, t: float) -> float:
        return _pi_local(t, self.gamma, self.b)

    def Pi(self, t: float) -> float:
        return _pi_cumulative(t, self.gamma, self.b)


def _check_pi0(gamma, b):
    pi0 = gamma * _norm_factor(b)
    if pi0 > 1.0 + 1e-15:
        raise ModelError(f"pi(0) = {pi0:.6g} exceeds 1 (b > b_max)")


def _pi_local(t, gamma, b):
    return gamma * _norm_factor(b) * math.exp(-b * t)


def pi_local(t: float, gamma: float, b: float) -> float:
    """Local non-null probability ``pi(t)``."""
    _check_pi0(gamma, b)
    return _pi_local(t, gamma, b)


def _pi_cumulative(t, gamma, b):
    if t < 0.0 or t > 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    pi0 = gamma * _norm_factor(b)
    bt = b * t
    if bt < _B_SERIES:
        # (1 - e^{-bt}) / (bt) ~ 1 - bt/2 + (bt)^2/6
        return pi0 * (1.0 - bt / 2.0 + bt * bt / 6.0)
    return pi0 * -math.expm1(-bt) / bt


def pi_cumulative(t: float, gamma: float, b: float) -> float:
    """Cumulative non-null probability ``Pi(t) = (1/t) int_0^t pi``.

    At ``t = 0`` the continuous extension ``pi(0)`` is returned.
    """
    _check_pi0(gamma, b)
    return _pi_cumulative(t, gamma, b)


def b_max(gamma: float, tol: float = 1e-10) -> float:
    """Largest ``b`` with ``gamma * b / (1 - exp(-b)) <= 1``, by bisection."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    lo, hi = 0.0, 1.0 / gamma + 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gamma * _norm_factor(mid) <= 1.0:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# alternative distribution
# ---------------------------------------------------------------------------

def f1_cdf(x: float, mu: float) -> float:
    """Non-null p-value CDF, ``F1(x) = Phi(Phi^{-1}(x) + mu)``."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return norm_cdf(norm_quantile(x) + mu)


def f1_pdf(x: float, mu: float) -> float:
    """Density ``f1(x) = exp(mu * Phi^{-1}(1-x) - mu^2/2)``."""
    if x <= 0.0:
        return math.inf if mu > 0 else 1.0
    if x >= 1.0:
        return 0.0 if mu > 0 else 1.0
    return math.exp(mu * norm_isf(x) - 0.5 * mu * mu)


def f1_quantile(u: float, mu: float) -> float:
    """Inverse of :func:`f1_cdf`."""
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    return norm_cdf(norm_quantile(u) - mu)


def f1_quantile_vec(u, mu: float) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        out = norm_cdf_vec(norm_quantile_vec(u) - mu)
    out = np.where(u <= 0.0, 0.0, out)
    return np.where(u >= 1.0, 1.0, out)


@dataclass(frozen=True)
class AlternativeCDF:
    """Normal-shift alternative for one-sided p-values.

    ``mu = 0`` is accepted and gives the uniform distribution; it is
    useful as a sanity case even though the model itself requires
    ``mu > 0``.
    """

    mu: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu >= 0.0):
            raise ValueError(f"mu must be finite and nonnegative, got {self.mu}")

    def cdf(self, x: float) -> float:
        return f1_cdf(x, self.mu)

    def pdf(self, x: float) -> float:
        return f1_pdf(x, self.mu)

    def quantile(self, u: float) -> float:
        return f1_quantile(u, self.mu)

    __call__ = cdf


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def mix_seed(base_seed: int, index: int) -> int:
    """SplitMix64 finaliser applied to ``base_seed`` and a stream index.

    Deterministic, platform independent, and cheap; used to derive
    per-trial seeds so any execution order gives the same draws.
    """
    z = (int(base_seed) * 0x9E3779B97F4A7C15 + int(index) + 1) & _MASK64
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator seeded from a 64-bit integer."""
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


@dataclass(frozen=True)
class LabeledSample:
    pvals: PValueSequence
    is_null: tuple = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        if len(self.is_null) != len(self.pvals):
            raise ValueError("is_null mask must match pvals in length")

    @property
    def null_mask(self) -> np.ndarray:
        return np.asarray(self.is_null, dtype=bool)


def pi_grid(params: VCTParams) -> np.ndarray:
    """``pi(i/n)`` for ``i = 1..n``."""
    i = np.arange(1, params.n + 1, dtype=np.float64)
    pis = params.pi0 * np.exp(-params.b * i / params.n)
    return np.minimum(pis, 1.0)


def draw_arrays(params: VCTParams, rng: np.random.Generator, pis: np.ndarray | None = None):
    """Draw ``(pvals, is_null)`` arrays for one realisation.

    Two uniforms per hypothesis: the first decides membership, the second
    is the p-value itself (null) or is pushed through the F1 quantile
    (non-null).
    """
    if pis is None:
        pis = pi_grid(params)
    u = rng.random((2, params.n))
    nonnull = u[0] < pis
    p = u[1].copy()
    if nonnull.any():
        p[nonnull] = f1_quantile_vec(u[1][nonnull], params.mu)
    return p, ~nonnull


def sample_vct(params: VCTParams, seed: int) -> LabeledSample:
    """Draw one labelled p-value sequence from the VCT model."""
    p, is_null = draw_arrays(params, make_rng(seed))
    return LabeledSample(
        pvals=PValueSequence(p.tolist()),
        is_null=tuple(is_null.tolist()),
        seed=int(seed),
    )
