"""
Large-n limits of the ordered procedures under the VCT model.

For a prefix of length ``nt`` the AS estimate converges to a function of
the prefix non-null fraction ``Pi(t)`` alone.  The procedure keeps
scanning while ``Pi(t)`` stays above a critical fraction ``chi``, so the
stopping fraction is ``t* = max{t : Pi(t) >= chi}`` and the power is
``F1(s) * t* Pi(t*) / Pi(1)`` (the ``F1(s)`` factor is absent for
accumulation tests, which reject everything before ``k_hat``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .procedures import AccumulationFn
from .vct_model import AlternativeCDF, VCTParams, f1_cdf, pi_cumulative

__all__ = [
    "AsymptoticResult",
    "chi_as",
    "chi_ss",
    "chi_at",
    "nu_of_h",
    "t_star",
    "power_as",
    "power_ss",
    "power_at",
    "fdp_star_as",
    "rule_of_thumb",
    "oracle_s",
    "bisect",
    "golden_section_max",
]

BISECT_TOL = 1e-10


class NumericError(RuntimeError):
    pass


@dataclass(frozen=True)
class AsymptoticResult:
    chi: float
    t_star: float
    power: float
    method: str
    params: VCTParams
    q: float


def _as_f1(F1) -> AlternativeCDF:
    if isinstance(F1, AlternativeCDF):
        return F1
    if isinstance(F1, VCTParams):
        return F1.f1
    return AlternativeCDF(float(F1))


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = BISECT_TOL) -> float:
    """Root of a continuous ``f`` with ``f(lo) >= 0 >= f(hi)`` (or reversed)."""
    flo = f(lo)
    sign = 1.0 if flo >= 0 else -1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if sign * f(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f: Callable[[float], float], a: float, b: float,
                       tol: float = 1e-10, max_iter: int = 200):
    """Maximise a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    best = max((f(x), x), (fc, c), (fd, d))
    return best[1], best[0]


# ---------------------------------------------------------------------------
# critical fractions
# ---------------------------------------------------------------------------

def chi_as(s: float, lam: float, q: float, F1) -> float:
    """Critical non-null fraction for Adaptive SeqStep::

        (1 - q) / (1 - (1 - F1(lam)) / (1 - lam) + q (F1(s)/s - 1))
    """
    if not 0.0 < s <= lam < 1.0:
        raise ValueError(f"need 0 < s <= lam < 1, got s={s}, lam={lam}")
    F1 = _as_f1(F1)
    denom = 1.0 - (1.0 - F1.cdf(lam)) / (1.0 - lam) + q * (F1.cdf(s) / s - 1.0)
    if not denom > 0.0:
        raise NumericError(f"chi_AS denominator {denom!r} is not positive; is F1 concave?")
    return (1.0 - q) / denom


def chi_ss(s: float, q: float, F1) -> float:
    return chi_as(s, s, q, F1)


def chi_at(nu: float, q: float) -> float:
    """Critical non-null fraction ``(1 - q) / (1 - nu)`` for accumulation tests."""
    if not 0.0 <= nu < 1.0:
        raise ValueError(f"need 0 <= nu < 1, got {nu}")
    return (1.0 - q) / (1.0 - nu)


def nu_of_h(h: AccumulationFn, F1, tol: float = 1e-10) -> float:
    """``E h(p)`` for ``p ~ F1``, by adaptive quadrature of ``h f1``."""
    F1 = _as_f1(F1)
    mu = F1.mu

    def integrand(x):
        return h(x) * F1.pdf(x)

    breaks = []
    if h.lam is not None and 0.0 < h.lam < 1.0:
        breaks.append(h.lam)
    if h.kind == "Custom":
        breaks.extend(x for x in h.grid[1:-1])
    pieces = [0.0] + sorted(set(breaks)) + [1.0]
    total = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        val, err, info = integrate.quad(integrand, a, b, epsabs=tol, epsrel=tol,
                                        limit=500, full_output=True)[:3]
        if err > 1e-8:
            raise NumericError(
                f"quadrature of h*f1 on [{a}, {b}] did not converge: "
                f"value={val!r}, abserr={err!r}, evaluations={info.get('neval')}"
            )
        total += val
    floor = F1.pdf(1.0)
    if total < floor - 1e-8:
        raise NumericError(f"nu={total} is below inf f1 = {floor}")
    return total


# ---------------------------------------------------------------------------
# stopping fraction and power
# ---------------------------------------------------------------------------

def _Pi_of(params: VCTParams, Pi: Optional[Callable[[float], float]]):
    return params.Pi if Pi is None else Pi


def t_star(chi: float, gamma: float = None, b: float = None,
           Pi: Optional[Callable[[float], float]] = None, tol: float = BISECT_TOL) -> float:
    """``max{t in [0, 1] : Pi(t) >= chi}`` for a decreasing ``Pi``.

    ``Pi`` defaults to the exponential-family closed form for
    ``(gamma, b)``; pass any decreasing callable on [0, 1] to use another
    ordering profile.
    """
    if Pi is None:
        Pi = lambda t: pi_cumulative(t, gamma, b)  # noqa: E731
    if Pi(1.0) >= chi:
        return 1.0
    if Pi(0.0) < chi:
        return 0.0
    return bisect(lambda t: Pi(t) - chi, 0.0, 1.0, tol)


def _power_from(chi, params, Pi, factor, method, q):
    Pi = _Pi_of(params, Pi)
    t = t_star(chi, Pi=Pi)
    power = 0.0 if t == 0.0 else factor * t * Pi(t) / Pi(1.0)
    return AsymptoticResult(chi=chi, t_star=t, power=min(power, factor), method=method,
                            params=params, q=q)


def power_as(s: float, lam: float, q: float, params: VCTParams,
             Pi: Optional[Callable[[float], float]] = None) -> AsymptoticResult:
    """Asymptotic power ``F1(s) t* Pi(t*) / Pi(1)`` of Adaptive SeqStep."""
    chi = chi_as(s, lam, q, params.f1)
    return _power_from(chi, params, Pi, f1_cdf(s, params.mu),
                       f"AS(s={s:g},lam={lam:g})", q)


def power_ss(s: float, q: float, params: VCTParams, Pi=None) -> AsymptoticResult:
    res = power_as(s, s, q, params, Pi)
    return AsymptoticResult(res.chi, res.t_star, res.power, f"SS(s={s:g})", params, q)


def power_at(nu: float, q: float, params: VCTParams,
             Pi: Optional[Callable[[float], float]] = None) -> AsymptoticResult:
    """Asymptotic power ``t* Pi(t*) / Pi(1)`` of an accumulation test with ``E_F1 h = nu``."""
    return _power_from(chi_at(nu, q), params, Pi, 1.0, f"AT(nu={nu:g})", q)


def fdp_star_as(t: float, s: float, lam: float, params: VCTParams,
                Pi_value: Optional[float] = None) -> float:
    """Limit of the AS FDP estimate at scan fraction ``t``.

    Pass ``Pi_value`` to evaluate at a given non-null fraction instead of
    ``Pi(t)``.
    """
    P = params.Pi(t) if Pi_value is None else Pi_value
    F1 = params.f1
    num = 1.0 + P * ((1.0 - F1.cdf(lam)) / (1.0 - lam) - 1.0)
    den = 1.0 + P * (F1.cdf(s) / s - 1.0)
    return num / den


def power_integral_form(t: float, params: VCTParams) -> float:
    """``int_0^t pi / int_0^1 pi`` by quadrature (equals ``t Pi(t) / Pi(1)``)."""
    f = params.pi
    num = integrate.quad(f, 0.0, t, epsabs=1e-13, epsrel=1e-13)[0]
    den = integrate.quad(f, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)[0]
    return num / den


def rule_of_thumb(q: float, F1, pi0_at_zero: float) -> bool:
    """Whether ``F1(q) / (1 - q) > (1 - Pi(0)) / Pi(0)``.

    ``F1`` may be an :class:`AlternativeCDF`, a callable, or the number
    ``F1(q)`` itself.
    """
    if isinstance(F1, AlternativeCDF) or callable(F1):
        f1q = F1(q)
    else:
        f1q = float(F1)
    if pi0_at_zero <= 0.0:
        return False
    return f1q / (1.0 - q) > (1.0 - pi0_at_zero) / pi0_at_zero


def oracle_s(lam: float, q: float, params: VCTParams, n_grid: int = 200,
             s_min: float = 1e-6, Pi=None, return_power: bool = False):
    """Threshold ``s`` in (0, lam] maximising the asymptotic AS power.

    A log-spaced grid locates candidate maxima; each is polished by
    golden-section search on the bracket formed by its grid neighbours.
    """
    grid = np.geomspace(s_min * lam, lam, n_grid)

    def pw(s):
        return power_as(float(s), lam, q, params, Pi).power

    vals = np.array([pw(s) for s in grid])
    best_s, best_p = float(grid[0]), float(vals[0])
    if vals.max() <= 0.0:
        return (best_s, 0.0) if return_power else best_s
    for i in range(n_grid):
        left = vals[i - 1] if i > 0 else -np.inf
        right = vals[i + 1] if i < n_grid - 1 else -np.inf
        if vals[i] <= 0.0 or vals[i] < left or vals[i] < right:
            continue
        a = grid[max(i - 1, 0)]
        b = grid[min(i + 1, n_grid - 1)]
        x, fx = golden_section_max(pw, float(a), float(b))
        for cand_s, cand_p in ((x, fx), (float(grid[i]), float(vals[i]))):
            if cand_p > best_p:
                best_s, best_p = cand_s, cand_p
    return (best_s, best_p) if return_power else best_s
