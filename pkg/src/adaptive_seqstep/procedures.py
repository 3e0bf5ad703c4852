"""
Multiple-testing procedures for ordered and batch p-values.

Every procedure here picks a rejection set of the form
``{i <= k : p_i <= s}`` by maximising the number of rejections subject
to an FDP estimate staying at or below ``q``:

* BH and Storey-BH search over the threshold ``s`` with ``k = n``;
* Selective SeqStep, Adaptive SeqStep and accumulation tests search over
  the stopping index ``k`` with the threshold fixed.

Adaptive SeqStep uses

    FDP_hat(k; s, lam) = s / (1 - lam) * (1 + A(lam, k)) / max(R(s, k), 1)

with ``R(s, k) = #{i <= k : p_i <= s}`` and ``A(lam, k) = #{i <= k : p_i > lam}``.
Selective SeqStep is the special case ``lam = s``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels

__all__ = [
    "PValueSequence",
    "ProcedureKind",
    "ProcedureSpec",
    "AccumulationFn",
    "RejectionOutcome",
    "FDP_RTOL",
    "count_stats",
    "fdp_hat_bh",
    "bh_procedure",
    "storey_pi0",
    "storey_bh",
    "fdp_hat_as",
    "fdp_hat_ss",
    "adaptive_seqstep",
    "selective_seqstep",
    "accumulation_test",
    "apply_procedure",
]

# Relative slack on "FDP_hat <= q". Absorbs rounding in s/(1-lam)*(1+A)/R
# so that values equal to q in exact arithmetic are accepted.
FDP_RTOL = 1e-12

# ForwardStop's h(1) is infinite; p-values are capped here before evaluation.
_P_CAP = 1.0 - 1e-12


def _q_eff(q: float) -> float:
    return q * (1.0 + FDP_RTOL)


def _check_unit(name: str, x: float, open_lo=False, open_hi=False):
    lo_ok = x > 0.0 if open_lo else x >= 0.0
    hi_ok = x < 1.0 if open_hi else x <= 1.0
    if not (math.isfinite(x) and lo_ok and hi_ok):
        lo = "(" if open_lo else "["
        hi = ")" if open_hi else "]"
        raise ValueError(f"{name} must lie in {lo}0, 1{hi}, got {x!r}")


@dataclass(frozen=True)
class PValueSequence:
    """P-values listed in their prior order, most promising first."""

    values: tuple
    ids: Optional[tuple] = None

    def __init__(self, values: Sequence[float], ids: Optional[Sequence[str]] = None):
        vals = tuple(float(v) for v in values)
        for i, v in enumerate(vals):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"p-value #{i + 1} = {v!r} is outside [0, 1]")
        if ids is not None:
            ids = tuple(str(x) for x in ids)
            if len(ids) != len(vals):
                raise ValueError(
                    f"ids has length {len(ids)} but there are {len(vals)} p-values"
                )
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


def _as_array(pvals) -> np.ndarray:
    if isinstance(pvals, PValueSequence):
        return pvals.as_array()
    arr = np.asarray(pvals, dtype=np.float64).ravel()
    if arr.size and (np.any(~(arr >= 0.0)) or np.any(~(arr <= 1.0))):
        raise ValueError("p-values must lie in [0, 1]")
    return arr


class ProcedureKind(str, enum.Enum):
    BH = "BH"
    STOREY_BH = "StoreyBH"
    SELECTIVE_SEQSTEP = "SelectiveSeqStep"
    ADAPTIVE_SEQSTEP = "AdaptiveSeqStep"
    ACCUMULATION_TEST = "AccumulationTest"


_KIND_ALIASES = {
    "bh": ProcedureKind.BH,
    "sbh": ProcedureKind.STOREY_BH,
    "storeybh": ProcedureKind.STOREY_BH,
    "ss": ProcedureKind.SELECTIVE_SEQSTEP,
    "selectiveseqstep": ProcedureKind.SELECTIVE_SEQSTEP,
    "as": ProcedureKind.ADAPTIVE_SEQSTEP,
    "adaptiveseqstep": ProcedureKind.ADAPTIVE_SEQSTEP,
    "at": ProcedureKind.ACCUMULATION_TEST,
    "accumulationtest": ProcedureKind.ACCUMULATION_TEST,
}


def parse_kind(name) -> ProcedureKind:
    if isinstance(name, ProcedureKind):
        return name
    key = str(name).replace("-", "").replace("_", "").lower()
    try:
        return _KIND_ALIASES[key]
    except KeyError:
        raise ValueError(f"unknown procedure {name!r}") from None


# ---------------------------------------------------------------------------
# accumulation functions
# ---------------------------------------------------------------------------

class AccumulationFn:
    """Nonnegative function ``h`` on [0, 1] with unit integral.

    Use the constructors :meth:`forward_stop`, :meth:`seqstep`,
    :meth:`hinge_exp` and :meth:`custom`.  Custom tables are linearly
    interpolated and their integral is checked on construction.
    """

    def __init__(self, kind: str, C: Optional[float] = None,
                 grid: Optional[Sequence[float]] = None,
                 values: Optional[Sequence[float]] = None):
        self.kind = kind
        self.C = None if C is None else float(C)
        self.grid = None if grid is None else tuple(float(x) for x in grid)
        self.values = None if values is None else tuple(float(v) for v in values)
        if kind in ("SeqStep", "HingeExp"):
            if self.C is None or not self.C > 1.0:
                raise ValueError(f"{kind} needs C > 1, got {C!r}")
        elif kind == "Custom":
            self._check_custom()
        elif kind != "ForwardStop":
            raise ValueError(f"unknown accumulation function {kind!r}")

    @classmethod
    def forward_stop(cls) -> "AccumulationFn":
        return cls("ForwardStop")

    @classmethod
    def seqstep(cls, C: float = 2.0) -> "AccumulationFn":
        return cls("SeqStep", C=C)

    @classmethod
    def seqstep_lambda(cls, lam: float) -> "AccumulationFn":
        """SeqStep written as ``h(x) = I(x > lam) / (1 - lam)``."""
        return cls("SeqStep", C=1.0 / (1.0 - lam))

    @classmethod
    def hinge_exp(cls, C: float = 2.0) -> "AccumulationFn":
        return cls("HingeExp", C=C)

    @classmethod
    def custom(cls, grid: Sequence[float], values: Sequence[float]) -> "AccumulationFn":
        return cls("Custom", grid=grid, values=values)

    def _check_custom(self):
        if self.grid is None or self.values is None:
            raise ValueError("Custom accumulation needs grid and values")
        x = np.asarray(self.grid)
        y = np.asarray(self.values)
        if x.shape != y.shape or x.size < 2:
            raise ValueError("grid and values must have the same length >= 2")
        if x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
            raise ValueError("grid must increase strictly from 0 to 1")
        if np.any(~np.isfinite(y)) or np.any(y < 0):
            raise ValueError("h must be finite and nonnegative")
        # trapezoid rule is exact for the piecewise-linear interpolant
        integral = float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))
        if abs(integral - 1.0) > 1e-8:
            raise ValueError(f"h must integrate to 1, got {integral:.12g}")

    @property
    def lam(self) -> Optional[float]:
        """Cut point ``1 - 1/C`` for SeqStep and HingeExp."""
        return None if self.C is None else 1.0 - 1.0 / self.C

    def __call__(self, p):
        """Evaluate ``h`` elementwise; scalars in, scalars out."""
        scalar = np.ndim(p) == 0
        x = np.asarray(p, dtype=np.float64)
        if self.kind == "ForwardStop":
            out = -np.log1p(-np.minimum(x, _P_CAP))
        elif self.kind == "SeqStep":
            out = np.where(x > self.lam, self.C, 0.0)
        elif self.kind == "HingeExp":
            C = self.C
            tail = 1.0 - np.minimum(x, _P_CAP)
            with np.errstate(divide="ignore"):
                val = C * np.log(1.0 / (C * tail))
            out = np.where(x > self.lam, val, 0.0)
        else:
            out = np.interp(x, self.grid, self.values)
        return float(out) if scalar else out

    evaluate = __call__

    def __eq__(self, other):
        if not isinstance(other, AccumulationFn):
            return NotImplemented
        return (self.kind, self.C, self.grid, self.values) == \
            (other.kind, other.C, other.grid, other.values)

    def __hash__(self):
        return hash((self.kind, self.C, self.grid, self.values))

    def __repr__(self):
        if self.kind == "Custom":
            return f"AccumulationFn.custom(<{len(self.grid)} points>)"
        if self.C is None:
            return f"AccumulationFn({self.kind!r})"
        return f"AccumulationFn({self.kind!r}, C={self.C!r})"

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.C is not None:
            d["C"] = self.C
        if self.grid is not None:
            d["grid"] = list(self.grid)
            d["values"] = list(self.values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AccumulationFn":
        return cls(d["kind"], C=d.get("C"), grid=d.get("grid"), values=d.get("values"))


# ---------------------------------------------------------------------------
# specs and outcomes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProcedureSpec:
    """Which procedure to run and with what parameters.

    ``s`` is the rejection threshold of the SeqStep family, ``lam`` the
    null-fraction cutoff of Storey-BH and Adaptive SeqStep, and
    ``accumulation`` the ``h`` of an accumulation test.  Unused fields are
    ignored.
    """

    kind: ProcedureKind
    q: float
    s: Optional[float] = None
    lam: Optional[float] = None
    accumulation: Optional[AccumulationFn] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_kind(self.kind))
        _check_unit("q", self.q, open_lo=True, open_hi=True)
        k = self.kind
        if k is ProcedureKind.ADAPTIVE_SEQSTEP:
            if self.s is None or self.lam is None:
                raise ValueError("Adaptive SeqStep needs s and lam")
            _check_unit("s", self.s, open_lo=True, open_hi=True)
            _check_unit("lam", self.lam, open_lo=True, open_hi=True)
            if self.s > self.lam:
                raise ValueError(f"need s <= lam, got s={self.s}, lam={self.lam}")
        elif k is ProcedureKind.SELECTIVE_SEQSTEP:
            if self.s is None:
                raise ValueError("Selective SeqStep needs s")
            _check_unit("s", self.s, open_lo=True, open_hi=True)
        elif k is ProcedureKind.STOREY_BH:
            if self.lam is None:
                raise ValueError("Storey-BH needs lam")
            _check_unit("lam", self.lam, open_lo=True, open_hi=True)
        elif k is ProcedureKind.ACCUMULATION_TEST:
            if not isinstance(self.accumulation, AccumulationFn):
                raise ValueError("accumulation test needs an AccumulationFn")

    @property
    def label(self) -> str:
        k = self.kind
        if k is ProcedureKind.ADAPTIVE_SEQSTEP:
            return f"AS(s={self.s:g},lam={self.lam:g})"
        if k is ProcedureKind.SELECTIVE_SEQSTEP:
            return f"SS(s={self.s:g})"
        if k is ProcedureKind.STOREY_BH:
            return f"SBH(lam={self.lam:g})"
        if k is ProcedureKind.ACCUMULATION_TEST:
            a = self.accumulation
            return f"AT({a.kind})" if a.C is None else f"AT({a.kind},C={a.C:g})"
        return "BH"

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "q": self.q}
        if self.s is not None:
            d["s"] = self.s
        if self.lam is not None:
            d["lambda"] = self.lam
        if self.accumulation is not None:
            d["accumulation"] = self.accumulation.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProcedureSpec":
        acc = d.get("accumulation")
        if isinstance(acc, str):
            acc = AccumulationFn(_ACC_NAMES[acc.lower()], C=d.get("C"))
        elif isinstance(acc, dict):
            acc = AccumulationFn.from_dict(acc)
        return cls(kind=d["kind"], q=d["q"], s=d.get("s"),
                   lam=d.get("lambda", d.get("lam")), accumulation=acc)


_ACC_NAMES = {"forwardstop": "ForwardStop", "seqstep": "SeqStep", "hingeexp": "HingeExp"}


@dataclass(frozen=True)
class RejectionOutcome:
    """Result of running a procedure.

    ``rejected`` holds 1-based indices.  For stopping-rule procedures
    ``fdp_path[k-1]`` is the FDP estimate after scanning ``k`` hypotheses;
    for BH/Storey-BH it is the estimate at the threshold equal to the
    ``k``-th smallest p-value, and ``k_hat`` is ``n``.
    """

    k_hat: int
    rejected: tuple
    fdp_path: tuple = field(repr=False)
    spec_used: ProcedureSpec

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)

    def rejected_mask(self, n: int) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        if self.rejected:
            mask[np.asarray(self.rejected) - 1] = True
        return mask


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def count_stats(pvals, threshold: float, k: int):
    """Return ``(R, A)`` counts of the first ``k`` p-values at ``threshold``.

    ``R`` counts ``p_i <= threshold`` and ``A`` counts ``p_i > threshold``.
    """
    p = _as_array(pvals)
    _check_unit("threshold", threshold)
    if int(k) != k or not 0 <= k <= p.size:
        raise ValueError(f"k must be an integer in [0, {p.size}], got {k!r}")
    R = int(np.count_nonzero(p[: int(k)] <= threshold))
    return R, int(k) - R


def fdp_hat_bh(pvals, s: float) -> float:
    """``n s / max(R(s, n), 1)``."""
    p = _as_array(pvals)
    _check_unit("s", s)
    R, _ = count_stats(p, s, p.size)
    return p.size * s / max(R, 1)


def storey_pi0(pvals, lam: float, k: Optional[int] = None) -> float:
    """Storey's null-fraction estimate on the first ``k`` p-values.

    ``(1 + A(lam, k)) / (k (1 - lam))``; not truncated at 1.
    """
    p = _as_array(pvals)
    _check_unit("lam", lam, open_lo=True, open_hi=True)
    k = p.size if k is None else k
    if int(k) != k or not 1 <= k <= p.size:
        raise ValueError(f"k must be an integer in [1, {p.size}], got {k!r}")
    _, A = count_stats(p, lam, k)
    return (1.0 + A) / (k * (1.0 - lam))


def fdp_hat_as(pvals, k: int, s: float, lam: float) -> float:
    """Adaptive SeqStep FDP estimate after scanning ``k`` hypotheses."""
    p = _as_array(pvals)
    _check_unit("s", s, open_lo=True, open_hi=True)
    _check_unit("lam", lam, open_lo=True, open_hi=True)
    if s > lam:
        raise ValueError(f"need s <= lam, got s={s}, lam={lam}")
    if int(k) != k or not 1 <= k <= p.size:
        raise ValueError(f"k must be an integer in [1, {p.size}], got {k!r}")
    R, _ = count_stats(p, s, k)
    _, A = count_stats(p, lam, k)
    return s / (1.0 - lam) * (1.0 + A) / max(R, 1)


def fdp_hat_ss(pvals, k: int, s: float) -> float:
    return fdp_hat_as(pvals, k, s, s)


# ---------------------------------------------------------------------------
# procedures
# ---------------------------------------------------------------------------

def _threshold_outcome(p, path, cand_ok, q, spec) -> RejectionOutcome:
    # path[j] is the FDP estimate at threshold p_(j+1); cand_ok masks allowed thresholds
    n = p.size
    order = np.sort(p)
    feasible = np.flatnonzero(cand_ok & (path <= _q_eff(q)))
    s_hat = order[feasible[-1]] if feasible.size else 0.0
    rejected = tuple(int(i) + 1 for i in np.flatnonzero(p <= s_hat))
    return RejectionOutcome(k_hat=n, rejected=rejected,
                            fdp_path=tuple(path.tolist()), spec_used=spec)


def _sorted_counts(p):
    order = np.sort(p)
    # R(p_(j), n) counts ties as well
    R = np.searchsorted(order, order, side="right")
    return order, R


def bh_procedure(pvals, q: float) -> RejectionOutcome:
    """Benjamini-Hochberg step-up at level ``q``."""
    spec = ProcedureSpec(ProcedureKind.BH, q=q)
    p = _as_array(pvals)
    order, R = _sorted_counts(p)
    path = p.size * order / np.maximum(R, 1)
    return _threshold_outcome(p, path, np.ones(p.size, dtype=bool), q, spec)


def storey_bh(pvals, q: float, lam: float = 0.5) -> RejectionOutcome:
    """Storey-BH: BH with the FDP estimate scaled by ``storey_pi0(lam)``.

    Only thresholds ``s <= lam`` are eligible.
    """
    spec = ProcedureSpec(ProcedureKind.STOREY_BH, q=q, lam=lam)
    p = _as_array(pvals)
    if p.size == 0:
        return RejectionOutcome(0, (), (), spec)
    order, R = _sorted_counts(p)
    A = int(np.count_nonzero(p > lam))
    path = order / (1.0 - lam) * (1.0 + A) / np.maximum(R, 1)
    return _threshold_outcome(p, path, order <= lam, q, spec)


def _stopping_outcome(path, q, spec, keep) -> RejectionOutcome:
    k_hat = kernels.stop_index(path, _q_eff(q))
    rejected = tuple(int(i) + 1 for i in np.flatnonzero(keep[:k_hat]))
    return RejectionOutcome(k_hat=k_hat, rejected=rejected,
                            fdp_path=tuple(path.tolist()), spec_used=spec)


def adaptive_seqstep(pvals, q: float, s: float, lam: float) -> RejectionOutcome:
    """Adaptive SeqStep.

    Scans for the largest ``k`` whose FDP estimate is at most ``q`` and
    rejects every ``p_i <= s`` with ``i <= k``.

    Parameters
    ----------
    pvals : PValueSequence or array-like
        P-values in prior order.
    q : float
        Target FDR level in (0, 1).
    s : float
        Rejection threshold, ``0 < s <= lam``.
    lam : float
        Threshold above which p-values are counted as evidence of nulls.

    Returns
    -------
    RejectionOutcome
    """
    spec = ProcedureSpec(ProcedureKind.ADAPTIVE_SEQSTEP, q=q, s=s, lam=lam)
    p = _as_array(pvals)
    path = kernels.as_path(p, s, lam)
    return _stopping_outcome(path, q, spec, p <= s)


def selective_seqstep(pvals, q: float, s: float) -> RejectionOutcome:
    """Selective SeqStep, i.e. Adaptive SeqStep with ``lam = s``.

    The returned ``spec_used`` is the Adaptive SeqStep spec it ran, so the
    outcome is field-identical to ``adaptive_seqstep(pvals, q, s, s)``.
    """
    ProcedureSpec(ProcedureKind.SELECTIVE_SEQSTEP, q=q, s=s)
    return adaptive_seqstep(pvals, q, s, s)


def accumulation_test(pvals, q: float, h: AccumulationFn) -> RejectionOutcome:
    """Accumulation test: reject the first ``k_hat`` hypotheses, where
    ``k_hat`` is the last ``k`` with ``mean(h(p_1..p_k)) <= q``."""
    spec = ProcedureSpec(ProcedureKind.ACCUMULATION_TEST, q=q, accumulation=h)
    p = _as_array(pvals)
    path = kernels.at_path(h(p))
    return _stopping_outcome(path, q, spec, np.ones(p.size, dtype=bool))


def apply_procedure(pvals, spec: ProcedureSpec) -> RejectionOutcome:
    """Dispatch on ``spec.kind``."""
    k = spec.kind
    if k is ProcedureKind.BH:
        return bh_procedure(pvals, spec.q)
    if k is ProcedureKind.STOREY_BH:
        return storey_bh(pvals, spec.q, spec.lam)
    if k is ProcedureKind.SELECTIVE_SEQSTEP:
        return selective_seqstep(pvals, spec.q, spec.s)
    if k is ProcedureKind.ADAPTIVE_SEQSTEP:
        return adaptive_seqstep(pvals, spec.q, spec.s, spec.lam)
    return accumulation_test(pvals, spec.q, spec.accumulation)
