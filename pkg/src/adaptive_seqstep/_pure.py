"""Numpy implementations of the scan kernels (fallback for ``_kernels``)."""

import numpy as np


def as_path(p, s, lam):
    """FDP-hat path of Adaptive SeqStep for k = 1..n."""
    p = np.ascontiguousarray(p, dtype=np.float64)
    c = s / (1.0 - lam)
    R = np.cumsum(p <= s)
    A = np.cumsum(p > lam)
    return c * (1.0 + A) / np.maximum(R, 1)


def at_path(h):
    """Running mean of accumulation-function values."""
    h = np.ascontiguousarray(h, dtype=np.float64)
    k = np.arange(1, h.shape[0] + 1, dtype=np.float64)
    return np.cumsum(h) / k


def stop_index(path, q_eff):
    """Largest 1-based k with ``path[k-1] <= q_eff``; 0 if none."""
    ok = np.flatnonzero(np.asarray(path) <= q_eff)
    return int(ok[-1]) + 1 if ok.size else 0


def _last_true(mask):
    # 1-based index of the last True per row, 0 if the row has none
    n = mask.shape[1]
    rev = mask[:, ::-1]
    any_ = rev.any(axis=1)
    return np.where(any_, n - rev.argmax(axis=1), 0)


def as_batch(P, null, s, lam, q_eff):
    """Per-row (k_hat, rejections, false rejections) for Adaptive SeqStep."""
    P = np.ascontiguousarray(P, dtype=np.float64)
    null = np.asarray(null, dtype=bool)
    reps = P.shape[0]
    if P.shape[1] == 0:
        z = np.zeros(reps, dtype=np.int64)
        return z, z.copy(), z.copy()
    c = s / (1.0 - lam)
    below = P <= s
    R = np.cumsum(below, axis=1)
    A = np.cumsum(P > lam, axis=1)
    fdp = c * (1.0 + A) / np.maximum(R, 1)
    k_hat = _last_true(fdp <= q_eff).astype(np.int64)
    V = np.cumsum(below & null, axis=1)
    rows = np.arange(reps)
    idx = np.maximum(k_hat - 1, 0)
    n_rej = np.where(k_hat > 0, R[rows, idx], 0).astype(np.int64)
    n_false = np.where(k_hat > 0, V[rows, idx], 0).astype(np.int64)
    return k_hat, n_rej, n_false


def at_batch(H, null, q_eff):
    """Per-row (k_hat, rejections, false rejections) for an accumulation test."""
    H = np.ascontiguousarray(H, dtype=np.float64)
    null = np.asarray(null, dtype=bool)
    reps, n = H.shape
    if n == 0:
        z = np.zeros(reps, dtype=np.int64)
        return z, z.copy(), z.copy()
    k = np.arange(1, n + 1, dtype=np.float64)
    fdp = np.cumsum(H, axis=1) / k
    k_hat = _last_true(fdp <= q_eff).astype(np.int64)
    V = np.cumsum(null, axis=1)
    rows = np.arange(reps)
    n_false = np.where(k_hat > 0, V[rows, np.maximum(k_hat - 1, 0)], 0).astype(np.int64)
    return k_hat, k_hat.copy(), n_false
