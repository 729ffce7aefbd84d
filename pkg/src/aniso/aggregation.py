"""Aggregation of per-estimator scores: power means and Renyi divergences.

``f_alpha`` is the power mean of order ``1 - alpha`` and the aggregate
anomaly score is ``h_alpha = 2 ** -f_alpha``. Because smaller per-estimator
scores mean "more anomalous", raising ``alpha`` shifts weight towards the
estimators that isolate a point early, and ``h_alpha`` never decreases.

All functions reduce over the last axis, so a ``(N, n_estimators)`` score
matrix is aggregated row by row in one call.
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np

from aniso.errors import DomainError, EmptyVector, LengthMismatch, NegativeEntry, NotAProbability

INF = math.inf
LOG_FLOOR = 1e-300
# above this |(1 - alpha) * centered log| the expm1 path could overflow
_EXPM1_LIMIT = 600.0

AlphaLike = Union[float, int, str]


def parse_alpha(alpha: AlphaLike) -> float:
    """Validate an alpha value; accepts ``"inf"``/``"∞"`` for the min-limit."""
    if isinstance(alpha, str):
        text = alpha.strip().lower()
        if text in {"inf", "infinity", "∞", "+inf"}:
            return INF
        try:
            alpha = float(text)
        except ValueError:
            raise DomainError(f"alpha must be a number or 'inf', got {alpha!r}") from None
    alpha = float(alpha)
    if math.isnan(alpha) or alpha < 0:
        raise DomainError(f"alpha must be >= 0, got {alpha}")
    return alpha


def format_alpha(alpha: float) -> str:
    return "inf" if math.isinf(alpha) else f"{alpha:g}"


def _check_scores(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise EmptyVector("cannot aggregate an empty score vector")
    if np.isnan(x).any():
        raise DomainError("score vector contains NaN")
    if (x < 0).any():
        raise NegativeEntry("scores must be non-negative")
    return x


def _power_mean(x: np.ndarray, alpha: float) -> np.ndarray:
    n = x.shape[-1]
    if alpha == 0:
        return np.add.reduce(x, axis=-1) / n
    if math.isinf(alpha):
        return x.min(axis=-1)

    logs = np.log(np.maximum(x, LOG_FLOOR))
    center = logs.mean(axis=-1, keepdims=True)
    if alpha == 1:
        out = np.exp(center[..., 0])
    else:
        p = 1.0 - alpha
        z = p * (logs - center)
        with np.errstate(over="ignore"):
            near = np.abs(z).max(axis=-1) <= _EXPM1_LIMIT
            # centered expm1 form keeps precision as alpha -> 1
            log_mean_near = np.log1p(np.expm1(np.where(near[..., None], z, 0.0)).mean(axis=-1))
        zmax = z.max(axis=-1, keepdims=True)
        log_mean_far = (np.log(np.exp(z - zmax).sum(axis=-1)) + zmax[..., 0] - math.log(n))
        log_mean = np.where(near, log_mean_near, log_mean_far)
        out = np.exp(center[..., 0] + log_mean / p)
    if alpha >= 1:
        out = np.where((x == 0).any(axis=-1), 0.0, out)
    return out


def power_mean_f(x, alpha: AlphaLike):
    """Power mean of order ``1 - alpha`` over the last axis.

    ``alpha`` 0, 1, 2 and ``inf`` give the arithmetic, geometric and
    harmonic means and the minimum. For ``alpha >= 1`` a zero entry forces
    the result to 0, its continuous limit.

    Returns a float for 1-D input, an array otherwise.
    """
    alpha = parse_alpha(alpha)
    x = _check_scores(x)
    out = _power_mean(x, alpha)
    return float(out) if x.ndim == 1 else out


def exp2_neg(f):
    """``2 ** -f`` elementwise through the C library ``pow``.

    numpy's SIMD ``power`` is not correctly rounded and its last bit
    depends on the CPU, so it would break bitwise reproducibility.
    """
    if np.ndim(f) == 0:
        return 2.0 ** -float(f)
    f = np.asarray(f, dtype=np.float64)
    out = np.fromiter((2.0 ** -v for v in f.ravel().tolist()), dtype=np.float64, count=f.size)
    return out.reshape(f.shape)


def aggregate_h(x, alpha: AlphaLike):
    """Aggregate anomaly score ``2 ** -f_alpha(x)`` in ``(0, 1]``; higher is more anomalous."""
    return exp2_neg(power_mean_f(x, alpha))


def classify(score, tau: float):
    """True where the aggregate score reaches the threshold (inclusive)."""
    out = np.asarray(score) >= tau
    return bool(out) if out.ndim == 0 else out


def renyi_divergence(p, q, alpha: AlphaLike) -> float:
    """Renyi divergence ``R_alpha(p || q)`` for a probability vector ``p``.

    ``q`` only needs to be non-negative. Orders 0, 1 and ``inf`` are the
    limits: ``-ln sum_{p>0} q``, the KL divergence and ``ln max p/q``.
    Uses ``0 ln(0/0) = 0``; mass of ``p`` where ``q`` is 0 gives ``+inf``
    for ``alpha >= 1``.
    """
    alpha = parse_alpha(alpha)
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if p.size != q.size:
        raise LengthMismatch(f"p has {p.size} entries, q has {q.size}")
    if p.size == 0:
        raise EmptyVector("empty distributions")
    if (p < 0).any() or (q < 0).any():
        raise NegativeEntry("p and q must be non-negative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise NotAProbability(f"p sums to {p.sum()!r}, not 1")

    support = p > 0
    ps, qs = p[support], q[support]
    if alpha == 0:
        mass = qs.sum()
        return INF if mass == 0 else -math.log(mass)
    if alpha >= 1 and (qs == 0).any():
        return INF
    if alpha == 1:
        return float(np.sum(ps * (np.log(ps) - np.log(qs))))
    if math.isinf(alpha):
        return float(np.max(np.log(ps) - np.log(qs)))

    keep = qs > 0  # for alpha < 1 terms with q = 0 vanish
    if not keep.any():
        return INF
    logs = alpha * np.log(ps[keep]) + (1.0 - alpha) * np.log(qs[keep])
    m = logs.max()
    lse = m + math.log(np.exp(logs - m).sum())
    return lse / (alpha - 1.0)
