"""Evaluation metrics: order-2 OSPA between point sets and the Hellinger
distance between count distributions."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from .cardinality import CardinalityDistribution
from .errors import DomainError


def ospa(X, Y, c: float) -> float:
    """Order-2 OSPA distance with cutoff c between two finite point sets.

    Rows are points. The optimal sub-assignment is solved exactly with the
    rectangular Hungarian solver, never by enumerating permutations. Both sets
    empty gives 0; one empty gives c.
    """
    if not (math.isfinite(c) and c > 0.0):
        raise DomainError(f"OSPA cutoff must be positive, got {c}")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    X = X.reshape(len(X), -1) if X.size else X.reshape(0, max(X.shape[-1] if X.ndim else 0, 1))
    Y = Y.reshape(len(Y), -1) if Y.size else Y.reshape(0, max(Y.shape[-1] if Y.ndim else 0, 1))
    m, n = X.shape[0], Y.shape[0]
    if m == 0 and n == 0:
        return 0.0
    if m > n:
        X, Y, m, n = Y, X, n, m
    if m == 0:
        return float(c)
    diff = X[:, None, :] - Y[None, :, :]
    D = np.minimum(np.sqrt(np.einsum("mnd,mnd->mn", diff, diff)), c)
    rows, cols = linear_sum_assignment(D**2)
    cost = float((D[rows, cols] ** 2).sum())
    return math.sqrt((cost + c * c * (n - m)) / n)


def _probs(p) -> np.ndarray:
    if isinstance(p, CardinalityDistribution):
        return p.probs
    return np.asarray(p, dtype=float).reshape(-1)


def hellinger(p, q) -> float:
    """Hellinger distance (in [0, 1]) between two pmfs on the same support."""
    pv, qv = _probs(p), _probs(q)
    if pv.shape != qv.shape:
        raise DomainError(f"support lengths differ: {pv.shape[0]} vs {qv.shape[0]}")
    d2 = 0.5 * float(((np.sqrt(pv) - np.sqrt(qv)) ** 2).sum())
    return math.sqrt(min(max(d2, 0.0), 1.0))


def ideal_cardinality(n_true: int, n_max: int) -> CardinalityDistribution:
    """Point mass at the true count; reference for Hellinger evaluation."""
    if not 0 <= n_true <= n_max:
        raise DomainError(f"true count {n_true} outside 0..{n_max}")
    return CardinalityDistribution.delta(n_true, n_max)
