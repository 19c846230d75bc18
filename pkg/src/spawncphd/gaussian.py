"""Gaussian component and mixture algebra for intensity functions.

A mixture is stored as stacked arrays (weights, means, covariances) so the
filter recursion can stay vectorized; `GaussianComponent` is the per-component
view used at API boundaries and in tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InvalidModelError, NumericalError

log = logging.getLogger(__name__)

# Relative tolerances for structural checks on covariance matrices.
_SYM_RTOL = 1e-9
_EIG_RTOL = 1e-9


def _check_cov(P: np.ndarray, what: str) -> None:
    scale = max(float(np.abs(P).max()), 1.0)
    if float(np.abs(P - P.T).max()) > _SYM_RTOL * scale:
        raise InvalidModelError(f"{what} is not symmetric within {_SYM_RTOL} relative")
    eig = np.linalg.eigvalsh(0.5 * (P + P.T))
    floor = -_EIG_RTOL * max(float(np.trace(P)), 0.0)
    if eig.min() < floor:
        raise InvalidModelError(
            f"{what} has negative eigenvalue {eig.min():.3e} below tolerance"
        )


def _require_psd(Q: np.ndarray, what: str) -> np.ndarray:
    """Symmetrize and verify PSD via a jittered Cholesky attempt."""
    Q = np.asarray(Q, dtype=float)
    Qs = 0.5 * (Q + Q.T)
    jitter = 1e-12 * max(float(np.trace(Qs)), 1.0)
    try:
        np.linalg.cholesky(Qs + jitter * np.eye(Qs.shape[0]))
    except np.linalg.LinAlgError:
        raise InvalidModelError(f"{what} is not positive semidefinite") from None
    return Qs


@dataclass
class GaussianComponent:
    """One weighted Gaussian term of an intensity function."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        self.weight = float(self.weight)
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.weight < 0.0:
            raise InvalidModelError(f"component weight {self.weight} is negative")
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise InvalidModelError(
                f"covariance shape {self.cov.shape} does not match state dim {d}"
            )
        _check_cov(self.cov, "component covariance")


class GaussianMixture:
    """Weighted Gaussian mixture stored as stacked arrays.

    w: (J,) nonnegative weights, m: (J, d) means, P: (J, d, d) covariances.
    Total weight is defined as the left-to-right accumulation of w.
    """

    __slots__ = ("w", "m", "P")

    def __init__(self, w: np.ndarray, m: np.ndarray, P: np.ndarray) -> None:
        self.w = np.asarray(w, dtype=float).reshape(-1)
        self.m = np.asarray(m, dtype=float)
        self.P = np.asarray(P, dtype=float)
        J = self.w.shape[0]
        if self.m.ndim != 2 or self.m.shape[0] != J:
            raise InvalidModelError(f"means shape {self.m.shape} does not match {J} weights")
        d = self.m.shape[1]
        if self.P.shape != (J, d, d):
            raise InvalidModelError(f"covariances shape {self.P.shape} invalid for (J={J}, d={d})")
        if J and not np.all(np.isfinite(self.w)):
            raise InvalidModelError("non-finite weight in mixture")
        if J and self.w.min() < 0.0:
            raise InvalidModelError(f"negative weight {self.w.min()} in mixture")

    @classmethod
    def empty(cls, dim: int) -> "GaussianMixture":
        return cls(np.empty(0), np.empty((0, dim)), np.empty((0, dim, dim)))

    @classmethod
    def from_components(cls, comps) -> "GaussianMixture":
        comps = list(comps)
        if not comps:
            raise InvalidModelError("from_components needs at least one component; use empty()")
        return cls(
            np.array([c.weight for c in comps]),
            np.stack([c.mean for c in comps]),
            np.stack([c.cov for c in comps]),
        )

    @classmethod
    def concat(cls, mixtures) -> "GaussianMixture":
        """Stack mixtures of a common state dimension, preserving order."""
        mixtures = list(mixtures)
        if not mixtures:
            raise InvalidModelError("concat needs at least one mixture")
        d = mixtures[0].dim
        if any(mx.dim != d for mx in mixtures):
            raise InvalidModelError("cannot concatenate mixtures of different dimensions")
        return cls(
            np.concatenate([mx.w for mx in mixtures]),
            np.concatenate([mx.m for mx in mixtures]),
            np.concatenate([mx.P for mx in mixtures]),
        )

    def components(self) -> list[GaussianComponent]:
        return [GaussianComponent(self.w[j], self.m[j], self.P[j]) for j in range(len(self))]

    def __len__(self) -> int:
        return self.w.shape[0]

    @property
    def dim(self) -> int:
        return self.m.shape[1]

    @property
    def total_weight(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.cumsum(self.w)[-1])

    def validate(self) -> None:
        """Full structural check including eigenvalue floors (not hot-path)."""
        for j in range(len(self)):
            _check_cov(self.P[j], f"covariance of component {j}")


@dataclass(frozen=True)
class ReductionConfig:
    """Mixture reduction thresholds: truncate below trunc_threshold, merge
    within Mahalanobis merge_threshold, keep at most max_components."""

    trunc_threshold: float
    merge_threshold: float
    max_components: int
    # Open choice on ordering; default truncates before merging.
    merge_before_truncate: bool = False


def affine_transform(
    c: GaussianComponent,
    F: np.ndarray,
    d: np.ndarray,
    Q: np.ndarray,
    scale: float,
) -> GaussianComponent:
    """Push a component through x -> F x + d with additive PSD noise Q,
    scaling its weight."""
    F = np.asarray(F, dtype=float)
    d = np.asarray(d, dtype=float).reshape(-1)
    Qs = _require_psd(Q, "process noise covariance")
    mean = F @ c.mean + d
    cov = F @ c.cov @ F.T + Qs
    cov = 0.5 * (cov + cov.T)
    return GaussianComponent(scale * c.weight, mean, cov)


def transform_mixture(
    mix: GaussianMixture,
    F: np.ndarray,
    d: np.ndarray,
    Q: np.ndarray,
    scale: float,
) -> GaussianMixture:
    """Vectorized affine_transform over every component of a mixture."""
    F = np.asarray(F, dtype=float)
    d = np.asarray(d, dtype=float).reshape(-1)
    Qs = _require_psd(Q, "process noise covariance")
    if len(mix) == 0:
        return GaussianMixture.empty(F.shape[0])
    m = mix.m @ F.T + d
    P = np.matmul(np.matmul(F, mix.P), F.T) + Qs
    P = 0.5 * (P + np.transpose(P, (0, 2, 1)))
    return GaussianMixture(scale * mix.w, m, P)


def eval_density(
    c: GaussianComponent, z: np.ndarray, H: np.ndarray, R: np.ndarray
) -> float:
    """Predicted-measurement density N(z; H m, H P H^T + R) of one component."""
    H = np.asarray(H, dtype=float)
    R = np.asarray(R, dtype=float)
    z = np.asarray(z, dtype=float).reshape(-1)
    S = H @ c.cov @ H.T + R
    S = 0.5 * (S + S.T)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise NumericalError(
            f"singular innovation covariance for component at mean {c.mean.tolist()}"
        ) from None
    nu = z - H @ c.mean
    u = np.linalg.solve(L, nu)
    k = z.shape[0]
    log_det = 2.0 * float(np.log(np.diag(L)).sum())
    return float(np.exp(-0.5 * (u @ u + log_det + k * np.log(2.0 * np.pi))))


def _batched_inverses(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Invert a (J, d, d) stack; flags exactly-singular members instead of
    failing the whole batch. Returns (inverses, usable_mask)."""
    J = P.shape[0]
    ok = np.ones(J, dtype=bool)
    try:
        inv = np.linalg.inv(P)
        finite = np.isfinite(inv).all(axis=(1, 2))
        if finite.all():
            return inv, ok
        ok = finite
    except np.linalg.LinAlgError:
        pass
    inv = np.zeros_like(P)
    for j in range(J):
        try:
            inv[j] = np.linalg.inv(P[j])
            ok[j] = bool(np.isfinite(inv[j]).all())
        except np.linalg.LinAlgError:
            ok[j] = False
    if not ok.all():
        log.warning(
            "%d mixture component(s) have singular covariance; treated as non-mergeable",
            int((~ok).sum()),
        )
    return inv, ok


def _merge_pass(
    w: np.ndarray, m: np.ndarray, P: np.ndarray, U: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """One greedy merge sweep. Pivots are taken in descending-weight order
    (ties by index); every unused component within the gate of the pivot,
    measured in the candidate's own covariance metric, is absorbed."""
    J = w.shape[0]
    inv, mergeable = _batched_inverses(P)
    used = np.zeros(J, dtype=bool)

    if J <= 768:
        # pairwise gate precomputed in one shot; rows are candidates
        diff = m[:, None, :] - m[None, :, :]
        d2 = (np.matmul(diff, inv) * diff).sum(axis=2)
        gate = (d2 <= U) & mergeable[:, None]
        # components that neither absorb nor get absorbed pass through as-is
        off_diag = gate & ~np.eye(J, dtype=bool)
        interacting = off_diag.any(axis=0) | off_diag.any(axis=1)
        used[:] = ~interacting

        def candidates(pivot: int) -> np.ndarray:
            return np.nonzero(gate[:, pivot] & ~used)[0]

    else:
        # memory fallback: gate one pivot at a time
        interacting = np.ones(J, dtype=bool)

        def candidates(pivot: int) -> np.ndarray:
            free = np.nonzero(~used)[0]
            df = m[free] - m[pivot]
            dd = (np.matmul(inv[free], df[:, :, None])[:, :, 0] * df).sum(axis=1)
            return free[(dd <= U) & mergeable[free]]

    order = np.lexsort((np.arange(J), -w))
    out_w, out_m, out_P = [], [], []
    merged_any = False
    for pivot in order[interacting[order]]:
        if used[pivot]:
            continue
        take = candidates(pivot)
        if not mergeable[pivot]:  # own distance is 0 but covariance is singular
            take = np.sort(np.concatenate(([pivot], take)))
        used[take] = True
        if take.shape[0] == 1:
            j = take[0]
            out_w.append(w[j])
            out_m.append(m[j])
            out_P.append(P[j])
            continue
        merged_any = True
        ws = w[take]
        tot = float(np.cumsum(ws)[-1])
        mbar = ws @ m[take] / tot
        dev = mbar - m[take]
        Pbar = (
            ws[:, None, None] * (P[take] + dev[:, :, None] * dev[:, None, :])
        ).sum(axis=0) / tot
        Pbar = 0.5 * (Pbar + Pbar.T)
        out_w.append(tot)
        out_m.append(mbar)
        out_P.append(Pbar)
    passthrough = ~interacting
    return (
        np.concatenate([w[passthrough], np.asarray(out_w, dtype=float)]),
        np.concatenate([m[passthrough], np.stack(out_m) if out_m else m[:0]]),
        np.concatenate([P[passthrough], np.stack(out_P) if out_P else P[:0]]),
        merged_any,
    )


def reduce_mixture(mix: GaussianMixture, cfg: ReductionConfig) -> GaussianMixture:
    """Truncate, merge, and prune a mixture.

    Components with weight < trunc_threshold are removed; survivors are merged
    greedily by descending weight using moment matching (weight conserved
    exactly); the max_components heaviest results are kept. Merge sweeps repeat
    until none fires, which makes the operation idempotent even when
    moment-matched covariances widen enough to gate further pairs. With
    merge_before_truncate the first two stages swap.
    """
    w, m, P = mix.w, mix.m, mix.P

    def truncate(w, m, P):
        keep = w >= cfg.trunc_threshold
        return w[keep], m[keep], P[keep]

    def merge(w, m, P):
        while w.shape[0] > 1:
            w, m, P, merged_any = _merge_pass(w, m, P, cfg.merge_threshold)
            if not merged_any:
                break
        return w, m, P

    if cfg.merge_before_truncate:
        w, m, P = merge(w, m, P)
        w, m, P = truncate(w, m, P)
        # already sorted by merge emission; enforce weight order for pruning
    else:
        w, m, P = truncate(w, m, P)
        w, m, P = merge(w, m, P)

    order = np.lexsort((np.arange(w.shape[0]), -w))
    w, m, P = w[order], m[order], P[order]
    if w.shape[0] > cfg.max_components:
        w, m, P = w[: cfg.max_components], m[: cfg.max_components], P[: cfg.max_components]
    return GaussianMixture(w, m, P)
