"""Per-parent spawning models and their intensity / cardinality ingredients.

Three offspring laws are supported, each paired with a shared Gaussian spatial
kernel describing where a daughter appears relative to its parent:

* Bernoulli: at most one daughter, probability `prob`;
* Poisson: daughter count ~ Poisson(`rate`);
* zero-inflated Poisson: with probability `prob` the parent spawns a
  Poisson(`rate`) brood, otherwise nothing.

`bell_coefficients` folds survival (probability p_s) and spawning into the
factorial-scaled coefficients consumed by cardinality prediction;
`spawn_intensity` produces the spawned part of the predicted intensity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .cardinality import BellCoefficients, _factorials
from .errors import InvalidModelError
from .gaussian import GaussianMixture, _require_psd

log = logging.getLogger(__name__)


@dataclass(eq=False)
class SpawnSpatialModel:
    """Gaussian mixture kernel for a daughter state given its parent state.

    Term i maps a parent at x to N(F_i x + d_i, Q_i) with weight w_i; the
    weights must sum to one (they split a single expected daughter).
    """

    weights: np.ndarray      # (Jb,)
    transitions: np.ndarray  # (Jb, d, d)
    offsets: np.ndarray      # (Jb, d)
    covariances: np.ndarray  # (Jb, d, d)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        self.transitions = np.asarray(self.transitions, dtype=float)
        self.offsets = np.asarray(self.offsets, dtype=float)
        self.covariances = np.asarray(self.covariances, dtype=float)
        Jb = self.weights.shape[0]
        if Jb == 0:
            raise InvalidModelError("spawn kernel needs at least one term")
        d = self.transitions.shape[-1]
        if self.transitions.shape != (Jb, d, d):
            raise InvalidModelError(f"kernel transitions shape {self.transitions.shape} invalid")
        if self.offsets.shape != (Jb, d):
            raise InvalidModelError(f"kernel offsets shape {self.offsets.shape} invalid")
        if self.covariances.shape != (Jb, d, d):
            raise InvalidModelError(f"kernel covariances shape {self.covariances.shape} invalid")
        if self.weights.min() < 0.0:
            raise InvalidModelError("kernel term weights must be nonnegative")
        total = float(np.cumsum(self.weights)[-1])
        if abs(total - 1.0) > 1e-12:
            raise InvalidModelError(f"kernel term weights sum to {total!r}, not 1")
        self.covariances = np.stack(
            [_require_psd(Q, f"spawn kernel covariance term {i}")
             for i, Q in enumerate(self.covariances)]
        )

    @classmethod
    def single(cls, F: np.ndarray, d: np.ndarray, Q: np.ndarray) -> "SpawnSpatialModel":
        return cls(np.array([1.0]), np.asarray(F, float)[None], np.asarray(d, float)[None],
                   np.asarray(Q, float)[None])

    @property
    def dim(self) -> int:
        return self.transitions.shape[-1]


def unit_spawn_kernel(dim: int) -> SpawnSpatialModel:
    """Identity kernel (daughter state = parent state), for count-only uses."""
    return SpawnSpatialModel.single(np.eye(dim), np.zeros(dim), np.zeros((dim, dim)))


def _check_prob(p: float, name: str) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise InvalidModelError(f"{name} = {p} outside [0, 1]")
    return p


def _check_rate(r: float, name: str) -> float:
    r = float(r)
    if not (math.isfinite(r) and r >= 0.0):
        raise InvalidModelError(f"{name} = {r} must be a finite nonnegative rate")
    return r


@dataclass(eq=False)
class BernoulliSpawn:
    """At most one daughter per parent per scan, probability `prob`."""

    prob: float
    spatial: SpawnSpatialModel

    def __post_init__(self) -> None:
        self.prob = _check_prob(self.prob, "spawn probability")


@dataclass(eq=False)
class PoissonSpawn:
    """Poisson(`rate`) daughters per parent per scan."""

    rate: float
    spatial: SpawnSpatialModel

    def __post_init__(self) -> None:
        self.rate = _check_rate(self.rate, "spawn rate")


@dataclass(eq=False)
class ZeroInflatedPoissonSpawn:
    """With probability `prob` a Poisson(`rate`) brood, otherwise nothing."""

    prob: float
    rate: float
    spatial: SpawnSpatialModel

    def __post_init__(self) -> None:
        self.prob = _check_prob(self.prob, "spawn activation probability")
        self.rate = _check_rate(self.rate, "spawn rate")


SpawnModel = Union[BernoulliSpawn, PoissonSpawn, ZeroInflatedPoissonSpawn]


def spawn_alpha(model: SpawnModel) -> float:
    """Expected number of daughters per parent per scan."""
    if isinstance(model, BernoulliSpawn):
        return model.prob
    if isinstance(model, PoissonSpawn):
        return model.rate
    if isinstance(model, ZeroInflatedPoissonSpawn):
        return model.prob * model.rate
    raise InvalidModelError(f"unknown spawn model {type(model).__name__}")


def bell_coefficients(model: SpawnModel, p_s: float, n_max: int) -> BellCoefficients:
    """Factorial-scaled coefficients b_i = i! * P(i successors per parent).

    A successor is the surviving parent (probability p_s) or a spawned
    daughter; survival and spawning are independent. Truncated at n_max with
    the lost offspring mass reported.
    """
    p_s = _check_prob(p_s, "survival probability")
    if n_max < 0:
        raise InvalidModelError(f"n_max = {n_max} must be nonnegative")
    b = np.zeros(n_max + 1)

    if isinstance(model, BernoulliSpawn):
        pb = model.prob
        b[0] = (1.0 - p_s) * (1.0 - pb)
        if n_max >= 1:
            b[1] = p_s * (1.0 - pb) + (1.0 - p_s) * pb
        if n_max >= 2:
            b[2] = 2.0 * p_s * pb
    elif isinstance(model, PoissonSpawn):
        lam = model.rate
        eml = math.exp(-lam)
        b[0] = (1.0 - p_s) * eml
        for i in range(1, n_max + 1):
            b[i] = eml * lam ** (i - 1) * ((1.0 - p_s) * lam + i * p_s)
    elif isinstance(model, ZeroInflatedPoissonSpawn):
        pb, lam = model.prob, model.rate
        eml = math.exp(-lam)
        quiet = 1.0 - pb + pb * eml  # P(no daughters at all)
        b[0] = (1.0 - p_s) * quiet
        if n_max >= 1:
            b[1] = (1.0 - p_s) * pb * eml * lam + p_s * quiet
        # i >= 2 terms are the Poisson terms scaled by the activation
        # probability, multiplied in front so prob=1 reproduces them exactly.
        for i in range(2, n_max + 1):
            b[i] = pb * (eml * lam ** (i - 1) * ((1.0 - p_s) * lam + i * p_s))
    else:
        raise InvalidModelError(f"unknown spawn model {type(model).__name__}")

    pmf_total = float(np.cumsum(b / _factorials(n_max))[-1])
    tail = max(0.0, 1.0 - pmf_total)
    if tail > 1e-12:
        log.debug("offspring coefficients truncated %.3e mass at n_max=%d", tail, n_max)
    return BellCoefficients(b, tail_mass=tail)


def spawn_intensity(posterior: GaussianMixture, model: SpawnModel) -> GaussianMixture:
    """Spawned part of the predicted intensity.

    For posterior component j and kernel term i the output component has
    weight alpha * w_j * w_i, mean F_i m_j + d_i, covariance
    Q_i + F_i P_j F_i^T; components are ordered j-major, term-minor.
    """
    sp = model.spatial
    alpha = spawn_alpha(model)
    if len(posterior) == 0:
        return GaussianMixture.empty(sp.dim)
    if posterior.dim != sp.dim:
        raise InvalidModelError(
            f"kernel dim {sp.dim} does not match posterior dim {posterior.dim}"
        )
    J, Jb, d = len(posterior), sp.weights.shape[0], sp.dim
    w = (alpha * posterior.w)[:, None] * sp.weights[None, :]
    m = np.empty((J, Jb, d))
    P = np.empty((J, Jb, d, d))
    for i in range(Jb):
        F_i = sp.transitions[i]
        m[:, i] = posterior.m @ F_i.T + sp.offsets[i]
        P[:, i] = np.matmul(np.matmul(F_i, posterior.P), F_i.T) + sp.covariances[i]
    P = 0.5 * (P + np.swapaxes(P, -1, -2))
    return GaussianMixture(
        w.reshape(J * Jb), m.reshape(J * Jb, d), P.reshape(J * Jb, d, d)
    )


def mean_total_offspring(model: SpawnModel, p_s: float) -> float:
    """Expected successors per parent: survival plus expected daughters."""
    return _check_prob(p_s, "survival probability") + spawn_alpha(model)
