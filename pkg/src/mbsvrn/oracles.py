"""Mini-batch gradient oracle, subsampled Hessian oracle and alpha measurement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from mbsvrn.linalg import SpdFactorization, factorize
from mbsvrn.objective import Objective

__all__ = [
    "EvalCounter",
    "GradientBatch",
    "HessianEstimate",
    "AlphaReport",
    "sample_gradient_batch",
    "full_batch",
    "minibatch_gradient",
    "variance_reduced_gradient",
    "subsampled_hessian_oracle",
    "identity_estimate",
    "measure_alpha",
]


class EvalCounter:
    """Running count of component-gradient evaluations."""

    __slots__ = ("count",)

    def __init__(self, count: int = 0):
        self.count = int(count)

    def add(self, k: int) -> None:
        self.count += int(k)

    def __repr__(self) -> str:
        return f"EvalCounter({self.count})"


@dataclass(frozen=True, eq=False)
class GradientBatch:
    """Indices into ``[0, n)``; ``indices is None`` is the full set, each index once."""

    indices: Optional[np.ndarray]
    n: int

    @property
    def b(self) -> int:
        return self.n if self.indices is None else int(self.indices.size)

    @property
    def is_full(self) -> bool:
        return self.indices is None


def sample_gradient_batch(rng: np.random.Generator, n: int, b: int) -> GradientBatch:
    """Draw ``b`` indices uniformly with replacement."""
    if not 1 <= b <= n:
        raise ValueError(f"batch size b={b} outside [1, {n}]")
    return GradientBatch(rng.integers(0, n, size=b), n)


def full_batch(n: int) -> GradientBatch:
    return GradientBatch(None, n)


def minibatch_gradient(
    obj: Objective, batch: GradientBatch, x: np.ndarray, counter: Optional[EvalCounter] = None
) -> np.ndarray:
    g = obj.batch_gradient(batch.indices, x)
    if counter is not None:
        counter.add(batch.b)
    return g


def variance_reduced_gradient(
    obj: Objective,
    batch: GradientBatch,
    x_t: np.ndarray,
    snapshot: np.ndarray,
    snapshot_full_grad: np.ndarray,
    counter: Optional[EvalCounter] = None,
) -> np.ndarray:
    """``g_hat(x_t) - g_hat(snapshot) + g(snapshot)`` with one shared batch.

    Costs ``2b`` component gradients.
    """
    snapshot_full_grad = np.asarray(snapshot_full_grad, dtype=np.float64)
    if snapshot_full_grad.shape != (obj.d,):
        raise ValueError("snapshot gradient has the wrong dimension")
    g_t = minibatch_gradient(obj, batch, x_t, counter)
    g_0 = minibatch_gradient(obj, batch, snapshot, counter)
    # grouping keeps the cancelling pair exact: for a full batch
    # g_0 == snapshot_full_grad bitwise, for x_t == snapshot g_t == g_0
    if batch.is_full:
        return g_t + (snapshot_full_grad - g_0)
    return (g_t - g_0) + snapshot_full_grad


@dataclass(frozen=True, eq=False)
class HessianEstimate:
    matrix: np.ndarray
    factorization: SpdFactorization
    h: int
    anchor: Optional[np.ndarray]
    indices: Optional[np.ndarray] = None

    @property
    def is_identity(self) -> bool:
        return self.h == 0


def identity_estimate(d: int, anchor: Optional[np.ndarray] = None) -> HessianEstimate:
    eye = np.eye(d)
    return HessianEstimate(eye, factorize(eye), 0, anchor)


def subsampled_hessian_oracle(
    obj: Objective, rng: np.random.Generator, h: int, x: np.ndarray
) -> HessianEstimate:
    """Average ``h`` component Hessians at ``x``, sampled without replacement.

    ``h == n`` uses every component once and consumes no randomness.
    """
    n = obj.n
    if not 1 <= h <= n:
        raise ValueError(f"Hessian sample size h={h} outside [1, {n}]")
    idx = None if h == n else np.sort(rng.choice(n, size=h, replace=False))
    H = obj.subsampled_hessian(idx, x)
    return HessianEstimate(H, factorize(H), h, np.array(x, dtype=np.float64), idx)


@dataclass(frozen=True)
class AlphaReport:
    alpha: float
    max_ratio: float
    min_ratio: float

    @property
    def extremal_ratios(self) -> tuple[float, float]:
        return (self.max_ratio, self.min_ratio)


def alpha_from_matrices(H_hat: np.ndarray, H_ref: np.ndarray) -> AlphaReport:
    """Smallest alpha with ``H_ref / sqrt(alpha) <= H_hat <= sqrt(alpha) H_ref``."""
    evals, evecs = np.linalg.eigh(H_ref)
    if evals[0] <= 0:
        raise np.linalg.LinAlgError("reference Hessian is not positive definite")
    inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    C = inv_sqrt @ H_hat @ inv_sqrt
    ratios = np.linalg.eigvalsh(0.5 * (C + C.T))
    lo, hi = float(ratios[0]), float(ratios[-1])
    if lo <= 0:
        raise np.linalg.LinAlgError("estimate is not positive definite")
    alpha = max(hi, 1.0 / lo) ** 2
    return AlphaReport(alpha=max(alpha, 1.0), max_ratio=hi, min_ratio=lo)


def measure_alpha(obj: Objective, est: HessianEstimate) -> AlphaReport:
    """Measured approximation factor of ``est`` against the exact Hessian at its anchor."""
    if est.anchor is None:
        raise ValueError("estimate has no anchor point")
    return alpha_from_matrices(est.matrix, obj.full_hessian(est.anchor))
