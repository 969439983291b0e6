"""L2-regularized logistic regression as a finite sum.

Each component carries the full regularizer,

    psi_i(x) = log(1 + exp(-b_i a_i^T x)) + (mu/2) ||x||^2,

so that ``f = mean_i psi_i`` and a mini-batch average of component gradients
is an unbiased estimate of ``grad f``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from mbsvrn.dataset import Dataset

__all__ = ["Objective", "QuadraticModel", "ObjectiveConstants", "log1pexp"]


def log1pexp(z: np.ndarray) -> np.ndarray:
    """``log(1 + exp(z))`` without overflow."""
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


@dataclass(frozen=True)
class ObjectiveConstants:
    lam: float
    mu: float
    kappa: float
    hessian_lipschitz: Optional[float] = None


class Objective:
    """Regularized logistic loss over a :class:`Dataset`.

    All methods are pure; the same input always produces bitwise-identical
    output. Subclasses may swap the per-margin loss through ``_loss``,
    ``_dloss`` and ``_d2loss``.
    """

    @staticmethod
    def _loss(m: np.ndarray) -> np.ndarray:
        return log1pexp(-m)

    @staticmethod
    def _dloss(m: np.ndarray) -> np.ndarray:
        return -expit(-m)

    @staticmethod
    def _d2loss(m: np.ndarray) -> np.ndarray:
        return expit(m) * expit(-m)

    def __init__(self, data: Dataset, mu: float):
        mu = float(mu)
        if not np.isfinite(mu) or mu < 0:
            raise ValueError(f"mu must be finite and >= 0, got {mu}")
        self.data = data
        self.mu = mu
        self._A = data.features
        self._y = data.labels

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def d(self) -> int:
        return self.data.d

    def _check_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.d},)")
        return x

    def value(self, x: np.ndarray) -> float:
        x = self._check_point(x)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite point")
        margins = self._y * (self._A @ x)
        return float(np.mean(self._loss(margins)) + 0.5 * self.mu * (x @ x))

    def component_value(self, i: int, x: np.ndarray) -> float:
        i = self._check_index(i)
        x = self._check_point(x)
        margin = self._y[i] * (self._A[i] @ x)
        return float(self._loss(margin) + 0.5 * self.mu * (x @ x))

    def _check_index(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self.n:
            raise IndexError(f"component index {i} out of range [0, {self.n})")
        return i

    def _mean_gradient(self, A: np.ndarray, y: np.ndarray, x: np.ndarray) -> np.ndarray:
        coef = y * self._dloss(y * (A @ x))
        return (A.T @ coef) / A.shape[0] + self.mu * x

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        i = self._check_index(i)
        x = self._check_point(x)
        a, b = self._A[i], self._y[i]
        return b * self._dloss(b * (a @ x)) * a + self.mu * x

    def batch_gradient(self, idx: Optional[np.ndarray], x: np.ndarray) -> np.ndarray:
        """Mean component gradient over ``idx`` (duplicates counted); ``None`` means all."""
        x = self._check_point(x)
        if idx is None:
            return self._mean_gradient(self._A, self._y, x)
        idx = np.asarray(idx, dtype=np.intp)
        if idx.size == 0:
            raise ValueError("empty index set")
        return self._mean_gradient(self._A[idx], self._y[idx], x)

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.batch_gradient(None, x)

    def _mean_hessian(self, A: np.ndarray, y: np.ndarray, x: np.ndarray) -> np.ndarray:
        weights = self._d2loss(y * (A @ x))
        H = (A.T * weights) @ A / A.shape[0]
        H = 0.5 * (H + H.T)
        H[np.diag_indices_from(H)] += self.mu
        return H

    def full_hessian(self, x: np.ndarray) -> np.ndarray:
        x = self._check_point(x)
        return self._mean_hessian(self._A, self._y, x)

    def subsampled_hessian(self, idx: Optional[np.ndarray], x: np.ndarray) -> np.ndarray:
        """Average of the component Hessians in ``idx``; ``None`` means all components."""
        x = self._check_point(x)
        if idx is None:
            return self._mean_hessian(self._A, self._y, x)
        idx = np.asarray(idx, dtype=np.intp)
        if idx.size == 0:
            raise ValueError("empty index set")
        return self._mean_hessian(self._A[idx], self._y[idx], x)

    def constants(self) -> ObjectiveConstants:
        """Smoothness bound ``max ||a_i||^2 / 4 + mu`` and condition number."""
        if self.mu <= 0:
            raise ValueError("strong convexity required (mu > 0)")
        sq_norms = np.einsum("ij,ij->i", self._A, self._A)
        lam = float(np.max(sq_norms)) / 4.0 + self.mu
        return ObjectiveConstants(lam=lam, mu=self.mu, kappa=lam / self.mu)


class QuadraticModel(Objective):
    """Second-order Taylor model of the logistic loss around ``x = 0``.

    ``log(1 + exp(-m)) ~ log 2 - m/2 + m^2/8``, so Newton's method with the
    exact Hessian converges in one unit step.
    """

    @staticmethod
    def _loss(m):
        return np.log(2.0) - 0.5 * m + 0.125 * m * m

    @staticmethod
    def _dloss(m):
        return -0.5 + 0.25 * m

    @staticmethod
    def _d2loss(m):
        return np.full_like(np.asarray(m, dtype=np.float64), 0.25)

    def minimizer(self) -> np.ndarray:
        A, y = self._A, self._y
        H = A.T @ A / (4.0 * self.n) + self.mu * np.eye(self.d)
        return np.linalg.solve(H, A.T @ y / (2.0 * self.n))
