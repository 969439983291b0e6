"""Dense Cholesky factorization and solves for the Newton direction."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from mbsvrn.errors import NotPositiveDefiniteError

__all__ = ["SpdFactorization", "factorize", "solve", "fingerprint"]

SYMMETRY_TOL = 1e-10


def fingerprint(M: np.ndarray) -> str:
    M = np.ascontiguousarray(M, dtype=np.float64)
    h = hashlib.sha256()
    h.update(np.asarray(M.shape, dtype=np.int64).tobytes())
    h.update(M.tobytes())
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class SpdFactorization:
    """Lower Cholesky factor ``L`` with ``L @ L.T == M``."""

    lower: np.ndarray
    source_fingerprint: str

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve(self, rhs)


def factorize(M: np.ndarray) -> SpdFactorization:
    """Cholesky-factorize a symmetric positive definite matrix.

    No pivoting and no diagonal jitter: a non-positive pivot raises
    :class:`NotPositiveDefiniteError`.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = max(float(np.max(np.abs(M))), 1.0) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("matrix not positive definite") from None
    if not np.all(np.diag(L) > 0) or not np.all(np.isfinite(L)):
        raise NotPositiveDefiniteError("matrix not positive definite")
    L.setflags(write=False)
    return SpdFactorization(L, fingerprint(M))


def solve(F: SpdFactorization, rhs: np.ndarray) -> np.ndarray:
    """Solve ``M y = rhs`` by forward then back substitution."""
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] != F.dim:
        raise ValueError(f"rhs has leading dimension {rhs.shape[0]}, expected {F.dim}")
    return cho_solve((F.lower, True), rhs, check_finite=False)
