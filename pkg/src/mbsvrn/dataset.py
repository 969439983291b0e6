"""Training data: synthetic generation, file loaders and a random feature map."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist

from mbsvrn.errors import DataError

__all__ = [
    "Dataset",
    "SyntheticSpec",
    "FeatureMapSpec",
    "generate_synthetic",
    "load_dense_csv",
    "load_libsvm",
    "write_dense_csv",
    "apply_feature_map",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, order="C", copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Dense design matrix with +1/-1 labels.

    Arrays are copied on construction and marked read-only.
    """

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a non-empty 2-D array, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataError(f"expected {X.shape[0]} labels, got shape {y.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite entries")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise DataError("labels must be +1 or -1")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    d: int
    kappa: float
    seed: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise DataError(f"d must be >= 2, got {self.d}")
        if self.n < self.d:
            raise DataError(f"n={self.n} < d={self.d}: no n x d matrix with orthonormal columns")
        if not self.kappa >= 1:
            raise DataError(f"kappa must be >= 1, got {self.kappa}")


@dataclass(frozen=True)
class FeatureMapSpec:
    output_dim: int
    bandwidth: Union[float, str] = "median-heuristic"
    seed: int = 0

    def __post_init__(self):
        if self.output_dim < 1:
            raise DataError(f"output_dim must be >= 1, got {self.output_dim}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "median-heuristic":
                raise DataError(f"unknown bandwidth rule {self.bandwidth!r}")
        elif not self.bandwidth > 0:
            raise DataError(f"bandwidth must be positive, got {self.bandwidth}")


def _orthonormal_columns(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    # sign fix on R's diagonal makes the QR factor Haar distributed;
    # factoring a Fortran-ordered draw in place avoids extra n x d copies
    G = np.asfortranarray(rng.standard_normal((rows, cols)))
    Q, R = scipy.linalg.qr(G, mode="economic", overwrite_a=True, check_finite=False)
    del G
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    Q *= signs
    return Q


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Build ``A = U diag(s) V^T`` with one stretched direction and sign labels.

    All singular values equal ``n`` except the first, which is ``n * kappa``.
    Labels are ``sign(A x_gen)`` for a standard Gaussian ``x_gen``, with
    ``sign(0) = +1``.
    """
    rng = np.random.default_rng(spec.seed)
    U = _orthonormal_columns(rng, spec.n, spec.d)
    V = _orthonormal_columns(rng, spec.d, spec.d)
    sigma = np.full(spec.d, float(spec.n))
    sigma[0] = spec.n * float(spec.kappa)
    # in-place scaling keeps the peak at a few copies of an n x d array
    U *= sigma
    A = U @ V.T
    del U
    x_gen = rng.standard_normal(spec.d)
    labels = np.where(A @ x_gen >= 0.0, 1.0, -1.0)
    name = f"synthetic_n{spec.n}_d{spec.d}_k{spec.kappa:g}_s{spec.seed}"
    return Dataset(A, labels, name)


def _parse_label(token: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataError(f"line {lineno}: cannot parse label {token!r}") from None
    if value == 1.0:
        return 1.0
    if value in (-1.0, 0.0):
        return -1.0
    raise DataError(f"line {lineno}: label {token!r} is not one of -1, 0, +1")


def load_dense_csv(path: Union[str, Path], name: Optional[str] = None) -> Dataset:
    """Read rows of ``label,f1,...,fd``.

    Blank lines and lines starting with ``#`` are skipped. Labels 0/1 are
    mapped to -1/+1.
    """
    path = Path(path)
    labels: list[float] = []
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = [tok.strip() for tok in line.split(",")]
            if len(tokens) < 2:
                raise DataError(f"line {lineno}: expected label and at least one feature")
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise DataError(
                    f"line {lineno}: expected {width} columns, found {len(tokens)}"
                )
            labels.append(_parse_label(tokens[0], lineno))
            try:
                rows.append([float(tok) for tok in tokens[1:]])
            except ValueError:
                raise DataError(f"line {lineno}: malformed feature value") from None
    if not rows:
        raise DataError(f"{path}: no rows")
    return Dataset(np.array(rows), np.array(labels), name or path.stem)


def load_libsvm(
    path: Union[str, Path], n_features: Optional[int] = None, name: Optional[str] = None
) -> Dataset:
    """Read the sparse ``label idx:val ...`` text format (1-based indices) densely."""
    path = Path(path)
    labels: list[float] = []
    entries: list[tuple[list[int], list[float]]] = []
    max_index = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            labels.append(_parse_label(tokens[0], lineno))
            idx: list[int] = []
            vals: list[float] = []
            last = 0
            for tok in tokens[1:]:
                try:
                    i_str, v_str = tok.split(":", 1)
                    i, v = int(i_str), float(v_str)
                except ValueError:
                    raise DataError(f"line {lineno}: malformed entry {tok!r}") from None
                if i < 1:
                    raise DataError(f"line {lineno}: index {i} invalid, indices are 1-based")
                if i <= last:
                    raise DataError(f"line {lineno}: indices must be strictly increasing")
                last = i
                idx.append(i - 1)
                vals.append(v)
            max_index = max(max_index, last)
            entries.append((idx, vals))
    if not entries:
        raise DataError(f"{path}: no rows")
    d = max_index if n_features is None else int(n_features)
    if d < max_index:
        raise DataError(f"n_features={d} smaller than largest index {max_index}")
    if d < 1:
        d = 1
    X = np.zeros((len(entries), d))
    for r, (idx, vals) in enumerate(entries):
        X[r, idx] = vals
    return Dataset(X, np.array(labels), name or path.stem)


def write_dense_csv(ds: Dataset, path: Union[str, Path]) -> None:
    """Write ``ds`` in the format read by :func:`load_dense_csv`.

    Values use ``%.17g`` so the file round-trips exactly.
    """
    data = np.column_stack([ds.labels, ds.features])
    fmt = ["%d"] + ["%.17g"] * ds.d
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        np.savetxt(fh, data, fmt=fmt, delimiter=",")


def median_pairwise_distance(X: np.ndarray, rng: np.random.Generator, max_rows: int = 1000) -> float:
    if X.shape[0] > max_rows:
        X = X[np.sort(rng.choice(X.shape[0], size=max_rows, replace=False))]
    if X.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(X)))
    return med if med > 0 else 1.0


def apply_feature_map(
    ds: Dataset,
    spec: FeatureMapSpec,
    *,
    weights: Optional[np.ndarray] = None,
    offsets: Optional[np.ndarray] = None,
) -> Dataset:
    """Random Fourier features ``sqrt(2/D) cos(a W + c)``.

    ``weights`` (d x D) and ``offsets`` (D,) override the random draws; they
    exist for testing.
    """
    rng = np.random.default_rng(spec.seed)
    D = spec.output_dim
    if spec.bandwidth == "median-heuristic":
        bandwidth = median_pairwise_distance(ds.features, rng)
    else:
        bandwidth = float(spec.bandwidth)
    W = rng.standard_normal((ds.d, D)) / bandwidth
    c = rng.uniform(0.0, 2.0 * math.pi, size=D)
    if weights is not None:
        W = np.asarray(weights, dtype=np.float64).reshape(ds.d, D)
    if offsets is not None:
        c = np.asarray(offsets, dtype=np.float64).reshape(D)
    Z = math.sqrt(2.0 / D) * np.cos(ds.features @ W + c)
    return Dataset(Z, ds.labels, f"{ds.name}_rff{D}")
