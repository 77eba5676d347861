"""Principal component analysis of feature matrices.

The covariance uses the ``1/(N-1)`` normalisation. When the feature
dimension exceeds the number of samples the eigenvectors are recovered
from the ``N x N`` Gram matrix of the centred data (snapshot method).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

RELATIVE_EIGEN_FLOOR = 1e-12


class DegenerateDataWarning(UserWarning):
    """Training data has no variance; the fitted model keeps no components."""


@dataclass(frozen=True)
class RetentionPolicy:
    """How many principal components to keep.

    If ``components`` is set exactly that many are kept, otherwise the
    smallest number whose eigenvalues capture at least ``variance`` of the
    total. ``cap`` bounds the result either way. The count never exceeds
    the number of non-negligible eigenvalues.
    """

    variance: float = 0.95
    components: Optional[int] = None
    cap: Optional[int] = None

    def __post_init__(self):
        if self.components is None and not 0.0 < self.variance <= 1.0:
            raise ValueError(f"variance fraction must lie in (0, 1], got {self.variance}")
        if self.components is not None and self.components < 0:
            raise ValueError("components must be non-negative")
        if self.cap is not None and self.cap < 0:
            raise ValueError("cap must be non-negative")

    def with_cap(self, cap: int) -> "RetentionPolicy":
        cap = cap if self.cap is None else min(cap, self.cap)
        return RetentionPolicy(self.variance, self.components, cap)

    def choose(self, eigenvalues: np.ndarray) -> int:
        available = len(eigenvalues)
        if self.components is not None:
            k = self.components
        else:
            total = eigenvalues.sum()
            if total <= 0:
                return 0
            frac = np.cumsum(eigenvalues) / total
            # tolerate rounding when the requested fraction is exactly reached
            k = int(np.searchsorted(frac, self.variance * (1 - 1e-12))) + 1
        if self.cap is not None:
            k = min(k, self.cap)
        return min(k, available)


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Fitted reducer.

    ``components`` has shape ``(K, D)`` with orthonormal rows ordered by
    descending ``eigenvalues``.
    """

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray

    @property
    def retained_dim(self) -> int:
        return self.components.shape[0]

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    def transform(self, X) -> np.ndarray:
        """Project the rows of ``X`` (or a single vector)."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.input_dim:
            raise ValueError(f"expected vectors of length {self.input_dim}, got {X.shape[-1]}")
        return (X - self.mean) @ self.components.T

    def inverse_transform(self, Z) -> np.ndarray:
        return self.mean + np.asarray(Z, dtype=np.float64) @ self.components

    def __eq__(self, other):
        if not isinstance(other, PcaModel):
            return NotImplemented
        return (
            np.array_equal(self.mean, other.mean)
            and np.array_equal(self.components, other.components)
            and np.array_equal(self.eigenvalues, other.eigenvalues)
        )


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip rows so that each row's largest-magnitude entry is non-negative."""
    vectors = np.array(vectors, dtype=np.float64, copy=True)
    if vectors.size == 0:
        return vectors
    lead = np.argmax(np.abs(vectors), axis=1)
    signs = np.where(vectors[np.arange(len(vectors)), lead] < 0, -1.0, 1.0)
    return vectors * signs[:, None]


def _eigen(Xc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Descending eigenvalues and row eigenvectors of the sample covariance."""
    n, d = Xc.shape
    if d <= n:
        cov = Xc.T @ Xc / (n - 1)
        vals, vecs = np.linalg.eigh(cov)
        order = np.argsort(vals)[::-1]
        return vals[order], vecs[:, order].T
    gram = Xc @ Xc.T / (n - 1)
    vals, vecs = np.linalg.eigh(gram)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    keep = vals > RELATIVE_EIGEN_FLOOR * max(vals[0], 0.0)
    vals, vecs = vals[keep], vecs[:, keep]
    comps = (Xc.T @ vecs).T
    comps /= np.linalg.norm(comps, axis=1, keepdims=True)
    # recovered vectors lose orthogonality for small eigenvalues; re-orthonormalise
    q, r = np.linalg.qr(comps.T)
    comps = (q * np.sign(np.diag(r))).T
    return vals, comps


def pca_fit(X, policy: RetentionPolicy = RetentionPolicy()) -> PcaModel:
    """Fit principal components to the rows of ``X`` (N x D)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected an N x D matrix, got shape {X.shape}")
    n, d = X.shape
    if n < 2 or d < 1:
        raise ValueError(f"need at least 2 samples and 1 feature, got {n}x{d}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite entries")

    mean = X.mean(axis=0)
    Xc = X - mean
    vals, vecs = _eigen(Xc)
    vals = np.where(vals < 0, 0.0, vals)
    if vals.size == 0 or vals[0] <= 0:
        warnings.warn("all samples are identical; no components retained", DegenerateDataWarning, stacklevel=2)
        return PcaModel(mean, np.zeros((0, d)), np.zeros(0))
    keep = vals > RELATIVE_EIGEN_FLOOR * vals[0]
    vals, vecs = vals[keep], vecs[keep]
    vals, vecs = vals[: n - 1], vecs[: n - 1]
    k = policy.choose(vals)
    return PcaModel(mean, fix_signs(vecs[:k]), vals[:k].copy())


def pca_project(model: PcaModel, x) -> np.ndarray:
    """Coordinates of ``x`` in the retained principal subspace."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.input_dim,):
        raise ValueError(f"expected a vector of length {model.input_dim}, got shape {x.shape}")
    return model.components @ (x - model.mean)


# ----------------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------------

def _row(values) -> str:
    return ",".join(f"{v:.17g}" for v in np.asarray(values, dtype=np.float64).ravel())


def _parse_row(line: str, length: int) -> np.ndarray:
    values = [float(v) for v in line.split(",")] if line.strip() else []
    if len(values) != length:
        raise ValueError(f"expected {length} values, found {len(values)}")
    return np.array(values, dtype=np.float64)


def format_pca(model: PcaModel) -> str:
    lines = [f"PCA v1 {model.input_dim} {model.retained_dim}", _row(model.mean), _row(model.eigenvalues)]
    lines += [_row(c) for c in model.components]
    return "\n".join(lines) + "\n"


def parse_pca(text: str) -> PcaModel:
    lines = text.split("\n")
    header = lines[0].split()
    if len(header) != 4 or header[:2] != ["PCA", "v1"]:
        raise ValueError(f"not a PCA v1 model: {lines[0]!r}")
    d, k = int(header[2]), int(header[3])
    if len(lines) < 3 + k:
        raise ValueError("truncated PCA model")
    mean = _parse_row(lines[1], d)
    eigenvalues = _parse_row(lines[2], k)
    components = np.array([_parse_row(lines[3 + i], d) for i in range(k)]).reshape(k, d)
    return PcaModel(mean, components, eigenvalues)
