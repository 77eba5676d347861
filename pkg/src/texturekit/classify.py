"""Fisher linear discriminant analysis with nearest-centroid matching.

Discriminant directions solve the generalised eigenproblem
``S_b v = lambda (S_w + eps I) v``; samples are assigned to the class whose
projected mean is closest in Euclidean distance. Exact distance ties go to
the class with the larger prior, then to the earlier label.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
import scipy.linalg

from .reduction import _parse_row, _row, fix_signs

RIDGE_FACTOR = 1e-6


@dataclass(frozen=True, eq=False)
class LdaModel:
    """Fitted discriminant.

    Attributes
    ----------
    projection : ndarray, shape (M, K)
        Discriminant directions as rows, unit length unless ``whiten``.
    class_centroids : ndarray, shape (C, M)
        Projected class means.
    class_labels : tuple
        Sorted class labels; defines tie-break order.
    priors : ndarray, shape (C,)
        Empirical class frequencies.
    ridge : float
        Value added to the diagonal of the within-class scatter.
    whiten : bool
        Whether directions were scaled to unit within-class variance.
    """

    projection: np.ndarray
    class_centroids: np.ndarray
    class_labels: tuple
    priors: np.ndarray
    ridge: float
    whiten: bool = False

    @property
    def input_dim(self) -> int:
        return self.projection.shape[1]

    @property
    def output_dim(self) -> int:
        return self.projection.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LdaModel):
            return NotImplemented
        return (
            np.array_equal(self.projection, other.projection)
            and np.array_equal(self.class_centroids, other.class_centroids)
            and self.class_labels == other.class_labels
            and np.array_equal(self.priors, other.priors)
            and self.ridge == other.ridge
            and self.whiten == other.whiten
        )


@dataclass(frozen=True)
class Prediction:
    label: Any
    score: float
    runner_up_margin: float


def scatter_matrices(X: np.ndarray, y: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Within-class scatter, between-class scatter and class means."""
    mu = X.mean(axis=0)
    k = X.shape[1]
    sw = np.zeros((k, k))
    sb = np.zeros((k, k))
    means = np.empty((len(labels), k))
    for i, c in enumerate(labels):
        Xi = X[y == c]
        means[i] = Xi.mean(axis=0)
        dev = Xi - means[i]
        sw += dev.T @ dev
        diff = (means[i] - mu)[:, None]
        sb += len(Xi) * (diff @ diff.T)
    return sw, sb, means


def lda_fit(X, labels: Sequence, whiten: bool = False) -> LdaModel:
    """Fit Fisher discriminant directions to ``X`` (N x K) with class ``labels``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected an N x K matrix, got shape {X.shape}")
    y = np.asarray(labels)
    n, k = X.shape
    if n < 2 or len(y) != n:
        raise ValueError(f"need at least 2 samples with one label each, got {n} rows and {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite entries")
    classes = tuple(sorted(set(y.tolist())))
    if len(classes) < 2:
        raise ValueError("need at least two classes")

    sw, sb, means = scatter_matrices(X, y, classes)
    priors = np.array([np.count_nonzero(y == c) for c in classes], dtype=np.float64) / n
    m = min(len(classes) - 1, k)

    if k == 0:
        # no retained features: every class collapses onto the origin
        return LdaModel(np.zeros((0, 0)), np.zeros((len(classes), 0)), classes, priors, 0.0, whiten)

    ridge = RIDGE_FACTOR * np.trace(sw) / k
    if ridge <= 0:
        # one sample per class leaves no within-class scatter
        ridge = RIDGE_FACTOR * max(np.trace(sb) / k, 1.0)
    vals, vecs = scipy.linalg.eigh(sb, sw + ridge * np.eye(k))
    order = np.argsort(vals)[::-1][:m]
    directions = vecs[:, order].T
    if not whiten:
        directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)
    directions = fix_signs(directions)
    return LdaModel(directions, means @ directions.T, classes, priors, float(ridge), whiten)


def lda_transform(model: LdaModel, x) -> np.ndarray:
    """Project a vector (or the rows of a matrix) into discriminant space."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise ValueError(f"expected vectors of length {model.input_dim}, got {x.shape[-1]}")
    return x @ model.projection.T


def _rank(model: LdaModel, distances: np.ndarray) -> np.ndarray:
    # lexsort: last key is primary
    return np.lexsort((np.arange(len(distances)), -model.priors, distances))


def lda_predict(model: LdaModel, x) -> Prediction:
    """Nearest-centroid label for one reduced vector."""
    z = lda_transform(model, x)
    if z.ndim != 1:
        raise ValueError("lda_predict takes a single vector; use lda_predict_many for matrices")
    distances = np.linalg.norm(model.class_centroids - z, axis=1)
    order = _rank(model, distances)
    best, second = order[0], order[1]
    return Prediction(
        model.class_labels[best],
        -float(distances[best]),
        float(distances[second] - distances[best]),
    )


def lda_predict_many(model: LdaModel, X) -> list:
    """Predicted labels for the rows of ``X``."""
    Z = lda_transform(model, np.atleast_2d(X))
    out = []
    for z in Z:
        distances = np.linalg.norm(model.class_centroids - z, axis=1)
        out.append(model.class_labels[_rank(model, distances)[0]])
    return out


# ----------------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------------

def format_lda(model: LdaModel) -> str:
    """Text form: ``LDA v1 K M C`` header, projection, centroids, labels, priors.

    A trailing ``ridge,whiten`` row carries the fit settings.
    """
    c = len(model.class_labels)
    lines = [f"LDA v1 {model.input_dim} {model.output_dim} {c}"]
    lines += [_row(r) for r in model.projection]
    lines += [_row(r) for r in model.class_centroids]
    lines.append(",".join(str(label) for label in model.class_labels))
    lines.append(_row(model.priors))
    lines.append(f"{model.ridge:.17g},{int(model.whiten)}")
    return "\n".join(lines) + "\n"


def _parse_label(token: str):
    try:
        return int(token)
    except ValueError:
        return token


def parse_lda(text: str) -> LdaModel:
    lines = text.split("\n")
    header = lines[0].split()
    if len(header) != 5 or header[:2] != ["LDA", "v1"]:
        raise ValueError(f"not an LDA v1 model: {lines[0]!r}")
    k, m, c = (int(v) for v in header[2:])
    if len(lines) < 3 + m + c:
        raise ValueError("truncated LDA model")
    pos = 1
    projection = np.array([_parse_row(lines[pos + i], k) for i in range(m)]).reshape(m, k)
    pos += m
    centroids = np.array([_parse_row(lines[pos + i], m) for i in range(c)]).reshape(c, m)
    pos += c
    labels = tuple(_parse_label(t) for t in lines[pos].split(","))
    if len(labels) != c:
        raise ValueError(f"expected {c} labels, found {len(labels)}")
    priors = _parse_row(lines[pos + 1], c)
    ridge, whiten = float("nan"), False
    if len(lines) > pos + 2 and lines[pos + 2].strip():
        r, w = lines[pos + 2].split(",")
        ridge, whiten = float(r), bool(int(w))
    return LdaModel(projection, centroids, labels, priors, ridge, whiten)
