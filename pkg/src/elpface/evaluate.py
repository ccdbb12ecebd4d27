"""Retrieval evaluation: standardization, chi-squared distance, leave-one-out
k-NN with majority vote, and the sub-image sweep.

Two distance pipelines are supported. "paper" mode standardizes every
dimension to zero mean and unit variance and then applies a chi-squared
form with absolute values in the denominator, which stays well defined on
signed inputs and reduces to the classical histogram chi-squared on
non-negative ones. "classic" mode skips standardization and compares the
raw (per-region L1-normalized) histograms directly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .elp import Descriptor, ElpParams, elp_descriptor, length_of
from .imaging import GrayImage, SubImageGrid
from .lbp import LbpParams, lbp_descriptor

CHI2_EPS = 1e-10
DEAD_DIM_STD = 1e-12
DISTANCE_MODES = ("paper", "classic")


@dataclass(frozen=True)
class LabeledCorpus:
    """Uniform descriptor matrix with identity labels.

    ``values`` is ``(n, dim)`` float64, one descriptor per row; ``labels``
    holds the identity index of each row and ``names`` maps identity index
    to display name. ``method``/``params``/``grid`` record how the
    descriptors were extracted; ``paths`` (optional) records source files.
    """

    values: np.ndarray
    labels: np.ndarray
    names: list
    method: str
    params: dict
    grid: SubImageGrid
    paths: list | None = None

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-d, got shape {values.shape}")
        if labels.shape != (values.shape[0],):
            raise ValueError("labels must have one entry per descriptor row")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.names)):
            raise ValueError("labels out of range of the identity name table")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_descriptors(cls, descriptors, labels, names, paths=None):
        if not descriptors:
            raise ValueError("empty descriptor list")
        first = descriptors[0]
        values = np.stack([d.values for d in descriptors])
        return cls(values, labels, list(names), first.method, first.params, first.grid, paths)


@dataclass(frozen=True)
class Standardization:
    """Fitted per-dimension affine transform: x -> (x - mean) / scale.

    Dimensions whose population standard deviation fell below 1e-12 carry a
    zero scale and are mapped to 0 so constant features never blow up on
    held-out data.
    """

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        inv = np.where(self.scale > 0.0, 1.0 / np.where(self.scale > 0.0, self.scale, 1.0), 0.0)
        return (X - self.mean) * inv


def fit_standardization(X: np.ndarray) -> Standardization:
    """Fit means and population standard deviations on the rows of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("standardization needs at least 2 descriptors")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std < DEAD_DIM_STD, 0.0, std)
    return Standardization(mean, scale)


def standardize(corpus: LabeledCorpus):
    """Standardized copy of a corpus plus the fitted transform for reuse."""
    transform = fit_standardization(corpus.values)
    transformed = LabeledCorpus(
        transform.apply(corpus.values), corpus.labels, corpus.names,
        corpus.method, corpus.params, corpus.grid, corpus.paths,
    )
    return transformed, transform


def chi_squared(x, y, eps: float = CHI2_EPS) -> float:
    """Chi-squared distance 0.5 * sum((x-y)^2 / (|x| + |y| + eps)).

    Symmetric, non-negative, and zero exactly when the vectors are equal.
    The absolute values keep the form total on standardized (signed) input.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    return float(0.5 * np.sum(diff * diff / (np.abs(x) + np.abs(y) + eps)))


def chi_squared_matrix(X: np.ndarray, eps: float = CHI2_EPS, threads: int = 1) -> np.ndarray:
    """Full pairwise chi-squared distance matrix, row-parallel."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    absx = np.abs(X)
    out = np.empty((n, n), dtype=np.float64)

    def fill(rows):
        diff = np.empty_like(X)
        den = np.empty_like(X)
        for i in rows:
            np.subtract(X, X[i], out=diff)
            np.multiply(diff, diff, out=diff)
            np.add(absx, absx[i], out=den)
            den += eps
            diff /= den
            np.sum(diff, axis=1, out=out[i])

    if threads > 1 and n > 1:
        chunks = np.array_split(np.arange(n), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, [c for c in chunks if c.size]))
    else:
        fill(range(n))
    out *= 0.5
    return out


@dataclass(frozen=True)
class SearchReport:
    """Leave-one-out retrieval outcome for one corpus and one k."""

    k: int
    distance_mode: str
    neighbor_indices: np.ndarray
    neighbor_distances: np.ndarray
    predicted: np.ndarray
    correct: np.ndarray
    accuracy: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "distance_mode": self.distance_mode,
            "accuracy": self.accuracy,
            "n_queries": int(self.predicted.size),
            "n_correct": int(self.correct.sum()),
        }


def _majority_vote(neighbor_labels: np.ndarray) -> int:
    """Plurality label; ties resolved by the nearest tied member."""
    counts = np.bincount(neighbor_labels)
    tied = np.flatnonzero(counts == counts.max())
    if tied.size == 1:
        return int(tied[0])
    tied_set = set(tied.tolist())
    for lab in neighbor_labels:
        if int(lab) in tied_set:
            return int(lab)
    raise AssertionError("unreachable: some neighbor must carry a tied label")


def knn_retrieval_eval(
    corpus: LabeledCorpus,
    k: int = 5,
    distance_mode: str = "paper",
    threads: int = 1,
) -> SearchReport:
    """Leave-one-out k-NN retrieval with chi-squared distances.

    Every descriptor queries all the others; the k closest (ties broken by
    lower index) vote on the predicted identity, vote ties going to the
    nearest tied member. Accuracy is the fraction of queries whose
    prediction matches their own label.
    """
    n = len(corpus)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the corpus size {n}")
    if distance_mode not in DISTANCE_MODES:
        raise ValueError(f"distance_mode must be one of {DISTANCE_MODES}")
    if np.unique(corpus.labels).size < 2:
        raise ValueError("retrieval evaluation needs at least 2 identities")

    X = corpus.values
    if distance_mode == "paper":
        X = fit_standardization(X).apply(X)
    dist = chi_squared_matrix(X, threads=threads)
    np.fill_diagonal(dist, np.inf)  # leave-one-out: a query never matches itself

    nn_idx = np.empty((n, k), dtype=np.int64)
    nn_dist = np.empty((n, k), dtype=np.float64)
    predicted = np.empty(n, dtype=np.int64)
    for i in range(n):
        order = np.argsort(dist[i], kind="stable")[:k]
        nn_idx[i] = order
        nn_dist[i] = dist[i, order]
        predicted[i] = _majority_vote(corpus.labels[order])

    correct = predicted == corpus.labels
    return SearchReport(
        k, distance_mode, nn_idx, nn_dist, predicted, correct,
        float(correct.mean()),
    )


def extract_corpus(
    images,
    labels,
    names,
    method: str,
    params,
    grid: SubImageGrid,
    threads: int = 1,
    paths=None,
) -> LabeledCorpus:
    """Extract one descriptor per image and assemble the labeled corpus.

    Extraction is pure per image, so it parallelizes across a thread pool
    without changing the result; rows keep the input image order.
    """
    if method == "elp":
        job = lambda img: elp_descriptor(img, grid, params).values
    elif method == "lbp":
        job = lambda img: lbp_descriptor(img, grid, params).values
    else:
        raise ValueError(f"unknown method {method!r}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(job, images))
    else:
        rows = [job(img) for img in images]
    return LabeledCorpus(
        np.stack(rows), labels, list(names), method, params.to_dict(), grid, paths
    )


def subimage_sweep(
    images,
    labels,
    names,
    method: str,
    params,
    grids,
    k: int = 5,
    distance_mode: str = "paper",
    threads: int = 1,
):
    """Run the full extract + retrieve pipeline once per grid.

    Returns one row dict per grid with the descriptor length and the
    leave-one-out accuracy, ready for CSV or plotting.
    """
    grids = list(grids)
    if not grids:
        raise ValueError("at least one grid is required")
    rows = []
    for grid in grids:
        corpus = extract_corpus(images, labels, names, method, params, grid, threads)
        report = knn_retrieval_eval(corpus, k=k, distance_mode=distance_mode, threads=threads)
        rows.append({
            "grid": str(grid),
            "rows": grid.rows,
            "cols": grid.cols,
            "length": length_of(method, params, grid),
            "accuracy": report.accuracy,
        })
    return rows
