"""Multi-class C-SVC with an RBF kernel, trained by sequential minimal
optimization with maximal-violating-pair working-set selection.

The binary solver works on a precomputed kernel matrix and maintains the
gradient-like quantities F_i = sum_j alpha_j y_j K_ij - y_i. A pair
(i from the "up" set minimizing F, j from the "down" set maximizing F)
violates the KKT conditions whenever F_j - F_i > 2*tol; the solver keeps
taking exact two-variable steps on the worst pair until no such pair is
left. With the bias placed midway between the two extreme F values, every
training point then satisfies its KKT condition to within tol.

Multi-class problems train one binary machine per unordered class pair and
predict by plurality vote, ties broken by the accumulated signed decision
values and then by the lower class index.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import split_indices
from .evaluate import LabeledCorpus, Standardization, fit_standardization

DEFAULT_C_GRID = tuple(10.0 ** e for e in range(-7, 8))
DEFAULT_GAMMA_GRID = tuple(10.0 ** e for e in range(-5, 4))


@dataclass(frozen=True)
class SvcParams:
    """Penalty, kernel coefficient, and solver controls."""

    C: float = 1.0
    gamma: float = 1.0
    tol: float = 1e-3
    max_iter: int = 200_000

    def __post_init__(self):
        if self.C <= 0 or self.gamma <= 0 or self.tol <= 0:
            raise ValueError("C, gamma, and tol must all be positive")

    def to_dict(self) -> dict:
        return {"C": self.C, "gamma": self.gamma, "tol": self.tol, "max_iter": self.max_iter}


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2) for a single vector pair."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    return float(np.exp(-gamma * np.dot(diff, diff)))


def squared_distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at 0 for safety."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    d2 = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(Y * Y, axis=1)[None, :]
        - 2.0 * (X @ Y.T)
    )
    return np.maximum(d2, 0.0)


def rbf_kernel_matrix(X: np.ndarray, Y: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * squared_distances(X, Y))


def _smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int):
    """Solve the C-SVC dual on a precomputed kernel matrix.

    Returns ``(alpha, bias, iterations, converged)``. Deterministic: the
    maximal violating pair is chosen by first occurrence on exact ties.
    """
    n = y.size
    alpha = np.zeros(n)
    F = -y.astype(np.float64)
    pos = y > 0
    up = np.where(pos, alpha < C, alpha > 0)
    down = np.where(pos, alpha > 0, alpha < C)

    iterations = 0
    converged = False
    inf = np.inf
    while iterations < max_iter:
        f_up = np.where(up, F, inf)
        f_down = np.where(down, F, -inf)
        i = int(np.argmin(f_up))
        j = int(np.argmax(f_down))
        if not up[i] or not down[j] or f_down[j] - f_up[i] <= 2.0 * tol:
            converged = True
            break

        # Exact two-variable step along alpha_i += y_i*t, alpha_j -= y_j*t.
        if y[i] > 0:
            lo_i, hi_i = -alpha[i], C - alpha[i]
        else:
            lo_i, hi_i = alpha[i] - C, alpha[i]
        if y[j] > 0:
            lo_j, hi_j = alpha[j] - C, alpha[j]
        else:
            lo_j, hi_j = -alpha[j], C - alpha[j]
        hi = min(hi_i, hi_j)
        lo = max(lo_i, lo_j)

        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta > 1e-12:
            t = (F[j] - F[i]) / eta
        else:
            t = hi  # flat direction: the linear gain is positive, take the full step
        t = min(max(t, lo), hi)
        if t == 0.0:
            converged = True  # boxed in; no progress possible on the worst pair
            break

        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        F += t * (K[:, i] - K[:, j])
        for idx in (i, j):
            if pos[idx]:
                up[idx] = alpha[idx] < C
                down[idx] = alpha[idx] > 0
            else:
                up[idx] = alpha[idx] > 0
                down[idx] = alpha[idx] < C
        iterations += 1

    f_up = np.where(up, F, inf)
    f_down = np.where(down, F, -inf)
    b_up = float(f_up.min())
    b_low = float(f_down.max())
    if not np.isfinite(b_up):
        b_up = b_low
    if not np.isfinite(b_low):
        b_low = b_up
    bias = -(b_up + b_low) / 2.0
    return alpha, bias, iterations, converged


@dataclass(frozen=True)
class BinarySvc:
    """One trained binary machine: kept support vectors and their weights."""

    support_vectors: np.ndarray
    coef: np.ndarray  # alpha_i * y_i for the support vectors
    bias: float
    gamma: float
    support_indices: np.ndarray  # positions within the training subset
    converged: bool
    iterations: int

    def decision(self, X: np.ndarray) -> np.ndarray:
        K = rbf_kernel_matrix(np.atleast_2d(X), self.support_vectors, self.gamma)
        return K @ self.coef + self.bias


def smo_train_binary(X: np.ndarray, y: np.ndarray, params: SvcParams) -> BinarySvc:
    """Train one binary C-SVC on labels in {-1, +1}."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise ValueError("binary training needs both labels -1 and +1")
    K = rbf_kernel_matrix(X, X, params.gamma)
    alpha, bias, iterations, converged = _smo_solve(
        K, y, params.C, params.tol, params.max_iter
    )
    sv = np.flatnonzero(alpha > 0.0)
    return BinarySvc(
        X[sv].copy(), (alpha * y)[sv], bias, params.gamma, sv, converged, iterations
    )


def kkt_violation(model: BinarySvc, X: np.ndarray, y: np.ndarray, C: float) -> float:
    """Largest KKT violation of a trained machine over its training set.

    alpha = 0 requires y*f(x) >= 1, alpha = C requires y*f(x) <= 1, interior
    alphas require equality; the violation is how far the corresponding
    inequality is broken.
    """
    y = np.asarray(y, dtype=np.float64)
    alpha = np.zeros(y.size)
    alpha[model.support_indices] = np.abs(model.coef)
    margins = y * model.decision(X)
    worst = 0.0
    for a, m in zip(alpha, margins):
        if a <= 0.0:
            worst = max(worst, 1.0 - m)
        elif a >= C:
            worst = max(worst, m - 1.0)
        else:
            worst = max(worst, abs(m - 1.0))
    return worst


@dataclass(frozen=True)
class SvcModel:
    """One-vs-one ensemble plus the standardization fitted on its training data."""

    classes: np.ndarray
    pair_models: dict  # (class_a, class_b) -> BinarySvc, a < b, +1 <-> class_a
    transform: Standardization
    params: SvcParams

    @property
    def converged(self) -> bool:
        return all(m.converged for m in self.pair_models.values())


def ovo_fit(corpus: LabeledCorpus, params: SvcParams, threads: int = 1) -> SvcModel:
    """Train the pairwise ensemble on a (raw, unstandardized) corpus.

    Standardization is fitted here, on exactly the data being trained on,
    and is stored in the model so prediction can consume raw descriptors.
    """
    classes = np.unique(corpus.labels)
    if classes.size < 2:
        raise ValueError("one-vs-one training needs at least 2 classes")
    transform = fit_standardization(corpus.values)
    X = transform.apply(corpus.values)

    pairs = list(itertools.combinations(classes.tolist(), 2))

    def train(pair):
        a, b = pair
        mask = (corpus.labels == a) | (corpus.labels == b)
        y = np.where(corpus.labels[mask] == a, 1.0, -1.0)
        return pair, smo_train_binary(X[mask], y, params)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trained = list(pool.map(train, pairs))
    else:
        trained = [train(p) for p in pairs]
    return SvcModel(classes, dict(trained), transform, params)


def ovo_predict(model: SvcModel, X: np.ndarray) -> np.ndarray:
    """Predict class labels for raw descriptor rows."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Xs = model.transform.apply(X)
    n = Xs.shape[0]
    n_classes = model.classes.size
    class_pos = {int(c): i for i, c in enumerate(model.classes)}

    votes = np.zeros((n, n_classes), dtype=np.int64)
    scores = np.zeros((n, n_classes), dtype=np.float64)
    for (a, b), machine in model.pair_models.items():
        dec = machine.decision(Xs)
        ia, ib = class_pos[int(a)], class_pos[int(b)]
        win_a = dec > 0
        votes[win_a, ia] += 1
        votes[~win_a, ib] += 1
        scores[:, ia] += dec
        scores[:, ib] -= dec

    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = votes[i].max()
        tied = np.flatnonzero(votes[i] == best)
        if tied.size > 1:
            # plurality tie: fall back to accumulated signed decision values,
            # then to the lower class index (flatnonzero order is ascending)
            tied = tied[scores[i, tied] == scores[i, tied].max()]
        out[i] = model.classes[tied[0]]
    return out


@dataclass(frozen=True)
class GridSearchResult:
    best_C: float
    best_gamma: float
    best_accuracy: float
    table: list  # dicts: {"C", "gamma", "accuracy", "converged"}
    train_indices: np.ndarray
    test_indices: np.ndarray


def grid_search(
    corpus: LabeledCorpus,
    C_grid=DEFAULT_C_GRID,
    gamma_grid=DEFAULT_GAMMA_GRID,
    seed: int = 0,
    train_fraction: float = 0.8,
    stratified: bool = False,
    tol: float = 1e-3,
    max_iter: int = 200_000,
    threads: int = 1,
) -> GridSearchResult:
    """Exhaustive (C, gamma) search on one seeded train/test split.

    Standardization and all pairwise machines are fitted on the training
    portion only. Pairwise squared distances are cached per class pair so
    only the kernel exponential is recomputed per gamma. Accuracy ties go
    to the smaller C, then the smaller gamma.
    """
    C_grid = sorted(float(c) for c in C_grid)
    gamma_grid = sorted(float(g) for g in gamma_grid)
    if not C_grid or not gamma_grid:
        raise ValueError("both parameter grids must be non-empty")

    train_idx, test_idx = split_indices(
        len(corpus), train_fraction, seed,
        labels=corpus.labels if stratified else None,
    )
    transform = fit_standardization(corpus.values[train_idx])
    X_train = transform.apply(corpus.values[train_idx])
    X_test = transform.apply(corpus.values[test_idx])
    y_train = corpus.labels[train_idx]
    y_test = corpus.labels[test_idx]

    classes = np.unique(y_train)
    if classes.size < 2:
        raise ValueError("the training split holds fewer than 2 classes")
    pairs = list(itertools.combinations(classes.tolist(), 2))
    pair_data = {}
    for a, b in pairs:
        mask = (y_train == a) | (y_train == b)
        pair_data[(a, b)] = (
            np.flatnonzero(mask),
            np.where(y_train[mask] == a, 1.0, -1.0),
            squared_distances(X_train[mask], X_train[mask]),
            squared_distances(X_test, X_train[mask]),
        )

    class_pos = {int(c): i for i, c in enumerate(classes)}
    table = []
    best = None
    for gamma in gamma_grid:
        kernels = {
            pair: (np.exp(-gamma * d2), np.exp(-gamma * t2))
            for pair, (_, _, d2, t2) in pair_data.items()
        }
        for C in C_grid:
            votes = np.zeros((test_idx.size, classes.size), dtype=np.int64)
            scores = np.zeros((test_idx.size, classes.size), dtype=np.float64)
            all_converged = True

            def solve(pair):
                rows, y_pair, _, _ = pair_data[pair]
                K, K_test = kernels[pair]
                alpha, bias, _, converged = _smo_solve(K, y_pair, C, tol, max_iter)
                return pair, K_test @ (alpha * y_pair) + bias, converged

            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    solved = list(pool.map(solve, pairs))
            else:
                solved = [solve(p) for p in pairs]

            for (a, b), dec, converged in solved:
                all_converged &= converged
                ia, ib = class_pos[int(a)], class_pos[int(b)]
                win_a = dec > 0
                votes[win_a, ia] += 1
                votes[~win_a, ib] += 1
                scores[:, ia] += dec
                scores[:, ib] -= dec

            predicted = np.empty(test_idx.size, dtype=np.int64)
            for i in range(test_idx.size):
                tied = np.flatnonzero(votes[i] == votes[i].max())
                if tied.size > 1:
                    tied = tied[scores[i, tied] == scores[i, tied].max()]
                predicted[i] = classes[tied[0]]
            accuracy = float((predicted == y_test).mean())
            table.append({
                "C": C, "gamma": gamma, "accuracy": accuracy, "converged": all_converged,
            })
            key = (accuracy, -C, -gamma)
            if best is None or key > best[0]:
                best = (key, C, gamma, accuracy)

    _, best_C, best_gamma, best_accuracy = best
    table.sort(key=lambda r: (r["C"], r["gamma"]))
    return GridSearchResult(best_C, best_gamma, best_accuracy, table, train_idx, test_idx)
