"""Piecewise-constant indicator dictionaries on Voronoi cells.

A dictionary is a set of centroids; basis function ``j`` is the indicator of
the Voronoi cell of centroid ``j``.  Centroids come from k-means (k-means++
seeding followed by Lloyd iterations) or are supplied directly.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_positive_int
from .exceptions import DomainError, InfeasibleError

_CHUNK = 1 << 16
# tree candidates per query; exact distances are recomputed on these
_N_CANDIDATES = 4


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Voronoi centroids defining the indicator basis.

    Attributes
    ----------
    centroids : ndarray of shape (N, d)
    seed : int or None
        Seed the centroids were fitted with, if any.
    n_iter : int
        Lloyd iterations of the retained run.
    inertia_history : tuple of float
        k-means objective after every assignment step of the retained run.
    """

    centroids: np.ndarray
    seed: object = None
    n_iter: int = 0
    inertia_history: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        C = check_points(self.centroids, "centroids")
        object.__setattr__(self, "centroids", C)

    @property
    def n_cells(self):
        return self.centroids.shape[0]

    @property
    def dim(self):
        return self.centroids.shape[1]

    @property
    def inertia(self):
        return self.inertia_history[-1] if self.inertia_history else float("nan")

    @cached_property
    def _tree(self):
        return cKDTree(self.centroids)

    def min_separation(self):
        if self.n_cells < 2:
            return np.inf
        dist, _ = self._tree.query(self.centroids, k=2)
        return float(dist[:, 1].min())

    def drop(self, cells):
        """Dictionary without the given cells (their points fall to the nearest remaining centroid)."""
        keep = np.setdiff1d(np.arange(self.n_cells), np.asarray(cells, dtype=np.int64))
        meta = dict(self.meta, dropped=sorted(int(c) for c in cells))
        return Dictionary(self.centroids[keep], self.seed, self.n_iter, self.inertia_history, meta)


def _sq_dist(points, centroids):
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("mkd,mkd->mk", diff, diff)


def _brute_assign(points, centroids):
    labels = np.empty(points.shape[0], dtype=np.int64)
    step = max(1, _CHUNK // max(1, centroids.shape[0]))
    for start in range(0, points.shape[0], step):
        labels[start : start + step] = np.argmin(_sq_dist(points[start : start + step], centroids), axis=1)
    return labels


def _assign_many(D, points, workers=1, return_sq_dist=False):
    C = D.centroids
    N = C.shape[0]
    M = points.shape[0]
    labels = np.empty(M, dtype=np.int64)
    best = np.empty(M)
    if N == 1:
        labels[:] = 0
        best[:] = np.einsum("md,md->m", points - C[0], points - C[0])
        return (labels, best) if return_sq_dist else labels
    k = min(N, _N_CANDIDATES)
    for start in range(0, M, _CHUNK):
        pts = points[start : start + _CHUNK]
        _, cand = D._tree.query(pts, k=k, workers=workers)
        diff = pts[:, None, :] - C[cand]
        d2 = np.einsum("mkd,mkd->mk", diff, diff)
        dmin = d2.min(axis=1)
        lab = np.where(d2 == dmin[:, None], cand, N).min(axis=1)
        if k < N:
            # more near-ties may hide beyond the k-th candidate: rescan those rows exactly
            unsure = np.flatnonzero(d2[:, -1] <= dmin * (1.0 + 1e-9) + 1e-300)
            if unsure.size:
                full = _sq_dist(pts[unsure], C)
                lab[unsure] = np.argmin(full, axis=1)
                dmin[unsure] = full.min(axis=1)
        labels[start : start + _CHUNK] = lab
        best[start : start + _CHUNK] = dmin
    return (labels, best) if return_sq_dist else labels


def assign(D, points, workers=1):
    """Index of the Voronoi cell containing each point.

    The nearest centroid in Euclidean distance wins; exact ties go to the
    smallest index.  A single point (1-D input) returns an ``int``.
    """
    arr = np.asarray(points, dtype=np.float64)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != D.dim:
        raise DomainError(f"points have dimension {arr.shape[1]}, dictionary has {D.dim}")
    labels = _assign_many(D, arr, workers)
    return int(labels[0]) if single else labels


def _kmeans_plusplus(X, n_cells, rng):
    n = X.shape[0]
    idx = np.empty(n_cells, dtype=np.int64)
    idx[0] = rng.integers(n)
    d2 = np.einsum("md,md->m", X - X[idx[0]], X - X[idx[0]])
    for c in range(1, n_cells):
        cum = np.cumsum(d2)
        total = cum[-1]
        if not total > 0:
            raise InfeasibleError("fewer distinct points than requested cells")
        pick = int(np.searchsorted(cum, rng.random() * total, side="right"))
        pick = min(pick, n - 1)
        if d2[pick] <= 0:
            pick = int(np.flatnonzero(d2 > 0)[-1])
        idx[c] = pick
        diff = X - X[pick]
        np.minimum(d2, np.einsum("md,md->m", diff, diff), out=d2)
    return X[idx].copy()


def _lloyd(X, centers, max_iter, workers):
    n_cells = centers.shape[0]
    D = Dictionary(centers)
    labels, d2 = _assign_many(D, X, workers, return_sq_dist=True)
    history = [float(d2.sum())]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        counts = np.bincount(labels, minlength=n_cells)
        sums = np.column_stack(
            [np.bincount(labels, weights=X[:, k], minlength=n_cells) for k in range(X.shape[1])]
        )
        new = centers.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled, None]
        empty = np.flatnonzero(~filled)
        if empty.size:
            # reseed on the points farthest from their current centroid
            order = np.argsort(-d2, kind="stable")
            taken = []
            for i in order:
                if len(taken) == empty.size:
                    break
                if not any(np.array_equal(X[i], X[j]) for j in taken):
                    taken.append(i)
            new[empty[: len(taken)]] = X[taken]
        centers = new
        D = Dictionary(centers)
        new_labels, d2 = _assign_many(D, X, workers, return_sq_dist=True)
        history.append(float(d2.sum()))
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return centers, labels, history, n_iter


def fit_kmeans(X, n_cells, seed=None, max_iter=100, subsample=1, n_init=10, workers=1):
    """Fit Voronoi centroids with k-means++ seeding and Lloyd iterations.

    Parameters
    ----------
    X : array-like of shape (M, d)
    n_cells : int
        Number of cells ``N``.
    seed : int or None
        Seed of the generator driving the k-means++ draws.
    max_iter : int
        Lloyd iteration cap; runs stop earlier at an assignment fixpoint.
    subsample : int
        Keep every ``subsample``-th point for clustering.
    n_init : int
        Independent seedings; the run with the lowest objective is kept.

    Returns
    -------
    Dictionary
    """
    X = check_points(X)
    if isinstance(n_cells, (int, np.integer)) and n_cells <= 0:
        raise DomainError(f"n_cells must be positive, got {n_cells}")
    n_cells = check_positive_int(n_cells, "n_cells")
    max_iter = check_positive_int(max_iter, "max_iter")
    subsample = check_positive_int(subsample, "subsample")
    n_init = check_positive_int(n_init, "n_init")
    Xs = np.ascontiguousarray(X[::subsample])
    n_distinct = np.unique(Xs, axis=0).shape[0]
    if n_cells > n_distinct:
        raise InfeasibleError(
            f"n_cells={n_cells} exceeds the {n_distinct} distinct points available for clustering"
        )
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        init = _kmeans_plusplus(Xs, n_cells, rng)
        run = _lloyd(Xs, init, max_iter, workers)
        if best is None or run[2][-1] < best[2][-1]:
            best = run
    centers, _, history, n_iter = best
    meta = {"subsample": subsample, "n_init": n_init, "max_iter": max_iter}
    return Dictionary(centers, seed, n_iter, tuple(history), meta)


def arc_dictionary(n_cells, radius=1.0, offset=0.5):
    """Centroids evenly spaced on a circle at angles ``2 pi (k + offset) / n_cells``."""
    n_cells = check_positive_int(n_cells, "n_cells")
    angles = 2.0 * np.pi * (np.arange(n_cells) + offset) / n_cells
    C = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    return Dictionary(C, meta={"kind": "arcs"})


def distortion(D, X, workers=1):
    """Mean Euclidean distance from each point to its nearest centroid."""
    X = check_points(X)
    _, d2 = _assign_many(D, X, workers, return_sq_dist=True)
    return float(np.sqrt(d2).mean())


def distortion_curve(X, n_list, seed=None, **kmeans_params):
    """k-means distortion for each cell count in ``n_list``.

    Returns a list of ``(N, distortion)`` pairs, distortion being the mean
    (not squared) distance of every point of ``X`` to its nearest centroid.
    """
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise DomainError("n_list must not be empty")
    if any(b < a for a, b in zip(n_list, n_list[1:])):
        raise DomainError("n_list must be ascending")
    X = check_points(X)
    workers = kmeans_params.get("workers", 1)
    return [(n, distortion(fit_kmeans(X, n, seed, **kmeans_params), X, workers)) for n in n_list]


def indicator_matrix(D, points, workers=1):
    """Sparse ``(M, N)`` matrix of basis values: one 1 per row."""
    labels = assign(D, np.atleast_2d(points), workers)
    M = labels.shape[0]
    return sp.csr_matrix((np.ones(M), (np.arange(M), labels)), shape=(M, D.n_cells))


class VoronoiDictionary(ClusterMixin, TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_kmeans`.

    ``predict`` returns cell indices and ``transform`` the sparse indicator
    features, so the dictionary slots into a scikit-learn pipeline.
    """

    def __init__(self, n_cells=100, max_iter=100, n_init=10, subsample=1, random_state=None, workers=1):
        self.n_cells = n_cells
        self.max_iter = max_iter
        self.n_init = n_init
        self.subsample = subsample
        self.random_state = random_state
        self.workers = workers

    def fit(self, X, y=None):
        self.dictionary_ = fit_kmeans(
            X, self.n_cells, self.random_state, self.max_iter, self.subsample, self.n_init, self.workers
        )
        self.cluster_centers_ = self.dictionary_.centroids
        self.inertia_ = self.dictionary_.inertia
        self.n_iter_ = self.dictionary_.n_iter
        self.labels_ = assign(self.dictionary_, X, self.workers)
        return self

    def predict(self, X):
        check_is_fitted(self, "dictionary_")
        return assign(self.dictionary_, check_points(X), self.workers)

    def transform(self, X):
        check_is_fitted(self, "dictionary_")
        return indicator_matrix(self.dictionary_, check_points(X), self.workers)
