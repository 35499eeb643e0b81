"""Koopman matrix estimators on indicator dictionaries.

Everything the least-squares problems need from the data is condensed into
the transition-weight matrix ``omega``: ``omega[i, j]`` is the total weight
of snapshot pairs whose state lies in cell ``i`` and whose image lies in
cell ``j``.  Its row sums are the (diagonal) Gram matrix of the indicator
basis and its column sums the diagonal of the image Gram matrix.

The multiplicative estimator returns a 0/1 matrix with at most one 1 per
row, stored as an index map ``sigma`` (``-1`` marks an empty row), so that
``(K f)[i] = f[sigma[i]]``.
"""

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_pairs, check_points, check_sample_weight
from .dictionary import Dictionary, VoronoiDictionary, assign, fit_kmeans
from .dynsys import SnapshotSet
from .exceptions import CellMergeWarning, DomainError, SingularGramError

_COST_BLOCK = 1 << 22


@dataclass(frozen=True, eq=False)
class TransitionWeights:
    """Transition-weight matrix with its row and column sums.

    Attributes
    ----------
    omega : scipy.sparse.csr_matrix of shape (N, N)
    gram : ndarray of shape (N,)
        Row sums of ``omega``; the diagonal of the state Gram matrix.
    col_mass : ndarray of shape (N,)
        Column sums of ``omega``; the diagonal of the image Gram matrix.
    dictionary : Dictionary or None
        Dictionary the weights refer to, after any empty-cell repair.
    """

    omega: sp.csr_matrix
    gram: np.ndarray
    col_mass: np.ndarray
    dictionary: Optional[Dictionary] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_cells(self):
        return self.omega.shape[0]

    @property
    def total(self):
        return float(self.omega.sum())

    @classmethod
    def from_omega(cls, omega, dictionary=None, meta=None):
        """Build from a dense or sparse non-negative ``(N, N)`` matrix."""
        omega = sp.csr_matrix(omega, dtype=np.float64)
        if omega.shape[0] != omega.shape[1]:
            raise DomainError(f"omega must be square, got {omega.shape}")
        if omega.nnz and omega.data.min() < 0:
            raise DomainError("omega entries must be non-negative")
        omega.sum_duplicates()
        omega.sort_indices()
        gram = np.asarray(omega.sum(axis=1)).ravel()
        col_mass = np.asarray(omega.sum(axis=0)).ravel()
        return cls(omega, gram, col_mass, dictionary, dict(meta or {}))

    def check_gram(self):
        empty = np.flatnonzero(self.gram <= 0)
        if empty.size:
            raise SingularGramError(
                f"{empty.size} cell(s) hold no data point (first: {int(empty[0])}); the Gram matrix is singular"
            )


@dataclass(frozen=True, eq=False)
class KoopmanApprox:
    """A Koopman matrix, either an index map (``multdmd``) or a dense matrix.

    For the dense variant ``matrix`` acts on coefficient vectors, ``g -> matrix @ g``,
    which is also how ``sigma`` acts for the index-map variant.
    """

    variant: str
    sigma: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant == "multdmd":
            sigma = np.asarray(self.sigma, dtype=np.int64).ravel()
            if sigma.size and (sigma.min() < -1 or sigma.max() >= sigma.size):
                raise DomainError("sigma entries must lie in [-1, N)")
            object.__setattr__(self, "sigma", sigma)
        elif self.variant == "dense":
            A = np.asarray(self.matrix)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise DomainError(f"dense Koopman matrix must be square, got {A.shape}")
            object.__setattr__(self, "matrix", A)
        else:
            raise DomainError(f"unknown variant {self.variant!r}")

    @property
    def n_cells(self):
        return self.sigma.size if self.variant == "multdmd" else self.matrix.shape[0]

    @property
    def nnz(self):
        if self.variant == "multdmd":
            return int(np.count_nonzero(self.sigma >= 0))
        return int(np.count_nonzero(self.matrix))

    def apply(self, f):
        """Matrix-vector product ``K f``."""
        f = np.asarray(f)
        if f.shape[0] != self.n_cells:
            raise DomainError(f"vector length {f.shape[0]} does not match N={self.n_cells}")
        if self.variant == "dense":
            return self.matrix @ f
        out = np.zeros_like(f)
        rows = np.flatnonzero(self.sigma >= 0)
        out[rows] = f[self.sigma[rows]]
        return out

    def power_apply(self, f, n):
        for _ in range(n):
            f = self.apply(f)
        return f

    def to_sparse(self):
        if self.variant == "dense":
            return sp.csr_matrix(self.matrix)
        rows = np.flatnonzero(self.sigma >= 0)
        N = self.n_cells
        return sp.csr_matrix((np.ones(rows.size), (rows, self.sigma[rows])), shape=(N, N))

    def to_dense(self):
        return self.matrix if self.variant == "dense" else self.to_sparse().toarray()


def data_hash(S):
    h = hashlib.sha256()
    for arr in (S.X, S.Y, S.weights):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


def accumulate(S, D, repair="merge", workers=1):
    """Transition weights of snapshot set ``S`` on dictionary ``D``.

    Cells that receive no state ``x_m`` have a zero Gram entry.  With
    ``repair="merge"`` such cells are removed from the dictionary (their
    region falls to the neighbouring centroids) and the pairs are
    reassigned; with ``repair="none"`` the zero entries are kept and the
    estimators will refuse the weights.
    """
    if S.count == 0:
        raise DomainError("empty snapshot set")
    if S.dim != D.dim:
        raise DomainError(f"snapshot dimension {S.dim} does not match dictionary dimension {D.dim}")
    if repair not in ("merge", "none"):
        raise DomainError(f"repair must be 'merge' or 'none', got {repair!r}")
    i = assign(D, S.X, workers)
    empty = np.flatnonzero(np.bincount(i, minlength=D.n_cells) == 0)
    if empty.size and repair == "merge":
        warnings.warn(
            f"{empty.size} cell(s) contain no state; merged into neighbouring cells "
            f"(N {D.n_cells} -> {D.n_cells - empty.size})",
            CellMergeWarning,
            stacklevel=2,
        )
        D = D.drop(empty)
        i = assign(D, S.X, workers)
    j = assign(D, S.Y, workers)
    N = D.n_cells
    omega = sp.coo_matrix((S.weights, (i, j)), shape=(N, N)).tocsr()
    meta = {"data_hash": data_hash(S), "merged_cells": [int(c) for c in empty] if repair == "merge" else []}
    return TransitionWeights.from_omega(omega, D, meta)


def _row_costs(T, rows):
    G = T.gram
    block = T.omega[rows].toarray()
    return (G[rows, None] - 2.0 * block) / G[None, :]


def fit_multdmd(T, allow_empty_rows=False):
    """Multiplicative Koopman matrix from transition weights.

    Row ``i`` gets its 1 in column ``argmin_j (G_i - 2 omega_ij) / G_j``,
    smallest ``j`` on ties.  With ``allow_empty_rows`` the row is left empty
    whenever that minimum is non-negative, which then attains the exact
    optimum of the constrained least-squares problem.

    Returns
    -------
    KoopmanApprox
        The ``multdmd`` variant.
    """
    T.check_gram()
    N = T.n_cells
    sigma = np.empty(N, dtype=np.int64)
    step = max(1, _COST_BLOCK // max(N, 1))
    for start in range(0, N, step):
        rows = np.arange(start, min(N, start + step))
        cost = _row_costs(T, rows)
        j0 = np.argmin(cost, axis=1)
        if allow_empty_rows:
            cmin = cost[np.arange(rows.size), j0]
            j0 = np.where(cmin >= 0, -1, j0)
        sigma[rows] = j0
    meta = {"estimator": "multdmd", "allow_empty_rows": bool(allow_empty_rows)}
    meta.update({k: v for k, v in T.meta.items() if k == "data_hash"})
    return KoopmanApprox("multdmd", sigma=sigma, meta=meta)


def objective(T, K):
    """Discretized weighted least-squares objective of ``K`` on ``T``.

    Equals ``|| W^1/2 Psi_Y G^-1/2 - W^1/2 Psi_X K G^-1/2 ||_F^2`` evaluated
    through ``omega``, the Gram diagonal and the column masses only.
    """
    T.check_gram()
    if K.n_cells != T.n_cells:
        raise DomainError(f"operator size {K.n_cells} does not match N={T.n_cells}")
    G = T.gram
    base = float(np.sum(T.col_mass / G))
    if K.variant == "multdmd":
        rows = np.flatnonzero(K.sigma >= 0)
        cols = K.sigma[rows]
        hit = np.asarray(T.omega[rows, cols]).ravel() if rows.size else np.zeros(0)
        return base + float(np.sum((G[rows] - 2.0 * hit) / G[cols]))
    A = K.matrix
    W = T.omega.tocoo()
    cross = float(np.real(np.sum(W.data * A[W.row, W.col] / G[W.col])))
    quad = float(np.sum(G[:, None] * np.abs(A) ** 2 / G[None, :]))
    return base - 2.0 * cross + quad


def fit_edmd_indicator(T):
    """EDMD on the indicator dictionary: ``diag(gram)^-1 omega`` (row-stochastic)."""
    T.check_gram()
    K = T.omega.toarray() / T.gram[:, None]
    meta = {"estimator": "edmd"}
    meta.update({k: v for k, v in T.meta.items() if k == "data_hash"})
    return KoopmanApprox("dense", matrix=K, meta=meta)


def fit_exact_dmd(X, Y=None, rtol=1e-12):
    """Least-squares linear map on raw states: ``A = pinv(X) Y`` so that ``Y ~ X A``.

    ``X`` may be a :class:`SnapshotSet`.  Singular values below ``rtol``
    times the largest are discarded, so rank-deficient data never fail.
    """
    if isinstance(X, SnapshotSet):
        X, Y = X.X, X.Y
    X, Y = check_pairs(X, Y)
    if X.shape[0] < X.shape[1]:
        raise DomainError(f"exact DMD needs at least d={X.shape[1]} pairs, got {X.shape[0]}")
    A = scipy.linalg.pinv(X, atol=0.0, rtol=rtol) @ Y
    return KoopmanApprox("dense", matrix=A, meta={"estimator": "exact_dmd"})


class _IndicatorKoopman(BaseEstimator):
    """Shared fit logic for estimators on a Voronoi indicator dictionary."""

    def __init__(
        self,
        n_cells=100,
        dictionary=None,
        subsample=1,
        n_init=10,
        max_iter=100,
        repair="merge",
        random_state=None,
        workers=1,
    ):
        self.n_cells = n_cells
        self.dictionary = dictionary
        self.subsample = subsample
        self.n_init = n_init
        self.max_iter = max_iter
        self.repair = repair
        self.random_state = random_state
        self.workers = workers

    def _resolve_dictionary(self, X):
        d = self.dictionary
        if isinstance(d, Dictionary):
            return d
        if isinstance(d, VoronoiDictionary):
            if not hasattr(d, "dictionary_"):
                d.fit(X)
            return d.dictionary_
        if d is not None:
            return Dictionary(check_points(d, "dictionary"))
        return fit_kmeans(
            X, self.n_cells, self.random_state, self.max_iter, self.subsample, self.n_init, self.workers
        )

    def _fit_weights(self, X, y, sample_weight):
        if y is None:
            X = check_points(X, ensure_min_samples=2)
            X, y = X[:-1], X[1:]
        X, Y = check_pairs(X, y)
        w = check_sample_weight(sample_weight, X.shape[0])
        S = SnapshotSet(X, Y, w)
        D = self._resolve_dictionary(X)
        T = accumulate(S, D, self.repair, self.workers)
        self.transition_weights_ = T
        self.dictionary_ = T.dictionary
        self.cluster_centers_ = T.dictionary.centroids
        self.n_cells_ = T.n_cells
        return T

    def transform(self, X):
        """Cell index of every row of ``X``."""
        check_is_fitted(self, "koopman_")
        return assign(self.dictionary_, check_points(X), self.workers)


class MultDMD(_IndicatorKoopman):
    """Multiplicative DMD estimator.

    Parameters
    ----------
    n_cells : int
        Number of Voronoi cells when the dictionary is learned by k-means.
    dictionary : Dictionary, VoronoiDictionary, array-like or None
        Fixed centroids; learned from ``X`` when None.
    allow_empty_rows : bool
        Leave rows empty when that is optimal instead of always placing a 1.
    repair : {"merge", "none"}
        What to do with cells that contain no state.

    Attributes
    ----------
    koopman_ : KoopmanApprox
    sigma_ : ndarray of shape (n_cells_,)
        Index map of the fitted operator, ``-1`` for empty rows.
    """

    def __init__(
        self,
        n_cells=100,
        dictionary=None,
        allow_empty_rows=False,
        subsample=1,
        n_init=10,
        max_iter=100,
        repair="merge",
        random_state=None,
        workers=1,
    ):
        super().__init__(n_cells, dictionary, subsample, n_init, max_iter, repair, random_state, workers)
        self.allow_empty_rows = allow_empty_rows

    def fit(self, X, y=None, sample_weight=None):
        """Fit on pairs ``(X, y)``, or on consecutive rows of ``X`` when ``y`` is None."""
        T = self._fit_weights(X, y, sample_weight)
        self.koopman_ = fit_multdmd(T, self.allow_empty_rows)
        self.sigma_ = self.koopman_.sigma
        return self

    def spectrum(self, min_support=0, normalize="euclidean", compute_vectors=True):
        from .spectral import cycle_spectrum

        check_is_fitted(self, "koopman_")
        gram = self.transition_weights_.gram if normalize == "gram" else None
        return cycle_spectrum(self.koopman_, gram=gram, min_support=min_support, compute_vectors=compute_vectors)

    @property
    def eigenvalues_(self):
        return self.spectrum(compute_vectors=False).eigenvalues

    def predict(self, X):
        """One-step forecast: centroid of the image cell ``sigma(cell(x))``; NaN for empty rows."""
        cells = self.transform(X)
        target = self.sigma_[cells]
        out = np.full((cells.size, self.dictionary_.dim), np.nan)
        ok = target >= 0
        out[ok] = self.cluster_centers_[target[ok]]
        return out

    def score(self, X, y=None, sample_weight=None):
        """Negative constrained objective of the fitted operator on new pairs."""
        check_is_fitted(self, "koopman_")
        if y is None:
            X = check_points(X, ensure_min_samples=2)
            X, y = X[:-1], X[1:]
        S = SnapshotSet(*check_pairs(X, y), check_sample_weight(sample_weight, len(X)))
        T = accumulate(S, self.dictionary_, "none", self.workers)
        return -objective(T, self.koopman_)


class IndicatorEDMD(_IndicatorKoopman):
    """EDMD on the same Voronoi indicator dictionary (baseline)."""

    def fit(self, X, y=None, sample_weight=None):
        T = self._fit_weights(X, y, sample_weight)
        self.koopman_ = fit_edmd_indicator(T)
        self.operator_ = self.koopman_.matrix
        return self

    def spectrum(self, min_support=0):
        from .spectral import dense_eig

        check_is_fitted(self, "koopman_")
        return dense_eig(self.koopman_, min_support=min_support)

    @property
    def eigenvalues_(self):
        return self.spectrum().eigenvalues

    def predict(self, X):
        """Conditional-mean forecast ``sum_j K[i, j] centroid_j`` for the cell ``i`` of each row."""
        cells = self.transform(X)
        return self.operator_[cells] @ self.cluster_centers_


class ExactDMD(BaseEstimator):
    """Linear least-squares DMD on raw (or POD-compressed) states."""

    def __init__(self, rtol=1e-12):
        self.rtol = rtol

    def fit(self, X, y=None):
        if y is None:
            X = check_points(X, ensure_min_samples=2)
            X, y = X[:-1], X[1:]
        self.koopman_ = fit_exact_dmd(X, y, self.rtol)
        self.operator_ = self.koopman_.matrix
        self.n_features_in_ = self.operator_.shape[0]
        return self

    @property
    def eigenvalues_(self):
        check_is_fitted(self, "koopman_")
        from .spectral import dense_eig

        return dense_eig(self.koopman_).eigenvalues

    def predict(self, X):
        check_is_fitted(self, "koopman_")
        return check_points(X) @ self.operator_
