"""Proper orthogonal decomposition of snapshot fields and physical Koopman modes.

Snapshot matrices are stored one snapshot per row, shape ``(T, D)``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_positive_int
from .dictionary import assign
from .exceptions import DegenerateDataError, DomainError


@dataclass(frozen=True, eq=False)
class PODBasis:
    """Mean field, orthonormal modes (columns) and singular values."""

    mean_field: np.ndarray
    modes: np.ndarray
    singular_values: np.ndarray
    energy_fractions: np.ndarray

    @property
    def rank(self):
        return self.modes.shape[1]

    @property
    def n_features(self):
        return self.modes.shape[0]


def fit_pod(fields, r, center=True):
    """Rank-``r`` POD of a ``(T, D)`` snapshot matrix.

    The temporal mean is subtracted first when ``center`` is set.  Every
    mode is signed so that its entry of largest magnitude is positive.
    ``energy_fractions`` are cumulative shares of the total variance.
    """
    F = check_points(fields, "fields", ensure_min_samples=2)
    T, D = F.shape
    r = check_positive_int(r, "r")
    if r > min(T, D):
        raise DomainError(f"rank r={r} exceeds min(T, D)={min(T, D)}")
    mean = F.mean(axis=0) if center else np.zeros(D)
    Fc = F - mean
    _, s, Vt = np.linalg.svd(Fc, full_matrices=False)
    if not s[0] > 0:
        raise DegenerateDataError("snapshot matrix has no variance")
    if s[r - 1] <= s[0] * max(T, D) * np.finfo(float).eps:
        raise DegenerateDataError(f"data have numerical rank below r={r}")
    modes = Vt[:r].T.copy()
    lead = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[lead, np.arange(r)])
    modes *= signs
    energy = np.cumsum(s[:r] ** 2) / np.sum(s**2)
    return PODBasis(mean, modes, s[:r].copy(), energy)


def project(B, fields):
    """POD coefficients ``(T, r)`` of the snapshots."""
    F = np.atleast_2d(np.asarray(fields, dtype=np.float64))
    if F.shape[1] != B.n_features:
        raise DomainError(f"fields have {F.shape[1]} features, basis has {B.n_features}")
    return (F - B.mean_field) @ B.modes


def reconstruct(B, coeffs):
    """Snapshots rebuilt from POD coefficients, mean field added back."""
    C = np.atleast_2d(np.asarray(coeffs))
    if C.shape[1] != B.rank:
        raise DomainError(f"coefficients have {C.shape[1]} columns, basis has rank {B.rank}")
    return C @ B.modes.T + B.mean_field


class POD(TransformerMixin, BaseEstimator):
    """Transformer form of :func:`fit_pod` (rows are snapshots)."""

    def __init__(self, n_modes=3, center=True):
        self.n_modes = n_modes
        self.center = center

    def fit(self, X, y=None):
        self.basis_ = fit_pod(X, self.n_modes, self.center)
        self.components_ = self.basis_.modes.T
        self.mean_ = self.basis_.mean_field
        self.singular_values_ = self.basis_.singular_values
        self.n_features_in_ = self.basis_.n_features
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        return project(self.basis_, X)

    def inverse_transform(self, X):
        check_is_fitted(self, "basis_")
        return reconstruct(self.basis_, X)


def koopman_modes(R, S, D, full_fields=None, pod=None, workers=1):
    """Physical-space Koopman modes by correlation with the eigenfunctions.

    ``mode_k = sum_m w_m conj(phi_k(x_m)) field_m`` where ``phi_k(x)`` is the
    eigenvector entry of the cell containing ``x``.  Fields default to the
    states ``S.X``; with a ``pod`` basis the coefficient-space modes are
    mapped back to physical space.  Each mode is scaled to unit maximum
    magnitude.

    Returns
    -------
    ndarray of shape (n_eigenpairs, n_features), complex
    """
    if R.eigvecs is None:
        raise DomainError("Koopman modes need eigenvectors")
    if R.eigvecs.shape[0] != D.n_cells:
        raise DomainError("eigenvectors do not match the dictionary")
    if full_fields is not None:
        fields = np.asarray(full_fields, dtype=np.float64)
        if fields.ndim != 2 or fields.shape[0] != S.count:
            raise DomainError(f"full_fields must have one row per snapshot pair ({S.count})")
    else:
        fields = S.X
    cells = assign(D, S.X, workers)
    w = S.weights
    # sum the weighted fields per cell, then correlate with the eigenvectors
    weighted = sp.csr_matrix((w, (cells, np.arange(S.count))), shape=(D.n_cells, S.count))
    cell_sums = weighted @ fields
    Vc = np.conj(R.eigvecs)
    modes = Vc.T @ cell_sums
    if full_fields is None and pod is not None:
        mass = Vc.T @ np.bincount(cells, weights=w, minlength=D.n_cells)
        modes = modes @ pod.modes.T + mass[:, None] * pod.mean_field[None, :]
    peak = np.abs(modes).max(axis=1, keepdims=True)
    return np.divide(modes, peak, out=np.zeros_like(modes), where=peak > 0)
