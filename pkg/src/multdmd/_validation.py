"""Input validation shared by estimators and the functional API."""

import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import DomainError


def check_points(X, name="X", ensure_min_samples=1):
    """Return ``X`` as a finite 2-D float array."""
    try:
        return check_array(
            X, dtype=np.float64, ensure_min_samples=ensure_min_samples, input_name=name
        )
    except ValueError as exc:
        raise DomainError(str(exc)) from exc


def check_pairs(X, Y):
    X = check_points(X, "X")
    Y = check_points(Y, "Y")
    if X.shape != Y.shape:
        raise DomainError(f"X and Y must have the same shape, got {X.shape} and {Y.shape}")
    return X, Y


def check_sample_weight(sample_weight, n_samples, normalize=True):
    """Positive quadrature weights; uniform ``1/M`` when ``sample_weight`` is None."""
    if sample_weight is None:
        return np.full(n_samples, 1.0 / n_samples)
    w = np.asarray(sample_weight, dtype=np.float64).ravel()
    if w.shape[0] != n_samples:
        raise DomainError(f"expected {n_samples} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise DomainError("weights must be finite and strictly positive")
    if normalize:
        w = w / w.sum()
    return w


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_vector(g, n, name="g", dtype=np.complex128):
    g = np.asarray(g, dtype=dtype).ravel()
    if g.shape[0] != n:
        raise DomainError(f"{name} must have length {n}, got {g.shape[0]}")
    return g
