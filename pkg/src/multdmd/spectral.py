"""Spectra, residuals and spectral-measure moments of Koopman approximations.

For the index-map operator ``(K f)[i] = f[sigma[i]]`` the nonzero spectrum is
read off the functional graph ``i -> sigma[i]``: a cycle of length ``L``
contributes the ``L``-th roots of unity, and the matching eigenvectors live
on the cycle's basin (the cycle plus every tree draining into it).  Nodes
off the cycles carry the zero eigenvalue.
"""

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._validation import check_positive_int, check_vector
from .dictionary import assign
from .exceptions import (
    ConditioningWarning,
    DomainError,
    SpectralError,
    UndefinedResidualError,
    UnsupportedSamplingError,
)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class Cycle:
    length: int
    members: np.ndarray
    basin_size: int


@dataclass(frozen=True, eq=False)
class SpectralResult:
    """Eigenvalues with eigenvector coefficients and per-pair diagnostics.

    For index-map operators every eigenvalue is ``exp(2 pi i k / L)`` with
    integers ``k = phase_index`` and ``L = cycle_lengths``; for dense
    operators those two arrays are zero.
    """

    eigenvalues: np.ndarray
    eigvecs: Optional[np.ndarray]
    support_sizes: np.ndarray
    cycle_lengths: np.ndarray
    phase_index: np.ndarray
    residuals: Optional[np.ndarray] = None
    cycles: tuple = ()
    zero_multiplicity: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.eigenvalues.size

    def subset(self, mask):
        mask = np.asarray(mask)
        return replace(
            self,
            eigenvalues=self.eigenvalues[mask],
            eigvecs=None if self.eigvecs is None else self.eigvecs[:, mask],
            support_sizes=self.support_sizes[mask],
            cycle_lengths=self.cycle_lengths[mask],
            phase_index=self.phase_index[mask],
            residuals=None if self.residuals is None else self.residuals[mask],
        )


def functional_graph(sigma):
    """Cycle/tree decomposition of ``i -> sigma[i]`` (``-1`` = no successor).

    Returns
    -------
    cycles : list of ndarray
        Members of each cycle in orbit order, starting from the node first reached.
    basin : ndarray of int
        Index of the cycle each node drains into, ``-1`` for nodes whose orbit dies.
    phase : ndarray of int
        For basin nodes, ``(position of entry node on its cycle - steps to reach it) mod L``.
    """
    sigma = np.asarray(sigma, dtype=np.int64)
    N = sigma.size
    succ = sigma.tolist()
    state = [0] * N  # 0 unseen, 1 on current path, 2 resolved
    basin = [-1] * N
    phase = [0] * N
    cycles = []
    lengths = []
    for start in range(N):
        if state[start]:
            continue
        path = []
        i = start
        while i >= 0 and state[i] == 0:
            state[i] = 1
            path.append(i)
            i = succ[i]
        if i >= 0 and state[i] == 1:
            # closed a new cycle at node i
            k0 = path.index(i)
            members = path[k0:]
            c = len(cycles)
            cycles.append(np.asarray(members, dtype=np.int64))
            lengths.append(len(members))
            for pos, node in enumerate(members):
                basin[node] = c
                phase[node] = pos
                state[node] = 2
            path = path[:k0]
            end = i
        else:
            end = i
        # propagate back along the tail
        if end >= 0 and basin[end] >= 0:
            c = basin[end]
            L = lengths[c]
            p = phase[end]
            for node in reversed(path):
                p = (p - 1) % L
                basin[node] = c
                phase[node] = p
                state[node] = 2
        else:
            for node in path:
                state[node] = 2
    return cycles, np.asarray(basin, dtype=np.int64), np.asarray(phase, dtype=np.int64)


def _unit_root(num, L):
    """``exp(2 pi i num / L)`` from the reduced fraction, so equal fractions give equal floats."""
    num = np.mod(num, L)
    signed = np.where(2 * num > L, num - L, num)
    angle = TWO_PI * (signed / L)
    return np.exp(1j * angle), angle, signed


def _order(eigenvalues, angle=None):
    mod = np.round(np.abs(eigenvalues), 12)
    if angle is None:
        angle = np.angle(eigenvalues)
    return np.lexsort((np.round(angle, 12), -mod))


def cycle_spectrum(K, gram=None, min_support=0, compute_vectors=True):
    """Spectrum of an index-map Koopman matrix from its functional graph.

    Parameters
    ----------
    K : KoopmanApprox
        ``multdmd`` variant.
    gram : ndarray, optional
        Gram diagonal; when given, eigenvectors are normalized in the
        ``G``-weighted norm instead of the Euclidean norm.
    min_support : int
        Drop eigenvalues whose eigenvector is supported on fewer cells.
    compute_vectors : bool
        Skip the ``N x K`` eigenvector matrix when False.

    Returns
    -------
    SpectralResult
        Nonzero eigenvalues only; ``zero_multiplicity`` counts the rest.
    """
    if K.variant != "multdmd":
        raise DomainError("cycle_spectrum needs the multdmd variant")
    sigma = K.sigma
    N = sigma.size
    cyc, basin, phase = functional_graph(sigma)
    basin_sizes = np.bincount(basin[basin >= 0], minlength=len(cyc)) if len(cyc) else np.zeros(0, int)
    cycles = tuple(Cycle(len(m), m, int(b)) for m, b in zip(cyc, basin_sizes))
    zero_mult = N - sum(c.length for c in cycles)

    keep = [c for c, cy in enumerate(cycles) if cy.basin_size >= min_support]
    owner = np.concatenate([np.full(cycles[c].length, c) for c in keep]) if keep else np.zeros(0, int)
    num = np.concatenate([np.arange(cycles[c].length) for c in keep]) if keep else np.zeros(0, int)
    lengths = np.array([cycles[c].length for c in owner], dtype=np.int64)
    lam, angle, signed = _unit_root(num, np.maximum(lengths, 1))
    order = np.lexsort((owner, angle))
    owner, lengths, signed, lam = owner[order], lengths[order], signed[order], lam[order]
    support = basin_sizes[owner].astype(np.int64) if owner.size else np.zeros(0, np.int64)

    V = None
    if compute_vectors:
        V = np.zeros((N, owner.size), dtype=np.complex128)
        weights = np.ones(N) if gram is None else np.asarray(gram, dtype=np.float64)
        for col, (c, a, L) in enumerate(zip(owner, signed, lengths)):
            nodes = np.flatnonzero(basin == c)
            vals, _, _ = _unit_root(a * phase[nodes], L)
            V[nodes, col] = vals / np.sqrt(weights[nodes].sum())
    meta = {"operator": "multdmd", "normalization": "euclidean" if gram is None else "gram"}
    return SpectralResult(lam, V, support, lengths, signed, None, cycles, int(zero_mult), meta)


def dense_eig(K, min_support=0, support_tol=1e-10):
    """Full eigendecomposition of a dense Koopman matrix.

    Eigenvectors have unit Euclidean norm; the support of an eigenvector is
    the number of entries above ``support_tol`` times its largest entry.
    Ordered by descending modulus, then ascending argument.
    """
    A = K.matrix if hasattr(K, "matrix") else np.asarray(K)
    try:
        lam, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(lam)):
        raise SpectralError("eigensolver returned non-finite eigenvalues")
    V = V / np.linalg.norm(V, axis=0)
    order = _order(lam)
    lam, V = lam[order], V[:, order]
    mags = np.abs(V)
    support = np.count_nonzero(mags > support_tol * mags.max(axis=0), axis=0)
    n = lam.size
    R = SpectralResult(
        lam.astype(np.complex128), V, support, np.zeros(n, np.int64), np.zeros(n, np.int64), meta={"operator": "dense"}
    )
    return R.subset(support >= min_support) if min_support else R


def _quadratic_forms(G, V, T):
    AV = T.omega @ V
    gAg = np.sum(np.conj(V) * AV, axis=0)
    gBg = np.sum(T.col_mass[:, None] * np.abs(V) ** 2, axis=0)
    gGg = np.sum(G[:, None] * np.abs(V) ** 2, axis=0)
    return gAg, gBg, gGg


def _residual_numerators(lam, V, T):
    # g*[B - lam A* - conj(lam) A + |lam|^2 G] g == sum_ij omega_ij |g_j - lam g_i|^2,
    # summed term by term so exact eigenpairs give an exact zero instead of cancellation noise
    W = T.omega.tocoo()
    diff = V[W.col, :] - lam[None, :] * V[W.row, :]
    return W.data @ (np.abs(diff) ** 2)


def _denominators(gAg, gGg, denominator):
    if denominator not in ("paper", "gram"):
        raise DomainError(f"denominator must be 'paper' or 'gram', got {denominator!r}")
    return np.abs(gAg) if denominator == "paper" else np.real(gGg)


def residual(lam, g, T, denominator="paper"):
    """Relative residual of the candidate eigenpair ``(lam, g)``.

    ``res^2 = g*[B - lam A* - conj(lam) A + |lam|^2 G] g / den`` with
    ``G = diag(gram)``, ``B = diag(col_mass)`` and ``A = omega``.  The
    denominator is ``|g* A g|`` (``"paper"``) or ``g* G g`` (``"gram"``).
    The numerator is evaluated as ``sum_ij omega_ij |g_j - lam g_i|^2``,
    the same quantity without the cancellation of the expanded form.
    """
    g = check_vector(g, T.n_cells)
    if not np.any(g):
        raise DomainError("g must be nonzero")
    V = g[:, None]
    lam = np.array([complex(lam)])
    gAg, _, gGg = _quadratic_forms(T.gram, V, T)
    den = _denominators(gAg, gGg, denominator)
    if den[0] == 0:
        raise UndefinedResidualError("residual denominator is zero")
    num = _residual_numerators(lam, V, T)
    return float(np.sqrt(num[0] / den[0]))


def with_residuals(R, T, denominator="paper"):
    """Copy of ``R`` with residuals of every eigenpair; NaN where undefined."""
    if R.eigvecs is None:
        raise DomainError("residuals need eigenvectors")
    gAg, _, gGg = _quadratic_forms(T.gram, R.eigvecs, T)
    den = _denominators(gAg, gGg, denominator)
    num = _residual_numerators(R.eigenvalues, R.eigvecs, T)
    with np.errstate(divide="ignore", invalid="ignore"):
        res = np.where(den > 0, np.sqrt(num / np.where(den > 0, den, 1.0)), np.nan)
    return replace(R, residuals=res, meta=dict(R.meta, denominator=denominator))


def _normalize(g, gram):
    norm = np.sqrt(np.real(np.vdot(g, gram * g)))
    if not norm > 0:
        raise DomainError("observable has zero norm on the data")
    return g / norm


def autocorrelation(S, D, g, n_max, workers=1):
    """Ergodic-average correlations ``<K^n g, g>`` along a single trajectory.

    ``g`` holds cell coefficients and is first scaled to unit norm in the
    data Gram inner product.  Every lag averages ``g(x_{t+n}) conj(g(x_t))``
    over the same start states ``t = 0 .. M - n_max - 1``, so all entries
    share one sampling window.
    """
    if not S.is_single_trajectory():
        raise UnsupportedSamplingError("autocorrelation needs pairs from a single trajectory")
    n_max = check_positive_int(n_max, "n_max", minimum=0)
    M = S.count
    if n_max >= M:
        raise DomainError(f"n_max={n_max} must be smaller than the number of pairs {M}")
    g = check_vector(g, D.n_cells)
    cells = assign(D, S.X, workers)
    w = S.weights
    gram = np.bincount(cells, weights=w, minlength=D.n_cells)
    h = _normalize(g, gram)[cells]
    window = M - n_max
    wt = w[:window]
    base = np.conj(h[:window]) * wt
    out = np.array([np.sum(base * h[n : n + window]) for n in range(n_max + 1)], dtype=np.complex128)
    return out / wt.sum()


def spectral_weights(R, g, T, cond_limit=1e8):
    """Weights ``mu_k`` of the approximate spectral measure of ``g`` at each eigenvalue.

    ``g`` (unit ``G``-norm after scaling) is projected onto the retained
    eigenvectors by ``G``-weighted least squares, ``g ~ V c``, and
    ``mu_k = c_k <v_k, g>_G`` so that ``sum_k mu_k lam_k^n`` predicts ``<K^n g, g>``.
    """
    if R.eigvecs is None:
        raise DomainError("spectral weights need eigenvectors")
    G = np.asarray(T.gram, dtype=np.float64)
    g = _normalize(check_vector(g, T.n_cells), G)
    if R.eigvecs.shape[1] == 0:
        return np.zeros(0, np.complex128), 1.0
    root = np.sqrt(G)
    B = root[:, None] * R.eigvecs
    c, *_ = np.linalg.lstsq(B, root * g, rcond=None)
    s = np.linalg.svd(B, compute_uv=False)
    cond = float((s[0] / s[-1]) ** 2) if s[-1] > 0 else np.inf
    if cond > cond_limit:
        warnings.warn(
            f"eigenvector basis condition number {cond:.3e} exceeds {cond_limit:.0e} in the G inner product",
            ConditioningWarning,
            stacklevel=2,
        )
    inner = np.conj(g) @ (G[:, None] * R.eigvecs)
    return c * inner, cond


def model_moments(R, g, T, n_max, cond_limit=1e8):
    """Correlations ``sum_k lam_k^n mu_k`` predicted by the approximation, ``n = 0..n_max``."""
    n_max = check_positive_int(n_max, "n_max", minimum=0)
    mu, _ = spectral_weights(R, g, T, cond_limit)
    powers = R.eigenvalues[None, :] ** np.arange(n_max + 1)[:, None]
    return powers @ mu


def arc_weight(R, mu, centers, half_width):
    """Total ``|mu_k|`` of eigenvalues farther than ``half_width`` (in angle) from every center angle."""
    ang = np.angle(R.eigenvalues)
    centers = np.atleast_1d(np.asarray(centers, dtype=np.float64))
    gap = np.abs(np.angle(np.exp(1j * (ang[:, None] - centers[None, :]))))
    outside = gap.min(axis=1) > half_width
    return float(np.sum(np.abs(mu[outside])))


def normalized_angles(eigenvalues, base_angle):
    """Eigenvalue arguments in units of ``base_angle``; a periodic flow puts them on the integers."""
    if not base_angle > 0:
        raise DomainError("base_angle must be positive")
    return np.angle(np.asarray(eigenvalues)) / base_angle


def dominant_cycle(R):
    """Index into ``R.cycles`` of the cycle with the largest basin (longest cycle on ties)."""
    if not R.cycles:
        raise DomainError("spectrum has no cycles")
    keys = [(c.basin_size, c.length) for c in R.cycles]
    return max(range(len(keys)), key=lambda c: (keys[c], -c))
