"""Fixed-step classical RK4 kernels, compiled with numba."""

import numpy as np
from numba import njit

PENDULUM_PERIOD = 2.0 * np.pi / 3.0


@njit(cache=False)
def _pendulum_rhs(x, out):
    out[0] = x[1]
    out[1] = -np.sin(3.0 * x[0])


@njit(cache=False)
def _lorenz_rhs(x, out):
    out[0] = 10.0 * (x[1] - x[0])
    out[1] = x[0] * (28.0 - x[2]) - x[1]
    out[2] = x[0] * x[1] - 8.0 * x[2] / 3.0


@njit(cache=False)
def _rk4_run(rhs, x0, n_samples, substeps, h, wrap_period):
    """Integrate every row of ``x0``; store ``n_samples`` samples spaced ``substeps*h``.

    Returns the sample array and, per trajectory, the index of the first
    sample that went non-finite (-1 if none).
    """
    n_traj, d = x0.shape
    out = np.empty((n_traj, n_samples, d))
    bad = np.full(n_traj, -1, dtype=np.int64)
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    tmp = np.empty(d)
    x = np.empty(d)
    half = 0.5 * wrap_period
    for t in range(n_traj):
        for i in range(d):
            x[i] = x0[t, i]
        for s in range(n_samples):
            if s > 0:
                for _ in range(substeps):
                    rhs(x, k1)
                    for i in range(d):
                        tmp[i] = x[i] + 0.5 * h * k1[i]
                    rhs(tmp, k2)
                    for i in range(d):
                        tmp[i] = x[i] + 0.5 * h * k2[i]
                    rhs(tmp, k3)
                    for i in range(d):
                        tmp[i] = x[i] + h * k3[i]
                    rhs(tmp, k4)
                    for i in range(d):
                        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if wrap_period > 0.0:
                x[0] = x[0] - wrap_period * np.floor((x[0] + half) / wrap_period)
            finite = True
            for i in range(d):
                out[t, s, i] = x[i]
                if not np.isfinite(x[i]):
                    finite = False
            if not finite:
                bad[t] = s
                break
    return out, bad


def integrate(kind, x0, n_samples, substeps, h):
    rhs = {"pendulum": _pendulum_rhs, "lorenz": _lorenz_rhs}[kind]
    wrap = PENDULUM_PERIOD if kind == "pendulum" else 0.0
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    return _rk4_run(rhs, x0, int(n_samples), int(substeps), float(h), wrap)
