"""Snapshot data: simulation of the test systems, noise, and pairing.

All generators return a :class:`SnapshotSet` of consecutive-sample pairs
``(x_m, y_m = F(x_m))``.  Flows are integrated with fixed-step RK4 and
sampled every ``dt_sample``; the rotation systems apply their map exactly.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._integrate import integrate
from ._validation import check_pairs, check_sample_weight
from .exceptions import ConfigError, DomainError, IntegrationDivergedError

SYSTEM_KINDS = ("pendulum", "lorenz", "rotation2d", "torus_rotation")
INIT_SCHEMES = ("uniform_grid", "fixed", "random", "circle")


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """Paired states with quadrature weights.

    Parameters
    ----------
    X, Y : ndarray of shape (M, d)
        States and their images under the dynamics.
    weights : ndarray of shape (M,), optional
        Strictly positive weights, normalized to sum to one. Uniform when omitted.
    """

    X: np.ndarray
    Y: np.ndarray
    weights: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X, Y = check_pairs(self.X, self.Y)
        w = check_sample_weight(self.weights, X.shape[0], normalize=False)
        total = w.sum()
        if abs(total - 1.0) > 1e-12:
            w = w / total
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def count(self):
        return self.X.shape[0]

    @property
    def is_uniform(self):
        return bool(np.all(self.weights == self.weights[0]))

    @classmethod
    def from_trajectory(cls, Z, weights=None, meta=None):
        """Pair consecutive rows of a single trajectory ``Z``."""
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[0] < 2:
            raise DomainError("a trajectory needs at least two samples")
        return cls(Z[:-1], Z[1:], weights, dict(meta or {}))

    @classmethod
    def from_trajectories(cls, trajectories, meta=None):
        """Pair consecutive samples within each trajectory; no pairs span trajectories."""
        trajectories = np.asarray(trajectories, dtype=np.float64)
        X = trajectories[:, :-1, :].reshape(-1, trajectories.shape[2])
        Y = trajectories[:, 1:, :].reshape(-1, trajectories.shape[2])
        meta = dict(meta or {})
        meta.setdefault("n_trajectories", trajectories.shape[0])
        return cls(X, Y, None, meta)

    def is_single_trajectory(self):
        """True when row ``m`` of ``Y`` equals row ``m + 1`` of ``X`` for every ``m``."""
        return bool(np.array_equal(self.Y[:-1], self.X[1:]))

    def trajectory(self):
        """Rebuild the underlying orbit ``x_0, ..., x_M`` of a single-trajectory set."""
        if not self.is_single_trajectory():
            raise DomainError("snapshot pairs do not form a single trajectory")
        return np.vstack([self.X, self.Y[-1:]])


@dataclass(frozen=True)
class SystemConfig:
    """Simulation settings for one of the built-in systems.

    ``params`` holds the angles of the rotation systems (``theta``,
    ``theta2``); the flows take no parameters.  For the discrete maps the
    time unit is one map application, so ``dt_sample`` defaults to 1.
    """

    kind: str
    params: dict = field(default_factory=dict)
    dt_sample: float = 0.1
    t_final: float = 10.0
    n_trajectories: int = 1
    init_scheme: str = "fixed"
    init_point: Optional[tuple] = None
    init_low: Optional[tuple] = None
    init_high: Optional[tuple] = None
    seed: Optional[int] = None
    burn_in: int = 0
    substeps: int = 10

    def __post_init__(self):
        if self.kind not in SYSTEM_KINDS:
            raise ConfigError(f"unknown system kind {self.kind!r}; expected one of {SYSTEM_KINDS}")
        if self.init_scheme not in INIT_SCHEMES:
            raise ConfigError(f"unknown init_scheme {self.init_scheme!r}")
        if not self.dt_sample > 0:
            raise ConfigError("dt_sample must be positive")
        if not self.t_final > 0:
            raise ConfigError("t_final must be positive")
        if self.n_trajectories < 1:
            raise ConfigError("n_trajectories must be >= 1")
        if self.substeps < 10:
            raise ConfigError("substeps must be >= 10 (internal step at most dt_sample/10)")
        if not 0 <= self.burn_in < self.n_samples:
            raise ConfigError(
                f"burn_in must lie in [0, {self.n_samples}), got {self.burn_in}"
            )
        if self.n_samples - self.burn_in < 2:
            raise ConfigError("fewer than two samples remain after burn-in")

    @property
    def n_samples(self):
        """Samples per trajectory, counting the initial state."""
        return int(round(self.t_final / self.dt_sample)) + 1

    @property
    def dim(self):
        return {"pendulum": 2, "lorenz": 3, "rotation2d": 2, "torus_rotation": 4}[self.kind]


def initial_conditions(cfg):
    """Initial states of shape (n_trajectories, d) for ``cfg``."""
    d = cfg.dim
    n = cfg.n_trajectories
    scheme = cfg.init_scheme
    if scheme == "fixed":
        if cfg.init_point is None:
            raise ConfigError("init_scheme 'fixed' needs init_point")
        point = np.asarray(cfg.init_point, dtype=np.float64).reshape(-1)
        if point.shape[0] != d:
            raise ConfigError(f"init_point must have {d} entries")
        return np.tile(point, (n, 1))
    if scheme == "circle":
        if cfg.kind not in ("rotation2d", "torus_rotation"):
            raise ConfigError("init_scheme 'circle' applies to the rotation systems only")
        angles = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        pts = np.column_stack([np.cos(angles), np.sin(angles)])
        if d == 4:
            pts = np.column_stack([pts, np.ones(n), np.zeros(n)])
        return pts
    if cfg.init_low is None or cfg.init_high is None:
        raise ConfigError(f"init_scheme {scheme!r} needs init_low and init_high")
    low = np.broadcast_to(np.asarray(cfg.init_low, dtype=np.float64), (d,))
    high = np.broadcast_to(np.asarray(cfg.init_high, dtype=np.float64), (d,))
    if scheme == "random":
        rng = np.random.default_rng(cfg.seed)
        return rng.uniform(low, high, size=(n, d))
    per_dim = int(round(n ** (1.0 / d)))
    if per_dim**d != n:
        raise ConfigError(f"uniform_grid needs n_trajectories to be a perfect {d}-th power, got {n}")
    axes = [np.linspace(low[k], high[k], per_dim) for k in range(d)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in grid])


def _simulate_flow(cfg, kind):
    if cfg.kind != kind:
        raise ConfigError(f"expected a {kind} config, got {cfg.kind!r}")
    x0 = initial_conditions(cfg)
    h = cfg.dt_sample / cfg.substeps
    samples, bad = integrate(kind, x0, cfg.n_samples, cfg.substeps, h)
    diverged = np.flatnonzero(bad >= 0)
    if diverged.size:
        t = int(diverged[0])
        raise IntegrationDivergedError(t, bad[t] * cfg.dt_sample)
    samples = samples[:, cfg.burn_in :, :]
    meta = {"system": kind, "dt_sample": cfg.dt_sample, "n_trajectories": cfg.n_trajectories}
    return SnapshotSet.from_trajectories(samples, meta)


def simulate_pendulum(cfg):
    """Nonlinear pendulum ``x1' = x2, x2' = -sin(3 x1)`` with ``x1`` wrapped to [-pi/3, pi/3)."""
    return _simulate_flow(cfg, "pendulum")


def simulate_lorenz(cfg):
    """Lorenz system with the classical parameters (10, 28, 8/3); burn-in dropped before pairing."""
    return _simulate_flow(cfg, "lorenz")


def simulate_rotation(cfg):
    """Exact rotation of the circle (``rotation2d``) or of a 2-torus in R^4 (``torus_rotation``).

    Each 2-D block of the state is rotated by its own angle per step:
    ``theta`` for the first block and ``theta2`` for the second.
    """
    if cfg.kind not in ("rotation2d", "torus_rotation"):
        raise ConfigError(f"expected a rotation config, got {cfg.kind!r}")
    angles = [float(cfg.params.get("theta", 0.0))]
    if cfg.kind == "torus_rotation":
        angles.append(float(cfg.params.get("theta2", 0.0)))
    x0 = initial_conditions(cfg)
    steps = np.arange(cfg.n_samples, dtype=np.float64)
    traj = np.empty((x0.shape[0], cfg.n_samples, x0.shape[1]))
    for b, theta in enumerate(angles):
        c = np.cos(steps * theta)[None, :]
        s = np.sin(steps * theta)[None, :]
        u = x0[:, 2 * b, None]
        v = x0[:, 2 * b + 1, None]
        traj[:, :, 2 * b] = c * u - s * v
        traj[:, :, 2 * b + 1] = s * u + c * v
    traj = traj[:, cfg.burn_in :, :]
    meta = {"system": cfg.kind, "angles": angles, "n_trajectories": cfg.n_trajectories}
    return SnapshotSet.from_trajectories(traj, meta)


def simulate(cfg):
    """Dispatch on ``cfg.kind``."""
    if cfg.kind == "pendulum":
        return simulate_pendulum(cfg)
    if cfg.kind == "lorenz":
        return simulate_lorenz(cfg)
    return simulate_rotation(cfg)


def pendulum_energy(X):
    X = np.atleast_2d(X)
    return 0.5 * X[:, 1] ** 2 + (1.0 - np.cos(3.0 * X[:, 0])) / 3.0


def _noise_scale(reference, level):
    if level < 0:
        raise DomainError(f"noise level must be non-negative, got {level}")
    return level * float(np.sqrt(np.mean(np.square(reference))))


def add_noise(S, level, seed=None):
    """Add i.i.d. Gaussian noise to every entry of ``S.X`` and ``S.Y``.

    The standard deviation is ``level`` times the root-mean-square of the
    clean ``X`` entries. Weights are kept.
    """
    scale = _noise_scale(S.X, level)
    if level == 0:
        return SnapshotSet(S.X.copy(), S.Y.copy(), S.weights.copy(), dict(S.meta))
    rng = np.random.default_rng(seed)
    X = S.X + rng.normal(0.0, scale, size=S.X.shape)
    Y = S.Y + rng.normal(0.0, scale, size=S.Y.shape)
    meta = dict(S.meta, noise_level=level, noise_seed=seed)
    return SnapshotSet(X, Y, S.weights.copy(), meta)


def add_field_noise(fields, level, seed=None):
    """Noise a snapshot matrix in place of a pair set, keeping consecutive snapshots consistent."""
    fields = np.asarray(fields, dtype=np.float64)
    scale = _noise_scale(fields, level)
    if level == 0:
        return fields.copy()
    rng = np.random.default_rng(seed)
    return fields + rng.normal(0.0, scale, size=fields.shape)


def traveling_wave(n_grid, n_snapshots, theta, theta2=None, amplitude2=0.5):
    """Synthetic field snapshots ``(T, D)`` of a wave travelling round a periodic grid.

    Snapshot ``t`` is ``cos(x - t theta) + amplitude2 cos(2 x - t theta2)`` on
    ``n_grid`` equispaced points of [0, 2 pi).  With ``theta2`` omitted the
    second harmonic travels with the first (``theta2 = 2 theta``) and the flow
    is periodic; otherwise it is quasiperiodic with two base frequencies.
    """
    if n_grid < 1 or n_snapshots < 2:
        raise DomainError("need n_grid >= 1 and n_snapshots >= 2")
    theta2 = 2.0 * theta if theta2 is None else theta2
    x = 2.0 * np.pi * np.arange(n_grid) / n_grid
    t = np.arange(n_snapshots, dtype=np.float64)[:, None]
    return np.cos(x[None, :] - t * theta) + amplitude2 * np.cos(2.0 * x[None, :] - t * theta2)
