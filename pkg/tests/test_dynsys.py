import numpy as np
import pytest

from multdmd import SnapshotSet, SystemConfig, add_noise, simulate, traveling_wave
from multdmd.dynsys import add_field_noise, initial_conditions, pendulum_energy
from multdmd.exceptions import ConfigError, DomainError, IntegrationDivergedError

from oracles import lorenz_rhs, rk4_reference


def pendulum_cfg(**kw):
    base = dict(dt_sample=0.1, t_final=10.0)
    base.update(kw)
    return SystemConfig("pendulum", **base)


class TestSnapshotSet:
    def test_default_weights_uniform(self):
        S = SnapshotSet(np.zeros((4, 2)), np.ones((4, 2)))
        assert np.allclose(S.weights, 0.25)
        assert S.dim == 2 and S.count == 4

    def test_weights_normalized(self):
        S = SnapshotSet(np.zeros((3, 1)), np.zeros((3, 1)), [1.0, 2.0, 5.0])
        assert abs(S.weights.sum() - 1.0) <= 1e-12
        assert np.allclose(S.weights, np.array([1, 2, 5]) / 8)

    @pytest.mark.parametrize("w", [[1.0, 0.0], [1.0, -1.0], [1.0, np.nan]])
    def test_nonpositive_weights_rejected(self, w):
        with pytest.raises(DomainError):
            SnapshotSet(np.zeros((2, 1)), np.zeros((2, 1)), w)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DomainError):
            SnapshotSet(np.zeros((3, 2)), np.zeros((3, 3)))

    def test_from_trajectory_pairing(self, rng):
        Z = rng.normal(size=(11, 3))
        S = SnapshotSet.from_trajectory(Z)
        assert S.count == 10
        assert np.array_equal(S.Y[:-1], S.X[1:])
        assert S.is_single_trajectory()
        assert np.array_equal(S.trajectory(), Z)

    def test_multi_trajectory_not_single(self, rng):
        trajs = rng.normal(size=(3, 5, 2))
        S = SnapshotSet.from_trajectories(trajs)
        assert S.count == 12
        assert not S.is_single_trajectory()
        with pytest.raises(DomainError):
            S.trajectory()


class TestSystemConfig:
    def test_sample_count(self):
        assert pendulum_cfg().n_samples == 101

    @pytest.mark.parametrize(
        "kw",
        [
            dict(dt_sample=0.0),
            dict(t_final=-1.0),
            dict(burn_in=101),
            dict(burn_in=-1),
            dict(substeps=5),
            dict(init_scheme="spiral"),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            pendulum_cfg(init_point=(0.1, 0.0), **kw)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            SystemConfig("duffing")

    def test_uniform_grid(self):
        cfg = pendulum_cfg(n_trajectories=9, init_scheme="uniform_grid", init_low=(-1, -1), init_high=(1, 1))
        x0 = initial_conditions(cfg)
        assert x0.shape == (9, 2)
        assert set(np.round(x0[:, 0], 12)) == {-1.0, 0.0, 1.0}

    def test_uniform_grid_needs_power(self):
        cfg = pendulum_cfg(n_trajectories=8, init_scheme="uniform_grid", init_low=(-1, -1), init_high=(1, 1))
        with pytest.raises(ConfigError):
            initial_conditions(cfg)

    def test_random_init_is_seeded(self):
        kw = dict(n_trajectories=5, init_scheme="random", init_low=(-1, -1), init_high=(1, 1), seed=3)
        assert np.array_equal(initial_conditions(pendulum_cfg(**kw)), initial_conditions(pendulum_cfg(**kw)))


class TestPendulum:
    def test_pair_count_full_setup(self):
        cfg = pendulum_cfg(n_trajectories=400, init_scheme="uniform_grid", init_low=(-0.6, -0.6), init_high=(0.6, 0.6))
        assert simulate(cfg).count == 40000

    def test_equilibrium(self):
        S = simulate(pendulum_cfg(init_point=(0.0, 0.0)))
        assert np.all(S.X == 0) and np.all(S.Y == 0)

    def test_energy_short(self):
        S = simulate(pendulum_cfg(init_point=(0.1, 0.0), t_final=1.0))
        assert S.count == 10
        E = pendulum_energy(np.vstack([S.X, S.Y[-1:]]))
        assert np.max(np.abs(E - E[0])) <= 1e-6 * E[0]

    def test_energy_drift_full_horizon(self):
        cfg = pendulum_cfg(n_trajectories=9, init_scheme="uniform_grid", init_low=(-0.6, -0.6), init_high=(0.6, 0.6))
        S = simulate(cfg)
        E0 = pendulum_energy(S.X[::100])
        E1 = pendulum_energy(S.Y[99::100])
        ok = E0 > 0
        assert np.max(np.abs(E1[ok] - E0[ok]) / E0[ok]) <= 1e-6

    def test_wrapped_coordinate(self):
        S = simulate(pendulum_cfg(init_point=(0.0, 2.0), t_final=5.0))
        assert S.X[:, 0].min() >= -np.pi / 3 and S.X[:, 0].max() < np.pi / 3


class TestLorenz:
    def test_step_halving(self):
        cfg = SystemConfig("lorenz", dt_sample=0.01, t_final=1.0, init_point=(1.0, 1.0, 1.0))
        S = simulate(cfg)
        ref = rk4_reference(lorenz_rhs, (1.0, 1.0, 1.0), 1.0, 0.0005)
        final = S.Y[-1]
        assert np.linalg.norm(final - ref) <= 1e-5 * np.linalg.norm(ref)

    def test_burn_in_count(self):
        cfg = SystemConfig("lorenz", dt_sample=0.01, t_final=10.0, init_point=(1.0, 1.0, 1.0), burn_in=100)
        assert simulate(cfg).count == 1001 - 100 - 1

    def test_origin_fixed(self):
        S = simulate(SystemConfig("lorenz", dt_sample=0.01, t_final=1.0, init_point=(0.0, 0.0, 0.0)))
        assert np.all(S.X == 0) and np.all(S.Y == 0)

    def test_divergence_reported(self):
        cfg = SystemConfig("lorenz", dt_sample=1.0, t_final=50.0, init_point=(1e150, 1e150, 1e150))
        with pytest.raises(IntegrationDivergedError) as info:
            simulate(cfg)
        assert info.value.trajectory == 0


class TestRotation:
    def test_eighth_turn(self):
        cfg = SystemConfig("rotation2d", params={"theta": 2 * np.pi / 8}, dt_sample=1, t_final=1, n_trajectories=64, init_scheme="circle")
        S = simulate(cfg)
        assert S.count == 64
        ax = np.angle(S.X[:, 0] + 1j * S.X[:, 1])
        ay = np.angle(S.Y[:, 0] + 1j * S.Y[:, 1])
        assert np.allclose(np.angle(np.exp(1j * (ay - ax))), 2 * np.pi / 8, atol=1e-14)

    def test_zero_angle_identity(self):
        cfg = SystemConfig("rotation2d", params={"theta": 0.0}, dt_sample=1, t_final=5, init_point=(0.6, 0.8))
        S = simulate(cfg)
        assert np.array_equal(S.X, S.Y)

    def test_torus_autocorrelation_peaks(self):
        theta1 = 2 * np.pi / 5
        cfg = SystemConfig(
            "torus_rotation",
            params={"theta": theta1, "theta2": 2 * np.pi * np.sqrt(2) / 20},
            dt_sample=1,
            t_final=5000,
            init_scheme="circle",
        )
        S = simulate(cfg)
        x = S.X[:, 0]
        lags = np.arange(0, 26)
        emp = np.array([np.mean(x[n:] * x[: x.size - n]) for n in lags])
        analytic = 0.5 * np.cos(lags * theta1)
        peaks = lambda a: set(np.flatnonzero((a[1:-1] > a[:-2]) & (a[1:-1] > a[2:])) + 1)  # noqa: E731
        assert peaks(emp) == peaks(analytic)

    def test_circle_scheme_rejected_for_flows(self):
        with pytest.raises(ConfigError):
            initial_conditions(pendulum_cfg(init_scheme="circle"))


class TestNoise:
    def test_zero_level_identity(self, rng):
        S = SnapshotSet(rng.normal(size=(5, 2)), rng.normal(size=(5, 2)))
        T = add_noise(S, 0.0, seed=1)
        assert np.array_equal(T.X, S.X) and np.array_equal(T.Y, S.Y)

    def test_negative_level(self, rng):
        S = SnapshotSet(rng.normal(size=(5, 2)), rng.normal(size=(5, 2)))
        with pytest.raises(DomainError):
            add_noise(S, -0.1)

    def test_statistics_on_constant_data(self):
        S = SnapshotSet(np.ones((50000, 2)), np.ones((50000, 2)))
        T = add_noise(S, 0.4, seed=7)
        diffs = np.concatenate([(T.X - S.X).ravel(), (T.Y - S.Y).ravel()])
        assert abs(diffs.std() - 0.4) <= 0.01

    def test_deterministic_and_weights_kept(self, rng):
        S = SnapshotSet(rng.normal(size=(20, 3)), rng.normal(size=(20, 3)), rng.uniform(1, 2, 20))
        a, b = add_noise(S, 0.3, seed=11), add_noise(S, 0.3, seed=11)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
        assert np.array_equal(a.weights, S.weights)
        assert not np.array_equal(a.X, add_noise(S, 0.3, seed=12).X)

    def test_field_noise(self, rng):
        F = rng.normal(size=(10, 30))
        assert np.array_equal(add_field_noise(F, 0.0), F)
        assert np.array_equal(add_field_noise(F, 0.2, 3), add_field_noise(F, 0.2, 3))


def test_traveling_wave_periodic():
    F = traveling_wave(32, 17, 2 * np.pi / 16)
    assert F.shape == (17, 32)
    assert np.allclose(F[16], F[0], atol=1e-12)
    assert not np.allclose(F[8], F[0])
