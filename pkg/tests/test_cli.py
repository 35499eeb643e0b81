import json
import subprocess
import sys

import numpy as np
import pytest

from multdmd import io as mio
from multdmd import traveling_wave
from multdmd.cli import PRESETS, config_hash, resolve_config, run
from multdmd.exceptions import ConfigError

SMALL_PENDULUM = {
    "data": {"system": {"kind": "pendulum", "t_final": 5.0, "n_trajectories": 9, "init_scheme": "uniform_grid",
                        "init_point": None, "init_low": [-0.5, -0.5], "init_high": [0.5, 0.5]}},
    "dictionary": {"n_cells": 20, "n_init": 2},
    "min_support": 1,
}


def write_config(tmp_path, doc, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def invoke(tmp_path, verb, doc=None, preset=None, out="out", extra=()):
    argv = [verb, "--out", str(tmp_path / out), *extra]
    if doc is not None:
        argv += ["--config", write_config(tmp_path, doc)]
    if preset is not None:
        argv += ["--preset", preset]
    return run(argv), tmp_path / out


def result(out):
    return json.loads((out / "result.json").read_text())


class TestConfig:
    def test_defaults_are_explicit(self):
        cfg = resolve_config({"seed": 7})
        assert cfg["dictionary"]["seed"] == 7 and cfg["noise"]["seed"] == 7

    def test_unknown_key_path(self):
        with pytest.raises(ConfigError, match=r"dictionary\.n_cell: unknown key"):
            resolve_config({"dictionary": {"n_cell": 5}})

    @pytest.mark.parametrize(
        "doc, path",
        [
            ({"dictionary": {"n_cells": -1}}, "dictionary.n_cells"),
            ({"denominator": "both"}, "denominator"),
            ({"estimators": []}, "estimators"),
            ({"seed": -1}, "seed"),
            ({"data": {"source": "snapshots", "path": "/nonexistent.csv"}}, "data.path"),
            ({"data": {"system": {"dt_sample": -0.1}}}, "data.system"),
            ({"elbow": {"n_list": [5, 3]}}, "elbow.n_list"),
        ],
    )
    def test_validation_names_path(self, doc, path):
        with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
            resolve_config(doc)

    def test_preset_and_seed_override(self):
        cfg = resolve_config({}, preset="rotation2d", seed=3)
        assert cfg["dictionary"]["kind"] == "arcs" and cfg["seed"] == 3

    def test_hash_depends_on_content(self):
        a, b = resolve_config({}), resolve_config({"seed": 1})
        assert config_hash(a) != config_hash(b)
        assert config_hash(a) == config_hash(resolve_config({}))

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_presets_validate(self, name):
        resolve_config({}, preset=name)


class TestGenerate:
    def test_pendulum_preset_count(self, tmp_path):
        code, out = invoke(tmp_path, "generate", preset="pendulum")
        assert code == 0
        assert result(out)["M"] == 10_000
        assert mio.load_snapshots(out / "snapshots.csv").count == 10_000

    def test_lorenz_preset_count(self, tmp_path):
        code, out = invoke(tmp_path, "generate", preset="lorenz")
        assert code == 0
        assert result(out)["M"] == 99_000

    def test_rotation_is_exact_permutation_data(self, tmp_path):
        code, out = invoke(tmp_path, "generate", preset="rotation2d")
        assert code == 0
        S = mio.load_snapshots(out / "snapshots.csv")
        z = S.X[:, 0] + 1j * S.X[:, 1]
        w = S.Y[:, 0] + 1j * S.Y[:, 1]
        assert np.allclose(w, z * np.exp(2j * np.pi / 8), atol=1e-12)

    def test_manifest_records_seed(self, tmp_path):
        code, out = invoke(tmp_path, "generate", SMALL_PENDULUM, extra=["--seed", "11"])
        assert code == 0
        cfg = json.loads((out / "config.json").read_text())["resolved"]
        assert cfg["seed"] == 11 and cfg["dictionary"]["seed"] == 11

    def test_snapshots_source_roundtrip(self, tmp_path):
        invoke(tmp_path, "generate", SMALL_PENDULUM, out="a")
        path = str(tmp_path / "a" / "snapshots.csv")
        code, out = invoke(tmp_path, "generate", {"data": {"source": "snapshots", "path": path}}, out="b")
        assert code == 0
        a = mio.load_snapshots(path)
        b = mio.load_snapshots(out / "snapshots.csv")
        assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)


class TestFit:
    def test_rotation_eighth_roots(self, tmp_path):
        code, out = invoke(tmp_path, "fit", preset="rotation2d")
        assert code == 0
        cols = mio.load_spectrum(out / "spectrum_multdmd.csv")
        lam = cols["re"] + 1j * cols["im"]
        roots = np.exp(2j * np.pi * np.arange(8) / 8)
        assert lam.size == 8
        assert np.max(np.min(np.abs(lam[:, None] - roots[None, :]), axis=0)) <= 1e-14
        assert np.all(cols["residual"] <= 1e-10)
        K = mio.load_operator(out / "operator_multdmd.csv")
        assert np.array_equal(K.sigma, (np.arange(8) + 1) % 8)

    def test_outputs_and_timing(self, tmp_path):
        code, out = invoke(tmp_path, "fit", SMALL_PENDULUM)
        assert code == 0
        for name in ("dictionary.csv", "operator_multdmd.csv", "operator_edmd.csv", "spectrum_multdmd.csv",
                     "spectrum_edmd.csv", "eigvecs_multdmd.csv", "eigvecs_edmd.csv", "summary.txt"):
            assert (out / name).is_file(), name
        timing = json.loads((out / "timing.json").read_text())
        assert {"data", "dictionary", "accumulate", "fit_multdmd", "fit_edmd"} <= set(timing["seconds"])
        assert timing["counts"]["nnz_multdmd"] <= timing["counts"]["N"]
        assert timing["counts"]["nnz_edmd"] > timing["counts"]["N"]

    def test_every_output_names_the_hash(self, tmp_path):
        code, out = invoke(tmp_path, "fit", SMALL_PENDULUM)
        assert code == 0
        h = json.loads((out / "config.json").read_text())["config_hash"]
        assert h == config_hash(resolve_config(SMALL_PENDULUM))
        for f in out.iterdir():
            assert h in f.read_text().splitlines()[0] or f'"config_hash": "{h}"' in f.read_text(), f.name

    def test_empty_input_file(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        code, _ = invoke(tmp_path, "fit", {"data": {"source": "snapshots", "path": str(empty)}})
        assert code == 4

    def test_ragged_input_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("d=2,M=2,weighted=0\n1,2,3,4\n1,2,3\n")
        code, _ = invoke(tmp_path, "fit", {"data": {"source": "snapshots", "path": str(bad)}})
        assert code == 4
        err = capsys.readouterr().err
        assert "bad.csv:3:" in err and "stage 'data'" in err

    def test_config_error_exit(self, tmp_path, capsys):
        code, _ = invoke(tmp_path, "fit", {"dictionary": {"n_cells": -5}})
        assert code == 2
        assert "dictionary.n_cells" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{ not json")
        assert run(["fit", "--config", str(p), "--out", str(tmp_path / "o")]) == 2

    def test_missing_config_file(self, tmp_path):
        assert run(["fit", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "o")]) == 4

    def test_numerical_failure_exit(self, tmp_path, capsys):
        # more cells than distinct states cannot be seeded
        doc = dict(SMALL_PENDULUM, dictionary={"n_cells": 5000})
        code, _ = invoke(tmp_path, "fit", doc)
        assert code == 3
        assert "stage 'dictionary'" in capsys.readouterr().err

    def test_threads_do_not_change_output(self, tmp_path):
        _, a = invoke(tmp_path, "fit", SMALL_PENDULUM, out="a", extra=["--threads", "1"])
        _, b = invoke(tmp_path, "fit", SMALL_PENDULUM, out="b", extra=["--threads", "2"])
        for name in ("operator_multdmd.csv", "spectrum_multdmd.csv", "spectrum_edmd.csv", "result.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_pendulum_preset_spectra(self, tmp_path):
        code, out = invoke(tmp_path, "fit", preset="pendulum")
        assert code == 0
        spectra = result(out)["spectra"]
        m, e = spectra["multdmd"], spectra["edmd"]
        assert m["count"] > 0 and m["on_unit_circle"] == m["count"]
        assert e["inside_0_9"] >= 0.2 * e["count"]


def test_pod_command(tmp_path):
    code, out = invoke(tmp_path, "pod", preset="wave")
    assert code == 0
    B = mio.load_pod(out / "pod.csv")
    assert B.rank == 4
    assert np.max(np.abs(B.modes.T @ B.modes - np.eye(4))) <= 1e-12
    assert mio.load_snapshots(out / "coefficients.csv").dim == 4


def test_pod_needs_fields(tmp_path):
    code, _ = invoke(tmp_path, "pod", SMALL_PENDULUM)
    assert code == 2


def test_modes_constant_eigenvalue_gives_mean_field(tmp_path):
    n = 16
    F = traveling_wave(30, 8 * n + 1, 2 * np.pi / n) + np.linspace(1.0, 2.0, 30)
    path = tmp_path / "fields.csv"
    mio.save_fields(F, path)
    doc = {"data": {"source": "fields", "path": str(path)}, "pod": {"rank": 4},
           "dictionary": {"n_cells": n}, "min_support": 1, "modes": {"count": 1}}
    code, out = invoke(tmp_path, "modes", doc)
    assert code == 0
    rows = np.loadtxt(out / "modes.csv", delimiter=",", skiprows=1, ndmin=2)
    assert rows.shape == (1, 2 + 2 * 30)
    assert np.allclose(rows[0, :2], [1.0, 0.0])
    mode = rows[0, 2:32] + 1j * rows[0, 32:]
    mean = F[:-1].mean(axis=0)
    assert np.allclose(mode, mean / np.abs(mean).max(), atol=1e-12)


def test_modes_wave_cycle(tmp_path):
    code, out = invoke(tmp_path, "modes", preset="wave")
    assert code == 0
    res = result(out)
    assert res["cycle_length"] == 16
    assert res["phase_index"][:3] == [0, 1, -1]


def test_moments_rotation(tmp_path):
    code, out = invoke(tmp_path, "moments", preset="rotation2d")
    assert code == 0
    assert result(out)["max_abs_diff"] <= 1e-8
    table = np.loadtxt(out / "moments.csv", delimiter=",", skiprows=2)
    assert table.shape == (33, 6)


def test_moments_bad_coordinate(tmp_path):
    code, _ = invoke(tmp_path, "moments", preset="rotation2d", doc={"moments": {"coordinate": 2}})
    assert code == 2


def test_elbow_small(tmp_path):
    doc = dict(SMALL_PENDULUM, elbow={"n_list": [5, 10, 20, 40]})
    code, out = invoke(tmp_path, "elbow", doc)
    assert code == 0
    table = np.loadtxt(out / "elbow.csv", delimiter=",", skiprows=2)
    assert np.array_equal(table[:, 0], [5, 10, 20, 40])
    assert np.all(np.diff(table[:, 1]) <= 0)


@pytest.mark.slow
def test_elbow_lorenz_desk_trend(tmp_path):
    doc = {"elbow": {"n_list": [50, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000]}, "dictionary": {"n_init": 1}}
    code, out = invoke(tmp_path, "elbow", doc, preset="lorenz")
    assert code == 0
    d = np.loadtxt(out / "elbow.csv", delimiter=",", skiprows=2)[:, 1]
    # nonincreasing in trend: a linear fit on log N slopes down and no step rises by more than 5%
    slope = np.polyfit(np.log(np.arange(1, d.size + 1)), d, 1)[0]
    assert slope < 0
    assert np.all(d[1:] <= 1.05 * d[:-1])


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "multdmd", "generate", "--preset", "rotation2d", "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "snapshots.csv").is_file()
