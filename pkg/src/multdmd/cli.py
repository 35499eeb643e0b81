"""Command-line pipelines: ``multdmd <verb> --config run.json --out DIR``.

Verbs
-----
generate  simulate or ingest data and write the snapshot CSV
elbow     k-means distortion against the number of cells
fit       dictionary, transition weights, estimators, spectra and residuals
pod       POD basis and coefficient snapshots of field data
modes     Koopman modes of the dominant cycle
moments   data autocorrelations against the model's spectral moments

A run is described by a JSON document.  Missing keys are filled from the
defaults (or from a named ``preset``), the resolved document is written to
``config.json`` in the output directory, and its hash tags every output
file.  Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error.
"""

import argparse
import copy
import hashlib
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import io as mio
from .dictionary import arc_dictionary, assign, distortion_curve, fit_kmeans
from .dynsys import SYSTEM_KINDS, SnapshotSet, SystemConfig, add_field_noise, add_noise, simulate, traveling_wave
from .estimators import accumulate, fit_edmd_indicator, fit_exact_dmd, fit_multdmd
from .exceptions import ConfigError, MultDMDError, ParseError
from .pod import fit_pod, koopman_modes, project
from .spectral import (
    autocorrelation,
    cycle_spectrum,
    dense_eig,
    dominant_cycle,
    model_moments,
    spectral_weights,
    with_residuals,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
VERBS = ("generate", "elbow", "fit", "pod", "modes", "moments")
ESTIMATORS = ("multdmd", "edmd", "exact_dmd")

DEFAULTS = {
    "preset": None,
    "seed": 0,
    "data": {
        "source": "system",
        "path": None,
        "system": {
            "kind": "pendulum",
            "params": {},
            "dt_sample": 0.1,
            "t_final": 10.0,
            "n_trajectories": 1,
            "init_scheme": "fixed",
            "init_point": [0.1, 0.0],
            "init_low": None,
            "init_high": None,
            "burn_in": 0,
            "substeps": 10,
        },
        "wave": {"n_grid": 64, "n_snapshots": 200, "theta": 2.0 * math.pi / 16, "theta2": None, "amplitude2": 0.5},
    },
    "noise": {"level": 0.0, "seed": None},
    "pod": {"rank": None, "center": True},
    "dictionary": {
        "kind": "kmeans",
        "n_cells": 200,
        "seed": None,
        "subsample": 1,
        "n_init": 10,
        "max_iter": 100,
        "radius": 1.0,
        "offset": 0.5,
        "path": None,
    },
    "estimators": ["multdmd", "edmd"],
    "allow_empty_rows": False,
    "denominator": "paper",
    "min_support": 50,
    "elbow": {"n_list": [50, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000]},
    "moments": {"n_max": 32, "coordinate": 0},
    "modes": {"count": 6},
}

# Desk-scale versions of the experiments: M and N shrunk with their ratios kept.
PRESETS = {
    "pendulum": {
        "data": {
            "system": {
                "kind": "pendulum",
                "dt_sample": 0.1,
                "t_final": 10.0,
                "n_trajectories": 100,
                "init_scheme": "uniform_grid",
                "init_point": None,
                "init_low": [-0.6, -0.6],
                "init_high": [0.6, 0.6],
            }
        },
        "dictionary": {"n_cells": 200},
    },
    "lorenz": {
        "data": {
            "system": {
                "kind": "lorenz",
                "dt_sample": 0.01,
                "t_final": 1000.0,
                "init_point": [1.0, 1.0, 1.0],
                "burn_in": 1000,
            }
        },
        "dictionary": {"n_cells": 500, "subsample": 10},
        "elbow": {"n_list": [50, 100, 150, 200, 250, 300, 350, 400, 450, 500, 600, 700, 800, 900, 1000]},
    },
    "rotation2d": {
        "data": {
            "system": {
                "kind": "rotation2d",
                "params": {"theta": 2.0 * math.pi / 8},
                "dt_sample": 1.0,
                "t_final": 64.0,
                "init_point": [math.cos(0.3), math.sin(0.3)],
            }
        },
        "dictionary": {"kind": "arcs", "n_cells": 8},
        "min_support": 1,
        "denominator": "gram",
        "modes": {"count": 8},
    },
    "torus": {
        "data": {
            "system": {
                "kind": "torus_rotation",
                "params": {"theta": 2.0 * math.pi / 5, "theta2": 2.0 * math.pi * math.sqrt(2.0) / 20},
                "dt_sample": 1.0,
                "t_final": 10000.0,
                "init_scheme": "circle",
                "init_point": None,
            }
        },
        "dictionary": {"n_cells": 1000},
        "min_support": 1,
        "estimators": ["multdmd", "exact_dmd"],
    },
    "wave": {
        "data": {"source": "wave"},
        "pod": {"rank": 4},
        "dictionary": {"n_cells": 48},
        "min_support": 1,
        "estimators": ["multdmd", "exact_dmd"],
    },
}


class IOFailure(MultDMDError):
    """Input or output file problem, raised with the offending path."""


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"{where}: unknown key")
        if isinstance(base[key], dict) and key not in ("params",):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _require(cond, path, message):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def resolve_config(doc=None, preset=None, seed=None):
    """Fill defaults, apply the preset and seed override, and validate.

    Every validation failure names the offending key path.
    """
    doc = {} if doc is None else doc
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a JSON object")
    name = preset if preset is not None else doc.get("preset")
    cfg = copy.deepcopy(DEFAULTS)
    if name is not None:
        _require(name in PRESETS, "preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        cfg = _merge(cfg, PRESETS[name])
    cfg = _merge(cfg, doc)
    cfg["preset"] = name
    if seed is not None:
        cfg["seed"] = seed
    _require(_is_int(cfg["seed"]) and 0 <= cfg["seed"] < 2**64, "seed", "must be an unsigned 64-bit integer")
    for section in ("noise", "dictionary"):
        if cfg[section]["seed"] is None:
            cfg[section]["seed"] = cfg["seed"]
    _validate(cfg)
    return cfg


def _validate(cfg):
    data = cfg["data"]
    _require(data["source"] in ("system", "snapshots", "fields", "wave"), "data.source", "must be one of system, snapshots, fields, wave")
    if data["source"] in ("snapshots", "fields"):
        _require(isinstance(data["path"], str), "data.path", "required for file sources")
        _require(Path(data["path"]).is_file(), "data.path", f"file {data['path']!r} does not exist")
    sysc = data["system"]
    _require(sysc["kind"] in SYSTEM_KINDS, "data.system.kind", f"must be one of {SYSTEM_KINDS}")
    if data["source"] == "system":
        try:
            _system_config(cfg)
        except ConfigError as exc:
            raise ConfigError(f"data.system: {exc}") from None
    wave = data["wave"]
    _require(_is_int(wave["n_grid"]) and wave["n_grid"] >= 1, "data.wave.n_grid", "must be a positive integer")
    _require(_is_int(wave["n_snapshots"]) and wave["n_snapshots"] >= 3, "data.wave.n_snapshots", "must be an integer >= 3")
    _require(_is_num(wave["theta"]), "data.wave.theta", "must be a number")
    noise = cfg["noise"]
    _require(_is_num(noise["level"]) and noise["level"] >= 0, "noise.level", "must be a non-negative number")
    _require(_is_int(noise["seed"]), "noise.seed", "must be an integer")
    pod = cfg["pod"]
    _require(pod["rank"] is None or (_is_int(pod["rank"]) and pod["rank"] >= 1), "pod.rank", "must be null or a positive integer")
    d = cfg["dictionary"]
    _require(d["kind"] in ("kmeans", "arcs", "file"), "dictionary.kind", "must be kmeans, arcs or file")
    if d["kind"] == "file":
        _require(isinstance(d["path"], str) and Path(d["path"]).is_file(), "dictionary.path", "must name an existing file")
    for key in ("n_cells", "subsample", "n_init", "max_iter"):
        _require(_is_int(d[key]) and d[key] >= 1, f"dictionary.{key}", "must be a positive integer")
    _require(_is_int(d["seed"]), "dictionary.seed", "must be an integer")
    est = cfg["estimators"]
    _require(isinstance(est, list) and est and all(e in ESTIMATORS for e in est), "estimators", f"must be a non-empty list drawn from {ESTIMATORS}")
    _require(isinstance(cfg["allow_empty_rows"], bool), "allow_empty_rows", "must be true or false")
    _require(cfg["denominator"] in ("paper", "gram"), "denominator", "must be 'paper' or 'gram'")
    _require(_is_int(cfg["min_support"]) and cfg["min_support"] >= 0, "min_support", "must be a non-negative integer")
    n_list = cfg["elbow"]["n_list"]
    _require(
        isinstance(n_list, list) and n_list and all(_is_int(n) and n >= 1 for n in n_list),
        "elbow.n_list",
        "must be a non-empty list of positive integers",
    )
    _require(all(b >= a for a, b in zip(n_list, n_list[1:])), "elbow.n_list", "must be ascending")
    _require(_is_int(cfg["moments"]["n_max"]) and cfg["moments"]["n_max"] >= 0, "moments.n_max", "must be a non-negative integer")
    _require(_is_int(cfg["moments"]["coordinate"]) and cfg["moments"]["coordinate"] >= 0, "moments.coordinate", "must be a non-negative integer")
    _require(_is_int(cfg["modes"]["count"]) and cfg["modes"]["count"] >= 1, "modes.count", "must be a positive integer")


def _system_config(cfg):
    s = cfg["data"]["system"]
    tup = lambda v: None if v is None else tuple(float(x) for x in v)  # noqa: E731
    return SystemConfig(
        kind=s["kind"],
        params=dict(s["params"]),
        dt_sample=float(s["dt_sample"]),
        t_final=float(s["t_final"]),
        n_trajectories=int(s["n_trajectories"]),
        init_scheme=s["init_scheme"],
        init_point=tup(s["init_point"]),
        init_low=tup(s["init_low"]),
        init_high=tup(s["init_high"]),
        seed=cfg["seed"],
        burn_in=int(s["burn_in"]),
        substeps=int(s["substeps"]),
    )


def config_hash(cfg):
    """Short SHA-256 of the canonical JSON of a resolved config."""
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


class Run:
    """Output directory, config hash and per-stage timing of one invocation."""

    def __init__(self, cfg, out, workers=1):
        self.cfg = cfg
        self.out = Path(out)
        self.workers = workers
        self.hash = config_hash(cfg)
        self.timing = {}
        self.counts = {}
        self.stage_name = None
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IOFailure(f"cannot create output directory {self.out}: {exc}") from exc

    def stage(self, name):
        return _Stage(self, name)

    def path(self, name):
        return self.out / name

    @property
    def tag(self):
        return {"config": self.hash}

    def write_json(self, name, payload):
        doc = {"config_hash": self.hash, **payload}
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")

    def write_text(self, name, lines):
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"config {self.hash}\n")
            fh.write("\n".join(lines) + "\n")

    def finish(self, verb, result, summary):
        self.write_json("config.json", {"resolved": self.cfg})
        self.write_json("result.json", {"command": verb, **result})
        self.write_text("summary.txt", [f"command {verb}", *summary])
        self.write_json("timing.json", {"seconds": self.timing, "counts": self.counts})


class _Stage:
    def __init__(self, run, name):
        self.run = run
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        self.run.stage_name = self.name
        return self

    def __exit__(self, exc_type, exc, tb):
        self.run.timing[self.name] = self.run.timing.get(self.name, 0.0) + time.perf_counter() - self.t0
        return False


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _load_fields(cfg):
    data = cfg["data"]
    if data["source"] == "fields":
        fields = mio.load_fields(data["path"])
    else:
        w = data["wave"]
        fields = traveling_wave(w["n_grid"], w["n_snapshots"], w["theta"], w["theta2"], w["amplitude2"])
    level = cfg["noise"]["level"]
    if level:
        fields = add_field_noise(fields, level, cfg["noise"]["seed"])
    return fields


def load_data(run):
    """Snapshot pairs for the run plus, for field sources, the fields and POD basis."""
    cfg = run.cfg
    source = cfg["data"]["source"]
    extra = {"fields": None, "pod": None}
    with run.stage("data"):
        if source == "system":
            S = simulate(_system_config(cfg))
        elif source == "snapshots":
            S = mio.load_snapshots(cfg["data"]["path"])
        else:
            fields = _load_fields(cfg)
            rank = cfg["pod"]["rank"]
            if rank is None:
                raise ConfigError("pod.rank: required for field sources")
            B = fit_pod(fields, rank, cfg["pod"]["center"])
            S = SnapshotSet.from_trajectory(project(B, fields), meta={"source": source})
            extra = {"fields": fields, "pod": B}
        if source in ("system", "snapshots") and cfg["noise"]["level"]:
            S = add_noise(S, cfg["noise"]["level"], cfg["noise"]["seed"])
    run.counts["M"] = S.count
    run.counts["d"] = S.dim
    return S, extra


def build_dictionary(run, S):
    d = run.cfg["dictionary"]
    with run.stage("dictionary"):
        if d["kind"] == "arcs":
            if S.dim != 2:
                raise ConfigError("dictionary.kind: arcs need two-dimensional states")
            D = arc_dictionary(d["n_cells"], d["radius"], d["offset"])
        elif d["kind"] == "file":
            D = mio.load_dictionary(d["path"])
        else:
            D = fit_kmeans(S.X, d["n_cells"], d["seed"], d["max_iter"], d["subsample"], d["n_init"], run.workers)
    return D


def fit_pipeline(run, S):
    """Dictionary, weights and every configured estimator with its spectrum."""
    cfg = run.cfg
    D = build_dictionary(run, S)
    with run.stage("accumulate"), warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        T = accumulate(S, D, "merge", run.workers)
    notes = [str(w.message) for w in caught]
    run.counts["N"] = T.n_cells
    run.counts["nnz_omega"] = int(T.omega.nnz)
    fits = {}
    for name in cfg["estimators"]:
        with run.stage(f"fit_{name}"):
            if name == "multdmd":
                K = fit_multdmd(T, cfg["allow_empty_rows"])
            elif name == "edmd":
                K = fit_edmd_indicator(T)
            else:
                K = fit_exact_dmd(S)
        run.counts[f"nnz_{name}"] = K.nnz
        with run.stage(f"spectrum_{name}"):
            if name == "multdmd":
                R = cycle_spectrum(K, min_support=cfg["min_support"])
                R = with_residuals(R, T, cfg["denominator"])
            elif name == "edmd":
                R = with_residuals(dense_eig(K, min_support=cfg["min_support"]), T, cfg["denominator"])
            else:
                R = dense_eig(K)
        fits[name] = (K, R)
    return T.dictionary, T, fits, notes


def _spectrum_stats(R):
    lam = R.eigenvalues
    mod = np.abs(lam)
    stats = {
        "count": int(lam.size),
        "zero_multiplicity": int(R.zero_multiplicity),
        # cycle eigenvalues are exp(2 pi i k / L); only the last bits of |z| can differ from 1
        "on_unit_circle": int(np.count_nonzero(np.abs(mod - 1.0) <= 4 * np.finfo(float).eps)),
        "inside_0_9": int(np.count_nonzero(mod < 0.9)),
        "mean_modulus": float(mod.mean()) if lam.size else None,
    }
    if R.residuals is not None and lam.size:
        finite = R.residuals[np.isfinite(R.residuals)]
        stats["max_residual"] = float(finite.max()) if finite.size else None
    if R.cycles:
        c = R.cycles[dominant_cycle(R)]
        stats["dominant_cycle"] = {"length": c.length, "basin_size": c.basin_size, "base_angle": 2 * math.pi / c.length}
        stats["cycles"] = len(R.cycles)
    return stats


def cmd_generate(run):
    S, extra = load_data(run)
    with run.stage("write"):
        mio.save_snapshots(S, run.path("snapshots.csv"), run.tag)
        if extra["fields"] is not None:
            mio.save_fields(extra["fields"], run.path("fields.csv"), run.tag)
    manifest = {"M": S.count, "d": S.dim, "weighted": not S.is_uniform, "meta": _jsonable(S.meta)}
    return manifest, [f"pairs {S.count}", f"dimension {S.dim}"]


def cmd_elbow(run):
    S, _ = load_data(run)
    d = run.cfg["dictionary"]
    with run.stage("elbow"):
        curve = distortion_curve(
            S.X, run.cfg["elbow"]["n_list"], d["seed"],
            max_iter=d["max_iter"], subsample=d["subsample"], n_init=d["n_init"], workers=run.workers,
        )
    with open(run.path("elbow.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(mio.format_header({"K": len(curve), **run.tag}) + "\n")
        fh.write("n_cells,distortion\n")
        for n, dist in curve:
            fh.write(f"{n},{mio.FMT % dist}\n")
    return {"curve": [[n, v] for n, v in curve]}, [f"N={n} distortion {v:.6g}" for n, v in curve]


def cmd_fit(run):
    S, _ = load_data(run)
    D, T, fits, notes = fit_pipeline(run, S)
    with run.stage("write"):
        mio.save_dictionary(D, run.path("dictionary.csv"), run.tag)
        for name, (K, R) in fits.items():
            mio.save_operator(K, run.path(f"operator_{name}.csv"), run.tag)
            mio.save_spectrum(R, run.path(f"spectrum_{name}.csv"), run.tag)
            if name != "exact_dmd":
                mio.save_eigenvectors(R, D, run.path(f"eigvecs_{name}.csv"), run.tag)
    result = {"N": T.n_cells, "M": S.count, "notes": notes, "spectra": {n: _spectrum_stats(R) for n, (_, R) in fits.items()}}
    summary = [f"pairs {S.count}", f"cells {T.n_cells}"]
    for name, stats in result["spectra"].items():
        summary.append(
            f"{name}: {stats['count']} eigenvalues, {stats['on_unit_circle']} on |z|=1, "
            f"{stats['inside_0_9']} with |z|<0.9"
        )
    return result, summary


def cmd_pod(run):
    if run.cfg["data"]["source"] not in ("fields", "wave"):
        raise ConfigError("data.source: the pod command needs field data (fields or wave)")
    S, extra = load_data(run)
    B = extra["pod"]
    with run.stage("write"):
        mio.save_pod(B, run.path("pod.csv"), run.tag)
        mio.save_snapshots(S, run.path("coefficients.csv"), run.tag)
    result = {"rank": B.rank, "singular_values": B.singular_values, "energy_fractions": B.energy_fractions, "pairs": S.count}
    return result, [f"rank {B.rank}", "energy " + " ".join(f"{e:.6f}" for e in B.energy_fractions)]


def _mode_selection(R, count):
    """Eigenpairs of the dominant cycle with the ``count`` smallest |phase index| (0, +1, -1, ...)."""
    anchor = R.cycles[dominant_cycle(R)].members[0]
    idx = [int(k) for k in np.flatnonzero(R.eigvecs[anchor] != 0)]
    idx.sort(key=lambda k: (abs(int(R.phase_index[k])), -int(R.phase_index[k])))
    return np.asarray(idx[:count], dtype=np.int64)


def cmd_modes(run):
    S, extra = load_data(run)
    if "multdmd" not in run.cfg["estimators"]:
        raise ConfigError("estimators: the modes command needs multdmd")
    D, T, fits, notes = fit_pipeline(run, S)
    _, R = fits["multdmd"]
    if not R.cycles or len(R) == 0:
        raise ConfigError("min_support: no eigenpair survives the support filter")
    sel = _mode_selection(R, run.cfg["modes"]["count"])
    Rs = R.subset(sel)
    with run.stage("modes"):
        full = extra["fields"][:-1] if extra["fields"] is not None else None
        modes = koopman_modes(Rs, S, D, full_fields=full, workers=run.workers)
    with run.stage("write"):
        rows = np.vstack([np.column_stack([Rs.eigenvalues.real, Rs.eigenvalues.imag]).T, modes.real.T, modes.imag.T]).T
        # row k: re(lam), im(lam), then re(mode) over features, then im(mode)
        with open(run.path("modes.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(mio.format_header({"K": len(Rs), "D": modes.shape[1], **run.tag}) + "\n")
            np.savetxt(fh, rows, fmt=mio.FMT, delimiter=",")
    result = {
        "eigenvalues": [[float(z.real), float(z.imag)] for z in Rs.eigenvalues],
        "phase_index": Rs.phase_index,
        "cycle_length": int(Rs.cycle_lengths[0]) if len(Rs) else None,
        "features": int(modes.shape[1]),
        "notes": notes,
    }
    return result, [f"{len(Rs)} modes of the dominant cycle (length {result['cycle_length']})"]


def cmd_moments(run):
    S, _ = load_data(run)
    cfg = run.cfg
    if "multdmd" not in cfg["estimators"]:
        raise ConfigError("estimators: the moments command needs multdmd")
    coord = cfg["moments"]["coordinate"]
    if coord >= S.dim:
        raise ConfigError(f"moments.coordinate: must be below the state dimension {S.dim}")
    D, T, fits, notes = fit_pipeline(run, S)
    _, R = fits["multdmd"]
    n_max = cfg["moments"]["n_max"]
    with run.stage("moments"):
        cells = assign(D, S.X, run.workers)
        g = np.bincount(cells, weights=S.weights * S.X[:, coord], minlength=D.n_cells) / T.gram
        data = autocorrelation(S, D, g, n_max, run.workers)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            _, cond = spectral_weights(R, g, T)
            model = model_moments(R, g, T, n_max)
        notes += [str(w.message) for w in caught]
    err = np.abs(model - data)
    with open(run.path("moments.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(mio.format_header({"n_max": n_max, **run.tag}) + "\n")
        fh.write("n,data_re,data_im,model_re,model_im,abs_diff\n")
        for n in range(n_max + 1):
            vals = (data[n].real, data[n].imag, model[n].real, model[n].imag, err[n])
            fh.write(f"{n}," + ",".join(mio.FMT % v for v in vals) + "\n")
    result = {"n_max": n_max, "max_abs_diff": float(err.max()), "condition_number": cond, "notes": notes}
    return result, [f"max |model - data| over n<={n_max}: {err.max():.3e}"]


COMMANDS = {
    "generate": cmd_generate,
    "elbow": cmd_elbow,
    "fit": cmd_fit,
    "pod": cmd_pod,
    "modes": cmd_modes,
    "moments": cmd_moments,
}


def _jsonable(meta):
    return json.loads(json.dumps(meta, default=_json_default))


def build_parser():
    parser = argparse.ArgumentParser(prog="multdmd", description="Multiplicative DMD pipelines.")
    parser.add_argument("verb", choices=VERBS)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="start from a named desk-scale preset")
    parser.add_argument("--out", default="multdmd-out", help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker cap for nearest-centroid queries")
    parser.add_argument("--seed", type=int, help="seed overriding the config's top-level seed")
    return parser


def _read_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read config {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def run(argv=None):
    """Parse ``argv``, execute the verb, and return the exit code."""
    args = build_parser().parse_args(argv)
    stage = None
    try:
        if args.threads < 1:
            raise ConfigError("--threads: must be at least 1")
        doc = _read_config(args.config) if args.config else {}
        cfg = resolve_config(doc, args.preset, args.seed)
        r = Run(cfg, args.out, args.threads)
        try:
            result, summary = COMMANDS[args.verb](r)
            r.finish(args.verb, result, summary)
        finally:
            stage = r.stage_name
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config error", exc, stage)
    except (ParseError, IOFailure, OSError) as exc:
        return _fail(EXIT_IO, "I/O error", exc, stage)
    except (MultDMDError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, "numerical failure", exc, stage)
    return EXIT_OK


def _fail(code, kind, exc, stage):
    where = f" in stage {stage!r}" if stage else ""
    print(f"multdmd: {kind}{where}: {exc}", file=sys.stderr)
    return code


def main(argv=None):
    sys.exit(run(argv))
