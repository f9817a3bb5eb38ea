"""Run an :class:`ExperimentConfig` and write tables plus a manifest.

Every table starts with ``#`` metadata lines (experiment, version, manifest
hash) followed by CSV.  The manifest hash covers the configuration, the
derived seeds and the version, not timing, so replaying a manifest gives
byte-identical tables.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import subprocess
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (NoCrossing, bound_contour, css_bound, find_crossing, lifetime, static_curve,
                       task_seed, threshold_from_dynamics)
from .config import ExperimentConfig
from .decoder import Decoder, extract_syndrome, logical_parities
from .kmc import Schedule, ensemble_run, instance_seed, trajectory_seed
from .lattice import StabilizerCode, build_code, validate
from .qwalk import WalkSpec, run_walk_ensemble


class ExperimentError(RuntimeError):
    """A module error, re-raised with the experiment name attached."""


def version_string():
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"toricsim {__version__}" + (f"+g{rev}" if rev else "")


def derived_seeds(config: ExperimentConfig):
    """Per-task seeds, a pure function of (config, master_seed)."""
    m = config.master_seed
    if config.experiment == "dynamics":
        n_inst = config.dynamic_instances or config.n_traj
        return {
            "rule": "trajectory i: SeedSequence(master, spawn_key=(0, i)); instance j: spawn_key=(1, j) lattice, (2, j) disorder",
            "trajectories": [trajectory_seed(m, i) for i in range(config.n_traj)],
            "lattice_instances": [instance_seed(m, j, 1) for j in range(n_inst)] if config.kind == "random" else [],
            "disorder_instances": [instance_seed(m, j, 2) for j in range(n_inst)] if config.disorder != "none" else [],
        }
    if config.experiment == "static_threshold":
        return {
            "rule": "instance i of size L: lattice spawn_key=(1, L, i); errors at grid point g: spawn_key=(2, L, i, g)",
            "lattice_instances": {L: [task_seed(m, 1, L, i) for i in range(config.n_instances)]
                                  for L in config.size_list()} if config.kind == "random" else {},
        }
    if config.experiment == "walk":
        return {"rule": "realization i: SeedSequence(master, spawn_key=(i,)) -> (lattice, disorder)"}
    return {}


# fields that cannot change any output value, kept out of the hash
_UNHASHED = ("workers", "output")


def manifest_for(config: ExperimentConfig):
    body = {"config": config.to_dict(), "seeds": derived_seeds(config), "version": version_string()}
    hashed = dict(body, config={k: v for k, v in body["config"].items() if k not in _UNHASHED})
    digest = hashlib.sha256(json.dumps(hashed, sort_keys=True, default=str).encode()).hexdigest()
    return body, digest


def write_table(path, header_rows, columns, rows, meta):
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}: {value}\n")
    for line in header_rows:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_table(path):
    """(metadata dict, column names, rows as lists of strings)."""
    meta, lines = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            if ": " in line:
                k, v = line[2:].split(": ", 1)
                meta[k] = v
        else:
            lines.append(line)
    rows = list(csv.reader(lines))
    return meta, rows[0], rows[1:]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def run(config: ExperimentConfig, out_dir=None):
    """Dispatch to the experiment pipeline; returns the list of files written."""
    out = Path(out_dir or config.output)
    out.mkdir(parents=True, exist_ok=True)
    body, digest = manifest_for(config)
    meta = {"experiment": config.experiment, "version": body["version"], "manifest_sha256": digest,
            "master_seed": config.master_seed}
    started = time.time()
    try:
        files = _DISPATCH[config.experiment](config, out, meta)
    except Exception as exc:
        raise ExperimentError(f"{config.experiment}: {exc}") from exc
    manifest = dict(body, sha256=digest, elapsed_seconds=round(time.time() - started, 3),
                    outputs=[p.name for p in files])
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, sort_keys=True, indent=1, default=str))
    return files + [mpath]


def _run_generate_lattice(config, out, meta):
    code = build_code(config.lattice_spec())
    report = validate(code)
    lat = out / "lattice.json"
    lat.write_text(code.to_json())
    rows = [(name, int(ok), json.dumps(offenders[:20])) for name, (ok, offenders) in report.checks.items()]
    val = out / "validation.csv"
    write_table(val, [f"num_spins={code.num_spins} plaquettes={code.num_plaquettes} stars={code.num_stars}"],
                ["check", "passed", "offenders"], rows, meta)
    return [lat, val]


def _run_static_threshold(config, out, meta):
    curves = []
    sizes = config.size_list()
    for L in sizes:
        curves.append(static_curve(config.lattice_spec(L), config.f_grid, config.n_instances, config.n_errors,
                                   config.master_seed, config.k, config.sector, workers=config.workers))
    rows = []
    for c in curves:
        lo, hi = c.ci("avg", config.bootstrap, seed=config.master_seed)
        mean, z1, z2 = c.mean("avg"), c.mean("Z1"), c.mean("Z2")
        for i, f in enumerate(c.grid):
            rows.append((c.L, f, mean[i], lo[i], hi[i], z1[i], z2[i], int(c.n_samples()[i] * config.n_errors)))
    cpath = out / "curves.csv"
    write_table(cpath, [f"sector={config.sector} kind={config.kind} p_mix={config.p_mix}"],
                ["L", "f", "mean", "ci_low", "ci_high", "mean_1", "mean_2", "n_samples"], rows, meta)
    files = [cpath]
    if len(sizes) >= 2:
        trow = []
        try:
            est = find_crossing(curves, config.operator, config.bootstrap, seed=config.master_seed)
            trow.append((config.operator, est.f_cr, est.ci[0], est.ci[1], " ".join(map(str, est.sizes)), ""))
        except NoCrossing as exc:
            trow.append((config.operator, "nan", "nan", "nan", " ".join(map(str, sizes)), str(exc)))
        tpath = out / "threshold.csv"
        write_table(tpath, [], ["operator", "f_cr", "ci_low", "ci_high", "sizes", "note"], trow, meta)
        files.append(tpath)
    return files


def _run_dynamics(config, out, meta):
    schedule = Schedule.log(config.t_min, config.t_end, config.per_decade)
    series = {}
    files = []
    life_rows = []
    for L in config.size_list():
        ts = ensemble_run(config.dynamics_config(L), schedule, config.n_traj, config.master_seed, config.workers)
        series[L] = ts
        cols = ["t"]
        for name in ("anyons", "errors", "z1", "z2", "z1_ec", "z2_ec"):
            cols += [f"{name}_mean", f"{name}_stderr"]
        rows = []
        for i, t in enumerate(ts.times):
            row = [t]
            for name in ("anyons", "errors", "z1", "z2", "z1_ec", "z2_ec"):
                row += [ts.mean[name][i], ts.stderr[name][i]]
            rows.append(row)
        path = out / f"timeseries_L{L}.csv"
        write_table(path, [f"L={L} n_traj={config.n_traj} num_spins={ts.num_spins}"], cols, rows, meta)
        files.append(path)
        res = lifetime(ts.times, ts.observable("z_ec"), config.lifetime_level)
        life_rows.append((L, res.tau, int(res.censored), config.lifetime_level))
    lpath = out / "lifetime.csv"
    write_table(lpath, [], ["L", "tau", "censored", "level"], life_rows, meta)
    files.append(lpath)
    if len(series) >= 2:
        try:
            dt = threshold_from_dynamics(series, n_boot=config.bootstrap, seed=config.master_seed)
            row = (dt.f_cr, dt.ci[0], dt.ci[1], dt.tau, dt.tau_ci[0], dt.tau_ci[1], "")
        except NoCrossing as exc:
            row = ("nan",) * 6 + (str(exc),)
        tpath = out / "dynamic_threshold.csv"
        write_table(tpath, [], ["f_cr", "ci_low", "ci_high", "tau", "tau_low", "tau_high", "note"], [row], meta)
        files.append(tpath)
    return files


def _run_walk(config, out, meta):
    times = tuple(np.concatenate([[0.0], np.geomspace(config.t_max / 10 ** 3, config.t_max, config.n_times)]))
    spec = WalkSpec(config.lattice_spec(), config.h, config.J, config.sigma, times, config.samples,
                    config.master_seed, config.spread_mode)
    res = run_walk_ensemble(spec)
    rows = [(t, m, s, int(w), int(b)) for t, m, s, w, b in zip(res.times, res.mean, res.stderr, res.window, res.boundary)]
    spath = out / "spread.csv"
    write_table(spath, [f"L={config.L} kind={config.kind} sigma/h={spec.sigma_over_h}"],
                ["t", "delta_mean", "delta_stderr", "in_fit_window", "boundary"], rows, meta)
    fpath = out / "fit.csv"
    write_table(fpath, [], ["exponent", "ci_low", "ci_high", "samples"],
                [(res.exponent, res.exponent_ci[0], res.exponent_ci[1], config.samples)], meta)
    return [spath, fpath]


def _run_bound(config, out, meta):
    rows = []
    for px in config.p_x_grid:
        pz = bound_contour(px)
        rows.append((px, pz, css_bound(px, pz)))
    path = out / "contour.csv"
    write_table(path, [], ["p_x", "p_z", "css_bound"], rows, meta)
    return [path]


def _run_decode(config, out, meta):
    code = StabilizerCode.from_json(Path(config.code_file).read_text())
    raw = json.loads(Path(config.error_file).read_text())
    error = np.zeros(code.num_spins, np.uint8)
    if isinstance(raw, dict):
        error[np.asarray(raw["flipped"], dtype=np.int64)] = 1
    else:
        error[:] = np.asarray(raw, dtype=np.uint8)
    anyons = np.nonzero(extract_syndrome(code, error))[0]
    corr = Decoder(code, config.k).decode(anyons)
    residual = error.copy()
    residual[corr.spins] ^= 1
    result = {
        "anyons": anyons.tolist(),
        "matching": [list(p) for p in corr.pairs],
        "correction": corr.spins.tolist(),
        "uncorrected_parities": list(logical_parities(code, error)),
        "corrected_parities": list(logical_parities(code, residual)),
        "k_used": corr.k_used,
        **{k: str(v) for k, v in meta.items()},
    }
    path = out / "decode.json"
    path.write_text(json.dumps(result, indent=1))
    return [path]


_DISPATCH = {
    "generate_lattice": _run_generate_lattice,
    "static_threshold": _run_static_threshold,
    "dynamics": _run_dynamics,
    "walk": _run_walk,
    "bound": _run_bound,
    "decode": _run_decode,
}
