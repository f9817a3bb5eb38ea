from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from toricsim.__main__ import main
from toricsim.analysis import find_crossing, static_curve
from toricsim.config import ConfigError, ExperimentConfig, parse_config
from toricsim.lattice import LatticeSpec, StabilizerCode, build_square
from toricsim.runner import read_table, run


def test_minimal_walk_config_defaults():
    cfg = parse_config('{"experiment": "walk", "L": 16, "h": 1.0}')
    assert cfg.k == 10 and cfg.bootstrap == 1000 and cfg.lifetime_level == 0.9
    assert cfg.per_decade == 64


def test_range_error_names_field():
    with pytest.raises(ConfigError, match="p_mix"):
        parse_config('{"experiment": "walk", "p_mix": 1.3}')


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="pmix"):
        parse_config('{"experiment": "walk", "pmix": 0.3}')


def test_bad_json():
    with pytest.raises(ConfigError):
        parse_config("{experiment: walk")


def test_round_trip():
    cfg = parse_config('{"experiment": "dynamics", "L": 12, "kind": "random", "sigma": 2.5, "disorder": "ising",'
                       ' "sizes": [8, 12], "N_max": 20.0}')
    assert cfg.N_max == 20 and isinstance(cfg.N_max, int)
    assert parse_config(cfg.to_json()) == cfg


def test_overrides_and_default_experiment():
    cfg = parse_config('{"L": 8}', "bound", master_seed=7, workers=None)
    assert cfg.experiment == "bound" and cfg.master_seed == 7 and cfg.workers == 1


def test_bound_table(tmp_path):
    run(ExperimentConfig("bound", p_x_grid=[0.0674, 0.110028]), tmp_path)
    meta, cols, rows = read_table(tmp_path / "contour.csv")
    assert cols == ["p_x", "p_z", "css_bound"]
    assert float(rows[0][1]) == pytest.approx(0.1640, abs=1e-3)
    assert float(rows[1][1]) == pytest.approx(0.110028, abs=1e-4)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert meta["manifest_sha256"] == manifest["sha256"]


def test_threshold_end_to_end_matches_module(tmp_path):
    cfg = ExperimentConfig("static_threshold", sizes=[16, 24], f_grid=[0.08, 0.1, 0.12, 0.14], n_instances=4,
                           n_errors=100, bootstrap=100, master_seed=3)
    run(cfg, tmp_path)
    _, cols, rows = read_table(tmp_path / "threshold.csv")
    f_cr, lo, hi = (float(rows[0][cols.index(c)]) for c in ("f_cr", "ci_low", "ci_high"))
    curves = [static_curve(LatticeSpec(L), cfg.f_grid, 4, 100, 3) for L in (16, 24)]
    est = find_crossing(curves, "avg", 100, seed=3)
    assert f_cr == est.f_cr and (lo, hi) == est.ci
    assert lo <= f_cr <= hi


def test_workers_do_not_change_bytes(tmp_path):
    base = dict(sizes=[8, 12], f_grid=[0.08, 0.12, 0.16], n_instances=4, n_errors=50, bootstrap=50,
                kind="random", operator="pooled")
    run(ExperimentConfig("static_threshold", workers=1, **base), tmp_path / "a")
    run(ExperimentConfig("static_threshold", workers=3, **base), tmp_path / "b")
    for name in ("curves.csv", "threshold.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_dynamics_outputs(tmp_path):
    cfg = ExperimentConfig("dynamics", L=8, n_traj=10, t_min=0.01, t_end=1.0, per_decade=8, disorder="ising",
                           sigma=1.0, A=0.5)
    files = run(cfg, tmp_path)
    assert {f.name for f in files} == {"timeseries_L8.csv", "lifetime.csv", "manifest.json"}
    _, cols, rows = read_table(tmp_path / "timeseries_L8.csv")
    assert cols[0] == "t" and "z1_ec_mean" in cols
    assert float(rows[0][cols.index("anyons_mean")]) == 0.0


def test_generate_lattice_and_decode(tmp_path):
    assert main(["generate-lattice", "--out", str(tmp_path / "g")]) == 0
    code = StabilizerCode.from_json((tmp_path / "g" / "lattice.json").read_text())
    assert code == build_square(16)
    _, _, rows = read_table(tmp_path / "g" / "validation.csv")
    assert all(r[1] == "1" for r in rows)

    error = np.zeros(code.num_spins, int)
    error[[3, 5]] = 1
    (tmp_path / "e.json").write_text(json.dumps(error.tolist()))
    cfg = {"code_file": str(tmp_path / "g" / "lattice.json"), "error_file": str(tmp_path / "e.json")}
    (tmp_path / "d.json").write_text(json.dumps(cfg))
    assert main(["decode", "--config", str(tmp_path / "d.json"), "--out", str(tmp_path / "d")]) == 0
    out = json.loads((tmp_path / "d" / "decode.json").read_text())
    assert out["corrected_parities"] == [1, 1]
    assert len(out["anyons"]) == 2 * len(out["matching"])


def test_cli_config_error_exit_code(tmp_path, capsys):
    (tmp_path / "c.json").write_text('{"p_mix": 2}')
    assert main(["walk", "--config", str(tmp_path / "c.json")]) == 2
    assert "p_mix" in capsys.readouterr().err


def test_cli_experiment_mismatch(tmp_path):
    (tmp_path / "c.json").write_text('{"experiment": "walk"}')
    assert main(["bound", "--config", str(tmp_path / "c.json")]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "toricsim", "bound", "--out", str(tmp_path), "--seed", "4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "contour.csv").exists()


def test_worker_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("TORICSIM_WORKERS", "2")
    assert main(["bound", "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["workers"] == 2
