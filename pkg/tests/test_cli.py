import json

import pytest

from localspde.cli import main


def _write_cfg(tmp_path, **kw):
    cfg = dict(kind="mc-rates", theta=[1.0, 0.5], deltas=[1 / 8],
               m_rule={"kind": "fixed", "m": 2}, T=0.25, replicates=3,
               seed=4, dt_factor=20.0, modes_per_delta=2.0, min_modes=24,
               out=str(tmp_path / "results"))
    cfg.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_cli_mc_rates(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert main(["mc-rates", "--config", str(cfg), "--quiet"]) == 0
    out = tmp_path / "results" / "mc-rates.csv"
    assert out.exists()
    manifest = json.loads(
        (tmp_path / "results" / "mc-rates.manifest.json").read_text())
    assert manifest["config"]["seed"] == 4


def test_cli_seed_override_changes_output(tmp_path):
    cfg = _write_cfg(tmp_path)
    main(["mc-rates", "--config", str(cfg), "--quiet"])
    first = (tmp_path / "results" / "mc-rates.csv").read_text()
    main(["mc-rates", "--config", str(cfg), "--quiet"])
    assert (tmp_path / "results" / "mc-rates.csv").read_text() == first
    main(["mc-rates", "--config", str(cfg), "--seed", "99", "--quiet"])
    assert (tmp_path / "results" / "mc-rates.csv").read_text() != first


def test_cli_simulate_and_estimate(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--quiet",
                 "--space-points", "16", "--time-points", "8"]) == 0
    res = tmp_path / "results"
    assert (res / "trajectory.csv").exists()
    assert (res / "heatmap.csv").exists()
    assert main(["estimate", "--config", str(cfg), "--quiet"]) == 0
    assert (res / "estimate.csv").exists()


def test_cli_rkhs_certify(tmp_path):
    cfg = _write_cfg(tmp_path, kind="rkhs-certify", theta=[1.0, 0.0, 0.0],
                     deltas=[0.05], theta3_grid=[0.0, 0.1])
    assert main(["rkhs-certify", "--config", str(cfg), "--quiet"]) == 0
    assert (tmp_path / "results" / "rkhs-certify.csv").exists()


def test_cli_fisher_alias(tmp_path):
    cfg = _write_cfg(tmp_path, kind="fisher-convergence", replicates=3)
    assert main(["fisher", "--config", str(cfg), "--quiet"]) == 0
    assert (tmp_path / "results" / "fisher-convergence.csv").exists()


def test_cli_requires_command():
    with pytest.raises(SystemExit):
        main([])
