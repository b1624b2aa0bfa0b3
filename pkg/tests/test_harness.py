import csv
import json

import numpy as np
import pytest
import yaml

from dbandit.errors import ConfigError, DivergenceError
from dbandit.harness import runner
from dbandit.harness.cli import main
from dbandit.harness.config import ExperimentConfig, load_config, preset_names
from dbandit.harness.verify import LEVELS, verify_suite


def _small(**over):
    data = dict(load_config("fig2").raw)
    data.update({"horizon": 5, "replicates": 2, **over})
    return ExperimentConfig.from_mapping(data)


def test_presets_listed_and_load():
    names = preset_names()
    assert {"fig2", "fig3", "consensus"} <= set(names)
    for name in names:
        exp = load_config(name)
        assert exp.name == name
    fig3 = load_config("fig3")
    assert fig3.alpha == {"kind": "constant", "value": 0.005}
    assert fig3.mu == {"kind": "constant", "value": 0.001}
    assert fig3.estimators == ["full", "two_point", "residual", "one_point"]
    assert load_config("fig2").horizon == 2000 and load_config("fig2").replicates == 20


def test_config_collects_every_problem():
    raw = dict(load_config("fig2").raw)
    raw.update(estimators=["residual", "three_point"], horizon=0, alpha={"kind": "cosine"},
               colour="red")
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_mapping(raw)
    text = " ".join(info.value.problems)
    for needle in ("three_point", "horizon", "alpha.kind", "colour"):
        assert needle in text
    assert len(info.value.problems) == 4


def test_config_missing_file_and_preset(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.yaml"))
    with pytest.raises(ConfigError):
        load_config("fig9")
    bad = tmp_path / "bad.yaml"
    bad.write_text("horizon: [1,\n")
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_single_round_single_replicate(tmp_path):
    exp = _small(horizon=1, replicates=1, estimators=["residual"])
    runner.run_experiment(exp, out_dir=tmp_path, variation=False)
    rows = list(csv.reader(open(tmp_path / "residual" / "run_000.csv")))
    assert rows[0] == ["k", "agent", "x0", "x1", "loss", "regret_increment", "cum_regret",
                       "consensus_error", "fn_queries"]
    assert len(rows) == 2 and rows[1][0] == "1"


def test_summary_and_mean_files(tmp_path):
    exp = _small()
    summary = runner.run_experiment(exp, out_dir=tmp_path)
    on_disk = json.loads((tmp_path / "summary.json").read_text())
    assert on_disk["seed"] == 0 and on_disk["config"]["horizon"] == 5
    assert on_disk["graph"]["violations"] == []
    assert set(on_disk["estimators"]) == {"full", "two_point", "residual", "one_point"}
    assert on_disk["variation"]["omega_T"] > 0 and on_disk["variation"]["Theta_T"] > 0
    assert "wall_time_s" in on_disk
    for est, entry in summary["estimators"].items():
        assert entry["completed"] == 2 and entry["failed"] == []
        mean = np.loadtxt(tmp_path / est / "mean.csv", delimiter=",", skiprows=1)
        runs = [np.loadtxt(tmp_path / est / f"run_{r:03d}.csv", delimiter=",", skiprows=1)[:, 6]
                for r in range(2)]
        np.testing.assert_allclose(mean[:, 1], np.mean(runs, axis=0), rtol=1e-15)
        assert entry["final_mean_regret"] == pytest.approx(mean[-1, 1])


def test_failed_replicate_excluded(tmp_path, monkeypatch):
    real = runner.run

    def flaky(config, graph, losses, cset, seed, on_round=None):
        if seed == 1:
            raise DivergenceError(3, "gradient estimate")
        return real(config, graph, losses, cset, seed, on_round)

    monkeypatch.setattr(runner, "run", flaky)
    summary = runner.run_experiment(_small(estimators=["two_point"]), out_dir=tmp_path,
                                    variation=False)
    entry = summary["estimators"]["two_point"]
    assert entry["completed"] == 1
    assert entry["failed"][0]["replicate"] == 1 and entry["failed"][0]["round"] == 3
    assert not (tmp_path / "two_point" / "run_001.csv").exists()
    solo = np.loadtxt(tmp_path / "two_point" / "run_000.csv", delimiter=",", skiprows=1)[:, 6]
    mean = np.loadtxt(tmp_path / "two_point" / "mean.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(mean[:, 1], solo)


def test_graph_agent_mismatch_is_config_error():
    exp = _small(graph={"n": 3, "parts": [[[0, 1], [1, 2], [2, 0]]]})
    with pytest.raises(ConfigError):
        runner.build_components(exp)


def test_theorem_mode_step(tmp_path):
    exp = _small(alpha={"kind": "theorem", "exponent": 0.5, "L0": 10.0})
    _, _, _, alg = runner.build_components(exp)
    assert alg.M_override > 1e6
    assert alg.alpha(1) == pytest.approx(1 / (2 * alg.M_override))
    with pytest.raises(ConfigError):
        runner.build_components(_small(alpha={"kind": "theorem", "exponent": 0.25, "M": 5.0}))


def test_cli_run_and_presets(tmp_path, capsys):
    assert main(["presets", "list"]) == 0
    assert "fig2" in capsys.readouterr().out.split()
    assert main(["presets", "show", "fig3"]) == 0
    assert "nonconvex" in capsys.readouterr().out
    code = main(["run", "--config", "fig2", "--out", str(tmp_path), "--horizon", "3",
                 "--replicates", "1"])
    assert code == 0
    assert "residual" in capsys.readouterr().out
    assert (tmp_path / "summary.json").exists()


def test_cli_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(yaml.safe_dump({"horizon": -1, "estimators": ["nope"]}))
    assert main(["run", "--config", str(cfg)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config" and len(err["problems"]) >= 3
    assert main(["presets", "show", "nope"]) == 2


def test_verify_fast_level():
    results = verify_suite("fast")
    assert [r.name for r in results] == ["mixing_bound", "smoothing_error", "residual_unbiased",
                                         "second_moment", "variance_ratio", "consensus_trend"]
    assert all(r.passed for r in results), [r.line() for r in results]
    assert LEVELS["full"]["samples"] == 100_000
