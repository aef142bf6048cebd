import csv
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from starkloop import cli
from starkloop.config import EXPERIMENTS, ExperimentConfig
from starkloop.errors import ConfigError
from starkloop.experiments import run_experiment

FAST = {
    "phase_law": "phi_points = 16\n",
    "response_map": "omega_grid = [0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2]\n",
    "theta_sweep": "",
    "rmse_uniform": "trials = 1000\nsnr_grid = [100.0, 1000.0]\n",
    "rmse_nonuniform": "trials = 1000\nsnr_grid = [1000.0]\nrel_spreads = [0.02]\nnode_count = 41\n",
    "gain_curve": "gain_spreads = [0.01, 0.02]\nnode_count = 41\n",
    "validate": "time_domain = false\nn_values = [1, 2]\nn_ref = 4\n",
}


def write_config(tmp_path, experiment, extra=""):
    path = tmp_path / f"{experiment}.toml"
    path.write_text(FAST[experiment] + extra, encoding="utf-8")
    return path


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_every_experiment_runs(tmp_path, experiment, capsys):
    cfg = write_config(tmp_path, experiment)
    rc = cli.main([experiment, "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 0
    folder = tmp_path / "out" / experiment
    assert capsys.readouterr().out.strip() == str(folder)
    prov = json.loads((folder / "manifest.json").read_text())["provenance"]
    assert prov["seed"] == 0 and prov["n_max"] == 3
    assert prov["epsilon_n"] < 1e-10
    tables = list(folder.glob("*.csv"))
    assert tables and all(read_rows(t) for t in tables)
    assert ExperimentConfig.load(folder / "config.toml").experiment == experiment


def test_reruns_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, "rmse_uniform")
    for name in ("a", "b"):
        assert cli.main(["rmse_uniform", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "rmse_uniform" / "rmse_uniform.csv").read_bytes()
    b = (tmp_path / "b" / "rmse_uniform" / "rmse_uniform.csv").read_bytes()
    assert a == b
    assert cli.main(["rmse_uniform", "--config", str(cfg), "--out", str(tmp_path / "c"),
                     "--seed", "7"]) == 0
    assert (tmp_path / "c" / "rmse_uniform" / "rmse_uniform.csv").read_bytes() != a


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    cfg = write_config(tmp_path, "phase_law")
    assert cli.main(["phase_law", "--config", str(cfg)]) == 0
    assert (tmp_path / "env" / "phase_law" / "phase_law.csv").exists()


def test_phase_law_table_is_linear(tmp_path):
    bundle = run_experiment(ExperimentConfig(experiment="phase_law", phi_points=8))
    cols = next(iter(bundle.tables.values())).columns
    assert len(next(iter(cols.values()))) == 8


@pytest.mark.parametrize("text", ["bogus_key = 1\n", "trials = 10\n", "theta = 2.0\n",
                                  "seed = \"x\"\n", "this is not toml"])
def test_config_errors_exit_2(tmp_path, text, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(text, encoding="utf-8")
    assert cli.main(["phase_law", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_and_bad_threads(tmp_path):
    assert cli.main(["phase_law", "--config", str(tmp_path / "none.toml")]) == 2
    assert cli.main(["phase_law", "--threads", "0", "--out", str(tmp_path)]) == 2


def test_numerical_failure_exits_3(tmp_path, capsys):
    path = tmp_path / "dark.toml"
    path.write_text("omega_p_rabi = 0.0\n", encoding="utf-8")
    assert cli.main(["theta_sweep", "--config", str(path), "--out", str(tmp_path)]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_unknown_experiment_is_rejected():
    with pytest.raises(SystemExit):
        cli.main(["nonsense"])


@given(st.integers(min_value=0, max_value=2 ** 31), st.integers(min_value=1, max_value=7),
       st.floats(min_value=0.0, max_value=0.78), st.lists(st.floats(min_value=1.0, max_value=1e5),
                                                          max_size=4))
def test_config_toml_round_trip(seed, n_max, theta, snr):
    cfg = ExperimentConfig(seed=seed, n_max=n_max, theta=theta, snr_grid=snr)
    assert ExperimentConfig.from_toml(cfg.to_toml()) == cfg


def test_config_error_names_field():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig(n_values=[1, 9])
    assert info.value.field == "n_ref"
