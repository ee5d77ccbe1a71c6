"""YAML config loading and the command line entry points."""

import csv
import json

import pytest

from occlusim.cli import main
from occlusim.config import build_configs, load_config_file, load_configs

DESK_YAML = """
belief:
  n_particles: 40
planner:
  n_samples: 28
  horizon: 28
  cem_iters: 3
"""


@pytest.fixture
def desk_yaml(tmp_path):
    p = tmp_path / "desk.yaml"
    p.write_text(DESK_YAML)
    return p


# ------------------------------------------------------------------- config

def test_load_configs_defaults():
    env_cfg, agent_cfg, rule_cfg = load_configs(None)
    assert env_cfg.dt == 0.1
    assert agent_cfg.belief.n_particles == 100
    assert agent_cfg.planner.n_samples == 100
    assert rule_cfg.v_caution == 3.0


def test_config_overrides_every_section(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(
        """
env:
  dt: 0.05
  max_steps: 99
  collision_radius: 1.5
  occluder: {cx: 4.0, length: 8.0}
belief:
  n_particles: 17
  prior_exist: 0.4
planner:
  rho_inject: 0.55
  kappa_collision: 1234.0
rule:
  v_caution: 2.0
"""
    )
    env_cfg, agent_cfg, rule_cfg = load_configs(p)
    assert env_cfg.dt == 0.05
    assert env_cfg.max_steps == 99
    assert env_cfg.collision_radius == 1.5
    # partial rect override merges with the default rect
    assert env_cfg.occluder.cx == 4.0
    assert env_cfg.occluder.length == 8.0
    assert env_cfg.occluder.width == 4.0
    assert agent_cfg.belief.n_particles == 17
    assert agent_cfg.belief.prior_exist == 0.4
    assert agent_cfg.planner.rho_inject == 0.55
    assert agent_cfg.planner.kappa_collision == 1234.0
    assert rule_cfg.v_caution == 2.0


def test_config_rejects_unknown_keys(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("planner:\n  kappa_colision: 5\n")
    with pytest.raises(ValueError, match="kappa_colision"):
        load_configs(p)


def test_config_rejects_unknown_section(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("plannr:\n  n_samples: 5\n")
    with pytest.raises(ValueError):
        load_configs(p)


def test_config_type_coercion(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("belief:\n  n_particles: 12.5\n")
    with pytest.raises(ValueError):
        load_configs(p)
    p.write_text("env:\n  obs_noise_std: [0.1, 0.2]\n")
    env_cfg, _, _ = load_configs(p)
    assert env_cfg.obs_noise_std == (0.1, 0.2)
    p.write_text("env:\n  obs_noise_std: [0.1]\n")
    with pytest.raises(ValueError):
        load_configs(p)


def test_config_missing_file():
    with pytest.raises(FileNotFoundError):
        load_config_file("/nonexistent/path.yaml")


def test_build_configs_requires_mapping():
    with pytest.raises(ValueError):
        build_configs([1, 2, 3])


# ---------------------------------------------------------------------- cli

def test_cli_run(tmp_path, desk_yaml, capsys):
    out = tmp_path / "ep.jsonl"
    code = main([
        "run", "--mode", "hesitant", "--seed", "3",
        "--config", str(desk_yaml), "--out", str(out),
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert "status=" in text and "seed=3" in text
    lines = out.read_text().strip().splitlines()
    assert len(lines) > 5
    first = json.loads(lines[0])
    assert "ego" in first and "obs" in first


def test_cli_run_rejects_bad_mode(capsys):
    with pytest.raises(SystemExit):
        main(["run", "--mode", "sprinting"])


def test_cli_bad_config_path_is_error(capsys):
    code = main(["run", "--config", "/nonexistent/x.yaml"])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_cli_compare_rejects_unknown_agent(desk_yaml, capsys):
    code = main(["compare", "--agents", "ours,ppo", "--episodes", "1", "--config", str(desk_yaml)])
    assert code == 2
    assert "unknown agent" in capsys.readouterr().err


def test_cli_ablate_writes_csv(tmp_path, desk_yaml, capsys):
    out = tmp_path / "sweep.csv"
    code = main([
        "ablate", "--axis", "rho", "--values", "0,0.3", "--episodes", "1",
        "--config", str(desk_yaml), "--out", str(out),
    ])
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    labels = {r["label"] for r in rows}
    assert labels == {"rho=0", "rho=0.3"}
    assert sum(r["mode"] == "pooled" for r in rows) == 2
    assert "CR" in capsys.readouterr().out


def test_cli_bench(tmp_path, desk_yaml, capsys):
    out = tmp_path / "bench.csv"
    code = main([
        "bench", "--n", "10", "--m", "8", "--repeats", "1", "--loops", "2",
        "--config", str(desk_yaml), "--out", str(out),
    ])
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert float(rows[0]["ms_per_step"]) > 0.0
