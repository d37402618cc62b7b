import json
from pathlib import Path

import numpy as np
import pytest

from dml.cli import main
from dml.harness import (
    ConfigError,
    ExperimentConfig,
    compare,
    default_maze_phases,
    derive_seed,
    read_epochs_csv,
    read_policy_csv,
    read_values_csv,
    run,
    substream,
    sweep,
)


def tiny_bandit(seed=7, epochs=200, backend="spiking"):
    return ExperimentConfig(task="bandit", backend=backend, epochs=epochs, seed=seed)


def read_bytes_tree(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}


def test_run_writes_inventoried_artifacts(tmp_path):
    man = run(tiny_bandit(), tmp_path / "r")
    for name in man["files"]:
        p = tmp_path / "r" / name
        assert p.exists() and p.stat().st_size > 0
    assert (tmp_path / "r" / "manifest.json").exists()
    assert man["summary"]["epochs"] == 200
    log = read_epochs_csv(tmp_path / "r" / "epochs.csv")
    assert len(log) == 200
    values = read_values_csv(tmp_path / "r" / "values.csv")
    assert values.shape == (1, 4)
    assert len(read_policy_csv(tmp_path / "r" / "policy.csv")) == 1


def test_moa_series_shape_from_protocol(tmp_path):
    man = run(tiny_bandit(epochs=2000), tmp_path / "r")
    lines = (tmp_path / "r" / "moa.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 20  # header + 2000/100 windows


def test_run_reproducible_byte_identical(tmp_path):
    run(tiny_bandit(), tmp_path / "a")
    run(tiny_bandit(), tmp_path / "b")
    assert read_bytes_tree(tmp_path / "a") == read_bytes_tree(tmp_path / "b")


def test_run_refuses_overwrite(tmp_path):
    run(tiny_bandit(), tmp_path / "r")
    with pytest.raises(FileExistsError):
        run(tiny_bandit(), tmp_path / "r")
    run(tiny_bandit(), tmp_path / "r", force=True)


def test_maze_run_artifacts(tmp_path):
    cfg = ExperimentConfig(
        task="maze", backend="spiking", epsilon=0.0, seed=1,
        maze_phases=default_maze_phases(120),
    )
    man = run(cfg, tmp_path / "m")
    for k in range(3):
        for stem in ("returns_phase", "oracle_policy_phase", "oracle_distance_phase",
                     "maze_phase", "values_phase", "policy_phase"):
            matches = [n for n in man["files"] if n.startswith(f"{stem}{k}")]
            assert matches, f"missing {stem}{k}"
    assert len(man["phases"]) == 3


def test_blackjack_run_artifacts(tmp_path):
    cfg = ExperimentConfig(task="blackjack", backend="spiking", epsilon=0.0,
                           seed=1, epochs=300, checkpoint_every=100)
    man = run(cfg, tmp_path / "b")
    assert "energy.csv" in man["files"]
    assert "checkpoints.csv" in man["files"]
    assert man["summary"]["ltm_current_fraction"] < 0.05


def test_cpu_backend_runs(tmp_path):
    man = run(tiny_bandit(backend="cpu"), tmp_path / "c")
    assert man["summary"]["epochs"] == 200
    log = read_epochs_csv(tmp_path / "c" / "epochs.csv")
    assert log.spikes.sum() == 0


def test_sweep_summary(tmp_path):
    base = tiny_bandit(epochs=300)
    man = sweep(base, "T", [8, 64], tmp_path / "s", seeds=2)
    summary = (tmp_path / "s" / "summary.csv").read_text().strip().splitlines()
    assert summary[0] == "value,mean,std"
    assert len(summary) == 3
    assert len(man["entries"]) == 4
    for sub in man["entries"]:
        assert (tmp_path / "s" / sub / "manifest.json").exists()
    # bandit sweeps also summarize cumulative reward
    assert (tmp_path / "s" / "summary_cumulative_reward.csv").exists()


def test_degenerate_sweep_equals_run(tmp_path):
    base = tiny_bandit(epochs=300)
    sweep(base, "epsilon", [0.1], tmp_path / "s", seeds=1)
    entry = tmp_path / "s" / "epsilon_0.1" / "seed0"
    seed = derive_seed(base.seed, 3, 0, 0)
    from dataclasses import replace

    run(replace(base, epsilon=0.1, seed=seed), tmp_path / "direct")
    a = read_bytes_tree(entry)
    b = read_bytes_tree(tmp_path / "direct")
    assert a == b


def test_compare_self_is_zero(tmp_path):
    run(tiny_bandit(), tmp_path / "a")
    report = compare(tmp_path / "a", tmp_path / "a", out_dir=tmp_path / "cmp")
    assert report["jsd_bits"] == pytest.approx(0.0, abs=1e-12)
    assert report["policy_disagreement_fraction"] == 0.0
    assert (tmp_path / "cmp" / "comparison.json").exists()
    assert (tmp_path / "cmp" / "comparison.csv").exists()


def test_compare_task_mismatch(tmp_path):
    run(tiny_bandit(), tmp_path / "a")
    cfg = ExperimentConfig(
        task="maze", backend="cpu", epsilon=0.0, seed=1,
        maze_phases=default_maze_phases(60),
    )
    run(cfg, tmp_path / "m")
    with pytest.raises(ConfigError):
        compare(tmp_path / "a", tmp_path / "m")


def test_config_round_trip_and_validation(tmp_path):
    cfg = ExperimentConfig(task="maze", epsilon=0.05, seed=3,
                           maze_phases=default_maze_phases(500))
    doc = cfg.to_dict()
    again = ExperimentConfig.from_dict(doc)
    assert again == cfg
    with pytest.raises(ConfigError):
        ExperimentConfig(task="chess")
    with pytest.raises(ConfigError):
        ExperimentConfig(task="bandit", epsilon=1.5)
    with pytest.raises(ConfigError):
        ExperimentConfig(task="bandit", dq=100, theta=64)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"task": "bandit", "bandit": {"arms": []}})


def test_substreams_independent_and_stable():
    a1 = substream(42, 0).integers(0, 1 << 30, 5)
    a2 = substream(42, 0).integers(0, 1 << 30, 5)
    b = substream(42, 1).integers(0, 1 << 30, 5)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)
    assert derive_seed(42, 3, 0, 0) != derive_seed(42, 3, 0, 1)
    assert derive_seed(42, 3, 0, 0) == derive_seed(42, 3, 0, 0)


def test_cli_run_and_compare(tmp_path, capsys):
    out = tmp_path / "cli"
    rc = main([
        "run", "--task", "bandit", "--epochs", "150", "--seed", "3",
        "--out", str(out),
    ])
    assert rc == 0
    assert (out / "manifest.json").exists()
    rc = main(["compare", str(out), str(out)])
    assert rc == 0
    # exit codes for bad configs / io
    rc = main(["run", "--task", "bandit", "--epochs", "-5", "--out", str(tmp_path / "x")])
    assert rc == 2
    rc = main(["run", "--task", "bandit", "--epochs", "50", "--out", str(out)])
    assert rc == 3  # refuses to overwrite without --force


def test_cli_config_file(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "task": "bandit", "backend": "cpu", "epochs": 120, "seed": 9,
        "bandit": {"arm_probs": [0.3, 0.9]},
    }))
    rc = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
    assert rc == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["config"]["bandit"]["arm_probs"] == [0.3, 0.9]
    assert man["config"]["backend"] == "cpu"
    # malformed config file
    cfg_path.write_text("{not json")
    rc = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o2")])
    assert rc == 2


def test_sweep_parallel_workers_match_serial(tmp_path):
    base = tiny_bandit(epochs=250)
    sweep(base, "T", [16, 64], tmp_path / "serial", seeds=2, workers=1)
    sweep(base, "T", [16, 64], tmp_path / "parallel", seeds=2, workers=2)
    for rel in ("summary.csv", "T_16/seed0/epochs.csv", "T_64/seed1/values.csv"):
        assert (tmp_path / "serial" / rel).read_bytes() == (
            tmp_path / "parallel" / rel
        ).read_bytes()
