import os
import subprocess
import sys

import pytest

from stbon.errors import ConfigError
from stbon.harness import (
    ExperimentConfig,
    default_out_path,
    load_config,
    paired_study,
    run_experiment,
    strip_wall_fields,
    sweep,
)
from stbon.clustered import default_task
from stbon.jsonio import JsonlWriter, dumps_canonical, read_jsonl


def run_to_file(config, path):
    with JsonlWriter(path) as writer:
        summary = run_experiment(config, writer)
    return summary


def canonical_stripped(path):
    return [dumps_canonical(strip_wall_fields(r)) for r in read_jsonl(path)]


def test_load_config_file_and_overrides(tmp_path):
    cfg_file = tmp_path / "exp.cfg"
    cfg_file.write_text(
        "# comment\n"
        "task = toy-clustered\n"
        "method = stbon\n"
        "N = 7\n"
        "m = 0.5\n"
        "temperature = 0.9\n"
        "num_questions = 3\n"
    )
    config = load_config(cfg_file, ["seed=5", "top_k=10"])
    assert config.n == 7
    assert config.window_ratio == 0.5
    assert config.temperature == 0.9
    assert config.seed == 5
    assert config.top_k == 10


def test_config_validation_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(None, ["task=unknown"])
    with pytest.raises(ConfigError):
        load_config(None, ["method=reward-model"])
    with pytest.raises(ConfigError):
        load_config(None, ["mystery=1"])
    with pytest.raises(ConfigError):
        load_config(None, ["task=fixture-replay"])  # missing fixture path
    with pytest.raises(ConfigError):
        load_config(None, ["top_p=0"])
    with pytest.raises(ConfigError):
        ExperimentConfig(record="x.jsonl", num_questions=2).validate()
    bad = tmp_path / "bad.cfg"
    bad.write_text("just a line\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_greedy_run_produces_records(tmp_path):
    config = ExperimentConfig(method="greedy", num_questions=10, max_len=48, seed=1)
    out = tmp_path / "greedy.jsonl"
    summary = run_to_file(config, out)
    records = list(read_jsonl(out))
    runs = [r for r in records if r["kind"] == "run"]
    assert len(runs) == 10
    assert all(r["c"] is None and r["chosen_index"] is None for r in runs)
    assert records[-1]["kind"] == "summary"
    assert summary.num_questions == 10
    assert all(r["cost"]["m_cost"] == 1.0 for r in runs)  # greedy is its own baseline


def test_records_round_trip_canonically(tmp_path):
    config = ExperimentConfig(method="stbon", n=3, num_questions=4, max_len=48, seed=3)
    out = tmp_path / "st.jsonl"
    run_to_file(config, out)
    records = list(read_jsonl(out))
    rewritten = tmp_path / "rt.jsonl"
    with JsonlWriter(rewritten) as writer:
        for r in records:
            writer.write(r)
    assert out.read_text() == rewritten.read_text()


def test_rerun_is_byte_identical_without_wall_fields(tmp_path):
    config = ExperimentConfig(method="stbon", n=4, num_questions=6, max_len=64, seed=9)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run_to_file(config, a)
    run_to_file(config, b)
    assert a.read_text() != "" and canonical_stripped(a) == canonical_stripped(b)


def test_methods_produce_expected_fields(tmp_path):
    for method in ("full-bon-vote", "full-bon-coe", "ablation-semantic", "ablation-string"):
        config = ExperimentConfig(method=method, n=3, num_questions=3, max_len=48, seed=2)
        summary = run_to_file(config, tmp_path / f"{method}.jsonl")
        records = [r for r in read_jsonl(tmp_path / f"{method}.jsonl") if r["kind"] == "run"]
        assert all(r["chosen_index"] is not None for r in records)
        if method.startswith("full-bon"):
            assert all(r["c"] is None for r in records)
            assert all(len(r["sample_answers"]) == 3 for r in records)
        else:
            assert all(r["c"] is not None for r in records)
        assert summary.accuracy is not None


def test_window_sweep_cost_monotone(tmp_path):
    config = ExperimentConfig(method="stbon", n=4, num_questions=12, max_len=64, seed=4)
    summaries = sweep(config, "m", [0, 0.5, 1, 2], tmp_path)
    peaks = [s.mean_peak_slots for s in summaries]
    assert all(b >= a for a, b in zip(peaks, peaks[1:]))
    rows = list(read_jsonl(tmp_path / "sweep_m_stbon.jsonl"))
    assert [r["value"] for r in rows] == [0.0, 0.5, 1.0, 2.0]
    curve = (tmp_path / "curve_m_stbon.tsv").read_text().splitlines()
    assert curve[0] == "a_cost\taccuracy"
    assert len(curve) == 5


def test_n_sweep_full_bon_cost_monotone(tmp_path):
    config = ExperimentConfig(method="full-bon-vote", num_questions=10, max_len=64, seed=5)
    summaries = sweep(config, "N", [3, 5, 10], tmp_path)
    peaks = [s.mean_peak_slots for s in summaries]
    assert peaks[0] < peaks[1] < peaks[2]


def test_temperature_sweep_earliest_time_monotone(tmp_path):
    config = ExperimentConfig(method="stbon", n=4, num_questions=200, max_len=96, seed=3)
    summaries = sweep(config, "temperature", [0.3, 0.7, 1.2], tmp_path)
    cs = [s.mean_c for s in summaries]
    assert cs[0] >= cs[1] >= cs[2]


def test_sweep_validation(tmp_path):
    config = ExperimentConfig(num_questions=2)
    with pytest.raises(ConfigError):
        sweep(config, "gamma", [1], tmp_path)
    with pytest.raises(ConfigError):
        sweep(config, "N", [], tmp_path)


def test_theorem_grid_records(tmp_path):
    config = ExperimentConfig(
        task="theorem-grid",
        seed=0,
        trials=6000,
        lipschitz=(0.0, 0.1),
        increment_bound=(1.0,),
        horizon_gaps=(5, 10),
        followers=2,
    )
    out = tmp_path / "grid.jsonl"
    summary = run_to_file(config, out)
    records = list(read_jsonl(out))
    verdicts = [r for r in records if r["kind"] == "verdict"]
    assert len(verdicts) == 4
    assert all(v["drift_passed"] and v["markov_passed"] for v in verdicts)
    assert all(v["negative_control_flagged"] for v in verdicts if v["cell"]["lipschitz"] > 0)
    assert summary.accuracy == 1.0

    rerun = tmp_path / "grid2.jsonl"
    run_to_file(config, rerun)
    assert canonical_stripped(out) == canonical_stripped(rerun)


def test_record_then_replay_task(tmp_path):
    fixture = tmp_path / "fixture.jsonl"
    base = ExperimentConfig(method="stbon", n=3, num_questions=1, max_len=48, seed=6, record=str(fixture))
    out_live = tmp_path / "live.jsonl"
    run_to_file(base, out_live)

    replay = ExperimentConfig(
        task="fixture-replay", method="stbon", n=3, num_questions=1, max_len=48, seed=6, fixture=str(fixture)
    )
    out_replay = tmp_path / "replay.jsonl"
    run_to_file(replay, out_replay)

    live = [r for r in read_jsonl(out_live) if r["kind"] == "run"][0]
    rep = [r for r in read_jsonl(out_replay) if r["kind"] == "run"][0]
    for key in ("c", "tau", "generated_length", "winners", "chosen_index"):
        assert live[key] == rep[key]
    assert rep["cost"]["peak_slots"] == live["cost"]["peak_slots"]


def test_stbon_and_full_bon_coe_share_prefixes():
    task = default_task(seed=2)
    config = ExperimentConfig(seed=2, max_len=64)
    runs = paired_study(task, 4, 6, config=config)
    for run in runs:
        c = run.st.telemetry.c
        assert run.st.generated == run.full.sequences[run.st_choice]
        for seq in run.full.sequences:
            assert len(seq) >= min(c, len(seq))


def test_default_out_path_env(tmp_path, monkeypatch):
    monkeypatch.setenv("STBON_OUT_DIR", str(tmp_path / "outs"))
    path = default_out_path(ExperimentConfig(seed=3))
    assert str(path).startswith(str(tmp_path / "outs"))


CLI = [sys.executable, "-m", "stbon.cli"]


def test_cli_run_and_exit_codes(tmp_path):
    env = dict(os.environ, STBON_OUT_DIR=str(tmp_path))
    out = tmp_path / "run.jsonl"
    proc = subprocess.run(
        CLI + ["run", "--seed", "3", "--out", str(out), "--set", "num_questions=2", "--set", "max_len=40"],
        capture_output=True,
        text=True,
        env=env,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
    assert "accuracy" in proc.stdout

    bad = subprocess.run(CLI + ["run", "--set", "method=nope"], capture_output=True, text=True, env=env)
    assert bad.returncode == 2
    missing = subprocess.run(
        CLI + ["run", "--config", str(tmp_path / "absent.cfg")], capture_output=True, text=True, env=env
    )
    assert missing.returncode == 3


def test_cli_theorem_and_sweep(tmp_path):
    env = dict(os.environ, STBON_OUT_DIR=str(tmp_path))
    proc = subprocess.run(
        CLI
        + [
            "theorem",
            "--set", "trials=6000",
            "--set", "lipschitz=0.1",
            "--set", "increment_bound=1.0",
            "--set", "horizon_gaps=5",
            "--set", "followers=2",
        ],
        capture_output=True,
        text=True,
        env=env,
    )
    assert proc.returncode == 0, proc.stderr
    assert "all_passed=True" in proc.stdout

    proc = subprocess.run(
        CLI
        + [
            "sweep",
            "--axis", "N",
            "--values", "3,4",
            "--out", str(tmp_path / "sw"),
            "--set", "num_questions=3",
            "--set", "max_len=40",
        ],
        capture_output=True,
        text=True,
        env=env,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "sw" / "curve_N_stbon.tsv").exists()
