import json
import subprocess
import sys

import pytest

from creditrl.cli import main, read_config_file, resolve_config
from creditrl.agents import LearningCurve
from creditrl.baselines import read_comparison_csv

SMALL = ["--n-customers", "400", "--seed", "3"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert run("simulate-data", *SMALL, "--out", out) == 0
    assert run("fit-predictor", "--training-table", out / "training_table.csv", "--out", out, "--seed", 3,
               "--max-depth", 4, "--regressor-max-depth", 4) == 0
    return out


def env_flags(d):
    return ["--portfolio", d / "portfolio.csv", "--ground-truth", d / "ground_truth.csv",
            "--predictor", d / "predictor.json"]


def test_simulate_data_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("simulate-data", *SMALL, "--out", a) == 0
    assert run("simulate-data", *SMALL, "--out", b) == 0
    for name in ("portfolio.csv", "ground_truth.csv", "training_table.csv", "archetypes.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma = json.loads((a / "manifest-simulate-data.json").read_text())
    mb = json.loads((b / "manifest-simulate-data.json").read_text())
    assert ma["artifacts"] == mb["artifacts"]
    assert ma["config"]["n_customers"] == 400 and ma["seed"] == 3


def test_train_without_predictor_names_the_producer(tmp_path, data_dir, capsys):
    code = run("train", "--portfolio", data_dir / "portfolio.csv", "--response-model", "predictor",
               "--out", tmp_path, "--episodes", 2)
    assert code != 0
    assert "fit-predictor" in capsys.readouterr().err


def test_train_without_portfolio_names_simulate_data(tmp_path, capsys):
    assert run("train", "--out", tmp_path) != 0
    assert "simulate-data" in capsys.readouterr().err


def test_bad_flag_value_is_reported(tmp_path, capsys):
    assert run("train", "--alpha", "fast", "--out", tmp_path) == 2
    assert "--alpha" in capsys.readouterr().err


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# test config\nalpha = 0.5\nepisodes = 7\nepsilon=0.2  # trailing comment\n")
    cfg = resolve_config("train", {"alpha": "0.25"}, str(cfg_file))
    assert cfg["alpha"] == 0.25      # flag beats file
    assert cfg["episodes"] == 7      # file beats default
    assert cfg["epsilon"] == 0.2
    assert cfg["gamma"] == 1.0       # default
    cfg_file.write_text("bogus = 1\n")
    with pytest.raises(Exception, match="unknown key"):
        read_config_file(cfg_file)


def test_train_and_manifest_replay(tmp_path, data_dir):
    first = tmp_path / "first"
    assert run("train", *env_flags(data_dir), "--out", first, "--episodes", 12, "--epsilon", 0.2,
               "--alpha", 0.01, "--seed", 5) == 0
    manifest = json.loads((first / "manifest-train.json").read_text())
    assert manifest["response_model"] == "ground_truth"
    assert set(manifest["inputs"]) >= {str(data_dir / "portfolio.csv"), str(data_dir / "ground_truth.csv")}
    replay = tmp_path / "replay"
    assert run("train", "--config", first / "manifest-train.json", "--out", replay) == 0
    for name in ("curve.csv", "qtable_q1.csv", "qtable_q2.csv", "last_order.csv", "episode_increases.csv"):
        assert (first / name).read_bytes() == (replay / name).read_bytes()
    assert len(LearningCurve.from_csv(first / "curve.csv").raw) == 12


def test_train_on_predictor_response(tmp_path, data_dir):
    out = tmp_path / "pred"
    assert run("train", "--portfolio", data_dir / "portfolio.csv", "--predictor", data_dir / "predictor.json",
               "--out", out, "--episodes", 3) == 0
    assert json.loads((out / "manifest-train.json").read_text())["response_model"] == "predictor"


def test_refuses_to_overwrite_inputs(tmp_path, capsys):
    assert run("simulate-data", *SMALL, "--out", tmp_path) == 0
    # an input that sits where an artifact would be written is refused
    (tmp_path / "training_table.csv").rename(tmp_path / "predictor.json")
    before = (tmp_path / "predictor.json").read_bytes()
    code = run("fit-predictor", "--training-table", tmp_path / "predictor.json", "--out", tmp_path)
    assert code == 2 and "refusing to overwrite input" in capsys.readouterr().err
    assert (tmp_path / "predictor.json").read_bytes() == before


def test_ccf_estimate_from_defaulters(tmp_path, data_dir):
    d = tmp_path / "defaulters.csv"
    d.write_text("customer_id,ob_at_default,ob_at_period_start,limit\nA,150,100,200\nB,60,100,200\n")
    out = tmp_path / "est"
    assert run("train", *env_flags(data_dir), "--ccf", "estimate", "--defaulters", d, "--out", out,
               "--episodes", 2) == 0
    assert json.loads((out / "manifest-train.json").read_text())["estimated_ccf"] == 0.25


def test_ccf_estimate_without_defaulters_fails(tmp_path, data_dir, capsys):
    assert run("train", *env_flags(data_dir), "--ccf", "estimate", "--out", tmp_path, "--episodes", 2) == 2
    assert "defaulters" in capsys.readouterr().err


def test_compare_extract_and_export(tmp_path, data_dir):
    out = tmp_path / "all"
    flags = [*env_flags(data_dir), "--out", out, "--seed", 1]
    assert run("train", *flags, "--episodes", 20, "--epsilon", 0.1, "--alpha", 0.01) == 0
    assert run("compare", *flags, "--propensity", data_dir / "propensity.json", "--train-dir", out,
               "--eval-episodes", 5, "--agent-window", 10) == 0
    rows = {r["strategy"]: r for r in read_comparison_csv(out / "comparison.csv")}
    assert {"Random(0.5)", "AllIncrease", "MaintainAll", "NoArrears", "CurrentPolicy", "BS_P85", "BS_P95",
            "Oracle"} <= set(rows)
    assert rows["MaintainAll"]["mean_reward"] == 0.0
    assert max(r["mean_reward"] for r in rows.values()) == rows["Oracle"]["mean_reward"]
    assert run("extract-policy", *flags, "--train-dir", out) == 0
    assert (out / "policy.csv").exists() and (out / "policy_histograms.csv").exists()
    assert run("export-curves", "--train-dir", out, "--comparison", out / "comparison.csv", "--out", out) == 0
    assert (out / "comparison_overlay.csv").exists()


def test_compare_rejects_agent_from_another_environment(tmp_path, data_dir, capsys):
    other = tmp_path / "other"
    assert run("simulate-data", "--n-customers", 40, "--seed", 9, "--out", other) == 0
    agent = tmp_path / "agent"
    assert run("train", "--portfolio", other / "portfolio.csv", "--ground-truth", other / "ground_truth.csv",
               "--out", agent, "--episodes", 2) == 0
    code = run("compare", *env_flags(data_dir), "--propensity", data_dir / "propensity.json",
               "--train-dir", agent, "--out", tmp_path / "cmp", "--eval-episodes", 2)
    assert code == 2 and "context" in capsys.readouterr().err


def test_grid_search_writes_ranked_grid(tmp_path, data_dir):
    out = tmp_path / "grid"
    assert run("grid-search", *env_flags(data_dir), "--out", out, "--epsilons", "0.05,0.1",
               "--alphas", "1e-3,1e-2", "--grid-episodes", 4) == 0
    lines = (out / "grid.csv").read_text().splitlines()
    assert len(lines) == 5
    best = read_config_file(out / "best.cfg")
    assert best["epsilon"] in (0.05, 0.1) and best["alpha"] in (1e-3, 1e-2)


def test_console_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "creditrl.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("simulate-data", "fit-predictor", "train", "grid-search", "compare", "extract-policy",
                "export-curves"):
        assert cmd in res.stdout
