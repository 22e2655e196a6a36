"""Command-line pipeline: simulate data, fit the balance model, train, compare, extract.

Every option can come from a flat ``key = value`` config file (``--config``) or a
flag; flags win over the file, the file wins over built-in defaults. Each command
writes its artifacts plus ``manifest-<command>.json`` recording the resolved
config, its hash, the seed, timestamps and SHA-256 digests of inputs and outputs.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import __version__
from .agents import (
    DOUBLE_Q,
    DEFAULT_ALPHAS,
    DEFAULT_EPSILONS,
    Q_LEARNING,
    AgentConfig,
    LearningCurve,
    QTable,
    QTablePair,
    best_cell,
    extract_policy,
    grid_search,
    multi_seed,
    read_qtable_csv,
    smooth,
    train,
    write_qtable_csv,
)
from .baselines import (
    ORACLE,
    PolicySpec,
    PropensityModel,
    agent_evaluation,
    compare,
    context_fingerprint,
    default_specs,
    evaluate_policy,
    write_comparison_csv,
    read_comparison_csv,
)
from .env import CreditLimitEnv, DiscretizationGrid, DiscretizedState
from .portfolio import load_portfolio_csv, write_portfolio_csv
from .predictor import (
    TwoStageBalanceModel,
    TwoStageConfig,
    evaluate_two_stage,
    fit_two_stage,
    read_training_table,
    split_indices,
    training_arrays,
    write_training_table,
)
from .provisioning import load_defaulters_csv, portfolio_ccf
from .seeding import TRAINING_TABLE, derive_seed
from .synth import (
    GroundTruthPredictor,
    generate_portfolio,
    generate_training_table,
    preset,
    read_ground_truth_csv,
    write_ground_truth_csv,
)


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# options


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ccf(text: str):
    return "estimate" if text.strip() == "estimate" else float(text)


def _choice(*allowed: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}, got {text!r}")
        return text
    return parse


@dataclass(frozen=True)
class Option:
    parse: Callable[[str], Any]
    default: Any
    help: str


OPTIONS: dict[str, Option] = {
    "seed": Option(int, 0, "master seed"),
    "out": Option(str, "out", "output directory"),
    "jobs": Option(int, 1, "worker processes for grid search and multi-seed runs"),
    # data
    "preset": Option(str, "default", "synthetic preset (default, imbalance)"),
    "n_customers": Option(int, None, "override the preset's portfolio size"),
    "response_noise": Option(float, None, "override the preset's response noise (USD std-dev)"),
    "historical_rate": Option(float, 0.3, "share of historical increases in the training table"),
    "portfolio": Option(str, None, "portfolio CSV"),
    "training_table": Option(str, None, "training-table CSV"),
    "ground_truth": Option(str, None, "ground-truth response CSV (synthetic data only)"),
    "predictor": Option(str, None, "fitted balance model (JSON from fit-predictor)"),
    "propensity": Option(str, None, "fitted propensity model (JSON from fit-predictor)"),
    "response_model": Option(_choice("auto", "predictor", "ground_truth"), "auto",
                             "which response model drives the environment"),
    "defaulters": Option(str, None, "defaulters CSV, required when ccf = estimate"),
    "lgd": Option(float, 0.6, "loss given default"),
    "beta": Option(float, 0.5, "limit increase factor"),
    "ccf": Option(_ccf, 0.4, "credit conversion factor, or 'estimate'"),
    # predictor
    "test_fraction": Option(float, 0.2, "held-out share for predictor metrics"),
    "cutoff": Option(float, 75.81, "balance cutoff between classes 0 and 1 (USD)"),
    "smote": Option(_bool, True, "balance classifier classes with SMOTE-NC"),
    "smote_k": Option(int, 5, "SMOTE-NC neighbours"),
    "max_depth": Option(int, 8, "classifier depth"),
    "min_samples_leaf": Option(int, 5, "classifier leaf size"),
    "regressor_max_depth": Option(int, 8, "regressor depth"),
    "regressor_min_samples_leaf": Option(int, 5, "regressor leaf size"),
    "n_estimators": Option(int, 1, "bagged trees per model"),
    # agent
    "algo": Option(_choice(Q_LEARNING, DOUBLE_Q), DOUBLE_Q, "q or double_q"),
    "alpha": Option(float, 1e-2, "learning rate"),
    "epsilon": Option(float, 0.1, "exploration probability"),
    "gamma": Option(float, 1.0, "discount"),
    "episodes": Option(int, 500, "training episodes"),
    "runs": Option(int, 1, "extra robustness runs with derived seeds (>= 2 to enable)"),
    "epsilons": Option(_floats, DEFAULT_EPSILONS, "grid epsilons, comma separated"),
    "alphas": Option(_floats, DEFAULT_ALPHAS, "grid learning rates, comma separated"),
    "grid_episodes": Option(int, 500, "episodes per grid cell"),
    "final_window": Option(int, 10, "episodes averaged to rank grid cells"),
    # evaluation
    "train_dir": Option(str, None, "directory holding train artifacts"),
    "grid_dir": Option(str, None, "directory holding grid-search artifacts"),
    "comparison": Option(str, None, "comparison CSV for the curve overlay"),
    "which": Option(_choice("q1", "q2", "mean"), "q1", "Double-Q table used for policy extraction"),
    "eval_episodes": Option(int, 100, "evaluation episodes per baseline"),
    "agent_window": Option(int, 50, "final training episodes summarized in the agent row"),
}

ENV_KEYS = ("portfolio", "ground_truth", "predictor", "response_model", "defaulters", "lgd", "beta", "ccf")
PREDICTOR_KEYS = ("cutoff", "smote", "smote_k", "max_depth", "min_samples_leaf", "regressor_max_depth",
                  "regressor_min_samples_leaf", "n_estimators")
AGENT_KEYS = ("algo", "alpha", "epsilon", "gamma", "episodes")
GRID_KEYS = ("algo", "gamma", "epsilons", "alphas", "grid_episodes", "final_window")

COMMANDS: dict[str, tuple[str, tuple[str, ...]]] = {
    "simulate-data": ("write portfolio, training-table and ground-truth CSVs",
                      ("preset", "n_customers", "response_noise", "historical_rate")),
    "fit-predictor": ("fit the two-stage balance model and the propensity model",
                      ("training_table", "test_fraction", *PREDICTOR_KEYS)),
    "train": ("train a tabular agent on the credit-limit environment", (*ENV_KEYS, *AGENT_KEYS, "runs")),
    "grid-search": ("rank (epsilon, alpha) cells by final average reward", (*ENV_KEYS, *GRID_KEYS)),
    "compare": ("evaluate baseline policies (and a trained agent) on one environment",
                (*ENV_KEYS, "propensity", "train_dir", "eval_episodes", "agent_window")),
    "extract-policy": ("greedy policy of a trained table in the last training order",
                       (*ENV_KEYS, "train_dir", "which")),
    "export-curves": ("learning, robustness and comparison curves as CSV", ("train_dir", "comparison")),
    "pipeline": ("run every stage on a synthetic preset into one directory",
                 ("preset", "n_customers", "response_noise", "historical_rate", "response_model", "lgd", "beta",
                  "ccf", "defaulters", "test_fraction", *PREDICTOR_KEYS, *GRID_KEYS, "episodes", "runs",
                  "eval_episodes", "agent_window", "which")),
}
COMMON_KEYS = ("seed", "out", "jobs")


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Parse ``key = value`` lines; '#' starts a comment; keys may use '-' or '_'.

    A command manifest (JSON) is accepted too; its recorded config is replayed.
    """
    path = Path(path)
    if not path.exists():
        raise CliError(f"missing config file: {path}")
    if path.suffix == ".json":
        try:
            recorded = json.loads(path.read_text(encoding="utf-8"))["config"]
        except (ValueError, KeyError):
            raise CliError(f"{path}: not a run manifest") from None
        return {k: tuple(v) if isinstance(v, list) else v for k, v in recorded.items() if k in OPTIONS}
    out = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise CliError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = OPTIONS[key].parse(value)
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: {key}: {exc}") from None
    return out


def resolve_config(command: str, flags: dict[str, Optional[str]], config_path: Optional[str]) -> dict[str, Any]:
    """Defaults < config file < flags, restricted to the keys the command understands."""
    keys = COMMON_KEYS + COMMANDS[command][1]
    cfg = {k: OPTIONS[k].default for k in keys}
    if config_path:
        for k, v in read_config_file(config_path).items():
            if k in cfg:
                cfg[k] = v
    for k in keys:
        text = flags.get(k)
        if text is None:
            continue
        try:
            cfg[k] = OPTIONS[k].parse(text)
        except ValueError as exc:
            raise CliError(f"--{k.replace('_', '-')}: {exc}") from None
    return cfg


# ---------------------------------------------------------------------------
# artifacts and manifests


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(v):
    return list(v) if isinstance(v, tuple) else v


def config_hash(cfg: dict) -> str:
    canon = json.dumps({k: _jsonable(v) for k, v in sorted(cfg.items())}, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


class Run:
    """Collects artifacts of one command and writes its manifest."""

    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.started = _now()
        self.inputs: dict[str, str] = {}
        self.artifacts: list[Path] = []
        self.extra: dict[str, Any] = {}

    def input(self, path: Optional[str], what: str, producer: str) -> Path:
        if not path:
            raise CliError(f"no {what} given; run `{producer}` first and pass its output")
        p = Path(path)
        if not p.exists():
            raise CliError(f"missing {what} {p}; run `{producer}` first")
        self.inputs[str(p)] = sha256_file(p)
        return p

    def artifact(self, name: str) -> Path:
        p = self.out / name
        if str(p) in self.inputs or any(p.resolve() == Path(i).resolve() for i in self.inputs):
            raise CliError(f"refusing to overwrite input {p}")
        self.artifacts.append(p)
        return p

    def finish(self) -> Path:
        manifest = {
            "command": self.command,
            "package_version": __version__,
            "seed": self.cfg["seed"],
            "config": {k: _jsonable(v) for k, v in sorted(self.cfg.items())},
            "config_hash": config_hash(self.cfg),
            "started_at": self.started,
            "finished_at": _now(),
            "inputs": dict(sorted(self.inputs.items())),
            "artifacts": {p.name: sha256_file(p) for p in self.artifacts},
            **self.extra,
        }
        path = self.out / f"manifest-{self.command}.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        return header, [row for row in reader if row]


def _f(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# shared setup


def synth_config(cfg: dict):
    overrides = {"seed": cfg["seed"]}
    for key in ("n_customers", "response_noise"):
        if cfg.get(key) is not None:
            overrides[key] = cfg[key]
    for key in ("lgd", "beta"):
        if key in cfg:
            overrides[key] = cfg[key]
    if isinstance(cfg.get("ccf"), float):
        overrides["ccf"] = cfg["ccf"]
    try:
        return preset(cfg["preset"], **overrides)
    except KeyError as exc:
        raise CliError(str(exc.args[0])) from None


def build_env(run: Run, cfg: dict) -> CreditLimitEnv:
    ccf = cfg["ccf"]
    if ccf == "estimate":
        ccf = portfolio_ccf(load_defaulters_csv(run.input(cfg["defaulters"], "defaulters file", "a defaulters export")))
        run.extra["estimated_ccf"] = ccf
    portfolio = load_portfolio_csv(run.input(cfg["portfolio"], "portfolio", "simulate-data"),
                                   lgd=cfg["lgd"], beta=cfg["beta"], ccf=ccf)
    mode = cfg["response_model"]
    if mode == "auto":
        mode = "ground_truth" if cfg["ground_truth"] else "predictor"
    if mode == "ground_truth":
        responses = read_ground_truth_csv(run.input(cfg["ground_truth"], "ground-truth file", "simulate-data"))
        model = GroundTruthPredictor(responses)
    else:
        model = TwoStageBalanceModel.load(run.input(cfg["predictor"], "predictor artifact", "fit-predictor"))
    run.extra["response_model"] = mode
    env = CreditLimitEnv(portfolio, model, DiscretizationGrid())
    run.extra["context"] = context_fingerprint(env)
    return env


def agent_config(cfg: dict) -> AgentConfig:
    return AgentConfig(alpha=cfg["alpha"], epsilon=cfg["epsilon"], gamma=cfg["gamma"], episodes=cfg["episodes"],
                       seed=cfg["seed"])


# ---------------------------------------------------------------------------
# commands


def cmd_simulate_data(cfg: dict) -> Run:
    run = Run("simulate-data", cfg)
    scfg = synth_config(cfg)
    data = generate_portfolio(scfg)
    write_portfolio_csv(run.artifact("portfolio.csv"), data.portfolio)
    write_ground_truth_csv(run.artifact("ground_truth.csv"), data)
    # the simulator is fitted on a separate population drawn from the same preset
    hist_cfg = replace(scfg, seed=derive_seed(cfg["seed"], TRAINING_TABLE))
    write_training_table(run.artifact("training_table.csv"),
                         generate_training_table(hist_cfg, cfg["historical_rate"]))
    _write_rows(run.artifact("archetypes.csv"), ("customer_id", "archetype"),
                [(c.customer_id, a) for c, a in zip(data.portfolio.customers, data.archetypes)])
    return run


def cmd_fit_predictor(cfg: dict) -> Run:
    run = Run("fit-predictor", cfg)
    rows = read_training_table(run.input(cfg["training_table"], "training table", "simulate-data"))
    X, y = training_arrays(rows)
    tcfg = TwoStageConfig(cutoff=cfg["cutoff"], smote=cfg["smote"], smote_k=cfg["smote_k"],
                          max_depth=cfg["max_depth"], min_samples_leaf=cfg["min_samples_leaf"],
                          regressor_max_depth=cfg["regressor_max_depth"],
                          regressor_min_samples_leaf=cfg["regressor_min_samples_leaf"],
                          n_estimators=cfg["n_estimators"], seed=cfg["seed"])
    metrics_rows = []
    if cfg["test_fraction"] > 0:
        tr, te = split_indices(len(y), cfg["test_fraction"], seed=cfg["seed"])
        held = fit_two_stage(X[tr], y[tr], tcfg)
        metrics = evaluate_two_stage(held, X[te], y[te], float(y[tr].mean()))
        metrics_rows = [(k, _f(v)) for k, v in metrics.items()]
        metrics_rows += [("n_train", len(tr)), ("n_test", len(te))]
    model = fit_two_stage(X, y, tcfg)
    model.save(run.artifact("predictor.json"))
    PropensityModel(seed=cfg["seed"]).fit(rows).save(run.artifact("propensity.json"))
    _write_rows(run.artifact("predictor_metrics.csv"), ("metric", "value"), metrics_rows)
    return run


def _write_train_outputs(run: Run, result, which_prefix: str = "") -> None:
    if isinstance(result.tables, QTablePair):
        write_qtable_csv(run.artifact(f"{which_prefix}qtable_q1.csv"), result.tables.q1)
        write_qtable_csv(run.artifact(f"{which_prefix}qtable_q2.csv"), result.tables.q2)
    else:
        write_qtable_csv(run.artifact(f"{which_prefix}qtable.csv"), result.tables)
    result.curve.to_csv(run.artifact(f"{which_prefix}curve.csv"))
    _write_rows(run.artifact(f"{which_prefix}episode_increases.csv"), ("episode", "increases"),
                enumerate(result.increase_counts))


def cmd_train(cfg: dict) -> Run:
    run = Run("train", cfg)
    env = build_env(run, cfg)
    acfg = agent_config(cfg)
    result = train(env, acfg, cfg["algo"])
    _write_train_outputs(run, result)
    ids = [env.records[i].customer_id for i in result.last_order]
    _write_rows(run.artifact("last_order.csv"), ("position", "customer_id"), enumerate(ids))
    if cfg["runs"] >= 2:
        ms = multi_seed(env, acfg, cfg["runs"], cfg["algo"], jobs=cfg["jobs"])
        _write_rows(run.artifact("multi_seed_runs.csv"), ("run", "seed", "episode", "raw_reward"),
                    [(r, s, e, _f(v)) for r, (s, curve) in enumerate(zip(ms.seeds, ms.curves))
                     for e, v in enumerate(curve)])
    run.extra["algo"] = cfg["algo"]
    return run


def cmd_grid_search(cfg: dict) -> Run:
    run = Run("grid-search", cfg)
    env = build_env(run, cfg)
    cells = grid_search(env, cfg["epsilons"], cfg["alphas"], episodes=cfg["grid_episodes"], seed=cfg["seed"],
                        algo=cfg["algo"], gamma=cfg["gamma"], final_window=cfg["final_window"], jobs=cfg["jobs"])
    _write_rows(run.artifact("grid.csv"), ("epsilon", "alpha", "final_average", "rank"),
                [(_f(c.epsilon), _f(c.alpha), _f(c.final_average), c.rank) for c in cells])
    _write_rows(run.artifact("grid_curves.csv"), ("epsilon", "alpha", "episode", "raw_reward", "smoothed_reward"),
                [(_f(c.epsilon), _f(c.alpha), e, _f(r), _f(s))
                 for c in cells for e, (r, s) in enumerate(zip(c.curve.raw, c.curve.smoothed))])
    best = best_cell(cells)
    run.artifact("best.cfg").write_text(f"epsilon = {best.epsilon!r}\nalpha = {best.alpha!r}\n", encoding="utf-8")
    run.extra["best"] = {"epsilon": best.epsilon, "alpha": best.alpha, "final_average": best.final_average}
    return run


def _train_manifest(train_dir: Path) -> dict:
    p = train_dir / "manifest-train.json"
    if not p.exists():
        raise CliError(f"missing {p}; run `train` first")
    return json.loads(p.read_text(encoding="utf-8"))


def cmd_compare(cfg: dict) -> Run:
    run = Run("compare", cfg)
    env = build_env(run, cfg)
    seed, episodes = cfg["seed"], cfg["eval_episodes"]
    propensity = None
    if cfg["propensity"]:
        propensity = PropensityModel.load(run.input(cfg["propensity"], "propensity model", "fit-predictor"))
    evaluations = []
    for spec in default_specs():
        if spec.kind == "current_policy" and propensity is None:
            raise CliError("CurrentPolicy needs a propensity model; run `fit-predictor` and pass --propensity")
        evaluations.append(evaluate_policy(spec, env, episodes, seed, propensity))
    if run.extra["response_model"] == "ground_truth":
        evaluations.append(evaluate_policy(PolicySpec(ORACLE), env, episodes, seed))
    if cfg["train_dir"]:
        tdir = Path(cfg["train_dir"])
        manifest = _train_manifest(tdir)
        if manifest.get("context") != run.extra["context"]:
            raise CliError("mismatched evaluation contexts: the agent was trained on a different "
                           "portfolio or response model")
        curve = LearningCurve.from_csv(run.input(str(tdir / "curve.csv"), "training curve", "train"))
        _, inc_rows = _read_rows(run.input(str(tdir / "episode_increases.csv"), "increase counts", "train"))
        name = "DoubleQ" if manifest.get("algo") == DOUBLE_Q else "QLearning"
        evaluations.append(agent_evaluation(name, curve.raw, [int(r[1]) for r in inc_rows], env, seed,
                                            cfg["agent_window"]))
    write_comparison_csv(run.artifact("comparison.csv"), compare(evaluations))
    _write_rows(run.artifact("comparison_episodes.csv"), ("strategy", "episode", "reward"),
                [(e.strategy, i, _f(r)) for e in evaluations for i, r in enumerate(e.rewards)])
    return run


def _load_table(run: Run, tdir: Path, which: str) -> QTable:
    single = tdir / "qtable.csv"
    if single.exists():
        return read_qtable_csv(run.input(str(single), "Q-table", "train"))
    q1 = read_qtable_csv(run.input(str(tdir / "qtable_q1.csv"), "Q-table", "train"))
    q2 = read_qtable_csv(run.input(str(tdir / "qtable_q2.csv"), "Q-table", "train"))
    return QTablePair(q1=q1, q2=q2).table(which)


def cmd_extract_policy(cfg: dict) -> Run:
    run = Run("extract-policy", cfg)
    env = build_env(run, cfg)
    if not cfg["train_dir"]:
        raise CliError("no train directory given; run `train` first and pass --train-dir")
    tdir = Path(cfg["train_dir"])
    table = _load_table(run, tdir, cfg["which"])
    _, order_rows = _read_rows(run.input(str(tdir / "last_order.csv"), "training order", "train"))
    index = {r.customer_id: i for i, r in enumerate(env.records)}
    try:
        order = [index[cid] for _, cid in order_rows]
    except KeyError as exc:
        raise CliError(f"customer {exc.args[0]!r} of the training order is not in the portfolio") from None
    pol = extract_policy(table, env, order)
    _write_rows(run.artifact("policy.csv"),
                ("position", "customer_id", "action", *DiscretizedState._fields, "delta_provisions"),
                [(i, cid, a, *obs, _f(d)) for i, (cid, a, obs, d) in
                 enumerate(zip(pol.customer_ids, pol.actions, pol.observations, pol.delta_at_decision))])
    _write_rows(run.artifact("policy_summary.csv"), ("key", "value"),
                [("n_customers", len(pol.actions)), ("increases", sum(pol.actions)),
                 ("increase_fraction", _f(pol.increase_fraction)), ("provision_share", _f(pol.provision_share)),
                 ("max_delta_provisions", _f(pol.max_delta)), ("table", cfg["which"])])
    _write_rows(run.artifact("policy_histograms.csv"), ("feature", "bin", "count"),
                [(name, b, n) for name, hist in pol.histograms().items() for b, n in hist.items()])
    return run


def cmd_export_curves(cfg: dict) -> Run:
    run = Run("export-curves", cfg)
    if not cfg["train_dir"]:
        raise CliError("no train directory given; run `train` first and pass --train-dir")
    tdir = Path(cfg["train_dir"])
    curve = LearningCurve.from_csv(run.input(str(tdir / "curve.csv"), "training curve", "train"))
    curve.to_csv(run.artifact("learning_curve.csv"))
    ms_path = tdir / "multi_seed_runs.csv"
    if ms_path.exists():
        _, rows = _read_rows(run.input(str(ms_path), "multi-seed runs", "train"))
        n_runs = max(int(r[0]) for r in rows) + 1
        curves = np.zeros((n_runs, len(rows) // n_runs))
        for r, _, e, v in rows:
            curves[int(r), int(e)] = float(v)
        mean, std = curves.mean(axis=0), curves.std(axis=0, ddof=1)
        sm = smooth(mean)
        _write_rows(run.artifact("robustness_curve.csv"), ("episode", "mean_reward", "std_reward", "smoothed_mean"),
                    [(e, _f(m), _f(s), _f(x)) for e, (m, s, x) in enumerate(zip(mean, std, sm))])
    if cfg["comparison"]:
        rows = read_comparison_csv(run.input(cfg["comparison"], "comparison table", "compare"))
        sm = curve.smoothed
        overlay = [(e, "agent_smoothed", _f(v)) for e, v in enumerate(sm)]
        overlay += [(e, row["strategy"], _f(row["mean_reward"])) for row in rows for e in range(len(sm))]
        _write_rows(run.artifact("comparison_overlay.csv"), ("episode", "strategy", "reward"), overlay)
    return run


def cmd_pipeline(cfg: dict) -> Run:
    """simulate-data, fit-predictor, grid-search, train (best cell), compare, extract-policy, export-curves."""
    out = cfg["out"]
    base = {k: cfg[k] for k in COMMON_KEYS}

    def sub(command: str, **values) -> dict:
        keys = COMMANDS[command][1]
        c = {k: OPTIONS[k].default for k in keys}
        c.update({k: v for k, v in cfg.items() if k in keys})
        c.update(base)
        c.update(values)
        return c

    cmd_simulate_data(sub("simulate-data")).finish()
    cmd_fit_predictor(sub("fit-predictor", training_table=f"{out}/training_table.csv")).finish()
    env_paths = dict(portfolio=f"{out}/portfolio.csv", ground_truth=f"{out}/ground_truth.csv",
                     predictor=f"{out}/predictor.json")
    if cfg["response_model"] in ("auto", "predictor"):
        # the environment should run on the learned simulator unless asked otherwise
        env_paths["response_model"] = "predictor"
    grid = cmd_grid_search(sub("grid-search", **env_paths))
    grid.finish()
    best = grid.extra["best"]
    cmd_train(sub("train", **env_paths, epsilon=best["epsilon"], alpha=best["alpha"])).finish()
    cmd_compare(sub("compare", **env_paths, propensity=f"{out}/propensity.json", train_dir=out)).finish()
    cmd_extract_policy(sub("extract-policy", **env_paths, train_dir=out)).finish()
    return cmd_export_curves(sub("export-curves", train_dir=out, comparison=f"{out}/comparison.csv"))


HANDLERS = {
    "simulate-data": cmd_simulate_data,
    "fit-predictor": cmd_fit_predictor,
    "train": cmd_train,
    "grid-search": cmd_grid_search,
    "compare": cmd_compare,
    "extract-policy": cmd_extract_policy,
    "export-curves": cmd_export_curves,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="creditrl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"creditrl {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, (help_text, keys) in COMMANDS.items():
        p = subs.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", metavar="PATH", help="flat key = value config file")
        for key in COMMON_KEYS + keys:
            opt = OPTIONS[key]
            default = ",".join(map(repr, opt.default)) if isinstance(opt.default, tuple) else opt.default
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar="VALUE",
                           help=f"{opt.help} (default: {default})")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = resolve_config(args.command, flags, args.config)
        run = HANDLERS[args.command](cfg)
        manifest = run.finish()
    except (CliError, ValueError, KeyError, FileNotFoundError, RuntimeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"creditrl {args.command}: error: {msg}", file=sys.stderr)
        return 2
    print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
