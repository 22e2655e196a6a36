"""Rule-based comparison policies and a common evaluation harness.

Every policy is evaluated by stepping the same environment the agent trains on,
over freshly permuted episodes, so per-episode totals are directly comparable
with the agent's learning curve.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .env import INCREASE, MAINTAIN, CreditLimitEnv
from .portfolio import CustomerRecord
from .predictor.trees import CLASSIFICATION, NotFittedError, TreeModel
from .predictor.two_stage import TrainingRow, predictor_matrix
from .seeding import EVALUATION, derive_seed

RANDOM = "random"
ALL_INCREASE = "all_increase"
MAINTAIN_ALL = "maintain_all"
NO_ARREARS = "no_arrears"
CURRENT_POLICY = "current_policy"
BUREAU_PERCENTILE = "bureau_percentile"
ORACLE = "oracle"
KINDS = (RANDOM, ALL_INCREASE, MAINTAIN_ALL, NO_ARREARS, CURRENT_POLICY, BUREAU_PERCENTILE, ORACLE)

COMPARISON_COLUMNS = ("strategy", "mean_reward", "std_reward", "increase_fraction")
DEFAULT_EVAL_EPISODES = 100

# columns of the predictor matrix known before the decision
PROPENSITY_FEATURES = 14
PROPENSITY_FORMAT = "creditrl.propensity-model"


@dataclass(frozen=True)
class PolicySpec:
    """A comparison policy; ``param`` is p (random), threshold (current policy) or q (bureau)."""

    kind: str
    param: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind in (RANDOM, CURRENT_POLICY) and self.param is None:
            object.__setattr__(self, "param", 0.5)
        if self.kind in (RANDOM, CURRENT_POLICY) and not 0.0 <= self.param <= 1.0:
            raise ValueError(f"{self.kind}: parameter must lie in [0, 1], got {self.param}")
        if self.kind == BUREAU_PERCENTILE and (self.param is None or not 0.0 < self.param < 1.0):
            raise ValueError(f"{self.kind}: q must lie in (0, 1), got {self.param}")

    @property
    def name(self) -> str:
        if self.kind == BUREAU_PERCENTILE:
            return f"BS_P{round(self.param * 100):d}"
        if self.kind == RANDOM:
            return f"Random({self.param:g})"
        return {ALL_INCREASE: "AllIncrease", MAINTAIN_ALL: "MaintainAll", NO_ARREARS: "NoArrears",
                CURRENT_POLICY: "CurrentPolicy", ORACLE: "Oracle"}[self.kind]

    @property
    def stochastic(self) -> bool:
        return self.kind == RANDOM


def default_specs() -> list[PolicySpec]:
    return [PolicySpec(RANDOM, 0.5), PolicySpec(ALL_INCREASE), PolicySpec(MAINTAIN_ALL), PolicySpec(NO_ARREARS),
            PolicySpec(CURRENT_POLICY, 0.5), PolicySpec(BUREAU_PERCENTILE, 0.85),
            PolicySpec(BUREAU_PERCENTILE, 0.95)]


def nearest_rank_percentile(values: Sequence[float], q: float) -> float:
    """Smallest sample value with at least q * N samples at or below it."""
    if not len(values):
        raise ValueError("percentile of an empty sample")
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    ordered = sorted(values)
    rank = max(1, math.ceil(q * len(ordered) - 1e-12))
    return float(ordered[rank - 1])


class PropensityModel:
    """Classifier of the historical increase decision from pre-decision features."""

    def __init__(self, max_depth: int = 6, min_samples_leaf: int = 20, seed: int = 0):
        self.tree = TreeModel(CLASSIFICATION, max_depth, min_samples_leaf, n_classes=2, seed=seed)

    @staticmethod
    def features(records: Sequence[CustomerRecord]) -> np.ndarray:
        return predictor_matrix(records, 0.0, 0.0)[:, :PROPENSITY_FEATURES]

    def fit(self, rows: Sequence[TrainingRow]) -> "PropensityModel":
        X = self.features([r.record for r in rows])
        self.tree.fit(X, np.array([r.ha_p for r in rows], dtype=int))
        return self

    @property
    def fitted(self) -> bool:
        return self.tree.fitted

    def propensity(self, records: Sequence[CustomerRecord]) -> np.ndarray:
        if not self.fitted:
            raise NotFittedError("CurrentPolicy needs a fitted propensity model")
        return self.tree.predict_proba(self.features(records))[:, 1]

    def save(self, path: Union[str, Path]) -> None:
        payload = {"format": PROPENSITY_FORMAT, "tree": self.tree.to_dict()}
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PropensityModel":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"missing propensity model: {path}")
        payload = json.loads(path.read_text(encoding="utf-8"))
        if payload.get("format") != PROPENSITY_FORMAT:
            raise ValueError(f"{path}: not a propensity model file")
        model = cls()
        model.tree = TreeModel.from_dict(payload["tree"])
        return model


def policy_actions(spec: PolicySpec, env: CreditLimitEnv,
                   propensity: Optional[PropensityModel] = None) -> Optional[list[int]]:
    """Per-customer actions (environment index order) for deterministic policies, None for random."""
    records = env.records
    if spec.kind == RANDOM:
        return None
    if spec.kind == ALL_INCREASE:
        return [INCREASE] * len(records)
    if spec.kind == MAINTAIN_ALL:
        return [MAINTAIN] * len(records)
    if spec.kind == NO_ARREARS:
        return [int(r.mp_r == 0) for r in records]
    if spec.kind == CURRENT_POLICY:
        if propensity is None or not propensity.fitted:
            raise NotFittedError("CurrentPolicy needs a fitted propensity model")
        return [int(p >= spec.param) for p in propensity.propensity(records).tolist()]
    if spec.kind == BUREAU_PERCENTILE:
        cut = nearest_rank_percentile([c.bureau_score for c in env.portfolio.customers], spec.param)
        return [int(r.bureau_score > cut) for r in records]
    return oracle_actions(env)


def decide(spec: PolicySpec, customer: int, env: CreditLimitEnv, rng: random.Random,
           propensity: Optional[PropensityModel] = None) -> int:
    """Action for one customer (environment index); prefer policy_actions for whole portfolios."""
    if spec.kind == RANDOM:
        return int(rng.random() < spec.param)
    return policy_actions(spec, env, propensity)[customer]


def oracle_actions(env: CreditLimitEnv) -> list[int]:
    """Increase exactly when the increase reward is positive; optimal because rewards decompose."""
    return [int(r > 0) for r in env.increase_rewards]


def oracle_total(env: CreditLimitEnv) -> float:
    return math.fsum(r for r in env.increase_rewards if r > 0)


def context_fingerprint(env: CreditLimitEnv) -> str:
    """Hash of everything that determines the rewards: customers and their per-action rewards."""
    h = hashlib.sha256()
    for rec, r in zip(env.records, env.increase_rewards):
        h.update(f"{rec.customer_id}:{r!r};".encode())
    return h.hexdigest()[:16]


@dataclass
class PolicyEvaluation:
    strategy: str
    rewards: np.ndarray  # per-episode totals
    increase_fractions: np.ndarray
    context: str
    seed: int

    @property
    def constant(self) -> bool:
        return bool(np.all(self.rewards == self.rewards[0]))

    @property
    def mean(self) -> float:
        if self.constant:
            return float(self.rewards[0])
        return math.fsum(self.rewards.tolist()) / len(self.rewards)

    @property
    def std(self) -> float:
        if len(self.rewards) < 2 or self.constant:
            return 0.0
        return float(np.std(self.rewards, ddof=1))

    @property
    def increase_fraction(self) -> float:
        return float(np.mean(self.increase_fractions))


def evaluate_policy(spec: PolicySpec, env: CreditLimitEnv, episodes: int = DEFAULT_EVAL_EPISODES, seed: int = 0,
                    propensity: Optional[PropensityModel] = None) -> PolicyEvaluation:
    """Run the policy over ``episodes`` permuted episodes; episode e uses derive_seed(seed, EVALUATION, e)."""
    if episodes <= 0:
        raise ValueError("episodes must be > 0")
    fixed = policy_actions(spec, env, propensity)
    totals, fractions = [], []
    for ep in range(episodes):
        env.reset(derive_seed(seed, EVALUATION, ep))
        rng = random.Random(derive_seed(seed, EVALUATION, ep, 1))
        rewards, n_inc = [], 0
        while not env.done:
            i = env.current
            a = fixed[i] if fixed is not None else int(rng.random() < spec.param)
            rewards.append(env.step(a).reward)
            n_inc += a
        # exactly rounded, so fixed policies give the same total under every permutation
        totals.append(math.fsum(rewards))
        fractions.append(n_inc / env.n_customers)
    return PolicyEvaluation(spec.name, np.array(totals), np.array(fractions), context_fingerprint(env), seed)


def agent_evaluation(name: str, curve_raw: Sequence[float], increase_counts: Sequence[int], env: CreditLimitEnv,
                     seed: int, window: int = 50) -> PolicyEvaluation:
    """Summarize the last ``window`` training episodes of an agent as a comparison row."""
    raw = np.asarray(curve_raw, dtype=float)[-window:]
    inc = np.asarray(increase_counts, dtype=float)[-window:] / env.n_customers
    return PolicyEvaluation(name, raw, inc, context_fingerprint(env), seed)


def compare(evaluations: Sequence[PolicyEvaluation]) -> list[dict]:
    """Comparison rows; all evaluations must come from the same portfolio, response model and seed."""
    if not evaluations:
        raise ValueError("nothing to compare")
    contexts = {(e.context, e.seed) for e in evaluations}
    if len(contexts) > 1:
        raise ValueError(f"mismatched evaluation contexts: {sorted(contexts)}")
    return [{"strategy": e.strategy, "mean_reward": e.mean, "std_reward": e.std,
             "increase_fraction": e.increase_fraction} for e in evaluations]


def write_comparison_csv(path: Union[str, Path], rows: Sequence[dict]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARISON_COLUMNS)
        for row in rows:
            w.writerow([row["strategy"], *(repr(float(row[k])) for k in COMPARISON_COLUMNS[1:])])


def read_comparison_csv(path: Union[str, Path]) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COMPARISON_COLUMNS:
            raise ValueError(f"{path}: malformed comparison header")
        return [{"strategy": r["strategy"], **{k: float(r[k]) for k in COMPARISON_COLUMNS[1:]}} for r in reader]
