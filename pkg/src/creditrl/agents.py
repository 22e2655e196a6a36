"""Tabular Q-learning and Double Q-learning agents.

Tables are sparse dicts from a hashable state to a pair of action values; unseen
states read as zero. The training loop only needs an environment exposing
``reset(seed)``, ``observation()`` and ``step(action)`` returning an object with
``reward``, ``observation`` and ``terminal``, so small hand-built MDPs run
through exactly the same code as the credit-limit environment.

Seeds: every episode permutation, the behaviour (epsilon-greedy) stream and the
Double-Q table selector are separate streams derived from the master seed; see
:mod:`creditrl.seeding`.
"""

from __future__ import annotations

import csv
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Optional, Sequence, Union

import numpy as np

from .env import INCREASE, MAINTAIN, CreditLimitEnv, DiscretizedState
from .seeding import BEHAVIOUR, EPISODE, RUN, TABLE_SELECTOR, derive_seed

Q_LEARNING = "q"
DOUBLE_Q = "double_q"

DEFAULT_EPSILONS = (0.05, 0.1, 0.15)
DEFAULT_ALPHAS = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
SMOOTHING_WINDOW = 10

QTABLE_COLUMNS = DiscretizedState._fields + ("action", "q_value")
CURVE_COLUMNS = ("episode", "raw_reward", "smoothed_reward")


@dataclass(frozen=True)
class AgentConfig:
    alpha: float = 1e-2
    epsilon: float = 0.1
    gamma: float = 1.0
    episodes: int = 500
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.episodes <= 0:
            raise ValueError("episodes must be > 0")


class QTable:
    """Sparse action-value table with two actions per state."""

    def __init__(self, default: tuple[float, float] = (0.0, 0.0)):
        self.values: dict[Hashable, list[float]] = {}
        self.default = tuple(default)

    def get(self, state) -> Sequence[float]:
        return self.values.get(state, self.default)

    def __getitem__(self, key) -> float:
        state, action = key
        return self.get(state)[action]

    def __setitem__(self, key, value: float) -> None:
        state, action = key
        row = self.values.get(state)
        if row is None:
            row = self.values[state] = list(self.default)
        row[action] = value

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        return isinstance(other, QTable) and self.values == other.values and self.default == other.default

    def copy(self) -> "QTable":
        out = QTable(self.default)
        out.values = {s: list(v) for s, v in self.values.items()}
        return out

    def greedy(self, state) -> int:
        q = self.get(state)
        return INCREASE if q[1] > q[0] else MAINTAIN

    def entries(self) -> Iterable[tuple[Hashable, int, float]]:
        for s in sorted(self.values):
            for a, v in enumerate(self.values[s]):
                yield s, a, v


class QTablePair:
    """The two tables of Double Q-learning plus their Bernoulli(0.5) selector stream."""

    def __init__(self, seed: int = 0, q1: Optional[QTable] = None, q2: Optional[QTable] = None):
        self.q1 = q1 if q1 is not None else QTable()
        self.q2 = q2 if q2 is not None else QTable()
        self.selector = random.Random(seed)

    def behaviour_values(self, state) -> tuple[float, float]:
        a, b = self.q1.get(state), self.q2.get(state)
        return a[0] + b[0], a[1] + b[1]

    def table(self, which: str = "q1") -> QTable:
        if which == "q1":
            return self.q1
        if which == "q2":
            return self.q2
        if which == "mean":
            out = QTable()
            for s in sorted(set(self.q1.values) | set(self.q2.values)):
                a, b = self.q1.get(s), self.q2.get(s)
                out.values[s] = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
            return out
        raise ValueError(f"unknown table {which!r}; use q1, q2 or mean")


def epsilon_greedy(qvalues: Sequence[float], epsilon: float, rng: random.Random) -> int:
    """Uniform random action with probability epsilon, else argmax with ties to maintain."""
    if epsilon > 0 and rng.random() < epsilon:
        return rng.randrange(2)
    return INCREASE if qvalues[1] > qvalues[0] else MAINTAIN


def q_update(table: QTable, s, a: int, r: float, s_next, cfg: AgentConfig) -> float:
    row = table.values.get(s)
    if row is None:
        row = table.values[s] = list(table.default)
    if s_next is None:
        target = r
    else:
        nxt = table.get(s_next)
        target = r + cfg.gamma * (nxt[1] if nxt[1] > nxt[0] else nxt[0])
    row[a] += cfg.alpha * (target - row[a])
    return row[a]


def double_q_update(pair: QTablePair, s, a: int, r: float, s_next, cfg: AgentConfig) -> int:
    """Update one table, chosen by a fair coin, bootstrapping through the other.

    Returns 1 or 2, the table that was updated.
    """
    if pair.selector.random() < 0.5:
        upd, other, which = pair.q1, pair.q2, 1
    else:
        upd, other, which = pair.q2, pair.q1, 2
    row = upd.values.get(s)
    if row is None:
        row = upd.values[s] = list(upd.default)
    if s_next is None:
        target = r
    else:
        nxt = upd.get(s_next)
        best = INCREASE if nxt[1] > nxt[0] else MAINTAIN
        target = r + cfg.gamma * other.get(s_next)[best]
    row[a] += cfg.alpha * (target - row[a])
    return which


def smooth(raw: Sequence[float], window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """Trailing moving average; the first entries average over what is available."""
    raw = np.asarray(raw, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(raw)])
    idx = np.arange(1, len(raw) + 1)
    lo = np.maximum(0, idx - window)
    return (c[idx] - c[lo]) / (idx - lo)


@dataclass
class LearningCurve:
    raw: list[float]
    window: int = SMOOTHING_WINDOW

    @property
    def smoothed(self) -> np.ndarray:
        return smooth(self.raw, self.window)

    def final_average(self, n: int = SMOOTHING_WINDOW) -> float:
        """Mean raw reward over the last n episodes."""
        return float(np.mean(self.raw[-n:]))

    def final_smoothed_average(self, n: int = 50) -> float:
        return float(np.mean(self.smoothed[-n:]))

    def to_csv(self, path: Union[str, Path]) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CURVE_COLUMNS)
            for i, (r, s) in enumerate(zip(self.raw, self.smoothed)):
                w.writerow([i, repr(float(r)), repr(float(s))])

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "LearningCurve":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            if next(reader, None) != list(CURVE_COLUMNS):
                raise ValueError(f"{path}: malformed curve header")
            return cls([float(row[1]) for row in reader])


@dataclass
class TrainResult:
    algo: str
    config: AgentConfig
    tables: Union[QTable, QTablePair]
    curve: LearningCurve
    last_order: list[int]
    n_updates: int
    increase_counts: list[int] = field(default_factory=list)

    def table(self, which: str = "q1") -> QTable:
        if isinstance(self.tables, QTable):
            return self.tables
        return self.tables.table(which)


def train(env, cfg: AgentConfig, algo: str = DOUBLE_Q,
          tables: Union[QTable, QTablePair, None] = None) -> TrainResult:
    """Run cfg.episodes epsilon-greedy episodes, updating after every step.

    Episode e is permuted with derive_seed(cfg.seed, EPISODE, e). Double Q-learning
    acts greedily on the sum of its two tables. ``tables`` may pre-seed values.
    """
    if algo not in (Q_LEARNING, DOUBLE_Q):
        raise ValueError(f"unknown algorithm {algo!r}")
    rng = random.Random(derive_seed(cfg.seed, BEHAVIOUR))
    if algo == DOUBLE_Q:
        pair = tables if tables is not None else QTablePair()
        pair.selector = random.Random(derive_seed(cfg.seed, TABLE_SELECTOR))
        q1, q2 = pair.q1, pair.q2
    else:
        pair = tables if tables is not None else QTable()
    eps = cfg.epsilon

    raw, inc_counts = [], []
    n_updates = 0
    order: list[int] = []
    for ep in range(cfg.episodes):
        env.reset(derive_seed(cfg.seed, EPISODE, ep))
        s = env.observation()
        total = 0.0
        increases = 0
        while True:
            if algo == DOUBLE_Q:
                v1, v2 = q1.get(s), q2.get(s)
                a = epsilon_greedy((v1[0] + v2[0], v1[1] + v2[1]), eps, rng)
            else:
                a = epsilon_greedy(pair.get(s), eps, rng)
            out = env.step(a)
            nxt = None if out.terminal else out.observation
            if algo == DOUBLE_Q:
                double_q_update(pair, s, a, out.reward, nxt, cfg)
            else:
                q_update(pair, s, a, out.reward, nxt, cfg)
            n_updates += 1
            total += out.reward
            increases += a
            if nxt is None:
                break
            s = nxt
        raw.append(total)
        inc_counts.append(increases)
    if hasattr(env, "customer_order"):
        order = env.customer_order()
    return TrainResult(algo, cfg, pair, LearningCurve(raw), order, n_updates, inc_counts)


# ---------------------------------------------------------------------------
# grid search and robustness runs


@dataclass
class GridCell:
    epsilon: float
    alpha: float
    curve: LearningCurve
    final_average: float
    rank: int = 0


def _train_job(args):
    env, cfg, algo = args
    return train(env, cfg, algo)


def _map(fn, jobs_args, jobs: int):
    if jobs <= 1 or len(jobs_args) <= 1:
        return [fn(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, jobs_args))


def grid_search(env, epsilons: Sequence[float] = DEFAULT_EPSILONS, alphas: Sequence[float] = DEFAULT_ALPHAS,
                episodes: int = 500, seed: int = 0, algo: str = DOUBLE_Q, gamma: float = 1.0,
                final_window: int = SMOOTHING_WINDOW, jobs: int = 1) -> list[GridCell]:
    """Train one agent per (epsilon, alpha) cell and rank cells by final average reward.

    All cells share the master seed (common random numbers), so a 1x1 grid
    reproduces a direct ``train`` call. Ranking ties keep grid order.
    """
    if not epsilons or not alphas:
        raise ValueError("empty grid")
    cells = [(e, a) for e in epsilons for a in alphas]
    args = [(env, AgentConfig(alpha=a, epsilon=e, gamma=gamma, episodes=episodes, seed=seed), algo)
            for e, a in cells]
    results = _map(_train_job, args, jobs)
    out = [GridCell(e, a, r.curve, r.curve.final_average(final_window)) for (e, a), r in zip(cells, results)]
    for rank, i in enumerate(sorted(range(len(out)), key=lambda i: -out[i].final_average), start=1):
        out[i].rank = rank
    return out


def best_cell(cells: Sequence[GridCell]) -> GridCell:
    return min(cells, key=lambda c: c.rank)


@dataclass
class MultiSeedResult:
    curves: np.ndarray  # runs x episodes
    seeds: list[int]

    @property
    def mean(self) -> np.ndarray:
        return self.curves.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.curves.std(axis=0, ddof=1)


def multi_seed(env, cfg: AgentConfig, runs: int = 10, algo: str = DOUBLE_Q, jobs: int = 1) -> MultiSeedResult:
    """Repeat training with run seeds derived from cfg.seed; per-episode mean and sample std."""
    if runs < 2:
        raise ValueError("multi_seed needs at least 2 runs")
    seeds = [derive_seed(cfg.seed, RUN, r) for r in range(runs)]
    args = [(env, AgentConfig(cfg.alpha, cfg.epsilon, cfg.gamma, cfg.episodes, s), algo) for s in seeds]
    results = _map(_train_job, args, jobs)
    return MultiSeedResult(np.array([r.curve.raw for r in results]), seeds)


def aggregate_curves(curves: Sequence[Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(curves, dtype=float)
    return arr.mean(axis=0), arr.std(axis=0, ddof=1)


# ---------------------------------------------------------------------------
# policy extraction


HISTOGRAM_FEATURES = ("ur_bin", "pr_bin", "cr_bin", "mp_bin", "limit_bin", "int_bin", "provision_bin")


@dataclass
class PolicyExtraction:
    customer_ids: list[str]
    actions: list[int]  # in evaluation order
    observations: list[DiscretizedState]
    delta_at_decision: list[float]
    max_delta: float

    @property
    def increase_fraction(self) -> float:
        return sum(self.actions) / len(self.actions) if self.actions else 0.0

    @property
    def provision_share(self) -> float:
        """Final provision change as a share of the all-increase change."""
        if self.max_delta <= 0:
            return 0.0
        total = self.delta_at_decision[-1] if self.delta_at_decision else 0.0
        return total / self.max_delta

    def histograms(self) -> dict[str, dict[int, int]]:
        """Counts of each discretized feature value among customers given an increase."""
        out = {name: {} for name in HISTOGRAM_FEATURES}
        for obs, a in zip(self.observations, self.actions):
            if a != INCREASE:
                continue
            for name, v in zip(HISTOGRAM_FEATURES, obs):
                out[name][v] = out[name].get(v, 0) + 1
        return {name: dict(sorted(h.items())) for name, h in out.items()}


def extract_policy(table: QTable, env: CreditLimitEnv, order: Optional[Sequence[int]] = None) -> PolicyExtraction:
    """Walk the customers greedily w.r.t. ``table`` (ties to maintain) in the given order.

    Defaults to the environment's last episode order; ``delta_at_decision`` holds the
    provision change after each decision (the last entry is the episode total).
    """
    env.reset(order=order if order is not None else env.customer_order())
    ids, actions, obs, deltas = [], [], [], []
    while not env.done:
        s = env.observation()
        i = env.current
        a = table.greedy(s)
        env.step(a)
        ids.append(env.records[i].customer_id)
        actions.append(a)
        obs.append(s)
        deltas.append(env.ledger.delta_total)
    return PolicyExtraction(ids, actions, obs, deltas, env.max_delta)


# ---------------------------------------------------------------------------
# persistence


def write_qtable_csv(path: Union[str, Path], table: QTable) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(QTABLE_COLUMNS)
        for s, a, v in table.entries():
            w.writerow([*s, a, repr(float(v))])


def read_qtable_csv(path: Union[str, Path]) -> QTable:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing Q-table file: {path}")
    table = QTable()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != list(QTABLE_COLUMNS):
            raise ValueError(f"{path}: malformed Q-table header")
        for row in reader:
            state = DiscretizedState(*(int(x) for x in row[:7]))
            table[state, int(row[7])] = float(row[8])
    return table
