"""Episodic credit-limit MDP.

One step per customer: the agent sees the customer's financial features plus the
running change in provisions caused by earlier increases in the episode, picks
maintain (0) or increase (1), and is paid the expected-profit advantage of the
increase over maintaining. Customer order is re-permuted on every reset.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import NamedTuple, Optional, Protocol, Sequence

import numpy as np

from .portfolio import CustomerRecord, FinancialFeatures, Portfolio, PortfolioError, derive_features
from .provisioning import compute_provision

MAINTAIN, INCREASE = 0, 1
ACTIONS = (MAINTAIN, INCREASE)

# every 100 USD up to 1000, every 500 USD up to 5000, then one open top bin
DEFAULT_LIMIT_EDGES = tuple(float(x) for x in [*range(100, 1001, 100), *range(1500, 5001, 500)])
DEFAULT_INTEREST_RANGE = (0.20, 0.60)

# absorbs float noise at exact bin boundaries, e.g. 0.15 / 0.05 = 2.9999999999999996
_FLOOR_GUARD = 1e-9


class ResponseModel(Protocol):
    """Anything that predicts the prospective monthly average balance per customer."""

    def predict_response(self, records: Sequence[CustomerRecord], action: int, beta: float) -> np.ndarray:
        ...


class EpisodeFinished(RuntimeError):
    pass


def limit_after(limit: float, action: int, beta: float) -> float:
    return limit * (1.0 + beta) if action == INCREASE else limit


def expected_profit(feat: FinancialFeatures, pd: float, ob3: float, action: int, rbar: float,
                    *, lgd: float, beta: float, ccf: float) -> float:
    """Three months of interest on the predicted balance, if no default, minus the provision."""
    revenue = 3.0 * feat.int_monthly * rbar * (1.0 - pd)
    return revenue - compute_provision(pd, lgd, ob3, limit_after(feat.limit, action, beta), ccf)


def reward(profit_increase: float, profit_maintain: float, action: int) -> float:
    return profit_increase - profit_maintain if action == INCREASE else 0.0


@dataclass
class ProvisionLedger:
    max_delta: float
    delta_total: float = 0.0

    def add(self, amount: float) -> None:
        self.delta_total += amount


class EnvState(NamedTuple):
    features: FinancialFeatures
    delta_provisions: float


class DiscretizedState(NamedTuple):
    ur_bin: int
    pr_bin: int
    cr_bin: int
    mp_bin: int
    limit_bin: int
    int_bin: int
    provision_bin: int


@dataclass(frozen=True)
class DiscretizationGrid:
    rate_bin_width: float = 0.05
    limit_edges: tuple[float, ...] = DEFAULT_LIMIT_EDGES
    interest_edges: tuple[float, ...] = ()
    mp_cap: int = 3
    provision_bin_fraction: float = 0.01

    def __post_init__(self):
        if not self.interest_edges:
            object.__setattr__(self, "interest_edges", interest_edges_for(*DEFAULT_INTEREST_RANGE))
        object.__setattr__(self, "limit_edges", tuple(float(x) for x in self.limit_edges))
        object.__setattr__(self, "interest_edges", tuple(float(x) for x in self.interest_edges))
        if not (0 < self.rate_bin_width <= 1) or not (0 < self.provision_bin_fraction <= 1):
            raise ValueError("bin widths must lie in (0, 1]")
        for name in ("limit_edges", "interest_edges"):
            edges = getattr(self, name)
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise ValueError(f"{name} must be strictly ascending")
        if self.mp_cap < 0:
            raise ValueError("mp_cap must be >= 0")

    @classmethod
    def for_interest_range(cls, low: float, high: float, n_bins: int = 5, **kw) -> "DiscretizationGrid":
        return cls(interest_edges=interest_edges_for(low, high, n_bins), **kw)

    @property
    def n_rate_bins(self) -> int:
        return int(round(1.0 / self.rate_bin_width))

    @property
    def n_provision_bins(self) -> int:
        return int(round(1.0 / self.provision_bin_fraction)) + 1

    def rate_bin(self, rate: float) -> int:
        b = math.floor(rate / self.rate_bin_width + _FLOOR_GUARD)
        return min(max(b, 0), self.n_rate_bins - 1)

    def feature_bins(self, feat: FinancialFeatures) -> tuple[int, int, int, int, int, int]:
        return (
            self.rate_bin(feat.ur_avg),
            self.rate_bin(feat.pr_avg),
            self.rate_bin(feat.cr_avg),
            min(feat.mp, self.mp_cap),
            bisect_left(self.limit_edges, feat.limit),
            bisect_left(self.interest_edges, feat.int_monthly * 12.0),
        )

    def provision_bin(self, delta_total: float, max_delta: float) -> int:
        if max_delta <= 0:
            return 0
        b = math.floor(delta_total / (self.provision_bin_fraction * max_delta) + _FLOOR_GUARD)
        return min(max(b, 0), self.n_provision_bins - 1)


def interest_edges_for(low: float, high: float, n_bins: int = 5) -> tuple[float, ...]:
    """Interior edges splitting [low, high] (annual rates) into n_bins uniform bins."""
    if not high > low or n_bins < 1:
        raise ValueError("interest range must satisfy high > low and n_bins >= 1")
    step = (high - low) / n_bins
    return tuple(low + step * k for k in range(1, n_bins))


def discretize(state: EnvState, grid: DiscretizationGrid, ledger: ProvisionLedger) -> DiscretizedState:
    return DiscretizedState(*grid.feature_bins(state.features),
                            grid.provision_bin(state.delta_provisions, ledger.max_delta))


@dataclass(slots=True)
class StepOutcome:
    reward: float
    next_state: Optional[EnvState]  # None once the last customer has been decided
    provision_increase: float
    customer: int = -1
    observation: Optional[DiscretizedState] = None

    @property
    def terminal(self) -> bool:
        return self.next_state is None


class CreditLimitEnv:
    """Environment over the eligible customers of a portfolio.

    The response model is queried once per action for the whole portfolio at
    construction, so the environment is deterministic given (portfolio, seed,
    response model).
    """

    def __init__(self, portfolio: Portfolio, predictor: ResponseModel,
                 grid: Optional[DiscretizationGrid] = None):
        portfolio.require_nonempty()
        records = [c for c in portfolio.customers if c.eligible]
        if not records:
            raise PortfolioError("empty portfolio: no eligible customers")
        self.portfolio = portfolio
        self.records: list[CustomerRecord] = records
        self.grid = grid or DiscretizationGrid()
        self.features = [derive_features(r) for r in records]
        lgd, beta, ccf = portfolio.lgd, portfolio.beta, portfolio.ccf

        rbar = []
        for a in ACTIONS:
            pred = np.asarray(predictor.predict_response(records, a, beta), dtype=float)
            if pred.shape != (len(records),) or not np.all(np.isfinite(pred)) or np.any(pred < 0):
                raise ValueError("response model must return one finite, non-negative balance per customer")
            rbar.append(pred.tolist())
        self.rbar = tuple(rbar)

        self.provisions = tuple(
            [compute_provision(r.pd, lgd, r.ob[2], limit_after(r.limit, a, beta), ccf) for r in records]
            for a in ACTIONS
        )
        self.profits = tuple(
            [expected_profit(f, r.pd, r.ob[2], a, rb, lgd=lgd, beta=beta, ccf=ccf)
             for f, r, rb in zip(self.features, records, self.rbar[a])]
            for a in ACTIONS
        )
        self.increase_rewards = [reward(p1, p0, INCREASE) for p0, p1 in zip(*self.profits)]
        self.provision_increases = [p1 - p0 for p0, p1 in zip(*self.provisions)]
        self.max_delta = float(sum(self.provision_increases))
        self._feature_bins = [self.grid.feature_bins(f) for f in self.features]

        self.order: Optional[np.ndarray] = None
        self._order: list[int] = []
        self._pos = 0
        self.ledger = ProvisionLedger(max_delta=self.max_delta)

    @property
    def n_customers(self) -> int:
        return len(self.records)

    @property
    def done(self) -> bool:
        return self._pos >= len(self._order)

    @property
    def current(self) -> int:
        """Portfolio index of the customer awaiting a decision."""
        if self.done:
            raise EpisodeFinished("episode is terminal")
        return self._order[self._pos]

    def reset(self, seed=None, order: Optional[Sequence[int]] = None) -> EnvState:
        """Start an episode with a freshly permuted customer order.

        ``seed`` is anything accepted by numpy.random.default_rng. An explicit
        ``order`` replays a given permutation instead.
        """
        if order is None:
            self.order = np.random.default_rng(seed).permutation(self.n_customers)
        else:
            self.order = np.asarray(order, dtype=int)
            if sorted(self.order.tolist()) != list(range(self.n_customers)):
                raise ValueError("order must be a permutation of the customer indices")
        self._order = self.order.tolist()
        self._pos = 0
        self.ledger = ProvisionLedger(max_delta=self.max_delta)
        return self.state()

    def state(self) -> EnvState:
        return EnvState(self.features[self.current], self.ledger.delta_total)

    def observation(self) -> DiscretizedState:
        i = self.current
        pb = self.grid.provision_bin(self.ledger.delta_total, self.max_delta)
        return tuple.__new__(DiscretizedState, self._feature_bins[i] + (pb,))

    def step(self, action: int) -> StepOutcome:
        if self.done:
            raise EpisodeFinished("cannot step a terminal episode")
        i = self._order[self._pos]
        r = reward(self.profits[INCREASE][i], self.profits[MAINTAIN][i], action)
        increase = self.provisions[action][i] - self.provisions[MAINTAIN][i]
        self.ledger.delta_total += increase
        self._pos += 1
        if self.done:
            return StepOutcome(r, None, increase, i, None)
        return StepOutcome(r, self.state(), increase, i, self.observation())

    def customer_order(self) -> list[int]:
        return list(self._order)
