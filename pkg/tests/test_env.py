import itertools
from collections import Counter

import pytest
from scipy.stats import chisquare

from creditrl.env import (
    DEFAULT_LIMIT_EDGES,
    INCREASE,
    MAINTAIN,
    CreditLimitEnv,
    DiscretizationGrid,
    EnvState,
    EpisodeFinished,
    ProvisionLedger,
    discretize,
    expected_profit,
    interest_edges_for,
    reward,
)
from creditrl.portfolio import FinancialFeatures, Portfolio, PortfolioError

from conftest import TablePredictor, make_record, random_setup


def feat(**kw):
    base = dict(ur_avg=0.2, pr_avg=0.5, cr_avg=0.1, mp=0, limit=500.0, int_monthly=0.02)
    base.update(kw)
    return FinancialFeatures(**base)


def test_expected_profit_hand_value():
    # provision at the maintained limit: 0.1 * 0.5 * (100 + 0.2 * 400) = 9
    p = expected_profit(feat(), pd=0.1, ob3=100, action=MAINTAIN, rbar=200, lgd=0.5, beta=0.5, ccf=0.2)
    assert p == pytest.approx(1.8, abs=1e-12)


def test_expected_profit_certain_default():
    p = expected_profit(feat(), pd=1.0, ob3=100, action=INCREASE, rbar=300, lgd=0.5, beta=0.5, ccf=0.2)
    assert p == -(1.0 * 0.5 * (100 + 0.2 * 650))


def test_expected_profit_inactive_riskless():
    assert expected_profit(feat(), pd=0.0, ob3=0, action=INCREASE, rbar=0, lgd=0.5, beta=0.5, ccf=0.2) == 0


def test_reward_examples():
    assert reward(1.8, 1.0, MAINTAIN) == 0
    assert reward(1.8, 1.0, INCREASE) == pytest.approx(0.8)
    assert reward(3.3, 3.3, INCREASE) == 0


@pytest.mark.parametrize("rate,expected", [(0.0, 0), (0.37, 7), (1.25, 19), (0.15, 3), (0.05, 1), (0.9999, 19)])
def test_rate_bins(rate, expected):
    assert DiscretizationGrid().rate_bin(rate) == expected


def test_limit_and_interest_bins():
    g = DiscretizationGrid()
    assert DEFAULT_LIMIT_EDGES[:3] == (100.0, 200.0, 300.0) and DEFAULT_LIMIT_EDGES[-1] == 5000.0
    assert len(DEFAULT_LIMIT_EDGES) == 18
    bins = [g.feature_bins(feat(limit=L))[4] for L in (50, 100, 101, 1000, 1200, 5000, 9000)]
    assert bins == [0, 0, 1, 9, 10, 17, 18]
    assert interest_edges_for(0.2, 0.6) == pytest.approx((0.28, 0.36, 0.44, 0.52))
    ib = [g.feature_bins(feat(int_monthly=a / 12))[5] for a in (0.1, 0.3, 0.5, 0.59, 0.9)]
    assert ib == [0, 1, 3, 4, 4]


def test_mp_cap_and_provision_bins():
    g = DiscretizationGrid()
    assert g.feature_bins(feat(mp=7))[3] == 3
    assert g.provision_bin(0.0, 200.0) == 0
    assert g.provision_bin(13.0, 200.0) == 6
    assert g.provision_bin(200.0, 200.0) == 100
    assert g.provision_bin(250.0, 200.0) == 100
    assert g.provision_bin(5.0, 0.0) == 0


def test_discretize_state():
    s = discretize(EnvState(feat(ur_avg=0.37), 50.0), DiscretizationGrid(), ProvisionLedger(max_delta=100.0))
    assert s.ur_bin == 7 and s.provision_bin == 50


def test_grid_validation():
    with pytest.raises(ValueError):
        DiscretizationGrid(limit_edges=(100, 100))
    with pytest.raises(ValueError):
        DiscretizationGrid(rate_bin_width=0)


def _ledger_env():
    # pd = lgd = 1, ob = 0: provision = ccf * limit = 6 maintained, 9 increased
    rec = make_record("A", ob=(0, 0, 0), pay=(0, 0, 0), limit=60.0, pd=1.0)
    pf = Portfolio((rec,), lgd=1.0, beta=0.5, ccf=0.1)
    return CreditLimitEnv(pf, TablePredictor({"A": 0.0}, {"A": 0.0}))


def test_step_ledger_rule():
    env = _ledger_env()
    assert env.provisions[MAINTAIN][0] == pytest.approx(6.0) and env.provisions[INCREASE][0] == pytest.approx(9.0)
    env.reset(seed=0)
    out = env.step(INCREASE)
    assert out.provision_increase == pytest.approx(3.0)
    assert env.ledger.delta_total == pytest.approx(3.0)
    assert out.terminal
    with pytest.raises(EpisodeFinished):
        env.step(MAINTAIN)


def test_maintain_leaves_ledger_and_pays_nothing(rng):
    pf, pred = random_setup(rng, 20)
    env = CreditLimitEnv(pf, pred)
    env.reset(seed=1)
    while not env.done:
        out = env.step(MAINTAIN)
        assert out.reward == 0.0 and out.provision_increase == 0.0
    assert env.ledger.delta_total == 0.0


def test_first_state_and_episode_accounting(rng):
    pf, pred = random_setup(rng, 15)
    env = CreditLimitEnv(pf, pred)
    s = env.reset(seed=3)
    assert s.delta_provisions == 0.0
    acts = rng.integers(0, 2, 15)
    total, steps = 0.0, 0
    for a in acts:
        total += env.step(int(a)).reward
        steps += 1
    assert env.done and steps == 15
    expected = sum(env.increase_rewards[i] for i, a in zip(env.customer_order(), acts) if a)
    assert total == pytest.approx(expected, abs=1e-9)


def test_same_seed_same_permutation(rng):
    pf, pred = random_setup(rng, 30)
    env = CreditLimitEnv(pf, pred)
    env.reset(seed=99)
    a = env.customer_order()
    env.reset(seed=99)
    assert env.customer_order() == a
    env.reset(seed=100)
    assert env.customer_order() != a


def test_permutation_uniform_on_three_customers(rng):
    pf, pred = random_setup(rng, 3)
    env = CreditLimitEnv(pf, pred)
    counts = Counter()
    for seed in range(6000):
        env.reset(seed=seed)
        counts[tuple(env.customer_order())] += 1
    assert set(counts) == set(itertools.permutations(range(3)))
    assert chisquare(list(counts.values())).pvalue > 0.001


def test_degenerate_ledger():
    # ob above the increased limit: no undrawn amount either way
    rec = make_record("A", ob=(900, 900, 900), limit=500.0)
    env = CreditLimitEnv(Portfolio((rec,)), TablePredictor({"A": 10.0}, {"A": 10.0}))
    assert env.max_delta == 0.0
    env.reset(seed=0)
    assert env.observation().provision_bin == 0


def test_ineligible_customers_are_excluded():
    recs = (make_record("A", months_on_book=1), make_record("B"))
    env = CreditLimitEnv(Portfolio(recs), TablePredictor({"A": 1, "B": 1}, {"A": 2, "B": 2}))
    assert [r.customer_id for r in env.records] == ["B"]
    with pytest.raises(PortfolioError, match="empty portfolio"):
        CreditLimitEnv(Portfolio(recs[:1]), TablePredictor({"A": 1}, {"A": 1}))
    with pytest.raises(PortfolioError, match="empty portfolio"):
        CreditLimitEnv(Portfolio(()), TablePredictor({}, {}))


def test_response_model_output_is_checked():
    rec = make_record("A")
    with pytest.raises(ValueError, match="non-negative"):
        CreditLimitEnv(Portfolio((rec,)), TablePredictor({"A": -1.0}, {"A": 2.0}))


def test_permutation_invariance_of_totals(rng):
    pf, pred = random_setup(rng, 25)
    env = CreditLimitEnv(pf, pred)
    assignment = rng.integers(0, 2, 25)
    totals = []
    for seed in range(5):
        env.reset(seed=seed)
        rewards = []
        while not env.done:
            rewards.append(env.step(int(assignment[env.current])).reward)
        totals.append(sum(sorted(rewards)))
    assert max(totals) - min(totals) < 1e-9


def test_ledger_non_decreasing_and_bounded(rng):
    pf, pred = random_setup(rng, 40)
    env = CreditLimitEnv(pf, pred)
    env.reset(seed=5)
    prev = 0.0
    while not env.done:
        env.step(int(rng.integers(0, 2)))
        assert prev <= env.ledger.delta_total <= env.max_delta + 1e-9
        prev = env.ledger.delta_total
