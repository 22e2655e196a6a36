import numpy as np
import pytest
from dataclasses import replace
from scipy.stats import binomtest

from creditrl.env import CreditLimitEnv
from creditrl.portfolio import derive_features
from creditrl.predictor import classes_of
from creditrl.synth import (
    ARCHETYPES,
    DEFAULT_ARCHETYPES,
    GroundTruthPredictor,
    SynthConfig,
    allocate_counts,
    generate_portfolio,
    generate_training_table,
    preset,
    read_ground_truth_csv,
    write_ground_truth_csv,
)


def test_same_seed_same_portfolio():
    a = generate_portfolio(SynthConfig(n_customers=200, seed=4))
    b = generate_portfolio(SynthConfig(n_customers=200, seed=4))
    c = generate_portfolio(SynthConfig(n_customers=200, seed=5))
    assert a == b
    assert a.portfolio.customers != c.portfolio.customers


@pytest.mark.parametrize("mix,n,expected", [
    ((0.25, 0.25, 0.25, 0.25), 10, [3, 3, 2, 2]),
    ((0.5, 0.5, 0.0, 0.0), 7, [4, 3, 0, 0]),
    ((0.45, 0.20, 0.10, 0.25), 2000, [900, 400, 200, 500]),
])
def test_largest_remainder(mix, n, expected):
    assert allocate_counts(mix, n) == expected


def test_archetype_counts_follow_mix():
    for seed, mix in [(0, (0.45, 0.20, 0.10, 0.25)), (1, (0.1, 0.2, 0.3, 0.4)), (2, (0.57, 0.31, 0.07, 0.05))]:
        data = generate_portfolio(SynthConfig(n_customers=333, seed=seed, archetype_mix=mix))
        counts = [data.archetypes.count(a) for a in ARCHETYPES]
        assert sum(counts) == 333
        assert all(abs(c - m * 333) <= 2 for c, m in zip(counts, mix))


def test_every_record_is_valid_and_eligible():
    data = generate_portfolio(SynthConfig(n_customers=500, seed=3))
    for rec in data.portfolio.customers:
        rec.validate()
        assert rec.months_on_book >= 3
    assert len({r.customer_id for r in data.portfolio.customers}) == 500


def test_full_payers_carry_nothing_and_never_pay_off_an_increase():
    data = generate_portfolio(SynthConfig(n_customers=150, seed=2, archetype_mix=(1.0, 0.0, 0.0, 0.0)))
    assert all(r.rbar_maintain == 0 == r.rbar_increase for r in data.responses)
    for rec in data.portfolio.customers:
        assert derive_features(rec).pr_avg == 1.0
    env = CreditLimitEnv(data.portfolio, GroundTruthPredictor.from_data(data))
    assert max(env.increase_rewards) <= 0.0
    assert min(env.increase_rewards) < 0.0


def test_increase_response_never_lower_and_capped():
    data = generate_portfolio(SynthConfig(n_customers=1000, seed=6))
    beta = data.portfolio.beta
    for rec, resp in zip(data.portfolio.customers, data.responses):
        assert 0.0 <= resp.rbar_maintain <= resp.rbar_increase <= rec.limit * (1 + beta)


def test_default_preset_has_profitable_and_unprofitable_increases():
    data = generate_portfolio(SynthConfig(n_customers=2000, seed=0))
    env = CreditLimitEnv(data.portfolio, GroundTruthPredictor.from_data(data))
    r = np.array(env.increase_rewards)
    frac = float(np.mean(r > 0))
    assert 0.1 < frac < 0.6
    assert r[r > 0].sum() > -r[r < 0].sum()


def test_response_noise_keeps_zero_balances():
    data = generate_portfolio(SynthConfig(n_customers=300, seed=1, response_noise=20.0))
    for name, resp in zip(data.archetypes, data.responses):
        assert resp.rbar_maintain >= 0 and resp.rbar_increase >= 0
        if name == "full_payer":
            assert resp.rbar_maintain == 0 == resp.rbar_increase


@pytest.mark.parametrize("rate", [0.0, 1.0])
def test_training_table_extreme_rates(rate):
    rows = generate_training_table(SynthConfig(n_customers=200, seed=1), rate)
    assert {r.ha_p for r in rows} == {int(rate)}
    for r in rows:
        assert r.limit_post == pytest.approx(r.record.limit * (1 + 0.5 * r.ha_p))


def test_training_table_rate_is_binomial():
    n, rate = 4000, 0.3
    rows = generate_training_table(SynthConfig(n_customers=n, seed=8), rate)
    k = sum(r.ha_p for r in rows)
    assert binomtest(k, n, rate).pvalue > 0.001


def test_training_table_targets_are_ground_truth():
    cfg = SynthConfig(n_customers=100, seed=9)
    data = generate_portfolio(cfg)
    rows = generate_training_table(cfg, 0.5)
    for row, resp in zip(rows, data.responses):
        assert row.target_rbar == resp[row.ha_p]
    with pytest.raises(ValueError):
        generate_training_table(cfg, 1.5)


def test_imbalance_preset_class_shares():
    rows = generate_training_table(preset("imbalance", seed=0), 0.3)
    shares = np.bincount(classes_of([r.target_rbar for r in rows]), minlength=3) / len(rows)
    assert shares.min() < 0.25 and shares.max() > 0.45


def test_ground_truth_round_trip(tmp_path):
    data = generate_portfolio(SynthConfig(n_customers=50, seed=11, response_noise=3.0))
    p = tmp_path / "gt.csv"
    write_ground_truth_csv(p, data)
    back = read_ground_truth_csv(p)
    assert [back[r.customer_id] for r in data.portfolio.customers] == list(data.responses)


def test_ground_truth_predictor_checks_beta_and_ids():
    data = generate_portfolio(SynthConfig(n_customers=20, seed=0))
    pred = GroundTruthPredictor.from_data(data)
    recs = data.portfolio.customers
    np.testing.assert_array_equal(pred.predict_response(recs, 1, 0.5), [r.rbar_increase for r in data.responses])
    with pytest.raises(ValueError, match="beta"):
        pred.predict_response(recs, 1, 0.3)
    with pytest.raises(KeyError, match="no ground-truth response"):
        GroundTruthPredictor({}).predict_response(recs[:1], 0, 0.5)


def test_config_validation():
    with pytest.raises(ValueError, match="sum to 1"):
        generate_portfolio(SynthConfig(archetype_mix=(0.5, 0.5, 0.5, 0.0)))
    with pytest.raises(ValueError, match="n_customers"):
        generate_portfolio(SynthConfig(n_customers=0))
    bad = {**DEFAULT_ARCHETYPES, "at_risk": replace(DEFAULT_ARCHETYPES["at_risk"], pd=(0.5, 1.2))}
    with pytest.raises(ValueError, match="pd range"):
        generate_portfolio(SynthConfig(archetypes=bad))
    with pytest.raises(KeyError, match="unknown synth preset"):
        preset("nope")
