"""
Rule-based baselines
====================

Every comparison policy evaluated on the same portfolio, seed and response
model, next to the exact oracle.
"""

from creditrl.baselines import (
    ORACLE,
    PolicySpec,
    PropensityModel,
    compare,
    default_specs,
    evaluate_policy,
)
from creditrl.env import CreditLimitEnv
from creditrl.synth import GroundTruthPredictor, SynthConfig, generate_portfolio, generate_training_table

cfg = SynthConfig(n_customers=1000, seed=0)
data = generate_portfolio(cfg)
env = CreditLimitEnv(data.portfolio, GroundTruthPredictor.from_data(data))

# the current-policy baseline imitates historical decisions
propensity = PropensityModel(seed=0).fit(generate_training_table(SynthConfig(n_customers=1000, seed=1), 0.3))

evals = [evaluate_policy(s, env, episodes=50, seed=0, propensity=propensity) for s in default_specs()]
evals.append(evaluate_policy(PolicySpec(ORACLE), env, episodes=50, seed=0))
for row in compare(evals):
    print(f"{row['strategy']:<14} mean {row['mean_reward']:10.2f}  std {row['std_reward']:8.2f}  "
          f"increased {row['increase_fraction']:.1%}")
