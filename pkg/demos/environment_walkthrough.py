"""
The credit-limit environment
============================

A synthetic portfolio with known balance responses, one episode stepped by
hand, and the per-customer reward that makes the exact oracle possible.
"""

import numpy as np

from creditrl.baselines import oracle_total
from creditrl.env import INCREASE, MAINTAIN, CreditLimitEnv
from creditrl.synth import GroundTruthPredictor, SynthConfig, generate_portfolio

data = generate_portfolio(SynthConfig(n_customers=12, seed=1))
env = CreditLimitEnv(data.portfolio, GroundTruthPredictor.from_data(data))

for rec, name, r in zip(env.records, data.archetypes, env.increase_rewards):
    print(f"{rec.customer_id}  {name:<14} limit {rec.limit:>6.0f}  pd {rec.pd:.3f}  reward(increase) {r:8.2f}")

# one episode: increase everyone with a positive reward, maintain the rest
env.reset(seed=7)
total = 0.0
while not env.done:
    i = env.current
    obs = env.observation()
    a = INCREASE if env.increase_rewards[i] > 0 else MAINTAIN
    out = env.step(a)
    total += out.reward
    print(f"step {env.records[i].customer_id} state {tuple(obs)} action {a} reward {out.reward:7.2f} "
          f"ledger {env.ledger.delta_total:7.2f}")

print("episode total", round(total, 6), "oracle", round(oracle_total(env), 6))
print("provision budget if everyone were increased", round(env.max_delta, 2))

# the customer order changes per episode, the total for a fixed assignment does not
totals = []
for seed in range(5):
    env.reset(seed=seed)
    totals.append(sum(env.step(int(env.increase_rewards[env.current] > 0)).reward for _ in range(env.n_customers)))
print("totals over 5 orders", np.round(totals, 9))
