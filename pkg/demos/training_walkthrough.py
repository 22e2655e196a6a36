"""
Double Q-learning on a synthetic portfolio
==========================================

A short grid search, a longer run of the best cell, and the greedy policy
the table implies. Rewards are reported as a share of the exact oracle.
"""


from creditrl.agents import AgentConfig, best_cell, extract_policy, grid_search, multi_seed, train
from creditrl.baselines import oracle_total
from creditrl.env import CreditLimitEnv
from creditrl.synth import GroundTruthPredictor, SynthConfig, generate_portfolio

data = generate_portfolio(SynthConfig(n_customers=500, seed=0))
env = CreditLimitEnv(data.portfolio, GroundTruthPredictor.from_data(data))
oracle = oracle_total(env)
print("oracle total", round(oracle, 2))

cells = grid_search(env, epsilons=(0.05, 0.1), alphas=(1e-6, 1e-4, 1e-2), episodes=150, seed=0)
for c in sorted(cells, key=lambda c: c.rank):
    print(f"eps {c.epsilon:<5} alpha {c.alpha:<7g} final average {c.final_average / oracle:6.3f} of oracle")

best = best_cell(cells)
res = train(env, AgentConfig(alpha=best.alpha, epsilon=best.epsilon, episodes=400, seed=0))
print("last 50 smoothed", round(res.curve.final_smoothed_average(50) / oracle, 3), "of oracle")

policy = extract_policy(res.table("q1"), env)
print(f"greedy policy increases {policy.increase_fraction:.1%} of customers, "
      f"using {policy.provision_share:.1%} of the all-increase provision change")
print("increases by missed-payment bin", policy.histograms()["mp_bin"])

# spread across seeds
ms = multi_seed(env, AgentConfig(alpha=best.alpha, epsilon=best.epsilon, episodes=60, seed=0), runs=5)
print("5-seed mean of the last episode", round(ms.mean[-1], 2), "+-", round(ms.std[-1], 2))
