"""
Provisions and the cost of a limit increase
===========================================

Exposure at default, the provision it implies, and how a portfolio CCF is
estimated from customers who defaulted.
"""

from creditrl.provisioning import (
    DefaulterObservation,
    compute_ead,
    compute_provision,
    individual_ccf,
    portfolio_ccf,
)

# a customer owing 100 on a 500 limit; 40% of the undrawn 400 is expected to be drawn
print("EAD               ", compute_ead(ob=100, limit=500, ccf=0.4))
print("provision         ", compute_provision(pd=0.05, lgd=0.6, ob=100, limit=500, ccf=0.4))

# raising the limit by half only grows the undrawn part
beta = 0.5
before = compute_provision(0.05, 0.6, 100, 500, 0.4)
after = compute_provision(0.05, 0.6, 100, 500 * (1 + beta), 0.4)
print(f"increase cost      {after - before:.2f} USD")

# CCF from defaulters: share of the undrawn limit used by default time
defaulters = [
    DefaulterObservation(ob_at_default=150, ob_at_period_start=100, limit=200),
    DefaulterObservation(ob_at_default=180, ob_at_period_start=100, limit=200),
    DefaulterObservation(ob_at_default=90, ob_at_period_start=100, limit=200),   # paid down: clamps to 0
    DefaulterObservation(ob_at_default=260, ob_at_period_start=200, limit=200),  # nothing undrawn: skipped
]
for d in defaulters:
    print("CCF_d", d, "->", individual_ccf(d))
print("portfolio CCF     ", portfolio_ccf(defaulters))
