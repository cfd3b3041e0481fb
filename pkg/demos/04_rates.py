"""
Decay rates and their transfer
==============================

The sup posterior variance of ``Y`` decays like ``1/n`` under P-greedy for
the Brownian kernel. The transfer inequality pushes that rate onto the
residual covariance of ``X``; the rate bound compares against uniformly
placed measurements.
"""

from greedycond import greedy, rates
from greedycond.jointmodel import brownian_restriction_model
from greedycond.transferop import transfer_for_model

model = brownian_restriction_model(0.0)
M = transfer_for_model(model)
state = greedy.run(greedy.init(model.k_yy, model.grid_y, check_bound=True), 100)

y = rates.decay_curve(model, state, "Y_residual")
fit = rates.fit_power_law(y, (10, 100))
print(f"greedy decay: alpha_hat = {fit.alpha_hat:.3f}, C = {fit.c_hat:.3f}")

base = rates.baseline_curve(model, range(10, 51))
bfit = rates.fit_power_law(base, (10, 50))
print(f"uniform baseline: alpha_hat = {bfit.alpha_hat:.3f}, C = {bfit.c_hat:.3f}")

rep = rates.check_transfer_bound(model, M, state)
print(f"transfer inequality holds for all n: {rep['pass']}")
for row in rep["per_n"][:: 20]:
    print(f"  n = {row['n']:3d}: lhs {row['lhs']:.3e} <= rhs {row['rhs']:.3e}")

rb = rates.check_rate_bound(model, M, state, (10, 50))
slack = min(r["rhs"] / r["lhs"] for r in rb["per_n"])
print(f"rate bound holds: {rb['pass']} (smallest rhs/lhs {slack:.0f})")
