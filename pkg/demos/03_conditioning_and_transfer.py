"""
Conditioning on point evaluations and the transfer operator
===========================================================

Brownian motion ``X`` on ``[0, 1]`` is observed as ``Y = X`` on
``[1/2, 1]``. After full observation the residual is a Brownian bridge on
``[0, 1/2]``; a transfer operator ``M`` with ``M Y = E[X | Y]`` produces
the same covariance as ``K_xx - M K_yy M^T``.
"""

import numpy as np

from greedycond import conditioning as cond
from greedycond import greedy
from greedycond.jointmodel import brownian_restriction_model
from greedycond.transferop import operator_norm, probe_norm, transfer_for_model

model = brownian_restriction_model(0.0)
xs = model.grid_x.points

# One measurement at t = 1/2 already pins the left half
pk = cond.posterior_kernel(model, [model.grid_y.index_of(0.5)])
print(f"var(X(1/4) | Y(1/2)) = {pk.residual(0.25, 0.25):.4f}")
print(f"residual opnorm after one point: {cond.residual_opnorm(pk).to_dict()}")

M = transfer_for_model(model)
R = cond.conditional_cov_via_M(model, M)
i = model.grid_x.index_of(0.25)
print(f"via M: var(X(1/4) | Y) = {R[i, i]:.4f} (bridge value 1/8)")
print(f"|M| = {operator_norm(M):.3f}, probe estimate {probe_norm(M):.3f}")

# Greedy measurements of Y drive the X residual toward cov(X | Y)
state = greedy.run(greedy.init(model.k_yy, model.grid_y), 20)
full = cond.full_observation_residual(model)
for n in (0, 1, 2, 5, 10, 20):
    gap = np.max(np.diag(cond.newton_residual(model, state, n) - full))
    print(f"n = {n:2d}: sup diag(cov(X|Y_n) - cov(X|Y)) = {gap:.2e}")

# Noise inflates the transfer norm
noisy = brownian_restriction_model(0.5)
print(f"noisy model |M| = {operator_norm(transfer_for_model(noisy)):.3f}")
