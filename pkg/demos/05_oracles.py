"""
Independent cross-checks
========================

The posterior residual is computed three ways and compared: the Newton
recursion used by the greedy loop, a Cholesky solve, and an SVD Schur
complement. A Monte-Carlo regression on joint samples checks them against
sampling.
"""

import numpy as np

from greedycond import conditioning as cond
from greedycond import greedy
from greedycond.jointmodel import brownian_restriction_model, eigen_truncation_model

model = brownian_restriction_model(0.0)
state = greedy.run(greedy.init(model.k_yy, model.grid_y), 50)
sel = state.selected[:25]

newton = cond.newton_residual(model, state, 25)
chol = cond.posterior_kernel(model, sel).residual_matrix()
schur = cond.schur_oracle(model, sel)
print(f"newton vs schur {np.max(np.abs(newton - schur)):.1e}, "
      f"cholesky vs schur {np.max(np.abs(chol - schur)):.1e}")

for name, m, s in (("brownian, 25 greedy points", model, sel),
                   ("eigen truncation", eigen_truncation_model([1, .5, .25, .125], [0, 2]), [0, 1])):
    mc = cond.monte_carlo_oracle(m, s, 100_000, seed=0)
    print(f"{name}: {mc.agreement(cond.schur_oracle(m, s)):.3f} of entries within 3 SE")
