"""
OGD on hidden-convex losses: the √T rate
========================================

Exponential reparameterization in d = 4, linear hidden losses, step size
from the audited constants. The log-log slope of regret against T should
sit near 1/2 and every run should stay below the guaranteed bound.
"""
import numpy as np

from ohco import Box, LinearHiddenSequence, fit_rate, gallery_pair, plan_stepsize_theorem1
from ohco.lab import assumption_constants, audit_geometry, hidden_set, run_full_information_batch

q, R = gallery_pair("exponential", d=4)
X = Box(*q.x_box)
Y = hidden_set(q, X)
seqs = [LinearHiddenSequence(Y, q, s, grad_bound=1.0) for s in range(16)]

geo = audit_geometry(q, R, X)
c = assumption_constants(geo, seqs[0].constants(), q.d)
print(f"audited constants: G={c.G:.3f}  G_F={c.G_F:.3f}  D1={c.D1:.3f}")

horizons = [1000, 3000, 10_000, 30_000, 100_000]
means = []
for T in horizons:
    plan = plan_stepsize_theorem1(c, T)
    run = run_full_information_batch(q, X, seqs, T, plan, Y=Y, record=False)
    means.append(run.mean)
    print(f"T={T:>6d}  eta={plan.eta:.2e}  regret {run.mean:8.3f} ± {run.se:.3f}   "
          f"bound {plan.predicted_bound:10.1f}  worst/bound {run.regrets.max() / plan.predicted_bound:.2e}")

fit = fit_rate(horizons, means)
lo, hi = fit.slope_ci()
print(f"slope {fit.slope:.3f}  (95% CI {lo:.3f} .. {hi:.3f}),  r² {fit.r_squared:.4f}")
