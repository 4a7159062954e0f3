"""
One-point bandit feedback and the T^{3/4} rate
==============================================

BOGD on the unit ball sees a single loss value per round. A small drift in
the hidden losses keeps the comparator on the boundary, which is where the
shrinkage cost δ·T shows up and the rate becomes T^{3/4}.
"""
import numpy as np

from ohco import Ball, QuadraticHiddenSequence, bandit_decomposition, fit_rate, gallery_pair
from ohco.lab import assumption_constants, audit_geometry, run_bandit_batch
from ohco.learners import plan_stepsize_theorem4

q, R = gallery_pair("identity")
X = Ball([0.0, 0.0], 1.0)
drift = np.array([1.0, 1.0]) / np.sqrt(2)
seqs = [QuadraticHiddenSequence(X, q, s, mu_max=0.1, linear_radius=0.5, drift=drift) for s in range(16)]
c = assumption_constants(audit_geometry(q, R, X), seqs[0].constants(), q.d)

horizons = [10_000, 30_000, 100_000]
means = []
for T in horizons:
    plan = plan_stepsize_theorem4(c, T)
    run = run_bandit_batch(q, X, seqs, T, plan, Y=X, diagnostics=True)
    rep = bandit_decomposition(run, c)
    means.append(run.mean)
    terms = "  ".join(f"{k}={v:8.2f}" for k, v in rep.means.items())
    print(f"T={T:>6d} delta={plan.delta:.3f} regret {run.mean:8.2f} ± {run.se:5.2f}  {terms}")
    print(f"         R2 <= {rep.bound_R2:.1f}: {rep.R2_ok}   |R4| <= {rep.bound_R4:.1f}: {rep.R4_ok}")

print(f"slope over {len(horizons)} horizons: {fit_rate(horizons, means, min_points=3).slope:.3f}")
