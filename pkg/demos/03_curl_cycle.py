"""
Linear regret from a curl cycle
===============================

Without a compatible mirror map, OGD can be steered around a rectangle in
hidden space on which the comparator field has negative curl. Each loop
costs the learner roughly -I_R/η, so regret grows linearly.
"""
import numpy as np

from ohco import CurlCycleAdversary, fit_rate, lower_bound_experiment

adv = CurlCycleAdversary(eta=0.002)
cert = adv.certificate()
print(f"cycle of {adv.N} rounds, max curl on the rectangle {cert['max_curl']:.4f}, I_R = {cert['I_R']:.6g}")

horizons = [10_000, 20_000, 40_000, 80_000]
res = lower_bound_experiment(adv, max(horizons))
print(f"per-cycle regret: measured {res.cycle_sums.mean():.4f}, predicted {res.predicted_cycle:.4f}")

regrets = np.array([res.regret_at(T) for T in horizons])
for T, r in zip(horizons, regrets):
    print(f"T={T:>6d}  regret {r:9.2f}  regret/T {r / T:.5f}")
print(f"doubling ratios {np.round(regrets[1:] / regrets[:-1], 4)},  slope {fit_rate(horizons, regrets).slope:.4f}")

# a step that is too large for the buffer aborts with the escape round
try:
    lower_bound_experiment(CurlCycleAdversary(0.1, buffer=0.005), 1000)
except Exception as exc:
    print(f"eta=0.1: {type(exc).__name__} at round {exc.round_index}")
