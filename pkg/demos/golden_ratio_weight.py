"""
The golden-ratio weight
=======================

Each round refits a mean on ``n`` fresh real points and ``m`` synthetic
points drawn from the previous fit, weighting the two groups ``w`` and
``1 - w``. With ``n = m`` the limiting error is smallest at
``w = (sqrt(5) - 1) / 2``.
"""

import numpy as np

from recursive_mixing import ScenarioConfig, analytics, run_scenario

# closed form first: the amplification factor C(w, k) for k = n/m = 1
ws = np.linspace(0.05, 1.0, 96)
c = np.array([analytics.c_factor(w, 1.0) for w in ws])
print(f"grid argmin of C(w, 1): {ws[np.argmin(c)]:.3f}")
print(f"optimal_weight(1):      {analytics.optimal_weight(1.0):.10f}")
print(f"C at the optimum equals the optimum: {analytics.c_factor(analytics.optimal_weight(1.0), 1.0):.10f}")

# naive pooling puts weight n/(n+m) = 1/2 on the real data
for w in (0.5, analytics.optimal_weight(1.0), 1.0):
    print(f"w={w:.3f}  limit error x n / tr(Sigma) = {analytics.c_factor(w, 1.0):.4f}")

# now the same thing by simulation, a reduced weight sweep
cfg = ScenarioConfig(scenario="golden_sweep", model="gauss_mean", n=50, m=50, T=120,
                     replications=200, w_grid="0.3:0.05:0.95", tail_len=50, seed=1)
res = run_scenario(cfg)
print("\n   w    simulated   closed form")
for pt in res.points:
    ref = analytics.gaussian_mean_limit(pt.grid_value, 1.0, cfg.n, 1.0)
    print(f"{pt.grid_value:5.2f}  {pt.mean_error:.6f}   {ref:.6f}")
print(f"simulated argmin: {res.argmin():.2f}")
