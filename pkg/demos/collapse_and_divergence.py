"""
Collapse without real data, divergence with too little
======================================================

Training only on your own samples (``w = 0``) makes the mean error grow
linearly in the number of rounds. For the covariance it is worse: any
weight at or below ``1 - sqrt((m-1)/(m+1))`` gives an infinite limit.
"""

from recursive_mixing import ScenarioConfig, analytics, run_scenario

# fully synthetic mean estimation: E err_t = tr/n + t tr/m
cfg = ScenarioConfig(scenario="collapse_demo", model="gauss_mean", n=100, m=100, T=200,
                     replications=300, w_grid=[0.0, 0.618], tail_len=0, seed=0)
res = run_scenario(cfg)
for t in (1, 50, 100, 200):
    print(f"t={t:3d}  w=0: {res.series['w=0'][t].mean_error:.4f} (expected {0.01 + t * 0.01:.4f})"
          f"   w=0.618: {res.series['w=0.618'][t].mean_error:.4f}")

# the covariance threshold depends on m only
for m in (5, 10, 100, 1000):
    print(f"m={m:5d}  divergence threshold {analytics.cov_divergence_threshold(m):.5f}")

# either side of the threshold for m = 10
for w in (0.05, 0.0954, 0.0955, 0.3, 1.0):
    lim = analytics.gaussian_cov_limit(w, 10, 10, 1.0, 0.25)
    regime = analytics.classify_regime("gaussian_cov", w, 10, 10, 1.0, 0.25).value
    print(f"w={w:<7} limit {lim.value:<12.6g} {regime}")

# simulated covariance error: bounded at w = 0.3, a few exploding chains at w = 0.05
cfg = ScenarioConfig(scenario="collapse_demo", model="gauss_cov", n=10, m=10, T=200,
                     replications=500, w_grid=[0.05, 0.3], tail_len=0, seed=0)
res = run_scenario(cfg)
for name, pts in res.series.items():
    print(f"{name}: t=1 {pts[1].mean_error:.4g}, t=200 {pts[-1].mean_error:.4g}")
print(f"closed-form limit at w=0.3: {analytics.gaussian_cov_limit_finite(0.3, 10, 10, 1.0, 0.25):.4g}")
