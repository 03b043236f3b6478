"""
Distribution estimation: no-improvement and improvement stages
===============================================================

For the empirical CDF the error is measured with the Cramer-von Mises
integral. Synthetic data only helps once ``w`` exceeds
``(n - 1) / (n + 2m - 1)``; below that the mixed estimate is worse than
using the real sample alone, and as ``w -> 0`` the error tends to ``1/6``.
"""

import numpy as np

from recursive_mixing import MixConfig, RngStream, analytics, run_cdf_chains

n, m = 50, 50
thr = analytics.cdf_improvement_threshold(n, m)
w_best = analytics.cdf_optimal_weight(n, m)
print(f"real-only error 1/(6n) = {1 / (6 * n):.5f}")
print(f"improvement threshold  = {thr:.4f}")
print(f"optimal weight         = {w_best:.4f}, limit {analytics.cdf_limit_error(w_best, n, m):.5f}")

for w in (0.01, 0.2, thr, 0.5, w_best, 0.9, 1.0):
    regime = analytics.classify_regime("cdf", w, n, m).value
    print(f"w={w:.3f}  limit {analytics.cdf_limit_error(w, n, m):.5f}  {regime}")

# simulation: tail-averaged error over the last 31 rounds, 400 chains each
streams = [RngStream(0, r) for r in range(400)]
for w in (0.2, w_best, 1.0):
    errs = run_cdf_chains(MixConfig(w, n, m), 120, streams).cvm_err
    tail = errs[:, -31:].mean(axis=1)
    se = tail.std(ddof=1) / np.sqrt(tail.size)
    print(f"w={w:.3f}  simulated {tail.mean():.5f} +- {se:.5f}   closed form {analytics.cdf_limit_error(w, n, m):.5f}")

# larger m shrinks the no-improvement stage
for mm in (10, 100, 1000, 10000):
    print(f"m={mm:<6} threshold {analytics.cdf_improvement_threshold(100, mm):.4f}")
