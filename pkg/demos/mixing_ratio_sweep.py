"""
Optimal weight against naive pooling across mixing ratios
=========================================================

With ``k = n/m`` real-to-synthetic ratio the best weight is
``(sqrt(k^2 + 4k) - k) / 2``. Pooling the data unweighted uses
``k / (k + 1)`` instead, which is always worse.
"""

from recursive_mixing import ScenarioConfig, analytics, run_scenario

print("    k    w_opt   w_naive  C(w_opt)  C(w_naive)")
for k in (0.01, 0.1, 0.5, 1.0, 2.0, 10.0):
    ws, w0 = analytics.optimal_weight(k), analytics.naive_weight(k)
    print(f"{k:5.2f}  {ws:.4f}  {w0:.4f}   {analytics.c_factor(ws, k):.4f}    {analytics.c_factor(w0, k):.4f}")

# a small simulated sweep; both weights see the same random streams
for model in ("gauss_mean", "cdf"):
    cfg = ScenarioConfig(scenario="k_sweep", model=model, n=100, T=100, replications=64,
                         k_grid="0.05,0.1,0.5,1.0", tail_len=30, seed=0)
    res = run_scenario(cfg)
    print(f"\n{model}")
    for a, b, d, m in zip(res.series["optimal"], res.series["naive"], res.series["difference"],
                          res.extras["m_values"]):
        print(f"k={a.grid_value:<5} m={m:<5} optimal {a.mean_error:.3e}  naive {b.mean_error:.3e}  "
              f"paired diff {d.mean_error:+.2e} [{d.ci_low:+.2e}, {d.ci_high:+.2e}]")
