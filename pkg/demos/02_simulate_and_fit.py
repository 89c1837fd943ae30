import time

from stsar import PAPER_TRUTH, SimConfig, fit_mle, gen_dataset, standard_errors

# Truth: beta = (2, 2), theta = 0.8, alpha = 0.2, sigma2 = 1; covariate sin(i).
print(PAPER_TRUTH)

cfg = SimConfig(r=8, r_star=2, m=5, truth=PAPER_TRUTH, seed=2024)
data = gen_dataset(cfg)
w = cfg.weights()
print("n =", data.n, " m =", data.m, " p =", data.p)

t0 = time.perf_counter()
fit = fit_mle(data, w)
print(f"fitted in {time.perf_counter() - t0:.2f} s")

print(fit.report())

# The same intervals at another level
for name, est, se, lo, hi in standard_errors(fit, level=0.9):
    print(f"{name:7s} {est:8.4f}  [{lo:8.4f}, {hi:8.4f}]")

# With a single time point alpha is not identified and is dropped
one = fit_mle(gen_dataset(SimConfig(8, 2, 1, seed=1)), w)
print(one.names, one.alpha_fixed)
