"""
Cheap estimates of the condition numbers
========================================

Exact condition numbers need the full Jacobian of the solution map.  The
power method and small-sample statistical estimation only apply it to a
few vectors, which is what matters for larger problems.
"""

import time

import numpy as np

from tikhcond import PowerOpts, SceOpts, cond_exact, cond_power, cond_sce, gen_example

problem = gen_example("toeplitz_rho(100,50,0.99999)").problem(6.19e-2)

t0 = time.perf_counter()
exact = cond_exact(problem)
t_exact = time.perf_counter() - t0

t0 = time.perf_counter()
power = cond_power(problem, opts=PowerOpts(restarts=3))
t_power = time.perf_counter() - t0

print(f"{'':>8} {'normwise':>10} {'mixed':>10} {'componentwise':>14} {'seconds':>9}")
for name, t, s in (("exact", exact, t_exact), ("power", power, t_power)):
    print(f"{name:>8} {t.normwise:10.4g} {t.mixed:10.4g} {t.componentwise:14.4g} {s:9.4f}")

###############################################################################
# The statistical estimates are random variables.  Over many seeds they
# scatter around the exact values, typically within a small factor.

runs = np.array([[t.normwise, t.mixed, t.componentwise]
                 for t in (cond_sce(problem, opts=SceOpts(k=3, seed=s)) for s in range(50))])
ref = np.array([exact.normwise, exact.mixed, exact.componentwise])
q = np.percentile(runs / ref, [10, 50, 90], axis=0)
for name, col in zip(("normwise", "mixed", "componentwise"), q.T):
    print(f"sce/exact {name:>13}: 10% {col[0]:.3f}  median {col[1]:.3f}  90% {col[2]:.3f}")

###############################################################################
# Fixed seeds give identical numbers, with or without threads.

a = cond_sce(problem, opts=SceOpts(seed=42))
b = cond_sce(problem, opts=SceOpts(seed=42, workers=4))
print("identical:", a.to_json() == b.to_json())
