"""
How sharp are the bounds?
=========================

Perturb the data entrywise by a relative amount ``eps``, re-solve, and
compare the observed change of the solution with ``eps`` times the
condition number.  Ratios near one mean the bound is tight.
"""

import numpy as np

from tikhcond import ExperimentSpec, cond_exact, gen_example, perturb_and_measure

for example, lam in (("hankel6", 7.5918e-4), ("vandermonde25x10", 5.69), ("cauchy10x8", 6.97e-7)):
    problem = gen_example(example).problem(lam)
    est = cond_exact(problem)
    ratios = np.array([
        [np.nan if r is None else r for r in
         (rep.r_kappa, rep.r_m, rep.r_c)]
        for rep in (perturb_and_measure(ExperimentSpec(example, lam, seed=s), problem=problem,
                                        estimates=est) for s in range(20))
    ])
    med = np.nanmedian(ratios, axis=0)
    print(f"{example:>18} lambda={lam:<9g} median ratios  normwise {med[0]:7.3g}  "
          f"mixed {med[1]:7.3g}  componentwise {med[2]:7.3g}")

###############################################################################
# The ratios only make sense in the linear regime, where the observed error
# divided by ``eps`` does not depend on ``eps``.

problem = gen_example("vandermonde25x10").problem(5.69)
for eps in (1e-6, 1e-8, 1e-10):
    rep = perturb_and_measure(ExperimentSpec("vandermonde25x10", 5.69, epsilon=eps, seed=1), problem=problem)
    print(f"eps={eps:.0e}: mixed error / eps = {rep.true_errors[1] / eps:.6f}")
