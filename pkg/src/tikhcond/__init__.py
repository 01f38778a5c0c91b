"""Structured condition numbers for Tikhonov regularized least squares.

The problem ``min ||A x - b||^2 + lam^2 ||L x||^2`` is solved through the
generalized SVD of ``(A, L)``.  The sensitivity of ``M x`` to perturbations of
``b`` and of the parameters that generate ``A`` (Toeplitz, Hankel,
Vandermonde, Cauchy or general linear structure) is measured by exact
normwise, mixed and componentwise condition numbers, by matrix-free power
estimators, and by small-sample statistical estimation.

>>> from tikhcond import gen_example, cond_exact
>>> problem = gen_example("toeplitz5").problem(4.9988e-4)
>>> round(cond_exact(problem).mixed, 2)
4.5
"""

from .errors import *  # noqa: F401,F403
from .structmat import *  # noqa: F401,F403
from .gsvd import *  # noqa: F401,F403
from .exact import *  # noqa: F401,F403
from .power import *  # noqa: F401,F403
from .sce import *  # noqa: F401,F403
from .bench import *  # noqa: F401,F403

__version__ = "0.1.0"
