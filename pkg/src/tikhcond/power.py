"""Matrix-free condition estimates from forward/adjoint products.

Both estimators only touch ``D phi`` through :meth:`FrechetOperator.forward`
and :meth:`FrechetOperator.adjoint`, one of each per iteration.

* normwise: power iteration on ``D phi^T D phi`` for ``||D phi||_2``;
* mixed / componentwise: Hager-Higham 1-norm estimation applied to
  ``(D phi Diag(d))^T``, optionally row-scaled by ``Diag(M x)^{-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import InputError, ZeroDenominator, ZeroOperator
from .exact import ConditionTriple, FrechetOperator, frechet_operator
from .gsvd import TikhonovProblem

__all__ = [
    "PowerOpts",
    "PowerResult",
    "estimate_normwise_power",
    "estimate_mixed_power",
    "estimate_componentwise_power",
    "cond_power",
]


@dataclass(frozen=True)
class PowerOpts:
    """Options shared by the power estimators.

    Parameters
    ----------
    max_iters : int
        Iteration cap.
    tol : float
        Relative change of the Rayleigh value that ends the normwise iteration.
    init : {"random", "ones"} or array_like
        Starting vector of the normwise iteration (length ``l``).
    seed : int
        Seed of the random starting vectors.
    restarts : int
        Number of normwise runs; the largest estimate is kept.  Runs after
        the first always start from random vectors.
    """

    max_iters: int = 10
    tol: float = 1e-3
    init: Union[str, np.ndarray] = "random"
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if self.max_iters < 1:
            raise InputError("max_iters must be at least 1")
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if self.restarts < 1:
            raise InputError("restarts must be at least 1")
        if isinstance(self.init, str) and self.init not in ("random", "ones"):
            raise InputError(f"unknown init policy {self.init!r}")


@dataclass(frozen=True)
class PowerResult:
    """An estimate plus the bookkeeping of the run that produced it.

    ``estimate`` is the condition number; ``raw_norm`` the estimated operator
    norm before scaling by data and solution norms.
    """

    estimate: float
    raw_norm: float
    iterations: int
    forward_calls: int
    adjoint_calls: int
    converged: bool


def _start_vectors(l: int, opts: PowerOpts):
    rng = np.random.default_rng(opts.seed)
    for run in range(opts.restarts):
        if run == 0 and not isinstance(opts.init, str):
            h = np.asarray(opts.init, dtype=float)
            if h.shape != (l,):
                raise InputError(f"initial vector must have length {l}")
        elif run == 0 and opts.init == "ones":
            h = np.ones(l)
        else:
            h = rng.standard_normal(l)
        yield h


def estimate_normwise_power(op: FrechetOperator, scaling=None,
                            opts: Optional[PowerOpts] = None) -> PowerResult:
    """Power-method estimate of the normwise condition number.

    Parameters
    ----------
    op : FrechetOperator
    scaling : (float, float), optional
        ``(||[params; b]||_2, ||M x||_2)``; taken from ``op`` by default.
    opts : PowerOpts, optional

    Notes
    -----
    Each step normalizes ``g = D phi^T h`` and uses ``nu = ||D phi g||^2``,
    a Rayleigh quotient of ``D phi^T D phi``, so ``sqrt(nu)`` never exceeds
    ``||D phi||_2``.
    """
    opts = opts or PowerOpts()
    if scaling is None:
        scaling = (np.linalg.norm(op.data), np.linalg.norm(op.Mx))
    d_norm, mx_norm = map(float, scaling)
    if not (d_norm > 0 and mx_norm > 0):
        raise InputError("scaling factors must be positive")
    f0, a0 = op.forward_calls, op.adjoint_calls

    best_nu, best_iters, converged_any = 0.0, 0, False
    for h in _start_vectors(op.l, opts):
        g = op.adjoint(h)
        g_norm = np.linalg.norm(g)
        if not g_norm > 1e-300:
            raise ZeroOperator("the first adjoint image is numerically zero")
        nu_prev = None
        nu = 0.0
        converged = False
        it = 0
        for it in range(1, opts.max_iters + 1):
            g = g / np.linalg.norm(g)
            h = op.forward(g)
            nu = float(h @ h)
            if nu_prev is not None and abs(nu - nu_prev) <= opts.tol * nu:
                converged = True
                break
            nu_prev = nu
            if it < opts.max_iters:
                g = op.adjoint(h)
                if np.linalg.norm(g) == 0.0:
                    break
        if nu > best_nu:
            best_nu, best_iters = nu, it
        converged_any |= converged
    raw = np.sqrt(best_nu)
    return PowerResult(estimate=float(raw * d_norm / mx_norm), raw_norm=float(raw), iterations=best_iters,
                       forward_calls=op.forward_calls - f0, adjoint_calls=op.adjoint_calls - a0,
                       converged=converged_any)


def _hager(apply_t, apply, dim_out: int, max_iters: int):
    """Hager-Higham estimate of ``max_i sum_j |B_ij|`` given ``B^T`` and ``B`` products.

    ``apply_t`` maps a length-``dim_out`` vector ``h`` to ``B^T h``;
    ``apply`` maps a sign vector to ``B xi``.  Returns ``(gamma, iters)``.
    """
    h = np.full(dim_out, 1.0 / dim_out)
    gamma = 0.0
    visited = set()
    it = 0
    for it in range(1, max_iters + 1):
        alpha = apply_t(h)
        gamma = max(gamma, float(np.sum(np.abs(alpha))))
        xi = np.where(alpha >= 0, 1.0, -1.0)
        z = apply(xi)
        j = int(np.argmax(np.abs(z)))
        if np.abs(z[j]) <= h @ z or j in visited:
            break
        visited.add(j)
        h = np.zeros(dim_out)
        h[j] = 1.0
    return gamma, it


def estimate_mixed_power(op: FrechetOperator, a_b=None, Mx=None,
                         opts: Optional[PowerOpts] = None) -> PowerResult:
    """Hager-Higham estimate of the mixed condition number.

    The estimate is a lower bound on the exact value and is exact whenever
    the iteration stops at the maximizing row (always for ``l = 1``).
    """
    opts = opts or PowerOpts()
    d = op.data if a_b is None else np.asarray(a_b, dtype=float)
    Mx = op.Mx if Mx is None else np.asarray(Mx, dtype=float)
    mx_inf = np.max(np.abs(Mx))
    if mx_inf == 0:
        raise ZeroDenominator(range(Mx.size), "the selected solution M x is zero")
    f0, a0 = op.forward_calls, op.adjoint_calls
    if not np.any(d):
        raise ZeroOperator("the data vector is zero")
    gamma, it = _hager(lambda h: d * op.adjoint(h), lambda xi: op.forward(d * xi),
                       op.l, opts.max_iters)
    return PowerResult(estimate=float(gamma / mx_inf), raw_norm=gamma, iterations=it,
                       forward_calls=op.forward_calls - f0, adjoint_calls=op.adjoint_calls - a0,
                       converged=True)


def estimate_componentwise_power(op: FrechetOperator, a_b=None, Mx=None,
                                 opts: Optional[PowerOpts] = None) -> PowerResult:
    """Hager-Higham estimate of the componentwise condition number.

    Raises
    ------
    ZeroDenominator
        If a component of ``M x`` is zero.
    """
    opts = opts or PowerOpts()
    d = op.data if a_b is None else np.asarray(a_b, dtype=float)
    Mx = op.Mx if Mx is None else np.asarray(Mx, dtype=float)
    zero = np.flatnonzero(Mx == 0)
    if zero.size:
        raise ZeroDenominator(zero)
    f0, a0 = op.forward_calls, op.adjoint_calls
    if not np.any(d):
        raise ZeroOperator("the data vector is zero")
    gamma, it = _hager(lambda h: d * op.adjoint(h / Mx), lambda xi: op.forward(d * xi) / Mx,
                       op.l, opts.max_iters)
    return PowerResult(estimate=gamma, raw_norm=gamma, iterations=it,
                       forward_calls=op.forward_calls - f0, adjoint_calls=op.adjoint_calls - a0,
                       converged=True)


def cond_power(problem: TikhonovProblem, structure="auto",
               opts: Optional[PowerOpts] = None) -> ConditionTriple:
    """All three power-method estimates for ``problem`` under ``structure``."""
    op = frechet_operator(problem, structure, size_cap=None)
    nw = estimate_normwise_power(op, opts=opts)
    mx = estimate_mixed_power(op, opts=opts)
    try:
        cw = estimate_componentwise_power(op, opts=opts).estimate
        undefined = ()
    except ZeroDenominator as exc:
        cw, undefined = None, exc.indices
    return ConditionTriple(op.structure, "power", nw.estimate, mx.estimate, cw, undefined,
                           extras={"normwise_iterations": nw.iterations})
