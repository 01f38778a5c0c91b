"""Small-sample statistical condition estimation (SCE).

For a unit direction ``d`` drawn uniformly from the sphere in ``R^p``, the
expected size of a directional derivative is ``E |g^T d| = omega_p ||g||``
with the Wallis factor ``omega_p``.  Averaging over ``k`` orthonormal
directions ``q_1..q_k`` gives the entrywise sensitivity estimate

    abs = (omega_k / omega_p) * sqrt(sum_i (D phi q_i)**2),

from which normwise, mixed and componentwise estimates follow.  In
componentwise mode the directions are weighted entrywise by the data vector
``[params; b]`` before being applied, which measures relative perturbations.

Random numbers come from one Philox substream per sample, spawned from the
seed, so results do not depend on evaluation order or on threading.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateSamples, InputError, ZeroDenominator
from .exact import ConditionTriple, FrechetOperator, componentwise_ratio, frechet_operator
from .gsvd import RegSolution, TikhonovProblem, solve_tikhonov

__all__ = [
    "SceOpts",
    "SceReport",
    "wallis",
    "directional_derivative",
    "draw_orthonormal_samples",
    "sce_operator",
    "sce_normwise",
    "sce_componentwise",
    "sce_structured",
    "cond_sce",
]


def wallis(p: int, mode: str = "approx") -> float:
    """Wallis factor ``omega_p = E|d_1|`` for ``d`` uniform on the unit sphere of ``R^p``.

    ``mode="approx"`` returns ``sqrt(2 / (pi (p - 1/2)))``; ``mode="exact"``
    returns ``Gamma(p/2) / (sqrt(pi) Gamma((p+1)/2))``, which gives
    ``omega_1 = 1`` and ``omega_2 = 2/pi``.
    """
    p = int(p)
    if p < 1:
        raise InputError("the Wallis factor needs p >= 1")
    if mode == "approx":
        return float(np.sqrt(2.0 / (np.pi * (p - 0.5))))
    if mode == "exact":
        return float(np.exp(gammaln(p / 2) - gammaln((p + 1) / 2)) / np.sqrt(np.pi))
    raise InputError(f"unknown Wallis mode {mode!r}")


@dataclass(frozen=True)
class SceOpts:
    """Options of the statistical estimator.

    Parameters
    ----------
    k : int
        Number of orthonormal sample directions.
    seed : int
    wallis_mode : {"approx", "exact"}
    p : int, optional
        Sphere dimension; defaults to the number of perturbed data entries.
    workers : int
        Threads used to evaluate the directional derivatives.
    """

    k: int = 3
    seed: int = 0
    wallis_mode: str = "approx"
    p: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise InputError("k must be at least 1")
        if self.p is not None and self.p < self.k:
            raise InputError("p must be at least k")
        if self.wallis_mode not in ("approx", "exact"):
            raise InputError(f"unknown Wallis mode {self.wallis_mode!r}")
        if self.workers < 1:
            raise InputError("workers must be at least 1")


@dataclass(frozen=True)
class SceReport:
    """Result of one SCE run.

    ``abs_vector`` is the entrywise sensitivity estimate of ``M x``;
    ``c_sce`` is ``None`` if a zero solution component has nonzero
    sensitivity (normwise mode only, componentwise mode raises).
    """

    kappa_sce: float
    m_sce: float
    c_sce: Optional[float]
    abs_vector: np.ndarray = field(repr=False)
    k: int
    seed: int
    mode: str = "normwise"
    p: int = 0
    structure: str = "unstructured"

    @property
    def samples_used(self) -> int:
        return self.k

    def to_dict(self) -> dict:
        return {"kappa_sce": self.kappa_sce, "m_sce": self.m_sce, "c_sce": self.c_sce,
                "k": self.k, "seed": self.seed}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def directional_derivative(problem: TikhonovProblem, E, f,
                           solution: Optional[RegSolution] = None) -> np.ndarray:
    """First-order change of ``x_lam`` when ``(A, b)`` moves along ``(E, f)``.

    Returns ``P (A^T f + E^T r - A^T E x)``.
    """
    sol = solve_tikhonov(problem) if solution is None else solution
    A = problem.A
    E = np.asarray(E, dtype=float)
    f = np.asarray(f, dtype=float)
    if E.shape != A.shape or f.shape != (problem.m,):
        raise InputError("direction shapes do not match (A, b)")
    return sol.P(A.T @ (f - E @ sol.x) + E.T @ sol.r)


def draw_orthonormal_samples(p: int, k: int, seed: int) -> np.ndarray:
    """``k`` orthonormal columns in ``R^p`` from seeded Gaussian samples.

    Sample ``i`` is drawn from its own substream, so the columns do not
    depend on the order in which they are generated.  A numerically rank
    deficient draw is retried once with a fresh stream.
    """
    if not 1 <= k <= p:
        raise InputError(f"need 1 <= k <= p, got k={k}, p={p}")
    for attempt in range(2):
        root = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, attempt])
        Z = np.column_stack([np.random.Generator(np.random.Philox(ss)).standard_normal(p)
                             for ss in root.spawn(k)])
        Q, R = np.linalg.qr(Z)
        d = np.abs(np.diag(R))
        if d.min() > 1e-12 * d.max():
            return Q
    raise DegenerateSamples(f"{k} random samples in R^{p} are numerically dependent")


def sce_operator(op: FrechetOperator, opts: Optional[SceOpts] = None,
                 mode: str = "normwise", allow_undefined: bool = False) -> SceReport:
    """SCE for the solution map described by ``op``.

    Parameters
    ----------
    op : FrechetOperator
        Supplies the directional derivatives through ``op.forward``.
    opts : SceOpts, optional
    mode : {"normwise", "componentwise"}
    allow_undefined : bool
        Report ``c_sce = None`` instead of raising when a zero solution
        component has nonzero sensitivity in componentwise mode.
    """
    opts = opts or SceOpts()
    if mode not in ("normwise", "componentwise"):
        raise InputError(f"unknown SCE mode {mode!r}")
    # a custom sphere dimension only changes the Wallis scaling
    p = op.dim if opts.p is None else opts.p
    if opts.k > op.dim:
        raise InputError(f"k={opts.k} exceeds the number of data entries {op.dim}")
    Q = draw_orthonormal_samples(op.dim, opts.k, opts.seed)
    data = op.data
    if mode == "componentwise":
        Q = Q * data[:, None]
    cols = [Q[:, i] for i in range(opts.k)]
    if opts.workers > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            derivs = list(pool.map(op.forward, cols))
    else:
        derivs = [op.forward(c) for c in cols]
    D = np.column_stack(derivs)
    scale = wallis(opts.k, opts.wallis_mode) / wallis(p, opts.wallis_mode)
    est = scale * np.sqrt(np.sum(D * D, axis=1))

    Mx = op.Mx
    x_inf = np.max(np.abs(Mx))
    if x_inf == 0:
        raise ZeroDenominator(range(Mx.size), "the selected solution M x is zero")
    kappa = float(np.linalg.norm(est) * np.linalg.norm(data) / np.linalg.norm(Mx))
    m_sce = float(np.max(est) / x_inf)
    c_sce, bad = componentwise_ratio(est, Mx)
    if bad and mode == "componentwise" and not allow_undefined:
        raise ZeroDenominator(bad)
    return SceReport(kappa_sce=kappa, m_sce=m_sce, c_sce=c_sce, abs_vector=est, k=opts.k,
                     seed=opts.seed, mode=mode, p=p, structure=op.structure)


def sce_normwise(problem: TikhonovProblem, opts: Optional[SceOpts] = None) -> SceReport:
    """Unstructured SCE under normwise perturbations of ``(A, b)``."""
    return sce_operator(frechet_operator(problem, None, size_cap=None), opts, "normwise")


def sce_componentwise(problem: TikhonovProblem, opts: Optional[SceOpts] = None) -> SceReport:
    """Unstructured SCE under componentwise perturbations of ``(A, b)``."""
    return sce_operator(frechet_operator(problem, None, size_cap=None), opts, "componentwise")


def sce_structured(problem: TikhonovProblem, handle, opts: Optional[SceOpts] = None,
                   mode: str = "normwise") -> SceReport:
    """SCE with samples drawn in the parameter space of ``handle``."""
    return sce_operator(frechet_operator(problem, handle), opts, mode)


def cond_sce(problem: TikhonovProblem, structure="auto",
             opts: Optional[SceOpts] = None) -> ConditionTriple:
    """SCE estimates as a condition triple.

    The normwise value comes from a normwise run, the mixed and
    componentwise values from a componentwise run with the same seed.
    """
    op = frechet_operator(problem, structure, size_cap=None)
    nw = sce_operator(op, opts, "normwise")
    cw = sce_operator(op, opts, "componentwise", allow_undefined=True)
    undefined = ()
    if cw.c_sce is None:
        undefined = componentwise_ratio(cw.abs_vector, op.Mx)[1]
    return ConditionTriple(op.structure, "sce", nw.kappa_sce, cw.m_sce, cw.c_sce, undefined,
                           extras={"k": nw.k, "seed": nw.seed})
