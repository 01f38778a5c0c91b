"""Exact condition numbers of the Tikhonov solution.

The solution map ``phi(d) = M x_lam`` depends on the data vector
``d = [params; b]``.  Its Frechet derivative is

    D phi = M P [J, A^T],

where ``J`` collects the first-order response of ``A^T b`` and ``A^T A`` to
parameter changes: column ``i`` is ``-A^T E_i x + E_i^T r`` with ``E_i`` the
matrix direction of parameter ``i``.  From ``D phi`` the three condition
numbers follow directly:

    normwise       ||D phi||_2 ||d||_2 / ||M x||_2
    mixed          || |D phi| |d| ||_inf / ||M x||_inf
    componentwise  || (|D phi| |d|) / (M x) ||_inf
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import (
    BasisMismatch,
    InputError,
    MNotSingleRow,
    NotInClass,
    SizeCapExceeded,
    ZeroDenominator,
)
from .gsvd import RegSolution, TikhonovProblem, solve_tikhonov
from .structmat import (
    STRUCT_TOL,
    LinearBasis,
    StructuredMatrix,
    StructureKind,
    canonical_basis,
    cauchy_derived_c1,
    materialize,
    params_from_dense,
    vdm_derived_v1,
)

__all__ = [
    "SIZE_CAP",
    "ConditionTriple",
    "ConditionReport",
    "FrechetOperator",
    "LinearFrechet",
    "VandermondeFrechet",
    "CauchyFrechet",
    "UnstructuredFrechet",
    "frechet_linear",
    "frechet_vandermonde",
    "frechet_cauchy",
    "frechet_unstructured",
    "frechet_operator",
    "resolve_structure",
    "conditions_from_matrix",
    "componentwise_ratio",
    "cond_structured_linear",
    "cond_unstructured",
    "cond_vandermonde",
    "cond_cauchy",
    "cond_exact",
    "cond_single_component",
    "fd_condition_oracle",
]

#: maximum number of entries of an assembled unstructured derivative
SIZE_CAP = 50_000_000
#: entries below this magnitude count as zero in componentwise quotients
_TINY = 1e-300

Structure = Union[None, str, StructureKind, StructuredMatrix, LinearBasis]


@dataclass(frozen=True)
class ConditionTriple:
    """Normwise, mixed and componentwise condition numbers.

    ``componentwise`` is ``None`` when some selected solution component is
    zero while its numerator is not; those indices are listed in
    ``undefined_components``.
    """

    structure: str
    method: str
    normwise: float
    mixed: float
    componentwise: Optional[float]
    undefined_components: tuple = ()
    extras: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "structure": self.structure,
            "method": self.method,
            "normwise": self.normwise,
            "mixed": self.mixed,
            "componentwise": self.componentwise,
            "undefined_components": list(self.undefined_components),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def scaled(self, eps: float) -> "ConditionTriple":
        """Condition numbers multiplied by ``eps`` (first-order error bounds)."""
        c = None if self.componentwise is None else self.componentwise * eps
        return ConditionTriple(self.structure, self.method, self.normwise * eps,
                               self.mixed * eps, c, self.undefined_components, dict(self.extras))


ConditionReport = ConditionTriple


def componentwise_ratio(num, den):
    """``max_j |num_j / den_j|`` with the 0/0 -> 0 convention.

    Returns ``(value, undefined)`` where ``value`` is ``None`` if some entry
    has a nonzero numerator over a zero denominator.
    """
    num = np.abs(np.asarray(num, dtype=float))
    den = np.abs(np.asarray(den, dtype=float))
    zero_den = den < _TINY
    bad = np.flatnonzero(zero_den & (num >= _TINY))
    if bad.size:
        return None, tuple(int(i) for i in bad)
    q = np.zeros_like(num)
    ok = ~zero_den
    q[ok] = num[ok] / den[ok]
    return float(q.max(initial=0.0)), ()


def _check_output(Mx) -> None:
    if not np.any(np.abs(Mx) >= _TINY):
        raise ZeroDenominator(range(Mx.size), "the selected solution M x is zero")


def conditions_from_matrix(D, data, Mx, structure: str = "unknown",
                           method: str = "exact") -> ConditionTriple:
    """Condition numbers from an explicit derivative matrix ``D`` (``l x (k+m)``)."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    data = np.asarray(data, dtype=float)
    Mx = np.asarray(Mx, dtype=float)
    _check_output(Mx)
    nrm = np.linalg.norm(D, 2) if D.size else 0.0
    num = np.abs(D) @ np.abs(data)
    return _triple(nrm, num, data, Mx, structure, method)


def _triple(nrm, num, data, Mx, structure, method) -> ConditionTriple:
    normwise = float(nrm * np.linalg.norm(data) / np.linalg.norm(Mx))
    mixed = float(np.max(num) / np.max(np.abs(Mx)))
    comp, undefined = componentwise_ratio(num, Mx)
    return ConditionTriple(structure, method, normwise, mixed, comp, undefined)


# ---------------------------------------------------------------------------
# Frechet operators


class FrechetOperator:
    """Matrix-free ``D phi`` for one problem and one structure.

    Subclasses describe how a parameter direction becomes a matrix direction
    (:meth:`direction`) and its adjoint (:meth:`direction_adjoint`), plus a
    dense pre-``P`` Jacobian for the exact formulas.

    Attributes
    ----------
    forward_calls, adjoint_calls : int
        Operation counters, incremented by :meth:`forward` and :meth:`adjoint`.
    """

    structure = "unknown"

    def __init__(self, problem: TikhonovProblem, solution: Optional[RegSolution] = None):
        self.problem = problem
        self.solution = solve_tikhonov(problem) if solution is None else solution
        self.P = self.solution.P
        self.A = problem.A
        self.M = problem.M
        self.x = self.solution.x
        self.r = self.solution.r
        self.Mx = self.M @ self.x
        self.forward_calls = 0
        self.adjoint_calls = 0

    # dimensions -------------------------------------------------------------
    @property
    def params(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def k(self) -> int:
        return self.params.size

    @property
    def m(self) -> int:
        return self.problem.m

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def l(self) -> int:
        return self.M.shape[0]

    @property
    def dim(self) -> int:
        return self.k + self.m

    @property
    def data(self) -> np.ndarray:
        """The data vector ``[params; b]``."""
        return np.concatenate([self.params, self.problem.b])

    # structure hooks --------------------------------------------------------
    def direction(self, da) -> np.ndarray:
        raise NotImplementedError

    def direction_adjoint(self, G) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self) -> np.ndarray:
        """Pre-``P`` parameter Jacobian ``J`` of shape ``(n, k)``."""
        raise NotImplementedError

    # operator actions -------------------------------------------------------
    def forward(self, u) -> np.ndarray:
        """``D phi`` applied to ``u = [d_params; d_b]``."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise InputError(f"forward expects a length-{self.dim} vector")
        self.forward_calls += 1
        E = self.direction(u[: self.k])
        t = self.A.T @ (u[self.k:] - E @ self.x) + E.T @ self.r
        return self.M @ self.P(t)

    def adjoint(self, h) -> np.ndarray:
        """``D phi^T`` applied to ``h`` (length ``l``)."""
        h = np.asarray(h, dtype=float)
        if h.shape != (self.l,):
            raise InputError(f"adjoint expects a length-{self.l} vector")
        self.adjoint_calls += 1
        w = self.P(self.M.T @ h)
        Aw = self.A @ w
        G = np.outer(self.r, w) - np.outer(Aw, self.x)
        return np.concatenate([self.direction_adjoint(G), Aw])

    def G(self) -> np.ndarray:
        """``M P`` as a dense ``l x n`` matrix (``P`` is symmetric)."""
        return self.P(self.M.T).T

    def matrix(self) -> np.ndarray:
        """Dense ``D phi`` of shape ``(l, k + m)``."""
        G = self.G()
        return np.hstack([G @ self.jacobian(), G @ self.A.T])

    def conditions(self) -> ConditionTriple:
        return conditions_from_matrix(self.matrix(), self.data, self.Mx, self.structure)


class LinearFrechet(FrechetOperator):
    """``D phi`` for ``A = sum_i a_i S_i``."""

    def __init__(self, problem, basis: LinearBasis, params=None, solution=None,
                 structure: str = "general"):
        super().__init__(problem, solution)
        if basis.shape != problem.A.shape:
            raise BasisMismatch(f"basis shape {basis.shape} does not match A {problem.A.shape}")
        if params is None:
            flat_fit = params_from_dense(StructureKind.GENERAL, problem.A, basis=basis) \
                if basis.index is None else _index_params(basis, problem.A)
            params = flat_fit
        params = np.asarray(params, dtype=float)
        if params.shape != (basis.k,):
            raise BasisMismatch("parameter count does not match basis")
        resid = np.linalg.norm(basis.combine(params) - problem.A)
        if resid > STRUCT_TOL * max(np.linalg.norm(problem.A), 1.0):
            raise BasisMismatch(f"basis does not reproduce A (residual {resid:.3e})")
        self.basis = basis
        self._params = params
        self.structure = structure

    @property
    def params(self) -> np.ndarray:
        return self._params

    def direction(self, da) -> np.ndarray:
        return self.basis.combine(da)

    def direction_adjoint(self, G) -> np.ndarray:
        return self.basis.inner(G)

    def jacobian(self) -> np.ndarray:
        return self.basis.apply_left(self.r) - self.A.T @ self.basis.apply_right(self.x)


def _index_params(basis: LinearBasis, A) -> np.ndarray:
    idx = basis.index.ravel()
    sums = np.bincount(idx, weights=np.asarray(A, dtype=float).ravel(), minlength=basis.k)
    return sums / np.bincount(idx, minlength=basis.k)


class UnstructuredFrechet(LinearFrechet):
    """``D phi`` for arbitrary perturbations of ``A``, parameters ``vec(A)``."""

    def __init__(self, problem, solution=None, size_cap: Optional[float] = SIZE_CAP):
        m, n = problem.A.shape
        super().__init__(problem, canonical_basis(StructureKind.GENERAL, m, n),
                         params=problem.A.ravel(order="F"), solution=solution,
                         structure="unstructured")
        self.size_cap = size_cap

    def direction(self, da) -> np.ndarray:
        return np.reshape(da, (self.m, self.n), order="F")

    def direction_adjoint(self, G) -> np.ndarray:
        return np.ravel(G, order="F")

    def jacobian(self) -> np.ndarray:
        # column i + j m is -x_j A[i, :]^T + r_i e_j
        J = -np.kron(self.x[None, :], self.A.T)
        J += np.kron(np.eye(self.n), self.r[None, :])
        return J

    def _check_cap(self) -> None:
        size = self.l * (self.m * self.n + self.m)
        if self.size_cap is not None and size > self.size_cap:
            raise SizeCapExceeded(
                f"unstructured derivative has {size} entries (cap {self.size_cap:.0f}); "
                "use the power-method or SCE estimators, or compute block-wise")

    def matrix(self) -> np.ndarray:
        self._check_cap()
        G = self.G()
        H = G @ self.A.T
        # column block j: outer(G[:, j], r) - x_j H
        blocks = G[:, :, None] * self.r[None, None, :] - self.x[None, :, None] * H[:, None, :]
        return np.hstack([blocks.reshape(self.l, -1), H])

    def conditions_blockwise(self) -> ConditionTriple:
        """Same values as :meth:`conditions` without assembling ``D phi``."""
        G = self.G()
        H = G @ self.A.T
        absA = np.abs(self.A)
        num = np.abs(H) @ np.abs(self.problem.b)
        for j in range(self.n):
            num += np.abs(np.outer(G[:, j], self.r) - self.x[j] * H) @ absA[:, j]
        Gx = G @ self.x
        Hr = H @ self.r
        HHt = H @ H.T
        gram = (self.r @ self.r) * (G @ G.T) - np.outer(Gx, Hr) - np.outer(Hr, Gx) \
            + (self.x @ self.x + 1.0) * HHt
        nrm = np.sqrt(max(np.linalg.eigvalsh(gram)[-1], 0.0))
        _check_output(self.Mx)
        return _triple(nrm, num, self.data, self.Mx, self.structure, "exact")


class VandermondeFrechet(FrechetOperator):
    """``D phi`` for ``A = V(a)`` with ``V[i, j] = a_j ** i``."""

    structure = "vandermonde"

    def __init__(self, problem, params=None, solution=None):
        super().__init__(problem, solution)
        if params is None:
            params = params_from_dense(StructureKind.VANDERMONDE, problem.A)
        self.handle = StructuredMatrix(StructureKind.VANDERMONDE, self.m, self.n, params)
        if np.linalg.norm(self.handle.materialize() - problem.A) > \
                STRUCT_TOL * max(np.linalg.norm(problem.A), 1.0):
            raise NotInClass("nodes do not reproduce A")
        self.V1 = vdm_derived_v1(problem.A)

    @property
    def params(self) -> np.ndarray:
        return self.handle.params

    def direction(self, da) -> np.ndarray:
        return self.V1 * da[None, :]

    def direction_adjoint(self, G) -> np.ndarray:
        return np.einsum("ij,ij->j", self.V1, G)

    def jacobian(self) -> np.ndarray:
        y = self.V1.T @ self.r
        return -(self.A.T @ self.V1) * self.x[None, :] + np.diag(y)


class CauchyFrechet(FrechetOperator):
    """``D phi`` for ``A = [1 / (u_i - v_j)]`` with parameters ``[u; v]``."""

    structure = "cauchy"

    def __init__(self, problem, u, v, solution=None):
        super().__init__(problem, solution)
        self.handle = StructuredMatrix.cauchy(u, v)
        if self.handle.shape != problem.A.shape:
            raise InputError("node counts do not match A")
        if np.linalg.norm(self.handle.materialize() - problem.A) > \
                STRUCT_TOL * max(np.linalg.norm(problem.A), 1.0):
            raise NotInClass("nodes do not reproduce A")
        self.C1 = cauchy_derived_c1(self.handle.u, self.handle.v)

    @property
    def params(self) -> np.ndarray:
        return self.handle.params

    def direction(self, da) -> np.ndarray:
        du, dv = da[: self.m], da[self.m:]
        return self.C1 * dv[None, :] - du[:, None] * self.C1

    def direction_adjoint(self, G) -> np.ndarray:
        CG = self.C1 * G
        return np.concatenate([-CG.sum(axis=1), CG.sum(axis=0)])

    def jacobian(self) -> np.ndarray:
        C, C1 = self.A, self.C1
        z1 = C1 @ self.x
        z2 = C1.T @ self.r
        # dC = C1 Diag(dv) - Diag(du) C1
        Cu = C.T * z1[None, :] - C1.T * self.r[None, :]
        Cv = np.diag(z2) - (C.T @ C1) * self.x[None, :]
        return np.hstack([Cu, Cv])


# ---------------------------------------------------------------------------
# constructors and dispatch


def frechet_linear(problem: TikhonovProblem, basis: LinearBasis, params=None,
                   solution=None) -> LinearFrechet:
    return LinearFrechet(problem, basis, params=params, solution=solution)


def frechet_vandermonde(problem: TikhonovProblem, params=None, solution=None) -> VandermondeFrechet:
    return VandermondeFrechet(problem, params=params, solution=solution)


def frechet_cauchy(problem: TikhonovProblem, u, v, solution=None) -> CauchyFrechet:
    return CauchyFrechet(problem, u, v, solution=solution)


def frechet_unstructured(problem: TikhonovProblem, solution=None,
                         size_cap: Optional[float] = SIZE_CAP) -> UnstructuredFrechet:
    return UnstructuredFrechet(problem, solution=solution, size_cap=size_cap)


def resolve_structure(problem: TikhonovProblem, structure: Structure = "auto"):
    """Turn a structure request into a handle, a basis or ``None`` (unstructured).

    ``"auto"`` uses the problem's handle when present and falls back to
    unstructured otherwise.
    """
    if isinstance(structure, (StructuredMatrix, LinearBasis)):
        return structure
    if structure is None or structure in ("none", "unstructured"):
        return None
    if structure == "auto":
        return problem.handle
    kind = StructureKind.parse(structure)
    if problem.handle is not None and problem.handle.kind is kind:
        return problem.handle
    if kind is StructureKind.CAUCHY:
        raise InputError("Cauchy structure needs explicit nodes (pass a handle)")
    params = params_from_dense(kind, problem.A)
    return StructuredMatrix(kind, problem.m, problem.n, params)


def frechet_operator(problem: TikhonovProblem, structure: Structure = "auto",
                     solution=None, size_cap: Optional[float] = SIZE_CAP) -> FrechetOperator:
    """Build the Frechet operator for ``problem`` under ``structure``."""
    s = resolve_structure(problem, structure)
    if s is None:
        return frechet_unstructured(problem, solution=solution, size_cap=size_cap)
    if isinstance(s, LinearBasis):
        return frechet_linear(problem, s, solution=solution)
    if s.shape != problem.A.shape:
        raise InputError("structured handle does not match A")
    if s.kind is StructureKind.VANDERMONDE:
        return frechet_vandermonde(problem, s.params, solution=solution)
    if s.kind is StructureKind.CAUCHY:
        return frechet_cauchy(problem, s.u, s.v, solution=solution)
    return LinearFrechet(problem, s.linear_basis, params=s.params, solution=solution,
                         structure=s.kind.value)


# ---------------------------------------------------------------------------
# condition numbers


def cond_structured_linear(problem: TikhonovProblem, basis: LinearBasis,
                           params=None) -> ConditionTriple:
    """Structured condition numbers for a linear structure ``A = sum a_i S_i``."""
    op = LinearFrechet(problem, basis, params=params)
    return op.conditions()


def cond_unstructured(problem: TikhonovProblem, size_cap: Optional[float] = SIZE_CAP,
                      blockwise: bool = False) -> ConditionTriple:
    """Condition numbers for unrestricted perturbations of ``A`` and ``b``.

    Parameters
    ----------
    size_cap : float or None
        Maximum entry count ``l (mn + m)`` of the assembled derivative.
    blockwise : bool
        Skip assembly and accumulate the numerator one column block at a
        time; the spectral norm then comes from an ``l x l`` Gram matrix.
    """
    op = UnstructuredFrechet(problem, size_cap=None if blockwise else size_cap)
    if blockwise:
        return op.conditions_blockwise()
    return op.conditions()


def cond_vandermonde(problem: TikhonovProblem, params=None) -> ConditionTriple:
    """Structured condition numbers for a Vandermonde coefficient matrix."""
    return VandermondeFrechet(problem, params=params).conditions()


def cond_cauchy(problem: TikhonovProblem, u, v) -> ConditionTriple:
    """Structured condition numbers for a Cauchy coefficient matrix."""
    return CauchyFrechet(problem, u, v).conditions()


def cond_exact(problem: TikhonovProblem, structure: Structure = "auto",
               size_cap: Optional[float] = SIZE_CAP) -> ConditionTriple:
    """Exact condition numbers for any supported structure (dispatching helper)."""
    return frechet_operator(problem, structure, size_cap=size_cap).conditions()


def cond_single_component(problem: TikhonovProblem, structure: Structure = "auto") -> ConditionTriple:
    """Closed-form condition numbers for a single selected component (``l = 1``).

    With ``w = P M^T`` the derivative is a single row whose parameter part is

    * linear:       ``s_i = <S_i, r w^T - (A w) x^T>``
    * Vandermonde:  ``y * w - x * (V1^T V w)``
    * Cauchy:       ``[z1 * (C w) - r * (C1 w);  z2 * w - x * (C1^T C w)]``

    and whose right-hand-side part is ``D = A w``.
    """
    if problem.l != 1:
        raise MNotSingleRow(f"closed forms need a single-row M, got l={problem.l}")
    op = frechet_operator(problem, structure)
    w = op.P(op.M[0])
    A, x, r = op.A, op.x, op.r
    D = A @ w
    if isinstance(op, VandermondeFrechet):
        y = op.V1.T @ r
        s = y * w - x * (op.V1.T @ D)
    elif isinstance(op, CauchyFrechet):
        C1 = op.C1
        z1 = C1 @ x
        z2 = C1.T @ r
        t = z1 * D - r * (C1 @ w)
        s = np.concatenate([t, z2 * w - x * (C1.T @ D)])
    elif isinstance(op, UnstructuredFrechet):
        s = (np.outer(r, w) - np.outer(D, x)).ravel(order="F")
    else:
        s = op.basis.inner(np.outer(r, w) - np.outer(D, x))
    row = np.concatenate([s, D])
    _check_output(op.Mx)
    nrm = np.sqrt(s @ s + D @ D)
    num = np.atleast_1d(np.abs(row) @ np.abs(op.data))
    out = _triple(nrm, num, op.data, op.Mx, op.structure, "closed-form")
    return out


# ---------------------------------------------------------------------------
# sampling oracle


def fd_condition_oracle(problem: TikhonovProblem, structure: Structure = "auto",
                        n_samples: int = 1000, delta: float = 1e-7,
                        seed: int = 0) -> ConditionTriple:
    """Sampled lower bounds on the three condition numbers.

    Each sample perturbs the data along a direction, re-solves the problem
    and measures the central-difference change of ``M x``.  Mixed and
    componentwise values use sign patterns ``d -> d + delta * (s * d)``;
    all ``2 ** (k + m)`` patterns are tried when that does not exceed
    ``n_samples``.  Normwise values use Gaussian directions.
    """
    op = frechet_operator(problem, structure)
    data = op.data
    k = op.k
    dim = data.size
    Mx = op.Mx
    rng = np.random.default_rng(seed)

    handle = resolve_structure(problem, structure)

    def rebuild(d):
        params, b = d[:k], d[k:]
        if handle is None:
            A = np.reshape(params, (op.m, op.n), order="F")
        elif isinstance(handle, LinearBasis):
            A = handle.combine(params)
        else:
            A = materialize(handle.with_params(params))
        K = np.vstack([A, problem.lam * problem.L])
        rhs = np.concatenate([b, np.zeros(problem.p)])
        return problem.M @ np.linalg.lstsq(K, rhs, rcond=None)[0]

    def change(u):
        return (rebuild(data + delta * u) - rebuild(data - delta * u)) / (2 * delta)

    if 2 ** dim <= n_samples:
        patterns = (np.array(s, dtype=float) for s in itertools.product((-1.0, 1.0), repeat=dim))
    else:
        patterns = (rng.choice((-1.0, 1.0), size=dim) for _ in range(n_samples))

    best_m = 0.0
    best_c = 0.0
    nz = np.abs(Mx) >= _TINY
    for s in patterns:
        dx = change(s * data)
        best_m = max(best_m, np.max(np.abs(dx)) / np.max(np.abs(Mx)))
        if np.any(nz):
            best_c = max(best_c, np.max(np.abs(dx[nz]) / np.abs(Mx[nz])))
    best_n = 0.0
    for _ in range(max(1, min(n_samples, 200))):
        u = rng.standard_normal(dim)
        dx = change(u)
        best_n = max(best_n, np.linalg.norm(dx) / np.linalg.norm(u))
    normwise = best_n * np.linalg.norm(data) / np.linalg.norm(Mx)
    return ConditionTriple(op.structure, "sampled", float(normwise), float(best_m), float(best_c))
