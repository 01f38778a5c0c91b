"""Generalized SVD of ``(A, L)`` and the Tikhonov solution operator.

The regularized problem is ``min ||A x - b||^2 + lam^2 ||L x||^2`` with
``A`` of shape ``(m, n)``, ``L`` of shape ``(p, n)`` and ``p <= n <= m``.
Everything downstream only needs the action of

    P = (A^T A + lam^2 L^T L)^{-1},

which the GSVD delivers through two triangular solves:

    A = U [Sigma 0; 0 I] R Q^T,      L = V [S 0] R Q^T,
    P = Q R^{-1} [ (Sigma^2 + lam^2 S^2)^{-1} 0; 0 I ] R^{-T} Q^T.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la

from .errors import BadDimension, InputError, RankDeficient
from .structmat import StructuredMatrix, materialize

__all__ = [
    "TAU_RANK",
    "TAU_GSVD",
    "TAU_SOLVE",
    "TikhonovProblem",
    "GsvdFactors",
    "RegSolution",
    "PApplier",
    "compute_gsvd",
    "apply_P",
    "solve_tikhonov",
    "gen_singular_values",
    "gen_L1",
]

TAU_RANK = 1e-10
TAU_GSVD = 1e-11
TAU_SOLVE = 1e-10


def _frozen(x) -> np.ndarray:
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


def gen_L1(n: int) -> np.ndarray:
    """First-difference operator of shape ``(n - 1, n)``: ``+1`` diagonal, ``-1`` superdiagonal."""
    if n < 2:
        raise BadDimension("the first-difference operator needs n >= 2")
    L = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    L[idx, idx] = 1.0
    L[idx, idx + 1] = -1.0
    return L


@dataclass(frozen=True, eq=False)
class TikhonovProblem:
    """Data of one Tikhonov regularization problem.

    Parameters
    ----------
    A : ndarray, shape (m, n)
    b : ndarray, shape (m,)
    lam : float
        Regularization parameter, must be positive.
    L : ndarray, shape (p, n), optional
        Regularization matrix, identity by default.
    M : ndarray, shape (l, n), optional
        Selector applied to the solution, identity by default.
    handle : StructuredMatrix, optional
        Structured description of ``A``.  When given, ``A`` may be omitted.
    """

    A: Optional[np.ndarray]
    b: np.ndarray
    lam: float
    L: Optional[np.ndarray] = None
    M: Optional[np.ndarray] = None
    handle: Optional[StructuredMatrix] = field(default=None, repr=False)

    def __post_init__(self):
        A = self.A
        if A is None:
            if self.handle is None:
                raise InputError("either A or a structured handle is required")
            A = materialize(self.handle)
        A = _frozen(A)
        if A.ndim != 2:
            raise InputError("A must be a matrix")
        m, n = A.shape
        if self.handle is not None and self.handle.shape != (m, n):
            raise InputError("handle shape does not match A")
        b = _frozen(np.ravel(self.b))
        if b.shape != (m,):
            raise InputError(f"b must have length {m}, got {b.size}")
        L = np.eye(n) if self.L is None else np.atleast_2d(np.asarray(self.L, dtype=float))
        if L.ndim != 2 or L.shape[1] != n:
            raise InputError(f"L must have {n} columns")
        if not (1 <= L.shape[0] <= n <= m):
            raise BadDimension(f"need 1 <= p <= n <= m, got p={L.shape[0]}, n={n}, m={m}")
        M = np.eye(n) if self.M is None else np.atleast_2d(np.asarray(self.M, dtype=float))
        if M.ndim != 2 or M.shape[1] != n or M.shape[0] < 1:
            raise InputError(f"M must have {n} columns")
        lam = float(self.lam)
        if not (np.isfinite(lam) and lam > 0):
            raise InputError("lambda must be positive and finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "L", _frozen(L))
        object.__setattr__(self, "M", _frozen(M))
        object.__setattr__(self, "lam", lam)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def p(self) -> int:
        return self.L.shape[0]

    @property
    def l(self) -> int:
        return self.M.shape[0]

    def replace(self, **changes) -> "TikhonovProblem":
        data = dict(A=self.A, b=self.b, lam=self.lam, L=self.L, M=self.M, handle=self.handle)
        if "handle" in changes and "A" not in changes:
            data["A"] = None
        data.update(changes)
        return TikhonovProblem(**data)


@dataclass(frozen=True, eq=False)
class GsvdFactors:
    """Factors of ``A = U [Sigma 0; 0 I] R Q^T`` and ``L = V [S 0] R Q^T``.

    ``sigma`` is ascending and ``mu`` descending, ``sigma**2 + mu**2 = 1``.
    """

    U: np.ndarray
    V: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    sigma: np.ndarray
    mu: np.ndarray

    @property
    def n(self) -> int:
        return self.R.shape[0]

    @property
    def p(self) -> int:
        return self.sigma.size

    @property
    def gamma(self) -> np.ndarray:
        return gen_singular_values(self)

    def c_diag(self) -> np.ndarray:
        """Diagonal of ``blkdiag(Sigma, I_{n-p})``."""
        return np.concatenate([self.sigma, np.ones(self.n - self.p)])

    def reconstruct(self) -> tuple:
        """Return ``(A, L)`` rebuilt from the factors."""
        RQt = self.R @ self.Q.T
        A = self.U @ (self.c_diag()[:, None] * RQt)
        L = self.V @ (self.mu[:, None] * RQt[: self.p])
        return A, L


def compute_gsvd(A, L) -> GsvdFactors:
    """GSVD of the pair ``(A, L)`` via a QR of the stacked matrix and a CS split.

    Raises
    ------
    RankDeficient
        If ``[A; L]`` has numerical rank below ``n`` or ``L`` below ``p``.
    """
    A = np.asarray(A, dtype=float)
    L = np.asarray(L, dtype=float)
    m, n = A.shape
    p = L.shape[0]
    if L.shape[1] != n or not (1 <= p <= n <= m):
        raise BadDimension(f"need 1 <= p <= n <= m, got A {A.shape}, L {L.shape}")

    s_L = np.linalg.svd(L, compute_uv=False)
    if s_L[-1] <= TAU_RANK * s_L[0]:
        raise RankDeficient(f"L is rank deficient (sv ratio {s_L[-1] / s_L[0]:.2e})")
    # balance the two blocks so neither drowns in the other's rounding
    a_norm = np.linalg.norm(A, 2)
    alpha = a_norm / s_L[0] if a_norm > 0 else 1.0
    L0, L = L, alpha * L
    Qk, Rk = np.linalg.qr(np.vstack([A, L]))
    s_K = np.linalg.svd(Rk, compute_uv=False)
    if s_K[-1] <= TAU_RANK * s_K[0]:
        raise RankDeficient(f"[A; L] is rank deficient (sv ratio {s_K[-1] / s_K[0]:.2e})")

    Q1, Q2 = Qk[:m], Qk[m:]
    # Q2 = V [S 0] W^T with mu descending
    V, mu, Wt = np.linalg.svd(Q2, full_matrices=True)
    W = Wt.T
    mu = np.minimum(mu, 1.0)
    # Q1 W = U T.  Large columns are orthogonalized first so that tiny ones
    # cannot leak into them; T is then lower triangular.
    Ur, Tr = np.linalg.qr((Q1 @ W)[:, ::-1])
    U = Ur[:, ::-1]
    T = Tr[::-1, ::-1]
    c = np.diag(T).copy()

    # Where mu >= 1/sqrt(2) the mu values cluster near 1 and W is not
    # accurate enough to separate the small sigma; an SVD of that block of T
    # does, after which the matching block of Q2 W is re-diagonalized.
    q = int(np.sum(mu[:p] >= np.sqrt(0.5)))
    if q:
        P1, s1, Z1t = np.linalg.svd(T[:q, :q])
        P1, s1, Z1 = P1[:, ::-1], s1[::-1], Z1t.T[:, ::-1]
        U[:, :q] = U[:, :q] @ P1
        W[:, :q] = W[:, :q] @ Z1
        O, T2 = np.linalg.qr(mu[:q, None] * Z1)
        d2 = np.diag(T2)
        O = O * np.where(d2 < 0, -1.0, 1.0)
        V[:, :q] = V[:, :q] @ O
        mu[:q] = np.abs(d2)
        c[:q] = s1
    sign = np.where(c < 0, -1.0, 1.0)
    U = U * sign
    c = np.abs(c)
    sigma = c[:p]
    scale = np.hypot(sigma, mu)
    sigma, mu = sigma / scale, mu / scale

    # W^T Rk = R Q^T
    R, Qt = la.rq(W.T @ Rk)
    # undo the balancing: L = V [S/alpha 0] R Q^T, then renormalize the pairs
    mu = mu / alpha
    scale = np.hypot(sigma, mu)
    sigma, mu = sigma / scale, mu / scale
    R[:p] *= scale[:, None]
    # keep the trailing identity block exact by absorbing the residual column scale into R
    tail = c[p:]
    R[p:] *= tail[:, None]

    # Rayleigh refinement: with X = Q R^{-1}, A x_i = sigma_i u_i and
    # L x_i = mu_i v_i, and the norm ratio is second-order accurate in x_i.
    # This matters for tiny sigma, known only to O(eps) absolutely above.
    X = Qt.T @ la.solve_triangular(R, np.eye(n)[:, :p])
    na = np.linalg.norm(A @ X, axis=0)
    nl = np.linalg.norm(L0 @ X, axis=0)
    refined = np.hypot(na, nl)
    with np.errstate(invalid="ignore", divide="ignore"):
        s_new, m_new = na / refined, nl / refined
    # accept only moves that stay within the rounding level of the factorization
    rows = np.linalg.norm(R[:p], axis=1)
    ok = (refined > 0) \
        & (np.abs(s_new - sigma) * rows <= 1e-14 * np.linalg.norm(A)) \
        & (np.abs(m_new - mu) * rows <= 1e-14 * np.linalg.norm(L0))
    sigma = np.where(ok, s_new, sigma)
    mu = np.where(ok, m_new, mu)

    # stable order by gamma = sigma / mu (already ascending up to rounding)
    order = np.argsort(sigma / mu, kind="stable")
    if np.any(order != np.arange(p)):
        full = np.concatenate([order, np.arange(p, n)])
        U = U[:, full]
        V = V[:, order]
        sigma, mu = sigma[order], mu[order]
        R = R[full]
        # row permutation breaks triangularity; restore with a fresh RQ
        R, Qt2 = la.rq(R)
        Qt = Qt2 @ Qt
    return GsvdFactors(U=_frozen(U), V=_frozen(V), Q=_frozen(Qt.T), R=_frozen(R),
                       sigma=_frozen(sigma), mu=_frozen(mu))


def gen_singular_values(factors: GsvdFactors) -> np.ndarray:
    """Generalized singular values ``gamma_i = sigma_i / mu_i`` (nondecreasing)."""
    return factors.sigma / factors.mu


class PApplier:
    """Action of ``P = (A^T A + lam^2 L^T L)^{-1}`` on vectors or matrices.

    Build with :meth:`from_gsvd` (two triangular solves per application) or
    :meth:`dense` (QR of the stacked matrix ``[A; lam L]``, so that
    ``P = R^{-1} R^{-T}`` without forming ``A^T A``).
    """

    def __init__(self, fn, n: int, method: str):
        self._fn = fn
        self.n = n
        self.method = method
        self.calls = 0

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.n:
            raise InputError(f"P acts on length-{self.n} vectors, got shape {y.shape}")
        self.calls += 1
        return self._fn(y)

    @classmethod
    def from_gsvd(cls, factors: GsvdFactors, lam: float) -> "PApplier":
        lam = float(lam)
        if not lam > 0:
            raise InputError("lambda must be positive")
        denom = factors.sigma ** 2 + lam ** 2 * factors.mu ** 2
        assert np.all(denom > 0), "shifted GSVD denominator underflowed"
        inv_d = np.concatenate([1.0 / denom, np.ones(factors.n - factors.p)])
        R, Q = factors.R, factors.Q

        def fn(y):
            z = la.solve_triangular(R, Q.T @ y, trans="T", lower=False)
            z = inv_d.reshape((-1,) + (1,) * (z.ndim - 1)) * z
            return Q @ la.solve_triangular(R, z, lower=False)

        return cls(fn, factors.n, "gsvd")

    @classmethod
    def dense(cls, A, L, lam: float) -> "PApplier":
        A = np.asarray(A, dtype=float)
        L = np.asarray(L, dtype=float)
        R = np.linalg.qr(np.vstack([A, float(lam) * L]), mode="r")

        def fn(y):
            z = la.solve_triangular(R, y, trans="T", lower=False)
            return la.solve_triangular(R, z, lower=False)

        return cls(fn, A.shape[1], "dense")


def apply_P(factors: GsvdFactors, lam: float, y) -> np.ndarray:
    """Return ``(A^T A + lam^2 L^T L)^{-1} y`` using the GSVD factors."""
    return PApplier.from_gsvd(factors, lam)(y)


@dataclass(frozen=True, eq=False)
class RegSolution:
    """Tikhonov solution ``x``, residual ``r = b - A x`` and filter factors."""

    x: np.ndarray
    r: np.ndarray
    filters: np.ndarray
    ne_residual: float
    factors: Optional[GsvdFactors] = field(default=None, repr=False)
    P: Optional[PApplier] = field(default=None, repr=False)


def solve_tikhonov(problem: TikhonovProblem, factors: Optional[GsvdFactors] = None,
                   method: str = "gsvd") -> RegSolution:
    """Solve the Tikhonov problem.

    Parameters
    ----------
    problem : TikhonovProblem
    factors : GsvdFactors, optional
        Reused if given, computed otherwise.
    method : {"gsvd", "dense"}
        ``"gsvd"`` uses the filter-factor expression, ``"dense"`` a Cholesky
        solve of the normal equations.

    Returns
    -------
    RegSolution
        ``ne_residual`` is the relative normal-equations residual
        ``||(A^T A + lam^2 L^T L) x - A^T b|| / ||A^T b||``.
    """
    A, L, b, lam = problem.A, problem.L, problem.b, problem.lam
    if factors is None:
        factors = compute_gsvd(A, L)
    sig, mu = factors.sigma, factors.mu
    filters = sig ** 2 / (sig ** 2 + lam ** 2 * mu ** 2)
    if method == "gsvd":
        P = PApplier.from_gsvd(factors, lam)
        coef = factors.U.T @ b
        coef[: factors.p] *= sig / (sig ** 2 + lam ** 2 * mu ** 2)
        x = factors.Q @ la.solve_triangular(factors.R, coef, lower=False)
    elif method == "dense":
        P = PApplier.dense(A, L, lam)
        x = P(A.T @ b)
    else:
        raise InputError(f"unknown solve method {method!r}")
    r = b - A @ x
    Atb = A.T @ b
    ne = A.T @ (A @ x) + lam ** 2 * (L.T @ (L @ x)) - Atb
    denom = np.linalg.norm(Atb)
    ne_res = float(np.linalg.norm(ne) / denom) if denom > 0 else float(np.linalg.norm(ne))
    return RegSolution(x=_frozen(x), r=_frozen(r), filters=_frozen(filters),
                       ne_residual=ne_res, factors=factors, P=P)
