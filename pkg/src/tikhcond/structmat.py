"""Structured matrices and their parameter vectors.

A structured ``m x n`` matrix is described by a parameter vector ``a`` and a
map ``g`` with ``A = g(a)``.  Linear structures (symmetric Toeplitz, Toeplitz,
Hankel, or any user-supplied subspace) have ``g(a) = sum_i a_i S_i`` for a
fixed basis ``S_1..S_k``.  Vandermonde and Cauchy matrices are nonlinear in
their parameters; for those this module provides the matrices ``V1`` and
``C1`` that describe the first-order change of ``g``.

Parameter layouts
-----------------
symtoeplitz
    ``A[i, j] = a[|i - j|]``, ``k = max(m, n)`` (``k = n`` when square).
toeplitz
    first column ``A[:, 0]`` followed by the first row without its corner
    entry, ``k = m + n - 1``.
hankel
    first column followed by the last row without its corner entry,
    ``k = m + n - 1``; equivalently ``A[i, j] = a[i + j]``.
vandermonde
    nodes ``a_0..a_{n-1}`` with ``A[i, j] = a_j ** i`` for ``i = 0..m-1``.
    ``0 ** 0`` is taken as 1, so a zero node contributes a leading 1.
cauchy
    ``[u; v]`` with ``A[i, j] = 1 / (u_i - v_j)``, ``k = m + n``.
general
    arbitrary linear subspace given by an explicit basis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterator, Optional

import numpy as np

from .errors import (
    BadDimension,
    BasisMismatch,
    DegenerateStructure,
    InputError,
    NotInClass,
    UnsupportedForNonlinear,
)

__all__ = [
    "StructureKind",
    "LinearBasis",
    "StructuredMatrix",
    "param_count",
    "materialize",
    "canonical_basis",
    "params_from_dense",
    "vdm_derived_v1",
    "cauchy_derived_c1",
    "check_cauchy_separation",
]

#: relative reconstruction tolerance used by :func:`params_from_dense`
STRUCT_TOL = 1e-12
#: relative separation threshold for Cauchy nodes
CAUCHY_SEP_TOL = 1e-12


class StructureKind(str, enum.Enum):
    GENERAL = "general"
    SYMTOEPLITZ = "symtoeplitz"
    TOEPLITZ = "toeplitz"
    HANKEL = "hankel"
    VANDERMONDE = "vandermonde"
    CAUCHY = "cauchy"

    @property
    def is_linear(self) -> bool:
        return self not in (StructureKind.VANDERMONDE, StructureKind.CAUCHY)

    @classmethod
    def parse(cls, value) -> "StructureKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InputError(f"unknown structure kind {value!r}") from None


def param_count(kind, m: int, n: int, basis: Optional["LinearBasis"] = None) -> int:
    """Length of the parameter vector for a structure of shape ``(m, n)``."""
    kind = StructureKind.parse(kind)
    if kind is StructureKind.SYMTOEPLITZ:
        return max(m, n)
    if kind in (StructureKind.TOEPLITZ, StructureKind.HANKEL):
        return m + n - 1
    if kind is StructureKind.VANDERMONDE:
        return n
    if kind is StructureKind.CAUCHY:
        return m + n
    if basis is None:
        raise InputError("a general linear structure needs an explicit basis")
    return basis.k


def _index_map(kind: StructureKind, m: int, n: int) -> np.ndarray:
    """Integer ``(m, n)`` array giving the parameter that fills each entry."""
    i = np.arange(m)[:, None]
    j = np.arange(n)[None, :]
    if kind is StructureKind.SYMTOEPLITZ:
        return np.abs(i - j)
    if kind is StructureKind.TOEPLITZ:
        return np.where(i >= j, i - j, m + (j - i) - 1)
    if kind is StructureKind.HANKEL:
        return np.broadcast_to(i + j, (m, n)).copy()
    raise UnsupportedForNonlinear(f"{kind.value} has no canonical linear basis")


class LinearBasis:
    """Ordered, read-only stack of ``k`` basis matrices of shape ``(m, n)``.

    Parameters
    ----------
    mats : array_like, shape (k, m, n)
        Basis matrices ``S_1..S_k``.
    check : bool
        Verify that the vectorised matrices are linearly independent.

    Notes
    -----
    Canonical 0/1 bases are stored as an integer index map instead (see
    :meth:`from_index`); the dense stack is then only built on request.
    """

    __slots__ = ("_mats", "_index", "_k")

    def __init__(self, mats, check: bool = True):
        mats = np.array(mats, dtype=float)
        if mats.ndim != 3 or mats.shape[0] == 0:
            raise InputError("basis must be a non-empty stack of matrices")
        mats.setflags(write=False)
        self._mats = mats
        self._index = None
        self._k = mats.shape[0]
        if check:
            flat = mats.reshape(self._k, -1)
            if flat.shape[0] > flat.shape[1]:
                raise BasisMismatch("more basis matrices than entries")
            s = np.linalg.svd(flat, compute_uv=False)
            if s[-1] <= 1e-10 * s[0]:
                raise BasisMismatch("basis matrices are linearly dependent")

    @classmethod
    def from_index(cls, index, k: int) -> "LinearBasis":
        """Basis with ``S_i = (index == i)``; every entry belongs to one ``S_i``."""
        index = np.array(index, dtype=np.intp)
        if index.ndim != 2 or index.min() < 0 or index.max() >= k:
            raise InputError("index map must be 2-D with values in [0, k)")
        if np.unique(index).size != k:
            raise BasisMismatch("every basis matrix must cover at least one entry")
        index.setflags(write=False)
        obj = cls.__new__(cls)
        obj._mats = None
        obj._index = index
        obj._k = int(k)
        return obj

    @property
    def index(self) -> Optional[np.ndarray]:
        return self._index

    @property
    def mats(self) -> np.ndarray:
        if self._mats is None:
            m, n = self._index.shape
            mats = np.zeros((self._k, m, n))
            rows, cols = np.indices((m, n))
            mats[self._index, rows, cols] = 1.0
            mats.setflags(write=False)
            # benign race: concurrent builders produce identical arrays
            self._mats = mats
        return self._mats

    @property
    def k(self) -> int:
        return self._k

    @property
    def shape(self) -> tuple:
        if self._index is not None:
            return self._index.shape
        return self._mats.shape[1:]

    def __len__(self) -> int:
        return self.k

    def __getitem__(self, i) -> np.ndarray:
        if self._index is not None and isinstance(i, (int, np.integer)):
            return (self._index == range(self._k)[i]).astype(float)
        return self.mats[i]

    def __iter__(self) -> Iterator[np.ndarray]:
        for i in range(self.k):
            yield self[i]

    def combine(self, coeffs) -> np.ndarray:
        """Return ``sum_i coeffs[i] * S_i``."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.k,):
            raise InputError(f"expected {self.k} coefficients, got shape {coeffs.shape}")
        if self._index is not None:
            return coeffs[self._index]
        return np.tensordot(coeffs, self._mats, axes=1)

    def inner(self, W) -> np.ndarray:
        """Return the vector of trace inner products ``<S_i, W>``."""
        W = np.asarray(W, dtype=float)
        if W.shape != self.shape:
            raise InputError(f"expected a {self.shape} matrix, got {W.shape}")
        if self._index is not None:
            return np.bincount(self._index.ravel(), weights=W.ravel(), minlength=self.k)
        return np.tensordot(self._mats, W, axes=([1, 2], [0, 1]))

    def apply_right(self, x) -> np.ndarray:
        """Matrix whose ``i``-th column is ``S_i x``, shape ``(m, k)``."""
        x = np.asarray(x, dtype=float)
        if self._index is not None:
            m, n = self.shape
            out = np.zeros((m, self.k))
            rows = np.repeat(np.arange(m), n)
            np.add.at(out, (rows, self._index.ravel()), np.tile(x, m))
            return out
        return np.einsum("kij,j->ik", self._mats, x)

    def apply_left(self, r) -> np.ndarray:
        """Matrix whose ``i``-th column is ``S_i^T r``, shape ``(n, k)``."""
        r = np.asarray(r, dtype=float)
        if self._index is not None:
            m, n = self.shape
            out = np.zeros((n, self.k))
            cols = np.tile(np.arange(n), m)
            np.add.at(out, (cols, self._index.ravel()), np.repeat(r, n))
            return out
        return np.einsum("kij,i->jk", self._mats, r)

    def frobenius_norms(self) -> np.ndarray:
        if self._index is not None:
            return np.sqrt(np.bincount(self._index.ravel(), minlength=self.k).astype(float))
        return np.sqrt(np.einsum("kij,kij->k", self._mats, self._mats))


def canonical_basis(kind, m: int, n: int) -> LinearBasis:
    """Canonical 0/1 basis of a linear structure class.

    Each basis matrix marks the entries filled by one parameter, so the
    basis is orthogonal and ``|g(a)| = sum_i |a_i| |S_i|`` holds exactly.
    """
    kind = StructureKind.parse(kind)
    if not kind.is_linear:
        raise UnsupportedForNonlinear(f"{kind.value} is not a linear structure")
    if m < 1 or n < 1:
        raise BadDimension("matrix dimensions must be positive")
    if kind is StructureKind.GENERAL:
        # the full canonical basis of R^{m x n}, column-major (vec) order
        return LinearBasis.from_index(np.arange(m * n).reshape(n, m).T, m * n)
    index = _index_map(kind, m, n)
    return LinearBasis.from_index(index, param_count(kind, m, n))


def check_cauchy_separation(u, v) -> None:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    gap = np.min(np.abs(u[:, None] - v[None, :]))
    scale = 1.0 + max(np.max(np.abs(u)), np.max(np.abs(v)))
    if gap <= CAUCHY_SEP_TOL * scale:
        raise DegenerateStructure(
            f"Cauchy nodes not separated: min |u_i - v_j| = {gap:.3e}"
        )


@dataclass(frozen=True, eq=False)
class StructuredMatrix:
    """A structure kind plus the parameters that generate the matrix.

    ``params`` holds ``[u; v]`` for Cauchy matrices.  ``basis`` is required
    for :attr:`StructureKind.GENERAL` and derived automatically for the
    other linear kinds.
    """

    kind: StructureKind
    m: int
    n: int
    params: np.ndarray
    basis: Optional[LinearBasis] = field(default=None, repr=False)

    def __post_init__(self):
        kind = StructureKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.m < 1 or self.n < 1:
            raise BadDimension("matrix dimensions must be positive")
        params = np.array(self.params, dtype=float).ravel()
        params.setflags(write=False)
        object.__setattr__(self, "params", params)
        if kind is StructureKind.GENERAL:
            if self.basis is None:
                raise InputError("a general linear structure needs an explicit basis")
            if self.basis.shape != (self.m, self.n):
                raise BasisMismatch("basis matrices do not match (m, n)")
        elif self.basis is not None:
            raise InputError("only general structures take an explicit basis")
        k = param_count(kind, self.m, self.n, self.basis)
        if params.shape != (k,):
            raise InputError(f"{kind.value} {self.m}x{self.n} needs {k} parameters, got {params.size}")
        if kind is StructureKind.CAUCHY:
            check_cauchy_separation(self.u, self.v)

    # constructors -----------------------------------------------------------
    @classmethod
    def cauchy(cls, u, v) -> "StructuredMatrix":
        u = np.asarray(u, dtype=float).ravel()
        v = np.asarray(v, dtype=float).ravel()
        return cls(StructureKind.CAUCHY, u.size, v.size, np.concatenate([u, v]))

    @classmethod
    def general(cls, basis: LinearBasis, params) -> "StructuredMatrix":
        m, n = basis.shape
        return cls(StructureKind.GENERAL, m, n, params, basis=basis)

    # accessors --------------------------------------------------------------
    @property
    def shape(self) -> tuple:
        return (self.m, self.n)

    @property
    def k(self) -> int:
        return self.params.size

    @property
    def u(self) -> np.ndarray:
        if self.kind is not StructureKind.CAUCHY:
            raise InputError("u/v nodes only exist for Cauchy matrices")
        return self.params[: self.m]

    @property
    def v(self) -> np.ndarray:
        if self.kind is not StructureKind.CAUCHY:
            raise InputError("u/v nodes only exist for Cauchy matrices")
        return self.params[self.m :]

    @cached_property
    def linear_basis(self) -> LinearBasis:
        if self.kind is StructureKind.GENERAL:
            return self.basis
        return canonical_basis(self.kind, self.m, self.n)

    def with_params(self, params) -> "StructuredMatrix":
        return StructuredMatrix(self.kind, self.m, self.n, params, basis=self.basis)

    def materialize(self) -> np.ndarray:
        return materialize(self)

    def direction(self, delta) -> np.ndarray:
        """First-order change of ``g`` along the parameter direction ``delta``.

        Exact for linear kinds; ``V1 Diag(delta)`` for Vandermonde and
        ``C1 Diag(dv) - Diag(du) C1`` for Cauchy (``d/du_i`` of
        ``1 / (u_i - v_j)`` is ``-C1_ij``).
        """
        delta = np.asarray(delta, dtype=float)
        if delta.shape != (self.k,):
            raise InputError(f"direction needs {self.k} entries, got shape {delta.shape}")
        if self.kind.is_linear:
            return self.linear_basis.combine(delta)
        if self.kind is StructureKind.VANDERMONDE:
            return vdm_derived_v1(self.materialize()) * delta[None, :]
        C1 = cauchy_derived_c1(self.u, self.v)
        du, dv = delta[: self.m], delta[self.m :]
        return C1 * dv[None, :] - du[:, None] * C1

    def direction_adjoint(self, G) -> np.ndarray:
        """Adjoint of :meth:`direction` under the trace inner product."""
        G = np.asarray(G, dtype=float)
        if G.shape != self.shape:
            raise InputError(f"expected a {self.shape} matrix, got {G.shape}")
        if self.kind.is_linear:
            return self.linear_basis.inner(G)
        if self.kind is StructureKind.VANDERMONDE:
            return np.einsum("ij,ij->j", vdm_derived_v1(self.materialize()), G)
        CG = cauchy_derived_c1(self.u, self.v) * G
        return np.concatenate([-CG.sum(axis=1), CG.sum(axis=0)])

    # serialisation ----------------------------------------------------------
    def to_dict(self) -> dict:
        if self.kind is StructureKind.CAUCHY:
            return {"kind": self.kind.value, "m": self.m, "n": self.n,
                    "u": self.u.tolist(), "v": self.v.tolist()}
        out: dict[str, Any] = {"kind": self.kind.value, "m": self.m, "n": self.n,
                               "params": self.params.tolist()}
        if self.kind is StructureKind.GENERAL:
            out["basis"] = self.basis.mats.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "StructuredMatrix":
        try:
            kind = StructureKind.parse(data["kind"])
            if kind is StructureKind.CAUCHY:
                u = np.asarray(data["u"], dtype=float)
                v = np.asarray(data["v"], dtype=float)
                h = cls.cauchy(u, v)
                if ("m" in data and data["m"] != h.m) or ("n" in data and data["n"] != h.n):
                    raise InputError("Cauchy m/n disagree with len(u)/len(v)")
                return h
            if kind is StructureKind.GENERAL:
                basis = LinearBasis(data["basis"])
                return cls.general(basis, data["params"])
            return cls(kind, int(data["m"]), int(data["n"]), data["params"])
        except KeyError as exc:
            raise InputError(f"structured matrix description lacks key {exc}") from None


def materialize(handle: StructuredMatrix) -> np.ndarray:
    """Dense ``m x n`` matrix ``g(params)``."""
    kind, m, n, a = handle.kind, handle.m, handle.n, handle.params
    if kind.is_linear:
        return handle.linear_basis.combine(a)
    if kind is StructureKind.VANDERMONDE:
        return np.power(a[None, :], np.arange(m)[:, None])
    check_cauchy_separation(handle.u, handle.v)
    return 1.0 / (handle.u[:, None] - handle.v[None, :])


def params_from_dense(kind, A, basis: Optional[LinearBasis] = None,
                      tol: float = STRUCT_TOL) -> np.ndarray:
    """Recover a parameter vector ``a`` with ``g(a) ~= A``.

    Raises :class:`NotInClass` if the reconstruction misses ``A`` by more than
    ``tol * ||A||_F``.  For Cauchy matrices the nodes are only defined up to a
    common shift; the representative with ``v_1 = 0`` is returned.
    """
    kind = StructureKind.parse(kind)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise InputError("expected a 2-D matrix")
    m, n = A.shape
    if kind is StructureKind.GENERAL:
        if basis is None:
            raise InputError("a general linear structure needs an explicit basis")
        flat = basis.mats.reshape(basis.k, -1).T
        a = np.linalg.lstsq(flat, A.ravel(), rcond=None)[0]
        handle = StructuredMatrix.general(basis, a)
    elif kind.is_linear:
        index = _index_map(kind, m, n)
        k = param_count(kind, m, n)
        sums = np.bincount(index.ravel(), weights=A.ravel(), minlength=k)
        counts = np.bincount(index.ravel(), minlength=k)
        a = sums / counts
        handle = StructuredMatrix(kind, m, n, a)
    elif kind is StructureKind.VANDERMONDE:
        a = A[1].copy() if m > 1 else np.ones(n)
        handle = StructuredMatrix(kind, m, n, a)
    else:
        if np.any(A == 0):
            raise NotInClass("a Cauchy matrix has no zero entries")
        D = 1.0 / A
        u = D[:, 0].copy()
        v = u[0] - D[0, :]
        try:
            handle = StructuredMatrix.cauchy(u, v)
        except DegenerateStructure as exc:
            raise NotInClass(str(exc)) from None
    resid = np.linalg.norm(materialize(handle) - A)
    if resid > tol * max(np.linalg.norm(A), np.finfo(float).tiny):
        raise NotInClass(f"matrix is not {kind.value}: residual {resid:.3e}")
    return np.array(handle.params)


def vdm_derived_v1(V) -> np.ndarray:
    """``V1 = Diag(0, 1, .., m-1) [0; V(0:m-1, :)]``, the node derivative of ``V``."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise InputError("expected a 2-D Vandermonde matrix")
    V1 = np.zeros_like(V)
    V1[1:] = np.arange(1, V.shape[0])[:, None] * V[:-1]
    return V1


def cauchy_derived_c1(u, v) -> np.ndarray:
    """``C1[i, j] = 1 / (u_i - v_j)**2``."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    check_cauchy_separation(u, v)
    return 1.0 / (u[:, None] - v[None, :]) ** 2
