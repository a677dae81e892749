"""Dense symmetric / SPD linear algebra and Kronecker operators.

Everything here works on small-to-medium dense matrices (n up to a few
thousand). Matrix functions of symmetric matrices go through an
eigendecomposition ``m = V diag(lam) V^T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, NumericalFailure

DEFAULT_RANK_TOL = 1e-8
JACOBI_MAX_SWEEPS = 100


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EigDecomp:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


class SymMat:
    """Real symmetric matrix; the input is symmetrized on construction."""

    def __init__(self, entries):
        a = np.array(entries, dtype=float, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        a = 0.5 * (a + a.T)
        self._a = _frozen(a)

    @property
    def a(self) -> np.ndarray:
        return self._a

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self._a if dtype is None else self._a.astype(dtype)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"

    @cached_property
    def eig(self) -> EigDecomp:
        return sym_eig(self)

    @classmethod
    def zeros(cls, n: int) -> "SymMat":
        return cls(np.zeros((n, n)))

    @classmethod
    def diag(cls, values) -> "SymMat":
        return cls(np.diag(np.asarray(values, dtype=float)))


class SpdMat(SymMat):
    """Symmetric positive-definite matrix with a cached eigendecomposition."""

    def __init__(self, entries):
        super().__init__(entries)
        eig = sym_eig(self)
        if eig.eigenvalues[0] <= 0.0:
            raise ValueError(
                f"matrix is not positive definite (min eigenvalue {eig.eigenvalues[0]:.3e})"
            )
        # cached_property stores into __dict__, so priming it keeps one decomposition
        self.__dict__["eig"] = eig

    @classmethod
    def identity(cls, n: int) -> "SpdMat":
        return cls(np.eye(n))

    def power(self, p: float) -> "SpdMat":
        lam, v = self.eig.eigenvalues, self.eig.eigenvectors
        return SpdMat((v * lam**p) @ v.T)

    def inv(self) -> "SpdMat":
        return self.power(-1.0)


def as_sym(m) -> SymMat:
    return m if isinstance(m, SymMat) else SymMat(m)


# --- eigensolvers -----------------------------------------------------------


def jacobi_eig(a, max_sweeps: int = JACOBI_MAX_SWEEPS, tol: float = 1e-15) -> EigDecomp:
    """Cyclic Jacobi eigensolver for a symmetric matrix.

    Sweeps over all (p, q) pairs applying plane rotations until the
    off-diagonal Frobenius norm drops below ``tol * ||a||_F``. Raises
    NumericalFailure after ``max_sweeps`` sweeps.
    """
    a = np.array(a, dtype=float, copy=True)
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0 or n == 1:
        return _sorted(np.diag(a).copy(), v)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off > 1e3 * tol * scale:
            raise NumericalFailure(f"Jacobi did not converge in {max_sweeps} sweeps (off={off:.3e})")
    return _sorted(np.diag(a).copy(), v)


def _sorted(lam: np.ndarray, v: np.ndarray) -> EigDecomp:
    order = np.argsort(lam, kind="stable")
    return EigDecomp(_frozen(lam[order]), _frozen(np.ascontiguousarray(v[:, order])))


def sym_eig(m, method: str = "lapack") -> EigDecomp:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending.

    ``method="lapack"`` uses LAPACK's ``syevd`` through numpy and is the
    default; ``method="jacobi"`` runs the in-house cyclic Jacobi solver.
    """
    a = m.a if isinstance(m, SymMat) else np.asarray(m, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NumericalFailure("non-finite entries")
    if method == "jacobi":
        return jacobi_eig(a)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    try:
        lam, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    return _sorted(lam, v)


# --- matrix functions -------------------------------------------------------


def sym_apply(m, fn) -> np.ndarray:
    """Return ``V diag(fn(lam)) V^T`` as a plain array."""
    e = as_sym(m).eig
    v = e.eigenvectors
    return (v * fn(e.eigenvalues)) @ v.T


def spd_sqrt(m: SpdMat) -> SpdMat:
    return m.power(0.5)


def sym_expm(m, scale: float = 1.0) -> SymMat:
    return SymMat(sym_apply(m, lambda lam: np.exp(scale * lam)))


def numeric_rank(m, rel_tol: float = DEFAULT_RANK_TOL) -> int:
    """Count eigenvalues with ``|lam| > rel_tol * max |lam|``; 0 for the zero matrix."""
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    lam = np.abs(as_sym(m).eig.eigenvalues)
    top = lam.max()
    if top == 0.0:
        return 0
    return int(np.count_nonzero(lam > rel_tol * top))


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR with sign fix)."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_spd(n: int, rng: np.random.Generator, cond: float | None = None) -> SpdMat:
    """Random SPD matrix. With ``cond`` the spectrum is log-uniform on [1/cond, 1]."""
    q = random_orthogonal(n, rng)
    if cond is None:
        x = rng.standard_normal((n, n))
        return SpdMat(x @ x.T / n + 0.1 * np.eye(n))
    lam = np.exp(rng.uniform(-np.log(cond), 0.0, size=n))
    lam[0], lam[-1] = 1.0 / cond, 1.0
    return SpdMat((q * lam) @ q.T)


def random_psd(n: int, rank: int, rng: np.random.Generator, eig_range=(0.5, 2.0)) -> SymMat:
    """Random PSD matrix of exactly ``rank`` with nonzero eigenvalues in ``eig_range``."""
    q = random_orthogonal(n, rng)
    lam = np.zeros(n)
    lam[:rank] = rng.uniform(*eig_range, size=rank)
    return SymMat((q * lam) @ q.T)


# --- Kronecker operators ----------------------------------------------------


class KroneckerOp:
    """The operator ``left ⊗ right`` applied without forming it.

    Uses the row-major identity ``(A ⊗ B) vec_r(X) = vec_r(A X B^T)`` with
    ``X`` of shape ``(q, s)`` for ``A`` ``p×q`` and ``B`` ``r×s``. Both
    ``apply`` and ``rapply`` accept a single vector or a ``(len, k)``
    block of vectors.
    """

    def __init__(self, left, right):
        self.left = _frozen(np.array(left, dtype=float, ndmin=2))
        self.right = _frozen(np.array(right, dtype=float, ndmin=2))

    @property
    def shape(self) -> tuple[int, int]:
        (p, q), (r, s) = self.left.shape, self.right.shape
        return p * r, q * s

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self._kron_mv(self.left, self.right, v)

    def rapply(self, v: np.ndarray) -> np.ndarray:
        """Apply the transpose ``A^T ⊗ B^T``."""
        return self._kron_mv(self.left.T, self.right.T, v)

    @staticmethod
    def _kron_mv(a, b, v):
        v = np.asarray(v, dtype=float)
        (p, q), (r, s) = a.shape, b.shape
        if v.shape[0] != q * s:
            raise DimensionMismatch(f"operand length {v.shape[0]} != {q * s}")
        if v.ndim == 1:
            return (a @ v.reshape(q, s) @ b.T).ravel()
        k = v.shape[1]
        x = v.reshape(q, s, k)
        y = np.einsum("ij,jlk,ml->imk", a, x, b, optimize=True)
        return y.reshape(p * r, k)

    def dense(self) -> np.ndarray:
        return np.kron(self.left, self.right)
