"""Closed-form expected loss of the preconditioned OU process.

The process is ``d theta = -G H theta dt + G Sigma^{1/2} dn`` started at the
stationary point ``theta = 0`` of ``f(theta) = theta^T H theta / 2``.

Every quantity is computed in the symmetric frame ``S = G^{1/2} H G^{1/2}
= U diag(lam) U^T``, which is similar to ``G H``. Writing
``Q = G^{1/2} Sigma G^{1/2}`` and ``w = diag(U^T Q U)`` the covariance
ODE decouples along ``U`` and

    E f(theta_t) = 1/4 Tr(G Sigma (I - exp(-2 G H t)))
                 = 1/4 sum_i w_i (1 - exp(-2 lam_i t)).

Note the ordering ``G Sigma``: it agrees with ``Sigma G`` whenever the two
commute (in particular for ``Sigma G = sigma^2 I``) and under the trace
at ``t -> inf`` for PD ``H``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, MismatchedSystems, NotPsd, NotSaddle
from .matcore import SpdMat, SymMat, as_sym, numeric_rank, spd_sqrt, sym_eig

ZERO_TOL = 1e-10


@dataclass(frozen=True)
class SpectralCache:
    eigenvalues: np.ndarray  # of G H, ascending
    p: np.ndarray  # columns are eigenvectors of G H
    p_inv: np.ndarray
    j: np.ndarray  # bool mask, True where the eigenvalue counts as positive
    weights: np.ndarray  # diag(U^T G^{1/2} Sigma G^{1/2} U)
    tol: float

    @property
    def projector(self) -> np.ndarray:
        """``P J P^{-1}``, the oblique projector onto the non-null modes of ``G H``."""
        return (self.p * self.j) @ self.p_inv


class OuSystem:
    """The triple (G, H, Sigma) of a preconditioned OU process."""

    def __init__(self, g: SpdMat, h, sigma: SpdMat):
        h = as_sym(h)
        if not (g.dim == h.dim == sigma.dim):
            raise DimensionMismatch(f"dims differ: G {g.dim}, H {h.dim}, Sigma {sigma.dim}")
        self.g, self.h, self.sigma = g, h, sigma

    @property
    def dim(self) -> int:
        return self.h.dim

    @classmethod
    def isotropic(cls, h, sigma2: float = 1.0) -> "OuSystem":
        h = as_sym(h)
        eye = SpdMat.identity(h.dim)
        return cls(eye, h, SpdMat(sigma2 * np.eye(h.dim)))

    @cached_property
    def spectral(self) -> SpectralCache:
        g_half = spd_sqrt(self.g).a
        g_ihalf = self.g.power(-0.5).a
        s = SymMat(g_half @ self.h.a @ g_half)
        e = sym_eig(s)
        lam, u = e.eigenvalues, e.eigenvectors
        q = g_half @ self.sigma.a @ g_half
        weights = np.einsum("ij,ik,kj->j", u, q, u)
        top = np.abs(lam).max()
        tol = ZERO_TOL * top
        return SpectralCache(
            eigenvalues=lam,
            p=g_half @ u,
            p_inv=u.T @ g_ihalf,
            j=lam > tol,
            weights=weights,
            tol=tol,
        )

    @property
    def is_psd(self) -> bool:
        sp = self.spectral
        return bool(sp.eigenvalues[0] >= -sp.tol)

    @property
    def lambda_min_pos(self) -> float:
        """Smallest eigenvalue of G H counted as positive (nan if none)."""
        sp = self.spectral
        pos = sp.eigenvalues[sp.j]
        return float(pos[0]) if pos.size else float("nan")


def expected_loss_raw(sys: OuSystem, t):
    """Unclamped closed form; accepts a scalar or an array of times."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or not np.all(np.isfinite(t_arr)):
        raise ValueError("t must be finite and non-negative")
    sp = sys.spectral
    decay = -np.expm1(-2.0 * np.multiply.outer(t_arr, sp.eigenvalues))
    out = 0.25 * decay @ sp.weights
    return float(out) if out.ndim == 0 else out


def expected_loss_at(sys: OuSystem, t):
    """Expected loss ``E f(theta_t)``.

    For a PSD Hessian the result is clamped at zero to hide round-off;
    saddle systems are returned raw since their loss does go negative.
    """
    raw = expected_loss_raw(sys, t)
    if sys.is_psd:
        return np.maximum(raw, 0.0) if isinstance(raw, np.ndarray) else max(raw, 0.0)
    return raw


def expected_loss_from_spectrum(eigenvalues, sigma2: float, t):
    """Expected loss when ``Sigma G = sigma2 I``: only the spectrum of ``G H`` enters."""
    lam = np.asarray(eigenvalues, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    out = 0.25 * sigma2 * (-np.expm1(-2.0 * np.multiply.outer(t_arr, lam))).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def steady_state_loss(sys: OuSystem) -> float:
    """``lim_{t->inf} E f(theta_t) = 1/4 Tr(G Sigma P J P^{-1})`` for PSD ``H``."""
    sp = sys.spectral
    if not sys.is_psd:
        raise NotPsd(f"min eigenvalue of GH is {sp.eigenvalues[0]:.3e}")
    return float(0.25 * sp.weights[sp.j].sum())


def loss_time_derivative(sys: OuSystem, t):
    """``d/dt E f(theta_t) = 1/2 Tr(G Sigma G H exp(-2 G H t))``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    sp = sys.spectral
    lam = sp.eigenvalues
    out = 0.5 * np.exp(-2.0 * np.multiply.outer(t_arr, lam)) @ (sp.weights * lam)
    return float(out) if out.ndim == 0 else out


def max_loss_preconditioner(sigma: SpdMat) -> SpdMat:
    """Unit-Frobenius preconditioner maximising the PD steady-state loss: ``Sigma / ||Sigma||_F``."""
    return SpdMat(sigma.a / np.linalg.norm(sigma.a))


@dataclass(frozen=True)
class PreconditionerComparison:
    n: int
    trace_sigma: float
    loss_identity_like: float
    loss_adam_like: float
    predicate_holds: bool
    # 1/4 Tr(Sigma^{-1/2}): the other closed form that appears for the Adam-like limit
    loss_adam_like_alt: float

    @property
    def inequality_holds(self) -> bool:
        return self.loss_identity_like > self.loss_adam_like


def compare_preconditioners(sigma: SpdMat) -> PreconditionerComparison:
    """Steady-state loss under ``G1 = sqrt(Tr(Sigma^-1)/n) I`` and ``G2 = Sigma^{-1/2}``.

    Both preconditioners have squared Frobenius norm ``Tr(Sigma^-1)``.
    """
    lam = sigma.eig.eigenvalues
    n = sigma.dim
    tr = float(lam.sum())
    g1_scale = np.sqrt(np.sum(1.0 / lam) / n)
    return PreconditionerComparison(
        n=n,
        trace_sigma=tr,
        loss_identity_like=0.25 * g1_scale * tr,
        loss_adam_like=0.25 * float(np.sqrt(lam).sum()),
        predicate_holds=tr > n,
        loss_adam_like_alt=0.25 * float((1.0 / np.sqrt(lam)).sum()),
    )


def escape_time_bound(sys: OuSystem) -> float:
    """Upper bound ``log(Tr(Sigma G) / lam_min(Sigma G)) / |2 lam_min(G H)|`` on the escape time."""
    sp = sys.spectral
    lam_min = sp.eigenvalues[0]
    if lam_min >= -sp.tol:
        raise NotSaddle(f"min eigenvalue of GH is {lam_min:.3e}")
    g_half = spd_sqrt(sys.g).a
    sg = np.linalg.eigvalsh(g_half @ sys.sigma.a @ g_half)
    return float(np.log(sg.sum() / sg[0]) / abs(2.0 * lam_min))


def escape_time(sys: OuSystem, grid: int = 2000, xtol: float = 1e-12) -> float:
    """First time the closed-form expected loss drops below its initial value.

    Returns ``inf`` for a PSD Hessian (the loss never drops below zero).
    """
    if sys.is_psd:
        return float("inf")
    bound = escape_time_bound(sys)
    if loss_time_derivative(sys, 0.0) < 0:
        return 0.0
    ts = np.linspace(0.0, bound, grid + 1)[1:]
    vals = expected_loss_raw(sys, ts)
    below = np.flatnonzero(vals < 0)
    if below.size == 0:
        # the bound guarantees negativity strictly after it; step just past it
        hi = bound * (1 + 1e-9) + 1e-300
        lo = ts[-1] if vals[-1] >= 0 else 0.0
    else:
        k = below[0]
        hi = ts[k]
        lo = ts[k - 1] if k > 0 else 0.0
    while hi - lo > xtol * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if expected_loss_raw(sys, mid) < 0:
            hi = mid
        else:
            lo = mid
    return hi


def escaping_efficiency(sys: OuSystem, t, f0: float = 0.0):
    """``mu_t = E[f(theta_t)] - f(theta_0)``."""
    return expected_loss_at(sys, t) - f0


def rank_order_check(sys1: OuSystem, sys2: OuSystem, slack: float = 1e-9) -> bool:
    """Whether ``rank(H1) <= rank(H2)`` comes with ``steady1 <= steady2 + slack``.

    The implication is guaranteed when ``Sigma G = sigma^2 I``. For a
    general shared pair (G, Sigma) it can fail: the steady loss depends on
    which directions the Hessians span, not only on how many.
    """
    if not (np.array_equal(sys1.g.a, sys2.g.a) and np.array_equal(sys1.sigma.a, sys2.sigma.a)):
        raise MismatchedSystems("systems must share G and Sigma")
    if numeric_rank(sys1.h) > numeric_rank(sys2.h):
        return True
    return steady_state_loss(sys1) <= steady_state_loss(sys2) + slack
