"""Baseline rank estimate: trace of a polynomial eigenprojector filter.

The spectrum is mapped affinely onto [-1, 1], a step function at the
threshold is expanded in Chebyshev polynomials with Jackson damping, and
``Tr(phi_m(H))`` is estimated by Hutchinson probing with Rademacher
vectors. Only matrix-vector products with ``H`` are needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as cheb

from .langevin_sim import path_stream

LANCZOS_STEPS = 30
BOUND_MARGIN = 0.05


class MatVecOracle:
    """Symmetric operator known only through products ``v -> H v``.

    ``matvec`` must accept an ``(n,)`` vector or an ``(n, k)`` block.
    """

    def __init__(self, matvec: Callable[[np.ndarray], np.ndarray], dim: int):
        self.matvec = matvec
        self.dim = dim
        self._bounds = None
        self._extremes = None

    @classmethod
    def from_dense(cls, h) -> "MatVecOracle":
        h = np.asarray(h, dtype=float)
        return cls(lambda v: h @ v, h.shape[0])

    def __call__(self, v):
        return self.matvec(v)

    def spectral_bounds(self, seed: int = 0) -> tuple[float, float]:
        """(lower, upper) spectral interval from a Lanczos pre-pass plus a safety margin."""
        if self._bounds is None:
            lo, hi = self.extreme_eigenvalues(seed)
            # pad relative to the spread, or to the magnitude when the spectrum is (nearly) a point
            pad = BOUND_MARGIN * max(hi - lo, abs(hi), abs(lo))
            self._bounds = (lo - pad, hi + pad)
        return self._bounds

    def extreme_eigenvalues(self, seed: int = 0) -> tuple[float, float]:
        """Lanczos estimates of the smallest and largest eigenvalue, widened by the residual norm."""
        if self._extremes is None:
            self._extremes = _lanczos_extremes(self.matvec, self.dim, path_stream(seed, 7))
        return self._extremes


def _lanczos_extremes(matvec, n, rng, steps: int = LANCZOS_STEPS) -> tuple[float, float]:
    # full reorthogonalization; the last off-diagonal bounds how far the Ritz values can lag
    steps = min(steps, n)
    q = np.zeros((n, steps))
    alpha, beta = np.zeros(steps), np.zeros(steps)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    k = 0
    for k in range(steps):
        q[:, k] = v
        w = matvec(v)
        alpha[k] = v @ w
        w = w - q[:, : k + 1] @ (q[:, : k + 1].T @ w)
        w = w - q[:, : k + 1] @ (q[:, : k + 1].T @ w)
        beta[k] = np.linalg.norm(w)
        if beta[k] <= 1e-12 * max(abs(alpha[: k + 1]).max(), 1e-300):
            break
        v = w / beta[k]
    m = k + 1
    t = np.diag(alpha[:m]) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
    ritz = np.linalg.eigvalsh(t)
    if ritz[-1] == 0.0 and ritz[0] == 0.0:
        return 0.0, 0.0
    slack = beta[m - 1]
    return float(ritz[0] - slack), float(ritz[-1] + slack)


def _psd_bounds(oracle, seed):
    # the operator is documented PSD: anything below zero is padding or round-off
    lo, hi = oracle.spectral_bounds(seed)
    return max(lo, 0.0), hi


@dataclass(frozen=True)
class FilterConfig:
    degree: int = 50
    num_probe_vectors: int = 300
    threshold_eps: float = 1e-3  # step location as a fraction of lambda_max

    def __post_init__(self):
        if self.degree < 1 or self.num_probe_vectors < 1:
            raise ValueError("degree and num_probe_vectors must be >= 1")
        if not 0 < self.threshold_eps < 1:
            raise ValueError("threshold_eps must lie in (0, 1)")


@dataclass(frozen=True)
class FilterEstimate:
    value: float
    stderr: float

    def __float__(self):
        return self.value


def jackson_coefficients(m: int) -> np.ndarray:
    """Jackson damping factors ``g_0 .. g_m``."""
    k = np.arange(m + 1)
    a = np.pi / (m + 2)
    return ((1 - k / (m + 2)) * np.sin(a) * np.cos(k * a) + np.cos(a) * np.sin(k * a) / (m + 2)) / np.sin(a)


def step_coefficients(a: float, b: float, m: int) -> np.ndarray:
    """Chebyshev coefficients of the indicator of ``[a, b]`` on [-1, 1]."""
    ta, tb = np.arccos(np.clip(a, -1, 1)), np.arccos(np.clip(b, -1, 1))
    k = np.arange(1, m + 1)
    c = np.empty(m + 1)
    c[0] = (ta - tb) / np.pi
    c[1:] = 2.0 * (np.sin(k * ta) - np.sin(k * tb)) / (k * np.pi)
    return c


def chebyshev_trace(oracle: MatVecOracle, coeffs: np.ndarray, bounds, num_probes: int, seed: int) -> FilterEstimate:
    """Hutchinson estimate of ``Tr(sum_k c_k T_k(Hhat))`` with ``Hhat`` the mapped operator."""
    lo, hi = bounds
    center, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    n = oracle.dim
    probes = path_stream(seed, 11).integers(0, 2, size=(n, num_probes)).astype(float) * 2 - 1

    def mapped(v):
        return (oracle(v) - center * v) / half

    t_prev, t_cur = probes, mapped(probes)
    acc = coeffs[0] * t_prev
    if len(coeffs) > 1:
        acc = acc + coeffs[1] * t_cur
    for c in coeffs[2:]:
        t_prev, t_cur = t_cur, 2.0 * mapped(t_cur) - t_prev
        acc = acc + c * t_cur
    samples = np.einsum("ij,ij->j", probes, acc)
    se = float(samples.std(ddof=1) / np.sqrt(num_probes)) if num_probes > 1 else float("nan")
    return FilterEstimate(float(samples.mean()), se)


def estimate_rank_polyfilter(oracle: MatVecOracle, cfg: FilterConfig = FilterConfig(), seed: int = 0) -> FilterEstimate:
    """Count eigenvalues above ``threshold_eps * lambda_max`` through a damped Chebyshev step filter."""
    lo, hi = _psd_bounds(oracle, seed)
    if hi <= 0:
        return FilterEstimate(0.0, 0.0)
    thr = cfg.threshold_eps * oracle.extreme_eigenvalues(seed)[1]
    center, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    a = (thr - center) / half
    coeffs = step_coefficients(a, 1.0, cfg.degree) * jackson_coefficients(cfg.degree)
    return chebyshev_trace(oracle, coeffs, (lo, hi), cfg.num_probe_vectors, seed)


def exponential_filter_trace(
    oracle: MatVecOracle, t: float, num_probes: int = 300, seed: int = 0, tol: float = 1e-12, max_degree: int = 4000
) -> FilterEstimate:
    """Hutchinson estimate of ``Tr(I - exp(-H t))`` via a Chebyshev interpolant of ``1 - exp(-x t)``.

    The interpolation degree grows until the trailing coefficients fall below ``tol``.
    """
    if not t > 0:
        if t == 0:
            return FilterEstimate(0.0, 0.0)
        raise ValueError("t must be non-negative")
    lo, hi = _psd_bounds(oracle, seed)
    if hi <= 0:
        return FilterEstimate(0.0, 0.0)
    center, half = 0.5 * (hi + lo), 0.5 * (hi - lo)

    def fn(x):
        return -np.expm1(-(center + half * x) * t)

    deg = 16
    while True:
        coeffs = cheb.chebinterpolate(fn, deg)
        if np.max(np.abs(coeffs[-3:])) < tol or deg >= max_degree:
            break
        deg *= 2
    coeffs = np.trim_zeros(np.where(np.abs(coeffs) < tol * 1e-3, 0.0, coeffs), "b")
    if coeffs.size == 0:
        coeffs = np.zeros(1)
    return chebyshev_trace(oracle, coeffs, (lo, hi), num_probes, seed)
