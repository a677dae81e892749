"""Independent reference implementations used only by the tests."""

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm

from langevin_rank.matcore import SpdMat, SymMat, random_orthogonal, random_spd


def lyapunov_expected_loss(g, h, sigma, t):
    """``1/2 Tr(H C(t))`` with ``C(t) = int_0^t e^{-GHs} G Sigma G e^{-HGs} ds`` by adaptive quadrature."""
    g, h, sigma = np.asarray(g), np.asarray(h), np.asarray(sigma)
    a = g @ h
    b = g @ sigma @ g
    if t == 0:
        return 0.0
    cov, _ = quad_vec(lambda s: expm(-a * s) @ b @ expm(-a.T * s), 0.0, t, epsabs=1e-13, epsrel=1e-11)
    return 0.5 * float(np.trace(h @ cov))


def random_system_parts(n, rng, rank=None, saddle=False):
    """Random (G, H, Sigma) with PSD H of the given rank, or a saddle."""
    g, s = random_spd(n, rng), random_spd(n, rng)
    q = random_orthogonal(n, rng)
    lam = rng.uniform(0.3, 2.0, size=n)
    if rank is not None:
        lam[rank:] = 0.0
    if saddle:
        lam[0] = -rng.uniform(0.2, 1.0)
    return g, SymMat((q * lam) @ q.T), s


def random_unit_frobenius_spd(n, rng):
    x = rng.standard_normal((n, n))
    m = x @ x.T + 1e-3 * np.eye(n)
    return SpdMat(m / np.linalg.norm(m))
