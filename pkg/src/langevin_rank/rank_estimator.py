"""Hessian rank estimation from the steady-state loss of preconditioned LD.

With a fixed preconditioner ``G`` and noise covariance ``Sigma = sigma2 G^{-1}``
the stationary expected loss above a minimum equals ``sigma2 rank(H) / 4``,
so

    r_hat = (4 / sigma2) (<L(theta_t)>_{last K_avg steps} - L(theta_0)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import Diverged, NotSettledWarning
from .langevin_sim import GradientOracle, SimConfig, path_stream, run
from .matcore import SpdMat, SymMat

ADAM_EPS = 1e-8
SETTLE_TOL = 0.05


@dataclass(frozen=True)
class RankConfig:
    sigma2: float
    k_tot: int
    k_avg: int
    eta: float
    preconditioner: object = None  # None (identity), positive vector (diagonal) or SpdMat
    seed: int = 0
    settle_tol: float = SETTLE_TOL

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if not 1 <= self.k_avg <= self.k_tot:
            raise ValueError("need 1 <= k_avg <= k_tot")
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def preconditioner_mode(self) -> str:
        g = self.preconditioner
        if g is None:
            return "identity"
        return "matrix" if isinstance(g, SymMat) else "diagonal"

    def sim_config(self, dim: int) -> SimConfig:
        g = self.preconditioner
        if g is None:
            g = np.ones(dim)
        if isinstance(g, SymMat):
            noise = SpdMat(self.sigma2 * g.inv().a)
        else:
            g = np.asarray(g, dtype=float)
            noise = self.sigma2 / g
        return SimConfig(
            eta=self.eta,
            num_steps=self.k_tot,
            preconditioner=g,
            noise_cov=noise,
            seed=self.seed,
        )


@dataclass
class RankEstimate:
    avg_loss: float
    base_loss: float
    r_hat: float
    r_rounded: int
    settled: bool
    stderr: float  # of r_hat, from batch means over the averaging window
    sigma2: float
    k_tot: int
    k_avg: int
    loss_series: np.ndarray = field(repr=False)


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def _batch_stderr(x: np.ndarray, batches: int = 20) -> float:
    if x.size < 2 * batches:
        return float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else float("nan")
    means = np.array([b.mean() for b in np.array_split(x, batches)])
    return float(means.std(ddof=1) / np.sqrt(batches))


def estimate_rank(theta0, oracle: GradientOracle, cfg: RankConfig) -> RankEstimate:
    """Run LD for ``k_tot`` steps from ``theta0`` and turn the windowed mean loss into a rank.

    Raises :class:`Diverged` (with the partial trajectory attached) when the
    run blows up, and warns with :class:`NotSettledWarning` when the two
    halves of the averaging window differ by more than ``settle_tol``.
    """
    theta0 = np.asarray(theta0, dtype=float)
    base = oracle.loss(theta0)
    traj = run(theta0, oracle, cfg.sim_config(oracle.dim))
    if traj.diverged:
        raise Diverged(f"LD diverged at step {traj.diverged_at}", traj)
    window = traj.losses[-cfg.k_avg :]
    avg = float(window.mean())
    r_hat = 4.0 / cfg.sigma2 * (avg - base)

    half = window.size // 2
    settled = True
    if half:
        first, second = window[:half].mean() - base, window[half:].mean() - base
        scale = max(abs(first), abs(second))
        settled = bool(scale == 0 or abs(first - second) <= cfg.settle_tol * scale)
    if not settled:
        warnings.warn(
            f"averaging window not stationary (halves {first:.4g} vs {second:.4g})",
            NotSettledWarning,
            stacklevel=2,
        )
    return RankEstimate(
        avg_loss=avg,
        base_loss=base,
        r_hat=r_hat,
        r_rounded=round_half_away(max(r_hat, 0.0)),
        settled=settled,
        stderr=4.0 / cfg.sigma2 * _batch_stderr(window),
        sigma2=cfg.sigma2,
        k_tot=cfg.k_tot,
        k_avg=cfg.k_avg,
        loss_series=traj.losses,
    )


@dataclass(frozen=True)
class TraceEstimate:
    value: float
    stderr: float
    num_probes: int

    def __float__(self):
        return self.value


def estimate_trace(
    theta0, oracle: GradientOracle, eta: float, num_probes: int, seed: int = 0
) -> TraceEstimate:
    """Hessian trace from first-step loss increments of LD with ``G = Sigma = I``.

    Each probe takes ``theta_1 = theta_0 + sqrt(eta) n`` and contributes
    ``2 (L(theta_1) - L(theta_0)) / eta``, whose mean is ``n^T H n`` for a
    quadratic loss.
    """
    if num_probes < 1 or not eta > 0:
        raise ValueError("need num_probes >= 1 and eta > 0")
    theta0 = np.asarray(theta0, dtype=float)
    base = oracle.loss(theta0)
    probes = path_stream(seed, 0).standard_normal((num_probes, oracle.dim))
    losses, _ = oracle.evaluate_batch(theta0 + np.sqrt(eta) * probes)
    samples = 2.0 * (losses - base) / eta
    se = float(samples.std(ddof=1) / np.sqrt(num_probes)) if num_probes > 1 else float("nan")
    return TraceEstimate(float(samples.mean()), se, num_probes)


# --- Adam-style preconditioner ----------------------------------------------


def make_adam_preconditioner(second_moments, epsilon: float = ADAM_EPS) -> SpdMat:
    """``G = diag(1 / (sqrt(v) + epsilon))``."""
    v = np.asarray(second_moments, dtype=float)
    if np.any(v < 0) or not epsilon > 0:
        raise ValueError("second moments must be >= 0 and epsilon > 0")
    return SpdMat(np.diag(1.0 / (np.sqrt(v) + epsilon)))


def adam_second_moments(
    oracle: GradientOracle,
    theta0,
    steps: int = 1000,
    lr: float = 1e-3,
    beta2: float = 0.999,
    grad_noise: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Bias-corrected second-moment estimate from a momentum-free Adam pre-pass.

    ``grad_noise`` adds i.i.d. Gaussian noise to each gradient, standing in
    for mini-batch noise; at an exact minimum without it the moments are zero.
    """
    theta = np.array(theta0, dtype=float)
    v = np.zeros_like(theta)
    rng = path_stream(seed, 1)
    for k in range(1, steps + 1):
        _, g = oracle.evaluate(theta)
        if grad_noise:
            g = g + grad_noise * rng.standard_normal(theta.shape)
        v = beta2 * v + (1 - beta2) * g * g
        v_hat = v / (1 - beta2**k)
        theta = theta - lr * g / (np.sqrt(v_hat) + ADAM_EPS)
    return v / (1 - beta2**steps)
