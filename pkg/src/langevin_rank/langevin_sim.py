"""Euler-Maruyama simulation of preconditioned Langevin dynamics.

One step is

    theta_{k+1} = theta_k - eta G grad L(theta_k) + sqrt(eta) B n_{k+1},

with ``B = G Sigma^{1/2}`` (noise preconditioned together with the
gradient) or ``B = Sigma^{1/2}`` (``precondition_noise=False``: gradient
preconditioned only).

Noise comes from counter-based Philox streams keyed by ``(seed, index)``
so results do not depend on how work is scheduled across threads.
"""

from __future__ import annotations

import os
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, Diverged
from .matcore import SpdMat, SymMat, as_sym, spd_sqrt

DIVERGENCE_THRESHOLD = 1e12
THREADS_ENV = "LANGEVIN_RANK_THREADS"
_NOISE_CHUNK = 1024  # steps of noise drawn per call in single-path runs


def path_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent Philox stream for ``(seed, index)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "0") or 0)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


# --- gradient oracles -------------------------------------------------------


class GradientOracle(ABC):
    """Callback ``theta -> (loss, gradient)``; must be safe for concurrent reads."""

    dim: int

    @abstractmethod
    def evaluate(self, theta: np.ndarray) -> tuple[float, np.ndarray]: ...

    def loss(self, theta: np.ndarray) -> float:
        return self.evaluate(theta)[0]

    #: constant Hessian when the gradient is linear in theta (enables fused ensemble steps)
    linear_hessian: np.ndarray | None = None

    def evaluate_batch(self, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Row-wise evaluation of a ``(paths, dim)`` block; override when vectorizable."""
        out = [self.evaluate(row) for row in thetas]
        return np.array([o[0] for o in out]), np.stack([o[1] for o in out])


class QuadraticOracle(GradientOracle):
    """``L(theta) = theta^T H theta / 2 + offset``."""

    def __init__(self, h, offset: float = 0.0):
        self.h = as_sym(h)
        self.dim = self.h.dim
        self.offset = float(offset)
        self.linear_hessian = self.h.a

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise DimensionMismatch(f"theta has shape {theta.shape}, expected ({self.dim},)")
        g = self.h.a @ theta
        return 0.5 * float(theta @ g) + self.offset, g

    def evaluate_batch(self, thetas):
        g = thetas @ self.h.a
        return 0.5 * np.einsum("ij,ij->i", thetas, g) + self.offset, g


# --- configuration ----------------------------------------------------------


def _as_operator(m, dim: int | None = None):
    """Normalize a preconditioner/covariance to a matrix (SymMat) or a positive diagonal vector."""
    if isinstance(m, SymMat):
        return m
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 0:
        if dim is None:
            raise ValueError("scalar operator needs a dimension")
        arr = np.full(dim, float(arr))
    if arr.ndim == 1:
        if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
            raise ValueError("diagonal operator must be finite and positive")
        return arr
    return SpdMat(arr)


def _op_dim(op) -> int:
    return op.dim if isinstance(op, SymMat) else op.shape[0]


class _Linear:
    """Matrix or diagonal map applied to vectors and to row blocks."""

    def __init__(self, op):
        self.diag = None if isinstance(op, np.ndarray) and op.ndim == 2 else op
        self.mat = op if isinstance(op, np.ndarray) and op.ndim == 2 else None
        if self.mat is not None:
            self.mat_t = np.ascontiguousarray(self.mat.T)

    def vec(self, x):
        return self.diag * x if self.mat is None else self.mat @ x

    def rows(self, x):
        return x * self.diag if self.mat is None else x @ self.mat_t


@dataclass(frozen=True)
class SimConfig:
    eta: float
    num_steps: int
    preconditioner: object  # SpdMat or positive vector (diagonal)
    noise_cov: object  # SpdMat or positive vector (diagonal)
    seed: int = 0
    record_every: int = 1
    precondition_noise: bool = True
    divergence_threshold: float = DIVERGENCE_THRESHOLD
    dim: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if int(self.num_steps) < 1:
            raise ValueError("num_steps must be >= 1")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        g = _as_operator(self.preconditioner, self.dim)
        s = _as_operator(self.noise_cov, self.dim)
        if _op_dim(g) != _op_dim(s):
            raise DimensionMismatch("preconditioner and noise covariance dims differ")
        object.__setattr__(self, "preconditioner", g)
        object.__setattr__(self, "noise_cov", s)
        object.__setattr__(self, "dim", _op_dim(g))

    @cached_property
    def drift(self) -> _Linear:
        g = self.preconditioner
        return _Linear(g.a if isinstance(g, SymMat) else g)

    @cached_property
    def noise_map(self) -> _Linear:
        """``G Sigma^{1/2}`` (or ``Sigma^{1/2}``), computed once per config."""
        g, s = self.preconditioner, self.noise_cov
        s_half = spd_sqrt(s).a if isinstance(s, SymMat) else np.sqrt(s)
        if not self.precondition_noise:
            return _Linear(s_half)
        if isinstance(g, SymMat):
            return _Linear(g.a @ (s_half if s_half.ndim == 2 else np.diag(s_half)))
        if s_half.ndim == 1:
            return _Linear(g * s_half)
        return _Linear(g[:, None] * s_half)


# --- single path -------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray  # step indices of the recorded losses
    losses: np.ndarray
    final_theta: np.ndarray
    diverged: bool = False
    diverged_at: int | None = None


def _check_dims(theta, oracle, cfg):
    if theta.shape != (oracle.dim,) or cfg.dim != oracle.dim:
        raise DimensionMismatch(
            f"theta {theta.shape}, oracle dim {oracle.dim}, config dim {cfg.dim} disagree"
        )


def step(theta, oracle: GradientOracle, cfg: SimConfig, noise) -> np.ndarray:
    """One Euler-Maruyama update with externally supplied standard-normal ``noise``."""
    theta = np.asarray(theta, dtype=float)
    noise = np.asarray(noise, dtype=float)
    _check_dims(theta, oracle, cfg)
    if noise.shape != theta.shape:
        raise DimensionMismatch("noise and theta shapes differ")
    _, grad = oracle.evaluate(theta)
    return theta - cfg.eta * cfg.drift.vec(grad) + np.sqrt(cfg.eta) * cfg.noise_map.vec(noise)


def run(theta0, oracle: GradientOracle, cfg: SimConfig, path_index: int = 0) -> Trajectory:
    """Integrate ``cfg.num_steps`` steps from ``theta0``.

    Losses are recorded at steps ``0, r, 2r, ...`` (and never past a
    divergence). A run diverges when the loss is non-finite or exceeds
    ``cfg.divergence_threshold``.
    """
    theta = np.array(theta0, dtype=float)
    _check_dims(theta, oracle, cfg)
    n, k_tot, every = oracle.dim, int(cfg.num_steps), int(cfg.record_every)
    eta, sq_eta = cfg.eta, np.sqrt(cfg.eta)
    drift, noise_map = cfg.drift, cfg.noise_map
    limit = cfg.divergence_threshold
    rng = path_stream(cfg.seed, path_index)

    times, losses = [], []
    noise = np.empty((0, n))
    for k in range(k_tot + 1):
        loss, grad = oracle.evaluate(theta)
        if not (np.isfinite(loss) and loss <= limit):
            return Trajectory(np.array(times, dtype=int), np.array(losses), theta, True, k)
        if k % every == 0:
            times.append(k)
            losses.append(loss)
        if k == k_tot:
            break
        j = k % _NOISE_CHUNK
        if j == 0:
            noise = rng.standard_normal((_NOISE_CHUNK, n))
        theta = theta - eta * drift.vec(grad) + sq_eta * noise_map.vec(noise[j])
    return Trajectory(np.array(times, dtype=int), np.array(losses), theta)


# --- ensembles ----------------------------------------------------------------


@dataclass
class EnsembleStats:
    times: np.ndarray  # step indices
    mean_losses: np.ndarray
    stderr: np.ndarray
    num_paths: int


def _run_block(theta0, oracle, cfg, block, size):
    n, k_tot, every = oracle.dim, int(cfg.num_steps), int(cfg.record_every)
    eta, sq_eta = cfg.eta, np.sqrt(cfg.eta)
    drift, noise_map = cfg.drift, cfg.noise_map
    rng = path_stream(cfg.seed, block)
    chunk = max(1, (1 << 20) // (size * n))
    # linear gradients fold the drift into one matrix: x <- x (I - eta G H)^T + noise
    step_t = None
    if oracle.linear_hessian is not None:
        h = oracle.linear_hessian
        gh = drift.diag[:, None] * h if drift.mat is None else drift.mat @ h
        step_t = np.ascontiguousarray((np.eye(n) - eta * gh).T)
    x = np.tile(theta0, (size, 1))
    n_rec = k_tot // every + 1
    mean = np.empty(n_rec)
    m2 = np.empty(n_rec)
    noise = None
    for k in range(k_tot + 1):
        record = k % every == 0
        if record or step_t is None:
            losses, grads = oracle.evaluate_batch(x)
        if record:
            if not np.all(np.isfinite(losses)) or losses.max() > cfg.divergence_threshold:
                raise Diverged(f"ensemble block {block} diverged at step {k}")
            mu = losses.mean()
            mean[k // every] = mu
            m2[k // every] = np.sum((losses - mu) ** 2)
        if k == k_tot:
            break
        j = k % chunk
        if j == 0:
            # float32 variates are ~20% cheaper; the map and the state stay float64
            draws = rng.standard_normal((chunk * size, n), dtype=np.float32)
            noise = (sq_eta * noise_map.rows(draws)).reshape(chunk, size, n)
        if step_t is None:
            x = x - eta * drift.rows(grads) + noise[j]
        else:
            x = x @ step_t + noise[j]
    return mean, m2


def ensemble_mean_loss(
    theta0,
    oracle: GradientOracle,
    cfg: SimConfig,
    num_paths: int,
    block_size: int = 8192,
    threads: int | None = None,
) -> EnsembleStats:
    """Monte-Carlo mean and standard error of the loss over independent paths.

    Paths are split into fixed blocks of ``block_size``; block ``b`` draws
    its noise from ``path_stream(cfg.seed, b)``. Block statistics are
    merged in block order, so the result is bit-identical for any thread
    count.
    """
    if num_paths < 2:
        raise ValueError("num_paths must be >= 2")
    theta0 = np.array(theta0, dtype=float)
    _check_dims(theta0, oracle, cfg)
    sizes = [min(block_size, num_paths - s) for s in range(0, num_paths, block_size)]
    jobs = [(theta0, oracle, cfg, b, size) for b, size in enumerate(sizes)]
    workers = min(resolve_threads(threads), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda a: _run_block(*a), jobs))
    else:
        results = [_run_block(*a) for a in jobs]

    # Chan et al. pairwise merge, always in block order
    count, mean, m2 = 0, 0.0, 0.0
    for size, (bm, bm2) in zip(sizes, results):
        total = count + size
        delta = bm - mean
        mean = mean + delta * (size / total)
        m2 = m2 + bm2 + delta**2 * (count * size / total)
        count = total
    var = m2 / (count - 1)
    every = int(cfg.record_every)
    times = np.arange(0, int(cfg.num_steps) + 1, every)
    return EnsembleStats(times, mean, np.sqrt(var / count), count)
