"""Deep linear networks ``x -> W_M ... W_1 x`` with the quadratic loss.

Parameters are the concatenation of the column-major vectorizations of
``W_1, ..., W_M``. With population moments the loss is

    L(theta) = Tr((W - A) Sigma_x (W - A)^T) + L_min,   W = W_M ... W_1,

where ``A = Sigma_xy Sigma_x^{-1}``. At any global minimum (``W = A``)
the Hessian is ``2 Phi Phi^T`` with Kronecker-structured blocks

    Phi_k = (W_{k-1} ... W_1 Sigma_x^{1/2}) ⊗ (W_M ... W_{k+1})^T,

empty products being identities.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import DimensionMismatch
from .langevin_sim import GradientOracle
from .matcore import KroneckerOp, SpdMat, random_orthogonal, spd_sqrt


def _chain(mats, rows: int) -> np.ndarray:
    """``mats[-1] @ ... @ mats[0]``; identity of size ``rows`` if empty."""
    return reduce(lambda acc, w: w @ acc, mats, np.eye(rows)) if mats else np.eye(rows)


@dataclass(frozen=True)
class LinearNet:
    weights: tuple  # W_1 .. W_M
    sigma_x: SpdMat
    target: np.ndarray  # A = Sigma_xy Sigma_x^{-1}, shape (d_y, d_x)
    min_loss: float = 0.0

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def d_x(self) -> int:
        return self.weights[0].shape[1]

    @property
    def d_y(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [w.shape for w in self.weights]

    @property
    def num_params(self) -> int:
        return sum(w.size for w in self.weights)

    def product(self) -> np.ndarray:
        return _chain(list(self.weights), self.d_x)

    def theta(self) -> np.ndarray:
        return pack(self.weights)

    def with_theta(self, theta) -> "LinearNet":
        return LinearNet(unpack(theta, self.shapes), self.sigma_x, self.target, self.min_loss)


def pack(weights) -> np.ndarray:
    return np.concatenate([np.asarray(w, dtype=float).ravel(order="F") for w in weights])


def unpack(theta, shapes) -> tuple:
    theta = np.asarray(theta, dtype=float)
    total = sum(r * c for r, c in shapes)
    if theta.shape != (total,):
        raise DimensionMismatch(f"theta has shape {theta.shape}, expected ({total},)")
    out, pos = [], 0
    for r, c in shapes:
        out.append(theta[pos : pos + r * c].reshape((r, c), order="F"))
        pos += r * c
    return tuple(out)


def random_cross_cov(d_x: int, d_y: int, rng: np.random.Generator, scale: str = "none") -> np.ndarray:
    """I.i.d. standard-normal ``Sigma_xy``; ``scale="unit"`` rescales it to unit spectral norm."""
    c = rng.standard_normal((d_y, d_x))
    if scale == "unit":
        c /= np.linalg.norm(c, 2)
    elif scale != "none":
        raise ValueError(f"unknown scale {scale!r}")
    return c


def init_at_global_minimum(
    depth: int,
    d_x: int,
    d_y: int,
    target,
    seed: int | np.random.Generator = 0,
    sigma_x: SpdMat | None = None,
    min_loss: float = 0.0,
) -> LinearNet:
    """Random global minimum ``W_M ... W_1 = target``.

    Starts from the balanced SVD split (every factor carries
    ``S^{1/M}``) and applies random orthogonal gauge rotations
    ``W_k -> R_k W_k R_{k-1}^T`` with ``R_0 = I``, ``R_M = I``. Hidden
    layers have width ``max(d_x, d_y)``.
    """
    a = np.asarray(target, dtype=float)
    if a.shape != (d_y, d_x):
        raise DimensionMismatch(f"target has shape {a.shape}, expected {(d_y, d_x)}")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sigma_x = sigma_x if sigma_x is not None else SpdMat.identity(d_x)
    if depth == 1:
        return LinearNet((a.copy(),), sigma_x, a.copy(), min_loss)

    h = max(d_x, d_y)
    r = min(d_x, d_y)
    u, s, vt = np.linalg.svd(a)  # u: d_y×d_y, vt: d_x×d_x
    root = s ** (1.0 / depth)
    d_h = np.ones(h)
    d_h[:r] = root
    rect = np.zeros((h, h))
    rect[:r, :r] = np.diag(root)
    if d_x >= d_y:
        first = np.diag(d_h) @ vt  # h×d_x, full rank
        last = u @ rect[:d_y, :]  # d_y×h
    else:
        first = rect[:, :d_x] @ vt  # h×d_x
        last = u @ np.diag(d_h)  # d_y×h, full rank
    weights = [first] + [np.diag(d_h) for _ in range(depth - 2)] + [last]

    rots = [np.eye(d_x)] + [random_orthogonal(h, rng) for _ in range(depth - 1)] + [np.eye(d_y)]
    weights = [rots[k + 1] @ w @ rots[k].T for k, w in enumerate(weights)]
    return LinearNet(tuple(weights), sigma_x, a.copy(), min_loss)


# --- Hessian structure ------------------------------------------------------


class PhiBlocks:
    """``Phi = [Phi_1; ...; Phi_M]`` with each block a :class:`KroneckerOp`.

    ``Phi_k`` maps the ``d_x d_y`` output space to the parameters of layer
    ``k``, so ``H = 2 Phi Phi^T`` acts on the full parameter vector.
    """

    def __init__(self, blocks: list[KroneckerOp]):
        self.blocks = blocks
        self.row_sizes = [b.shape[0] for b in blocks]
        self.inner = blocks[0].shape[1]
        self.num_params = sum(self.row_sizes)

    def apply_t(self, v: np.ndarray) -> np.ndarray:
        """``Phi^T v``."""
        out, pos = 0.0, 0
        for b, size in zip(self.blocks, self.row_sizes):
            out = out + b.rapply(v[pos : pos + size])
            pos += size
        return out

    def apply(self, u: np.ndarray) -> np.ndarray:
        """``Phi u``."""
        return np.concatenate([b.apply(u) for b in self.blocks], axis=0)

    def dense(self) -> np.ndarray:
        return np.vstack([b.dense() for b in self.blocks])

    def gram(self) -> np.ndarray:
        """``Phi^T Phi`` (``d_x d_y`` square), assembled block-wise from Kronecker factors."""
        return sum(np.kron(b.left.T @ b.left, b.right.T @ b.right) for b in self.blocks)

    def hessian(self) -> np.ndarray:
        phi = self.dense()
        return 2.0 * phi @ phi.T

    def hessian_nonzero_eigs(self) -> np.ndarray:
        """Eigenvalues of ``2 Phi^T Phi``: the spectrum of ``H`` without its null space."""
        return np.linalg.eigvalsh(2.0 * self.gram())


def build_phi(net: LinearNet) -> PhiBlocks:
    """Kronecker blocks of the Hessian at a global minimum (not checked)."""
    ws = list(net.weights)
    sx_half = spd_sqrt(net.sigma_x).a
    blocks = []
    for k in range(net.depth):
        below = _chain(ws[:k], net.d_x) @ sx_half  # W_{k-1} ... W_1 Sigma_x^{1/2}
        above = _chain(ws[k + 1 :], ws[k].shape[0])  # W_M ... W_{k+1}
        blocks.append(KroneckerOp(below, above.T))
    return PhiBlocks(blocks)


def hvp(phi: PhiBlocks, v) -> np.ndarray:
    """``H v = 2 Phi (Phi^T v)`` without forming ``H``; ``v`` may be ``(n,)`` or ``(n, k)``."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != phi.num_params:
        raise DimensionMismatch(f"vector length {v.shape[0]} != {phi.num_params}")
    return 2.0 * phi.apply(phi.apply_t(v))


# --- loss and gradient ------------------------------------------------------


class LinearNetOracle(GradientOracle):
    """Population quadratic loss of a linear net as a function of ``theta``."""

    def __init__(self, shapes, sigma_x: SpdMat, target, min_loss: float = 0.0):
        self.shapes = [tuple(s) for s in shapes]
        self.dim = sum(r * c for r, c in self.shapes)
        self.sigma_x = sigma_x
        self.target = np.asarray(target, dtype=float)
        self.min_loss = float(min_loss)
        d_x, d_y = self.shapes[0][1], self.shapes[-1][0]
        if self.target.shape != (d_y, d_x) or sigma_x.dim != d_x:
            raise DimensionMismatch("target / Sigma_x inconsistent with layer shapes")
        for (r0, _), (_, c1) in zip(self.shapes[:-1], self.shapes[1:]):
            if r0 != c1:
                raise DimensionMismatch("consecutive layer shapes do not chain")
        self._sx = sigma_x.a
        self._identity_sx = np.array_equal(self._sx, np.eye(d_x))

    def evaluate(self, theta):
        ws = unpack(theta, self.shapes)
        m = len(ws)
        # prefix[k] = W_k ... W_1 (prefix[0] = I), suffix[k] = W_M ... W_{k+1}
        prefix = [np.eye(self.shapes[0][1])]
        for w in ws:
            prefix.append(w @ prefix[-1])
        suffix = [None] * m
        acc = np.eye(self.shapes[-1][0])
        for k in range(m - 1, -1, -1):
            suffix[k] = acc
            acc = acc @ ws[k]
        resid = prefix[-1] - self.target
        rs = resid if self._identity_sx else resid @ self._sx
        loss = float(np.sum(rs * resid)) + self.min_loss
        e = 2.0 * rs  # dL/dW
        grads = [suffix[k].T @ e @ prefix[k].T for k in range(m)]
        return loss, pack(grads)


def loss_and_grad(net: LinearNet) -> LinearNetOracle:
    """Gradient oracle for the population loss defined by ``net``'s moments."""
    return LinearNetOracle(net.shapes, net.sigma_x, net.target, net.min_loss)


def moments_from_samples(x, y):
    """``(Sigma_x, Sigma_xy, mean ||y||^2)`` of a paired sample with rows as examples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch("x and y must have the same number of rows")
    n = x.shape[0]
    return x.T @ x / n, y.T @ x / n, float(np.sum(y * y) / n)


def oracle_from_samples(shapes, x, y) -> LinearNetOracle:
    """Oracle for ``L = (1/n) sum_j ||y_j - W x_j||^2`` via its sufficient statistics."""
    sxx, sxy, syy = moments_from_samples(x, y)
    sigma_x = SpdMat(sxx)
    a = np.linalg.solve(sxx, sxy.T).T
    min_loss = syy - float(np.sum((a @ sxx) * a))
    return LinearNetOracle(shapes, sigma_x, a, min_loss)
