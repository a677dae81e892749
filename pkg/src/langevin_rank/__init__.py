"""Preconditioned Langevin dynamics near stationary points and Hessian rank estimation."""

from .errors import (
    Diverged,
    DimensionMismatch,
    MismatchedSystems,
    NotPsd,
    NotSaddle,
    NotSettledWarning,
    NumericalFailure,
)
from .langevin_sim import EnsembleStats, GradientOracle, QuadraticOracle, SimConfig, Trajectory, ensemble_mean_loss, run, step
from .linear_net import LinearNet, LinearNetOracle, build_phi, hvp, init_at_global_minimum, loss_and_grad
from .matcore import KroneckerOp, SpdMat, SymMat, numeric_rank, sym_eig, sym_expm
from .ou_analytics import (
    OuSystem,
    compare_preconditioners,
    escape_time,
    escape_time_bound,
    expected_loss_at,
    loss_time_derivative,
    max_loss_preconditioner,
    rank_order_check,
    steady_state_loss,
)
from .polyfilter import FilterConfig, MatVecOracle, estimate_rank_polyfilter
from .rank_estimator import RankConfig, RankEstimate, estimate_rank, estimate_trace, make_adam_preconditioner

__version__ = "0.1.0"
