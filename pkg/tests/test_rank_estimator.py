import warnings

import numpy as np
import pytest

from langevin_rank import ou_analytics as ou
from langevin_rank.errors import Diverged, NotSettledWarning
from langevin_rank.langevin_sim import QuadraticOracle
from langevin_rank.matcore import SpdMat, SymMat, random_psd, random_spd
from langevin_rank.rank_estimator import (
    RankConfig,
    adam_second_moments,
    estimate_rank,
    estimate_trace,
    make_adam_preconditioner,
    round_half_away,
)


def diag_quadratic(n, rank, rng):
    lam = np.zeros(n)
    lam[rng.choice(n, rank, replace=False)] = rng.uniform(1.0, 2.0, rank)
    return QuadraticOracle(np.diag(lam))


def quiet_estimate(theta0, oracle, cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotSettledWarning)
        return estimate_rank(theta0, oracle, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        RankConfig(0.0, 10, 5, 1e-3)
    with pytest.raises(ValueError):
        RankConfig(1.0, 10, 11, 1e-3)
    with pytest.raises(ValueError):
        RankConfig(1.0, 10, 5, 0.0)


def test_preconditioner_modes():
    assert RankConfig(1.0, 10, 5, 1e-3).preconditioner_mode == "identity"
    assert RankConfig(1.0, 10, 5, 1e-3, np.ones(3)).preconditioner_mode == "diagonal"
    assert RankConfig(1.0, 10, 5, 1e-3, SpdMat.identity(3)).preconditioner_mode == "matrix"


def test_sim_config_sets_sigma_from_g(rng):
    g = random_spd(4, rng)
    sim = RankConfig(0.3, 10, 5, 1e-3, g).sim_config(4)
    assert np.allclose(sim.noise_cov.a @ g.a, 0.3 * np.eye(4))
    sim = RankConfig(0.3, 10, 5, 1e-3, np.array([1.0, 2.0])).sim_config(2)
    assert np.allclose(sim.noise_cov * sim.preconditioner, 0.3)


@pytest.mark.parametrize("x,expected", [(2.5, 3), (3.5, 4), (2.49, 2), (0.5, 1), (-0.5, -1), (0.0, 0)])
def test_round_half_away(x, expected):
    assert round_half_away(x) == expected


def test_flat_loss_gives_zero():
    est = estimate_rank(np.zeros(5), QuadraticOracle(np.zeros((5, 5)), offset=1.5), RankConfig(1e-2, 200, 100, 1e-3))
    assert est.r_hat == 0.0 and est.r_rounded == 0 and est.base_loss == 1.5
    assert est.settled


def test_estimate_fields_consistent(rng):
    oracle = diag_quadratic(10, 4, rng)
    cfg = RankConfig(1e-2, 4000, 3000, 1e-2, seed=3)
    est = quiet_estimate(np.zeros(10), oracle, cfg)
    window = est.loss_series[-3000:]
    assert est.avg_loss == pytest.approx(window.mean(), rel=1e-15)
    assert est.r_hat == 4 / cfg.sigma2 * (est.avg_loss - est.base_loss)
    assert est.r_rounded == round_half_away(max(est.r_hat, 0))
    assert len(est.loss_series) == cfg.k_tot + 1
    assert est.stderr > 0


@pytest.mark.slow
def test_synthetic_rank_seven():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        oracle = diag_quadratic(20, 7, rng)
        est = quiet_estimate(np.zeros(20), oracle, RankConfig(1e-2, 150000, 100000, 1e-3, seed=seed))
        hits += est.r_rounded == 7
    # per-seed sd of r_hat is ~0.3 here, so an occasional miss is expected
    assert hits >= 9


def test_diverged_carries_trajectory():
    oracle = QuadraticOracle(np.diag([1.0, 100.0]))
    with pytest.raises(Diverged) as info:
        estimate_rank(np.zeros(2), oracle, RankConfig(1e-2, 1000, 100, 0.05))
    traj = info.value.trajectory
    assert traj.diverged and traj.diverged_at < 1000


def test_not_settled_warns():
    # far from saturation: lam eta K = 1e-3 * 1e-3 * 2000
    oracle = QuadraticOracle(np.diag([1e-3, 1e-3]))
    with pytest.warns(NotSettledWarning):
        est = estimate_rank(np.zeros(2), oracle, RankConfig(1e-2, 2000, 1000, 1e-3))
    assert not est.settled


@pytest.mark.slow
def test_preconditioner_invariance(rng):
    h = random_psd(16, 6, rng, eig_range=(1.0, 2.0))
    oracle = QuadraticOracle(h)
    base = quiet_estimate(np.zeros(16), oracle, RankConfig(1e-2, 100000, 80000, 2e-3, seed=1))
    g = rng.uniform(0.5, 1.5, 16)
    diag = quiet_estimate(np.zeros(16), oracle, RankConfig(1e-2, 100000, 80000, 2e-3, g, seed=2))
    full = quiet_estimate(np.zeros(16), oracle, RankConfig(1e-2, 100000, 80000, 2e-3, random_spd(16, rng, cond=3), seed=3))
    assert base.r_rounded == diag.r_rounded == full.r_rounded == 6


@pytest.mark.slow
def test_average_matches_steady_state_closed_form(rng):
    h = random_psd(12, 5, rng, eig_range=(1.0, 2.0))
    g = SpdMat(np.diag(rng.uniform(0.5, 1.5, 12)))
    sigma2 = 1e-2
    est = quiet_estimate(np.zeros(12), QuadraticOracle(h), RankConfig(sigma2, 150000, 100000, 1e-3, g, seed=5))
    steady = ou.steady_state_loss(ou.OuSystem(g, h, SpdMat(sigma2 * g.inv().a)))
    assert est.avg_loss - est.base_loss == pytest.approx(steady, rel=0.05)


@pytest.mark.slow
def test_sigma2_linearity(rng):
    oracle = diag_quadratic(12, 5, rng)
    a = quiet_estimate(np.zeros(12), oracle, RankConfig(1e-2, 100000, 80000, 2e-3, seed=7))
    b = quiet_estimate(np.zeros(12), oracle, RankConfig(2e-2, 100000, 80000, 2e-3, seed=7))
    assert (b.avg_loss - b.base_loss) == pytest.approx(2 * (a.avg_loss - a.base_loss), rel=0.05)
    assert a.r_rounded == b.r_rounded == 5


@pytest.mark.slow
@pytest.mark.parametrize("c", [0.01, 1.0])
def test_sigma2_scale_guidance(c):
    rng = np.random.default_rng(17)
    n = 16
    oracle = QuadraticOracle(random_psd(n, 8, rng, eig_range=(1.0, 2.0)))
    est = quiet_estimate(np.zeros(n), oracle, RankConfig(c / n, 100000, 80000, 2e-3, seed=2))
    assert est.r_rounded == 8


def test_base_loss_subtracted():
    # theta0 at a minimum with nonzero loss value
    oracle = QuadraticOracle(np.diag([1.0, 0.0]), offset=3.0)
    est = quiet_estimate(np.zeros(2), oracle, RankConfig(1e-2, 20000, 15000, 1e-2, seed=0))
    assert est.base_loss == 3.0
    assert est.r_rounded == 1


# --- trace -------------------------------------------------------------------


def test_trace_identity():
    est = estimate_trace(np.zeros(10), QuadraticOracle(np.eye(10)), 1e-4, 10000, seed=0)
    assert abs(est.value - 10) <= 3 * est.stderr
    assert float(est) == est.value and est.num_probes == 10000


def test_trace_zero_hessian():
    est = estimate_trace(np.zeros(4), QuadraticOracle(np.zeros((4, 4))), 1e-4, 100)
    assert est.value == 0.0


def test_trace_random_psd(rng):
    h = random_psd(16, 16, rng)
    est = estimate_trace(np.zeros(16), QuadraticOracle(h), 1e-4, 10000, seed=1)
    exact = np.linalg.eigvalsh(h.a).sum()
    assert abs(est.value - exact) <= 3 * est.stderr


def test_trace_validation():
    with pytest.raises(ValueError):
        estimate_trace(np.zeros(2), QuadraticOracle(np.eye(2)), 1e-4, 0)


# --- Adam ----------------------------------------------------------------------


def test_adam_preconditioner_examples():
    assert np.allclose(make_adam_preconditioner([0.0, 0.0], 1.0).a, np.eye(2))
    assert np.allclose(make_adam_preconditioner([4.0, 0.0], 1.0).a, np.diag([1 / 3, 1.0]))
    with pytest.raises(ValueError):
        make_adam_preconditioner([-1.0])


def test_adam_moments_zero_at_minimum_without_noise():
    v = adam_second_moments(QuadraticOracle(np.eye(3)), np.zeros(3), steps=10)
    assert np.all(v == 0)


@pytest.mark.slow
def test_adam_preconditioner_keeps_rank(rng):
    oracle = diag_quadratic(20, 7, rng)
    v = adam_second_moments(oracle, np.zeros(20), steps=1000, grad_noise=1.0, seed=3)
    g = make_adam_preconditioner(v)
    assert np.all(np.diag(g.a) > 0.5) and np.all(np.diag(g.a) < 2.0)
    ident = quiet_estimate(np.zeros(20), oracle, RankConfig(1e-2, 150000, 100000, 1e-3, seed=4))
    adam = quiet_estimate(np.zeros(20), oracle, RankConfig(1e-2, 150000, 100000, 1e-3, np.diag(g.a).copy(), seed=4))
    assert ident.r_rounded == adam.r_rounded == 7
