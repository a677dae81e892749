"""Command-line experiments.

Every subcommand reads an optional JSON config (``--config``), applies
flag overrides, and writes a CSV whose first line is ``#`` followed by the
resolved config as JSON. Exit codes: 0 success, 2 config error, 3
divergence, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import ou_analytics as ou
from .errors import Diverged, NotPsd, NotSaddle, NumericalFailure
from .langevin_sim import QuadraticOracle, SimConfig, ensemble_mean_loss, run
from .linear_net import build_phi, hvp, init_at_global_minimum, loss_and_grad, random_cross_cov
from .matcore import SpdMat, SymMat, numeric_rank, random_orthogonal, random_psd, random_spd
from .polyfilter import FilterConfig, MatVecOracle, estimate_rank_polyfilter
from .rank_estimator import (
    RankConfig,
    adam_second_moments,
    estimate_rank,
    estimate_trace,
    make_adam_preconditioner,
)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_NUMERICAL = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _opt(default, help_text):
    if isinstance(default, list):
        return field(default_factory=lambda: list(default), metadata={"help": help_text})
    return field(default=default, metadata={"help": help_text})


@dataclass
class Output:
    """Rows of a CSV result plus optional ``#`` footer entries."""

    columns: list
    rows: list = field(default_factory=list)
    footer: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK

    def render(self, config: dict) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps(config, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        if self.footer:
            buf.write("# footer " + json.dumps({k: _json_val(v) for k, v in self.footer.items()}) + "\n")
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else v


def _json_val(v):
    if isinstance(v, (float, np.floating)) and not math.isfinite(v):
        return "none"
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


# --- experiment configs -----------------------------------------------------


@dataclass
class LossCurveConfig:
    model: str = _opt("linear_net", "linear_net or quadratic")
    d: int = _opt(8, "input/output dimension of the linear net")
    depth: int = _opt(3, "number of layers")
    quadratic_eigs: list = _opt([], "Hessian eigenvalues for model=quadratic (diagonal H)")
    eta: float = _opt(1e-4, "stepsize")
    sigma2: float = _opt(2e-5, "noise power; Sigma = sigma2 I with G = I")
    num_steps: int = _opt(15000, "number of LD steps")
    record_every: int = _opt(100, "recording interval in steps")
    num_paths: int = _opt(1, "1 = single trajectory, >1 = ensemble mean")
    seed: int = _opt(0, "random seed")
    out: str = _opt("-", "output CSV path ('-' for stdout)")


@dataclass
class RankCmdConfig:
    model: str = _opt("quadratic", "quadratic or linear_net")
    n: int = _opt(20, "dimension of the synthetic quadratic")
    rank: int = _opt(7, "rank of the synthetic quadratic Hessian")
    eig_low: float = _opt(1.0, "smallest nonzero Hessian eigenvalue (quadratic)")
    eig_high: float = _opt(2.0, "largest Hessian eigenvalue (quadratic)")
    d: int = _opt(8, "linear net dimension")
    depth: int = _opt(5, "linear net depth")
    preconditioner: str = _opt("identity", "identity or adam")
    adam_steps: int = _opt(1000, "Adam second-moment pre-pass steps")
    adam_grad_noise: float = _opt(1.0, "gradient noise std during the Adam pre-pass")
    eta: float = _opt(1e-3, "stepsize")
    sigma2: float = _opt(1e-2, "noise power")
    k_tot: int = _opt(150000, "total LD steps")
    k_avg: int = _opt(100000, "averaging window (last steps)")
    seed: int = _opt(0, "random seed")
    out: str = _opt("-", "output CSV path")


@dataclass
class RankSweepConfig:
    dims: list = _opt([8, 16], "network dimensions d (d_x = d_y = d)")
    depth: int = _opt(5, "network depth")
    trials: int = _opt(20, "random global minima per dimension")
    eta: float = _opt(1e-4, "stepsize")
    sigma2: float = _opt(2e-5, "noise power")
    k_tot: int = _opt(15000, "total LD steps")
    k_avg: int = _opt(10000, "averaging window")
    polyfilter: bool = _opt(True, "also run the polynomial-filter baseline")
    degree: int = _opt(50, "baseline polynomial degree")
    probes: int = _opt(300, "baseline probe vectors")
    threshold_eps: float = _opt(1e-3, "baseline step threshold as a fraction of lambda_max")
    seed: int = _opt(0, "random seed")
    out: str = _opt("-", "output CSV path")


@dataclass
class SaddleConfig:
    n: int = _opt(2, "dimension")
    h_eigs: list = _opt([1.0, -1.0], "Hessian eigenvalues (empty = random saddle with lambda_min -0.5)")
    g: str = _opt("identity", "identity or random")
    sigma: str = _opt("identity", "identity or random")
    num_points: int = _opt(50, "time grid points")
    t_max: float = _opt(0.0, "grid end (0 = twice the escape-time bound)")
    num_paths: int = _opt(2000, "ensemble paths (0 = skip simulation)")
    eta: float = _opt(1e-3, "simulation stepsize")
    seed: int = _opt(0, "random seed")
    out: str = _opt("-", "output CSV path")


@dataclass
class PrecondCompareConfig:
    n: int = _opt(4, "dimension of random Sigma")
    num_samples: int = _opt(200, "number of random Sigma")
    scale_low: float = _opt(1.5, "random Sigma are scaled so that Tr(Sigma)/n ~ U(scale_low, scale_high)")
    scale_high: float = _opt(4.0, "see scale_low")
    sigmas: list = _opt([], "explicit Sigma list (matrices or diagonals); overrides sampling")
    seed: int = _opt(0, "random seed")
    out: str = _opt("-", "output CSV path")


@dataclass
class TraceConfig:
    n: int = _opt(16, "dimension")
    rank: int = _opt(16, "Hessian rank")
    eta: float = _opt(1e-4, "probe step size")
    num_probes: int = _opt(10000, "number of probes")
    seed: int = _opt(0, "random seed")
    out: str = _opt("-", "output CSV path")


@dataclass
class InstabilityConfig:
    n: int = _opt(20, "dimension")
    cond: float = _opt(1e6, "condition number of the diagonal scaling of H")
    top_curvature: float = _opt(20.0, "largest diagonal scale of H")
    eta_factor: float = _opt(3.0, "eta = eta_factor / lambda_max(H) unless eta is given")
    eta: float = _opt(0.0, "explicit stepsize (0 = use eta_factor)")
    sigma2: float = _opt(1e-3, "noise power")
    k_tot: int = _opt(20000, "total LD steps")
    k_avg: int = _opt(10000, "averaging window")
    seed: int = _opt(0, "random seed")
    out: str = _opt("-", "output CSV path")


def _validate(cfg):
    pos = ("eta", "sigma2", "num_steps", "record_every", "k_tot", "k_avg", "trials", "n", "d", "depth", "degree", "probes", "num_probes", "num_samples")
    for name in pos:
        if hasattr(cfg, name):
            v = getattr(cfg, name)
            if name == "eta" and isinstance(cfg, InstabilityConfig):
                if v < 0:
                    raise ConfigError("eta must be >= 0")
                continue
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
    if hasattr(cfg, "k_avg") and cfg.k_avg > cfg.k_tot:
        raise ConfigError("k_avg must not exceed k_tot")
    if isinstance(cfg, RankSweepConfig) and not cfg.dims:
        raise ConfigError("dims must be a non-empty list")
    if isinstance(cfg, LossCurveConfig) and cfg.model not in ("linear_net", "quadratic"):
        raise ConfigError(f"unknown model {cfg.model!r}")
    if isinstance(cfg, LossCurveConfig) and cfg.model == "quadratic" and not cfg.quadratic_eigs:
        raise ConfigError("model=quadratic needs quadratic_eigs")
    if isinstance(cfg, RankCmdConfig):
        if cfg.model not in ("quadratic", "linear_net") or cfg.preconditioner not in ("identity", "adam"):
            raise ConfigError("bad model/preconditioner")
        if not 0 <= cfg.rank <= cfg.n:
            raise ConfigError("rank must lie in [0, n]")
    if isinstance(cfg, SaddleConfig):
        if cfg.g not in ("identity", "random") or cfg.sigma not in ("identity", "random"):
            raise ConfigError("g and sigma must be 'identity' or 'random'")
        if cfg.h_eigs and len(cfg.h_eigs) != cfg.n:
            raise ConfigError("h_eigs must have n entries")
    if not 0 <= int(cfg.seed) < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")


def load_config(cls, path=None, overrides=None):
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        cfg = cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    _validate(cfg)
    return cfg


# --- experiments ------------------------------------------------------------


def cmd_loss_curve(cfg: LossCurveConfig) -> Output:
    rng = np.random.default_rng(cfg.seed)
    if cfg.model == "linear_net":
        net = init_at_global_minimum(cfg.depth, cfg.d, cfg.d, random_cross_cov(cfg.d, cfg.d, rng), seed=rng)
        oracle, theta0 = loss_and_grad(net), net.theta()
        eigs = build_phi(net).hessian_nonzero_eigs()
    else:
        eigs = np.asarray(cfg.quadratic_eigs, dtype=float)
        oracle, theta0 = QuadraticOracle(np.diag(eigs)), np.zeros(eigs.size)
    n = oracle.dim
    base = oracle.loss(theta0)
    top = np.abs(eigs).max() if eigs.size else 0.0
    active = eigs[eigs > ou.ZERO_TOL * top] if top > 0 else eigs[:0]
    sim = SimConfig(
        eta=cfg.eta,
        num_steps=cfg.num_steps,
        preconditioner=np.ones(n),
        noise_cov=np.full(n, cfg.sigma2),
        seed=cfg.seed,
        record_every=cfg.record_every,
    )
    out = Output(["step", "simulated_loss", "theory_loss_eq5", "theory_steady_eq6"])
    steady = 0.25 * cfg.sigma2 * active.size + base
    if cfg.num_paths > 1:
        stats = ensemble_mean_loss(theta0, oracle, sim, cfg.num_paths)
        steps, sim_losses = stats.times, stats.mean_losses
    else:
        traj = run(theta0, oracle, sim)
        steps, sim_losses = traj.times, traj.losses
        if traj.diverged:
            out.exit_code = EXIT_DIVERGED
            out.footer = {"diverged_at": int(traj.diverged_at)}
    theory = ou.expected_loss_from_spectrum(active, cfg.sigma2, steps * cfg.eta) + base
    out.rows = [[int(k), s, th, steady] for k, s, th in zip(steps, sim_losses, np.atleast_1d(theory))]
    return out


def _synthetic_quadratic(n, rank, low, high, rng):
    lam = np.zeros(n)
    lam[:rank] = rng.uniform(low, high, size=rank)
    return np.diag(lam)


def cmd_rank(cfg: RankCmdConfig) -> Output:
    rng = np.random.default_rng(cfg.seed)
    if cfg.model == "quadratic":
        h = _synthetic_quadratic(cfg.n, cfg.rank, cfg.eig_low, cfg.eig_high, rng)
        oracle, theta0, true_rank = QuadraticOracle(h), np.zeros(cfg.n), numeric_rank(h)
    else:
        net = init_at_global_minimum(cfg.depth, cfg.d, cfg.d, random_cross_cov(cfg.d, cfg.d, rng), seed=rng)
        oracle, theta0, true_rank = loss_and_grad(net), net.theta(), cfg.d * cfg.d
    g = None
    if cfg.preconditioner == "adam":
        v = adam_second_moments(oracle, theta0, steps=cfg.adam_steps, grad_noise=cfg.adam_grad_noise, seed=cfg.seed)
        g = np.diag(make_adam_preconditioner(v).a).copy()
    rc = RankConfig(cfg.sigma2, cfg.k_tot, cfg.k_avg, cfg.eta, g, cfg.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = estimate_rank(theta0, oracle, rc)
    cols = ["model", "true_rank", "r_hat", "r_rounded", "stderr", "avg_loss", "base_loss", "settled"]
    return Output(cols, [[cfg.model, true_rank, est.r_hat, est.r_rounded, est.stderr, est.avg_loss, est.base_loss, est.settled]])


def linear_net_trial(d, depth, rng):
    """Random global minimum of a square linear net, with its oracle and HVP oracle."""
    net = init_at_global_minimum(depth, d, d, random_cross_cov(d, d, rng), seed=rng)
    phi = build_phi(net)
    return net, loss_and_grad(net), MatVecOracle(lambda v: hvp(phi, v), phi.num_params)


def cmd_rank_sweep(cfg: RankSweepConfig) -> Output:
    cols = ["kind", "dim", "trial", "true_rank", "r_hat_ours", "r_rounded_ours", "r_polyfilter", "nrmse_ours", "nrmse_polyfilter"]
    out = Output(cols)
    fcfg = FilterConfig(cfg.degree, cfg.probes, cfg.threshold_eps)
    for dim in cfg.dims:
        rng = np.random.default_rng([cfg.seed, int(dim)])
        ours, poly = [], []
        for trial in range(cfg.trials):
            net, oracle, mv = linear_net_trial(int(dim), cfg.depth, rng)
            rc = RankConfig(cfg.sigma2, cfg.k_tot, cfg.k_avg, cfg.eta, None, int(rng.integers(2**63)))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                est = estimate_rank(net.theta(), oracle, rc)
            r = est.r_hat
            p = estimate_rank_polyfilter(mv, fcfg, seed=int(rng.integers(2**63))).value if cfg.polyfilter else None
            ours.append(r)
            poly.append(p)
            out.rows.append(["trial", dim, trial, dim * dim, r, est.r_rounded, p, None, None])
        true = dim * dim
        nrmse = lambda xs: float(np.sqrt(np.mean((np.asarray(xs) - true) ** 2)) / true)  # noqa: E731
        out.rows.append(["summary", dim, None, true, float(np.mean(ours)), None, float(np.mean(poly)) if cfg.polyfilter else None,
                         nrmse(ours), nrmse(poly) if cfg.polyfilter else None])
    return out


def _saddle_system(cfg: SaddleConfig, rng) -> ou.OuSystem:
    n = cfg.n
    g = random_spd(n, rng) if cfg.g == "random" else SpdMat.identity(n)
    s = random_spd(n, rng) if cfg.sigma == "random" else SpdMat.identity(n)
    if cfg.h_eigs:
        lam = np.asarray(cfg.h_eigs, dtype=float)
        q = np.eye(n)
    else:
        lam = rng.uniform(0.2, 2.0, size=n)
        lam[0] = -0.5
        q = random_orthogonal(n, rng)
    return ou.OuSystem(g, SymMat((q * lam) @ q.T), s)


def cmd_saddle(cfg: SaddleConfig) -> Output:
    rng = np.random.default_rng(cfg.seed)
    sys_ = _saddle_system(cfg, rng)
    try:
        bound = ou.escape_time_bound(sys_)
        t_cross = ou.escape_time(sys_)
    except NotSaddle:
        bound, t_cross = float("nan"), float("nan")
    t_max = cfg.t_max if cfg.t_max > 0 else (2 * bound if math.isfinite(bound) else 5.0)
    every = max(1, int(round(t_max / cfg.num_points / cfg.eta)))
    steps = np.arange(0, cfg.num_points + 1) * every
    ts = steps * cfg.eta
    closed = ou.expected_loss_at(sys_, ts)
    ens = [None] * len(ts)
    if cfg.num_paths >= 2:
        sim = SimConfig(cfg.eta, int(steps[-1]), sys_.g, sys_.sigma, cfg.seed, every)
        ens = ensemble_mean_loss(np.zeros(cfg.n), QuadraticOracle(sys_.h), sim, cfg.num_paths).mean_losses
    out = Output(["t", "closed_form_loss", "ensemble_loss"], [[t, c, e] for t, c, e in zip(ts, closed, ens)])
    out.footer = {"t_cross": t_cross, "bound_eq17": bound}
    if math.isfinite(bound) and not t_cross <= bound:
        raise NumericalFailure(f"crossing time {t_cross} exceeds bound {bound}")
    return out


def _parse_sigma(s, n_hint=None) -> SpdMat:
    a = np.asarray(s, dtype=float)
    return SpdMat(np.diag(a) if a.ndim == 1 else a)


def cmd_precond_compare(cfg: PrecondCompareConfig) -> Output:
    if cfg.sigmas:
        try:
            sigmas = [_parse_sigma(s) for s in cfg.sigmas]
        except ValueError as exc:
            raise ConfigError(f"bad sigma: {exc}") from exc
    else:
        rng = np.random.default_rng(cfg.seed)
        sigmas = []
        for _ in range(cfg.num_samples):
            s = random_spd(cfg.n, rng).a
            s = s * (rng.uniform(cfg.scale_low, cfg.scale_high) * cfg.n / np.trace(s))
            sigmas.append(SpdMat(s))
    cols = ["sample", "n", "trace_sigma", "loss_g1", "loss_g2", "loss_gstar", "predicate", "inequality_holds"]
    out = Output(cols)
    for i, s in enumerate(sigmas):
        c = ou.compare_preconditioners(s)
        gstar = ou.max_loss_preconditioner(s)
        loss_star = 0.25 * float(np.sum(s.a * gstar.a))
        out.rows.append([i, c.n, c.trace_sigma, c.loss_identity_like, c.loss_adam_like, loss_star, c.predicate_holds, c.inequality_holds])
    return out


def cmd_trace(cfg: TraceConfig) -> Output:
    rng = np.random.default_rng(cfg.seed)
    h = random_psd(cfg.n, min(cfg.rank, cfg.n), rng)
    est = estimate_trace(np.zeros(cfg.n), QuadraticOracle(h), cfg.eta, cfg.num_probes, cfg.seed)
    return Output(["estimate", "stderr", "exact_trace"], [[est.value, est.stderr, float(np.trace(h.a))]])


def instability_hessian(n, cond, top, rng) -> np.ndarray:
    """``D^{1/2} C D^{1/2}``: well-conditioned correlation ``C`` under a badly scaled diagonal ``D``."""
    q = random_orthogonal(n, rng)
    c = (q * rng.uniform(0.5, 1.5, size=n)) @ q.T
    dc = np.sqrt(np.diag(c))
    c = c / np.outer(dc, dc)
    d = top * np.logspace(-np.log10(cond), 0.0, n)
    sd = np.sqrt(d)
    return c * np.outer(sd, sd)


def cmd_instability_demo(cfg: InstabilityConfig) -> Output:
    rng = np.random.default_rng(cfg.seed)
    h = instability_hessian(cfg.n, cfg.cond, cfg.top_curvature, rng)
    lam = np.linalg.eigvalsh(h)
    eta = cfg.eta if cfg.eta > 0 else cfg.eta_factor / lam[-1]
    oracle = QuadraticOracle(h)
    cols = ["preconditioner", "eta", "eta_times_lambda_max", "diverged", "diverged_at", "r_hat", "r_rounded", "settled", "true_rank", "cond_h"]
    out = Output(cols)
    cond_h = float(lam[-1] / lam[0])
    for name, g in (("identity", None), ("jacobi", 1.0 / np.diag(h))):
        gh = h if g is None else np.sqrt(g)[:, None] * h * np.sqrt(g)[None, :]
        lmax = float(np.linalg.eigvalsh(gh)[-1])
        rc = RankConfig(cfg.sigma2, cfg.k_tot, cfg.k_avg, eta, g, cfg.seed)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                est = estimate_rank(np.zeros(cfg.n), oracle, rc)
            out.rows.append([name, eta, eta * lmax, False, None, est.r_hat, est.r_rounded, est.settled, cfg.n, cond_h])
        except Diverged as exc:
            out.rows.append([name, eta, eta * lmax, True, exc.trajectory.diverged_at, None, None, False, cfg.n, cond_h])
    return out


COMMANDS = {
    "loss-curve": (LossCurveConfig, cmd_loss_curve, "Simulated vs closed-form loss curve (linear net or quadratic)"),
    "rank": (RankCmdConfig, cmd_rank, "Single Hessian rank estimate"),
    "rank-sweep": (RankSweepConfig, cmd_rank_sweep, "Rank estimation over linear-net dimensions, with the filter baseline"),
    "saddle": (SaddleConfig, cmd_saddle, "Escape from a saddle: closed form, ensemble, crossing time and bound"),
    "precond-compare": (PrecondCompareConfig, cmd_precond_compare, "Steady-state loss under identity-like, Adam-like and maximal preconditioners"),
    "trace": (TraceConfig, cmd_trace, "Hessian trace from first-step loss increments"),
    "instability-demo": (InstabilityConfig, cmd_instability_demo, "Divergence with G = I vs a Jacobi preconditioner"),
}

_FLAG_KEYS = ("eta", "sigma2", "seed", "out")


def _epilog(cls) -> str:
    lines = ["config keys (defaults):"]
    for f in dataclasses.fields(cls):
        default = f.default_factory() if f.default is dataclasses.MISSING else f.default
        lines.append(f"  {f.name} = {json.dumps(default)}  -- {f.metadata.get('help', '')}")
    lines.append("environment: LANGEVIN_RANK_THREADS caps ensemble threads (0 = auto)")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="langevin-rank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (cls, _, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=_epilog(cls),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="JSON config file (unknown keys are rejected)")
        keys = {f.name for f in dataclasses.fields(cls)}
        if "eta" in keys:
            p.add_argument("--eta", type=float, help="override eta")
        if "sigma2" in keys:
            p.add_argument("--sigma2", type=float, help="override sigma2")
        p.add_argument("--seed", type=int, help="override seed")
        p.add_argument("--out", help="override output path ('-' = stdout)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cls, fn, _ = COMMANDS[args.command]
    overrides = {k: getattr(args, k, None) for k in _FLAG_KEYS}
    try:
        cfg = load_config(cls, args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = EXIT_OK
    try:
        result = fn(cfg)
        code = result.exit_code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Diverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        result, code = Output(["error"], [["diverged"]]), EXIT_DIVERGED
    except (NumericalFailure, NotPsd, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = result.render({"command": args.command, **dataclasses.asdict(cfg)})
    if cfg.out in ("-", "", None):
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
