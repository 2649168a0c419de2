"""Round-trip and threshold-sweep experiments.

The round trip synthesizes an observation from a known initial state on a
fine grid (4x the solver nodes, trapezoid quadrature), hands only the
observation vector to the recovery path, and compares the recovered initial
state against the truth.  Forward and backward discretizations share nothing,
so the reported errors are genuine method error.
"""

import time
from dataclasses import dataclass

import numpy as np

from .duhamel import forward_solve, observe
from .errors import ConfigError, IllPosedModeError, SpecrecError
from .nonlinearity import Zero, check_growth_condition
from .recover import (ConditionE, ConditionE100, ConditionE200,
                      FixedPointReport, GrowthExponents, picard_recover,
                      theoretical_threshold)
from .spectral import fractional_norm, make_graded_grid

OBSERVATION_REFINEMENT = 4


def build_condition(cfg, M):
    problem = cfg.condition.problem
    if problem == "E":
        return ConditionE(cfg.condition.a, cfg.build_weight(), M)
    if problem == "E100":
        return ConditionE100(cfg.build_weight(), M)
    return ConditionE200(cfg.build_weight(), M)


def synthesize_observation(cfg, op, f, u0_true):
    """Forward-solve on a refined grid and form the observation vector."""
    grid_fine = make_graded_grid(cfg.grid.T,
                                 OBSERVATION_REFINEMENT * cfg.grid.n,
                                 cfg.grid.r)
    u = forward_solve(op, u0_true, f, grid_fine)
    problem = cfg.condition.problem
    if problem == "E":
        M = observe(u, cfg.condition.a, cfg.build_weight(), grid_fine)
    elif problem == "E100":
        M = u0_true - cfg.condition.b * u.coeffs[-1]
    else:
        M = u0_true + observe(u, 0.0, cfg.build_weight(), grid_fine)
    return M, grid_fine


def resolve_M(cfg, op, f):
    """Observation vector from the config: literal or synthesized from u0."""
    source = cfg.condition.m_source
    if source["type"] == "coefficients":
        M = np.asarray(source["values"], dtype=float)
        if M.shape != (op.n_modes,):
            raise ConfigError(
                f"condition.M.values has length {M.size}, expected {op.n_modes}"
            )
        return M, None
    u0_true = cfg.resolve_u0(op)
    M, _ = synthesize_observation(cfg, op, f, u0_true)
    return M, u0_true


def observation_tail_fraction(M, fraction=0.25):
    """Share of the observation's energy in the highest-frequency quarter of
    the retained modes; a proxy for how much the truncation is missing."""
    M = np.asarray(M, dtype=float)
    total = np.linalg.norm(M)
    if total == 0.0:
        return 0.0
    cut = max(1, int(round(fraction * M.size)))
    return float(np.linalg.norm(M[-cut:]) / total)


@dataclass
class RoundTripResult:
    u0_true: np.ndarray
    observed_M: np.ndarray
    u0_recovered: np.ndarray
    error_e0: float
    error_etheta: float
    forward_seconds: float
    recover_seconds: float
    observation_nodes: int
    report: FixedPointReport
    failure_stage: str = None


def roundtrip(cfg, u0_true=None):
    """Forward solve, observe, recover, compare."""
    op = cfg.build_operator()
    f = cfg.build_nonlinearity()
    grid = cfg.build_grid()
    spec = cfg.build_norm_spec(op)
    if u0_true is None:
        u0_true = cfg.resolve_u0(op)
    u0_true = np.asarray(u0_true, dtype=float)

    t0 = time.perf_counter()
    M, grid_fine = synthesize_observation(cfg, op, f, u0_true)
    forward_seconds = time.perf_counter() - t0

    cond = build_condition(cfg, M)
    t0 = time.perf_counter()
    report = picard_recover(op, cond, f, grid, spec,
                            tol=cfg.solver.tol, max_iter=cfg.solver.max_iter)
    recover_seconds = time.perf_counter() - t0

    diff = report.u0_recovered - u0_true
    return RoundTripResult(
        u0_true=u0_true,
        observed_M=M,
        u0_recovered=report.u0_recovered,
        error_e0=float(np.linalg.norm(diff)),
        error_etheta=fractional_norm(op, diff, spec),
        forward_seconds=forward_seconds,
        recover_seconds=recover_seconds,
        observation_nodes=grid_fine.n_steps,
        report=report,
        failure_stage=None if report.converged else "not-converged",
    )


@dataclass
class SweepRow:
    index: int
    scale: float
    converged: bool
    iterations: int
    final_ratio: float
    sigma_T0_norm: float
    threshold_m: float
    status: str


SWEEP_HEADER = ("index", "scale", "converged", "iterations", "final_ratio",
                "sigma_T0_norm", "threshold_m", "status")


def sweep_threshold(cfg, scales=None):
    """Re-run the recovery over scaled observations s * M.

    Each row records the convergence flag, the last contraction ratio, the
    size of the zero-forcing initial value, and the theoretical threshold
    estimate.  Row failures are recorded and the sweep continues.
    """
    if scales is None:
        scales = cfg.sweep_scales
    if not scales:
        raise ConfigError("sweep needs a 'sweep.scales' list in the config")
    op = cfg.build_operator()
    f = cfg.build_nonlinearity()
    grid = cfg.build_grid()
    spec = cfg.build_norm_spec(op)
    M_base, _ = resolve_M(cfg, op, f)

    if isinstance(f, Zero):
        c_hat = 0.0
    else:
        c_hat = check_growth_condition(f, op, spec, seed=cfg.seed).c_hat
    exponents = GrowthExponents(cfg.solver.gamma, cfg.solver.theta,
                                cfg.resolved_nu(), getattr(f, "ell", 1.0))
    estimate = theoretical_threshold(op, exponents, c_hat, grid.T, spec)

    rows = []
    for idx, s in enumerate(scales):
        cond = build_condition(cfg, float(s) * M_base)
        try:
            report = picard_recover(op, cond, f, grid, spec,
                                    tol=cfg.solver.tol,
                                    max_iter=cfg.solver.max_iter,
                                    threshold_m=estimate.m_T)
            rows.append(SweepRow(idx, float(s), report.converged,
                                 report.iterations, report.final_ratio,
                                 report.sigma_T0_norm, estimate.m_T, "ok"))
        except (IllPosedModeError, SpecrecError) as exc:
            rows.append(SweepRow(idx, float(s), False, 0, float("nan"),
                                 float("nan"), estimate.m_T,
                                 f"error:{type(exc).__name__}"))
    return rows, estimate
