"""Initial-state recovery from nonlocal-in-time observations.

Three observation couplings are supported, each reducing to a nonlocal
initial condition u(0) = S(u) that is diagonal in the eigenbasis:

* problem "E":    a*u(T) + int_0^T b(t) u(t) dt = M
* problem "E100": u(0) - b*u(T) = M            (scalar b)
* problem "E200": u(0) + int_0^T b(t) u(t) dt = M

The recovered initial state is the fixed point of successive substitution
u -> e^{tA} S(u) + convolution(f(u)), run in the combined weighted-plus-sup
metric.  A theoretical smallness threshold for the observation data is
estimated alongside.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .duhamel import duhamel_convolve
from .errors import (AdmissibilityError, IllPosedModeError,
                     InvalidParameterError, NumericFailureError)
from .kernels import (ILL_POSED_RTOL, ConstantWeight, WeightFunction,
                      _abs_weight_integral_vec, _exp_weight_integral_vec,
                      _phi1_vec, _tail_weight_vec, beta_function, mode_weights)
from .spectral import FractionalNormSpec, Trajectory, weighted_sup_norm

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


# --------------------------------------------------------------------------
# nonlocal conditions
# --------------------------------------------------------------------------

class NonlocalCondition:
    """Base class for the three observation couplings."""

    problem = None

    def __init__(self, M):
        M = np.atleast_1d(np.asarray(M, dtype=float))
        if M.ndim != 1 or not np.all(np.isfinite(M)):
            raise InvalidParameterError("M must be a finite coefficient vector")
        self.M = M
        self.M.setflags(write=False)


class ConditionE(NonlocalCondition):
    """Weighted time-average coupling a*u(T) + int b(t) u(t) dt = M.

    Requires b(0) != 0: without weight at the initial instant the average
    carries no information about the initial state.
    """

    problem = "E"

    def __init__(self, a, b, M):
        super().__init__(M)
        if not isinstance(b, WeightFunction):
            raise InvalidParameterError("b must be a WeightFunction")
        if b.value_at_zero == 0.0:
            raise AdmissibilityError("problem E requires b(0) != 0")
        self.a = float(a)
        self.b = b


class ConditionE100(NonlocalCondition):
    """Initial-final coupling u(0) - b*u(T) = M with scalar b != 0."""

    problem = "E100"

    def __init__(self, b, M):
        super().__init__(M)
        b = float(b)
        if b == 0.0:
            raise AdmissibilityError("problem E100 requires b != 0")
        self.b = b


class ConditionE200(NonlocalCondition):
    """Initial-plus-average coupling u(0) + int b(t) u(t) dt = M."""

    problem = "E200"

    def __init__(self, b, M):
        super().__init__(M)
        if not isinstance(b, WeightFunction):
            raise InvalidParameterError("b must be a WeightFunction")
        if b.is_zero:
            raise AdmissibilityError("problem E200 requires a nonzero weight")
        self.b = b


# --------------------------------------------------------------------------
# the affine observation corrections
# --------------------------------------------------------------------------

def _tail_matrix(lams, svals, T, b):
    """tail integrals int_s^T b(t) e^{(t-s)lam} dt for all (s, mode) pairs."""
    if isinstance(b, ConstantWeight):
        span = T - svals
        z = span[:, None] * lams[None, :]
        return b.value * span[:, None] * _phi1_vec(z)
    out = np.empty((svals.size, lams.size))
    for q, s in enumerate(svals):
        out[q] = _tail_weight_vec(lams, float(s), T, b)
    return out


def apply_psi_E(a, b, T, g, op):
    """Accumulated contribution of a forcing trajectory to the time-average
    observation:

        a * int_0^T e^{(T-s)A} g(s) ds
        + int_0^T g_j(s) * [tail integral of b from s] ds   (per mode).

    The first term is computed by the exact piecewise-linear convolution
    recurrence (stable for arbitrarily stiff modes); the second integrates
    the linearly interpolated forcing against the smooth tail factor with
    Gauss-Legendre panels per grid interval.
    """
    grid = g.grid
    if abs(T - grid.T) > 1e-12 * max(1.0, T):
        raise InvalidParameterError("T does not match the forcing grid")
    if g.coeffs.shape[1] != op.n_modes:
        raise InvalidParameterError("forcing trajectory does not match the operator")
    result = np.zeros(op.n_modes)
    if a != 0.0:
        result += a * duhamel_convolve(op, g).coeffs[-1]
    if not b.is_zero:
        nodes = grid.nodes
        tl, tr = nodes[:-1], nodes[1:]
        h = tr - tl
        mid = 0.5 * (tl + tr)
        half = 0.5 * h
        S = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        Wq = half[:, None] * _GL_WEIGHTS[None, :]
        frac = (S - tl[:, None]) / h[:, None]
        tails = _tail_matrix(op.eigenvalues, S.ravel(), T, b)
        tails = tails.reshape(S.shape + (op.n_modes,))
        gl = g.coeffs[:-1][:, None, :]
        gr = g.coeffs[1:][:, None, :]
        gq = gl + frac[:, :, None] * (gr - gl)
        result += np.einsum("kq,kqj->j", Wq, gq * tails)
    return result


def _check_denominators(denoms, scales, tol, what):
    bad = np.nonzero(np.abs(denoms) <= tol * scales)[0]
    if bad.size:
        modes = [int(j) + 1 for j in bad]
        raise IllPosedModeError(f"{what} vanishes at modes {modes}", modes)


def sigma_E(w, M, g, op, tol=ILL_POSED_RTOL):
    """Initial state for problem E: per mode (M_j - psi_j) / beta_j."""
    M = np.asarray(M, dtype=float)
    _check_denominators(w.betas, w.scales, tol, "observation weight")
    psi = apply_psi_E(w.a, w.weight, w.T, g, op)
    return (M - psi) / w.betas


def sigma_E100(b, T, M, g, op, tol=ILL_POSED_RTOL):
    """Initial state for problem E100:
    (M_j + b * int_0^T e^{(T-s)lam_j} g_j ds) / (1 - b e^{T lam_j})."""
    M = np.asarray(M, dtype=float)
    decay = np.exp(T * op.eigenvalues)
    ks = 1.0 - b * decay
    _check_denominators(ks, 1.0 + abs(b) * decay, tol, "initial-final coupling")
    z = b * duhamel_convolve(op, g).coeffs[-1]
    return (M + z) / ks


def sigma_E200(b, T, M, g, op, tol=ILL_POSED_RTOL):
    """Initial state for problem E200: (M_j - psi0_j) / (1 + phi0_j)."""
    M = np.asarray(M, dtype=float)
    phi0 = _exp_weight_integral_vec(op.eigenvalues, T, b)
    scales = 1.0 + _abs_weight_integral_vec(op.eigenvalues, T, b)
    _check_denominators(1.0 + phi0, scales, tol, "average coupling")
    psi0 = apply_psi_E(0.0, b, T, g, op)
    return (M - psi0) / (1.0 + phi0)


# --------------------------------------------------------------------------
# spectral admissibility
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralConditionReport:
    """Per-mode margins of the diagonal denominators.

    A mode passes when its |denominator| exceeds tol times its magnitude
    scale.  Violations are data, not exceptions.
    """

    problem: str
    margins: np.ndarray
    scales: np.ndarray
    tol: float
    ok_per_mode: np.ndarray
    failing_modes: tuple
    ok: bool


def check_spectral_condition(op, cond, T, tol=ILL_POSED_RTOL):
    """Evaluate the per-mode solvability margins for a condition."""
    lam = op.eigenvalues
    if cond.problem == "E":
        w = mode_weights(op, cond.a, cond.b, T)
        denoms, scales = w.betas, w.scales
    elif cond.problem == "E100":
        decay = np.exp(T * lam)
        denoms = 1.0 - cond.b * decay
        scales = 1.0 + abs(cond.b) * decay
    elif cond.problem == "E200":
        denoms = 1.0 + _exp_weight_integral_vec(lam, T, cond.b)
        scales = 1.0 + _abs_weight_integral_vec(lam, T, cond.b)
    else:
        raise InvalidParameterError(f"unknown problem tag {cond.problem!r}")
    margins = np.abs(denoms)
    ok_per_mode = margins > tol * scales
    failing = tuple(int(j) + 1 for j in np.nonzero(~ok_per_mode)[0])
    return SpectralConditionReport(cond.problem, margins, scales, float(tol),
                                   ok_per_mode, failing, not failing)


# --------------------------------------------------------------------------
# Picard fixed point
# --------------------------------------------------------------------------

@dataclass
class FixedPointReport:
    """Trace of the successive-substitution iteration.

    ``trajectory`` carries the final iterate (the discrete mild solution on
    convergence); it is excluded from serialized reports.
    """

    iterations: int
    residual_weighted: list
    residual_sup: list
    contraction_ratios: list
    converged: bool
    u0_recovered: np.ndarray
    sigma_T0_norm: float
    threshold_m: float = None
    diverged: bool = False
    trajectory: Trajectory = None

    @property
    def final_ratio(self):
        return self.contraction_ratios[-1] if self.contraction_ratios else math.nan


def _sigma_dispatch(op, cond, T, weights):
    if cond.problem == "E":
        return lambda g: sigma_E(weights, cond.M, g, op)
    if cond.problem == "E100":
        return lambda g: sigma_E100(cond.b, T, cond.M, g, op)
    if cond.problem == "E200":
        return lambda g: sigma_E200(cond.b, T, cond.M, g, op)
    raise InvalidParameterError(f"unknown problem tag {cond.problem!r}")


def _small_t_diagnostic(op, T, weights):
    """Scale check for the short-horizon regime: the graph-norm size of the
    diagonal observation inverse should stay of order 1/T."""
    graph_weight = np.maximum(1.0, -op.eigenvalues)
    return float(np.max(T / (np.abs(weights.betas) * graph_weight)))


def picard_recover(op, cond, f, grid, spec, tol=1e-10, max_iter=200,
                   initial="zero", small_t_mode=False, threshold_m=None):
    """Recover the initial state by successive substitution.

    Starting from the zero trajectory (or from the linear solution when
    ``initial="linear"``), each sweep recomputes the nonlocal initial value
    from the current forcing and propagates it forward.  Iteration stops when
    the combined weighted-plus-sup residual drops below ``tol``; hitting
    ``max_iter`` or a runaway residual yields a report with
    ``converged=False``, never a silent answer.
    """
    if not tol > 0:
        raise InvalidParameterError("tol must be positive")
    if int(max_iter) != max_iter or max_iter < 1:
        raise InvalidParameterError("max_iter must be a positive integer")
    T = grid.T
    if cond.M.shape != (op.n_modes,):
        raise InvalidParameterError("M does not match the operator's mode count")
    report_check = check_spectral_condition(op, cond, T)
    if not report_check.ok:
        raise IllPosedModeError(
            f"spectral condition violated at modes {list(report_check.failing_modes)}",
            report_check.failing_modes,
        )
    weights = mode_weights(op, cond.a, cond.b, T) if cond.problem == "E" else None
    if not f.vanishes_at_zero:
        if not small_t_mode:
            raise AdmissibilityError(
                "the nonlinearity must vanish at the zero state; "
                "enable small_t_mode for the short-horizon regime"
            )
        if cond.problem != "E" or cond.a != 0.0:
            raise AdmissibilityError(
                "small_t_mode applies to problem E with a = 0 only"
            )
        factor = _small_t_diagnostic(op, T, weights)
        warnings.warn(
            "nonlinearity does not vanish at zero: proceeding in the "
            f"short-horizon regime (inverse-scale factor {factor:.3g}); "
            "expect solvability only for small T",
            stacklevel=2,
        )

    sigma = _sigma_dispatch(op, cond, T, weights)
    e0_spec = FractionalNormSpec(0.0, spec.delta0)
    zero_g = Trajectory.zeros(grid, op.n_modes)
    sigma0 = sigma(zero_g)
    sigma_T0_norm = float(np.linalg.norm(sigma0))

    hom = np.exp(np.outer(grid.nodes, op.eigenvalues))
    if initial == "zero":
        u = Trajectory.zeros(grid, op.n_modes)
    elif initial == "linear":
        u = Trajectory(grid, hom * sigma0)
    else:
        raise InvalidParameterError('initial must be "zero" or "linear"')

    residual_weighted = []
    residual_sup = []
    converged = False
    diverged = False
    u0 = sigma0
    first_residual = None
    for _ in range(int(max_iter)):
        try:
            g = f.eval_trajectory(u, op)
            u0 = sigma(g)
            new_coeffs = hom * u0 + duhamel_convolve(op, g).coeffs
        except NumericFailureError:
            # runaway iterate overflowed inside the evaluation chain
            diverged = True
            break
        if not np.all(np.isfinite(new_coeffs)):
            diverged = True
            break
        new = Trajectory(grid, new_coeffs)
        diff = Trajectory(grid, new.coeffs - u.coeffs)
        rw = weighted_sup_norm(op, diff, spec.theta, spec)
        rs = weighted_sup_norm(op, diff, 0.0, e0_spec)
        residual_weighted.append(rw)
        residual_sup.append(rs)
        u = new
        combined = rw + rs
        if combined <= tol:
            converged = True
            break
        if first_residual is None:
            first_residual = combined
        elif combined > 1e6 * first_residual:
            diverged = True
            break
    combined = [rw + rs for rw, rs in zip(residual_weighted, residual_sup)]
    contraction_ratios = [combined[i + 1] / combined[i]
                          for i in range(len(combined) - 1)]
    if converged:
        u0 = sigma(f.eval_trajectory(u, op))
    return FixedPointReport(
        iterations=len(residual_weighted),
        residual_weighted=residual_weighted,
        residual_sup=residual_sup,
        contraction_ratios=contraction_ratios,
        converged=converged,
        u0_recovered=np.asarray(u0, dtype=float),
        sigma_T0_norm=sigma_T0_norm,
        threshold_m=threshold_m,
        diverged=diverged,
        trajectory=u,
    )


# --------------------------------------------------------------------------
# theoretical smallness threshold
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthExponents:
    """Exponent bundle (gamma, theta, nu, ell) of the growth assumptions."""

    gamma: float
    theta: float
    nu: float
    ell: float

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidParameterError("gamma must lie in [0, 1]")
        if not 0.0 < self.theta <= 1.0:
            raise InvalidParameterError("theta must lie in (0, 1]")
        if self.gamma == 0.0 and self.theta == 1.0:
            raise InvalidParameterError("(gamma, theta) = (0, 1) is excluded")
        if not 0.0 <= self.nu < 1.0:
            raise InvalidParameterError("nu must lie in [0, 1)")
        if not self.ell > 0.0:
            raise InvalidParameterError("ell must be positive")


@dataclass(frozen=True)
class WellPosednessEstimate:
    """Estimated smallness threshold for the observation data.

    ``contraction_factor(L)`` bounds the Lipschitz constant of the
    substitution map on the ball of radius L; ``L_star`` is the largest
    radius keeping it at or below 1/2 and ``m_T = L_star / (4 * omega_T)``
    the resulting data threshold.  All of it rests on the *empirical* growth
    constant supplied by the caller, so it is an estimate, not a proof.
    """

    omega_T: float
    gamma0: float
    beta_value: float
    L_star: float
    m_T: float
    unbounded: bool
    c_hat: float
    T: float
    exponents: GrowthExponents

    def contraction_factor(self, L):
        e = self.exponents
        return (self.omega_T * self.c_hat * L ** e.ell
                * (1.0 + self.T ** (1.0 + self.gamma0 - e.nu) * self.beta_value))


def _omega_estimate(op, theta, gamma, gamma0, T, delta0):
    """Upper estimate of the semigroup constant in the spectral norms.

    With zero shift the smoothing factor has the closed form
    sup_x (t*x)**theta * exp(-t*x) = (theta/e)**theta; otherwise the
    supremum is taken numerically over a log grid in t and the discrete
    modes and inflated by 5%.
    """
    lam = op.eigenvalues
    bounded = math.exp(T * max(0.0, float(lam[0])))
    if delta0 == 0.0 and gamma == 0.0:
        smooth = (theta / math.e) ** theta
        return max(1.0, bounded, smooth)
    ts = T * np.logspace(-8, 0, 200)
    d = delta0 - lam
    grid_exp = np.exp(ts[:, None] * lam[None, :])
    f2 = np.max(ts[:, None] ** theta * d[None, :] ** theta * grid_exp)
    f3 = np.max(ts[:, None] ** (theta - gamma0)
                * d[None, :] ** (theta - gamma) * grid_exp)
    return max(1.0, bounded, 1.05 * float(max(f2, f3)))


def theoretical_threshold(op, exponents, c_hat, T, spec):
    """Estimate the largest observation size for which the substitution map
    provably contracts.

    The auxiliary exponent gamma0 is half of min(gamma, theta) when gamma is
    positive and zero otherwise; the ball radius solves
    contraction_factor(L) = 1/2 by bisection.  Zero growth constant means no
    smallness is needed at all and the threshold is reported as unbounded.
    """
    if not isinstance(exponents, GrowthExponents):
        exponents = GrowthExponents(*exponents)
    if c_hat < 0 or not np.isfinite(c_hat):
        raise InvalidParameterError("c_hat must be a finite nonnegative number")
    if not T > 0:
        raise InvalidParameterError("T must be positive")
    gamma0 = min(exponents.gamma, exponents.theta) / 2.0 \
        if exponents.gamma > 0 else 0.0
    beta_value = beta_function(1.0 + gamma0 - exponents.theta,
                               1.0 - exponents.nu)
    omega = _omega_estimate(op, exponents.theta, exponents.gamma, gamma0,
                            T, spec.delta0)
    bracket = 1.0 + T ** (1.0 + gamma0 - exponents.nu) * beta_value

    def factor(L):
        return omega * c_hat * L ** exponents.ell * bracket

    l_max = 1.0 - 1e-12
    if c_hat == 0.0:
        return WellPosednessEstimate(omega, gamma0, beta_value, 1.0,
                                     math.inf, True, 0.0, float(T), exponents)
    if factor(l_max) <= 0.5:
        l_star = l_max
    else:
        lo, hi = 0.0, l_max
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if factor(mid) <= 0.5:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        l_star = lo
    return WellPosednessEstimate(omega, gamma0, beta_value, l_star,
                                 l_star / (4.0 * omega), False, float(c_hat),
                                 float(T), exponents)
