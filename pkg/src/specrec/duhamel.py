"""Forward mild-solution solver and the inhomogeneous convolution.

The state is marched in the eigenbasis by an exponential trapezoid rule: the
homogeneous part is applied exactly through the semigroup, and the forcing
enters through phi-function weights that integrate piecewise-linear data
exactly.  Stiff modes therefore cost nothing in stability, and zero forcing
reproduces the semigroup to rounding.
"""

import math

import numpy as np

from .errors import InvalidParameterError, NumericFailureError
from .kernels import WeightFunction, phi1
from .spectral import Trajectory

__all__ = ["phi1", "duhamel_convolve", "forward_solve", "observe"]

_PHI_SERIES_CUTOFF = 0.35
_PHI_SERIES_TERMS = 18

_PHI1_COEFFS = np.array([1.0 / math.factorial(m + 1)
                         for m in range(_PHI_SERIES_TERMS)])
_PHI2_COEFFS = np.array([1.0 / math.factorial(m + 2)
                         for m in range(_PHI_SERIES_TERMS)])


def _horner(z, coeffs):
    out = np.zeros_like(z)
    for a in coeffs[::-1]:
        out = out * z + a
    return out


def _phi_pair(z):
    """phi1(z) = (e^z - 1)/z and phi2(z) = (e^z - 1 - z)/z**2, vectorized,
    with series branches where the direct formulas cancel."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < _PHI_SERIES_CUTOFF
    zr = np.where(small, 1.0, z)
    em = np.expm1(np.where(small, 0.0, z))
    p1 = np.where(small, _horner(z, _PHI1_COEFFS), em / zr)
    p2 = np.where(small, _horner(z, _PHI2_COEFFS), (em - zr) / zr**2)
    return p1, p2


def _require_same_grid(g, grid):
    if grid is None:
        return g.grid
    if not np.array_equal(g.grid.nodes, grid.nodes):
        raise InvalidParameterError("trajectory grid does not match the given grid")
    return grid


def duhamel_convolve(op, g, grid=None):
    """Convolve a forcing trajectory with the semigroup.

    Returns v with v(t_i) = int_0^{t_i} e^{(t_i-s)A} g(s) ds, computed per
    mode by a one-step recurrence that is exact whenever g is linear in time
    between nodes.
    """
    grid = _require_same_grid(g, grid)
    if g.coeffs.shape[1] != op.n_modes:
        raise InvalidParameterError("forcing trajectory does not match the operator")
    lam = op.eigenvalues
    nodes = grid.nodes
    out = np.zeros_like(g.coeffs)
    for i in range(nodes.size - 1):
        h = nodes[i + 1] - nodes[i]
        z = h * lam
        e = np.exp(z)
        p1, p2 = _phi_pair(z)
        out[i + 1] = e * out[i] + h * ((p1 - p2) * g.coeffs[i]
                                       + p2 * g.coeffs[i + 1])
    return Trajectory(grid, out)


def forward_solve(op, u0, f, grid, max_inner=25):
    """March the mild solution u(t) = e^{tA} u0 + int_0^t e^{(t-s)A} f(u)(s) ds.

    Each step solves the step-local integral identity by a predictor-corrector
    sweep on the exponential trapezoid rule.  The homogeneous part is applied
    directly from t = 0, never compounded step by step, so zero forcing gives
    the semigroup exactly.
    """
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (op.n_modes,) or not np.all(np.isfinite(u0)):
        raise InvalidParameterError("u0 must be a finite coefficient vector")
    lam = op.eigenvalues
    nodes = grid.nodes
    n1 = nodes.size
    hom = np.exp(np.outer(nodes, lam)) * u0
    coeffs = np.empty((n1, op.n_modes))
    coeffs[0] = u0
    conv = np.zeros(op.n_modes)
    g_prev = f.eval_node(coeffs, grid, 0, op)
    for i in range(n1 - 1):
        h = nodes[i + 1] - nodes[i]
        z = h * lam
        e = np.exp(z)
        p1, p2 = _phi_pair(z)
        base = e * conv + h * (p1 - p2) * g_prev
        coeffs[i + 1] = hom[i + 1] + e * conv + h * p1 * g_prev
        prev_res = np.inf
        for _ in range(max_inner):
            g_next = f.eval_node(coeffs, grid, i + 1, op)
            u_new = hom[i + 1] + base + h * p2 * g_next
            res = float(np.linalg.norm(u_new - coeffs[i + 1]))
            coeffs[i + 1] = u_new
            if not np.isfinite(res):
                raise NumericFailureError(
                    f"corrector diverged at step {i + 1}",
                    error_estimate=res, step=i + 1,
                )
            if res <= 1e-14 * (1.0 + np.linalg.norm(u_new)):
                break
            if res >= prev_res:
                raise NumericFailureError(
                    f"corrector residual grew at step {i + 1} "
                    f"({prev_res:.3e} -> {res:.3e})",
                    error_estimate=res, step=i + 1,
                )
            prev_res = res
        else:
            raise NumericFailureError(
                f"corrector did not converge within {max_inner} iterations "
                f"at step {i + 1}",
                error_estimate=prev_res, step=i + 1,
            )
        g_next = f.eval_node(coeffs, grid, i + 1, op)
        conv = base + h * p2 * g_next
        g_prev = g_next
    return Trajectory(grid, coeffs)


def observe(u, a, b, grid=None):
    """Weighted time-average observation a*u(T) + int_0^T b(t) u(t) dt.

    Uses the composite trapezoid rule on the trajectory's own grid.  This is
    deliberately a different discretization from the recovery operators, so
    that round-trip errors reflect genuine method error rather than a shared
    quadrature.
    """
    grid = _require_same_grid(u, grid)
    if not isinstance(b, WeightFunction):
        raise InvalidParameterError("b must be a WeightFunction")
    if not u.includes_t0:
        raise InvalidParameterError("observation needs the t = 0 node populated")
    nodes = grid.nodes
    bw = np.asarray(b(nodes), dtype=float)
    integrand = bw[:, None] * u.coeffs
    h = np.diff(nodes)
    integral = 0.5 * ((integrand[:-1] + integrand[1:]) * h[:, None]).sum(axis=0)
    return a * u.coeffs[-1] + integral
