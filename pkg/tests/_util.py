"""Shared helpers for the test suite."""

import numpy as np


def ulp_close(a, b, n_ulp=4):
    """True when a and b differ by at most n_ulp units in the last place."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    tol = n_ulp * np.spacing(np.maximum(np.abs(a), np.abs(b)))
    return bool(np.all(np.abs(a - b) <= tol))


def rel_err(got, want):
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    scale = np.maximum(np.abs(want), 1e-300)
    return float(np.max(np.abs(got - want) / scale))
