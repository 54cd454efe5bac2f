"""AR(p) parameter handling: stability, Fisher information, simulation.

The model is X_n = sum_{i=1}^p theta_i X_{n-i} + xi_n with X_k = 0 for k <= 0,
so the first observation is X_1 = xi_1. The companion matrix A has theta as its
first row and ones on the subdiagonal; stability means the spectral radius of A
is below one, equivalently all roots of z**p - theta_1 z**(p-1) - ... - theta_p
lie inside the open unit disk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.signal

from .exceptions import RootSolverNoConverge, Unstable
from .noise import CovarianceKernel

#: Stability margin: a parameter is accepted when every root modulus is below
#: 1 - STABILITY_MARGIN.
STABILITY_MARGIN = 1e-9

_ROOT_TOL = 1e-12
_ROOT_MAX_ITER = 200


def as_theta(theta) -> np.ndarray:
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if th.ndim != 1 or th.size < 1:
        raise ValueError("theta must be a nonempty 1-d real vector")
    if not np.all(np.isfinite(th)):
        raise ValueError("theta must be finite")
    return th


def companion(theta) -> np.ndarray:
    """Companion matrix: first row theta, ones on the subdiagonal."""
    th = as_theta(theta)
    p = th.size
    a = np.zeros((p, p))
    a[0, :] = th
    if p > 1:
        a[np.arange(1, p), np.arange(0, p - 1)] = 1.0
    return a


def _durand_kerner(coeffs: np.ndarray) -> np.ndarray:
    """Roots of a monic polynomial by simultaneous (Weierstrass) iteration.

    ``coeffs`` are monic coefficients in decreasing degree order. Starting
    points sit on a ring of radius given by the Cauchy bound, rotated off the
    real axis to avoid symmetric stalls.
    """
    d = coeffs.size - 1
    if d == 0:
        return np.empty(0, dtype=complex)
    radius = 1.0 + float(np.max(np.abs(coeffs[1:])))
    angles = 2.0 * np.pi * np.arange(d) / d + 0.5
    z = 0.7 * radius * np.exp(1j * angles)
    for _ in range(_ROOT_MAX_ITER):
        pv = np.polyval(coeffs, z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        dz = pv / diff.prod(axis=1)
        z = z - dz
        scale = max(1.0, float(np.max(np.abs(z))))
        if np.all(np.isfinite(dz)) and float(np.max(np.abs(dz))) <= _ROOT_TOL * scale:
            return z
    raise RootSolverNoConverge(
        f"root iteration did not converge within {_ROOT_MAX_ITER} steps"
    )


def characteristic_roots(theta) -> np.ndarray:
    """Roots of z**p - theta_1 z**(p-1) - ... - theta_p."""
    th = as_theta(theta)
    coeffs = np.concatenate(([1.0], -th)).astype(complex)
    return _durand_kerner(coeffs)


@dataclass(frozen=True, eq=False)
class StabilityResult:
    """Outcome of a stability check; moduli are sorted in decreasing order."""

    stable: bool
    root_moduli: np.ndarray


def stability(theta) -> StabilityResult:
    moduli = np.sort(np.abs(characteristic_roots(theta)))[::-1]
    stable = bool(moduli.size == 0 or moduli[0] < 1.0 - STABILITY_MARGIN)
    return StabilityResult(stable=stable, root_moduli=moduli)


def is_stable(theta) -> bool:
    """True iff every characteristic root has modulus below 1 - margin."""
    return stability(theta).stable


def require_stable(theta) -> np.ndarray:
    th = as_theta(theta)
    res = stability(th)
    if not res.stable:
        raise Unstable(
            f"theta={np.array2string(th, precision=6)} has root modulus "
            f"{res.root_moduli[0]:.6f} >= 1 - {STABILITY_MARGIN:g}"
        )
    return th


def fisher_info(theta) -> np.ndarray:
    """Asymptotic information matrix I(theta), the solution of
    I = A^T I A + b b^T with b the first canonical basis vector.

    Solved directly (Kronecker linear system via the discrete Lyapunov solver)
    and symmetrized. For p = 1 this is 1 / (1 - theta**2).
    """
    th = require_stable(theta)
    a = companion(th)
    b = np.zeros(th.size)
    b[0] = 1.0
    info = scipy.linalg.solve_discrete_lyapunov(a.T, np.outer(b, b))
    return 0.5 * (info + info.T)


def fisher_info_inverse(theta) -> np.ndarray:
    """Inverse of the information matrix via its Cholesky factorization."""
    info = fisher_info(theta)
    cho = scipy.linalg.cho_factor(info)
    inv = scipy.linalg.cho_solve(cho, np.eye(info.shape[0]))
    return 0.5 * (inv + inv.T)


def apply_ar(theta, xi) -> np.ndarray:
    """Run the AR recursion over a noise path with the zero initial condition."""
    th = as_theta(theta)
    xi = np.ascontiguousarray(xi, dtype=float)
    a = np.concatenate(([1.0], -th))
    return scipy.signal.lfilter([1.0], a, xi)


def simulate_series(theta, kernel: CovarianceKernel, n: int, seed: int) -> np.ndarray:
    """Simulate X_1..X_n at a stable theta driven by the given noise kernel."""
    from .noise import sample_noise

    th = require_stable(theta)
    path = sample_noise(kernel, n, seed)
    return apply_ar(th, path.values)
