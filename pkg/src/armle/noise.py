"""Stationary Gaussian noise: covariance kernels, validation and exact sampling.

Supported kernel families, all normalized so that r(0) = 1:

``white``
    r(k) = 1 if k = 0 else 0.
``ar1``
    r(k) = a**k for lag-1 correlation a with |a| < 1.
``fgn``
    Fractional Gaussian noise increments with Hurst index H in (0, 1),
    r(k) = ((k+1)**(2H) - 2*k**(2H) + |k-1|**(2H)) / 2.

Sampling is exact: a path of length n is built from n i.i.d. standard normal
innovations through the innovations representation
``xi_m = one-step prediction from xi_1..xi_{m-1} + sigma_m * eps_m``,
where predictions and variances come from the Durbin-Levinson filter.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import rng

FAMILIES = ("white", "ar1", "fgn")


@dataclass(frozen=True)
class CovarianceKernel:
    """Covariance kernel of a stationary centered Gaussian sequence.

    Parameters
    ----------
    family : str
        One of ``"white"``, ``"ar1"``, ``"fgn"``.
    a : float, optional
        Lag-1 correlation, used by the ``ar1`` family only. |a| < 1.
    hurst : float, optional
        Hurst index, used by the ``fgn`` family only. 0 < H < 1.
    """

    family: str
    a: float = 0.0
    hurst: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "ar1":
            if not (math.isfinite(self.a) and abs(self.a) < 1.0):
                raise ValueError("ar1 kernel needs |a| < 1")
        if self.family == "fgn":
            if not (math.isfinite(self.hurst) and 0.0 < self.hurst < 1.0):
                raise ValueError("fgn kernel needs Hurst index in (0, 1)")

    def covariance(self, lag: int) -> float:
        """Covariance r(lag) at a nonnegative integer lag; r(0) = 1."""
        return covariance(self, lag)

    def to_json_dict(self) -> dict:
        if self.family == "ar1":
            return {"family": "ar1", "params": {"a": self.a}}
        if self.family == "fgn":
            return {"family": "fgn", "params": {"H": self.hurst}}
        return {"family": "white", "params": {}}

    def label(self) -> str:
        if self.family == "ar1":
            return f"ar1(a={self.a:g})"
        if self.family == "fgn":
            return f"fgn(H={self.hurst:g})"
        return "white"


def white() -> CovarianceKernel:
    return CovarianceKernel("white")


def ar1(a: float) -> CovarianceKernel:
    return CovarianceKernel("ar1", a=float(a))


def fgn(hurst: float) -> CovarianceKernel:
    return CovarianceKernel("fgn", hurst=float(hurst))


def covariance(kernel: CovarianceKernel, lag: int) -> float:
    """Evaluate the kernel at a nonnegative integer lag."""
    k = int(lag)
    if k < 0:
        raise ValueError("lag must be nonnegative")
    if k == 0:
        return 1.0
    if kernel.family == "white":
        return 0.0
    if kernel.family == "ar1":
        return float(kernel.a) ** k
    h2 = 2.0 * kernel.hurst
    return 0.5 * ((k + 1.0) ** h2 - 2.0 * k**h2 + (k - 1.0) ** h2)


def kernel_to_json(kernel: CovarianceKernel) -> str:
    return json.dumps(kernel.to_json_dict(), sort_keys=True)


def kernel_from_json(text: str | dict) -> CovarianceKernel:
    """Parse a kernel from its JSON object form ``{"family": ..., "params": {...}}``."""
    obj = json.loads(text) if isinstance(text, str) else text
    if not isinstance(obj, dict) or "family" not in obj:
        raise ValueError("kernel JSON must be an object with a 'family' key")
    family = str(obj["family"]).lower()
    params = obj.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ValueError("kernel 'params' must be an object")
    if family == "white":
        return white()
    if family == "ar1":
        if "a" not in params:
            raise ValueError("ar1 kernel needs params.a")
        return ar1(float(params["a"]))
    if family == "fgn":
        if "H" not in params:
            raise ValueError("fgn kernel needs params.H")
        return fgn(float(params["H"]))
    raise ValueError(f"unknown kernel family {family!r}")


@dataclass(frozen=True)
class ValidationReport:
    """Positive-definiteness diagnostics of a kernel over a finite horizon.

    ``beta_decay_exponent`` is the slope alpha fitted to beta_n**2 ~ C * n**(-alpha)
    over the tail half of the horizon; None when the tail PACF is numerically zero
    (white or Markov kernels). ``slow_decay`` flags a finite fitted exponent <= 3,
    i.e. a polynomial-rate PACF tail as for fractional noise.
    """

    kernel: CovarianceKernel
    horizon: int
    min_sigma2: float
    max_abs_beta: float
    beta_decay_exponent: float | None
    slow_decay: bool
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_json_dict(),
            "horizon": self.horizon,
            "min_sigma2": self.min_sigma2,
            "max_abs_beta": self.max_abs_beta,
            "beta_decay_exponent": self.beta_decay_exponent,
            "slow_decay": self.slow_decay,
            "passed": self.passed,
        }


def validate_kernel(kernel: CovarianceKernel, horizon: int) -> ValidationReport:
    """Check positive definiteness of the kernel up to ``horizon`` steps.

    Runs the Durbin-Levinson recursion and reports the minimum innovation
    variance, the maximum |beta_n| and the fitted decay exponent of beta_n**2.

    Raises
    ------
    NotPositiveDefinite
        If an innovation variance falls below the variance floor before the
        horizon is reached.
    """
    from .filtering import pacf_and_variances

    n = int(horizon)
    if n < 1:
        raise ValueError("horizon must be at least 1")
    beta, sigma2 = pacf_and_variances(kernel, n)
    exponent = _fit_decay_exponent(beta)
    slow = exponent is not None and exponent <= 3.0
    return ValidationReport(
        kernel=kernel,
        horizon=n,
        min_sigma2=float(sigma2.min()),
        max_abs_beta=float(np.abs(beta).max()) if beta.size else 0.0,
        beta_decay_exponent=exponent,
        slow_decay=slow,
        passed=True,
    )


def _fit_decay_exponent(beta: np.ndarray) -> float | None:
    """Log-log slope of beta_n**2 over the tail half; None for a numerically zero tail."""
    m = beta.size
    if m < 6:
        return None
    start = m // 2
    ns = np.arange(1, m + 1)[start:]
    b2 = beta[start:] ** 2
    keep = b2 > 1e-28
    if keep.sum() < 3:
        return None
    slope = np.polyfit(np.log(ns[keep]), np.log(b2[keep]), 1)[0]
    return float(-slope)


@dataclass(frozen=True, eq=False)
class NoisePath:
    """A sampled stationary Gaussian path together with its provenance."""

    values: np.ndarray
    kernel: CovarianceKernel
    seed: int

    @property
    def n(self) -> int:
        return self.values.size


def noise_from_innovations(kernel: CovarianceKernel, eps: np.ndarray) -> np.ndarray:
    """Map i.i.d. standard normal innovations to an exact stationary path.

    Inverts the whitening map of the Durbin-Levinson filter step by step:
    xi_m = sigma_m * eps_m - sum_{i<m} k(m, i) * xi_i.
    """
    from .filtering import _stream

    eps = np.ascontiguousarray(eps, dtype=float)
    n = eps.size
    if n == 0:
        return np.empty(0)
    if kernel.family == "white":
        # All whitening rows are trivial: the path is its own innovation sequence.
        return eps.copy()
    xi = np.empty(n)
    for step in _stream(kernel, n):
        i = step.index - 1
        pred = step.row[:i] @ xi[:i] if i else 0.0
        xi[i] = math.sqrt(step.sigma2) * eps[i] - pred
    return xi


def sample_noise(kernel: CovarianceKernel, n: int, seed: int) -> NoisePath:
    """Sample an exact stationary Gaussian path of length ``n``.

    Deterministic given ``(kernel, n, seed)``; the innovations are drawn from
    the root substream of ``seed`` (see :mod:`armle.rng`).
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    eps = rng.standard_normals(rng.substream(seed), n)
    return NoisePath(values=noise_from_innovations(kernel, eps), kernel=kernel, seed=int(seed))


def write_noise_csv(path: NoisePath, fh) -> None:
    """Write a noise path as single-column CSV with header ``xi``."""
    fh.write("xi\n")
    for v in path.values:
        fh.write(f"{float(v)!r}\n")
