"""The 2p-dimensional filtered state process and the exact log-likelihood.

From observations x_1..x_n and a noise kernel, each lag vector
Y_m = (x_m, ..., x_{m-p+1}) (zero padded below index 1) is whitened
componentwise with the current filter row,

    Z_m = sum_{i<=m} k(m, i) Y_i,

and paired with the PACF-weighted running sum to form the state

    zeta_m = (Z_m, sum_{k<m} beta_k Z_k),        zeta_0 = 0.

Along the true model the state is Markov:
zeta_m = T(theta, beta_{m-1}) zeta_{m-1} + e_1 sigma_m eps_m, where T is the
block transition [[A, beta*A], [beta*I, I]]. Writing w_m for the score weight
(first block of zeta_{m-1} plus beta_{m-1} times the second), the innovation
at parameter theta is eps_m(theta) = (Z_m[0] - w_m . theta) / sigma_m and the
exact log-likelihood is Gaussian in these innovations.

The construction depends only on the data and the kernel, never on theta; all
theta-dependence enters through the quadratic form in (gram, moment).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, TooShort
from .filtering import _stream
from .noise import CovarianceKernel

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class FilteredPath:
    """Filtered state path built from one observation series.

    Fields
    ------
    states : ndarray, shape (n, 2p)
        Rows are zeta_1 .. zeta_n.
    sigma2 : ndarray, shape (n,)
        Prediction variances sigma_1**2 .. sigma_n**2.
    pacf : ndarray, shape (n,)
        pacf[m] = beta_m for 1 <= m <= n-1 and pacf[0] = 0; pacf[m] weights
        the transition from state m to state m+1 and the score weight w_{m+1}.
    p : int
        Model order.
    """

    states: np.ndarray
    sigma2: np.ndarray
    pacf: np.ndarray
    p: int

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def whitened(self) -> np.ndarray:
        """First block Z_1..Z_n, shape (n, p)."""
        return self.states[:, : self.p]

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(self.sigma2)


def filter_observations(x, kernel: CovarianceKernel, p: int) -> FilteredPath:
    """Build the filtered state path from observations.

    Parameters
    ----------
    x : array_like
        Observations x_1..x_n with n >= p + 1.
    kernel : CovarianceKernel
        Noise covariance kernel.
    p : int
        Model order (>= 1).
    """
    x = np.ascontiguousarray(x, dtype=float)
    p = int(p)
    if p < 1:
        raise ValueError("p must be at least 1")
    n = x.size
    if n < p + 1:
        raise TooShort(f"need at least p + 1 = {p + 1} observations, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("observations must be finite")
    z = np.zeros((n, p))
    carry = np.zeros((n, p))
    sigma2 = np.empty(n)
    pacf = np.zeros(n)
    for step in _stream(kernel, n):
        m = step.index
        i = m - 1
        sigma2[i] = step.sigma2
        pacf[i] = step.beta_prev
        row = step.row
        for j in range(min(p, m)):
            z[i, j] = row[j:] @ x[: m - j]
        if m >= 2:
            carry[i] = carry[i - 1] + pacf[i] * z[i - 1]
    return FilteredPath(
        states=np.hstack([z, carry]), sigma2=sigma2, pacf=pacf, p=p
    )


def transition(theta, pacf_value: float) -> np.ndarray:
    """Block transition matrix [[A, beta*A], [beta*I, I]] of size 2p."""
    from .ar import companion

    a = companion(theta)
    p = a.shape[0]
    eye = np.eye(p)
    b = float(pacf_value)
    return np.block([[a, b * a], [b * eye, eye]])


def score_weights(path: FilteredPath) -> np.ndarray:
    """Score weights w_1..w_n, shape (n, p); w_1 = 0 since zeta_0 = 0.

    w_m combines the previous state's two blocks with beta_{m-1}:
    w_m = zeta_{m-1}[:p] + beta_{m-1} * zeta_{m-1}[p:].
    """
    p = path.p
    w = np.zeros((path.n, p))
    if path.n > 1:
        prev = path.states[:-1]
        w[1:] = prev[:, :p] + path.pacf[1:, None] * prev[:, p:]
    return w


def innovations(path: FilteredPath, theta) -> np.ndarray:
    """Innovation sequence eps_1(theta)..eps_n(theta) of the path."""
    th = _check_theta(path, theta)
    w = score_weights(path)
    return (path.states[:, 0] - w @ th) / path.sigma


def log_likelihood(path: FilteredPath, theta) -> float:
    """Exact Gaussian log-likelihood of the observations at ``theta``."""
    eps = innovations(path, theta)
    n = path.n
    return float(
        -0.5 * float(eps @ eps) - 0.5 * n * _LOG_2PI - 0.5 * float(np.log(path.sigma2).sum())
    )


@dataclass(frozen=True, eq=False)
class ScoreAccumulator:
    """Accumulated score statistics: the Gram matrix
    sum_i w_i w_i^T / sigma_i**2, the theta-free moment vector
    sum_i w_i Z_i[0] / sigma_i**2, and the number of terms.
    """

    gram: np.ndarray
    moment: np.ndarray
    count: int


def gram_moment(path: FilteredPath) -> ScoreAccumulator:
    """Theta-free accumulation of the Gram matrix and moment vector."""
    w = score_weights(path)
    sw = w / path.sigma[:, None]
    gram = sw.T @ sw
    moment = w.T @ (path.states[:, 0] / path.sigma2)
    return ScoreAccumulator(gram=gram, moment=moment, count=path.n)


def accumulate(path: FilteredPath, theta) -> tuple[ScoreAccumulator, np.ndarray]:
    """Return the accumulator together with the score vector at ``theta``.

    The score is sum_i w_i eps_i(theta) / sigma_i, which equals
    moment - gram @ theta up to rounding.
    """
    th = _check_theta(path, theta)
    acc = gram_moment(path)
    w = score_weights(path)
    eps = (path.states[:, 0] - w @ th) / path.sigma
    score = w.T @ (eps / path.sigma)
    return acc, score


def write_state_csv(path: FilteredPath, fh) -> None:
    """Write the state path as CSV with 2p + 1 columns: index then components."""
    p = path.p
    header = ["m"] + [f"state_{j + 1}" for j in range(2 * p)]
    fh.write(",".join(header) + "\n")
    for m in range(path.n):
        cells = [str(m + 1)] + [repr(float(v)) for v in path.states[m]]
        fh.write(",".join(cells) + "\n")


def _check_theta(path: FilteredPath, theta) -> np.ndarray:
    from .ar import as_theta

    th = as_theta(theta)
    if th.size != path.p:
        raise DimensionMismatch(
            f"theta has length {th.size}, path was built with p = {path.p}"
        )
    return th
