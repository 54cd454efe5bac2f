"""Estimation and testing from a filtered state path.

The log-likelihood is exactly quadratic in theta, so the maximizer solves the
normal equations gram @ theta = moment, the likelihood-ratio statistic equals
the quadratic form score^T gram^{-1} score, and the expansion of
log L(theta_0 + u/sqrt(n)) - log L(theta_0) in u is an algebraic identity with
empirical curvature gram/n. Critical values come from the chi-square
distribution with p degrees of freedom.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import gammainc, gammaincc, gammaln

from .ar import as_theta, fisher_info, require_stable
from .exceptions import SingularGram
from .state import FilteredPath, gram_moment, log_likelihood, accumulate

#: Gram matrices with a larger 2-norm condition number are rejected as singular.
GRAM_CONDITION_CAP = 1e12


@dataclass(frozen=True, eq=False)
class EstimationResult:
    """Maximum-likelihood estimate with its empirical curvature.

    ``gram_over_n`` is the information plug-in (the averaged Gram matrix);
    ``cond`` its 2-norm condition number before averaging.
    """

    theta_hat: np.ndarray
    gram_over_n: np.ndarray
    n: int
    cond: float

    @property
    def p(self) -> int:
        return self.theta_hat.size

    @property
    def stderr(self) -> np.ndarray:
        """Plug-in standard errors sqrt(diag((n * gram_over_n)^{-1}))."""
        cov = np.linalg.inv(self.n * self.gram_over_n)
        return np.sqrt(np.diag(cov))


def _solve_gram(gram: np.ndarray, moment: np.ndarray) -> tuple[np.ndarray, float]:
    evals = np.linalg.eigvalsh(gram)
    lo, hi = float(evals[0]), float(evals[-1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo <= 0.0:
        raise SingularGram(math.inf)
    cond = hi / lo
    if cond > GRAM_CONDITION_CAP:
        raise SingularGram(cond)
    cho = scipy.linalg.cho_factor(gram)
    theta = scipy.linalg.cho_solve(cho, moment)
    # One refinement step keeps the normal-equation residual at rounding level.
    theta = theta + scipy.linalg.cho_solve(cho, moment - gram @ theta)
    return theta, cond


def mle(path: FilteredPath) -> EstimationResult:
    """Exact maximum-likelihood estimate of theta from a filtered path.

    Raises
    ------
    SingularGram
        If the Gram matrix is singular or its condition number exceeds the cap.
    """
    acc = gram_moment(path)
    theta, cond = _solve_gram(acc.gram, acc.moment)
    return EstimationResult(
        theta_hat=theta, gram_over_n=acc.gram / path.n, n=path.n, cond=cond
    )


def lr_statistic(path: FilteredPath, theta0) -> float:
    """Likelihood-ratio statistic 2 (log L(theta_hat) - log L(theta_0))."""
    th0 = as_theta(theta0)
    est = mle(path)
    stat = 2.0 * (log_likelihood(path, est.theta_hat) - log_likelihood(path, th0))
    return max(stat, 0.0)


@dataclass(frozen=True, eq=False)
class TestResult:
    statistic: float
    critical: float
    alpha: float
    pvalue: float
    reject: bool
    theta_hat: np.ndarray
    theta0: np.ndarray


def lr_test(path: FilteredPath, theta0, alpha: float) -> TestResult:
    """Likelihood-ratio test of theta = theta0 at level ``alpha``.

    Rejects when the statistic reaches the upper-alpha chi-square quantile
    with p degrees of freedom.
    """
    th0 = as_theta(theta0)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    est = mle(path)
    stat = 2.0 * (log_likelihood(path, est.theta_hat) - log_likelihood(path, th0))
    stat = max(stat, 0.0)
    crit = chi2_quantile(th0.size, alpha)
    return TestResult(
        statistic=stat,
        critical=crit,
        alpha=float(alpha),
        pvalue=chi2_sf(stat, th0.size),
        reject=bool(stat >= crit),
        theta_hat=est.theta_hat,
        theta0=th0,
    )


def lan_decomposition(path: FilteredPath, theta0, u) -> tuple[float, float, float]:
    """Split log L(theta_0 + u/sqrt(n)) - log L(theta_0) into three parts.

    Returns
    -------
    (score_term, info_term, remainder)
        score_term = <u, score/sqrt(n)>, info_term = -<u, I(theta_0) u>/2 with
        the asymptotic information matrix, and remainder
        -<u, (gram/n - I(theta_0)) u>/2. The three sum to the exact likelihood
        difference.

    Raises
    ------
    Unstable
        If theta_0 or theta_0 + u/sqrt(n) is outside the stability region.
    """
    th0 = require_stable(theta0)
    u = as_theta(u)
    if u.size != th0.size:
        raise ValueError("u must have the same length as theta0")
    n = path.n
    require_stable(th0 + u / math.sqrt(n))
    acc, score = accumulate(path, th0)
    info = fisher_info(th0)
    score_term = float(u @ score) / math.sqrt(n)
    info_term = -0.5 * float(u @ info @ u)
    remainder = -0.5 * float(u @ (acc.gram / n - info) @ u)
    return score_term, info_term, remainder


def chi2_cdf(x: float, dof: int) -> float:
    """Chi-square CDF via the regularized lower incomplete gamma function."""
    if x <= 0.0:
        return 0.0
    return float(gammainc(dof / 2.0, x / 2.0))


def chi2_sf(x: float, dof: int) -> float:
    """Chi-square survival function (upper tail)."""
    if x <= 0.0:
        return 1.0
    return float(gammaincc(dof / 2.0, x / 2.0))


def _chi2_pdf(x: float, dof: int) -> float:
    if x <= 0.0:
        return 0.0
    k = dof / 2.0
    return math.exp((k - 1.0) * math.log(x) - x / 2.0 - gammaln(k) - k * math.log(2.0))


def chi2_quantile(dof: int, alpha: float) -> float:
    """Upper-alpha quantile of the chi-square law with ``dof`` degrees of freedom.

    Solves sf(x) = alpha by Newton iteration on the regularized incomplete
    gamma CDF, safeguarded by bisection, to absolute tolerance 1e-9.
    """
    dof = int(dof)
    if dof < 1:
        raise ValueError("dof must be a positive integer")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    lo, hi = 0.0, float(dof) + 1.0
    while chi2_sf(hi, dof) > alpha:
        hi *= 2.0
        if hi > 1e12:
            break
    x = 0.5 * (lo + hi)
    for _ in range(200):
        f = chi2_sf(x, dof) - alpha
        if f > 0.0:
            lo = x
        else:
            hi = x
        d = _chi2_pdf(x, dof)
        step = f / d if d > 0.0 else 0.0
        xn = x + step
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 1e-9 and hi - lo <= 1e-6:
            return xn
        x = xn
    return x


def noncentral_chi2_sf(x: float, dof: int, noncentrality: float) -> float:
    """Upper tail of the noncentral chi-square law via its Poisson mixture series."""
    lam = float(noncentrality)
    if lam < 0.0:
        raise ValueError("noncentrality must be nonnegative")
    if lam == 0.0:
        return chi2_sf(x, dof)
    half = lam / 2.0
    logw = -half
    total = 0.0
    weight_sum = 0.0
    j = 0
    while True:
        w = math.exp(logw)
        total += w * chi2_sf(x, dof + 2 * j)
        weight_sum += w
        if weight_sum >= 1.0 - 1e-14 and j > half:
            break
        j += 1
        logw += math.log(half) - math.log(j)
        if j > 100000:
            break
    return min(max(total, 0.0), 1.0)


@dataclass(frozen=True, eq=False)
class ConfidenceEllipsoid:
    """Set {theta : (theta_hat - theta)^T shape (theta_hat - theta) <= radius}."""

    center: np.ndarray
    shape: np.ndarray
    radius: float

    def contains(self, theta) -> bool:
        d = self.center - as_theta(theta)
        return bool(float(d @ self.shape @ d) <= self.radius)


def confidence_ellipsoid(
    result: EstimationResult, alpha: float, information: str = "empirical"
) -> ConfidenceEllipsoid:
    """Level 1 - alpha confidence ellipsoid around the estimate.

    The quadratic form uses the empirical curvature gram/n by default;
    ``information="fisher"`` substitutes the asymptotic information matrix
    evaluated at the estimate. The radius is the upper-alpha chi-square
    quantile divided by n, so for p = 1 the set reduces to
    theta_hat +/- sqrt(quantile / (n * info)).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if information == "empirical":
        shape = result.gram_over_n
    elif information == "fisher":
        shape = fisher_info(result.theta_hat)
    else:
        raise ValueError("information must be 'empirical' or 'fisher'")
    radius = chi2_quantile(result.p, alpha) / result.n
    return ConfidenceEllipsoid(center=result.theta_hat, shape=shape, radius=radius)
