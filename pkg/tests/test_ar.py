import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import armle
from armle import (
    Unstable,
    apply_ar,
    ar1,
    characteristic_roots,
    companion,
    fisher_info,
    fisher_info_inverse,
    is_stable,
    require_stable,
    simulate_series,
    stability,
    white,
)

from _oracles import ar_recursion, random_stable_theta, series_fisher


def test_companion_layouts():
    np.testing.assert_array_equal(companion((0.5,)), [[0.5]])
    np.testing.assert_array_equal(companion((0.5, 0.3)), [[0.5, 0.3], [1.0, 0.0]])
    shift = companion((0.0, 0.0, 0.0))
    np.testing.assert_array_equal(shift, np.diag([1.0, 1.0], k=-1))


def test_characteristic_roots_quadratic():
    # z^2 - 0.5 z - 0.3: roots (0.5 +- sqrt(1.45)) / 2.
    roots = np.sort_complex(characteristic_roots((0.5, 0.3)))
    expected = np.sort_complex(
        np.array([(0.5 - math.sqrt(1.45)) / 2, (0.5 + math.sqrt(1.45)) / 2])
    )
    np.testing.assert_allclose(roots, expected, atol=1e-12)


def _canon_roots(z):
    # Sort on rounded coordinates so conjugate pairs order identically even
    # when two solvers disagree in the last ulp of the real part.
    z = np.asarray(z, dtype=complex)
    order = np.lexsort((np.round(z.imag, 8), np.round(z.real, 8)))
    return z[order]


def test_roots_match_numpy_oracle():
    gen = np.random.default_rng(1)
    for _ in range(50):
        p = int(gen.integers(1, 6))
        theta = gen.uniform(-0.6, 0.6, size=p)
        ours = _canon_roots(characteristic_roots(theta))
        ref = _canon_roots(np.roots(np.r_[1.0, -theta]))
        np.testing.assert_allclose(ours, ref, atol=1e-9)


def test_roots_match_companion_eigenvalues():
    theta = (0.4, 0.2, -0.1)
    ours = _canon_roots(characteristic_roots(theta))
    eig = _canon_roots(np.linalg.eigvals(companion(theta)))
    np.testing.assert_allclose(ours, eig, atol=1e-9)


def test_stability_classification():
    assert is_stable((0.5,))
    assert is_stable((0.5, 0.3))
    # z^2 - 1.2 z + 0.2 has roots 1.0 and 0.2: the unit root fails the margin.
    assert not is_stable((1.2, -0.2))
    assert not is_stable((1.0,))
    assert not is_stable((0.7, 0.5))
    result = stability((0.5, 0.3))
    assert result.stable
    np.testing.assert_allclose(
        result.root_moduli,
        [(math.sqrt(1.45) + 0.5) / 2, (math.sqrt(1.45) - 0.5) / 2],
        rtol=1e-12,
    )


def test_stability_margin_is_strict():
    assert not is_stable((1.0 - 1e-12,))
    assert is_stable((1.0 - 1e-6,))


def test_require_stable_raises_with_modulus():
    with pytest.raises(Unstable) as err:
        require_stable((1.2, -0.2))
    assert "1" in str(err.value)


def test_random_stable_thetas_are_stable():
    gen = np.random.default_rng(7)
    for _ in range(100):
        p = int(gen.integers(1, 5))
        assert is_stable(random_stable_theta(gen, p))


@given(st.floats(min_value=-0.999, max_value=0.999))
@settings(max_examples=50, deadline=None)
def test_ar1_stability_property(theta1):
    assert is_stable((theta1,))


def test_fisher_info_ar1_closed_form():
    for t in (-0.9, -0.3, 0.0, 0.5, 0.95):
        info = fisher_info((t,))
        assert info.shape == (1, 1)
        assert info[0, 0] == pytest.approx(1.0 / (1.0 - t * t), rel=1e-12)


def test_fisher_info_matches_series_oracle():
    for theta in [(0.5, 0.3), (0.4, -0.3), (0.3, 0.2, 0.1), (0.5, -0.2, 0.1)]:
        np.testing.assert_allclose(
            fisher_info(theta), series_fisher(theta, terms=500), rtol=1e-10, atol=1e-12
        )


def test_fisher_info_fixed_point_residual():
    gen = np.random.default_rng(11)
    for _ in range(100):
        p = int(gen.integers(1, 5))
        theta = random_stable_theta(gen, p)
        info = fisher_info(theta)
        a = companion(theta)
        b = np.zeros(p)
        b[0] = 1.0
        resid = info - (a.T @ info @ a + np.outer(b, b))
        assert np.linalg.norm(resid, 2) <= 1e-10
        np.testing.assert_allclose(info, info.T, atol=1e-14)
        assert np.all(np.linalg.eigvalsh(info) > 0)


def test_fisher_info_inverse():
    theta = (0.5, 0.3)
    prod = fisher_info(theta) @ fisher_info_inverse(theta)
    np.testing.assert_allclose(prod, np.eye(2), atol=1e-12)


def test_fisher_info_rejects_unstable():
    with pytest.raises(Unstable):
        fisher_info((1.1,))


def test_apply_ar_matches_loop_oracle():
    gen = np.random.default_rng(3)
    for theta in [(0.5,), (0.5, 0.3), (0.4, 0.2, -0.3)]:
        xi = gen.standard_normal(40)
        np.testing.assert_allclose(
            apply_ar(theta, xi), ar_recursion(theta, xi), rtol=1e-13, atol=1e-13
        )


def test_apply_ar_zero_presample():
    # X_1 = xi_1 regardless of theta.
    xi = np.array([2.0, 0.0, 0.0])
    x = apply_ar((0.5,), xi)
    np.testing.assert_allclose(x, [2.0, 1.0, 0.5], rtol=1e-15)


def test_simulate_series_deterministic():
    a = simulate_series((0.5,), ar1(0.3), 64, seed=5)
    b = simulate_series((0.5,), ar1(0.3), 64, seed=5)
    np.testing.assert_array_equal(a, b)
    c = simulate_series((0.5,), ar1(0.3), 64, seed=6)
    assert not np.array_equal(a, c)


def test_simulate_series_lag1_moment():
    # For white noise the stationary lag-1 autocorrelation approaches theta.
    x = simulate_series((0.5,), white(), 40_000, seed=2)
    lag1 = np.mean(x[1:] * x[:-1]) / np.mean(x * x)
    assert lag1 == pytest.approx(0.5, abs=0.02)


def test_simulate_series_rejects_unstable():
    with pytest.raises(Unstable):
        simulate_series((1.05,), white(), 100, seed=0)


def test_theta_validation():
    with pytest.raises(ValueError):
        armle.as_theta(np.array([]))
    with pytest.raises(ValueError):
        armle.as_theta(np.array([np.nan]))
    with pytest.raises(ValueError):
        armle.as_theta(np.array([[0.1, 0.2]]))
