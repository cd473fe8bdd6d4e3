import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadica import appendix as A
from dyadica.appendix import AppendixConfig
from dyadica.measure import DensityMeasure


@pytest.fixture(scope="module")
def sums():
    return A.quadratic_sums(AppendixConfig(1.5, 1.0, 0.1))


@settings(max_examples=100, deadline=None)
@given(st.floats(1.05, 1.95), st.floats(0.05, 1.0), st.floats(0.001, 0.999))
def test_exponent_algebra(p, alpha, frac):
    eps = frac * min((2 - p) / 2, alpha) * 0.999
    cfg = AppendixConfig(p, alpha, eps)
    assert 2 * cfg.eta + 1 == pytest.approx((alpha - eps) * 2 / p, abs=1e-14)
    assert cfg.lhs_exponent == pytest.approx(-eps - p / 2, abs=1e-14)
    assert cfg.diverges


def test_config_validation():
    with pytest.raises(ValueError):
        AppendixConfig(2.5)
    with pytest.raises(ValueError):
        AppendixConfig(1.5, 1.0, 0.3)
    assert not AppendixConfig(1.5, 1.0, 0.3, control=True).diverges


def test_dual_config_swaps_exponent():
    cfg = A.dual_config(3.0)
    assert cfg.p == pytest.approx(1.5)
    assert cfg.alpha == 1.0 and cfg.eps == pytest.approx(0.125)
    assert cfg.diverges
    with pytest.raises(ValueError):
        A.dual_config(1.5)


def test_omega_quadrature_matches_gamma_closed_form():
    d = DensityMeasure("omega", alpha=1.0, p=1.5)
    for a, b in [(0.0, 0.25), (1e-6, 1e-3), (0.1, 0.5)]:
        assert A._omega_integral_quad(1.5, 1.0, a, b) == pytest.approx(float(d.interval_mass(a, b)), rel=1e-10)


def test_local_ap_degenerate_interval():
    with pytest.raises(ValueError):
        A.local_ap(1.5, 1.0, 0.1, 0.1)
    with pytest.raises(ValueError):
        A.local_ap(1.5, 1.0, 0.0, 0.75)


def test_local_ap_band():
    rep = A.local_ap_band(1.5, 1.0, 2, 20)
    assert rep.band <= 4
    assert np.all(np.abs(rep.step_ratios[-10:] - 1) <= 0.2)


def test_rhs_converges(sums):
    Ns, inc = sums.rhs_tail()
    C = A.rhs_tail_constant(sums.config)
    assert np.all(inc * Ns ** 0.1 <= C * (1 + 1e-6))
    big = Ns >= 1e4
    np.testing.assert_allclose(inc[big] * Ns[big] ** 0.1, C, rtol=0.02)


def test_lhs_increment_growth(sums):
    # increments of the left side grow like N^(1 + eta p - alpha) = N^0.15
    assert sums.lhs_increment_slope() == pytest.approx(0.15, abs=0.03)
    assert sums.lhs_integral[-1] > sums.lhs_integral[0]


def test_series_variants_agree(sums):
    np.testing.assert_allclose(sums.lhs_series_pre, sums.lhs_series_post, rtol=1e-12)
    ratio = sums.rhs_integral[-1] / sums.rhs_series[-1]
    assert 0.5 < ratio < 2


def test_negative_control_bounded():
    s = A.quadratic_sums(AppendixConfig(1.5, 1.0, 0.3, n_max=10 ** 5, control=True))
    assert s.lhs_increment_slope(1e3, 1e5) < -0.02
    Ns, inc = A._doubling_increments(s.checkpoints, s.lhs_integral)
    r = inc[1:] / inc[:-1]
    # doubling increments shrink geometrically, so the partial sums stay below a finite bound
    assert np.all(r[Ns[:-1] >= 1e3] < 1)
    bound = s.lhs_integral[-1] + inc[-1] * r[-1] / (1 - r[-1])
    assert math.isfinite(bound)


def test_large_index_no_overflow():
    s = A.quadratic_sums(AppendixConfig(1.5, 1.0, 0.1, n_max=3000), checkpoints=np.array([1000, 2000, 3000]))
    assert np.all(np.isfinite(s.lhs_integral)) and np.all(s.lhs_integral > 0)


def test_maximal_at_quarter():
    # for alpha = 1 the best interval at x = 1/4 is (0, 1/4] itself: x Mf(x) = F(1/4)
    assert A.scaled_maximal(1.0, [math.log(4)])[0] == pytest.approx(1 / math.log(4), rel=1e-9)


def test_maximal_profile_stable():
    xs = 2.0 ** -np.arange(4, 21)
    prof = A.maximal_profile(1.0, xs)
    np.testing.assert_allclose(prof, 1.0, rtol=1e-6)
    prof_half = A.maximal_profile(0.5, xs)
    np.testing.assert_allclose(prof_half, 2.0, rtol=1e-6)


def test_maximal_outside_support_decays():
    # beyond the support every interval average is at most total mass / distance
    total = 1 / math.log(2)
    for u in (0.3, 0.1):
        x = math.exp(-u)
        assert A.scaled_maximal(1.0, [u])[0] <= total * (1 + 1e-12)


def test_failure_increments_constant_alpha_one():
    U = math.log(2) * 2.0 ** np.arange(1, 9)
    inc = np.diff(A.maximal_failure(1.0, U))
    np.testing.assert_allclose(inc / math.log(2), 1.0, rtol=0.02)


def test_failure_growth_alpha_half():
    U = math.log(2) * 2.0 ** np.arange(2, 10)
    assert A.failure_increment_slope(0.5, U) == pytest.approx(0.5, abs=0.05)


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_companion_integral(alpha):
    assert A.companion_integral(alpha) == pytest.approx(math.log(2) ** -alpha / alpha, rel=1e-12)


def test_tower_growth_monotone():
    vals = [v for _, v in A.tower_growth(depths=range(8, 15))]
    assert all(b > a for a, b in zip(vals, vals[1:]))
