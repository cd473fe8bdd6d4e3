import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadica.alpert import AlpertSystem
from dyadica.grid import CubeId, GridSpec
from dyadica.kernel import (KernelSpec, Operator, check_kappa_large, expected_slope, kernel_from_json,
                            operator_norm, pivotal_parts, pivotal_ratio, poisson, poisson_decay_ratio,
                            smoothness_slopes, smoothstep)
from dyadica.measure import cascade, point_masses, uniform

HILBERT = KernelSpec("hilbert", 0.0, 0.1, 1.0)


def test_smoothstep_endpoints():
    np.testing.assert_allclose(smoothstep([-1, 0, 0.5, 1, 2]), [0, 0, 0.5, 1, 1])


def test_hilbert_value():
    assert float(HILBERT([0.75], [0.25])) == pytest.approx(2.0, abs=1e-15)


def test_truncated_near_diagonal():
    assert float(HILBERT([0.5], [0.45])) == 0.0


@pytest.mark.parametrize("spec", [
    HILBERT,
    KernelSpec("signed_fractional", 0.5, 0.05, 1.5),
    KernelSpec("riesz", 0.7, 0.05, 1.5, n=2, component=1),
])
def test_antisymmetry(spec, rng):
    X = rng.uniform(size=(30, spec.n))
    Y = rng.uniform(size=(30, spec.n))
    np.testing.assert_allclose(spec.matrix(X, Y), -spec.matrix(Y, X).T, atol=1e-12)


def test_single_atom_operator():
    g = GridSpec(1, 4)
    sig = point_masses(g, [[0.25]], [1.0])
    om = point_masses(g, [[0.75]], [1.0])
    op = Operator(HILBERT, sig, om)
    np.testing.assert_allclose(op.apply(np.ones(1)), [2.0])
    np.testing.assert_allclose(op.apply(np.zeros(1)), [0.0])
    assert op.norm(2).value == pytest.approx(2.0)


def test_self_pairing_vanishes(cascade6, rng):
    op = Operator(KernelSpec("hilbert", 0, 0.02, 2.0), cascade6, cascade6)
    f = rng.normal(size=len(cascade6))
    assert abs(op.pairing(f, f)) < 1e-12 * np.abs(op.apply(f)).max()


def test_empty_sigma_norm_zero():
    g = GridSpec(1, 4)
    sig = point_masses(g, np.zeros((0, 1)), [])
    op = Operator(HILBERT, sig, uniform(g))
    assert op.norm(2).value == 0.0


def test_duality_of_p2_norm():
    sig = cascade(GridSpec(1, 5), 0.25, seed=1)
    om = cascade(GridSpec(1, 5), 0.25, seed=2)
    spec = KernelSpec("hilbert", 0, 0.02, 2.0)
    a = Operator(spec, sig, om).norm(2).value
    b = Operator(spec, om, sig).norm(2).value  # antisymmetric kernel: the transpose up to sign
    assert a == pytest.approx(b, rel=1e-12)


def test_lp_norm_ascent_lower_bound():
    sig = cascade(GridSpec(1, 5), 0.25, seed=1)
    op = Operator(KernelSpec("hilbert", 0, 0.02, 2.0), sig, sig)
    est = operator_norm(op, 2.0000001, restarts=3, iters=100)
    assert est.kind == "lower-bound"
    assert est.value <= op.norm(2).value * (1 + 1e-4)
    assert est.value >= 0.98 * op.norm(2).value


def test_poisson_lebesgue():
    mu = uniform(GridSpec(1, 12))
    val = poisson(CubeId(0, (0,)), mu.points, mu.masses, 0.0, 1.0)
    assert val == pytest.approx(2 / 3, abs=1e-3)


def test_poisson_single_atom_at_centre():
    J = CubeId(3, (2,))
    assert poisson(J, J.center[None, :], np.array([0.4]), 0.3, 2.0) == pytest.approx(0.4 * J.side ** -(1 - 0.3))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 4), st.floats(0.1, 3), st.floats(0.3, 0.9))
def test_poisson_monotone_in_t_for_far_mass(t, dt, y):
    J = CubeId(4, (0,))
    pts, m = np.array([[y]]), np.array([1.0])
    assert poisson(J, pts, m, 0.0, t + dt) <= poisson(J, pts, m, 0.0, t)


def test_kappa_large_band_uniform():
    rep = check_kappa_large(uniform(GridSpec(1, 8)), 0.0, 2.0, 1.0)
    assert rep.passed
    assert rep.lower <= rep.ratio_min <= rep.ratio_max <= rep.upper


def test_poisson_decay_empty_difference():
    sig = point_masses(GridSpec(1, 6), [[0.1]], [1.0])
    I = CubeId(2, (0,))
    J = CubeId(5, (1,))
    assert poisson_decay_ratio(J, I, CubeId(1, (0,)), sig, 0.0, 1.0, 0.5) == 0.0


def test_poisson_decay_single_far_atom():
    sig = point_masses(GridSpec(1, 6), [[0.4]], [1.0])
    I, J, K = CubeId(2, (0,)), CubeId(5, (3,)), CubeId(1, (0,))
    lam, kappa, eps = 0.0, 1.0, 0.5
    PJ = J.side / (J.side + abs(0.4 - J.center[0])) ** 2
    PI = I.side / (I.side + abs(0.4 - I.center[0])) ** 2
    scale = (J.side / I.side) ** (kappa - eps * (1 + kappa))
    assert poisson_decay_ratio(J, I, K, sig, lam, kappa, eps) == pytest.approx(PJ / (scale * PI), rel=1e-12)


def test_pivotal_single_atom_closed_form():
    om = uniform(GridSpec(1, 6))
    J = CubeId(3, (1,))
    sys_ = AlpertSystem(om, 1)
    psi = np.zeros(len(om))
    a, b = om.cube_range(J)
    psi[a:b] = sys_.wavelet_basis(J)[:, 0]
    spec = KernelSpec("hilbert", 0.0, 2.0 ** -8, 2.0)
    y = np.array([[0.8]])
    num, l1 = pivotal_parts(spec, J, om, y, np.array([1.0]), psi)
    direct = abs(float(np.sum(om.masses[a:b] * psi[a:b] / (om.points[a:b, 0] - 0.8))))
    assert num == pytest.approx(direct, rel=1e-12)
    assert l1 == pytest.approx(float(om.masses[a:b] @ np.abs(psi[a:b])))
    r = pivotal_ratio(spec, J, om, y, np.array([1.0]), psi, 1)
    assert r == pytest.approx(num / (poisson(J, y, np.array([1.0]), 0.0, 1) * l1))


def test_pivotal_vacuous_for_zero_nu():
    om = uniform(GridSpec(1, 5))
    J = CubeId(2, (0,))
    assert pivotal_ratio(HILBERT, J, om, np.array([[0.9]]), np.array([0.0]), np.ones(len(om)), 1) == 0.0


def test_pivotal_rejects_nearby_nu():
    om = uniform(GridSpec(1, 5))
    with pytest.raises(ValueError):
        pivotal_parts(HILBERT, CubeId(2, (1,)), om, np.array([[0.3]]), np.array([1.0]), np.ones(len(om)))


@pytest.mark.parametrize("spec", [
    KernelSpec("hilbert"),
    KernelSpec("signed_fractional", 0.5),
    KernelSpec("riesz", 1.0, n=2),
])
def test_smoothness_slopes(spec):
    slopes = smoothness_slopes(spec)
    for j, s in slopes.items():
        assert s == pytest.approx(expected_slope(spec, j), abs=0.02)


def test_kernel_json_roundtrip():
    spec = KernelSpec("riesz", 0.5, 0.02, 1.0, n=2, component=1)
    assert kernel_from_json(spec.to_json()) == spec
    with pytest.raises(ValueError):
        kernel_from_json({"lambda": 0})
    with pytest.raises(ValueError):
        KernelSpec("hilbert", 0.0, 0.5, 0.2)
