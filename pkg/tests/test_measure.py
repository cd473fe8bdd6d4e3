import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from dyadica.grid import CubeId, GridSpec
from dyadica.measure import (AtomicMeasure, DensityMeasure, MeasureError, appendix_discretized, cascade,
                             doubling_constant, doubling_exponent, generate, load_measure,
                             measure_from_json, measure_to_json, point_masses, uniform)


def test_uniform_half_mass():
    mu = uniform(GridSpec(1, 8))
    assert mu.mass(CubeId(1, (0,))) == pytest.approx(0.5, abs=1e-15)


def test_uniform_depth3_atoms():
    mu = uniform(GridSpec(1, 3))
    assert len(mu) == 8
    np.testing.assert_allclose(mu.masses, 1 / 8)
    np.testing.assert_allclose(mu.points[:, 0], (np.arange(8) + 0.5) / 8)


def test_cascade_fixed_ratio():
    mu = cascade(GridSpec(1, 6), 0.25, t=1 / 3)
    assert mu.mass(CubeId(2, (0,))) == pytest.approx(1 / 9, rel=1e-12)
    assert mu.total == pytest.approx(1.0)


def test_cascade_half_is_uniform():
    g = GridSpec(2, 4)
    np.testing.assert_allclose(cascade(g, 0.5, seed=9).masses, uniform(g).masses, rtol=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("r", [1e-6, 0.01, 0.3])
def test_sigma_cdf_matches_quadrature(alpha, r):
    d = DensityMeasure("sigma", alpha=alpha)
    # substitute u = ln(1/x): integrand becomes u^(-1-alpha)
    quad, _ = integrate.quad(lambda u: u ** (-1 - alpha), math.log(1 / r), math.inf)
    assert d.cdf(r) == pytest.approx(math.log(1 / r) ** -alpha / alpha, rel=1e-13)
    assert d.cdf(r) == pytest.approx(quad, rel=1e-8)


def test_omega_cdf_matches_quadrature():
    d = DensityMeasure("omega", alpha=1.0, p=1.5)
    quad, _ = integrate.quad(d.density, 0, 0.2, limit=200)
    assert float(d.cdf(0.2)) == pytest.approx(quad, rel=1e-8)


def test_appendix_discretized_cells():
    mu = appendix_discretized(GridSpec(1, 10), 1.5, 1.0)
    d = DensityMeasure("sigma", alpha=1.0)
    assert np.all(mu.points[:, 0] < 0.5)
    np.testing.assert_allclose((mu.points[:, 0] * 1024 - 0.5) % 1, 0, atol=1e-9)
    k = 7
    lo, hi = k / 1024, (k + 1) / 1024
    assert mu.masses[k] == pytest.approx(float(d.cdf(hi) - d.cdf(lo)), rel=1e-12)
    assert mu.total == pytest.approx(1 / math.log(2), rel=1e-12)


def test_doubling_uniform():
    rep = doubling_constant(uniform(GridSpec(1, 7)))
    assert not rep.infinite
    assert rep.value == pytest.approx(2.0)


def test_doubling_infinite_flag():
    # zero-mass cube [1/2, 1) whose concentric double [1/4, 1) holds the atom
    rep = doubling_constant(point_masses(GridSpec(1, 3), [[0.4]], [1.0]))
    assert rep.infinite and rep.witness == CubeId(1, (1,))


def test_point_mass_at_origin_non_doubling():
    # concentric doubles of dyadic cubes avoiding 0 never reach 0; the exponent check flags it
    mu = point_masses(GridSpec(1, 6), [[0.0]], [1.0])
    assert doubling_exponent(mu).infinite


def test_doubling_exponent_examples():
    assert doubling_exponent(uniform(GridSpec(1, 6))).value == pytest.approx(1.0)
    assert doubling_exponent(uniform(GridSpec(2, 4))).value == pytest.approx(2.0)
    mu = cascade(GridSpec(1, 7), 0.25, t=1 / 3)
    assert doubling_exponent(mu).value == pytest.approx(math.log2(3), rel=1e-12)


def test_cascade_doubling_bounded():
    for seed in range(3):
        rep = doubling_constant(cascade(GridSpec(1, 8), 0.25, seed=seed))
        assert not rep.infinite and rep.value < 12


def test_moments():
    g = GridSpec(1, 4)
    cube = CubeId(0, (0,))
    one = point_masses(g, [[0.5]], [2.0])
    np.testing.assert_allclose(one.moments(cube, 3), [2.0, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(uniform(g).moments(cube, 4)[1::2], 0.0, atol=1e-15)
    two = point_masses(g, [[0.25], [0.875]], [1.0, 3.0])
    u = np.array([-0.25, 0.375])
    np.testing.assert_allclose(two.moments(cube, 3), [4.0, u @ [1, 3], (u ** 2) @ [1, 3]])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 50), st.integers(1, 2))
def test_mass_additive_over_children(seed, n):
    mu = cascade(GridSpec(n, 4), 0.2, seed=seed)
    for c in mu.nonempty_cubes(3):
        assert sum(mu.mass(k) for k in c.children()) == pytest.approx(mu.mass(c), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000))
def test_generators_deterministic(seed):
    g = GridSpec(1, 5)
    np.testing.assert_array_equal(cascade(g, 0.3, seed=seed).masses, cascade(g, 0.3, seed=seed).masses)


def test_generate_dispatch():
    g = GridSpec(1, 4)
    assert generate("power", g, a=0.0).total == pytest.approx(1.0)
    with pytest.raises(MeasureError):
        generate("nope", g)


def test_json_roundtrip(tmp_path):
    mu = cascade(GridSpec(2, 3), 0.25, seed=1)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(measure_to_json(mu)))
    back = load_measure(str(path))
    np.testing.assert_array_equal(back.points, mu.points)
    np.testing.assert_array_equal(back.masses, mu.masses)


@pytest.mark.parametrize("obj,field", [
    ({"depth": 3, "atoms": []}, "n"),
    ({"n": 1, "depth": 3}, "atoms"),
    ({"n": 1, "depth": 3, "atoms": [{"x": [0.2], "m": -1}]}, "atoms[0].m"),
    ({"n": 1, "depth": 3, "atoms": [{"x": [1.5], "m": 1}]}, "atoms[0].x"),
    ({"n": 1, "depth": 3, "atoms": [{"x": [0.1, 0.2], "m": 1}]}, "atoms[0].x"),
    ({"n": 1, "depth": "3", "atoms": []}, "depth"),
    ({"n": 5, "depth": 3, "atoms": []}, "n"),
])
def test_json_errors_name_field(obj, field):
    with pytest.raises(MeasureError) as exc:
        measure_from_json(obj)
    assert exc.value.field == field
    assert field in str(exc.value)


def test_invalid_points_rejected():
    with pytest.raises(MeasureError):
        AtomicMeasure(GridSpec(1, 3), [[1.0]], [1.0])
