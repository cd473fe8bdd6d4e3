import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadica import constants as C
from dyadica.constants import AscentConfig
from dyadica.grid import CubeId, GridSpec
from dyadica.kernel import KernelSpec, Operator
from dyadica.measure import appendix_discretized, cascade, point_masses, uniform

FAST = AscentConfig(iters=100, restarts=3)


def pair(seed, depth=5):
    g = GridSpec(1, depth)
    return cascade(g, 0.25, seed=seed), cascade(g, 0.25, seed=seed + 100)


def hop(seed, depth=5, delta=2.0 ** -7):
    s, w = pair(seed, depth)
    return Operator(KernelSpec("hilbert", 0.0, delta, 2.0), s, w)


def test_scalar_testing_empty_sigma():
    g = GridSpec(1, 4)
    op = Operator(KernelSpec("hilbert", 0, 0.05, 1.0), point_masses(g, np.zeros((0, 1)), []), uniform(g))
    assert C.scalar_testing(op).value == 0.0


def test_scalar_testing_two_atoms():
    g = GridSpec(1, 6)
    op = Operator(KernelSpec("hilbert", 0, 0.05, 1.0), point_masses(g, [[0.25]], [1.0]),
                  point_masses(g, [[0.375]], [1.0]))
    est = C.scalar_testing(op, 2.0)
    assert est.value == pytest.approx(8.0, rel=1e-14)
    assert est.kind == "exact-sup"
    assert est.witness == "0:0"  # lexicographically first cube attaining the value


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 400))
def test_testing_bounded_by_norm(seed):
    op = hop(seed)
    N = op.norm(2).value
    for est in (C.scalar_testing(op), C.scalar_testing(op, side="dual"), C.quad_testing(op, 2, "global")):
        assert est.value <= N * (1 + 1e-9)


def test_local_below_triple_and_singletons():
    op = hop(3)
    loc = C.quad_testing(op, 2, "local")
    assert loc.value == pytest.approx(C.scalar_testing(op).value, rel=1e-12)
    assert loc.value <= C.quad_testing(op, 2, "triple").value * (1 + 1e-12)
    lb = C.quad_testing(op, 1.5, "local", cfg=FAST)
    assert lb.kind == "lower-bound" and lb.value > 0


def test_quad_offset_uniform_is_one():
    mu = uniform(GridSpec(1, 6))
    est = C.quad_offset_muckenhoupt(mu, mu, 0.0, 2.0)
    assert est.value == pytest.approx(1.0, rel=1e-12)
    assert C.muckenhoupt_closed_form(mu, mu, 0.0)[0] == pytest.approx(1.0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 400), st.sampled_from([0.0, 0.5]))
def test_quad_offset_matches_closed_form(seed, lam):
    s, w = pair(seed)
    est = C.quad_offset_muckenhoupt(s, w, lam, 2.0)
    assert est.value == pytest.approx(C.muckenhoupt_closed_form(s, w, lam)[0], rel=1e-9)


def test_singleton_offset_ratio():
    s, w = pair(5, depth=4)
    p, lam = 1.5, 0.0
    I = CubeId(2, (1,))
    want = s.mass(I) / I.volume ** (1 - lam) * w.mass(I) ** (1 / p) / s.mass(I) ** (1 / p)
    coef = s.mass(I) / I.volume ** (1 - lam)
    Uw = C.membership(w, [I]) * coef ** 2
    Us = C.membership(s, [I])
    val, kind, _ = C.quadratic_ratio(Uw, w.masses, Us, s.masses, p, cfg=AscentConfig(iters=5, restarts=1))
    assert val == pytest.approx(want, rel=1e-9)


def test_appendix_tower_grows_with_depth():
    vals = []
    for depth in (8, 11, 14):
        g = GridSpec(1, depth)
        sig = appendix_discretized(g, 1.5, 1.0, "sigma")
        om = appendix_discretized(g, 1.5, 1.0, "omega")
        K = depth - 1
        vals.append(C.tower_witness_value(sig, om, 0.0, 1.5, np.arange(1, K + 1) ** 0.25))
    assert vals[0] < vals[1] < vals[2]


def test_tailed_zero_for_no_offsets():
    g = GridSpec(1, 4)
    s = point_masses(g, [[0.1]], [1.0])
    est = C.quad_tailed_muckenhoupt(s, uniform(g), 0.0, 2.0, cfg=FAST)
    assert est.value == 0.0


def test_tailed_offset_witness_single():
    s, w = pair(2, depth=4)
    est = C.quad_tailed_muckenhoupt(s, w, 0.0, 2.0, cfg=FAST)
    assert est.kind == "lower-bound" and est.value > 0
    comp = C.quad_tailed_muckenhoupt(s, w, 0.0, 2.0, witnesses="complement", cfg=FAST)
    assert comp.value > 0


def test_wbp_separated_supports_zero():
    g = GridSpec(1, 5)
    s = point_masses(g, [[0.1]], [1.0])
    w = point_masses(g, [[0.2]], [1.0])
    op = Operator(KernelSpec("hilbert", 0, 0.5, 2.0), s, w)
    assert C.wbp(op, 2.0).value == 0.0


def test_wbp_one_pair_quotient():
    g = GridSpec(1, 3)
    s = point_masses(g, [[0.3]], [2.0])
    w = point_masses(g, [[0.6]], [0.5])
    op = Operator(KernelSpec("hilbert", 0, 0.05, 2.0), s, w)
    I, J = CubeId(2, (1,)), CubeId(2, (2,))
    direct = abs(float(op.K[0, 0]) * 2.0 * 0.5) / math.sqrt(2.0 * 0.5)
    est = C.wbp(op, 2.0, "HV")
    assert est.value >= direct * (1 - 1e-12)
    assert C.wbp(op, 2.0, "HV").value <= C.wbp(op, 2.0, "extended").value + 1e-12


def test_wbp_lower_bound_p():
    op = hop(4, depth=4)
    assert 0 < C.wbp(op, 1.5, cfg=FAST).value


def test_awbp_vanishing_kernel():
    s, w = pair(1, depth=4)
    op = Operator(KernelSpec("hilbert", 0, 2.5, 3.0), s, w)
    assert C.awbp(op, 1, 1.0).value == 0.0


@pytest.mark.parametrize("kappa", [1, 2])
def test_awbp_exact_vs_assembly_and_ascent(kappa):
    op = hop(6)
    ab = C.alpert_blocks(op, kappa, 1.0)
    exact = C.awbp(op, kappa, 1.0, blocks=ab).value
    assert exact == pytest.approx(C.awbp_assembled(ab), rel=1e-9)
    ascent = C._awbp_ascent(op, ab, 2.0, FAST).value
    assert ascent <= exact * (1 + 1e-9)
    # the adjacent bilinear form dominates the block-diagonal square-function value
    assert exact <= C.bilinear_adjacent_norm(ab) * (1 + 1e-9)


def test_ordering_uniform_hilbert():
    mu = uniform(GridSpec(1, 5))
    op = Operator(KernelSpec("hilbert", 0, 2.0 ** -7, 2.0), mu, mu)
    rep = C.ordering_report(op, 0.0)
    assert rep.passed, rep.checks


def test_ordering_single_atoms_zero():
    g = GridSpec(1, 4)
    mu = point_masses(g, [[0.3]], [1.0])
    rep = C.ordering_report(Operator(KernelSpec("hilbert", 0, 2.0 ** -6, 2.0), mu, mu), 0.0)
    assert rep.passed
    assert rep.values["N"] == 0.0 and rep.values["T"] == 0.0


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 400))
def test_ordering_cascades(seed):
    assert C.ordering_report(hop(seed), 0.0).passed


@pytest.mark.parametrize("c,d", [(0.25, 1.0), (4.0, 1.0), (1.0, 0.25), (1.0, 4.0)])
def test_homogeneity(c, d):
    s, w = pair(8, depth=4)
    spec = KernelSpec("hilbert", 0, 2.0 ** -6, 2.0)
    base = Operator(spec, s, w)
    scaled = Operator(spec, s.with_masses(c * s.masses), w.with_masses(d * w.masses))
    a, b = C.homogeneity_exponents(2.0)
    factor = c ** a * d ** b
    for fn in (lambda op: C.scalar_testing(op), lambda op: C.quad_testing(op, 2, "triple"),
               lambda op: C.wbp(op), lambda op: C.awbp(op, 1, 1.0), lambda op: op.norm(2)):
        assert fn(scaled).value == pytest.approx(factor * fn(base).value, rel=1e-9)
    assert C.quad_offset_muckenhoupt(scaled.sigma, scaled.omega, 0, 2).value == pytest.approx(
        factor * C.quad_offset_muckenhoupt(s, w, 0, 2).value, rel=1e-9)


def test_csv_columns(tmp_path):
    op = hop(1, depth=4)
    path = tmp_path / "c.csv"
    C.write_csv([C.scalar_testing(op)], str(path))
    assert path.read_text().splitlines()[0] == "name,value,kind,family,witness,seed"
