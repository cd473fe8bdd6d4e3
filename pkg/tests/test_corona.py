import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadica.corona import check_quantitative, cz_stopping, max_shift_overlap
from dyadica.grid import CubeId, GridSpec
from dyadica.measure import cascade, uniform

ROOT = CubeId(0, (0,))


def chain(m, depth=8):
    mu = uniform(GridSpec(1, depth))
    f = np.where(mu.points[:, 0] < 2.0 ** -m, 2.0 ** m, 0.0)
    return mu, f, cz_stopping(mu, f, 2.0)


def test_constant_function_single_stop():
    mu = cascade(GridSpec(1, 6), 0.25, seed=1)
    tree = cz_stopping(mu, np.ones(len(mu)), 2.0)
    assert tree.cubes == [ROOT]
    assert tree.alpha[ROOT] == pytest.approx(1.0)
    assert check_quantitative(tree, np.ones(len(mu))).passed


def test_zero_function_single_stop():
    mu = uniform(GridSpec(1, 5))
    tree = cz_stopping(mu, np.zeros(len(mu)), 2.0)
    assert tree.cubes == [ROOT] and tree.alpha[ROOT] == 0.0


def test_chain_example():
    m = 5
    mu, f, tree = chain(m)
    assert tree.cubes == [CubeId(k, (0,)) for k in range(m + 1)]
    for k in range(m + 1):
        assert tree.alpha[CubeId(k, (0,))] == pytest.approx(2.0 ** k)
    rep = check_quantitative(tree, f)
    assert rep.passed
    for k in range(m):
        F = CubeId(k, (0,))
        assert mu.mass(tree.children[F][0]) / mu.mass(F) == pytest.approx(0.5)


def test_gamma_must_exceed_one():
    mu = uniform(GridSpec(1, 3))
    with pytest.raises(ValueError):
        cz_stopping(mu, np.ones(8), 1.0)


def _literal_shifted(tree, F, tau, cubes):
    near = lambda J, G: G.contains(J) and J.level - G.level < tau
    out = set()
    for J in cubes:
        if tree.owner(J) == F and not near(J, F):
            out.add(J)
        elif any(near(J, ch) for ch in tree.children[F]) and not near(J, F):
            out.add(J)
    return out


def test_shifted_single_stop():
    mu = uniform(GridSpec(1, 6))
    tree = cz_stopping(mu, np.ones(len(mu)), 2.0)
    cubes = mu.nonempty_cubes()
    for tau in (1, 2, 3):
        got = {J for J in cubes if tree.in_shifted(J, ROOT, tau)}
        assert got == {J for J in cubes if J.level >= tau}
    assert not any(tree.in_shifted(J, ROOT, 10) for J in cubes)


@pytest.mark.parametrize("tau", [1, 2, 3])
def test_shifted_chain_matches_set_oracle(tau):
    mu, f, tree = chain(4, depth=6)
    cubes = mu.nonempty_cubes()
    for F in tree.cubes:
        assert {J for J in cubes if tree.in_shifted(J, F, tau)} == _literal_shifted(tree, F, tau, cubes)


def _random_tree(seed, n=1, depth=6):
    mu = cascade(GridSpec(n, depth), 0.2, seed=seed)
    rng = np.random.default_rng(seed)
    f = rng.standard_cauchy(size=len(mu))
    return mu, f, cz_stopping(mu, f, 2.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 500))
def test_corona_partition_and_connectedness(seed):
    mu, f, tree = _random_tree(seed)
    cubes = mu.nonempty_cubes()
    for J in cubes:
        F = tree.owner(J)
        assert F is not None and F.contains(J)
        # every cube between J and its owner lies in the same corona
        for k in range(1, J.level - F.level + 1):
            assert tree.owner(J.ancestor(k)) == F
    for F in tree.cubes:
        assert tree.owner(F) == F


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 500), st.floats(1.5, 4.0))
def test_quantitative_on_cascades(seed, gamma):
    mu = cascade(GridSpec(1, 8), 0.25, seed=seed)
    f = np.random.default_rng(seed).standard_cauchy(size=len(mu))
    rep = check_quantitative(cz_stopping(mu, f, gamma), f)
    assert rep.passed, rep.worst
    assert rep.measured["child_sum"] <= 1 + 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 500), st.integers(1, 3))
def test_shift_overlap_bounded_by_tau(seed, tau):
    mu, f, tree = _random_tree(seed)
    assert max_shift_overlap(tree, tau) <= tau


def test_shift_overlap_2d():
    for seed in range(3):
        mu, f, tree = _random_tree(seed, n=2, depth=4)
        for tau in (1, 2):
            assert max_shift_overlap(tree, tau) <= tau


def test_alpha_nondecreasing_down_tree():
    mu, f, tree = _random_tree(7)
    for F in tree.cubes:
        p = tree.parent[F]
        if p is not None:
            assert tree.alpha[F] >= tree.alpha[p]
