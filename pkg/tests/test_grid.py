import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadica.grid import (CubeId, GridError, GridSpec, adjacent, closures_intersect, cube_containing,
                          deeply_embedded, dist_linf, format_cube, parse_cube, tower)


def cube1(a, b):
    """1-D dyadic interval [a, b) from its endpoints."""
    side = b - a
    lev = int(round(-math.log2(side)))
    return CubeId(lev, (int(round(a / side)),))


def test_children_unit_interval():
    assert CubeId(0, (0,)).children() == [cube1(0, 0.5), cube1(0.5, 1)]


def test_children_square_quadrants():
    kids = CubeId(1, (0, 0)).children()
    assert len(kids) == 4
    assert all(k.side == 0.25 for k in kids)
    assert {k.coords for k in kids} == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_children_depth_exceeded():
    with pytest.raises(GridError, match="depth exceeded"):
        CubeId(3, (1,)).children(depth=3)


def test_grid_bounds():
    with pytest.raises(GridError):
        GridSpec(4, 3)
    with pytest.raises(GridError):
        GridSpec(1, 0)


def _enumerate_adjacent(cube, rho, depth):
    out = []
    for lev in range(depth + 1):
        if abs(lev - cube.level) > rho:
            continue
        for c in GridSpec(cube.n, depth).cubes_at(lev):
            if closures_intersect(c, cube):
                out.append(c)
    return sorted(out)


def test_adjacent_level_one():
    assert adjacent(cube1(0, 0.5), 0, 4) == [cube1(0, 0.5), cube1(0.5, 1)]


def test_adjacent_quarter_rho_one():
    I = cube1(0.25, 0.5)
    got = adjacent(I, 1, 5)
    assert got == _enumerate_adjacent(I, 1, 5)
    assert {c.level for c in got} == {1, 2, 3}


def test_adjacent_root():
    root = CubeId(0, (0,))
    assert adjacent(root, 0, 6) == [root]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 2), st.integers(0, 4), st.integers(0, 2), st.data())
def test_adjacent_matches_enumeration(n, lev, rho, data):
    coords = tuple(data.draw(st.integers(0, 2 ** lev - 1)) for _ in range(n))
    I = CubeId(lev, coords)
    assert adjacent(I, rho, 4) == _enumerate_adjacent(I, rho, 4)


def test_deeply_embedded_examples():
    root = CubeId(0, (0,))
    assert not deeply_embedded(cube1(0.5, 9 / 16), root, 2, 0.5)
    assert deeply_embedded(cube1(0.5, 17 / 32), root, 2, 0.5)
    assert not deeply_embedded(cube1(0.5, 0.75), cube1(0, 0.5), 0, 0.5)


def test_tower_binary_digits():
    root = CubeId(0, (0,))
    assert tower(0.3, root, 2) == cube1(0.25, 0.5)
    assert tower(0.3, root, 3) == cube1(0.25, 0.375)
    assert tower(0.3, root, 0) == root
    with pytest.raises(GridError):
        tower(0.7, cube1(0, 0.5), 1)


def test_distances():
    assert dist_linf(cube1(0, 0.25), cube1(0.5, 0.75)) == 0.25
    assert dist_linf(cube1(0, 0.25), cube1(0.25, 0.5)) == 0.0
    assert dist_linf(CubeId(1, (0, 0)), CubeId(1, (1, 1))) == 0.0
    assert closures_intersect(CubeId(1, (0, 0)), CubeId(1, (1, 1)))


def test_format_roundtrip():
    c = CubeId(3, (5, 2))
    assert parse_cube(format_cube(c)) == c


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.integers(0, 12))
def test_containing_cube_holds_point(x, lev):
    c = cube_containing([x], lev)
    assert c.contains_point([x])
    assert c.level == lev
    if lev:
        assert c.parent().contains(c)
        assert c in c.parent().children()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 6), st.integers(0, 63), st.integers(0, 3))
def test_children_partition_volume(lev, k, n_extra):
    c = CubeId(lev, (k % 2 ** lev,))
    kids = c.children()
    assert math.isclose(sum(k.volume for k in kids), c.volume)
    assert all(c.contains(k) and not k.contains(c) for k in kids)
