"""Dyadic cubes on the unit cube [0,1)^n.

A cube is identified by its level and integer coordinates; its side length is
2^-level and it occupies prod_d [c_d 2^-level, (c_d + 1) 2^-level).  Cubes are
half open, so every point of [0,1)^n lies in exactly one cube per level.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n: int = 1
    depth: int = 8

    def __post_init__(self):
        if not 1 <= self.n <= 3:
            raise GridError(f"dimension n={self.n} outside 1..3")
        if not 1 <= self.depth <= 24:
            raise GridError(f"depth={self.depth} outside 1..24")

    @property
    def root(self) -> "CubeId":
        return CubeId(0, (0,) * self.n)

    def cubes_at(self, level: int) -> Iterator["CubeId"]:
        if not 0 <= level <= self.depth:
            raise GridError(f"level {level} outside 0..{self.depth}")
        for c in itertools.product(range(2 ** level), repeat=self.n):
            yield CubeId(level, c)

    def cubes(self, max_level: int | None = None) -> Iterator["CubeId"]:
        top = self.depth if max_level is None else min(max_level, self.depth)
        for lev in range(top + 1):
            yield from self.cubes_at(lev)


@dataclass(frozen=True, order=True)
class CubeId:
    level: int
    coords: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise GridError("negative level")
        if any(c < 0 or c >= 2 ** self.level for c in self.coords):
            raise GridError(f"coords {self.coords} out of range at level {self.level}")

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def side(self) -> float:
        return 2.0 ** -self.level

    @property
    def volume(self) -> float:
        return self.side ** self.n

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.coords, dtype=float) * self.side

    @property
    def upper(self) -> np.ndarray:
        return (np.array(self.coords, dtype=float) + 1.0) * self.side

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.coords, dtype=float) + 0.5) * self.side

    def contains_point(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x < self.upper))

    def contains(self, other: "CubeId") -> bool:
        """True when other is a (not necessarily strict) subcube."""
        if other.level < self.level:
            return False
        shift = other.level - self.level
        return all((c >> shift) == s for c, s in zip(other.coords, self.coords))

    def parent(self) -> "CubeId":
        if self.level == 0:
            raise GridError("root has no parent")
        return CubeId(self.level - 1, tuple(c >> 1 for c in self.coords))

    def ancestor(self, k: int) -> "CubeId":
        if k > self.level:
            raise GridError("ancestor above root")
        return CubeId(self.level - k, tuple(c >> k for c in self.coords))

    def ancestors(self) -> list["CubeId"]:
        """Strict ancestors, nearest first."""
        return [self.ancestor(k) for k in range(1, self.level + 1)]

    def children(self, depth: int | None = None) -> list["CubeId"]:
        if depth is not None and self.level >= depth:
            raise GridError(f"depth exceeded: {format_cube(self)} is at level {depth}")
        out = []
        for bits in itertools.product((0, 1), repeat=self.n):
            out.append(CubeId(self.level + 1, tuple(2 * c + b for c, b in zip(self.coords, bits))))
        return out

    def descendants_at(self, level: int) -> list["CubeId"]:
        if level < self.level:
            raise GridError("descendant level above cube")
        k = level - self.level
        ranges = [range(c << k, (c + 1) << k) for c in self.coords]
        return [CubeId(level, c) for c in itertools.product(*ranges)]

    def __str__(self) -> str:
        return format_cube(self)


def format_cube(cube: CubeId) -> str:
    return f"{cube.level}:" + ",".join(str(c) for c in cube.coords)


def parse_cube(text: str, n: int | None = None) -> CubeId:
    """Parse the literal "level:c1,c2,..." (e.g. "2:1" is [1/4, 1/2))."""
    try:
        lev, rest = text.strip().split(":")
        coords = tuple(int(c) for c in rest.split(","))
        cube = CubeId(int(lev), coords)
    except (ValueError, GridError) as exc:
        raise GridError(f"bad cube literal {text!r}") from exc
    if n is not None and cube.n != n:
        raise GridError(f"cube {text!r} has dimension {cube.n}, expected {n}")
    return cube


def cube_containing(x, level: int) -> CubeId:
    x = np.asarray(x, dtype=float).ravel()
    if np.any(x < 0) or np.any(x >= 1):
        raise GridError(f"point {x.tolist()} outside [0,1)^n")
    return CubeId(level, tuple(int(v) for v in np.floor(x * 2 ** level).astype(np.int64)))


def dist_linf_boxes(lo_a, hi_a, lo_b, hi_b) -> float:
    """l-infinity distance between two closed boxes (0 when they touch)."""
    gaps = np.maximum(0.0, np.maximum(np.asarray(lo_b) - np.asarray(hi_a), np.asarray(lo_a) - np.asarray(hi_b)))
    return float(np.max(gaps))


def dist_linf(a: CubeId, b: CubeId) -> float:
    return dist_linf_boxes(a.lower, a.upper, b.lower, b.upper)


def dist_to_boundary(inner: CubeId, outer: CubeId) -> float:
    """l-infinity distance from a subcube to the boundary of the enclosing cube."""
    if not outer.contains(inner):
        raise GridError(f"{inner} is not inside {outer}")
    gaps = np.minimum(inner.lower - outer.lower, outer.upper - inner.upper)
    return float(np.min(gaps))


def closures_intersect(a: CubeId, b: CubeId) -> bool:
    return dist_linf(a, b) == 0.0


def dilate(cube: CubeId, factor: float) -> tuple[np.ndarray, np.ndarray]:
    """Concentric dilate factor*cube as a box, clipped to [0,1]^n."""
    half = 0.5 * factor * cube.side
    c = cube.center
    return np.clip(c - half, 0.0, 1.0), np.clip(c + half, 0.0, 1.0)


def _index_window(c: int, m: int, k: int) -> tuple[int, int]:
    """Level-k indices a whose closed interval meets the closed level-m interval c."""
    s = max(k, m)
    lo = c << (s - m)
    hi = (c + 1) << (s - m)
    step = 1 << (s - k)
    a_min = -(-lo // step) - 1
    a_max = hi // step
    return max(a_min, 0), min(a_max, 2 ** k - 1)


def adjacent(cube: CubeId, rho: float, depth: int) -> list[CubeId]:
    """Cubes of comparable size whose closures meet the closure of cube.

    Comparable means 2^-rho <= l(J)/l(I) <= 2^rho; levels outside 0..depth are
    dropped.  Returned sorted by (level, coords).
    """
    r = int(math.floor(rho + 1e-12))
    out = []
    for k in range(max(0, cube.level - r), min(depth, cube.level + r) + 1):
        windows = [_index_window(c, cube.level, k) for c in cube.coords]
        for coords in itertools.product(*[range(a, b + 1) for a, b in windows]):
            out.append(CubeId(k, coords))
    return sorted(out)


def size_ratio_in_range(j: CubeId, i: CubeId, rho: float) -> bool:
    return abs(j.level - i.level) <= rho + 1e-12


def deeply_embedded(j: CubeId, i: CubeId, rho: float, eps: float) -> bool:
    """J sits inside I, is at least rho levels smaller, and stays away from the boundary.

    The margin is 2 sqrt(n) l(J)^eps l(I)^(1-eps) in the l-infinity metric.
    """
    if not i.contains(j):
        return False
    if j.side > 2.0 ** -rho * i.side * (1 + 1e-12):
        return False
    margin = 2.0 * math.sqrt(i.n) * j.side ** eps * i.side ** (1.0 - eps)
    return dist_to_boundary(j, i) > margin


def tower(x, cube: CubeId, s: int) -> CubeId:
    """The descendant of cube, s levels down, that contains the point x."""
    if not cube.contains_point(x):
        raise GridError(f"point {np.asarray(x).tolist()} not in {cube}")
    return cube_containing(x, cube.level + s)


def child_containing(cube: CubeId, sub: CubeId) -> CubeId:
    """The child of cube that contains the strict subcube sub."""
    if sub.level <= cube.level or not cube.contains(sub):
        raise GridError(f"{sub} is not a strict subcube of {cube}")
    return sub.ancestor(sub.level - cube.level - 1)


def center_chain(cube: CubeId, j: int) -> CubeId:
    """Depth-j descendant of cube obtained by stepping toward its centre.

    The first step takes the child containing the centre (half-open
    convention picks the upper child in every coordinate); later steps take
    the child touching the centre, which is the lower corner child.
    """
    if j <= 0:
        return cube
    cur = CubeId(cube.level + 1, tuple(2 * c + 1 for c in cube.coords))
    for _ in range(j - 1):
        cur = CubeId(cur.level + 1, tuple(2 * c for c in cur.coords))
    return cur


def sort_key(cubes: Sequence[CubeId]) -> list[CubeId]:
    return sorted(cubes)
