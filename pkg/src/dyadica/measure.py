"""Atomic and density measures on [0,1)^n, generators, and doubling diagnostics.

Atoms are stored in Morton (Z-curve) order of their finest dyadic cell, so
every dyadic cube owns a contiguous slice of the atom arrays.  Functions on a
measure are plain arrays aligned with that order.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from scipy import special

from .grid import CubeId, GridError, GridSpec


class MeasureError(ValueError):
    """Malformed measure input; field names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


def multi_indices(n: int, kappa: int) -> list[tuple[int, ...]]:
    """Exponents beta with |beta| < kappa, by total degree then lexicographic."""
    out = []
    for deg in range(kappa):
        for beta in itertools.product(range(deg + 1), repeat=n):
            if sum(beta) == deg:
                out.append(beta)
    return sorted(out, key=lambda b: (sum(b), tuple(-v for v in b)))


def monomials(u: np.ndarray, exps: list[tuple[int, ...]]) -> np.ndarray:
    """Columns u^beta for points u of shape (N, n)."""
    u = np.atleast_2d(u)
    cols = [np.prod(u ** np.array(beta, dtype=float), axis=1) for beta in exps]
    return np.stack(cols, axis=1) if cols else np.zeros((u.shape[0], 0))


class AtomicMeasure:
    """Finite sum of point masses on a dyadic grid."""

    def __init__(self, grid: GridSpec, points, masses):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        m = np.asarray(masses, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[1] != grid.n:
            raise MeasureError(f"expected points of dimension {grid.n}", "atoms.x")
        if pts.shape[0] != m.shape[0]:
            raise MeasureError("points and masses differ in length", "atoms")
        if not np.all(np.isfinite(pts)) or np.any(pts < 0) or np.any(pts >= 1):
            raise MeasureError("points must lie in [0,1)^n", "atoms.x")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise MeasureError("masses must be finite and nonnegative", "atoms.m")
        self.grid = grid
        cells = np.floor(pts * 2 ** grid.depth).astype(np.int64)
        order = _morton_order(cells, grid.depth)
        self.order = order  # input index of each stored atom
        self.points = pts[order]
        self.masses = m[order]
        self.cells = cells[order]
        self._ranges: dict[int, dict[tuple[int, ...], tuple[int, int]]] = {}
        self._groups: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def depth(self) -> int:
        return self.grid.depth

    def __len__(self) -> int:
        return self.masses.shape[0]

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def coords_at(self, level: int) -> np.ndarray:
        return self.cells >> (self.depth - level)

    def groups(self, level: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(starts, coords, atom_group) for the nonempty cubes at a level."""
        if level not in self._groups:
            c = self.coords_at(level)
            if len(c) == 0:
                self._groups[level] = (np.zeros(0, int), np.zeros((0, self.n), int), np.zeros(0, int))
            else:
                new = np.ones(len(c), dtype=bool)
                new[1:] = np.any(c[1:] != c[:-1], axis=1)
                starts = np.flatnonzero(new)
                self._groups[level] = (starts, c[starts], np.cumsum(new) - 1)
        return self._groups[level]

    def group_sums(self, level: int, values: np.ndarray) -> np.ndarray:
        starts = self.groups(level)[0]
        if len(starts) == 0:
            return np.zeros((0,) + values.shape[1:])
        return np.add.reduceat(values, starts, axis=0)

    def level_cubes(self, level: int) -> list[CubeId]:
        return [CubeId(level, tuple(int(v) for v in c)) for c in self.groups(level)[1]]

    def cube_range(self, cube: CubeId) -> tuple[int, int]:
        if cube.level > self.depth:
            raise GridError(f"depth exceeded: level {cube.level} > {self.depth}")
        if cube.level not in self._ranges:
            starts, coords, _ = self.groups(cube.level)
            stops = np.append(starts[1:], len(self))
            self._ranges[cube.level] = {
                tuple(int(v) for v in c): (int(a), int(b)) for c, a, b in zip(coords, starts, stops)
            }
        return self._ranges[cube.level].get(cube.coords, (0, 0))

    def mass(self, cube: CubeId) -> float:
        a, b = self.cube_range(cube)
        return float(self.masses[a:b].sum())

    def average(self, cube: CubeId, values: np.ndarray) -> float:
        a, b = self.cube_range(cube)
        m = self.masses[a:b]
        tot = m.sum()
        return float(np.dot(m, values[a:b]) / tot) if tot > 0 else 0.0

    def nonempty_cubes(self, max_level: int | None = None) -> list[CubeId]:
        top = self.depth if max_level is None else max_level
        out = []
        for lev in range(top + 1):
            starts, _, _ = self.groups(lev)
            sums = self.group_sums(lev, self.masses)
            out.extend(c for c, s in zip(self.level_cubes(lev), sums) if s > 0)
        return out

    def box_mask(self, lo, hi) -> np.ndarray:
        return np.all((self.points >= lo) & (self.points < hi), axis=1)

    def box_mass(self, lo, hi) -> float:
        return float(self.masses[self.box_mask(lo, hi)].sum())

    def moments(self, cube: CubeId, kappa: int) -> np.ndarray:
        """Integrals of centred, scaled monomials ((x - c)/l)^beta over the cube."""
        a, b = self.cube_range(cube)
        u = (self.points[a:b] - cube.center) / cube.side
        return self.masses[a:b] @ monomials(u, multi_indices(self.n, kappa))

    def with_masses(self, masses) -> "AtomicMeasure":
        """Same atoms (already ordered) with new masses."""
        out = object.__new__(AtomicMeasure)
        out.grid, out.points, out.cells, out.order = self.grid, self.points, self.cells, self.order
        out.masses = np.asarray(masses, dtype=float)
        out._ranges, out._groups = self._ranges, self._groups
        return out

    @cached_property
    def finest_prefix(self) -> np.ndarray | None:
        """n-D prefix sums of masses over the finest cells, or None when too large."""
        size = 2 ** (self.n * self.depth)
        if size > 2 ** 22:
            return None
        hist = np.zeros((2 ** self.depth,) * self.n)
        np.add.at(hist, tuple(self.cells.T), self.masses)
        pref = hist
        for ax in range(self.n):
            pref = np.cumsum(pref, axis=ax)
        return np.pad(pref, [(1, 0)] * self.n)

    def finest_box_mass(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Masses of boxes given in finest-cell units; lo, hi of shape (B, n)."""
        lo = np.clip(lo, 0, 2 ** self.depth)
        hi = np.clip(hi, 0, 2 ** self.depth)
        pref = self.finest_prefix
        if pref is None:
            unit = 2.0 ** -self.depth
            return np.array([self.box_mass(a * unit, b * unit) for a, b in zip(lo, hi)])
        total = np.zeros(lo.shape[0])
        for corner in itertools.product((0, 1), repeat=self.n):
            idx = tuple(np.where(corner[d], hi[:, d], lo[:, d]) for d in range(self.n))
            sign = (-1) ** (self.n - sum(corner))
            total += sign * pref[idx]
        return total * np.all(hi > lo, axis=1)


def _morton_order(cells: np.ndarray, depth: int) -> np.ndarray:
    if len(cells) == 0:
        return np.zeros(0, dtype=int)
    n = cells.shape[1]
    keys = []
    for lev in range(depth - 1, -1, -1):
        digit = np.zeros(len(cells), dtype=np.int64)
        for d in range(n):
            digit = digit * 2 + ((cells[:, d] >> lev) & 1)
        keys.append(digit)
    # lexsort sorts by the last key first
    return np.lexsort(keys[::-1])


# ---------------------------------------------------------------- densities


@dataclass(frozen=True)
class DensityMeasure:
    """One-dimensional absolutely continuous measure with an exact interval mass.

    Families: "sigma" with density 1/(x (ln 1/x)^(1+alpha)) on (0,1/2),
    "omega" with density [x (ln 1/x)^alpha]^(p-1) on (0,1/2), and "power"
    with density x^a on (0,1).
    """

    family: str
    alpha: float = 1.0
    p: float = 2.0
    a: float = 0.0

    def __post_init__(self):
        if self.family not in ("sigma", "omega", "power"):
            raise MeasureError(f"unknown density family {self.family!r}", "family")
        if self.family == "power" and self.a <= -1:
            raise MeasureError("power exponent must exceed -1", "a")
        if self.family in ("sigma", "omega") and self.alpha <= 0:
            raise MeasureError("alpha must be positive", "alpha")

    @property
    def support_end(self) -> float:
        return 1.0 if self.family == "power" else 0.5

    def density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = (x > 0) & (x < self.support_end)
        xi = x[inside]
        if self.family == "sigma":
            out[inside] = 1.0 / (xi * np.log(1 / xi) ** (1 + self.alpha))
        elif self.family == "omega":
            out[inside] = (xi * np.log(1 / xi) ** self.alpha) ** (self.p - 1)
        else:
            out[inside] = xi ** self.a
        return out

    def cdf(self, r) -> np.ndarray:
        """Mass of (0, r]."""
        r = np.clip(np.asarray(r, dtype=float), 0.0, self.support_end)
        out = np.zeros_like(r)
        pos = r > 0
        rp = r[pos]
        if self.family == "sigma":
            out[pos] = np.log(1 / rp) ** (-self.alpha) / self.alpha
        elif self.family == "omega":
            s = self.alpha * (self.p - 1)
            # substitute u = ln(1/x): integral of e^{-pu} u^s du from ln(1/r) to infinity
            out[pos] = special.gamma(s + 1) * special.gammaincc(s + 1, self.p * np.log(1 / rp)) / self.p ** (s + 1)
        else:
            out[pos] = rp ** (self.a + 1) / (self.a + 1)
        return out

    def interval_mass(self, a, b) -> np.ndarray:
        return np.maximum(self.cdf(b) - self.cdf(a), 0.0)

    def discretize(self, grid: GridSpec) -> AtomicMeasure:
        if grid.n != 1:
            raise MeasureError("density measures are one-dimensional", "n")
        edges = np.arange(2 ** grid.depth + 1) * 2.0 ** -grid.depth
        m = self.interval_mass(edges[:-1], edges[1:])
        keep = m > 0
        centers = 0.5 * (edges[:-1] + edges[1:])
        return AtomicMeasure(grid, centers[keep][:, None], m[keep])


# ---------------------------------------------------------------- generators


def uniform(grid: GridSpec) -> AtomicMeasure:
    side = 2 ** grid.depth
    cells = np.array(list(itertools.product(range(side), repeat=grid.n)), dtype=float)
    return AtomicMeasure(grid, (cells + 0.5) / side, np.full(len(cells), float(side) ** -grid.n))


def cascade(grid: GridSpec, beta: float, seed: int = 0, t: float | None = None,
            mode: str = "mirror") -> AtomicMeasure:
    """Multiplicative cascade on the finest cells.

    Each split sends a fraction r of a cube's mass (per coordinate direction)
    to one child and 1 - r to the other, with r uniform in [beta, 1 - beta] or
    fixed at t.  In "mirror" mode one ratio is drawn per level and direction
    and the child on the same side as its parent receives r; equal factors
    then accumulate on both sides of every dyadic boundary, which keeps the
    measure doubling.  In "free" mode every cube draws its own ratios and the
    lower child receives r.
    """
    if not 0 < beta <= 0.5:
        raise MeasureError("beta must lie in (0, 1/2]", "beta")
    if mode not in ("mirror", "free"):
        raise MeasureError(f"unknown cascade mode {mode!r}", "mode")
    rng = np.random.default_rng(seed)
    base = uniform(grid)
    cells = base.cells
    L, n = grid.depth, grid.n
    logm = np.zeros(len(cells))
    for k in range(1, L + 1):
        bits = (cells >> (L - k)) & 1
        pbits = (cells >> (L - k + 1)) & 1 if k > 1 else np.zeros_like(bits)
        if mode == "mirror":
            r = np.full(n, t) if t is not None else rng.uniform(beta, 1 - beta, size=n)
            outer = bits == pbits
            factor = np.where(outer, r[None, :], 1 - r[None, :])
        else:
            parents = cells >> (L - k + 1)
            if t is not None:
                r = np.full((len(cells), n), t)
            else:
                _, inv = np.unique(parents, axis=0, return_inverse=True)
                table = rng.uniform(beta, 1 - beta, size=(int(inv.max()) + 1, n))
                r = table[inv.ravel()]
            factor = np.where(bits == 0, r, 1 - r)
        logm += np.log(factor).sum(axis=1)
    return base.with_masses(np.exp(logm))


def power(grid: GridSpec, a: float) -> AtomicMeasure:
    """Exact cell masses of the product density prod_d x_d^a."""
    dens = DensityMeasure("power", a=a)
    side = 2 ** grid.depth
    edges = np.arange(side + 1) / side
    m1 = dens.interval_mass(edges[:-1], edges[1:])
    base = uniform(grid)
    m = np.prod(m1[base.cells], axis=1)
    return base.with_masses(m)


def appendix_discretized(grid: GridSpec, p: float, alpha: float, which: str = "sigma") -> AtomicMeasure:
    """Exact cell masses of the logarithmic weights, atoms at cell centres."""
    if which not in ("sigma", "omega"):
        raise MeasureError(f"which must be sigma or omega, not {which!r}", "which")
    return DensityMeasure(which, alpha=alpha, p=p).discretize(grid)


def point_masses(grid: GridSpec, points, masses) -> AtomicMeasure:
    return AtomicMeasure(grid, points, masses)


def generate(kind: str, grid: GridSpec, **kw) -> AtomicMeasure:
    if kind == "uniform":
        return uniform(grid)
    if kind == "cascade":
        return cascade(grid, kw.get("beta", 0.25), kw.get("seed", 0), kw.get("t"), kw.get("mode", "mirror"))
    if kind == "power":
        return power(grid, kw.get("a", 0.0))
    if kind == "appendix_discretized":
        return appendix_discretized(grid, kw.get("p", 1.5), kw.get("alpha", 1.0), kw.get("which", "sigma"))
    if kind == "point_masses":
        return point_masses(grid, kw["points"], kw["masses"])
    raise MeasureError(f"unknown measure kind {kind!r}", "kind")


# ---------------------------------------------------------------- doubling


@dataclass
class DoublingReport:
    value: float
    infinite: bool
    witness: CubeId | None


def _level_boxes(mu: AtomicMeasure, level: int, factor: float):
    """All cubes at a level with their concentric dilates in finest units."""
    L, n = mu.depth, mu.n
    u = 2 ** (L - level)
    coords = np.array(list(itertools.product(range(2 ** level), repeat=n)), dtype=np.int64)
    lo = coords * u
    hi = lo + u
    c2 = 2 * lo + u  # twice the centre
    half = factor * u  # twice the half-width of the dilate
    dlo = np.floor((c2 - half) / 2).astype(np.int64)
    dhi = np.ceil((c2 + half) / 2).astype(np.int64)
    return coords, lo, hi, dlo, dhi


def doubling_constant(mu: AtomicMeasure) -> DoublingReport:
    """sup |2Q| / |Q| over dyadic Q above the finest level, 2Q clipped to the domain."""
    best, witness = 0.0, None
    for lev in range(mu.depth):
        coords, lo, hi, dlo, dhi = _level_boxes(mu, lev, 2.0)
        mq = mu.finest_box_mass(lo, hi)
        m2 = mu.finest_box_mass(dlo, dhi)
        bad = (mq <= 0) & (m2 > 0)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            return DoublingReport(math.inf, True, CubeId(lev, tuple(int(v) for v in coords[i])))
        pos = mq > 0
        if not np.any(pos):
            continue
        ratio = np.where(pos, m2 / np.where(pos, mq, 1.0), 0.0)
        i = int(np.argmax(ratio))
        if ratio[i] > best + 1e-15:
            best, witness = float(ratio[i]), CubeId(lev, tuple(int(v) for v in coords[i]))
    return DoublingReport(best, False, witness)


def doubling_exponent(mu: AtomicMeasure) -> DoublingReport:
    """Smallest theta with |desc_j Q| >= 2^(-j theta) |Q| along centre chains (c = 1)."""
    best, witness = 0.0, None
    L = mu.depth
    for lev in range(L):
        coords, lo, hi, _, _ = _level_boxes(mu, lev, 1.0)
        mq = mu.finest_box_mass(lo, hi)
        pos = mq > 0
        for j in range(1, L - lev + 1):
            u = 2 ** (L - lev - j)
            dc = (2 * coords + 1) * 2 ** (j - 1)
            md = mu.finest_box_mass(dc * u, (dc + 1) * u)
            if np.any(pos & (md <= 0)):
                i = int(np.flatnonzero(pos & (md <= 0))[0])
                return DoublingReport(math.inf, True, CubeId(lev, tuple(int(v) for v in coords[i])))
            with np.errstate(divide="ignore", invalid="ignore"):
                th = np.where(pos, np.log2(mq / md) / j, -np.inf)
            i = int(np.argmax(th))
            if th[i] > best + 1e-15:
                best, witness = float(th[i]), CubeId(lev, tuple(int(v) for v in coords[i]))
    return DoublingReport(best, False, witness)


def dilation_exponent(mu: AtomicMeasure) -> DoublingReport:
    """Smallest theta with |2^j Q| <= 2^(j theta) |Q| over concentric dilates."""
    best, witness = 0.0, None
    L = mu.depth
    for lev in range(L):
        coords, lo, hi, _, _ = _level_boxes(mu, lev, 1.0)
        mq = mu.finest_box_mass(lo, hi)
        pos = mq > 0
        for j in range(1, lev + 2):
            _, _, _, dlo, dhi = _level_boxes(mu, lev, 2.0 ** j)
            mj = mu.finest_box_mass(dlo, dhi)
            with np.errstate(divide="ignore", invalid="ignore"):
                th = np.where(pos, np.log2(mj / mq) / j, -np.inf)
            i = int(np.argmax(th))
            if th[i] > best + 1e-15:
                best, witness = float(th[i]), CubeId(lev, tuple(int(v) for v in coords[i]))
    return DoublingReport(best, False, witness)


# ---------------------------------------------------------------- json


def measure_to_json(mu: AtomicMeasure) -> dict[str, Any]:
    return {
        "n": mu.n,
        "depth": mu.depth,
        "atoms": [{"x": [float(v) for v in x], "m": float(m)} for x, m in zip(mu.points, mu.masses)],
    }


def _require(obj: dict, key: str, kind, where: str = ""):
    if key not in obj:
        raise MeasureError("missing", where + key)
    val = obj[key]
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise MeasureError(f"expected integer, got {val!r}", where + key)
    if kind is float and (isinstance(val, bool) or not isinstance(val, (int, float))):
        raise MeasureError(f"expected number, got {val!r}", where + key)
    return val


def measure_from_json(obj: Any) -> AtomicMeasure:
    if not isinstance(obj, dict):
        raise MeasureError("measure must be a JSON object", "<root>")
    if "family" in obj:
        fam = obj["family"]
        depth = _require(obj, "depth", int)
        n = obj.get("n", 1)
        try:
            grid = GridSpec(n, depth)
        except GridError as exc:
            raise MeasureError(str(exc), "depth") from exc
        if fam == "cascade":
            return cascade(grid, float(_require(obj, "beta", float)), int(obj.get("seed", 0)),
                           obj.get("t"), obj.get("mode", "mirror"))
        if fam == "uniform":
            return uniform(grid)
        if fam == "power":
            return power(grid, float(_require(obj, "a", float)))
        if fam == "appendix_discretized":
            return appendix_discretized(grid, float(_require(obj, "p", float)),
                                        float(_require(obj, "alpha", float)), obj.get("which", "sigma"))
        raise MeasureError(f"unknown family {fam!r}", "family")
    n = _require(obj, "n", int)
    depth = _require(obj, "depth", int)
    try:
        grid = GridSpec(n, depth)
    except GridError as exc:
        raise MeasureError(str(exc), "n" if not 1 <= n <= 3 else "depth") from exc
    atoms = _require(obj, "atoms", list)
    if not isinstance(atoms, list):
        raise MeasureError("expected a list", "atoms")
    xs, ms = [], []
    for i, a in enumerate(atoms):
        where = f"atoms[{i}]."
        if not isinstance(a, dict):
            raise MeasureError("expected an object", f"atoms[{i}]")
        x = _require(a, "x", list, where)
        if not isinstance(x, list) or len(x) != n or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
            raise MeasureError(f"expected {n} numbers", where + "x")
        m = _require(a, "m", float, where)
        if not math.isfinite(m) or m < 0:
            raise MeasureError("mass must be finite and nonnegative", where + "m")
        if any(not (0 <= v < 1) for v in x):
            raise MeasureError("coordinates must lie in [0,1)", where + "x")
        xs.append(x)
        ms.append(m)
    return AtomicMeasure(grid, np.array(xs, dtype=float).reshape(-1, n), np.array(ms, dtype=float))


def load_measure(path: str) -> AtomicMeasure:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MeasureError(f"invalid JSON ({exc.msg})", "<file>") from exc
    return measure_from_json(obj)


def save_measure(mu: AtomicMeasure, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(measure_to_json(mu), fh)
