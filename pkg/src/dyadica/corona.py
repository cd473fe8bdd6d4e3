"""Calderon-Zygmund stopping times, coronas and their shifted variants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import CubeId, format_cube
from .measure import AtomicMeasure


@dataclass
class StoppingTree:
    """Stopping cubes with tree links, stopping averages and alpha values."""

    mu: AtomicMeasure
    gamma: float
    cubes: list[CubeId]
    parent: dict[CubeId, CubeId | None]
    children: dict[CubeId, list[CubeId]]
    average: dict[CubeId, float]
    alpha: dict[CubeId, float]
    _owner: dict[CubeId, CubeId | None] = field(default_factory=dict, repr=False)

    @property
    def top(self) -> CubeId:
        return self.cubes[0]

    def __contains__(self, cube: CubeId) -> bool:
        return cube in self.parent

    def owner(self, cube: CubeId) -> CubeId | None:
        """The stopping cube F with cube in C_F (smallest stopping cube containing it)."""
        if cube in self._owner:
            return self._owner[cube]
        cur = cube
        path = []
        res = None
        while True:
            if cur in self.parent:
                res = cur
                break
            if cur in self._owner:
                res = self._owner[cur]
                break
            path.append(cur)
            if cur.level <= self.top.level:
                break
            cur = cur.parent()
        if res is not None and not res.contains(cube):
            res = None
        for c in path:
            self._owner[c] = res
        self._owner[cube] = res
        return res

    def in_corona(self, cube: CubeId, F: CubeId) -> bool:
        return self.owner(cube) == F

    def near(self, cube: CubeId, F: CubeId, tau: int) -> bool:
        """cube is in N^tau(F): inside F and more than 2^-tau l(F) in side."""
        return F.contains(cube) and cube.level - F.level < tau

    def in_shifted(self, cube: CubeId, F: CubeId, tau: int) -> bool:
        """Membership in [C_F minus N(F)] union over children F' of [N(F') minus N(F)]."""
        if self.in_corona(cube, F) and not self.near(cube, F, tau):
            return True
        if self.near(cube, F, tau):
            return False
        return any(self.near(cube, ch, tau) for ch in self.children.get(F, []))

    def shifted_owners(self, cube: CubeId, tau: int) -> list[CubeId]:
        """All F whose shifted corona contains cube, found by scanning candidates."""
        cands = set()
        own = self.owner(cube)
        if own is not None:
            cands.add(own)
            p = self.parent.get(own)
            # cube may sit in N(F') for several stopping ancestors F' within tau levels
            cur = own
            while cur is not None and cube.level - cur.level < tau + 1:
                cands.add(cur)
                if self.parent.get(cur) is not None:
                    cands.add(self.parent[cur])
                cur = self.parent.get(cur)
            if p is not None:
                cands.add(p)
        return sorted(F for F in cands if self.in_shifted(cube, F, tau))

    def shifted_owner(self, cube: CubeId, tau: int) -> CubeId | None:
        """Owner of the tau-th ancestor: the unique shifted corona holding cube."""
        if cube.level - self.top.level < tau:
            return None
        return self.owner(cube.ancestor(tau))

    def descendants(self, F: CubeId) -> list[CubeId]:
        out, stack = [], [F]
        while stack:
            c = stack.pop()
            out.append(c)
            stack.extend(self.children.get(c, []))
        return out

    def generations(self) -> list[list[CubeId]]:
        gens = [[self.top]]
        while True:
            nxt = [c for F in gens[-1] for c in self.children.get(F, [])]
            if not nxt:
                return gens
            gens.append(sorted(nxt))

    def generation_of(self, F: CubeId, k: int) -> list[CubeId]:
        cur = [F]
        for _ in range(k):
            cur = [c for G in cur for c in self.children.get(G, [])]
        return cur

    def corona_cubes(self, F: CubeId, max_level: int | None = None) -> list[CubeId]:
        """Nonempty cubes of C_F down to max_level (default: one above the finest)."""
        top = self.mu.depth - 1 if max_level is None else max_level
        out = []
        stops = set(self.children.get(F, []))
        stack = [F]
        while stack:
            c = stack.pop()
            out.append(c)
            if c.level >= top:
                continue
            for ch in c.children():
                if ch in stops or self.mu.mass(ch) <= 0:
                    continue
                stack.append(ch)
        return sorted(out)


def _abs_sums(mu: AtomicMeasure, f: np.ndarray):
    af = np.abs(f) * mu.masses
    return af


def cz_stopping(mu: AtomicMeasure, f: np.ndarray, gamma: float = 2.0, top: CubeId | None = None) -> StoppingTree:
    """Calderon-Zygmund stopping cubes for |f| with ratio gamma.

    The stopping children of F are the maximal strict subcubes I of F with
    positive mass and E_I|f| >= gamma E_F|f|; the construction recurses into
    each child.  When E_F|f| = 0 the cube F has no stopping children.
    """
    if gamma <= 1:
        raise ValueError("gamma must exceed 1")
    top = CubeId(0, (0,) * mu.n) if top is None else top
    af = np.abs(np.asarray(f, dtype=float)) * mu.masses

    def avg(c: CubeId) -> float:
        a, b = mu.cube_range(c)
        m = mu.masses[a:b].sum()
        return float(af[a:b].sum() / m) if m > 0 else 0.0

    def mass(c: CubeId) -> float:
        a, b = mu.cube_range(c)
        return float(mu.masses[a:b].sum())

    cubes = [top]
    parent: dict[CubeId, CubeId | None] = {top: None}
    children: dict[CubeId, list[CubeId]] = {}
    average = {top: avg(top)}
    queue = [top]
    while queue:
        F = queue.pop(0)
        threshold = gamma * average[F]
        kids = []
        if average[F] > 0:
            stack = F.children() if F.level < mu.depth else []
            while stack:
                c = stack.pop()
                if mass(c) <= 0:
                    continue
                e = avg(c)
                if e >= threshold:
                    kids.append(c)
                elif c.level < mu.depth:
                    stack.extend(c.children())
        kids.sort()
        children[F] = kids
        for c in kids:
            parent[c] = F
            average[c] = avg(c)
            cubes.append(c)
            queue.append(c)
    alpha = {}
    for F in cubes:
        p = parent[F]
        alpha[F] = max(average[F], alpha[p]) if p is not None else average[F]
    return StoppingTree(mu, gamma, cubes, parent, children, average, alpha)


@dataclass
class QuantReport:
    passed: bool
    checks: dict[str, bool]
    measured: dict[str, float]
    worst: dict[str, str]


def check_quantitative(tree: StoppingTree, f: np.ndarray, tol: float = 1e-12) -> QuantReport:
    mu = tree.mu
    g = tree.gamma
    masses = {F: mu.mass(F) for F in tree.cubes}
    checks, measured, worst = {}, {}, {}
    # (i) stopping children carry at most a 1/gamma share of the mass
    r1, w1 = 0.0, ""
    for F in tree.cubes:
        if masses[F] > 0:
            s = sum(masses[c] for c in tree.children[F]) / (masses[F] / g)
            if s > r1:
                r1, w1 = s, format_cube(F)
    checks["child_sum"] = r1 <= 1 + tol
    measured["child_sum"], worst["child_sum"] = r1, w1
    # (ii) Carleson packing
    carl = g / (g - 1)
    sub = {}
    for F in reversed(tree.cubes):
        sub[F] = masses[F] + sum(sub[c] for c in tree.children[F])
    r2, w2 = 0.0, ""
    for F in tree.cubes:
        if masses[F] > 0 and sub[F] / masses[F] > r2:
            r2, w2 = sub[F] / masses[F], format_cube(F)
    checks["carleson"] = r2 <= carl * (1 + tol)
    measured["carleson"], worst["carleson"] = r2, w2
    # (iii), (iv) quasi-orthogonality, measured constants
    f2 = float(mu.masses @ f ** 2)
    s3 = sum(tree.alpha[F] ** 2 * masses[F] for F in tree.cubes)
    field_vals = np.zeros(len(mu))
    for F in tree.cubes:
        a, b = mu.cube_range(F)
        field_vals[a:b] += tree.alpha[F]
    s4 = float(mu.masses @ field_vals ** 2)
    measured["quasi_orth"] = s3 / f2 if f2 > 0 else 0.0
    measured["quasi_orth_field"] = s4 / f2 if f2 > 0 else 0.0
    checks["quasi_orth"] = math.isfinite(measured["quasi_orth"])
    checks["quasi_orth_field"] = math.isfinite(measured["quasi_orth_field"])
    # (v) averages inside a corona stay below gamma alpha(F)
    r5, w5, ok5 = 0.0, "", True
    for F in tree.cubes:
        for I in tree.corona_cubes(F, mu.depth):
            e = mu.average(I, np.abs(f))
            if e == 0:
                continue
            ratio = e / (g * tree.alpha[F]) if tree.alpha[F] > 0 else math.inf
            if ratio > r5:
                r5, w5 = ratio, format_cube(I)
            if not e < g * tree.alpha[F]:
                ok5 = False
    checks["average_control"] = ok5
    measured["average_control"], worst["average_control"] = r5, w5
    # (vi) geometric decay: beta_{l N}(F) <= 2^-l |F| with N = floor(2 gamma/(gamma - 1))
    N = int(math.floor(2 * carl))
    r6, w6 = 0.0, ""
    for F in tree.cubes:
        if masses[F] <= 0:
            continue
        k = 1
        while True:
            gen = tree.generation_of(F, k)
            if not gen:
                break
            beta = sum(masses[c] for c in gen)
            bound = 2.0 ** -(k // N) * masses[F]
            direct = g ** -k * masses[F]
            ratio = max(beta / bound, beta / direct)
            if ratio > r6:
                r6, w6 = ratio, f"{format_cube(F)} gen {k}"
            k += 1
    checks["decay"] = r6 <= 1 + tol
    measured["decay"], worst["decay"] = r6, w6
    return QuantReport(all(checks.values()), checks, measured, worst)


def max_shift_overlap(tree: StoppingTree, tau: int, max_level: int | None = None) -> int:
    """Largest number of shifted coronas sharing one cube (by the set definition)."""
    top = tree.mu.depth if max_level is None else max_level
    worst = 0
    for J in tree.mu.nonempty_cubes(top):
        worst = max(worst, len(tree.shifted_owners(J, tau)))
    return worst
