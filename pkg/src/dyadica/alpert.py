"""Weighted Alpert projections.

For each dyadic cube I the space of polynomials of degree < kappa restricted
to I is orthonormalised in L^2(mu) via an eigendecomposition of its Gram
matrix in the centred, scaled monomials ((x - c_I)/l(I))^beta.  Directions
whose eigenvalue falls below 1e-12 times the largest are dropped, which
handles cubes carrying too few atoms.  E_I f is the orthogonal projection and
Delta_I f = sum over children E_I' f - E_I f.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .grid import CubeId, GridError, format_cube
from .measure import AtomicMeasure, monomials, multi_indices

RANK_TOL = 1e-12


@dataclass
class Polynomial:
    """sum_beta coeffs[beta] ((x - center)/side)^beta."""

    cube: CubeId
    exps: list[tuple[int, ...]]
    coeffs: np.ndarray

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[0] == 0:
            return np.zeros(0)
        return monomials((x - self.cube.center) / self.cube.side, self.exps) @ self.coeffs

    def degree(self) -> int:
        nz = [sum(b) for b, c in zip(self.exps, self.coeffs) if abs(c) > 0]
        return max(nz) if nz else -1


class AlpertSystem:
    """Per-level orthonormal polynomial bases for a measure and an order kappa."""

    def __init__(self, mu: AtomicMeasure, kappa: int):
        if kappa < 1:
            raise ValueError("kappa must be at least 1")
        self.mu = mu
        self.kappa = kappa
        self.exps = multi_indices(mu.n, kappa)
        self.r = len(self.exps)
        self._levels: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    # per-level data: atom Vandermonde, per-cube coefficient maps, ranks
    def level(self, lev: int):
        if lev not in self._levels:
            mu = self.mu
            starts, coords, grp = mu.groups(lev)
            side = 2.0 ** -lev
            centers = (coords[grp] + 0.5) * side
            V = monomials((mu.points - centers) / side, self.exps)
            G = mu.group_sums(lev, (V[:, :, None] * V[:, None, :]) * mu.masses[:, None, None])
            G = 0.5 * (G + np.transpose(G, (0, 2, 1)))
            w, U = np.linalg.eigh(G)
            top = w.max(axis=1, keepdims=True)
            keep = (w > RANK_TOL * top) & (top > 0)
            scale = np.where(keep, 1.0 / np.sqrt(np.where(keep, w, 1.0)), 0.0)
            C = U * scale[:, None, :]
            self._levels[lev] = (V, C, keep.sum(axis=1))
        return self._levels[lev]

    def rank(self, cube: CubeId) -> int:
        starts, coords, _ = self.mu.groups(cube.level)
        a, b = self.mu.cube_range(cube)
        if a == b:
            return 0
        g = int(np.searchsorted(starts, a))
        return int(self.level(cube.level)[2][g])

    def level_projection(self, f: np.ndarray, lev: int) -> np.ndarray:
        """sum over cubes Q of level lev of E_Q f, evaluated at the atoms."""
        V, C, _ = self.level(lev)
        _, _, grp = self.mu.groups(lev)
        mom = self.mu.group_sums(lev, V * (self.mu.masses * f)[:, None])
        b = np.einsum("gij,gi->gj", C, mom)
        a = np.einsum("gij,gj->gi", C, b)
        return np.einsum("ni,ni->n", V, a[grp])

    def level_differences(self, f: np.ndarray) -> np.ndarray:
        """Row l holds sum over level-l cubes of Delta f, for l < depth."""
        P = np.stack([self.level_projection(f, lev) for lev in range(self.mu.depth + 1)])
        return P[1:] - P[:-1]

    def _cube_data(self, cube: CubeId):
        a, b = self.mu.cube_range(cube)
        V, C, _ = self.level(cube.level)
        starts = self.mu.groups(cube.level)[0]
        if a == b:
            return a, b, V[a:b], np.zeros((self.r, self.r))
        g = int(np.searchsorted(starts, a))
        return a, b, V[a:b], C[g]

    def project(self, cube: CubeId, f: np.ndarray) -> Polynomial:
        """E_{I;kappa} f as a polynomial in centred, scaled monomials."""
        a, b, V, C = self._cube_data(cube)
        mom = V.T @ (self.mu.masses[a:b] * f[a:b])
        return Polynomial(cube, self.exps, C @ (C.T @ mom))

    def project_values(self, cube: CubeId, f: np.ndarray) -> np.ndarray:
        a, b, V, _ = self._cube_data(cube)
        return V @ self.project(cube, f).coeffs

    def basis_values(self, cube: CubeId) -> np.ndarray:
        """Orthonormal basis of polynomials on the cube, as values at its atoms."""
        a, b, V, C = self._cube_data(cube)
        cols = np.abs(C).sum(axis=0) > 0
        return V @ C[:, cols]

    def difference(self, cube: CubeId, f: np.ndarray) -> np.ndarray:
        """Delta_I f on the whole atom array (zero off the cube)."""
        if cube.level >= self.mu.depth:
            raise GridError(f"depth exceeded: {format_cube(cube)} has no children")
        out = np.zeros(len(self.mu))
        a, b = self.mu.cube_range(cube)
        if a == b:
            return out
        vals = -self.project_values(cube, f)
        for ch in cube.children():
            ca, cb = self.mu.cube_range(ch)
            if ca < cb:
                vals[ca - a:cb - a] += self.project_values(ch, f)
        out[a:b] = vals
        return out

    def wavelet_basis(self, cube: CubeId) -> np.ndarray:
        """Orthonormal basis of the Alpert space of the cube, values at its atoms.

        The space is the piecewise polynomials on the children that are
        orthogonal to polynomials on the cube itself.
        """
        if cube.level >= self.mu.depth:
            raise GridError(f"depth exceeded: {format_cube(cube)} has no children")
        a, b = self.mu.cube_range(cube)
        if a == b:
            return np.zeros((0, 0))
        blocks = []
        for ch in cube.children():
            ca, cb = self.mu.cube_range(ch)
            if ca < cb:
                Q = self.basis_values(ch)
                block = np.zeros((b - a, Q.shape[1]))
                block[ca - a:cb - a] = Q
                blocks.append(block)
        Qc = np.hstack(blocks)
        Qp = self.basis_values(cube)
        m = self.mu.masses[a:b]
        A = Qc.T @ (m[:, None] * Qp)
        U, s, _ = np.linalg.svd(A, full_matrices=True)
        rank = int((s > 1e-10).sum())
        return Qc @ U[:, rank:]

    def moment_defect(self, cube: CubeId, values: np.ndarray) -> np.ndarray:
        """Integrals of values against polynomials of degree < kappa on the cube."""
        a, b = self.mu.cube_range(cube)
        u = (self.mu.points[a:b] - cube.center) / cube.side
        return monomials(u, self.exps).T @ (self.mu.masses[a:b] * values[a:b])

    def expand(self, f: np.ndarray) -> "WaveletCoefficients":
        f = np.asarray(f, dtype=float)
        root = CubeId(0, (0,) * self.mu.n)
        top_basis = self.basis_values(root)
        top = top_basis.T @ (self.mu.masses * f)
        coeffs = {}
        for cube in self.mu.nonempty_cubes(self.mu.depth - 1):
            H = self.wavelet_basis(cube)
            if H.shape[1] == 0:
                continue
            a, b = self.mu.cube_range(cube)
            coeffs[cube] = H.T @ (self.mu.masses[a:b] * f[a:b])
        residual = f - self.level_projection(f, self.mu.depth)
        return WaveletCoefficients(self, top, coeffs, residual)

    def infinity_bound_ratio(self, cube: CubeId, f: np.ndarray) -> float:
        """sup over atoms of |E_I f| divided by the mu-average of |f| on I."""
        a, b = self.mu.cube_range(cube)
        avg = self.mu.average(cube, np.abs(f))
        if a == b or avg == 0:
            return 0.0
        return float(np.max(np.abs(self.project_values(cube, f))) / avg)


@dataclass
class WaveletCoefficients:
    """Top-level projection, Alpert coefficient vectors, and the finest-level residual.

    The residual is f minus its projection at the finest level; it vanishes
    whenever every finest cell holds at most kappa-admissible many atoms.
    """

    system: AlpertSystem
    top: np.ndarray
    coeffs: dict[CubeId, np.ndarray]
    residual: np.ndarray = field(repr=False)

    def magnitude(self, cube: CubeId) -> float:
        v = self.coeffs.get(cube)
        return 0.0 if v is None else float(np.linalg.norm(v))

    def energy(self) -> float:
        mu = self.system.mu
        return float(self.top @ self.top + sum(v @ v for v in self.coeffs.values())
                     + mu.masses @ self.residual ** 2)

    def reconstruct(self) -> np.ndarray:
        mu = self.system.mu
        root = CubeId(0, (0,) * mu.n)
        out = self.system.basis_values(root) @ self.top if len(mu) else np.zeros(0)
        out = out + self.residual
        for cube, v in self.coeffs.items():
            a, b = mu.cube_range(cube)
            out[a:b] += self.system.wavelet_basis(cube) @ v
        return out

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cube", "rank", "coefficients"])
            w.writerow(["top", len(self.top), ";".join(f"{v:.17g}" for v in self.top)])
            for cube in sorted(self.coeffs):
                v = self.coeffs[cube]
                w.writerow([format_cube(cube), len(v), ";".join(f"{x:.17g}" for x in v)])
