"""Smoothly truncated fractional kernels, their operators on atomic measures,
Poisson integrals, and the kernel-side inequality checks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .alpert import AlpertSystem
from .estimate import ConstantEstimate
from .grid import CubeId, deeply_embedded, dilate, format_cube
from .measure import AtomicMeasure, multi_indices

FAMILIES = ("hilbert", "signed_fractional", "riesz")
C0 = 3.0  # offset radius: offset cubes lie within C0 * l(I) of I


def smoothstep(s) -> np.ndarray:
    """psi(s) = 6s^5 - 15s^4 + 10s^3 on (0,1), 0 below and 1 above."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return s ** 3 * (10 - 15 * s + 6 * s * s)


@dataclass(frozen=True)
class KernelSpec:
    family: str = "hilbert"
    lam: float = 0.0
    delta: float = 0.01
    R: float = 2.0
    n: int = 1
    component: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not 0 <= self.lam < self.n:
            raise ValueError("lambda must satisfy 0 <= lambda < n")
        if not 0 < self.delta < self.R:
            raise ValueError("need 0 < delta < R")
        if self.family in ("hilbert", "signed_fractional") and self.n != 1:
            raise ValueError(f"{self.family} kernel is one-dimensional")
        if self.family == "hilbert" and self.lam != 0:
            raise ValueError("hilbert kernel has lambda = 0")
        if not 0 <= self.component < self.n:
            raise ValueError("riesz component out of range")

    def truncation(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return smoothstep(t / self.delta - 1) * (1 - smoothstep(t / self.R - 1))

    def raw(self, x, y) -> np.ndarray:
        """Untruncated kernel K(x, y) for broadcastable point arrays (..., n)."""
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        if d.ndim == 0 or d.shape[-1] != self.n:
            d = d[..., None]
        r = np.sqrt(np.sum(d * d, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family == "hilbert":
                out = 1.0 / d[..., 0]
            elif self.family == "signed_fractional":
                out = np.sign(d[..., 0]) * r ** (self.lam - 1)
            else:
                out = d[..., self.component] / r ** (self.n - self.lam + 1)
        return np.where(r > 0, out, 0.0)

    def __call__(self, x, y) -> np.ndarray:
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        if d.ndim == 0 or d.shape[-1] != self.n:
            d = d[..., None]
        r = np.sqrt(np.sum(d * d, axis=-1))
        return self.raw(x, y) * self.truncation(r)

    def matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """K(x_i, y_j) for rows x in X and columns y in Y."""
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        return self(X[:, None, :], Y[None, :, :])

    def to_json(self) -> dict:
        d = {"family": self.family, "lambda": self.lam, "delta": self.delta, "R": self.R}
        if self.n != 1:
            d["n"] = self.n
        if self.family == "riesz":
            d["component"] = self.component
        return d


def kernel_from_json(obj) -> KernelSpec:
    if not isinstance(obj, dict):
        raise ValueError("kernel spec must be a JSON object")
    try:
        return KernelSpec(family=obj["family"], lam=float(obj.get("lambda", 0.0)),
                          delta=float(obj.get("delta", 0.01)), R=float(obj.get("R", 2.0)),
                          n=int(obj.get("n", 1)), component=int(obj.get("component", 0)))
    except KeyError as exc:
        raise ValueError(f"kernel spec missing {exc.args[0]}") from exc


def load_kernel(path: str) -> KernelSpec:
    with open(path) as fh:
        return kernel_from_json(json.load(fh))


class Operator:
    """T_sigma from L^p(sigma) to L^p(omega) for a truncated kernel."""

    def __init__(self, spec: KernelSpec, sigma: AtomicMeasure, omega: AtomicMeasure):
        self.spec, self.sigma, self.omega = spec, sigma, omega
        self.K = spec.matrix(omega.points, sigma.points)

    def apply(self, f: np.ndarray) -> np.ndarray:
        """T_sigma f at the omega atoms: sum_y K(x, y) f(y) sigma(y)."""
        return self.K @ (self.sigma.masses * f)

    def adjoint(self, g: np.ndarray) -> np.ndarray:
        """T*_omega g at the sigma atoms: sum_x K(x, y) g(x) omega(x)."""
        return self.K.T @ (self.omega.masses * g)

    def pairing(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.dot(self.omega.masses * g, self.apply(f)))

    def weighted_matrix(self) -> np.ndarray:
        return np.sqrt(self.omega.masses)[:, None] * self.K * np.sqrt(self.sigma.masses)[None, :]

    def norm(self, p: float = 2.0, restarts: int = 20, iters: int = 200, seed: int = 0) -> ConstantEstimate:
        return operator_norm(self, p, restarts, iters, seed)


def lp_norm(values: np.ndarray, masses: np.ndarray, p: float) -> float:
    return float(np.dot(masses, np.abs(values) ** p) ** (1.0 / p))


def _dual(v: np.ndarray, p: float) -> np.ndarray:
    return np.sign(v) * np.abs(v) ** (p - 1)


def operator_norm(op: Operator, p: float = 2.0, restarts: int = 20, iters: int = 200,
                  seed: int = 0) -> ConstantEstimate:
    """Norm of T_sigma: L^p(sigma) -> L^p(omega).

    p = 2 is the top singular value of diag(sqrt w) K diag(sqrt s).  Other p
    use alternating dual ascent (f -> dual of T f -> dual of T* of that) from
    random starts, which only ever certifies a lower bound.
    """
    if p == 2:
        M = op.weighted_matrix()
        val = float(np.linalg.norm(M, 2)) if M.size else 0.0
        return ConstantEstimate("N", val, "exact-sup", "svd", "all functions", None)
    rng = np.random.default_rng(seed)
    q = p / (p - 1)
    s, w = op.sigma.masses, op.omega.masses
    best, wit = 0.0, ""
    starts = [rng.normal(size=len(s)) for _ in range(restarts)]
    for k, f in enumerate(starts):
        for _ in range(iters):
            nf = lp_norm(f, s, p)
            if nf == 0:
                break
            f = f / nf
            Tf = op.apply(f)
            val = lp_norm(Tf, w, p)
            if val > best:
                best, wit = val, f"start {k}"
            g = _dual(Tf, p)
            h = op.adjoint(g)
            f_new = _dual(h, q)
            if np.allclose(f_new / max(lp_norm(f_new, s, p), 1e-300), f, atol=1e-13):
                break
            f = f_new
    return ConstantEstimate("N", best, "lower-bound", wit, f"dual ascent, {restarts} starts", seed)


# ---------------------------------------------------------------- Poisson


def poisson(cube: CubeId, points: np.ndarray, masses: np.ndarray, lam: float, t: float) -> float:
    """P_t^lambda(J, mu) = sum l^t / (l + |y - c_J|)^(t + n - lambda) mu(y)."""
    n = cube.n
    ell = cube.side
    r = np.linalg.norm(np.atleast_2d(points) - cube.center, axis=1)
    return float(np.sum(masses * ell ** t / (ell + r) ** (t + n - lam)))


def poisson_many(centers: np.ndarray, sides: np.ndarray, points: np.ndarray, masses: np.ndarray,
                 lam: float, t: float) -> np.ndarray:
    n = points.shape[1]
    r = np.linalg.norm(centers[:, None, :] - points[None, :, :], axis=2)
    ell = sides[:, None]
    return np.sum(masses[None, :] * ell ** t / (ell + r) ** (t + n - lam), axis=1)


@dataclass
class BandReport:
    passed: bool
    ratio_min: float
    ratio_max: float
    lower: float
    upper: float
    theta: float
    kappa: float
    witness_min: str
    witness_max: str


def kappa_large_band(n: int, lam: float, kappa: float, theta: float, depth: int) -> tuple[float, float]:
    """Bounds for P_kappa(Q, mu) / (|Q|^(lam/n - 1) |Q|_mu) on a measure with
    dilation exponent theta (|2^j Q| <= 2^(j theta) |Q|).

    Lower: every atom of Q is within sqrt(n) l/2 of the centre.  Upper: the
    annulus 2^j Q minus 2^(j-1) Q sits at distance >= 2^(j-2) l, and the
    dilates stop growing once they cover the domain.
    """
    a = n + kappa - lam
    lower = (1 + math.sqrt(n) / 2) ** (-a)
    upper = 1.0
    for j in range(1, depth + 2):
        upper += (1 + 2.0 ** (j - 2)) ** (-a) * 2.0 ** (j * theta)
    return lower, upper


def check_kappa_large(mu: AtomicMeasure, lam: float, kappa: float, theta: float,
                      max_level: int | None = None) -> BandReport:
    top = mu.depth - 2 if max_level is None else max_level
    cubes = [c for c in mu.nonempty_cubes(top)]
    centers = np.array([c.center for c in cubes])
    sides = np.array([c.side for c in cubes])
    P = poisson_many(centers, sides, mu.points, mu.masses, lam, kappa)
    mass = np.array([mu.mass(c) for c in cubes])
    ratio = P / (sides ** (lam - mu.n) * mass)
    lo, hi = kappa_large_band(mu.n, lam, kappa, theta, mu.depth)
    i, k = int(np.argmin(ratio)), int(np.argmax(ratio))
    ok = bool(ratio.min() >= lo * (1 - 1e-12) and ratio.max() <= hi * (1 + 1e-12))
    return BandReport(ok, float(ratio[i]), float(ratio[k]), lo, hi, theta, kappa,
                      format_cube(cubes[i]), format_cube(cubes[k]))


def poisson_decay_ratio(J: CubeId, I: CubeId, K: CubeId, sigma: AtomicMeasure, lam: float,
                        kappa: float, eps: float) -> float:
    """P(J, s 1_{K\\I}) / [(l(J)/l(I))^(kappa - eps(n + kappa - lam)) P(I, s 1_{K\\I})]."""
    a, b = sigma.cube_range(K)
    ia, ib = sigma.cube_range(I)
    sel = np.zeros(len(sigma), dtype=bool)
    sel[a:b] = True
    sel[ia:ib] = False
    pts, m = sigma.points[sel], sigma.masses[sel]
    pi = poisson(I, pts, m, lam, kappa)
    if pi == 0:
        return 0.0
    n = sigma.n
    scale = (J.side / I.side) ** (kappa - eps * (n + kappa - lam))
    return poisson(J, pts, m, lam, kappa) / (scale * pi)


def embedded_triples(depth: int, n: int, rho: float, eps: float):
    """All (J, I, K) with J deeply embedded in I and I a strict subcube of K."""
    from .grid import GridSpec
    grid = GridSpec(n, depth)
    out = []
    for I in grid.cubes():
        if I.level == 0:
            continue
        for lev in range(I.level + 1, depth + 1):
            for J in I.descendants_at(lev):
                if deeply_embedded(J, I, rho, eps):
                    for K in I.ancestors():
                        out.append((J, I, K))
    return out


def max_poisson_decay(sigma: AtomicMeasure, lam: float, kappa: float, rho: float, eps: float,
                      triples=None) -> tuple[float, tuple | None]:
    if triples is None:
        triples = embedded_triples(sigma.depth, sigma.n, rho, eps)
    best, wit = 0.0, None
    for J, I, K in triples:
        r = poisson_decay_ratio(J, I, K, sigma, lam, kappa, eps)
        if r > best:
            best, wit = r, (J, I, K)
    return best, wit


def pivotal_parts(spec: KernelSpec, J: CubeId, omega: AtomicMeasure, nu_points: np.ndarray,
                  nu_masses: np.ndarray, psi: np.ndarray, R=None, phi=None) -> tuple[float, float]:
    """(|<R T(phi nu), Psi>_omega|, int_J |Psi| d omega).

    nu must live off 2J; psi is a function on the omega atoms supported in J
    with vanishing moments; R is a callable polynomial (defaults to 1).
    """
    lo, hi = dilate(J, 2.0)
    inside = np.all((nu_points >= lo) & (nu_points <= hi), axis=1)
    if np.any(inside & (nu_masses > 0)):
        raise ValueError("nu must be supported off 2J")
    a, b = omega.cube_range(J)
    x = omega.points[a:b]
    w = omega.masses[a:b]
    ps = psi[a:b]
    phi_v = np.ones(len(nu_masses)) if phi is None else phi
    Tnu = spec.matrix(x, nu_points) @ (phi_v * nu_masses)
    Rv = np.ones(len(x)) if R is None else R(x)
    num = abs(float(np.dot(w * ps, Rv * Tnu)))
    return num, w @ np.abs(ps)


def pivotal_ratio(spec, J, omega, nu_points, nu_masses, psi, kappa, R=None, phi=None) -> float:
    """|<R T(phi nu), Psi>_omega| / (P_kappa(J, nu) int_J |Psi| d omega)."""
    num, l1 = pivotal_parts(spec, J, omega, nu_points, nu_masses, psi, R, phi)
    P = poisson(J, nu_points, nu_masses, spec.lam, kappa)
    if P == 0 or l1 == 0:
        return 0.0
    return num / (P * l1)


# ---------------------------------------------------------------- smoothness


def smoothness_slopes(spec: KernelSpec, orders=(0, 1, 2), seps=None) -> dict[int, float]:
    """Log-log slope of |d^j/dx^j K(x, 0)| against |x| for the untruncated kernel.

    Derivatives are central finite differences along the first axis with a
    step proportional to the separation.
    """
    if seps is None:
        seps = np.logspace(-3, 0, 13)
    e = np.zeros(spec.n)
    e[0] = 1.0
    y = np.zeros(spec.n)
    out = {}
    for j in orders:
        vals = []
        for t in seps:
            x = t * e
            h = 1e-2 * t
            if j == 0:
                v = spec.raw(x, y)
            elif j == 1:
                v = (spec.raw(x + h * e, y) - spec.raw(x - h * e, y)) / (2 * h)
            else:
                v = (spec.raw(x + h * e, y) - 2 * spec.raw(x, y) + spec.raw(x - h * e, y)) / h ** 2
            vals.append(abs(float(v)))
        out[j] = float(np.polyfit(np.log(seps), np.log(vals), 1)[0])
    return out


def expected_slope(spec: KernelSpec, j: int) -> float:
    return spec.lam - j - spec.n
