"""Logarithmic weight pair with bounded local A_p but unbounded quadratic A_p.

f(x) = 1/(x (ln 1/x)^(1+alpha)) on (0, 1/2), sigma = f dx and
omega = [x (ln 1/x)^alpha]^(p-1) dx.  With a_l = l^eta the quadratic
inequality over the intervals (0, 2^-k) has a convergent right side and a
divergent left side whenever 0 < eps < (2 - p)/2.

Exponentially large factors 2^l are never formed: the inner sums are kept
as s_k = 4^-k sum_{l<=k} 4^l c_l, which obey s_k = s_{k-1}/4 + c_k, and
each omega cell mass is stored multiplied by 2^(kp).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, signal

from .measure import DensityMeasure

LN2 = math.log(2.0)


@dataclass(frozen=True)
class AppendixConfig:
    p: float = 1.5
    alpha: float = 1.0
    eps: float = 0.1
    n_max: int = 10 ** 6
    control: bool = False  # allow eps outside (0, (2-p)/2) for negative controls

    def __post_init__(self):
        if not 1 < self.p < 2:
            raise ValueError("p must lie in (1, 2); use dual_config for p > 2")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.eps <= 0 or (not self.control and self.eps >= (2 - self.p) / 2):
            raise ValueError("eps must lie in (0, (2 - p)/2)")
        if self.eps >= self.alpha:
            raise ValueError("need eps < alpha so that 2 eta + 1 > 0")
        if not 1 <= self.n_max <= 10 ** 7:
            raise ValueError("n_max must lie in [1, 1e7]")

    @property
    def eta(self) -> float:
        return ((self.alpha - self.eps) * 2 / self.p - 1) / 2

    @property
    def lhs_exponent(self) -> float:
        """eta p - alpha, the exponent of the left side summand."""
        return self.eta * self.p - self.alpha

    @property
    def diverges(self) -> bool:
        return self.lhs_exponent > -1


def dual_config(p: float, eps: float | None = None, n_max: int = 10 ** 6) -> AppendixConfig:
    """For p > 2 the pair (omega_{p',1}, sigma_{p',1}) fails the dual quadratic
    inequality at exponent p'; that is the p'-inequality for (sigma_{p',1}, omega_{p',1})."""
    if p <= 2:
        raise ValueError("dual_config is for p > 2")
    q = p / (p - 1)
    return AppendixConfig(q, 1.0, (2 - q) / 4 if eps is None else eps, n_max)


# ---------------------------------------------------------------- local A_p


def _omega_integral_quad(p: float, alpha: float, a: float, b: float) -> float:
    """int_a^b [x (ln 1/x)^alpha]^(p-1) dx by adaptive quadrature in u = ln(1/x)."""
    s = alpha * (p - 1)
    ua = math.inf if a <= 0 else math.log(1 / a)
    ub = math.log(1 / b)
    val, err = integrate.quad(lambda u: math.exp(-p * u) * u ** s, ub, ua, epsabs=1e-14, epsrel=1e-12, limit=200)
    if not err <= 1e-10 * max(abs(val), 1e-300) + 1e-14:
        raise ArithmeticError(f"quadrature did not converge on [{a}, {b}]")
    return val


def local_ap(p: float, alpha: float, a: float, b: float) -> float:
    """(|I|^-1 int_I w)(|I|^-1 int_I v^(1-p'))^(p-1) on I = [a, b] inside (0, 1/2].

    v^(1-p') equals f, whose primitive is (ln 1/x)^-alpha / alpha.
    """
    if not 0 <= a < b <= 0.5:
        raise ValueError("need 0 <= a < b <= 1/2 (intervals of length zero are degenerate)")
    length = b - a
    wpart = _omega_integral_quad(p, alpha, a, b) / length
    sig = DensityMeasure("sigma", alpha=alpha)
    vpart = float(sig.interval_mass(a, b)) / length
    return wpart * vpart ** (p - 1)


@dataclass
class BandReport:
    rs: np.ndarray
    values: np.ndarray
    band: float  # smallest C with values in [1/C, C]
    width: float  # max/min
    step_ratios: np.ndarray


def local_ap_band(p: float = 1.5, alpha: float = 1.0, kmin: int = 2, kmax: int = 20) -> BandReport:
    rs = 2.0 ** -np.arange(kmin, kmax + 1)
    vals = np.array([local_ap(p, alpha, 0.0, r) for r in rs])
    band = float(max(vals.max(), 1 / vals.min()))
    return BandReport(rs, vals, band, float(vals.max() / vals.min()), vals[1:] / vals[:-1])


# ---------------------------------------------------------------- quadratic sums


def _fsum_cumulative(terms: np.ndarray, checkpoints: np.ndarray) -> np.ndarray:
    """Exactly rounded partial sums of terms[:N] at each checkpoint N (sorted)."""
    out, acc, prev = [], [], 0
    for N in checkpoints:
        acc.append(math.fsum(terms[prev:N]))
        out.append(math.fsum(acc))
        prev = N
    return np.array(out)


def _omega_cell_scaled(p: float, alpha: float, ks: np.ndarray, nodes: int = 24) -> np.ndarray:
    """2^(kp) times the omega mass of (2^-k-1, 2^-k), via x = 2^-k t, t in (1/2, 1)."""
    s = alpha * (p - 1)
    t, wts = leggauss(nodes)
    t = 0.75 + 0.25 * t
    wts = 0.25 * wts
    vals = t[None, :] ** (p - 1) * (ks[:, None] * LN2 - np.log(t)[None, :]) ** s
    return vals @ wts


@dataclass
class QuadraticSums:
    config: AppendixConfig
    checkpoints: np.ndarray
    rhs_integral: np.ndarray
    rhs_series: np.ndarray
    lhs_integral: np.ndarray
    lhs_series_pre: np.ndarray
    lhs_series_post: np.ndarray

    def lhs_slope(self, lo: float = 1e3, hi: float = 1e6) -> float:
        """Least squares slope of log LHS_N against log N."""
        m = (self.checkpoints >= lo) & (self.checkpoints <= hi)
        return float(np.polyfit(np.log(self.checkpoints[m]), np.log(self.lhs_integral[m]), 1)[0])

    def lhs_increment_slope(self, lo: float = 1e3, hi: float = 1e6) -> float:
        """Slope of log(LHS_2N - LHS_N) against log N; immune to the additive constant."""
        return _increment_slope(self.checkpoints, self.lhs_integral, lo, hi)

    def rhs_tail(self) -> tuple[np.ndarray, np.ndarray]:
        """(N, RHS_2N - RHS_N) over checkpoints whose double is also a checkpoint."""
        return _doubling_increments(self.checkpoints, self.rhs_integral)


def _doubling_increments(cp: np.ndarray, vals: np.ndarray):
    pos = {int(N): i for i, N in enumerate(cp)}
    Ns, inc = [], []
    for i, N in enumerate(cp):
        j = pos.get(2 * int(N))
        if j is not None:
            Ns.append(N)
            inc.append(vals[j] - vals[i])
    return np.array(Ns, dtype=float), np.array(inc)


def _increment_slope(cp, vals, lo, hi) -> float:
    Ns, inc = _doubling_increments(cp, vals)
    m = (Ns >= lo) & (2 * Ns <= hi)
    return float(np.polyfit(np.log(Ns[m]), np.log(inc[m]), 1)[0])


def default_checkpoints(n_max: int) -> np.ndarray:
    """Powers of two times 1000 and a log-spaced grid, all <= n_max."""
    cps = set()
    N = 125
    while N <= n_max:
        cps.add(N)
        N *= 2
    for e in np.linspace(1, math.log10(n_max), 4 * int(math.log10(n_max)) + 1):
        cps.add(int(round(10 ** e)))
    cps.add(n_max)
    return np.array(sorted(c for c in cps if 1 <= c <= n_max))


def quadratic_sums(cfg: AppendixConfig, checkpoints: np.ndarray | None = None) -> QuadraticSums:
    """Partial sums over k <= N of both sides of the quadratic inequality with a_l = l^eta.

    rhs_integral uses the exact sigma mass of each cell (2^-k-1, 2^-k),
    rhs_series the asymptotic weight k^-(1+alpha).  lhs_integral uses the
    exact omega cell mass, lhs_series_* the asymptotic weight
    2^-kp k^(alpha(p-1)); "pre" keeps a_l l^-alpha as two factors and
    "post" uses the merged power l^(eta-alpha).
    """
    p, alpha, eta = cfg.p, cfg.alpha, cfg.eta
    cp = default_checkpoints(cfg.n_max) if checkpoints is None else np.asarray(checkpoints, dtype=int)
    N = int(cp.max())
    k = np.arange(1, N + 1, dtype=float)
    kl = k.astype(np.longdouble)
    S = np.cumsum(kl ** (2 * eta)).astype(float)  # sum_{l<=k} a_l^2
    sig_cell = ((k * LN2) ** -alpha - ((k + 1) * LN2) ** -alpha) / alpha
    rhs_int = S ** (p / 2) * sig_cell
    rhs_ser = S ** (p / 2) * k ** -(1 + alpha)
    # s_k = sum_l 4^(l-k) c_l  with c_l = |a_l l^-alpha|^2
    c_pre = (k ** eta * k ** -alpha) ** 2
    c_post = k ** (2 * (eta - alpha))
    s_pre = signal.lfilter([1.0], [1.0, -0.25], c_pre)
    s_post = signal.lfilter([1.0], [1.0, -0.25], c_post)
    om_cell = _omega_cell_scaled(p, alpha, k)
    lhs_int = s_post ** (p / 2) * om_cell
    lhs_pre = s_pre ** (p / 2) * k ** (alpha * (p - 1))
    lhs_post = s_post ** (p / 2) * k ** (alpha * (p - 1))
    return QuadraticSums(cfg, cp, _fsum_cumulative(rhs_int, cp), _fsum_cumulative(rhs_ser, cp),
                         _fsum_cumulative(lhs_int, cp), _fsum_cumulative(lhs_pre, cp),
                         _fsum_cumulative(lhs_post, cp))


def rhs_tail_constant(cfg: AppendixConfig) -> float:
    """Limit of (RHS_2N - RHS_N) N^eps for the exact-cell right side.

    The summand behaves like (ln 2)^-alpha (2 eta + 1)^(-p/2) k^-(1+eps).
    """
    return LN2 ** -cfg.alpha * (2 * cfg.eta + 1) ** (-cfg.p / 2) * (1 - 2.0 ** -cfg.eps) / cfg.eps


# ---------------------------------------------------------------- maximal function


def _F_u(alpha: float, u: np.ndarray) -> np.ndarray:
    """sigma mass of (0, e^-u], clipped to the support (0, 1/2]."""
    u = np.maximum(u, LN2)
    with np.errstate(divide="ignore"):
        return np.where(np.isinf(u), 0.0, u ** -alpha / alpha)


def scaled_maximal(alpha: float, u, n_grid: int = 400) -> np.ndarray:
    """x Mf(x) at x = e^-u, Mf the uncentred maximal function of f.

    Every interval [a, b] containing x is parametrised by a = x t, b = x s
    with t in [0, 1] and s >= 1; the average times x is
    (F(b) - F(a))/(s - t).  The search grid holds t = 0, t = 1, s = 1 and
    the support edge s = 1/(2x) exactly, with log-spaced points between.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty_like(u)
    tt = np.concatenate([[0.0], np.geomspace(1e-8, 1.0, n_grid)])
    for i, ui in enumerate(u):
        smax = max(1.0, 0.5 * math.exp(ui)) if ui < 700 else math.inf
        if math.isinf(smax):
            ss = np.concatenate([np.geomspace(1.0, 1e12, n_grid)])
        else:
            ss = np.unique(np.concatenate([np.geomspace(1.0, max(smax, 1.0) * 4, n_grid), [smax]]))
        with np.errstate(divide="ignore"):
            ua = np.where(tt > 0, ui - np.log(np.where(tt > 0, tt, 1.0)), np.inf)
        ub = ui - np.log(ss)
        Fa = _F_u(alpha, ua)
        Fb = _F_u(alpha, ub)
        width = ss[None, :] - tt[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            avg = np.where(width > 0, (Fb[None, :] - Fa[:, None]) / width, -np.inf)
        out[i] = float(avg.max())
    return out


def maximal_profile(alpha: float, xs) -> np.ndarray:
    """Mf(x) x (ln 1/x)^alpha, the ratio to the predicted size of Mf."""
    xs = np.asarray(xs, dtype=float)
    u = np.log(1 / xs)
    return scaled_maximal(alpha, u) * u ** alpha


def maximal_failure(alpha: float, u_cuts, points: int = 4000) -> np.ndarray:
    """I(c) = int_c^(1/2) Mf(x) dx at c = e^-U for each U in u_cuts.

    Since (Mf)^p w = Mf, this is the left side of the maximal inequality
    restricted to (c, 1/2).  In u = ln(1/x) it is int_{ln 2}^U x Mf(x) du.
    """
    u_cuts = np.asarray(u_cuts, dtype=float)
    grid = np.unique(np.concatenate([np.geomspace(LN2, u_cuts.max(), points), u_cuts]))
    h = scaled_maximal(alpha, grid)
    cum = np.concatenate([[0.0], np.cumsum(np.diff(grid) * (h[1:] + h[:-1]) / 2)])
    return np.interp(u_cuts, grid, cum)


def failure_increment_slope(alpha: float, u_cuts) -> float:
    """Slope of log(I(U_{j+1}) - I(U_j)) against log U_j for geometric U."""
    u_cuts = np.asarray(u_cuts, dtype=float)
    inc = np.diff(maximal_failure(alpha, u_cuts))
    return float(np.polyfit(np.log(u_cuts[:-1]), np.log(inc), 1)[0])


def companion_integral(alpha: float) -> float:
    """int_0^(1/2) f dx by quadrature in u = ln(1/x); equals (ln 2)^-alpha / alpha."""
    val, _ = integrate.quad(lambda u: u ** (-1 - alpha), LN2, math.inf, epsabs=1e-14, epsrel=1e-13)
    return val


# ---------------------------------------------------------------- discretised tower witness


def tower_growth(p: float = 1.5, alpha: float = 1.0, eps: float = 0.1, depths=range(8, 21)) -> list[tuple[int, float]]:
    """Quadratic ratio of the nested family (0, 2^-k), k < depth, with a_k = k^eta,
    on the discretised pair at each depth."""
    from .constants import tower_witness_value
    from .grid import GridSpec
    from .measure import appendix_discretized

    cfg = AppendixConfig(p, alpha, eps)
    out = []
    for d in depths:
        g = GridSpec(1, d)
        sig = appendix_discretized(g, p, alpha, "sigma")
        om = appendix_discretized(g, p, alpha, "omega")
        coeffs = np.arange(1, d, dtype=float) ** cfg.eta
        out.append((d, tower_witness_value(sig, om, 0.0, p, coeffs)))
    return out
