"""Bilinear form bookkeeping for <T_sigma f, g>_omega over Alpert pairs.

Every pair (I, J) of a sigma-cube and an omega-cube contributes
<T_sigma Delta_I f, Delta_J g>_omega.  The pairs are sorted into size
classes, the deeply embedded ones are split along a corona decomposition,
and the diagonal pieces are split once more into neighbour, paraproduct,
stopping and commutator terms.  Each split is an exact identity, so the
ledgers double as consistency checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .alpert import AlpertSystem
from .corona import StoppingTree, cz_stopping
from .grid import CubeId, child_containing, deeply_embedded, dist_linf, format_cube
from .kernel import KernelSpec, Operator
from .measure import AtomicMeasure

SIZE_CLASSES = ("below", "above", "disjoint", "comparable", "adjacent", "bad_below", "bad_above")


@dataclass(frozen=True)
class FormConfig:
    kappa: int = 1
    rho: float = 3.0
    eps: float = 0.25
    tau: int = 2
    gamma: float = 2.0

    def check_estimate_mode(self, n: int, lam: float) -> None:
        """Parameter constraints needed for the estimates (not for the identities)."""
        if not self.kappa > self.eps * (n - lam) / (1 - self.eps):
            raise ValueError("need kappa > eps (n - lambda)/(1 - eps)")
        if not self.rho > self.tau:
            raise ValueError("need rho > tau")


def classify_pair(I: CubeId, J: CubeId, rho: float, eps: float) -> str:
    """Size class of a pair; deep embedding takes precedence over the size window.

    below: J deeply embedded in I.  above: I deeply embedded in J.
    disjoint: J and I disjoint with size ratio outside [2^-rho, 2^rho].
    comparable: ratio inside the window and closures apart.
    adjacent: ratio inside the window and closures touching.
    bad_below / bad_above: nested, ratio outside the window, but too close to
    the boundary to be deeply embedded.
    """
    if deeply_embedded(J, I, rho, eps):
        return "below"
    if deeply_embedded(I, J, rho, eps):
        return "above"
    in_window = abs(J.level - I.level) <= rho + 1e-12
    if in_window:
        return "adjacent" if dist_linf(I, J) == 0.0 else "comparable"
    if I.contains(J):
        return "bad_below"
    if J.contains(I):
        return "bad_above"
    return "disjoint"


def literal_classes(I: CubeId, J: CubeId, rho: float, eps: float) -> list[str]:
    """Every class whose defining condition the pair meets (no precedence)."""
    out = []
    in_window = abs(J.level - I.level) <= rho + 1e-12
    if deeply_embedded(J, I, rho, eps):
        out.append("below")
    if deeply_embedded(I, J, rho, eps):
        out.append("above")
    if not in_window and not (I.contains(J) or J.contains(I)):
        out.append("disjoint")
    if in_window and dist_linf(I, J) > 0:
        out.append("comparable")
    if in_window and dist_linf(I, J) == 0:
        out.append("adjacent")
    return out


@dataclass
class PairData:
    """Alpert differences of f and g and the full pair matrix."""

    op: Operator
    sys_s: AlpertSystem
    sys_w: AlpertSystem
    f: np.ndarray
    g: np.ndarray
    I_cubes: list[CubeId]
    J_cubes: list[CubeId]
    DF: np.ndarray
    DG: np.ndarray
    P: np.ndarray  # P[j, i] = <T Delta_I f, Delta_J g>
    top: float
    total: float


def pair_data(op: Operator, f: np.ndarray, g: np.ndarray, kappa: int) -> PairData:
    sig, om = op.sigma, op.omega
    As, Aw = AlpertSystem(sig, kappa), AlpertSystem(om, kappa)
    Ic = sig.nonempty_cubes(sig.depth - 1)
    Jc = om.nonempty_cubes(om.depth - 1)
    DF = np.stack([As.difference(c, f) for c in Ic], axis=1)
    DG = np.stack([Aw.difference(c, g) for c in Jc], axis=1)
    P = DG.T @ (om.masses[:, None] * op.K * sig.masses[None, :]) @ DF
    total = op.pairing(f, g)
    # the part of f and g outside the Alpert differences: top projection and finest residual
    f_rest = f - DF.sum(axis=1)
    g_rest = g - DG.sum(axis=1)
    top = op.pairing(f_rest, g) + op.pairing(DF.sum(axis=1), g_rest)
    return PairData(op, As, Aw, f, g, Ic, Jc, DF, DG, P, top, total)


@dataclass
class Ledger:
    parts: dict[str, float]
    residuals: dict[str, float]
    scale: float
    counts: dict[str, int] = field(default_factory=dict)

    def max_relative(self) -> float:
        return max(abs(v) for v in self.residuals.values()) / self.scale if self.residuals else 0.0


def split_by_size(pd: PairData, cfg: FormConfig) -> Ledger:
    parts = {f"B_{c}": 0.0 for c in SIZE_CLASSES}
    counts = {c: 0 for c in SIZE_CLASSES}
    overlaps = 0
    for j, J in enumerate(pd.J_cubes):
        for i, I in enumerate(pd.I_cubes):
            c = classify_pair(I, J, cfg.rho, cfg.eps)
            parts[f"B_{c}"] += pd.P[j, i]
            counts[c] += 1
            if len(literal_classes(I, J, cfg.rho, cfg.eps)) > 1:
                overlaps += 1
    counts["literal_overlaps"] = overlaps
    parts["B_top"] = pd.top
    scale = float(np.abs(pd.P).sum() + abs(pd.total) + abs(pd.top)) or 1.0
    res = {"sum": sum(parts.values()) - pd.total}
    return Ledger(parts, res, scale, counts)


def _strictly_contains(F: CubeId, G: CubeId) -> bool:
    return F != G and F.contains(G)


def _shifted_owner(tree: StoppingTree, J: CubeId, tau: int) -> CubeId | None:
    owners = tree.shifted_owners(J, tau)
    if len(owners) > 1:
        raise AssertionError(f"{format_cube(J)} lies in {len(owners)} shifted coronas")
    return owners[0] if owners else None


def canonical_split(pd: PairData, tree: StoppingTree, cfg: FormConfig) -> Ledger:
    """Split the deeply embedded pairs by the relative position of their coronas.

    I lies in the corona of F, J in the shifted corona of G.  The far-above
    and disjoint parts are empty whenever rho > tau; cubes in no shifted
    corona are collected separately.
    """
    parts = {"B_below": 0.0, "T_diag": 0.0, "T_farbelow": 0.0, "T_farabove": 0.0,
             "T_disjoint": 0.0, "T_orphan": 0.0}
    counts = {k: 0 for k in ("diag", "farbelow", "farabove", "disjoint", "orphan")}
    for j, J in enumerate(pd.J_cubes):
        G = _shifted_owner(tree, J, cfg.tau)
        for i, I in enumerate(pd.I_cubes):
            if classify_pair(I, J, cfg.rho, cfg.eps) != "below":
                continue
            v = pd.P[j, i]
            parts["B_below"] += v
            F = tree.owner(I)
            if G is None or F is None:
                key = "orphan"
            elif G == F:
                key = "diag"
            elif _strictly_contains(F, G):
                key = "farbelow"
            elif _strictly_contains(G, F):
                key = "farabove"
            else:
                key = "disjoint"
            parts[f"T_{key}"] += v
            counts[key] += 1
    scale = float(np.abs(pd.P).sum()) or 1.0
    res = {"sum": parts["T_diag"] + parts["T_farbelow"] + parts["T_farabove"] + parts["T_disjoint"]
           + parts["T_orphan"] - parts["B_below"]}
    return Ledger(parts, res, scale, counts)


def farbelow_split(pd: PairData, tree: StoppingTree, cfg: FormConfig) -> Ledger:
    """T_farbelow = T1 - T2: all nested pairs minus the nested pairs that are not deeply embedded."""
    parts = {"T_farbelow": 0.0, "T1": 0.0, "T2": 0.0}
    for j, J in enumerate(pd.J_cubes):
        G = _shifted_owner(tree, J, cfg.tau)
        if G is None:
            continue
        for i, I in enumerate(pd.I_cubes):
            F = tree.owner(I)
            if F is None or not _strictly_contains(F, G) or not I.contains(J):
                continue
            v = pd.P[j, i]
            parts["T1"] += v
            if deeply_embedded(J, I, cfg.rho, cfg.eps) and classify_pair(I, J, cfg.rho, cfg.eps) == "below":
                parts["T_farbelow"] += v
            else:
                parts["T2"] += v
    scale = float(np.abs(pd.P).sum()) or 1.0
    return Ledger(parts, {"difference": parts["T1"] - parts["T2"] - parts["T_farbelow"]}, scale)


def ntv_reach_split(pd: PairData, tree: StoppingTree, cfg: FormConfig) -> Ledger:
    """Per-corona split of the diagonal pairs into neighbour, paraproduct, stop and commutator.

    For J deeply embedded in I, with I_J the child of I containing J and M
    the polynomial of Delta_I f on I_J:
      home        = <T(1_{I_J} Delta_I f), Delta_J g>
      neighbour   = sum over the other children theta of <T(1_theta Delta_I f), Delta_J g>
      paraproduct = <M T 1_F, Delta_J g>
      stop        = -<M T 1_{F minus I_J}, Delta_J g>
      commutator  = <T(M 1_{I_J}) - M T 1_{I_J}, Delta_J g>
    """
    op = pd.op
    sig, om = op.sigma, op.omega
    K = op.K
    parts = {k: 0.0 for k in ("B_diag", "home", "neighbour", "paraproduct", "stop", "commutator")}
    per_F: dict[CubeId, dict[str, float]] = {}
    Iidx = {c: i for i, c in enumerate(pd.I_cubes)}
    for j, J in enumerate(pd.J_cubes):
        G = _shifted_owner(tree, J, cfg.tau)
        if G is None:
            continue
        ja, jb = om.cube_range(J)
        dg = pd.DG[ja:jb, j] * om.masses[ja:jb]
        xJ = om.points[ja:jb]
        for I in pd.I_cubes:
            if tree.owner(I) != G or classify_pair(I, J, cfg.rho, cfg.eps) != "below":
                continue
            i = Iidx[I]
            F = G
            df = pd.DF[:, i]
            IJ = child_containing(I, J)
            ca, cb = sig.cube_range(IJ)
            fa, fb = sig.cube_range(F)
            ia, ib = sig.cube_range(I)
            Ksub = K[ja:jb]
            sm = sig.masses
            home = float(dg @ (Ksub[:, ca:cb] @ (df[ca:cb] * sm[ca:cb])))
            nb_mask = np.zeros(len(sig), dtype=bool)
            nb_mask[ia:ib] = True
            nb_mask[ca:cb] = False
            neighbour = float(dg @ (Ksub[:, nb_mask] @ (df[nb_mask] * sm[nb_mask])))
            M = pd.sys_s.project(IJ, df)
            Mx = M(xJ)
            My = M(sig.points[ca:cb])
            T1F = Ksub[:, fa:fb] @ sm[fa:fb]
            T1IJ = Ksub[:, ca:cb] @ sm[ca:cb]
            para = float(dg @ (Mx * T1F))
            stop = -float(dg @ (Mx * (T1F - T1IJ)))
            comm = float(dg @ ((Ksub[:, ca:cb] * (My[None, :] - Mx[:, None])) @ sm[ca:cb]))
            pair = pd.P[j, i]
            rec = per_F.setdefault(F, {k: 0.0 for k in parts})
            for k, v in (("B_diag", pair), ("home", home), ("neighbour", neighbour),
                         ("paraproduct", para), ("stop", stop), ("commutator", comm)):
                rec[k] += v
                parts[k] += v
    scale = float(np.abs(pd.P).sum()) or 1.0
    res = {
        "home+neighbour": parts["home"] + parts["neighbour"] - parts["B_diag"],
        "para+stop+comm": parts["paraproduct"] + parts["stop"] + parts["commutator"] - parts["home"],
    }
    for F, rec in per_F.items():
        res[f"F {format_cube(F)}"] = (rec["neighbour"] + rec["paraproduct"] + rec["stop"]
                                      + rec["commutator"] - rec["B_diag"])
    return Ledger(parts, res, scale, {"coronas": len(per_F)})


@dataclass
class FormsReport:
    size: Ledger
    canonical: Ledger
    farbelow: Ledger
    ntv: Ledger

    def max_relative(self) -> float:
        return max(self.size.max_relative(), self.canonical.max_relative(),
                   self.farbelow.max_relative(), self.ntv.max_relative())

    def structural_empty(self) -> bool:
        return self.canonical.counts["farabove"] == 0 and self.canonical.counts["disjoint"] == 0


def run_identities(op: Operator, f: np.ndarray, g: np.ndarray, cfg: FormConfig) -> FormsReport:
    if not cfg.rho > cfg.tau:
        raise ValueError("the canonical split needs rho > tau")
    pd = pair_data(op, f, g, cfg.kappa)
    tree = cz_stopping(op.sigma, f, cfg.gamma)
    return FormsReport(split_by_size(pd, cfg), canonical_split(pd, tree, cfg),
                       farbelow_split(pd, tree, cfg), ntv_reach_split(pd, tree, cfg))
