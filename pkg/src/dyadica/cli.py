"""Command line driver: `dyadica <verb> ...`.

Exit codes: 0 success, 1 a check failed, 2 bad usage or invalid input.
Every JSON report embeds the resolved config, sha256 digests of the input
files and a content hash over everything except the timestamp.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import click
import numpy as np

from . import verify
from .alpert import AlpertSystem
from .appendix import AppendixConfig, dual_config, quadratic_sums
from .constants import (AscentConfig, awbp, quad_offset_muckenhoupt, quad_tailed_muckenhoupt, quad_testing,
                        scalar_testing, wbp, write_csv)
from .corona import check_quantitative, cz_stopping, max_shift_overlap
from .forms import FormConfig, canonical_split, farbelow_split, ntv_reach_split, pair_data, split_by_size
from .grid import CubeId, GridError, GridSpec, format_cube
from .kernel import KernelSpec, Operator, load_kernel
from .measure import (AtomicMeasure, MeasureError, dilation_exponent, doubling_constant, doubling_exponent,
                      generate, load_measure, save_measure)
from .squarefn import SquareSpec, calibrate, random_function, ratio_report


class CheckFailed(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, CubeId):
        return format_cube(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def file_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def build_report(command: str, config: dict, results: dict, inputs: dict[str, str] | None = None) -> dict:
    body = {
        "command": command,
        "config": _jsonable(config),
        "inputs": {k: file_digest(v) for k, v in (inputs or {}).items() if v},
        "results": _jsonable(results),
    }
    body["content_hash"] = hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()
    body["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return body


def write_report(report: dict, path: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


def _workers(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    try:
        return max(1, int(os.environ.get("DYADICA_WORKERS", "1")))
    except ValueError:
        raise click.UsageError("DYADICA_WORKERS must be an integer")


def load_function(path: str | None, mu: AtomicMeasure, seed: int | None) -> np.ndarray:
    """Function values at the atoms of mu.

    The file holds {"values": [...]} in the atom order of the measure file,
    or {"kind": "gaussian"|"signs"|"indicator"|"cauchy", "seed": int}.
    """
    if path is None:
        if seed is None:
            raise click.UsageError("a seed is required when no function file is given")
        return random_function(mu, np.random.default_rng(seed), 0)
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MeasureError(f"invalid JSON ({exc.msg})", "<file>") from exc
    if not isinstance(obj, dict):
        raise MeasureError("function file must be a JSON object", "<root>")
    if "values" in obj:
        vals = obj["values"]
        if not isinstance(vals, list) or len(vals) != len(mu):
            raise MeasureError(f"expected {len(mu)} numbers", "values")
        try:
            arr = np.array(vals, dtype=float)
        except (TypeError, ValueError) as exc:
            raise MeasureError("values must be numbers", "values") from exc
        if not np.all(np.isfinite(arr)):
            raise MeasureError("values must be finite", "values")
        return arr[mu.order]
    kinds = {"gaussian": 0, "signs": 1, "indicator": 2, "cauchy": 3}
    kind = obj.get("kind")
    if kind not in kinds:
        raise MeasureError(f"expected 'values' or a kind in {sorted(kinds)}", "kind")
    s = obj.get("seed")
    if not isinstance(s, int) or isinstance(s, bool):
        raise MeasureError("a random function needs an integer seed", "seed")
    return random_function(mu, np.random.default_rng(s), kinds[kind])


class DyadicaGroup(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except MeasureError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(2)
        except (GridError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(2)
        except FileNotFoundError as exc:
            click.echo(f"error: {exc.filename}: file not found", err=True)
            ctx.exit(2)
        except CheckFailed as exc:
            click.echo(f"check failed: {exc}", err=True)
            ctx.exit(1)


@click.group(cls=DyadicaGroup)
def main():
    """Dyadic two-weight toolkit."""


# ---------------------------------------------------------------- measure


@main.group("measure", cls=DyadicaGroup)
def measure_cmd():
    """Generate and inspect measures."""


@measure_cmd.command("gen")
@click.option("--kind", type=click.Choice(["uniform", "cascade", "power", "appendix_discretized"]), required=True)
@click.option("--n", "n", type=int, default=1, show_default=True)
@click.option("--depth", type=int, default=8, show_default=True)
@click.option("--beta", type=float, default=0.25, show_default=True)
@click.option("--t", "t", type=float, default=None)
@click.option("--mode", type=click.Choice(["mirror", "free"]), default="mirror", show_default=True)
@click.option("--a", "a", type=float, default=0.0)
@click.option("--p", "p", type=float, default=1.5)
@click.option("--alpha", type=float, default=1.0)
@click.option("--which", type=click.Choice(["sigma", "omega"]), default="sigma")
@click.option("--seed", type=int, default=None)
@click.option("-o", "--output", required=True)
def measure_gen(kind, n, depth, beta, t, mode, a, p, alpha, which, seed, output):
    """Write a measure file."""
    if kind == "cascade" and seed is None and t is None:
        raise click.UsageError("cascade measures need --seed")
    mu = generate(kind, GridSpec(n, depth), beta=beta, seed=seed or 0, t=t, mode=mode, a=a, p=p, alpha=alpha,
                  which=which)
    save_measure(mu, output)
    click.echo(f"wrote {len(mu)} atoms to {output}")


@measure_cmd.command("info")
@click.argument("path")
@click.option("--report", default=None)
def measure_info(path, report):
    """Doubling constant and exponents of a measure file."""
    mu = load_measure(path)
    dc, de, dl = doubling_constant(mu), doubling_exponent(mu), dilation_exponent(mu)
    res = {"atoms": len(mu), "total": mu.total,
           "doubling_constant": dc.value, "doubling_infinite": dc.infinite, "doubling_witness": dc.witness,
           "doubling_exponent": de.value, "dilation_exponent": dl.value}
    write_report(build_report("measure info", {"path": path}, res, {"measure": path}), report)


@measure_cmd.command("expand")
@click.option("--measure", "mpath", required=True)
@click.option("--f", "fpath", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--kappa", type=int, default=1, show_default=True)
@click.option("-o", "--output", required=True, help="coefficient CSV")
def measure_expand(mpath, fpath, seed, kappa, output):
    """Alpert expansion of f; writes cube, rank, coefficient vector per row."""
    mu = load_measure(mpath)
    f = load_function(fpath, mu, seed)
    wc = AlpertSystem(mu, kappa).expand(f)
    wc.to_csv(output)
    err = float(np.sqrt(mu.masses @ (wc.reconstruct() - f) ** 2))
    click.echo(f"{len(wc.coeffs)} cubes, reconstruction error {err:.3e}")


# ---------------------------------------------------------------- corona


@main.command("corona")
@click.option("--measure", "mpath", required=True)
@click.option("--f", "fpath", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--gamma", type=float, default=2.0, show_default=True)
@click.option("--tau", type=int, default=2, show_default=True)
@click.option("--report", default=None)
def corona_cmd(mpath, fpath, seed, gamma, tau, report):
    """Stopping cubes of |f| and the quantitative corona checks."""
    mu = load_measure(mpath)
    f = load_function(fpath, mu, seed)
    tree = cz_stopping(mu, f, gamma)
    q = check_quantitative(tree, f)
    ov = max_shift_overlap(tree, tau)
    res = {
        "stopping": [{"cube": format_cube(F), "parent": format_cube(tree.parent[F]) if tree.parent[F] else None,
                      "average": tree.average[F], "alpha": tree.alpha[F]} for F in tree.cubes],
        "checks": q.checks, "measured": q.measured, "worst": q.worst,
        "shift_overlap": ov, "passed": q.passed and ov <= tau,
    }
    cfg = {"measure": mpath, "f": fpath, "seed": seed, "gamma": gamma, "tau": tau}
    write_report(build_report("corona", cfg, res, {"measure": mpath, "f": fpath}), report)
    if not res["passed"]:
        raise CheckFailed("corona checks failed")


# ---------------------------------------------------------------- square


@main.command("square")
@click.option("--kind", type=click.Choice(["haar", "alpert", "corona", "shifted_corona", "rho_delta"]),
              default="alpert", show_default=True)
@click.option("--kappa", type=int, default=1, show_default=True)
@click.option("--p", "p", type=float, default=2.0, show_default=True)
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--depth", type=int, default=10, show_default=True)
@click.option("--beta", type=float, default=0.25, show_default=True)
@click.option("--gamma", type=float, default=2.0, show_default=True)
@click.option("--tau", type=int, default=2, show_default=True)
@click.option("--rho", type=float, default=1.0, show_default=True)
@click.option("--delta", type=float, default=0.5, show_default=True)
@click.option("--calibrate/--no-calibrate", "do_cal", default=True, show_default=True)
@click.option("--report", default=None)
def square_cmd(kind, kappa, p, trials, seed, depth, beta, gamma, tau, rho, delta, do_cal, report):
    """L^p ratios of a square function over seeded random instances."""
    if p <= 1:
        raise click.BadParameter("p must exceed 1", param_hint="--p")
    spec = SquareSpec(kind, kappa, gamma, tau, rho, delta)
    rep = ratio_report(spec, p, depth, trials, seed, beta)
    res = {"max_ratio": rep.max_ratio, "mean_ratio": rep.mean_ratio, "witness_seed": rep.witness_seed}
    passed = True
    if do_cal:
        cal = calibrate(spec, p, 4, beta=beta)
        res.update(calibration=cal, cap=2 * cal, passed=rep.max_ratio <= 2 * cal)
        passed = res["passed"]
    cfg = dict(kind=kind, kappa=kappa, p=p, trials=trials, seed=seed, depth=depth, beta=beta, gamma=gamma, tau=tau,
               rho=rho, delta=delta, calibrate=do_cal)
    write_report(build_report("square", cfg, res), report)
    if not passed:
        raise CheckFailed(f"ratio {rep.max_ratio:.4g} exceeds twice the calibration")


# ---------------------------------------------------------------- constants


@main.command("constants")
@click.option("--spec", "kpath", required=True, help="kernel JSON")
@click.option("--sigma", "spath", required=True)
@click.option("--omega", "wpath", required=True)
@click.option("--p", "p", type=float, default=2.0, show_default=True)
@click.option("--kappa", type=int, default=1, show_default=True)
@click.option("--rho", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--restarts", type=int, default=20, show_default=True)
@click.option("--report", required=True, help="CSV output")
def constants_cmd(kpath, spath, wpath, p, kappa, rho, seed, restarts, report):
    """Norm, testing, Muckenhoupt and weak boundedness characteristics as a CSV table."""
    spec = load_kernel(kpath)
    sig, om = load_measure(spath), load_measure(wpath)
    if sig.n != spec.n or om.n != spec.n:
        raise MeasureError("measure dimension does not match the kernel", "n")
    op = Operator(spec, sig, om)
    cfg = AscentConfig(restarts=restarts, seed=seed)
    ests = [op.norm(p, restarts=restarts, seed=seed),
            scalar_testing(op, p), scalar_testing(op, p, "dual"),
            quad_testing(op, p, "local", cfg=cfg), quad_testing(op, p, "global", cfg=cfg),
            quad_testing(op, p, "triple", cfg=cfg),
            wbp(op, p, "extended", cfg=cfg), wbp(op, p, "HV", cfg=cfg),
            quad_offset_muckenhoupt(sig, om, spec.lam, p, "tailless", cfg),
            quad_offset_muckenhoupt(sig, om, spec.lam, p, "offset", cfg),
            quad_tailed_muckenhoupt(sig, om, spec.lam, p, "offset", cfg),
            awbp(op, kappa, rho, p, cfg)]
    write_csv(ests, report)
    for e in ests:
        click.echo(f"{e.name:>14s} {e.value:.6g} ({e.kind})")


# ---------------------------------------------------------------- forms


@main.command("forms")
@click.option("--identity", type=click.Choice(["all", "size", "canonical", "farbelow", "ntv"]), default="all",
              show_default=True)
@click.option("--depth", type=int, default=5, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--n", "n", type=int, default=1, show_default=True)
@click.option("--family", type=click.Choice(["hilbert", "signed_fractional", "riesz"]), default="hilbert")
@click.option("--lam", type=float, default=0.0, show_default=True)
@click.option("--kappa", type=int, default=1, show_default=True)
@click.option("--rho", type=float, default=3.0, show_default=True)
@click.option("--eps", type=float, default=0.25, show_default=True)
@click.option("--tau", type=int, default=2, show_default=True)
@click.option("--gamma", type=float, default=2.0, show_default=True)
@click.option("--beta", type=float, default=0.25, show_default=True)
@click.option("--estimate-mode", is_flag=True, help="enforce the parameter constraints of the estimates")
@click.option("--report", default=None)
def forms_cmd(identity, depth, seed, n, family, lam, kappa, rho, eps, tau, gamma, beta, estimate_mode, report):
    """Exact bilinear form ledgers on a seeded random instance."""
    cfg = FormConfig(kappa, rho, eps, tau, gamma)
    if estimate_mode:
        try:
            cfg.check_estimate_mode(n, lam)
        except ValueError as exc:
            raise click.UsageError(str(exc))
    spec = KernelSpec(family, lam=lam, delta=2.0 ** -depth / 4, R=2.0, n=n)
    g = GridSpec(n, depth)
    sig = generate("cascade", g, beta=beta, seed=seed)
    om = generate("cascade", g, beta=beta, seed=seed + 7919)
    rng = np.random.default_rng(seed)
    f = rng.standard_cauchy(size=len(sig))
    gv = rng.normal(size=len(om))
    op = Operator(spec, sig, om)
    pd = pair_data(op, f, gv, kappa)
    ledgers = {}
    if identity in ("all", "size"):
        ledgers["size"] = split_by_size(pd, cfg)
    if identity != "size":
        if not rho > tau:
            raise click.UsageError("the corona splits need rho > tau")
        tree = cz_stopping(sig, f, gamma)
        if identity in ("all", "canonical"):
            ledgers["canonical"] = canonical_split(pd, tree, cfg)
        if identity in ("all", "farbelow"):
            ledgers["farbelow"] = farbelow_split(pd, tree, cfg)
        if identity in ("all", "ntv"):
            ledgers["ntv"] = ntv_reach_split(pd, tree, cfg)
    res = {"total": pd.total}
    worst = 0.0
    for k, L in ledgers.items():
        res[k] = {"parts": L.parts, "residuals": L.residuals, "scale": L.scale, "counts": L.counts,
                  "max_relative": L.max_relative()}
        worst = max(worst, L.max_relative())
    structural = "canonical" not in ledgers or (ledgers["canonical"].counts["farabove"] == 0
                                                and ledgers["canonical"].counts["disjoint"] == 0)
    res["passed"] = worst <= 1e-8 and structural
    conf = dict(identity=identity, depth=depth, seed=seed, n=n, family=family, lam=lam, kappa=kappa, rho=rho,
                eps=eps, tau=tau, gamma=gamma, beta=beta, estimate_mode=estimate_mode)
    write_report(build_report("forms", conf, res), report)
    if not res["passed"]:
        raise CheckFailed(f"identity residual {worst:.3g}")


# ---------------------------------------------------------------- counterexample


@main.command("counterexample")
@click.option("--p", "p", type=float, default=1.5, show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--eps", type=float, default=None, help="defaults to (2 - p)/4")
@click.option("--nmax", type=int, default=10 ** 6, show_default=True)
@click.option("--report", required=True, help="CSV of partial sums at the checkpoints")
def counterexample_cmd(p, alpha, eps, nmax, report):
    """Partial sums of both sides of the quadratic inequality for the logarithmic pair."""
    if p > 2:
        cfg = dual_config(p, eps, nmax)
    elif p == 2 or p <= 1:
        raise click.BadParameter("p must lie in (1, 2) or (2, inf)", param_hint="--p")
    else:
        cfg = AppendixConfig(p, alpha, (2 - p) / 4 if eps is None else eps, nmax)
    qs = quadratic_sums(cfg)
    with open(report, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "rhs_integral", "rhs_series", "lhs_integral", "lhs_series_pre", "lhs_series_post"])
        for row in zip(qs.checkpoints, qs.rhs_integral, qs.rhs_series, qs.lhs_integral, qs.lhs_series_pre,
                       qs.lhs_series_post):
            w.writerow([int(row[0])] + [f"{v:.17g}" for v in row[1:]])
    lo = min(1e3, nmax / 8)
    click.echo(f"p={cfg.p:g} alpha={cfg.alpha:g} eps={cfg.eps:g} eta={cfg.eta:.6g} "
               f"exponent eta p - alpha = {cfg.lhs_exponent:.6g}")
    if nmax >= 8 * lo:
        click.echo(f"LHS growth exponent (doubling increments): {qs.lhs_increment_slope(lo, nmax):.4f}; "
                   f"log-log fit of LHS_N: {qs.lhs_slope(lo, nmax):.4f}")


# ---------------------------------------------------------------- verify-all


@main.command("verify-all")
@click.option("--depth", type=int, default=None, help="cap on sweep depths (default: the stated depths)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--only", default=None, help="comma separated criterion ids")
@click.option("--workers", type=int, default=None, help="defaults to DYADICA_WORKERS or 1")
@click.option("--report", default=None)
def verify_all(depth, seed, only, workers, report):
    """Run the acceptance criteria and print a summary table."""
    keys = list(verify.CRITERIA) if only is None else [k.strip() for k in only.split(",")]
    bad = [k for k in keys if k not in verify.CRITERIA]
    if bad:
        raise click.BadParameter(f"unknown criteria {bad}", param_hint="--only")
    if depth is not None and depth < 4:
        raise click.BadParameter("depth must be at least 4", param_hint="--depth")
    nw = _workers(workers)
    if nw > 1:
        with ProcessPoolExecutor(nw) as ex:
            results = list(ex.map(verify.run_criterion, keys, [seed] * len(keys), [depth] * len(keys)))
    else:
        results = [verify.run_criterion(k, seed, depth) for k in keys]
    for r in results:
        click.echo(r.line())
    cfg = {"depth": depth, "seed": seed, "criteria": keys}
    rep = build_report("verify-all", cfg, {r.id: r.hashable() for r in results})
    rep["timing"] = {r.id: {"seconds": r.seconds, "within_budget": r.within_budget} for r in results}
    write_report(rep, report)
    failed = [r.id for r in results if not r.passed or not r.within_budget]
    click.echo(f"{len(results) - len(failed)}/{len(results)} criteria passed; content hash {rep['content_hash']}")
    if failed:
        raise CheckFailed(f"criteria {failed}")


if __name__ == "__main__":
    main()
