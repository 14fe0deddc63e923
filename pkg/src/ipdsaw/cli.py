"""Command-line interface.

Exit codes: 0 success, 1 a validation check failed, 2 usage error,
64 a resource budget (table size, brute-force cutoff, sampler cap) refused the run.

Data files written with ``--out`` get a sidecar ``<file>.manifest.json`` that
``ipdsaw replay`` can re-run.
"""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__, kernels, walk
from .config import load_settings
from .entropy import CURVE_COLUMNS, DPEntropy, NotConvergedError, SpectralEntropy, dyadic_grid, entropy_curve
from .free_energy import (
    FREE_ENERGY_COLUMNS,
    critical_point,
    excess_free_energy,
    finite_size_free_energy,
    transition_order_fit,
)
from .io import atomic_write, build_manifest, csv_text, read_csv, read_jsonl, write_manifest
from .lattice import CutoffError, ModelKind, StretchConfig, partition_bruteforce
from .sampler import RNG_ALGORITHM, get_sampler
from .svg import render_paths, render_phase_diagram
from .walk import TableBudgetError, partition_representation

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 64


class ValidationFailed(click.ClickException):
    exit_code = EXIT_VALIDATION


# --- helpers ---------------------------------------------------------------

def parse_grid(text: str) -> list[float]:
    """``"a,b,c"`` or ``"start:stop:count"`` (inclusive linspace)."""
    text = text.strip()
    if ":" in text:
        start, stop, num = text.split(":")
        return [float(x) for x in np.linspace(float(start), float(stop), int(num))]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def models_for(name: str) -> list[ModelKind]:
    return list(ModelKind) if name == "both" else [ModelKind.parse(name)]


MODEL_CHOICE = click.Choice(["u", "nu", "both"])


def _entropy(beta: float, method: str, N_max: int, K_max: int, V: int):
    if method == "spectral":
        return SpectralEntropy(beta, V)
    return DPEntropy.for_beta(beta, N_max, K_max)


def _excess_row(args):
    model, beta, method, N_max, K_max, V, grid, floor = args
    pt = excess_free_energy(beta, model, _entropy(beta, method, N_max, K_max, V), grid=grid, floor=floor)
    return pt.row()


def _finite_row(args):
    model, beta, L = args
    return finite_size_free_energy(L, beta, model).row()


def pmap(fn, items, jobs: int):
    """Ordered map, in worker processes when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def emit(ctx, text: str, out: str | None, params: dict, seeds=None):
    """Write ``text`` to ``out`` (plus manifest) or to stdout."""
    if out is None:
        click.echo(text, nl=False)
        return
    atomic_write(out, text)
    obj = ctx.find_root().obj
    manifest = build_manifest(
        ctx.info_name, obj["argv"], params, obj["settings"].as_dict(), [out], seeds=seeds,
        checkpoints=sorted(walk.CHECKPOINTS_USED), wall_clock=round(time.perf_counter() - obj["t0"], 3),
        backend=kernels.BACKEND)
    manifest["out_arg"] = out
    manifest["rng"] = RNG_ALGORITHM if seeds else None
    write_manifest(out, manifest)


def as_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# --- root group --------------------------------------------------------------

@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="ipdsaw")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON file overriding tolerance defaults.")
@click.option("--jobs", type=click.IntRange(1), default=1, show_default=True, help="Worker processes for sweeps.")
@click.option("--cache-dir", type=click.Path(file_okay=False), envvar="IPDSAW_CACHE_DIR",
              help="Directory for table checkpoints [env: IPDSAW_CACHE_DIR].")
@click.option("--cell-budget", type=float, default=None, help="Largest DP table, in float64 cells.")
@click.pass_context
def cli(ctx, config_path, jobs, cache_dir, cell_budget):
    """Exact computations for the interacting partially directed self-avoiding walk."""
    try:
        settings = load_settings(config_path, cell_budget=int(cell_budget) if cell_budget else None)
    except (ValueError, TypeError) as exc:
        raise click.UsageError(f"bad config: {exc}") from None
    if cache_dir:
        os.environ["IPDSAW_CACHE_DIR"] = str(cache_dir)
    os.environ["IPDSAW_CELL_BUDGET"] = str(settings.cell_budget)
    ctx.obj = {"settings": settings, "jobs": jobs, "argv": ctx.obj or [], "t0": time.perf_counter()}


def settings_of(ctx):
    return ctx.find_root().obj["settings"]


# --- subcommands -----------------------------------------------------------

@cli.command()
@click.option("--L", "L", type=click.IntRange(1), required=True)
@click.option("--beta", type=float, required=True)
@click.option("--model", type=MODEL_CHOICE, default="both", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def partition(ctx, L, beta, model, out):
    """log Z by the walk representation and by exhaustive enumeration."""
    s = settings_of(ctx)
    reports, ok = [], True
    for m in models_for(model):
        rep = partition_representation(L, beta, m)
        bf = partition_bruteforce(L, beta, m, cutoff=s.bruteforce_cutoff) if L <= s.bruteforce_cutoff else None
        r = {"model": str(m), "L": L, "beta": beta, "log_z_representation": rep, "log_z_bruteforce": bf}
        if bf is not None:
            gap = abs(rep - bf)
            r.update(abs_gap=gap, rel_gap=gap / max(abs(bf), 1.0), tolerance=s.representation_tol,
                     agree=gap <= s.representation_tol * max(abs(bf), 1.0))
            ok &= r["agree"]
        else:
            r["note"] = f"brute force skipped: L > cutoff {s.bruteforce_cutoff}"
        reports.append(r)
    emit(ctx, as_json(reports), out, {"L": L, "beta": beta, "model": model})
    if not ok:
        raise ValidationFailed("representation and brute force disagree")


@cli.command()
@click.option("--beta", type=float, required=True)
@click.option("--N-max", "N_max", type=click.IntRange(2), default=None, help="[default: config N_max]")
@click.option("--K-max", "K_max", type=click.IntRange(0), default=None, help="[default: config K_max]")
@click.option("--alpha-max", type=str, default="8", show_default=True)
@click.option("--den", type=click.IntRange(1), default=4, show_default=True, help="alpha grid denominator")
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def gcurve(ctx, beta, N_max, K_max, alpha_max, den, out):
    """Finite-N entropy curve on a rational alpha grid (CSV)."""
    s = settings_of(ctx)
    N_max = N_max or s.N_max
    K_max = s.K_max if K_max is None else K_max
    alphas = [a for a in dyadic_grid(alpha_max, den) if any(a * n <= K_max and (a * n).denominator == 1
                                                           for n in range(2, N_max + 1))]
    curve = entropy_curve(beta, alphas, N_max, K_max)
    emit(ctx, csv_text(CURVE_COLUMNS, curve.rows()), out,
         {"beta": beta, "N_max": N_max, "K_max": K_max, "alpha_max": alpha_max, "den": den})
    g = np.array([p.g_est for p in curve.points])
    if np.any(g > 0) or np.any(np.diff(g) < -1e-9):
        raise ValidationFailed("entropy curve is not nonpositive and nondecreasing")


def _sweep(ctx, models, betas, Ls, method, N_max, K_max, V):
    s = settings_of(ctx)
    jobs = ctx.find_root().obj["jobs"]
    N_max = N_max or s.N_max
    K_max = s.K_max if K_max is None else K_max
    V = V or s.spectral_V
    finite = pmap(_finite_row, [(str(m), b, L) for m in models for b in betas for L in Ls], jobs)
    inf = pmap(_excess_row, [(str(m), b, method, N_max, K_max, V, s.alpha_grid, s.floor)
                             for m in models for b in betas], jobs)
    rows = []
    it = iter(finite)
    for i, (m, b) in enumerate((m, b) for m in models for b in betas):
        rows.extend(next(it) for _ in Ls)
        rows.append(inf[i])
    params = {"models": [str(m) for m in models], "betas": betas, "L": Ls, "g_method": method,
              "N_max": N_max, "K_max": K_max, "V": V}
    return rows, params


def _check_rows(rows, floor):
    bad = [r for r in rows if r["L_or_inf"] != "inf" and r["f"] > r["beta"]]
    bad += [r for r in rows if r["L_or_inf"] == "inf" and r["f_excess"] < -floor]
    if bad:
        raise ValidationFailed(f"{len(bad)} rows violate f <= beta or f_excess >= -floor")


G_METHOD = click.Choice(["dp", "spectral"])


@cli.command("free-energy")
@click.option("--model", type=MODEL_CHOICE, default="both", show_default=True)
@click.option("--beta", "beta_grid", type=str, required=True, help='"a,b,c" or "start:stop:count"')
@click.option("--L", "L_list", type=str, default="", help="finite sizes, comma separated")
@click.option("--g-method", type=G_METHOD, default="dp", show_default=True)
@click.option("--N-max", "N_max", type=click.IntRange(2), default=None)
@click.option("--K-max", "K_max", type=click.IntRange(0), default=None)
@click.option("--V", "V", type=click.IntRange(2), default=None, help="spectral truncation")
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def free_energy(ctx, model, beta_grid, L_list, g_method, N_max, K_max, V, out):
    """Finite-size and variational free energies on a beta grid (CSV)."""
    rows, params = _sweep(ctx, models_for(model), parse_grid(beta_grid), parse_ints(L_list), g_method, N_max, K_max, V)
    emit(ctx, csv_text(FREE_ENERGY_COLUMNS, rows), out, params)
    _check_rows(rows, settings_of(ctx).floor)


@cli.command()
@click.option("--model", type=MODEL_CHOICE, default="both", show_default=True)
@click.option("--beta-min", type=float, default=0.3, show_default=True)
@click.option("--beta-max", type=float, default=2.5, show_default=True)
@click.option("--steps", type=click.IntRange(2), default=45, show_default=True)
@click.option("--g-method", type=G_METHOD, default="dp", show_default=True)
@click.option("--N-max", "N_max", type=click.IntRange(2), default=None)
@click.option("--K-max", "K_max", type=click.IntRange(0), default=None)
@click.option("--V", "V", type=click.IntRange(2), default=None)
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def scan(ctx, model, beta_min, beta_max, steps, g_method, N_max, K_max, V, out):
    """Phase diagram: excess free energy and phase label over a beta grid (CSV)."""
    betas = [float(b) for b in np.linspace(beta_min, beta_max, steps)]
    rows, params = _sweep(ctx, models_for(model), betas, [], g_method, N_max, K_max, V)
    emit(ctx, csv_text(FREE_ENERGY_COLUMNS, rows), out, params)
    _check_rows(rows, settings_of(ctx).floor)


@cli.command("critical-point")
@click.option("--model", type=MODEL_CHOICE, default="both", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def critical_point_cmd(ctx, model, out):
    """Critical coupling from Gamma = 1 and from the polynomial route."""
    s = settings_of(ctx)
    reports, ok = [], True
    for m in models_for(model):
        cp = critical_point(m)
        agree = abs(cp.beta_c - cp.beta_c_polynomial) <= s.critical_two_route
        ok &= agree and cp.residual < s.critical_residual
        reports.append({"model": str(m), "beta_c": cp.beta_c, "beta_c_polynomial": cp.beta_c_polynomial,
                        "two_route_gap": abs(cp.beta_c - cp.beta_c_polynomial), "agree": agree,
                        "residual": cp.residual})
    emit(ctx, as_json(reports), out, {"model": model})
    if not ok:
        raise ValidationFailed("critical point checks failed")


@cli.command()
@click.option("--model", type=MODEL_CHOICE, default="both", show_default=True)
@click.option("--eps", "eps_grid", type=str, default=None, help="[default: config order_eps]")
@click.option("--N-max", "N_list", type=str, default=None, help="doubling sequence [default: config order_N_max]")
@click.option("--reference/--no-reference", default=True, show_default=True,
              help="also fit with the spectral entropy bound")
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def order(ctx, model, eps_grid, N_list, reference, out):
    """Transition-order fit and its drift as N_max doubles (JSON)."""
    s = settings_of(ctx)
    eps = parse_grid(eps_grid) if eps_grid else list(s.order_eps)
    Ns = parse_ints(N_list) if N_list else list(s.order_N_max)
    lo, hi = s.order_bracket
    reports, ok = [], True
    for m in models_for(model):
        fits = []
        for N in Ns:
            fit = transition_order_fit(m, eps, lambda b, N=N: DPEntropy.for_beta(b, N, 8 * N), s.floor)
            fits.append({"N_max": N, "K_max": 8 * N, "slope": fit.slope, "f_excess": fit.f_excess})
            walk.clear_profile_cache()
        dist = [abs(f["slope"] - 1.5) for f in fits]
        drift_ok = all(b <= a for a, b in zip(dist, dist[1:]))
        final = fits[-1]["slope"]
        r = {"model": str(m), "eps": eps, "fits": fits, "final_slope": final,
             "in_bracket": lo <= final <= hi, "drift_toward_1.5": drift_ok, "bracket": [lo, hi]}
        if reference:
            ref = transition_order_fit(m, eps, lambda b: SpectralEntropy(b, s.spectral_V), s.floor)
            r["spectral_reference"] = {"V": s.spectral_V, "slope": ref.slope, "f_excess": ref.f_excess}
        ok &= r["in_bracket"] and drift_ok
        reports.append(r)
    emit(ctx, as_json(reports), out, {"model": model, "eps": eps, "N_max": Ns})
    if not ok:
        raise ValidationFailed("transition-order fit outside bracket or drifting away from 1.5")


@cli.command()
@click.option("--L", "L", type=click.IntRange(1), required=True)
@click.option("--beta", type=float, required=True)
@click.option("--model", type=click.Choice(["u", "nu"]), required=True)
@click.option("--seed", type=click.IntRange(0), required=True, help="mandatory: no implicit entropy source")
@click.option("--count", type=click.IntRange(1), default=1, show_default=True)
@click.option("--start", type=click.IntRange(0), default=0, show_default=True, help="first sample index")
@click.option("--with-stretches", is_flag=True, help="include the full stretch vector")
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def sample(ctx, L, beta, model, seed, count, start, with_stretches, out):
    """Exact Boltzmann samples as JSON lines."""
    s = settings_of(ctx)
    sampler = get_sampler(L, beta, model, s.sampler_max_L)
    lines = "".join(p.to_json(with_stretches) + "\n" for p in sampler.sample_many(seed, count, start))
    emit(ctx, lines, out, {"L": L, "beta": beta, "model": model, "count": count, "start": start,
                           "with_stretches": with_stretches}, seeds=[seed])


@cli.command()
@click.option("--samples", "samples_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON lines from `sample --with-stretches`")
@click.option("--scan", "scan_path", type=click.Path(exists=True, dir_okay=False), help="CSV from `scan`")
@click.option("--limit", type=click.IntRange(1), default=4, show_default=True, help="panels from --samples")
@click.option("--columns", type=click.IntRange(1), default=2, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def render(ctx, samples_path, scan_path, limit, columns, out):
    """SVG figure from a sample dump or a scan CSV."""
    if (samples_path is None) == (scan_path is None):
        raise click.UsageError("give exactly one of --samples or --scan")
    if samples_path:
        recs = read_jsonl(samples_path)[:limit]
        if not recs or any("stretches" not in r for r in recs):
            raise click.UsageError("sample dump has no stretch vectors (use --with-stretches)")
        cfgs = [StretchConfig(tuple(r["stretches"])) for r in recs]
        titles = [f"{r['model']} beta={r['beta']:g} L={r['L']} N={r['N']} touches={r['touches']}" for r in recs]
        text = render_paths(cfgs, titles, columns)
    else:
        rows = [r for r in read_csv(scan_path) if r["L_or_inf"] == "inf"]
        text = render_phase_diagram(rows)
    emit(ctx, text, out, {"samples": samples_path, "scan": scan_path, "limit": limit, "columns": columns})


@cli.command()
@click.option("--only", multiple=True, help="run only these checks")
@click.pass_context
def selftest(ctx, only):
    """Invariant suite; one JSON record per check."""
    from . import selftest as st

    failed = 0
    for rec in st.run(settings_of(ctx), set(only)):
        click.echo(json.dumps(rec, sort_keys=True))
        failed += not rec["pass"]
    click.echo(json.dumps({"summary": {"failed": failed, "backend": kernels.BACKEND}}, sort_keys=True))
    if failed:
        raise ValidationFailed(f"{failed} checks failed")


@cli.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="write replayed outputs here and compare with the originals")
def replay(manifest, out_dir):
    """Re-run the command recorded in MANIFEST."""
    man = json.loads(Path(manifest).read_text())
    argv = list(man["argv"])
    original = Path(manifest).with_name(man["outputs"][0])
    target = original
    if out_dir is not None:
        target = Path(out_dir) / original.name
        argv = [str(target) if a == man["out_arg"] else a for a in argv]
    recorded = original.read_bytes() if original.exists() else None
    code = main(argv)
    if code != EXIT_OK:
        sys.exit(code)
    same = recorded is not None and recorded == target.read_bytes()
    click.echo(json.dumps({"replayed": man["command"], "output": str(target), "identical": same}, sort_keys=True))
    if not same:
        raise ValidationFailed("replayed output differs from the recorded one")


# --- entry point -------------------------------------------------------------

ENV_KEYS = ("IPDSAW_CACHE_DIR", "IPDSAW_CELL_BUDGET")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    saved = {k: os.environ.get(k) for k in ENV_KEYS}
    try:
        return _dispatch(argv)
    finally:
        for k, v in saved.items():
            if v is None:
                os.environ.pop(k, None)
            else:
                os.environ[k] = v


def _dispatch(argv) -> int:
    try:
        cli.main(args=argv, prog_name="ipdsaw", standalone_mode=False, obj=argv)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_VALIDATION
    except NotConvergedError as exc:
        click.echo(f"refused: {exc}", err=True)
        return EXIT_VALIDATION
    except (TableBudgetError, CutoffError) as exc:
        click.echo(f"refused: {exc}", err=True)
        return EXIT_BUDGET
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
