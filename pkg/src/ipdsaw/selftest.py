"""Fast invariant suite behind ``ipdsaw selftest``.

Each check returns ``(passed, detail)``; the runner yields one record per
check. The whole suite runs in well under a minute.
"""

from __future__ import annotations

import math
import tempfile
import time
from fractions import Fraction

import numpy as np

from . import kernels
from .config import Settings
from .entropy import dyadic_grid, entropy_curve, g_area_leq, g_estimate, g_finite
from .free_energy import critical_point, excess_free_energy, finite_size_free_energy
from .lattice import (
    StretchConfig,
    count_paths,
    count_self_touchings,
    enumerate_paths,
    enumerate_stretches,
    hamiltonian,
    partition_bruteforce,
    path_to_stretches,
    path_weight_exact,
    stretches_to_path,
    wedge,
    zigzag,
)
from .sampler import exactness_check
from .walk import (
    GeometricLaw,
    build_return_profile,
    build_table,
    constrained_return_prob,
    gamma,
    load_checkpoint,
    partition_representation,
    save_checkpoint,
    stretch_to_walk,
)

CHECKS = {}


def check(fn):
    CHECKS[fn.__name__.removeprefix("check_")] = fn
    return fn


@check
def check_wedge(s: Settings):
    ok = wedge(3, -4) == 3 and wedge(2, 5) == 0 and wedge(0, 7) == 0
    ok &= all(wedge(x, y) == (abs(x) + abs(y) - abs(x + y)) // 2 for x in range(-12, 13) for y in range(-12, 13))
    return ok, None


@check
def check_figure_config(s: Settings):
    cfg = StretchConfig((3, -4, 3, 2, 0, -2, 3))
    path = stretches_to_path(cfg)
    ok = cfg.L == 24 and hamiltonian(cfg) == 8 and count_self_touchings(path) == 8
    ok &= path_to_stretches(path) == cfg and stretch_to_walk(cfg) == (3, 1, -1, -5, 2, 2, 1, -3)
    ok &= hamiltonian(zigzag(4)) == 9
    return ok, None


@check
def check_bijection(s: Settings):
    for L in range(1, 9):
        for path in enumerate_paths(L):
            cfg = path_to_stretches(path)
            if stretches_to_path(cfg) != path or count_self_touchings(path) != hamiltonian(cfg):
                return False, f"L={L}"
    return True, None


@check
def check_counts(s: Settings):
    ok = [count_paths(L) for L in range(1, 6)] == [1, 3, 7, 17, 41]
    ok &= all(count_paths(L) == sum(1 for _ in enumerate_paths(L)) for L in range(1, 10))
    ratio = count_paths(201) / count_paths(200)
    ok &= abs(ratio - (1 + math.sqrt(2))) < 1e-3
    return ok, {"ratio_200": ratio}


@check
def check_uniform_mass(s: Settings):
    ok = all(sum(path_weight_exact(c, "u") for c in enumerate_stretches(L)) == 1 for L in range(1, 9))
    return ok, None


@check
def check_representation(s: Settings):
    worst = 0.0
    for model in ("u", "nu"):
        for beta in (0.3, 1.0, 3.0):
            for L in range(2, 9):
                worst = max(worst, abs(partition_representation(L, beta, model) - partition_bruteforce(L, beta, model)))
    return worst <= s.representation_tol, {"max_abs_gap": worst}


@check
def check_two_site(s: Settings):
    ok = all(abs(partition_representation(2, b, "u")) < 1e-13 for b in (0.5, 2.0))
    ok &= all(abs(partition_representation(2, b, "nu") - math.log(4 / 9)) < 1e-13 for b in (0.5, 2.0))
    return ok, None


@check
def check_zero_area(s: Settings):
    law = GeometricLaw(1.0)
    prof = build_return_profile(law, 10, 4)
    gap = max(abs(constrained_return_prob(prof, N, 0) + N * law.log_c) for N in range(11))
    return gap < 1e-12, {"max_gap": gap}


@check
def check_table_small(s: Settings):
    t = build_table(GeometricLaw(2 * math.log(2)), 3, 3)
    ok = abs(math.exp(t.logp(2, 0, 0)) - 1 / 9) < 1e-14 and abs(math.exp(t.logp(2, 0, 1)) - 1 / 18) < 1e-14
    return ok, None


@check
def check_gamma_monotone(s: Settings):
    ok = all(np.all(np.diff([gamma(m, b) for b in np.linspace(0.1, 5, 50)]) < 0) for m in ("u", "nu"))
    return bool(ok), None


@check
def check_critical_points(s: Settings):
    nu, u = critical_point("nu"), critical_point("u")
    ok = abs(nu.beta_c - nu.beta_c_polynomial) <= s.critical_two_route and abs(nu.beta_c - 1) < 0.05
    ok &= abs(u.beta_c - u.beta_c_polynomial) <= s.critical_two_route and abs(u.beta_c - 1.2188) < 1e-3
    ok &= max(nu.residual, u.residual) < s.critical_residual
    return ok, {"beta_c_nu": nu.beta_c, "beta_c_u": u.beta_c}


@check
def check_entropy(s: Settings):
    beta = 1.0
    curve = entropy_curve(beta, dyadic_grid(4, 4), 32, 128)
    g = np.array([p.g_est for p in curve.points])
    ok = abs(g[0] + GeometricLaw(beta).log_c) < 1e-12 and bool(np.all(g <= 0))
    ok &= bool(np.all(np.diff(g) >= -1e-9)) and bool(np.all(g[1:-1] - (g[:-2] + g[2:]) / 2 >= -1e-9))
    for a in (Fraction(1, 2), Fraction(1)):
        g_best = g_estimate(beta, a, 128)[0]
        for N in range(2, 25, 2):
            mid = g_area_leq(beta, N, a)
            ok &= g_finite(beta, N, a) <= mid + 1e-14
            ok &= mid <= g_best + math.log(a * N + 1) / N
    return ok, None


@check
def check_phase(s: Settings):
    out = {}
    ok = True
    for m in ("u", "nu"):
        bc = critical_point(m).beta_c
        hi = excess_free_energy(bc + 0.5, m).f_excess
        lo = excess_free_energy(bc - 0.3, m).f_excess
        ok &= hi <= s.floor and lo > 10 * s.floor
        out[m] = {"above": hi, "below": lo}
    return ok, out


@check
def check_upper_bound(s: Settings):
    ok = all(finite_size_free_energy(L, b, m).f <= b for m in ("u", "nu") for b in (0.5, 2.0) for L in (4, 32, 100))
    return ok, None


@check
def check_sampler(s: Settings):
    rep = exactness_check(4, 1.0, "nu", 20_000, seed=0)
    return rep.chi2_pvalue > 1e-4, {"tv": rep.tv, "chi2_pvalue": rep.chi2_pvalue}


@check
def check_checkpoint(s: Settings):
    prof = build_return_profile(GeometricLaw(0.9), 6, 9)
    with tempfile.TemporaryDirectory() as d:
        back = load_checkpoint(save_checkpoint(prof, f"{d}/p.npz"))
    return bool(np.array_equal(back.logp0, prof.logp0)), None


@check
def check_backends(s: Settings):
    if "compiled" not in kernels.BACKENDS:
        return True, "compiled backend not built; skipped"
    law = GeometricLaw(1.2)
    prev = build_table(law, 4, 16).layers[4].copy()
    outs = []
    for name in ("python", "compiled"):
        out = np.empty_like(prev)
        kernels.get_backend(name).forward_layer(prev, law.log_r, law.log_c, out)
        outs.append(out)
    fin = np.isfinite(outs[0])
    ok = np.array_equal(fin, np.isfinite(outs[1])) and np.allclose(outs[0][fin], outs[1][fin], rtol=1e-13, atol=0)
    return bool(ok), None


def run(settings: Settings, names=None):
    """Yield ``{"check", "pass", "detail", "seconds"}`` records."""
    for name, fn in CHECKS.items():
        if names and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn(settings)
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        yield {"check": name, "pass": bool(ok), "detail": detail, "seconds": round(time.perf_counter() - t0, 3)}
