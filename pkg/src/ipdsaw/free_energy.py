"""Free energies, the variational formula, critical points and the transition order.

The excess free energy is

    f_excess(beta) = sup_{a in [0, 1]} a * log Gamma(beta) + a * g_beta((1 - a) / a)

where ``a`` is the horizontal density ``N / L``. With a lower-bound estimate of
``g_beta`` plugged in, the result is a lower bound on ``f_excess``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .entropy import DPEntropy, NotConvergedError, SpectralEntropy
from .lattice import ModelKind
from .walk import log_c_beta, log_gamma, log_gamma_mp, partition_representation

FLOOR = 1e-9
ALPHA_GRID = 512
GOLDEN = (math.sqrt(5) - 1) / 2
BRACKET = (0.1, 5.0)


def collapsed_entropy(model) -> float:
    model = ModelKind.parse(model)
    return math.log(1 + math.sqrt(2)) if model is ModelKind.UNIFORM else math.log(2)


def phi(model, beta: float) -> float:
    """Free energy of the fully collapsed zigzag: ``beta`` minus the collapsed entropy."""
    return beta - collapsed_entropy(model)


def classify(f_excess: float, floor: float = FLOOR) -> str:
    if f_excess < floor:
        return "collapsed"
    if f_excess <= 10 * floor:
        return "critical-window"
    return "extended"


@dataclass
class FreeEnergyPoint:
    model: ModelKind
    beta: float
    L: int | None
    f: float
    f_excess: float
    phase: str | None = None
    alpha_star: float | None = None
    argmax_diameter: float | None = None
    g_bracket: tuple[float, float] | None = None
    g_source: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {"model": str(self.model), "beta": self.beta,
                "L_or_inf": "inf" if self.L is None else self.L, "f": self.f,
                "f_excess": self.f_excess,
                "alpha_star": "" if self.alpha_star is None else self.alpha_star,
                "phase": self.phase or ""}


FREE_ENERGY_COLUMNS = ("model", "beta", "L_or_inf", "f", "f_excess", "alpha_star", "phase")


def finite_size_free_energy(L: int, beta: float, model) -> FreeEnergyPoint:
    model = ModelKind.parse(model)
    f = partition_representation(L, beta, model) / L
    return FreeEnergyPoint(model, beta, L, f, f - phi(model, beta))


def variational_objective(alpha, beta: float, model, g) -> np.ndarray | float:
    """``alpha * log Gamma + alpha * g((1 - alpha) / alpha)``; 0 at ``alpha = 0``.

    ``g`` is any callable lower bound on ``g_beta`` (e.g. :class:`DPEntropy`).
    """
    lg = log_gamma(model, beta)
    a = np.asarray(alpha, dtype=np.float64)
    if np.any((a < 0) | (a > 1)):
        raise ValueError("alpha must lie in [0, 1]")
    safe = np.where(a > 0, a, 1.0)
    val = np.where(a > 0, a * lg + a * g((1 - safe) / safe), 0.0)
    return float(val) if val.ndim == 0 else val


def _golden_max(fun, lo, hi, tol=1e-12, maxiter=200):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(maxiter):
        if b - a < tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
    x = (a + b) / 2
    return x, fun(x)


def default_entropy(beta: float, N_max: int = 64, K_max: int = 512):
    return DPEntropy.for_beta(beta, N_max, K_max)


def excess_free_energy(beta: float, model, g=None, grid: int = ALPHA_GRID,
                       floor: float = FLOOR) -> FreeEnergyPoint:
    """Sup of the variational objective: ``grid`` uniform points plus golden-section refinement.

    The argmax is tie-broken to the smallest alpha; the spread of grid
    points within ``floor`` of the max is recorded as ``argmax_diameter``.
    """
    model = ModelKind.parse(model)
    if not beta > 0:
        raise ValueError("beta must be > 0")
    if g is None:
        g = default_entropy(beta)
    alphas = np.linspace(0.0, 1.0, grid + 1)
    obj = variational_objective(alphas, beta, model, g)
    i = int(np.argmax(obj))
    best_a, best = float(alphas[i]), float(obj[i])
    if i > 0:
        lo, hi = alphas[i - 1], alphas[min(i + 1, grid)]
        a_ref, v_ref = _golden_max(lambda a: variational_objective(a, beta, model, g), lo, hi)
        if v_ref > best:
            best_a, best = float(a_ref), float(v_ref)
    near = alphas[obj >= obj.max() - floor]
    f_excess = max(best, 0.0)
    bracket = None
    if best_a > 0 and hasattr(g, "bracket"):
        bracket = g.bracket((1 - best_a) / best_a)
    src = g.describe() if hasattr(g, "describe") else {}
    return FreeEnergyPoint(model, beta, None, f_excess + phi(model, beta), f_excess, classify(f_excess, floor),
                           best_a, float(near.max() - near.min()), bracket, src)


@dataclass
class CriticalPoint:
    model: ModelKind
    beta_c: float
    residual: float
    beta_c_polynomial: float | None = None


def _bisect(fun, lo, hi, iters=200):
    flo = fun(lo)
    if flo == 0:
        return lo
    if flo * fun(hi) > 0:
        raise AssertionError(f"no sign change on [{lo}, {hi}]")
    for _ in range(iters):
        mid = (lo + hi) / 2
        fm = fun(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def polynomial_critical_point(model) -> float:
    """Critical coupling from the polynomial form of ``Gamma = 1``.

    Non-uniform: ``3x^3 - 3x^2 - 2x - 2 = 0`` with ``x = exp(beta / 2)``.
    Uniform: ``y^3 + y^2 + y - 1 = 0`` with ``y = exp(-beta / 2)``.
    """
    model = ModelKind.parse(model)
    with mpmath.workdps(50):
        if model is ModelKind.NON_UNIFORM:
            x = _bisect(lambda x: 3 * x ** 3 - 3 * x ** 2 - 2 * x - 2, mpmath.mpf(1), mpmath.mpf(3))
            return float(2 * mpmath.log(x))
        y = _bisect(lambda y: y ** 3 + y ** 2 + y - 1, mpmath.mpf(0), mpmath.mpf(1))
        return float(-2 * mpmath.log(y))


def critical_point(model) -> CriticalPoint:
    """Root of ``Gamma^m(beta) = 1`` by bisection on ``[0.1, 5]``, in 50-digit arithmetic."""
    model = ModelKind.parse(model)
    with mpmath.workdps(50):
        root = _bisect(lambda b: log_gamma_mp(model, b), mpmath.mpf(BRACKET[0]), mpmath.mpf(BRACKET[1]))
        beta_c = float(root)
        residual = float(abs(mpmath.exp(log_gamma_mp(model, beta_c)) - 1))
    return CriticalPoint(model, beta_c, residual, polynomial_critical_point(model))


@dataclass
class OrderFit:
    model: ModelKind
    slope: float
    intercept: float
    eps: list[float]
    f_excess: list[float]
    g_source: dict


def transition_order_fit(model, eps_grid, entropy_factory=None, floor: float = FLOOR) -> OrderFit:
    """Slope of ``log f_excess(beta_c - eps)`` against ``log eps``.

    ``entropy_factory(beta)`` returns the ``g`` lower bound used at each
    coupling (default: finite-N envelope at ``N_max = 64``).
    """
    model = ModelKind.parse(model)
    eps = [float(e) for e in eps_grid]
    if any(e < 0.05 or e > 0.5 for e in eps):
        raise ValueError("eps grid must lie in [0.05, 0.5]")
    if entropy_factory is None:
        entropy_factory = default_entropy
    beta_c = critical_point(model).beta_c
    values, src = [], {}
    for e in eps:
        g = entropy_factory(beta_c - e)
        pt = excess_free_energy(beta_c - e, model, g, floor=floor)
        values.append(pt.f_excess)
        src = pt.g_source
    if min(values) < 10 * floor:
        raise NotConvergedError(f"f_excess below {10 * floor:g} on the eps grid: {values}")
    slope, intercept = np.polyfit(np.log(eps), np.log(values), 1)
    return OrderFit(model, float(slope), float(intercept), eps, values, src)


def dp_entropy_factory(N_max: int, K_max: int | None = None):
    K = 8 * N_max if K_max is None else K_max
    return lambda beta: DPEntropy.for_beta(beta, N_max, K)


def spectral_entropy_factory(V: int = 256):
    return lambda beta: SpectralEntropy(beta, V)


def finite_size_bound(L: int, beta: float, model) -> float:
    """Finite-size slack ``(1/L) log(c_beta L / Gamma)`` in the upper bound on ``f_{L-1}``."""
    return (log_c_beta(beta) - log_gamma(model, beta) + math.log(L)) / L
