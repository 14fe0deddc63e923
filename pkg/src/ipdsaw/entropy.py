"""Entropic cost ``g_beta(alpha)`` of forcing the walk to area ``alpha * N`` and back to 0.

Two estimators are provided; both are lower bounds on ``g_beta``.

* Finite N (``g_finite``, ``g_estimate``, :class:`DPEntropy`): by
  superadditivity ``g = sup_N (1/N) log P(V_N = 0, A_N = alpha N)``, so every
  table entry bounds ``g`` from below. Convergence in ``N`` is slow (roughly
  ``1/N`` with an ``alpha``-dependent constant) and is reported as a gap,
  never as an error bar.
* Spectral (:class:`SpectralEntropy`): ``g`` is concave, so it is the
  Legendre dual of ``Lambda(lam) = lim (1/N) log E[exp(-lam A_N); V_N = 0]``,
  the log of the top eigenvalue of the tilted transfer operator. Truncating
  the operator to ``|v| <= V`` can only lower that eigenvalue, so the dual of
  the truncated ``Lambda`` is again a lower bound on ``g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.linalg import eigh
from scipy.special import logsumexp

from .walk import ReturnProfile, get_profile, log_c_beta


class NotConvergedError(RuntimeError):
    """An estimate is too far from converged for the requested use."""


def as_fraction(alpha) -> Fraction:
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, float):
        return Fraction(alpha).limit_denominator(1 << 20)
    return Fraction(alpha)


def _profile(beta, N, K, profile, cell_budget=None):
    if profile is not None and profile.covers(N, K):
        return profile
    return get_profile(beta, N, K, cell_budget)


def admissible(alpha, N_max: int, K_max: int | None = None) -> list[int]:
    """``N`` in ``[2, N_max]`` with ``alpha * N`` an integer (and ``<= K_max``)."""
    alpha = as_fraction(alpha)
    step = alpha.denominator
    start = step * max(1, -(-2 // step))
    Ns = range(start, N_max + 1, step)
    if K_max is None:
        return list(Ns)
    return [N for N in Ns if alpha * N <= K_max]


def g_finite(beta: float, N: int, alpha, profile: ReturnProfile | None = None) -> float:
    """``(1/N) log P(V_N = 0, A_N = alpha N)``."""
    alpha = as_fraction(alpha)
    if N < 2:
        raise ValueError("N must be >= 2")
    k = alpha * N
    if k.denominator != 1 or k < 0:
        raise ValueError(f"alpha * N = {k} is not a nonnegative integer")
    k = int(k)
    prof = _profile(beta, N, k, profile)
    return float(prof.logp0[N, k]) / N


def g_estimate(beta: float, alpha, N_max: int, profile: ReturnProfile | None = None):
    """Best finite-N lower bound on ``g_beta(alpha)`` and its convergence gap.

    Returns ``(value, gap, N_best)``. ``gap`` is ``value`` minus the value at
    the largest admissible ``N <= N_top / 2`` (``inf`` when there is none),
    where ``N_top`` is the largest admissible ``N <= N_max``.
    """
    alpha = as_fraction(alpha)
    K_cap = profile.K_max if profile is not None else None
    Ns = admissible(alpha, N_max, K_cap)
    if not Ns:
        raise ValueError(f"no admissible N <= {N_max} for alpha = {alpha}")
    prof = _profile(beta, Ns[-1], int(alpha * Ns[-1]), profile)
    vals = {N: float(prof.logp0[N, int(alpha * N)]) / N for N in Ns}
    N_best = max(vals, key=lambda n: (vals[n], -n))
    value = vals[N_best]
    halves = [N for N in Ns if 2 * N <= Ns[-1]]
    gap = value - vals[halves[-1]] if halves else math.inf
    return value, gap, N_best


def g_area_leq(beta: float, N: int, alpha, profile: ReturnProfile | None = None) -> float:
    """``(1/N) log P(A_N <= alpha N, V_N = 0)``; ``alpha * N`` need not be integral."""
    if N < 2:
        raise ValueError("N must be >= 2")
    kmax = math.floor(as_fraction(alpha) * N)
    if kmax < 0:
        raise ValueError("alpha must be >= 0")
    prof = _profile(beta, N, kmax, profile)
    return float(logsumexp(prof.logp0[N, : kmax + 1])) / N


# --- concave lower envelopes ------------------------------------------------

def _monotone_concave_envelope(x, y):
    """Smallest concave nondecreasing function above the points, as hull vertices."""
    order = np.lexsort((-y, x))
    x, y = x[order], y[order]
    first = np.ones(len(x), dtype=bool)
    first[1:] = x[1:] != x[:-1]
    x, y = x[first], y[first]
    # points below an earlier maximum are dominated by the flat extension
    prior = np.maximum.accumulate(np.concatenate([[-np.inf], y[:-1]]))
    keep = y > prior
    x, y = x[keep], y[keep]
    hx, hy = [], []
    for xi, yi in zip(x.tolist(), y.tolist()):
        while len(hx) >= 2 and (hy[-1] - hy[-2]) * (xi - hx[-2]) <= (yi - hy[-2]) * (hx[-1] - hx[-2]):
            hx.pop()
            hy.pop()
        hx.append(xi)
        hy.append(yi)
    return np.array(hx), np.array(hy)


class _Envelope:
    hx: np.ndarray
    hy: np.ndarray

    def __call__(self, x):
        """Lower bound on ``g_beta`` at ``x >= 0`` (vectorised)."""
        return np.interp(x, self.hx, self.hy)

    def bracket(self, x: float) -> tuple[float, float]:
        """Envelope vertices on either side of ``x`` (equal when ``x`` is a vertex)."""
        i = int(np.searchsorted(self.hx, x))
        if i < len(self.hx) and self.hx[i] == x:
            return float(x), float(x)
        if i == 0:
            return float(self.hx[0]), float(self.hx[0])
        if i == len(self.hx):
            return float(self.hx[-1]), math.inf
        return float(self.hx[i - 1]), float(self.hx[i])

    @property
    def sup(self) -> float:
        return float(self.hy[-1])


class DPEntropy(_Envelope):
    """Concave nondecreasing envelope of every finite-N table value.

    ``g_beta`` is concave, nondecreasing and lies above each point
    ``(k/N, (1/N) log P(V_N = 0, A_N = k))``, so it lies above this envelope.
    """

    method = "dp"

    def __init__(self, profile: ReturnProfile, N_min: int = 2):
        self.profile = profile
        self.beta = profile.beta
        self.N_max = profile.N_max
        self.K_max = profile.K_max
        Ns = np.arange(N_min, profile.N_max + 1)
        ks = np.arange(profile.K_max + 1)
        x = (ks[None, :] / Ns[:, None]).ravel()
        y = (profile.logp0[Ns, :] / Ns[:, None]).ravel()
        finite = np.isfinite(y)
        self.hx, self.hy = _monotone_concave_envelope(x[finite], y[finite])

    @classmethod
    def for_beta(cls, beta, N_max, K_max, cell_budget=None):
        return cls(get_profile(beta, N_max, K_max, cell_budget).truncate(N_max, K_max))

    def describe(self) -> dict:
        return {"method": self.method, "N_max": self.N_max, "K_max": self.K_max}


def _even_transfer_base(beta: float, V: int) -> np.ndarray:
    """Increment kernel restricted to even functions on ``|v| <= V`` (orthonormal basis)."""
    r = math.exp(-beta / 2)
    log_c = log_c_beta(beta)
    h = np.arange(V + 1)
    same = np.exp(np.abs(h[:, None] - h[None, :]) * math.log(r) - log_c)
    mirror = np.exp((h[:, None] + h[None, :]) * math.log(r) - log_c)
    mirror[:, 0] = 0.0
    base = same + mirror
    scale = np.ones(V + 1)
    scale[0] = 1 / math.sqrt(2)
    base = base * scale[:, None] / scale[None, :]
    return (base + base.T) / 2


def tilted_log_eigenvalue(beta: float, lam: float, V: int, base: np.ndarray | None = None):
    """``(Lambda_V(lam), mean |V| under the tilted ground state)``."""
    if base is None:
        base = _even_transfer_base(beta, V)
    w = np.exp(-lam * np.arange(V + 1) / 2)
    vals, vecs = eigh(w[:, None] * base * w[None, :], subset_by_index=[V, V])
    psi = vecs[:, 0]
    return math.log(vals[0]), float(np.dot(np.arange(V + 1), psi * psi))


@dataclass
class SpectralEntropy(_Envelope):
    """Lower bound on ``g_beta`` from the truncated tilted transfer operator.

    Each ``lam`` on a log grid gives an exact point
    ``(m, Lambda_V(lam) + lam * m)`` of the concave dual ``g_V <= g_beta``, with
    ``m = -Lambda_V'(lam)`` the tilted mean of ``|V|``. Chords of a concave
    function lie below it, so the piecewise-linear interpolation (flat past
    the last point) is still a lower bound.
    """

    beta: float
    V: int = 256
    lam_min: float = 1e-9
    lam_max: float = 60.0
    n_lam: int = 320
    hx: np.ndarray = field(init=False, repr=False)
    hy: np.ndarray = field(init=False, repr=False)

    method = "spectral"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        base = _even_transfer_base(self.beta, self.V)
        xs, ys = [0.0], [-log_c_beta(self.beta)]
        for lam in np.geomspace(self.lam_max, self.lam_min, self.n_lam):
            lam_v, m = tilted_log_eigenvalue(self.beta, float(lam), self.V, base)
            xs.append(m)
            ys.append(lam_v + lam * m)
        self.hx, self.hy = _monotone_concave_envelope(np.array(xs), np.array(ys))

    def describe(self) -> dict:
        return {"method": self.method, "V": self.V, "lam_min": self.lam_min, "n_lam": self.n_lam}


def g_spectral(beta: float, alpha, V: int = 256) -> tuple[float, float]:
    """Spectral lower bound on ``g_beta(alpha)`` and the truncation gap (V vs V/2)."""
    x = float(alpha)
    full = SpectralEntropy(beta, V)(x)
    half = SpectralEntropy(beta, V // 2)(x)
    return float(full), float(full - half)


# --- curves and fits --------------------------------------------------------

@dataclass
class EntropyPoint:
    alpha: Fraction
    N: int
    g_N: float
    g_est: float
    gap: float


@dataclass
class EntropyCurve:
    beta: float
    N_max: int
    K_max: int
    points: list[EntropyPoint]

    def rows(self):
        for p in self.points:
            yield {"beta": self.beta, "alpha_num": p.alpha.numerator, "alpha_den": p.alpha.denominator,
                   "N": p.N, "g_N": p.g_N, "g_est": p.g_est, "gap": p.gap}


CURVE_COLUMNS = ("beta", "alpha_num", "alpha_den", "N", "g_N", "g_est", "gap")


def dyadic_grid(alpha_max, denominator: int = 4) -> list[Fraction]:
    top = as_fraction(alpha_max) * denominator
    return [Fraction(i, denominator) for i in range(int(top) + 1)]


def entropy_curve(beta: float, alphas, N_max: int, K_max: int | None = None,
                  cell_budget: int | None = None) -> EntropyCurve:
    """``g_N`` at the largest admissible ``N`` and ``g_est`` for each alpha.

    ``g_est`` is the concave envelope of the whole table (:class:`DPEntropy`),
    which dominates the raw sup of :func:`g_estimate` and is monotone and
    concave by construction. ``gap`` is the :func:`g_estimate` gap.
    """
    alphas = [as_fraction(a) for a in alphas]
    if K_max is None:
        K_max = int(max(alphas) * N_max)
    prof = get_profile(beta, N_max, K_max, cell_budget).truncate(N_max, K_max)
    envelope = DPEntropy(prof)
    points = []
    for a in alphas:
        Ns = admissible(a, N_max, K_max)
        if not Ns:
            raise ValueError(f"no admissible N <= {N_max} for alpha = {a}")
        g_N = g_finite(beta, Ns[-1], a, prof)
        _, gap, _ = g_estimate(beta, a, N_max, prof)
        points.append(EntropyPoint(a, Ns[-1], g_N, float(envelope(float(a))), gap))
    return EntropyCurve(beta, N_max, K_max, points)


@dataclass
class DecayFit:
    beta: float
    exponent: float
    log_prefactor: float
    alphas: list[float]
    values: list[float]
    gaps: list[float]
    method: str
    skipped: list[float]


def asymptotic_decay_fit(beta: float, alphas, method: str = "spectral", N_max: int = 256,
                         V: int = 256, rel_gap: float = 0.1, skip_unconverged: bool = False) -> DecayFit:
    """Fit ``-g_beta(alpha) ~ C alpha^(-p)`` by least squares on log-log scale.

    A point counts as converged when its gap is below ``rel_gap * |value|``.
    Unconverged points raise :class:`NotConvergedError`, or are dropped when
    ``skip_unconverged`` is set (at least two must remain).
    """
    alphas = [as_fraction(a) for a in alphas]
    if any(a < 2 or a > 16 for a in alphas):
        raise ValueError("alpha range must lie in [2, 16]")
    if method == "spectral":
        full = SpectralEntropy(beta, V)
        half = SpectralEntropy(beta, V // 2)
        est = [(float(full(float(a))), float(full(float(a)) - half(float(a)))) for a in alphas]
    elif method == "dp":
        K = int(max(alphas) * N_max)
        prof = get_profile(beta, N_max, K).truncate(N_max, K)
        est = [g_estimate(beta, a, N_max, prof)[:2] for a in alphas]
    else:
        raise ValueError(f"unknown method {method!r}")
    used, skipped = [], []
    for a, (val, gap) in zip(alphas, est):
        if val < 0 and gap < rel_gap * abs(val):
            used.append((float(a), val, gap))
        elif skip_unconverged:
            skipped.append(float(a))
        else:
            raise NotConvergedError(f"g({a}) = {val:.4g} with gap {gap:.3g} is not converged")
    if len(used) < 2:
        raise NotConvergedError(f"only {len(used)} converged points")
    xs = np.log([u[0] for u in used])
    ys = np.log([-u[1] for u in used])
    slope, intercept = np.polyfit(xs, ys, 1)
    return DecayFit(beta, float(-slope), float(intercept), [u[0] for u in used],
                    [u[1] for u in used], [u[2] for u in used], method, skipped)
