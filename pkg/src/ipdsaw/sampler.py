"""Exact Boltzmann sampling of paths by running the walk representation backwards.

A sample is drawn in two stages: the number of stretches ``N`` with
probability proportional to ``Gamma^N P(V_{N+1} = 0, A_{N+1} = L - N)``, then
the walk conditioned on that event, one step at a time from the end, with
transition weights read off the forward table. No rejection is involved.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp
from scipy.stats import chisquare

from . import kernels
from .lattice import ModelKind, StretchConfig, gibbs_law_bruteforce, hamiltonian
from .walk import GeometricLaw, TableBudgetError, build_table, log_gamma, positions_to_stretches

RNG_ALGORITHM = "numpy.random.Philox keyed by SeedSequence([*salt, seed, index])"
DEFAULT_MAX_L = 256


@dataclass(frozen=True)
class PathSample:
    model: ModelKind
    beta: float
    L: int
    stretches: StretchConfig
    N: int
    touches: int
    vspan: int
    seed: int
    index: int = 0

    def record(self, with_stretches: bool = False) -> dict:
        rec = {"model": str(self.model), "beta": self.beta, "L": self.L, "N": self.N,
               "touches": self.touches, "vspan": self.vspan, "seed": self.seed, "index": self.index}
        if with_stretches:
            rec["stretches"] = list(self.stretches.stretches)
        return rec

    def to_json(self, with_stretches: bool = False) -> str:
        return json.dumps(self.record(with_stretches), sort_keys=True)


def vertical_span(cfg: StretchConfig) -> int:
    heights = np.concatenate([[0], np.cumsum(cfg.stretches)])
    return int(heights.max() - heights.min())


def substream(seed, index: int, salt=()) -> np.random.Generator:
    """Independent generator for sample ``index`` of run ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([*salt, seed, index])))


class BoltzmannSampler:
    """Exact sampler for fixed ``(L, beta, model)``; holds the forward table."""

    def __init__(self, L: int, beta: float, model, max_L: int = DEFAULT_MAX_L,
                 cell_budget: int | None = None):
        if not beta > 0:
            raise ValueError("beta must be > 0")
        if L < 1:
            raise ValueError("L must be >= 1")
        if L > max_L:
            raise TableBudgetError(f"L={L} exceeds the sampler cap {max_L}")
        self.L, self.beta, self.model = L, beta, ModelKind.parse(model)
        self.law = GeometricLaw(beta)
        self.table = build_table(self.law, L + 1, L - 1, cell_budget)
        Ns = np.arange(1, L + 1)
        logw = Ns * log_gamma(self.model, beta) + self.table.layers[Ns + 1, 0, L - Ns]
        self.log_weights = logw - logsumexp(logw)
        self.n_cdf = np.cumsum(np.exp(self.log_weights))

    @property
    def n_law(self) -> np.ndarray:
        """Exact Gibbs law of the number of stretches, indexed by ``N - 1``."""
        return np.exp(self.log_weights)

    def mean_extension(self) -> float:
        return float(np.dot(np.arange(1, self.L + 1), self.n_law))

    def draw_stretches(self, rng: np.random.Generator) -> StretchConfig:
        L = self.L
        N = int(np.searchsorted(self.n_cdf, rng.random() * self.n_cdf[-1], side="right")) + 1
        N = min(N, L)
        walk = kernels.backward_walk(self.table.layers, self.law.log_r, N + 1, L - N, rng.random(N + 1))
        if walk[0] != 0 or walk[-1] != 0 or int(np.abs(walk).sum()) != L - N:
            raise AssertionError(f"sampled walk left the constrained event: {walk}")
        return positions_to_stretches(walk)

    def sample(self, seed: int, index: int = 0, salt=()) -> PathSample:
        cfg = self.draw_stretches(substream(seed, index, salt))
        touches = hamiltonian(cfg)
        return PathSample(self.model, self.beta, self.L, cfg, cfg.N, touches, vertical_span(cfg), seed, index)

    def sample_many(self, seed: int, count: int, start: int = 0, salt=()) -> list[PathSample]:
        return [self.sample(seed, i, salt) for i in range(start, start + count)]


@lru_cache(maxsize=8)
def get_sampler(L: int, beta: float, model, max_L: int = DEFAULT_MAX_L) -> BoltzmannSampler:
    return BoltzmannSampler(L, beta, ModelKind.parse(model), max_L)


def sample_path(L: int, beta: float, model, seed: int, index: int = 0) -> PathSample:
    return get_sampler(L, beta, ModelKind.parse(model)).sample(seed, index)


@dataclass
class ScalingReport:
    model: ModelKind
    beta: float
    L: list[int]
    mean_N: list[float]
    stderr_N: list[float]
    exact_mean_N: list[float]
    exponent: float
    exact_exponent: float
    samples_per_L: int
    seed: int

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["model"] = str(self.model)
        return d


def extension_scaling_experiment(model, beta: float, L_list, samples_per_L: int, seed: int) -> ScalingReport:
    """Mean horizontal extension against ``L`` and its log-log slope.

    Sample ``i`` at size ``L`` uses the substream ``(L, seed, i)``. The exact
    mean from the stretch-count law is reported alongside.
    """
    model = ModelKind.parse(model)
    means, errs, exact = [], [], []
    for L in L_list:
        sampler = BoltzmannSampler(L, beta, model)
        Ns = np.array([s.N for s in sampler.sample_many(seed, samples_per_L, salt=(L,))], dtype=np.float64)
        means.append(float(np.mean(Ns)))
        errs.append(float(np.std(Ns, ddof=1) / math.sqrt(len(Ns))) if len(Ns) > 1 else math.inf)
        exact.append(sampler.mean_extension())
    logL = np.log(np.asarray(L_list, dtype=np.float64))
    slope = float(np.polyfit(logL, np.log(means), 1)[0])
    exact_slope = float(np.polyfit(logL, np.log(exact), 1)[0])
    return ScalingReport(model, beta, list(L_list), means, errs, exact, slope, exact_slope, samples_per_L, seed)


def empirical_law(samples) -> dict[tuple[int, ...], float]:
    counts = Counter(s.stretches.stretches for s in samples)
    n = sum(counts.values())
    return {k: v / n for k, v in counts.items()}


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


@dataclass
class ExactnessReport:
    """Sampler output against an exact law.

    ``tv_null`` holds quantiles (5%, 50%, 95%) of the TV distance that a
    perfect sampler would show at the same sample size, from multinomial
    draws of the exact law.
    """

    L: int
    beta: float
    model: ModelKind
    n_samples: int
    seed: int
    tv: float
    chi2: float
    chi2_dof: int
    chi2_pvalue: float
    tv_null: tuple[float, float, float]
    tv_null_mean: float

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["model"] = str(self.model)
        d["tv_null"] = list(self.tv_null)
        return d


def exactness_check(L: int, beta: float, model, n_samples: int, seed: int,
                    exact: dict | None = None, null_draws: int = 200) -> ExactnessReport:
    """TV distance and chi-square goodness of fit of ``n_samples`` draws against ``exact``.

    ``exact`` defaults to the brute-force Gibbs law. Cells with expected
    count below 5 are pooled for the chi-square statistic.
    """
    model = ModelKind.parse(model)
    if exact is None:
        exact = gibbs_law_bruteforce(L, beta, model)
    sampler = BoltzmannSampler(L, beta, model)
    emp = empirical_law(sampler.sample_many(seed, n_samples))
    keys = sorted(exact)
    probs = np.array([exact[k] for k in keys])
    observed = np.array([emp.get(k, 0.0) for k in keys]) * n_samples
    expected = probs * n_samples
    small = expected < 5
    if small.any():
        observed = np.append(observed[~small], observed[small].sum())
        expected = np.append(expected[~small], expected[small].sum())
    res = chisquare(np.rint(observed), expected)
    null = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, n_samples, 0xC0FFEE])))
    tvs = 0.5 * np.abs(null.multinomial(n_samples, probs, size=null_draws) / n_samples - probs).sum(axis=1)
    q = np.quantile(tvs, [0.05, 0.5, 0.95])
    return ExactnessReport(L, beta, model, n_samples, seed, total_variation(emp, exact), float(res.statistic),
                           len(expected) - 1, float(res.pvalue), tuple(float(x) for x in q), float(tvs.mean()))
