"""Every tolerance and default grid used by the CLI and the acceptance suite.

Override any field with a JSON object passed through ``--config``; unknown
keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Settings:
    # two-route agreement of log Z (representation vs exhaustive sum)
    representation_tol: float = 1e-10
    # exhaustive enumeration refuses L above this
    bruteforce_cutoff: int = 14
    # f_excess below this is "collapsed"; up to 10x is "critical-window"
    floor: float = 1e-9
    # |Gamma(beta_c) - 1|
    critical_residual: float = 1e-12
    # Gamma root vs polynomial root
    critical_two_route: float = 1e-10
    # uniform alpha points before golden-section refinement
    alpha_grid: int = 512
    # a g estimate is converged when gap < g_rel_gap * |g|
    g_rel_gap: float = 0.1
    # finite-N entropy tables
    N_max: int = 64
    K_max: int = 512
    # truncation |v| <= V of the spectral entropy estimator
    spectral_V: int = 256
    # DP table size guard, in float64 cells
    cell_budget: int = 2_000_000_000
    # largest L the sampler builds a full table for
    sampler_max_L: int = 256
    order_bracket: tuple = (1.3, 1.7)
    order_eps: tuple = (0.1, 0.15, 0.2, 0.3, 0.4)
    order_N_max: tuple = (64, 128, 256)
    decay_bracket: tuple = (1.5, 2.5)
    decay_alphas: tuple = (3, 4, 6, 8)
    tv_threshold: float = 0.01
    tv_samples: int = 100_000
    extended_bracket: tuple = (0.85, 1.05)
    collapsed_bracket: tuple = (0.35, 0.65)
    critical_bracket: tuple = (0.5, 0.85)

    def as_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


DEFAULTS = Settings()


def load_settings(path=None, **overrides) -> Settings:
    data = {}
    if path is not None:
        with open(path) as fh:
            data = json.load(fh)
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name: f for f in fields(Settings)}
    unknown = set(data) - set(known)
    if unknown:
        raise ValueError(f"unknown settings: {sorted(unknown)}")
    coerced = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return replace(DEFAULTS, **coerced)
