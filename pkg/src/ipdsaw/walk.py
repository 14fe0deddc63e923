"""Auxiliary random walk with two-sided geometric increments.

A path with stretches ``l_1..l_N`` maps to the walk ``V_n = (-1)^(n-1) l_n``
(``V_0 = V_{N+1} = 0``). Under the increment law ``P(v = k) = r^|k| / c``
with ``r = exp(-beta / 2)``, the Boltzmann weight of the path factorises, and

    Z = c * Phi * sum_{N=1}^{L} Gamma^N * P(V_{N+1} = 0, A_{N+1} = L - N)

where ``A_n = |V_1| + ... + |V_n|``. The tables here hold
``log P(V_n = v, A_n = a)`` for the pair process, computed by forward DP.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np
from scipy.special import logsumexp

from . import kernels
from .lattice import ModelKind, StretchConfig, log_count_paths

TABLE_FORMAT = "ipdsaw-walk-table"
TABLE_VERSION = 1
DEFAULT_CELL_BUDGET = 2_000_000_000

NEG_INF = -np.inf


class TableBudgetError(MemoryError):
    """A requested DP table exceeds the configured cell budget."""


def _check_beta(beta):
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta!r}")


def log_c_beta(beta: float) -> float:
    _check_beta(beta)
    r = math.exp(-beta / 2)
    return math.log1p(r) - math.log1p(-r)


@dataclass(frozen=True)
class GeometricLaw:
    beta: float
    c_beta: float = field(init=False)
    log_c: float = field(init=False)
    log_r: float = field(init=False)

    def __post_init__(self):
        _check_beta(self.beta)
        object.__setattr__(self, "log_r", -self.beta / 2)
        object.__setattr__(self, "log_c", log_c_beta(self.beta))
        object.__setattr__(self, "c_beta", math.exp(self.log_c))

    def tail_mass(self, k_max: int) -> float:
        """Probability that one increment has ``|v| > k_max`` (exact geometric tail)."""
        r = math.exp(self.log_r)
        return 2 * r ** (k_max + 1) / ((1 - r) * self.c_beta)


def increment_log_prob(law: GeometricLaw, k: int) -> float:
    return law.log_r * abs(k) - law.log_c


def stretch_to_walk(cfg: StretchConfig) -> tuple[int, ...]:
    """Increments ``v_n = (-1)^(n-1) (l_{n-1} + l_n)`` for ``n = 1..N+1``."""
    l = (0,) + cfg.stretches + (0,)
    return tuple((1 if n % 2 == 1 else -1) * (l[n - 1] + l[n]) for n in range(1, len(l)))


def walk_positions(increments) -> tuple[int, ...]:
    pos = [0]
    for v in increments:
        pos.append(pos[-1] + v)
    return tuple(pos)


def walk_to_stretches(increments) -> StretchConfig:
    """Inverse of :func:`stretch_to_walk`; the walk must end at 0."""
    pos = walk_positions(increments)
    if pos[-1] != 0 or len(pos) < 3:
        raise ValueError("walk must have at least two steps and return to 0")
    return positions_to_stretches(pos)


def positions_to_stretches(pos) -> StretchConfig:
    """Stretches from ``V_0..V_{N+1}`` via ``l_n = (-1)^(n-1) V_n``."""
    return StretchConfig(tuple((1 if n % 2 == 1 else -1) * pos[n] for n in range(1, len(pos) - 1)))


def cell_budget_default() -> int:
    """``IPDSAW_CELL_BUDGET`` if set, else ``DEFAULT_CELL_BUDGET``."""
    env = os.environ.get("IPDSAW_CELL_BUDGET")
    return int(float(env)) if env else DEFAULT_CELL_BUDGET


def _guard(cells, budget):
    if budget is None:
        budget = cell_budget_default()
    if cells > budget:
        raise TableBudgetError(f"table needs {cells:.3g} cells, budget is {budget:.3g}")


def _profile_cells(N_max, K):
    return 4 * (K + 1) ** 2 + (N_max + 1) * (K + 1)


def _first_layer(K):
    layer = np.full((K + 1, K + 1), NEG_INF)
    layer[0, 0] = 0.0
    return layer


@dataclass(frozen=True, eq=False)
class ConstrainedWalkTable:
    """Full table ``log P(V_n = v, A_n = a)``, stored for ``v >= 0`` only.

    ``layers[n, h, a]`` is the value for ``V_n = h`` (and for ``V_n = -h``).
    """

    beta: float
    N_max: int
    K_max: int
    layers: np.ndarray

    def logp(self, n: int, v: int, a: int) -> float:
        if not (0 <= n <= self.N_max and 0 <= a <= self.K_max):
            raise IndexError(f"(n={n}, a={a}) outside table ({self.N_max}, {self.K_max})")
        if abs(v) > self.K_max:
            return NEG_INF
        return float(self.layers[n, abs(v), a])

    def signed_layer(self, n: int) -> np.ndarray:
        """Layer ``n`` with rows ``v = -K_max..K_max``."""
        half = self.layers[n]
        return np.concatenate([half[:0:-1], half], axis=0)

    @property
    def return_logp(self) -> np.ndarray:
        return self.layers[:, 0, :]

    def profile(self) -> "ReturnProfile":
        return ReturnProfile(self.beta, self.N_max, self.K_max, np.ascontiguousarray(self.return_logp))


@dataclass(frozen=True, eq=False)
class ReturnProfile:
    """``logp0[n, a] = log P(V_n = 0, A_n = a)`` for ``n <= N_max``, ``a <= K_max``."""

    beta: float
    N_max: int
    K_max: int
    logp0: np.ndarray

    def covers(self, N_max: int, K_max: int) -> bool:
        return self.N_max >= N_max and self.K_max >= K_max

    def truncate(self, N_max: int, K_max: int) -> "ReturnProfile":
        """The profile a table of exactly ``(N_max, K_max)`` would produce."""
        if not self.covers(N_max, K_max):
            raise IndexError(f"({N_max}, {K_max}) exceeds profile ({self.N_max}, {self.K_max})")
        if (N_max, K_max) == (self.N_max, self.K_max):
            return self
        return ReturnProfile(self.beta, N_max, K_max, self.logp0[: N_max + 1, : K_max + 1])


def build_table(law: GeometricLaw, N_max: int, K_max: int,
                cell_budget: int | None = None) -> ConstrainedWalkTable:
    if N_max < 1 or K_max < 0:
        raise ValueError("need N_max >= 1 and K_max >= 0")
    K = K_max
    _guard((N_max + 1) * (K + 1) ** 2, cell_budget)
    layers = np.empty((N_max + 1, K + 1, K + 1))
    layers[0] = _first_layer(K)
    for n in range(1, N_max + 1):
        kernels.forward_layer(layers[n - 1], law.log_r, law.log_c, layers[n])
    layers.flags.writeable = False
    return ConstrainedWalkTable(law.beta, N_max, K_max, layers)


def build_return_profile(law: GeometricLaw, N_max: int, K_max: int,
                         cell_budget: int | None = None) -> ReturnProfile:
    """Same recursion as :func:`build_table`, keeping only the ``V_n = 0`` slice."""
    if N_max < 1 or K_max < 0:
        raise ValueError("need N_max >= 1 and K_max >= 0")
    K = K_max
    _guard(_profile_cells(N_max, K), cell_budget)
    out = np.empty((N_max + 1, K + 1))
    cur = _first_layer(K)
    nxt = np.empty_like(cur)
    out[0] = cur[0]
    for n in range(1, N_max + 1):
        kernels.forward_layer(cur, law.log_r, law.log_c, nxt)
        cur, nxt = nxt, cur
        out[n] = cur[0]
    out.flags.writeable = False
    return ReturnProfile(law.beta, N_max, K_max, out)


_PROFILE_CACHE: dict[float, ReturnProfile] = {}
CHECKPOINTS_USED: set[str] = set()


def get_profile(beta: float, N_max: int, K_max: int, cell_budget: int | None = None,
                cache_dir: str | Path | None = None) -> ReturnProfile:
    """Cached return profile; a larger cached profile serves smaller requests.

    Entries with ``a <= K`` do not depend on the area cap once the cap is
    ``>= K`` (the area only grows), so larger tables answer smaller queries
    exactly. ``cache_dir`` defaults to ``IPDSAW_CACHE_DIR`` when that is set.
    """
    _check_beta(beta)
    if cache_dir is None:
        cache_dir = os.environ.get("IPDSAW_CACHE_DIR") or None
    # refuse on the requested size whatever the cache holds
    _guard(_profile_cells(N_max, K_max), cell_budget)
    hit = _PROFILE_CACHE.get(beta)
    if hit is not None and hit.covers(N_max, K_max):
        return hit
    if hit is not None:
        N_max, K_max = max(N_max, hit.N_max), max(K_max, hit.K_max)
    prof = None
    if cache_dir is not None:
        path = Path(cache_dir) / _checkpoint_name(beta, N_max, K_max)
        if path.exists():
            prof = load_checkpoint(path)
            CHECKPOINTS_USED.add(str(path))
    if prof is None:
        prof = build_return_profile(GeometricLaw(beta), N_max, K_max, cell_budget)
        if cache_dir is not None:
            Path(cache_dir).mkdir(parents=True, exist_ok=True)
            path = save_checkpoint(prof, Path(cache_dir) / _checkpoint_name(beta, N_max, K_max))
            CHECKPOINTS_USED.add(str(path))
    _PROFILE_CACHE[beta] = prof
    return prof


def clear_profile_cache():
    _PROFILE_CACHE.clear()


def constrained_return_prob(table, N: int, k: int) -> float:
    """``log P(V_N = 0, A_N = k)`` from a table or a return profile."""
    if not (0 <= N <= table.N_max and 0 <= k <= table.K_max):
        raise IndexError(f"(N={N}, k={k}) outside table ({table.N_max}, {table.K_max})")
    if isinstance(table, ConstrainedWalkTable):
        return float(table.layers[N, 0, k])
    return float(table.logp0[N, k])


# --- Gamma and Phi ---------------------------------------------------------

def _mp_log_c(beta):
    r = mpmath.exp(-mpmath.mpf(beta) / 2)
    return mpmath.log1p(r) - mpmath.log1p(-r)


def log_gamma_mp(model, beta):
    """``log Gamma^m(beta)`` as an mpmath number (caller sets precision)."""
    model = ModelKind.parse(model)
    beta = mpmath.mpf(beta)
    val = _mp_log_c(beta) - beta
    if model is ModelKind.NON_UNIFORM:
        val += mpmath.log(2) - mpmath.log(3)
    return val


def log_gamma(model, beta: float) -> float:
    _check_beta(beta)
    with mpmath.workdps(40):
        return float(log_gamma_mp(model, beta))


def gamma(model, beta: float) -> float:
    return math.exp(log_gamma(model, beta))


def log_phi(model, beta: float, L: int) -> float:
    model = ModelKind.parse(model)
    if model is ModelKind.NON_UNIFORM:
        return L * (beta - math.log(2))
    return beta * L - log_count_paths(L)


@dataclass(frozen=True)
class GammaPhi:
    model: ModelKind
    beta: float
    L: int
    gamma: float
    log_gamma: float
    log_phi: float


def gamma_phi(model, beta: float, L: int) -> GammaPhi:
    model = ModelKind.parse(model)
    lg = log_gamma(model, beta)
    return GammaPhi(model, beta, L, math.exp(lg), lg, log_phi(model, beta, L))


def representation_terms(L: int, beta: float, model, profile: ReturnProfile | None = None) -> np.ndarray:
    """``log[Gamma^N P(V_{N+1} = 0, A_{N+1} = L - N)]`` for ``N = 1..L`` (index ``N - 1``)."""
    _check_beta(beta)
    if L < 1:
        raise ValueError("L must be >= 1")
    if profile is None or not profile.covers(L + 1, L - 1):
        profile = get_profile(beta, L + 1, L - 1)
    Ns = np.arange(1, L + 1)
    return Ns * log_gamma(model, beta) + profile.logp0[Ns + 1, L - Ns]


def partition_representation(L: int, beta: float, model, profile: ReturnProfile | None = None) -> float:
    """``log Z`` assembled from the walk representation."""
    terms = representation_terms(L, beta, model, profile)
    return log_c_beta(beta) + log_phi(model, beta, L) + float(logsumexp(terms))


# --- checkpoints -----------------------------------------------------------

def _checkpoint_name(beta, N_max, K_max):
    return f"profile_b{beta!r}_N{N_max}_K{K_max}.npz"


def save_checkpoint(table, path):
    """Write a table or profile as ``.npz`` with a JSON header."""
    kind = "full" if isinstance(table, ConstrainedWalkTable) else "return"
    header = {"format": TABLE_FORMAT, "version": TABLE_VERSION, "kind": kind,
              "beta": table.beta, "N_max": table.N_max, "K_max": table.K_max}
    data = table.layers if kind == "full" else table.logp0
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), data=data)
    tmp.replace(path)
    return path


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        data = np.array(z["data"])
    if header.get("format") != TABLE_FORMAT or header.get("version") != TABLE_VERSION:
        raise ValueError(f"{path}: not a version-{TABLE_VERSION} table checkpoint")
    data.flags.writeable = False
    cls = ConstrainedWalkTable if header["kind"] == "full" else ReturnProfile
    return cls(float(header["beta"]), int(header["N_max"]), int(header["K_max"]), data)
