"""Partially directed paths, their stretch encoding, and exact enumeration.

A path of length ``L`` takes steps east, north or south, never revisits a
vertex and ends with an east step. It is encoded by its stretch vector
``l = (l_1, ..., l_N)``: stretch ``n`` is a vertical run of signed length
``l_n`` followed by one east step, so ``sum |l_n| + N = L``.
"""

from __future__ import annotations

import enum
import json
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np
from scipy.special import logsumexp

EAST = (1, 0)
NORTH = (0, 1)
SOUTH = (0, -1)

BRUTEFORCE_CUTOFF = 14


class ModelKind(str, enum.Enum):
    """Reference law on paths: uniform or the non-uniform step rule."""

    UNIFORM = "u"
    NON_UNIFORM = "nu"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        aliases = {"u": cls.UNIFORM, "uniform": cls.UNIFORM,
                   "nu": cls.NON_UNIFORM, "non-uniform": cls.NON_UNIFORM,
                   "nonuniform": cls.NON_UNIFORM}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown model {value!r}; expected 'u' or 'nu'") from None

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class StretchConfig:
    stretches: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "stretches", tuple(int(x) for x in self.stretches))
        if not self.stretches:
            raise ValueError("a configuration needs at least one stretch")

    @property
    def N(self) -> int:
        return len(self.stretches)

    @property
    def L(self) -> int:
        return sum(abs(x) for x in self.stretches) + len(self.stretches)

    def to_json(self) -> str:
        return json.dumps({"L": self.L, "stretches": list(self.stretches)})

    @classmethod
    def from_json(cls, text: str) -> "StretchConfig":
        data = json.loads(text)
        cfg = cls(tuple(data["stretches"]))
        if "L" in data and int(data["L"]) != cfg.L:
            raise ValueError(f"declared L={data['L']} but stretches give L={cfg.L}")
        return cfg


@dataclass(frozen=True)
class LatticePath:
    vertices: tuple[tuple[int, int], ...]

    def __post_init__(self):
        verts = tuple((int(x), int(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 2 or verts[0] != (0, 0):
            raise ValueError("path must start at the origin and have at least one step")
        for p, q in zip(verts, verts[1:]):
            if (q[0] - p[0], q[1] - p[1]) not in (EAST, NORTH, SOUTH):
                raise ValueError(f"illegal step {p} -> {q}")
        if len(set(verts)) != len(verts):
            raise ValueError("path is not self-avoiding")

    @property
    def L(self) -> int:
        return len(self.vertices) - 1

    @classmethod
    def from_steps(cls, steps: Sequence[tuple[int, int]]) -> "LatticePath":
        x, y = 0, 0
        verts = [(0, 0)]
        for dx, dy in steps:
            x, y = x + dx, y + dy
            verts.append((x, y))
        return cls(tuple(verts))


def wedge(x: int, y: int) -> int:
    """Overlap of two adjacent stretches: ``min(|x|, |y|)`` when signs differ, else 0."""
    if x * y < 0:
        return min(abs(x), abs(y))
    return 0


def hamiltonian(cfg: StretchConfig) -> int:
    """Number of self-touchings of the path encoded by ``cfg``."""
    l = cfg.stretches
    return sum(wedge(l[i], l[i + 1]) for i in range(len(l) - 1))


def count_self_touchings(path: LatticePath) -> int:
    """Brute-force count of non-consecutive vertex pairs at lattice distance one."""
    index = {p: i for i, p in enumerate(path.vertices)}
    total = 0
    for i, (x, y) in enumerate(path.vertices):
        for q in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            j = index.get(q)
            if j is not None and j > i + 1:
                total += 1
    return total


def path_to_stretches(path: LatticePath) -> StretchConfig:
    verts = path.vertices
    if (verts[-1][0] - verts[-2][0], verts[-1][1] - verts[-2][1]) != EAST:
        raise ValueError("path must end with an east step")
    stretches = []
    run = 0
    for p, q in zip(verts, verts[1:]):
        dy = q[1] - p[1]
        if dy == 0:
            stretches.append(run)
            run = 0
        else:
            run += dy
    return StretchConfig(tuple(stretches))


def stretches_to_path(cfg: StretchConfig) -> LatticePath:
    steps = []
    for l in cfg.stretches:
        steps.extend([NORTH if l > 0 else SOUTH] * abs(l))
        steps.append(EAST)
    return LatticePath.from_steps(steps)


def enumerate_stretches(L: int) -> Iterator[StretchConfig]:
    """Every stretch vector of total length ``L`` (the set Omega_L)."""
    def rec(remaining):
        if remaining == 0:
            yield ()
            return
        for m in range(remaining):
            rest = remaining - m - 1
            for tail in rec(rest):
                if m == 0:
                    yield (0,) + tail
                else:
                    yield (m,) + tail
                    yield (-m,) + tail

    for l in rec(L):
        yield StretchConfig(l)


def enumerate_paths(L: int) -> Iterator[LatticePath]:
    """Every allowed L-step path, by depth-first search on the lattice.

    Independent of the stretch encoding; used as an oracle.
    """
    def rec(verts, seen):
        if len(verts) == L + 1:
            if (verts[-1][0] - verts[-2][0]) == 1:
                yield tuple(verts)
            return
        x, y = verts[-1]
        for dx, dy in (EAST, NORTH, SOUTH):
            q = (x + dx, y + dy)
            if q in seen:
                continue
            verts.append(q)
            seen.add(q)
            yield from rec(verts, seen)
            seen.remove(q)
            verts.pop()

    for verts in rec([(0, 0)], {(0, 0)}):
        yield LatticePath(verts)


@lru_cache(maxsize=None)
def count_paths(L: int) -> int:
    """Exact number of allowed L-step paths.

    DP over the remaining length: a stretch of vertical length ``m`` uses
    ``m + 1`` monomers and comes in 1 (``m = 0``) or 2 orientations.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    ways = [0] * (L + 1)
    ways[0] = 1
    for total in range(1, L + 1):
        acc = ways[total - 1]
        for m in range(1, total):
            acc += 2 * ways[total - m - 1]
        ways[total] = acc
    return ways[L]


def log_count_paths(L: int) -> float:
    return math.log(count_paths(L))


def path_log_weight(cfg: StretchConfig, model) -> float:
    """Log reference probability of the path encoded by ``cfg``."""
    return path_log_weight_nl(cfg.N, cfg.L, model)


def path_weight_exact(cfg: StretchConfig, model) -> Fraction:
    model = ModelKind.parse(model)
    if model is ModelKind.NON_UNIFORM:
        return Fraction(1, 3) ** cfg.N * Fraction(1, 2) ** (cfg.L - cfg.N)
    return Fraction(1, count_paths(cfg.L))


@lru_cache(maxsize=32)
def touch_histogram(L: int) -> dict[tuple[int, int], int]:
    """Counts of configurations by (number of stretches, self-touchings)."""
    return dict(Counter((cfg.N, hamiltonian(cfg)) for cfg in enumerate_stretches(L)))


class CutoffError(ValueError):
    """Raised when an exhaustive enumeration is requested above the cutoff."""


def partition_bruteforce(L: int, beta: float, model, cutoff: int = BRUTEFORCE_CUTOFF) -> float:
    """``log Z`` by summing over every configuration of length ``L``. ``beta >= 0``."""
    model = ModelKind.parse(model)
    if L < 1:
        raise ValueError("L must be >= 1")
    if L > cutoff:
        raise CutoffError(f"L={L} exceeds the brute-force cutoff {cutoff}")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    hist = touch_histogram(L)
    keys = list(hist)
    counts = np.array([hist[k] for k in keys], dtype=np.float64)
    terms = np.log(counts) + beta * np.array([h for _, h in keys], dtype=np.float64)
    terms += np.array([path_log_weight_nl(n, L, model) for n, _ in keys])
    return float(logsumexp(terms))


def path_log_weight_nl(N: int, L: int, model) -> float:
    """Log reference weight shared by every configuration with ``N`` stretches."""
    model = ModelKind.parse(model)
    if model is ModelKind.NON_UNIFORM:
        return N * math.log(1 / 3) + (L - N) * math.log(1 / 2)
    return -log_count_paths(L)


def gibbs_law_bruteforce(L: int, beta: float, model, cutoff: int = BRUTEFORCE_CUTOFF):
    """Exact Gibbs probabilities of every configuration, as ``{stretches: prob}``."""
    model = ModelKind.parse(model)
    if L > cutoff:
        raise CutoffError(f"L={L} exceeds the brute-force cutoff {cutoff}")
    cfgs = list(enumerate_stretches(L))
    logw = np.array([beta * hamiltonian(c) + path_log_weight(c, model) for c in cfgs])
    logw -= logsumexp(logw)
    return {c.stretches: float(p) for c, p in zip(cfgs, np.exp(logw))}


def zigzag(side: int) -> StretchConfig:
    """``side`` stretches of length ``side - 1`` with alternating signs (L = side**2)."""
    return StretchConfig(tuple((side - 1) * (1 if i % 2 == 0 else -1) for i in range(side)))
