import json
import math

import numpy as np
import pytest

from ipdsaw.lattice import StretchConfig, gibbs_law_bruteforce, hamiltonian
from ipdsaw.sampler import (
    BoltzmannSampler,
    empirical_law,
    exactness_check,
    extension_scaling_experiment,
    sample_path,
    substream,
    total_variation,
    vertical_span,
)
from ipdsaw.walk import TableBudgetError, stretch_to_walk, walk_positions


def test_two_site_law():
    n = 100_000
    s = BoltzmannSampler(2, 1.0, "nu")
    counts = {(0, 0): 0, (1,): 0, (-1,): 0}
    for p in s.sample_many(11, n):
        counts[p.stretches.stretches] += 1
    for key, prob in (((0, 0), 0.25), ((1,), 0.375), ((-1,), 0.375)):
        sigma = math.sqrt(n * prob * (1 - prob))
        assert abs(counts[key] - n * prob) <= 3 * sigma


def test_n_law_matches_bruteforce():
    for L in (3, 6, 9):
        s = BoltzmannSampler(L, 0.8, "u")
        exact = gibbs_law_bruteforce(L, 0.8, "u")
        byN = np.zeros(L)
        for k, p in exact.items():
            byN[len(k) - 1] += p
        np.testing.assert_allclose(s.n_law, byN, atol=1e-12)


def test_determinism():
    a = sample_path(20, 1.1, "nu", seed=5, index=3)
    b = sample_path(20, 1.1, "nu", seed=5, index=3)
    assert a == b
    c = sample_path(20, 1.1, "nu", seed=6, index=3)
    assert a.seed != c.seed


def test_substreams_independent_of_order():
    s = BoltzmannSampler(15, 1.0, "u")
    forward = s.sample_many(9, 20)
    backward = [s.sample(9, i) for i in reversed(range(20))][::-1]
    assert forward == backward
    assert s.sample_many(9, 5, start=10) == forward[10:15]


def test_sample_fields_consistent():
    s = BoltzmannSampler(40, 1.5, "nu")
    for p in s.sample_many(2, 300):
        cfg = p.stretches
        assert cfg.L == 40
        assert p.N == cfg.N
        assert p.touches == hamiltonian(cfg)
        assert p.vspan == vertical_span(cfg)
        pos = walk_positions(stretch_to_walk(cfg))
        assert pos[-1] == 0 and sum(abs(x) for x in pos) == 40 - cfg.N


def test_mean_touches_l10():
    n = 100_000
    exact = gibbs_law_bruteforce(10, 1.0, "nu")
    mean = sum(p * hamiltonian(StretchConfig(k)) for k, p in exact.items())
    second = sum(p * hamiltonian(StretchConfig(k)) ** 2 for k, p in exact.items())
    sd = math.sqrt(second - mean ** 2)
    touches = np.array([p.touches for p in BoltzmannSampler(10, 1.0, "nu").sample_many(21, n)])
    assert abs(touches.mean() - mean) <= 3 * sd / math.sqrt(n)


def test_exactness_goodness_of_fit():
    rep = exactness_check(5, 1.0, "nu", 40_000, seed=4)
    assert rep.chi2_pvalue > 1e-3
    # observed TV sits inside the spread of a perfect sampler
    assert rep.tv <= 2 * rep.tv_null[2]


def test_tv_helpers():
    p = {(0,): 0.5, (1,): 0.5}
    q = {(0,): 1.0}
    assert total_variation(p, q) == pytest.approx(0.5)
    assert total_variation(p, p) == 0.0
    s = BoltzmannSampler(3, 1.0, "u")
    law = empirical_law(s.sample_many(0, 50))
    assert sum(law.values()) == pytest.approx(1.0)


def test_record_json():
    p = sample_path(12, 1.0, "u", seed=1)
    rec = json.loads(p.to_json(with_stretches=True))
    assert rec["stretches"] == list(p.stretches.stretches)
    assert rec["seed"] == 1 and rec["L"] == 12
    assert "stretches" not in p.record()


def test_errors():
    with pytest.raises(ValueError):
        BoltzmannSampler(10, 0.0, "nu")
    with pytest.raises(TableBudgetError):
        BoltzmannSampler(300, 1.0, "nu")
    with pytest.raises(ValueError):
        BoltzmannSampler(0, 1.0, "nu")


def test_substream_is_philox():
    g = substream(1, 2)
    assert isinstance(g.bit_generator, np.random.Philox)
    assert substream(1, 2).random() == substream(1, 2).random()
    assert substream(1, 2).random() != substream(1, 3).random()


def test_scaling_report_small():
    rep = extension_scaling_experiment("nu", 0.5, [16, 36, 64], 200, seed=3)
    assert len(rep.mean_N) == 3
    assert all(abs(m - e) < 6 * s for m, e, s in zip(rep.mean_N, rep.exact_mean_N, rep.stderr_N))
    assert 0.5 < rep.exact_exponent < 1.2
