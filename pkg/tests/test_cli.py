import json
import math

import pytest

from ipdsaw.cli import EXIT_BUDGET, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main, parse_grid
from ipdsaw.io import manifest_path, read_csv, read_jsonl


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_critical_point(capsys):
    code, out, _ = run(capsys, "critical-point", "--model", "nu")
    assert code == EXIT_OK
    rep = json.loads(out)[0]
    assert rep["beta_c"] == pytest.approx(1.0007, abs=1e-4)
    assert rep["agree"] and rep["two_route_gap"] <= 1e-10


def test_partition_agreement(capsys):
    code, out, _ = run(capsys, "partition", "--L", "10", "--beta", "1.0", "--model", "u")
    assert code == EXIT_OK
    rep = json.loads(out)[0]
    assert rep["rel_gap"] < 1e-10
    assert math.isfinite(rep["log_z_bruteforce"])


def test_partition_above_cutoff_skips_bruteforce(capsys):
    code, out, _ = run(capsys, "partition", "--L", "30", "--beta", "1.0", "--model", "nu")
    assert code == EXIT_OK
    assert json.loads(out)[0]["log_z_bruteforce"] is None


def test_usage_errors(capsys):
    assert run(capsys, "sample", "--L", "5", "--beta", "1", "--model", "nu")[0] == EXIT_USAGE
    assert run(capsys, "nonsense")[0] == EXIT_USAGE
    assert run(capsys, "partition", "--L", "5", "--beta", "-1")[0] == EXIT_USAGE
    assert run(capsys, "render", "--out", "x.svg")[0] == EXIT_USAGE


def test_budget_refusals(capsys):
    assert run(capsys, "sample", "--L", "400", "--beta", "1", "--model", "nu", "--seed", "0")[0] == EXIT_BUDGET
    assert run(capsys, "--cell-budget", "1000", "gcurve", "--beta", "1")[0] == EXIT_BUDGET


def test_validation_failure_exit_code(capsys, tmp_path):
    cfg = tmp_path / "strict.json"
    cfg.write_text(json.dumps({"critical_two_route": -1.0}))
    assert run(capsys, "--config", str(cfg), "critical-point")[0] == EXIT_VALIDATION


def test_bad_config_is_usage_error(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"no_such_tolerance": 1}))
    assert run(capsys, "--config", str(cfg), "critical-point")[0] == EXIT_USAGE


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest")
    recs = [json.loads(line) for line in out.splitlines()]
    assert code == EXIT_OK
    assert recs[-1]["summary"]["failed"] == 0
    assert all(r["pass"] for r in recs[:-1])
    assert len(recs) > 10


def test_sample_manifest_and_replay(capsys, tmp_path):
    out = tmp_path / "s.jsonl"
    code, _, _ = run(capsys, "sample", "--L", "25", "--beta", "2", "--model", "u", "--seed", "7",
                     "--count", "5", "--with-stretches", "--out", str(out))
    assert code == EXIT_OK
    recs = read_jsonl(out)
    assert len(recs) == 5 and all(r["seed"] == 7 and sum(abs(x) for x in r["stretches"]) + r["N"] == 25
                                  for r in recs)
    man = json.loads(manifest_path(out).read_text())
    assert man["seeds"] == [7] and man["outputs"] == ["s.jsonl"] and man["rng"]
    assert man["tolerances"]["floor"] == 1e-9
    code, text, _ = run(capsys, "replay", str(manifest_path(out)), "--out-dir", str(tmp_path / "re"))
    assert code == EXIT_OK and json.loads(text)["identical"]
    assert (tmp_path / "re" / "s.jsonl").read_bytes() == out.read_bytes()


def test_scan_jobs_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["scan", "--steps", "4", "--beta-min", "0.5", "--beta-max", "2.0", "--N-max", "24", "--K-max", "96"]
    assert run(capsys, *args, "--out", str(a))[0] == EXIT_OK
    assert run(capsys, "--jobs", "2", *args, "--out", str(b))[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert [r["phase"] for r in rows if r["model"] == "nu"] == ["extended", "collapsed", "collapsed", "collapsed"]
    assert list(rows[0]) == ["model", "beta", "L_or_inf", "f", "f_excess", "alpha_star", "phase"]
    assert "np." not in a.read_text()
    code, text, _ = run(capsys, "replay", str(manifest_path(a)))
    assert code == EXIT_OK and json.loads(text)["identical"]


def test_free_energy_with_finite_sizes(capsys, tmp_path):
    out = tmp_path / "f.csv"
    code, _, _ = run(capsys, "free-energy", "--model", "nu", "--beta", "0.6,2.0", "--L", "16,32",
                     "--g-method", "spectral", "--V", "64", "--out", str(out))
    assert code == EXIT_OK
    rows = read_csv(out)
    assert [r["L_or_inf"] for r in rows] == ["16", "32", "inf", "16", "32", "inf"]
    assert all(float(r["f"]) <= float(r["beta"]) for r in rows if r["L_or_inf"] != "inf")


def test_gcurve_csv(capsys, tmp_path):
    out = tmp_path / "g.csv"
    assert run(capsys, "gcurve", "--beta", "1", "--N-max", "16", "--K-max", "64", "--alpha-max", "2",
               "--out", str(out))[0] == EXIT_OK
    rows = read_csv(out)
    assert list(rows[0]) == ["beta", "alpha_num", "alpha_den", "N", "g_N", "g_est", "gap"]
    assert len(rows) == 9


def test_order_refuses_collapsed_estimates(capsys):
    code, _, err = run(capsys, "order", "--model", "nu", "--N-max", "16", "--no-reference")
    assert code == EXIT_VALIDATION and "refused" in err


def test_order_small(capsys):
    code, out, _ = run(capsys, "order", "--model", "nu", "--eps", "0.3,0.4,0.5", "--N-max", "32,64",
                       "--no-reference")
    rep = json.loads(out)[0]
    assert [f["N_max"] for f in rep["fits"]] == [32, 64]
    assert code in (EXIT_OK, EXIT_VALIDATION)
    assert code == (EXIT_OK if rep["in_bracket"] and rep["drift_toward_1.5"] else EXIT_VALIDATION)


def test_render(capsys, tmp_path):
    dump = tmp_path / "s.jsonl"
    run(capsys, "sample", "--L", "16", "--beta", "3", "--model", "nu", "--seed", "1", "--count", "2",
        "--with-stretches", "--out", str(dump))
    svg = tmp_path / "s.svg"
    assert run(capsys, "render", "--samples", str(dump), "--out", str(svg))[0] == EXIT_OK
    assert svg.read_text().startswith("<svg")
    bare = tmp_path / "bare.jsonl"
    run(capsys, "sample", "--L", "16", "--beta", "3", "--model", "nu", "--seed", "1", "--out", str(bare))
    assert run(capsys, "render", "--samples", str(bare), "--out", str(svg))[0] == EXIT_USAGE


def test_cache_dir_checkpoints(capsys, tmp_path, monkeypatch):
    from ipdsaw import walk

    walk.clear_profile_cache()
    cache = tmp_path / "cache"
    out = tmp_path / "g.csv"
    monkeypatch.delenv("IPDSAW_CACHE_DIR", raising=False)
    assert run(capsys, "--cache-dir", str(cache), "gcurve", "--beta", "1.37", "--N-max", "12", "--K-max", "30",
               "--alpha-max", "1", "--out", str(out))[0] == EXIT_OK
    files = list(cache.glob("*.npz"))
    assert len(files) == 1
    man = json.loads(manifest_path(out).read_text())
    assert str(files[0]) in man["checkpoints"]
    walk.clear_profile_cache()
    first = out.read_bytes()
    assert run(capsys, "--cache-dir", str(cache), "gcurve", "--beta", "1.37", "--N-max", "12", "--K-max", "30",
               "--alpha-max", "1", "--out", str(out))[0] == EXIT_OK
    assert out.read_bytes() == first


def test_parse_grid():
    assert parse_grid("0.5,1,2") == [0.5, 1.0, 2.0]
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
