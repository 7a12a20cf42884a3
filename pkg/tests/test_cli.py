import csv
import io
import json
import os

import numpy as np
import pytest
from scipy.stats import norm

from ensemble_slice import RunConfig
from ensemble_slice.chainio import (export_csv, git_blob_sha1, histogram, read_chain,
                                    write_chain)
from ensemble_slice.cli import compare, export_marginal, format_table, main


def _run(tmp_path, *flags, name="out"):
    out = tmp_path / name
    code = main(["run", "--target", "normal", "--dim", "2", "--walkers", "4",
                 "--iterations", "100", "--out", str(out), *flags])
    return code, out


def test_minimal_run_writes_three_files(tmp_path):
    code, out = _run(tmp_path, "--seed", "3")
    assert code == 0
    assert sorted(os.listdir(out)) == ["chain.bin", "report.json", "summary.csv"]
    header, samples = read_chain(out / "chain.bin")
    assert samples.shape == (100, 4, 2)
    assert header["target-id"] == "normal" and header["seed"] == 3
    doc = json.loads((out / "report.json").read_text())
    assert doc["config"]["n_walkers"] == 4
    assert doc["chain_sha1"] == git_blob_sha1(out / "chain.bin")
    rows = list(csv.DictReader(open(out / "summary.csv")))
    assert rows[0]["status"] == "ok" and rows[0]["chain_sha1"] == doc["chain_sha1"]


def test_too_few_walkers_exit_2(tmp_path, capsys):
    out = tmp_path / "bad"
    code = main(["run", "--target", "normal", "--dim", "2", "--walkers", "3", "--out", str(out)])
    assert code == 2
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["exit_code"] == 2 and "2 x D = 4" in record["message"]
    assert json.loads((out / "error.json").read_text())["error"] == "config"


def test_unknown_target_exit_2(tmp_path, capsys):
    assert main(["run", "--target", "banana", "--out", str(tmp_path / "x")]) == 2
    assert "banana" in capsys.readouterr().err


def test_bad_flag_value_exit_2(tmp_path):
    assert main(["run", "--walkers", "many"]) == 2
    assert main(["run", "--target", "normal", "--burn-in", "1.5"]) == 2


def test_sampler_failure_exit_3(tmp_path, capsys):
    # with a single allowed expansion the slice soon fails to be bracketed
    code = main(["run", "--target", "normal", "--dim", "1", "--walkers", "4",
                 "--iterations", "200", "--max-expansions", "1", "--init", "normal",
                 "--out", str(tmp_path / "f"), "--seed", "2"])
    assert code == 3
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "sampler" and "unbounded slice" in record["message"]
    assert (tmp_path / "f" / "chain.bin").exists()


def test_io_failure_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = main(["run", "--target", "normal", "--dim", "2", "--iterations", "10",
                 "--out", str(blocker / "sub")])
    assert code == 4


def test_rerun_is_byte_identical(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"target": "correlated_normal", "target_params": {"dim": 3},
                               "n_walkers": 6, "n_iterations": 80, "seed": 21}))
    a = main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    b = main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--workers", "2"])
    assert a == b == 0
    assert (tmp_path / "a" / "chain.bin").read_bytes() == (tmp_path / "b" / "chain.bin").read_bytes()


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"target": "normal", "n_walkers": 4, "n_iterations": 30}))
    assert main(["run", "--config", str(cfg), "--iterations", "20", "--alpha", "0.5",
                 "--target", "ar1", "--dim", "2", "--out", str(tmp_path / "o")]) == 0
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    assert doc["config"]["n_iterations"] == 20
    assert doc["config"]["target_params"] == {"dim": 2, "alpha": 0.5}


def test_baseline_run_via_cli(tmp_path):
    code, out = _run(tmp_path, "--sampler", "metropolis", "--chains", "4", "--budget", "2000")
    assert code == 0
    header, _ = read_chain(out / "chain.bin")
    assert header["move"] == "metropolis"


def test_marginal_export(tmp_path):
    code, out = _run(tmp_path, "--seed", "5")
    assert code == 0
    dest = tmp_path / "hist.csv"
    assert main(["marginal", str(out / "chain.bin"), "--bins", "10", "--out", str(dest)]) == 0
    rows = list(csv.DictReader(open(dest)))
    assert len(rows) == 10
    assert sum(float(r["mass"]) for r in rows) == pytest.approx(1.0)
    assert main(["marginal", str(out / "chain.bin"), "--parameter", "2",
                 "--out", str(dest)]) == 2
    with pytest.raises(IndexError):
        export_marginal(out / "chain.bin", parameter=5)


def test_histogram_examples():
    edges, masses = histogram(np.full(100, 3.0), 7)
    assert np.count_nonzero(masses) == 1 and masses.sum() == 1.0
    assert edges[0] <= 3.0 <= edges[-1]
    _, masses = histogram(np.random.default_rng(0).standard_normal(1000), 20)
    assert masses.sum() == pytest.approx(1.0, abs=1e-12)


def test_normal_chain_histogram_matches_cdf(tmp_path):
    x = np.random.default_rng(1).standard_normal(10**5).reshape(-1, 1, 1)
    path = tmp_path / "c.bin"
    write_chain(path, x, seed=0, move="differential", target_id="normal")
    edges, masses = export_marginal(path, 0, 50, burn_in=0.0, value_range=(-4, 4))
    cells = np.diff(norm.cdf(edges))
    cells /= cells.sum()
    assert 0.5 * np.abs(masses - cells).sum() < 0.02


def test_chain_file_layout(tmp_path):
    x = np.arange(24, dtype=float).reshape(2, 3, 4)
    path = tmp_path / "c.bin"
    write_chain(path, x, seed=1, move="global", target_id="ring", mu_final=0.5)
    raw = path.read_bytes()
    header = json.loads(raw.split(b"\n", 1)[0])
    assert {"version", "dim", "n_walkers", "n_iterations", "seed", "move", "target-id",
            "mu_final"} <= set(header)
    body = np.frombuffer(raw.split(b"\n", 1)[1], dtype="<f8")
    assert np.array_equal(body, np.arange(24.0))
    csv_path = tmp_path / "c.csv"
    export_csv(x, csv_path)
    rows = list(csv.reader(open(csv_path)))
    assert rows[0] == ["iteration", "walker", "x_0", "x_1", "x_2", "x_3"]
    assert rows[2][:3] == ["0", "1", "4.0"]
    path.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_chain(path)


def test_compare_identical_configs_agree():
    cfg = RunConfig(target="normal", target_params={"dim": 2}, n_walkers=8,
                    n_iterations=3000, seed=4)
    rows = compare([cfg, RunConfig(**{**cfg.to_dict(), "seed": 5})])
    a, b = rows[0]["iat_mean"], rows[1]["iat_mean"]
    assert abs(a - b) / max(a, b) < 0.2
    for r in rows:
        assert r["efficiency"] == pytest.approx(r["n_eff"] / r["n_evaluations"])


def test_compare_shares_budget_and_marks_failures(tmp_path):
    ess = RunConfig(target="normal", target_params={"dim": 2}, n_walkers=4, n_iterations=300,
                    seed=1)
    met = RunConfig(target="normal", target_params={"dim": 2}, sampler="metropolis",
                    n_chains=4, proposal_scale=1.0, seed=1)
    bad = RunConfig(target="banana", sampler="stretch")
    stream = io.StringIO()
    rows = compare([met, bad, ess], out=str(tmp_path), stream=stream)
    assert rows[1]["status"] == "failed" and "banana" in rows[1]["message"]
    assert rows[0]["status"] == "ok"
    assert rows[0]["n_evaluations"] == pytest.approx(rows[2]["n_evaluations"], rel=0.1)
    assert "failed" in stream.getvalue()
    assert len(list(csv.DictReader(open(tmp_path / "comparison.csv")))) == 3


def test_compare_empty_list(tmp_path, capsys):
    assert compare([]) == []
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"runs": []}))
    assert main(["compare", "--config", str(cfg)]) == 0
    assert "IAT" in capsys.readouterr().out
    assert format_table([]).startswith("run")
