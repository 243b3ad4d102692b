import json

import numpy as np
import pytest

from kcache.cli import main
from kcache.dataset import dump_libsvm, from_dense
from kcache.trace import load_trace


@pytest.fixture
def binary_file(tmp_path):
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-2, 0.7, (40, 3)), rng.normal(2, 0.7, (40, 3))])
    p = tmp_path / "bin.txt"
    p.write_text(dump_libsvm(from_dense(X, np.repeat([1.0, -1.0], 40))))
    return p


@pytest.fixture
def multi_file(tmp_path):
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal(c, 0.5, (25, 2)) for c in (-3, 0, 3)])
    p = tmp_path / "multi.txt"
    p.write_text(dump_libsvm(from_dense(X, np.repeat([1.0, 2.0, 3.0], 25))))
    return p


def config_line(out: str) -> dict:
    return json.loads(out.splitlines()[0])


def test_train_predict_round_trip(binary_file, tmp_path, capsys):
    model, trace, stats = tmp_path / "m.txt", tmp_path / "t.csv", tmp_path / "s.json"
    rc = main(["train", "-t", "gaussian", "-g", "0.5", "-c", "10", "-q", "8", "-m", "20", "--cache", "hcst",
               str(binary_file), str(model), "--trace", str(trace), "--stats", str(stats)])
    assert rc == 0
    cfg = config_line(capsys.readouterr().out)
    assert cfg["checkpoint_interval"] == 5 and cfg["policy"] == "hcst" and cfg["workers"] == 1
    doc = json.loads(stats.read_text())
    assert list(doc)[0] == "policy" and doc["capacity"] == 20 and len(doc["stage_hit_ratios"]) == 4
    assert doc["accesses"] == len(load_trace(trace))
    out = tmp_path / "pred.txt"
    assert main(["predict", str(binary_file), str(model), str(out)]) == 0
    assert "accuracy=1.000000 (80/80)" in capsys.readouterr().out
    assert out.read_text().splitlines()[:2] == ["1", "1"]


def test_large_config_checkpoint_interval(binary_file, tmp_path, capsys):
    rc = main(["train", "-t", "gaussian", "-g", "0.5", "-c", "100", "--cache", "hcst", "-m", "5000", "--lambda", "2",
               "-q", "512", str(binary_file), str(tmp_path / "m.txt"), "--trace", str(tmp_path / "t.csv"),
               "--stats", str(tmp_path / "s.json")])
    assert rc == 0
    assert config_line(capsys.readouterr().out)["checkpoint_interval"] == 20


def test_outputs_are_byte_identical(binary_file, tmp_path, capsys):
    outputs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        argv = ["train", "-q", "8", "-m", "16", "--workers", "2", str(binary_file), str(d / "m.txt"),
                "--trace", str(d / "t.csv"), "--stats", str(d / "s.json")]
        assert main(argv) == 0
        outputs.append([(d / f).read_bytes() for f in ("m.txt", "t.csv", "s.json")])
    assert outputs[0] == outputs[1]


def test_workers_env_and_flag_precedence(binary_file, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("KCACHE_WORKERS", "3")
    argv = ["train", "-q", "8", str(binary_file), str(tmp_path / "m.txt")]
    assert main(argv) == 0
    assert config_line(capsys.readouterr().out)["workers"] == 3
    assert main(argv + ["--workers", "2"]) == 0
    assert config_line(capsys.readouterr().out)["workers"] == 2
    monkeypatch.setenv("KCACHE_WORKERS", "zero")
    assert main(argv) == 2


def test_multiclass_train_and_predict(multi_file, tmp_path, capsys):
    model, trace = tmp_path / "m.txt", tmp_path / "t.csv"
    assert main(["train", "-q", "8", "-m", "20", str(multi_file), str(model), "--trace", str(trace)]) == 0
    assert "nr_class 3" in model.read_text()
    t = load_trace(trace)
    assert len(t) > 0
    out = tmp_path / "p.txt"
    assert main(["predict", str(multi_file), str(model), str(out)]) == 0
    assert "accuracy=1.000000" in capsys.readouterr().out


def test_simulate_and_analyze(binary_file, tmp_path, capsys):
    trace = tmp_path / "t.csv"
    assert main(["train", "-q", "8", "-m", "16", str(binary_file), str(tmp_path / "m.txt"), "--trace", str(trace)]) == 0
    capsys.readouterr()
    csv = tmp_path / "cmp.csv"
    assert main(["simulate", "--trace", str(trace), "--cache", "all", "-m", "16", "-o", str(csv)]) == 0
    rows = csv.read_text().splitlines()
    assert rows[0] == "policy,capacity,accesses,hits,hit_ratio,switches"
    assert [r.split(",")[0] for r in rows[1:]] == ["lru", "lfu", "lat", "efu", "hcst", "opt"]
    opt_hits = int(rows[-1].split(",")[3])
    assert all(int(r.split(",")[3]) <= opt_hits for r in rows[1:])
    assert config_line(capsys.readouterr().out)["checkpoint_interval"] == 4

    assert main(["simulate", "--trace", str(trace), "--cache", "efu", "-m", "16"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[1].startswith("efu,16,") and out.splitlines()[2].startswith("opt,16,")

    cdf, diff = tmp_path / "cdf.csv", tmp_path / "diff.csv"
    assert main(["analyze", "--trace", str(trace), "--stages", "4", "-m", "16", "--cdf", str(cdf), "--diff", str(diff)]) == 0
    assert cdf.read_text().splitlines()[0] == "stage,level,cumulative_fraction"
    assert len(cdf.read_text().splitlines()) == 1 + 16
    assert diff.read_text().splitlines()[0] == "difference,count"
    total = sum(int(line.split(",")[1]) for line in diff.read_text().splitlines()[1:])
    assert total == 80 * 3


@pytest.mark.parametrize("kind", ["zipf", "two-phase", "round-robin"])
def test_gen_trace(kind, tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert main(["gen-trace", kind, "-o", str(out), "--items", "200", "--accesses", "500", "-m", "10", "--batch", "4"]) == 0
    load_trace(out)


def test_usage_errors_exit_2(binary_file, tmp_path, capsys):
    assert main([]) == 2
    assert main(["bogus"]) == 2
    assert main(["train", "--nope", str(binary_file), "m"]) == 2
    assert main(["train", "-t", "poly", str(binary_file), "m"]) == 2
    assert main(["train", "--cache", "arc", str(binary_file), str(tmp_path / "m")]) == 2
    assert main(["train", "-q", "7", str(binary_file), str(tmp_path / "m")]) == 2
    assert main(["simulate", "--trace", "t", "--cache", "none"]) == 2
    err = capsys.readouterr().err
    assert "usage" in err


def test_io_errors_exit_1(tmp_path, capsys):
    assert main(["train", str(tmp_path / "missing.txt"), str(tmp_path / "m")]) == 1
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2:1 1:1\n")
    assert main(["train", str(bad), str(tmp_path / "m")]) == 1
    assert "line 1" in capsys.readouterr().err
    assert main(["analyze", "--trace", str(tmp_path / "nope.csv")]) == 1
    tr = tmp_path / "t.csv"
    tr.write_text("garbage\n")
    assert main(["simulate", "--trace", str(tr)]) == 1
