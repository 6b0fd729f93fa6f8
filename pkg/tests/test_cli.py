import json
import subprocess
import sys

import numpy as np
import pytest

from subvec.cli import linear_r2, main
from subvec.graph import planted_partition
from subvec.train import load_model, read_matrix

from conftest import TOY_EDGES, TOY_SUBGRAPHS

QUICK = ["--dim", "16", "--epochs", "2", "--walk-length", "100"]


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    d = tmp_path_factory.mktemp("planted")
    g, blocks = planted_partition(2, 12, 0.6, 0.05, seed=0)
    with open(d / "g.edgelist", "w") as fh:
        g.write_edge_list(fh)
    with open(d / "truth.txt", "w") as fh:
        for v, b in enumerate(blocks):
            fh.write(f"{g.labels[v]} {b}\n")
    return d


def manifest(out):
    with open(str(out) + ".manifest.json") as fh:
        return json.load(fh)


def test_embed_defaults(tmp_path):
    out = tmp_path / "m.txt"
    assert main(["embed", "--graph", str(TOY_EDGES), "--subgraphs", str(TOY_SUBGRAPHS),
                 "--epochs", "1", "--out", str(out)]) == 0
    man = manifest(out)
    assert man["params"]["dim"] == 128 and man["params"]["walk_length"] == 1000
    assert man["seed"] == 0 and man["mode"] == "single-threaded"
    assert set(man["inputs"]) == {str(TOY_EDGES), str(TOY_SUBGRAPHS)}
    assert all(len(h) == 64 for h in man["inputs"].values())
    ids, S = read_matrix(out)
    assert ids == ["g1", "g2", "g3"] and S.shape == (3, 128)


def test_embed_concat_width(tmp_path):
    out = tmp_path / "c.txt"
    assert main(["embed", "--graph", str(TOY_EDGES), "--subgraphs", str(TOY_SUBGRAPHS),
                 "--mode", "dm", "--combiner", "concat", "--window", "3", *QUICK,
                 "--out", str(out)]) == 0
    assert manifest(out)["params"]["output_width"] == 16 * 4
    assert load_model(out).U.shape[1] == 64


def test_embed_ego_and_dump(tmp_path):
    out, walks = tmp_path / "e.txt", tmp_path / "walks.txt"
    assert main(["embed", "--graph", str(TOY_EDGES), "--ego", "--hops", "1", *QUICK,
                 "--dump-walks", str(walks), "--out", str(out)]) == 0
    assert len(walks.read_text().splitlines()) == 11
    assert read_matrix(out)[1].shape == (11, 16)


def test_replay_is_identical(tmp_path):
    out = tmp_path / "a.txt"
    assert main(["embed", "--graph", str(TOY_EDGES), "--subgraphs", str(TOY_SUBGRAPHS),
                 *QUICK, "--seed", "5", "--out", str(out)]) == 0
    again = tmp_path / "b.txt"
    assert main(["replay", str(out) + ".manifest.json", "--out", str(again)]) == 0
    for suffix in ("", ".nodes", ".out"):
        assert (tmp_path / ("a.txt" + suffix)).read_bytes() == \
            (tmp_path / ("b.txt" + suffix)).read_bytes()


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SUBVEC_SEED", "17")
    out = tmp_path / "s.txt"
    assert main(["embed", "--graph", str(TOY_EDGES), "--subgraphs", str(TOY_SUBGRAPHS),
                 *QUICK, "--out", str(out)]) == 0
    man = manifest(out)
    assert man["seed"] == 17 and man["argv"][-2:] == ["--seed", "17"]
    monkeypatch.setenv("SUBVEC_SEED", "abc")
    assert main(["embed", "--graph", str(TOY_EDGES), "--subgraphs", str(TOY_SUBGRAPHS),
                 *QUICK, "--out", str(out)]) == 2


@pytest.mark.parametrize("argv", [
    ["embed", "--graph", "x", "--out", "y"],
    ["embed", "--graph", "x", "--ego", "--combiner", "concat", "--out", "y"],
    ["embed", "--graph", "x", "--ego", "--dim", "0", "--out", "y"],
    ["communities", "--graph", "x", "--k", "1", "--out", "y"],
    ["linkpred", "--graph", "x", "--hide-percent", "100", "--out", "y"],
    ["bogus"],
])
def test_usage_errors(argv):
    assert main(argv) == 2


def test_data_errors(tmp_path):
    out = str(tmp_path / "o")
    assert main(["embed", "--graph", str(tmp_path / "missing"), "--ego", "--out", out]) == 3
    bad = tmp_path / "bad.edgelist"
    bad.write_text("a b\nc\n")
    assert main(["embed", "--graph", str(bad), "--ego", "--out", out]) == 3
    assert main(["replay", str(tmp_path / "nope.json")]) == 3


def test_communities(planted, tmp_path):
    out = tmp_path / "comm.txt"
    assert main(["communities", "--graph", str(planted / "g.edgelist"), "--k", "2",
                 "--truth", str(planted / "truth.txt"), "--hops", "1", "--dim", "32",
                 "--walk-length", "300", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 24 + 3
    assert lines[-1].startswith("f1: ") and float(lines[-1].split()[1]) >= 0.8
    assert {ln.split()[1] for ln in lines[:24]} == {"0", "1"}


def test_linkpred(planted, tmp_path):
    out = tmp_path / "lp.txt"
    assert main(["linkpred", "--graph", str(planted / "g.edgelist"), "--hide-percent", "20",
                 *QUICK, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    value = float(lines[-1].split()[1])
    assert lines[-1].startswith("MAP ") and 0 < value <= 1
    scores = [float(t.rsplit(":", 1)[1]) for t in lines[0].split(": ", 1)[1].split()]
    assert scores == sorted(scores, reverse=True)
    assert manifest(out)["params"]["hidden_edges"] >= 1


def test_sweep(planted, tmp_path):
    out = tmp_path / "sweep.tsv"
    assert main(["sweep", "--graph", str(planted / "g.edgelist"), "--param", "dimension",
                 "--grid", "8,16", "--task", "communities", "--truth", str(planted / "truth.txt"),
                 "--k", "2", "--epochs", "2", "--walk-length", "100", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "dimension\tf1" and [r.split("\t")[0] for r in rows[1:]] == ["8", "16"]
    assert main(["sweep", "--graph", str(planted / "g.edgelist"), "--param", "walk-length",
                 "--grid", "50", "--task", "linkpred", "--dim", "8", "--epochs", "1",
                 "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "walk-length\tmap"


def test_scalability(planted, tmp_path):
    out = tmp_path / "scale.tsv"
    assert main(["scalability", "--graph", str(planted / "g.edgelist"), "--counts", "4,8,16",
                 *QUICK, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("count\tmedian_seconds") and len(lines) == 5
    assert lines[-1].startswith("# linear_fit_r2")
    assert main(["scalability", "--graph", str(planted / "g.edgelist"), "--counts", "99",
                 "--out", str(out)]) == 3


def test_verify(tmp_path):
    out = tmp_path / "v.tsv"
    assert main(["verify", "--graph", str(TOY_EDGES), "--subgraphs", str(TOY_SUBGRAPHS),
                 "--out", str(out)]) == 0
    rows = [r.split("\t") for r in out.read_text().splitlines()]
    assert rows[0][0] == "pair" and len(rows) == 4
    assert rows[1][0] == "g1-g2" and rows[1][1] == "6"
    assert all(r[6] == "True" and r[7] == "True" for r in rows[1:])
    assert manifest(out)["params"]["l"] == 2


def test_linear_r2():
    assert linear_r2([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert linear_r2([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.64)


def test_console_script(tmp_path):
    out = tmp_path / "v.tsv"
    proc = subprocess.run([sys.executable, "-m", "subvec.cli", "verify", "--graph",
                           str(TOY_EDGES), "--subgraphs", str(TOY_SUBGRAPHS), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "3 pairs" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "subvec.cli", "embed"], capture_output=True)
    assert proc.returncode == 2
