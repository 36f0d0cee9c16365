"""CLI workflows, in-process through main()."""

import os

import numpy as np
import pytest

from annzip.cli import main
from annzip.datasets import save_vectors


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = os.path.join(root, "data.fvecs")
    queries = os.path.join(root, "q.fvecs")
    assert main(["gen-synthetic", "--n", "6000", "--d", "12", "--clusters", "48",
                 "--seed", "3", "--out", data]) == 0
    assert main(["gen-synthetic", "--n", "64", "--d", "12", "--clusters", "48",
                 "--seed", "9", "--out", queries]) == 0
    return root, data, queries


def test_build_search_check_all_backends(workspace, capsys):
    root, data, queries = workspace
    index = os.path.join(root, "ivf.ivqz")
    assert main(["build-ivf", "--dataset", data, "--k-clusters", "48",
                 "--ids", "roc", "--codes", "flat", "--seed", "3",
                 "--out", index]) == 0
    assert main(["search", "--index", index, "--queries", queries,
                 "--k", "5", "--nprobe", "8", "--check", "all"]) == 0
    out = capsys.readouterr().out
    assert "check ok: 6 backends" in out


def test_search_output_reproducible(workspace, capsys):
    root, data, queries = workspace
    index = os.path.join(root, "ivf.ivqz")
    argv = ["search", "--index", index, "--queries", queries,
            "--k", "5", "--nprobe", "8", "--max-print", "-1"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_deferred_search_matches(workspace, capsys):
    root, data, queries = workspace
    index = os.path.join(root, "wt.ivqz")
    assert main(["build-ivf", "--dataset", data, "--k-clusters", "48",
                 "--ids", "wt1", "--codes", "flat", "--seed", "3",
                 "--out", index]) == 0
    capsys.readouterr()
    argv = ["search", "--index", index, "--queries", queries, "--k", "5",
            "--nprobe", "8", "--max-print", "-1"]
    assert main(argv) == 0
    plain = capsys.readouterr().out
    assert main(argv + ["--deferred"]) == 0
    assert capsys.readouterr().out == plain


def test_stats_reports_fields(workspace, capsys):
    root, data, _ = workspace
    index = os.path.join(root, "ivf.ivqz")
    assert main(["stats", "--index", index]) == 0
    out = capsys.readouterr().out
    assert "bits_per_id=" in out and "theoretical_savings_bits=" in out


def test_graph_workflow_with_offline_stream(workspace, capsys):
    root, data, queries = workspace
    gidx = os.path.join(root, "g.ivqz")
    blob = os.path.join(root, "g.rec")
    g2 = os.path.join(root, "g2.ivqz")
    assert main(["build-graph", "--dataset", data, "--degree", "8",
                 "--friend-ids", "roc", "--seed", "3", "--out", gidx]) == 0
    assert main(["search", "--index", gidx, "--queries", queries, "--k", "5",
                 "--beam", "16", "--check", "all", "--max-print", "-1"]) == 0
    base = capsys.readouterr().out
    assert main(["compress-graph", "--index", gidx, "--out", blob]) == 0
    capsys.readouterr()
    assert main(["decompress-graph", "--input", blob, "--vectors", data,
                 "--out", g2]) == 0
    capsys.readouterr()
    assert main(["search", "--index", g2, "--queries", queries, "--k", "5",
                 "--beam", "16", "--max-print", "-1"]) == 0
    rebuilt = capsys.readouterr().out
    assert rebuilt in base  # same result lines (base also has the check line)


def test_bench_report(workspace, capsys, tmp_path):
    root, data, _ = workspace
    report = os.path.join(tmp_path, "report.txt")
    assert main(["bench", "--dataset", data, "--k-clusters", "32",
                 "--ids", "unc,compact,roc", "--codes", "flat",
                 "--queries", "16", "--runs", "3", "--seed", "3",
                 "--out", report]) == 0
    out = capsys.readouterr().out
    assert "equivalence_check=ok" in out
    assert "bits_per_id.flat.compact=13.0000" in out  # ceil(log2 6000)
    assert os.path.exists(report)
    # deterministic apart from time_* lines
    assert main(["bench", "--dataset", data, "--k-clusters", "32",
                 "--ids", "unc,compact,roc", "--codes", "flat",
                 "--queries", "16", "--runs", "3", "--seed", "3"]) == 0
    second = capsys.readouterr().out
    stable = lambda text: [l for l in text.splitlines()
                           if "time" not in l and "-" not in l[:1]]
    assert [l for l in stable(out) if "=" in l] == [l for l in stable(second) if "=" in l]


def test_threads_flag(workspace, capsys):
    root, data, queries = workspace
    index = os.path.join(root, "ivf.ivqz")
    argv = ["search", "--index", index, "--queries", queries, "--k", "5",
            "--nprobe", "8", "--max-print", "-1"]
    assert main(argv) == 0
    single = capsys.readouterr().out
    assert main(argv + ["--threads", "4"]) == 0
    assert capsys.readouterr().out == single


def test_malformed_inputs_exit_nonzero(tmp_path, capsys):
    bad = os.path.join(tmp_path, "bad.fvecs")
    with open(bad, "wb") as f:
        f.write(b"\x03\x00\x00\x00" + b"\x00" * 10)  # truncated record
    assert main(["build-ivf", "--dataset", bad, "--k-clusters", "4",
                 "--out", os.path.join(tmp_path, "x.ivqz")]) != 0
    save_vectors(bad, np.zeros((8, 4), np.float32))
    assert main(["search", "--index", bad, "--queries", bad]) != 0
