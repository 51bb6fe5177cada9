"""Command-line interface: exit codes, JSON summaries, output files,
determinism, and error reporting."""

import json

import numpy as np
import pytest

from colorsparse.cli import main
from colorsparse.spencer import SetSystem

from util import er_graph


@pytest.fixture
def graph_file(tmp_path):
    G = er_graph(12, 0.4, seed=3)
    p = tmp_path / "g.edges"
    G.save(str(p))
    return str(p), G


def run_cli(args):
    return main(args)


def test_sparsify_end_to_end(tmp_path, graph_file):
    path, G = graph_file
    summary = tmp_path / "s.json"
    out = tmp_path / "w.txt"
    code = run_cli(["sparsify", path, "--eps", "0.4",
                    "--summary", str(summary), "--out", str(out)])
    assert code == 0
    s = json.loads(summary.read_text())
    assert s["schema"] == 1
    assert s["ok"] is True
    assert s["lambda_min"] == pytest.approx(1.0, abs=1e-9)
    assert s["lambda_max"] == pytest.approx(1.0, abs=1e-9)
    w = np.loadtxt(out)
    assert w.shape == (G.m,)
    assert np.array_equal(w, np.ones(G.m))


def test_certify_identity_ok(tmp_path, graph_file):
    path, _ = graph_file
    summary = tmp_path / "s.json"
    code = run_cli(["certify", path, "--eps", "0.3",
                    "--summary", str(summary)])
    assert code == 0
    s = json.loads(summary.read_text())
    assert s["command"] == "certify" and s["ok"] is True


def test_certify_failure_exit_2(tmp_path, graph_file):
    path, G = graph_file
    wfile = tmp_path / "w.txt"
    wfile.write_text("".join("2.0\n" for _ in range(G.m)))
    summary = tmp_path / "s.json"
    code = run_cli(["certify", path, "--eps", "0.3",
                    "--weights", str(wfile), "--summary", str(summary)])
    assert code == 2
    s = json.loads(summary.read_text())
    assert s["ok"] is False
    assert s["lambda_max"] == pytest.approx(2.0, abs=1e-9)


def test_certify_weight_count_mismatch(tmp_path, graph_file, capsys):
    path, _ = graph_file
    wfile = tmp_path / "w.txt"
    wfile.write_text("1.0\n1.0\n")
    assert run_cli(["certify", path, "--weights", str(wfile)]) == 1
    assert "entries" in capsys.readouterr().err


def test_usage_errors_exit_1(capsys, graph_file):
    path, _ = graph_file
    assert run_cli(["sparsify", path, "--bogus"]) == 1
    assert run_cli(["not-a-command", path]) == 1
    assert run_cli([]) == 1
    capsys.readouterr()


def test_validation_error_exit_1(graph_file, capsys):
    path, _ = graph_file
    assert run_cli(["sparsify", path, "--eps", "1.5"]) == 1
    assert "eps" in capsys.readouterr().err


def test_malformed_input_names_line(tmp_path, capsys):
    p = tmp_path / "bad.edges"
    p.write_text("0 1 1.0\n0 oops 1.0\n")
    assert run_cli(["sparsify", str(p)]) == 1
    assert "2" in capsys.readouterr().err


def test_summaries_deterministic(tmp_path, graph_file):
    path, _ = graph_file
    outs = []
    for name in ("a.json", "b.json"):
        summary = tmp_path / name
        assert run_cli(["sparsify", path, "--eps", "0.3", "--seed", "7",
                        "--summary", str(summary)]) == 0
        s = json.loads(summary.read_text())
        s.pop("runtime_ms")
        outs.append(json.dumps(s, sort_keys=True))
    assert outs[0] == outs[1]


def test_ultrasparsify_command(tmp_path, graph_file):
    path, G = graph_file
    summary = tmp_path / "s.json"
    code = run_cli(["ultrasparsify", path, "--ell", "2",
                    "--summary", str(summary)])
    assert code == 0
    s = json.loads(summary.read_text())
    assert s["extra"]["edge_count"] == s["nnz"]


def test_degree_sparsify_command(tmp_path):
    from util import complete_bipartite
    G = complete_bipartite(4, 4)
    path = tmp_path / "b.edges"
    G.save(str(path))
    summary = tmp_path / "s.json"
    code = run_cli(["degree-sparsify", str(path), "--eps", "0.5",
                    "--routing", "tree", "--summary", str(summary)])
    assert code == 0
    s = json.loads(summary.read_text())
    assert s["extra"]["degree_residual"] == 0.0
    assert s["extra"]["routing"] == "tree"


def test_spencer_command(tmp_path):
    gen = np.random.default_rng(2)
    A = (gen.uniform(size=(16, 16)) < 0.5).astype(float)
    sysfile = tmp_path / "sys.txt"
    SetSystem.from_dense(A).save(str(sysfile))
    summary = tmp_path / "s.json"
    out = tmp_path / "x.txt"
    code = run_cli(["spencer", str(sysfile), "--summary", str(summary),
                    "--out", str(out)])
    assert code == 0
    s = json.loads(summary.read_text())
    assert s["n"] == 16 and s["m"] == 16
    x = np.loadtxt(out)
    assert np.all(np.abs(x) == 1.0)
    assert s["disc_inf"] == pytest.approx(np.max(np.abs(A @ x)))


def test_coo_format_round_trip(tmp_path):
    G = er_graph(8, 0.5, seed=1)
    path = tmp_path / "g.coo"
    G.save(str(path), fmt="coo")
    summary = tmp_path / "s.json"
    assert run_cli(["certify", str(path), "--format", "coo",
                    "--summary", str(summary)]) == 0
