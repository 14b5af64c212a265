import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from oracles import random_tree_edges
from subgraph_cavity.analytic import karp_sipser
from subgraph_cavity.cli import main
from subgraph_cavity.exact import exact_log_Z
from subgraph_cavity.network import bmatching_network, read_network, write_network


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


TREE = bmatching_network(21, random_tree_edges(21, np.random.default_rng(20)), 2)


@pytest.fixture
def files(tmp_path):
    paths = {}
    nets = {
        "edge": bmatching_network(2, [[0, 1]], 1),
        "triangle": bmatching_network(3, [[0, 1], [1, 2], [0, 2]], 1),
        "star": bmatching_network(4, [[0, 1], [0, 2], [0, 3]], 1),
        "tree": TREE,
        "empty": bmatching_network(3, [], 1),
    }
    for name, net in nets.items():
        p = tmp_path / f"{name}.json"
        write_network(net, p)
        paths[name] = p
    bad = tmp_path / "loop.json"
    bad.write_text('{"vertices": [{"id": 0, "measure": {"type": "bmatching", "b": 1}}], "edges": [[0, 0]]}')
    paths["loop"] = bad
    return paths


def test_exact(files, capsys):
    code, out, _ = run(["exact", files["triangle"], "--t", "1", "2"], capsys)
    assert code == 0
    r = rows(out)
    assert r[0] == ["t", "log_Z", "free_entropy", "energy", "M"]
    assert float(r[1][3]) == 0.75
    assert r[1][4] == "1"
    assert float(r[2][1]) == pytest.approx(math.log(7))


def test_bp_csv_and_json(files, capsys):
    code, out, _ = run(["bp", files["edge"], "--t", "1"], capsys)
    assert code == 0
    r = rows(out)
    assert r[0] == ["u", "v", "x_uv", "x_vu", "p_edge"]
    assert [float(v) for v in r[1][2:]] == [1.0, 1.0, 0.5]
    code, out, _ = run(["bp", files["triangle"], "--t", "1", "--format", "json"], capsys)
    rec = json.loads(out)
    assert rec["command"] == "bp" and rec["outputs"]["converged"] is True
    assert rec["outputs"]["energy"] == pytest.approx(0.829180, abs=1e-6)
    assert {"seed", "wall_time", "version", "parameters"} <= set(rec)


def test_bp_infinite_activity_on_star(files, capsys):
    code, out, _ = run(["bp", files["star"], "--t", "inf", "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)["outputs"]["rank_estimate"] == pytest.approx(1, abs=1e-12)


def test_bp_not_converged_exit_code(files, capsys):
    code, _, err = run(["bp", files["triangle"], "--t", "1", "--iters", "3"], capsys)
    assert code == 3
    assert "converge" in err


def test_compare_tree(files, capsys):
    code, out, _ = run(["compare", files["tree"], "--t", "1"], capsys)
    assert code == 0
    r = {row[0]: row[1:] for row in rows(out)[1:]}
    assert float(r["max_marginal_diff"][2]) < 1e-10
    assert float(r["max_edge_probability_diff"][2]) < 1e-10
    assert float(r["free_entropy"][2]) < 1e-6
    assert float(r["M"][2]) < 1e-9


def test_compare_triangle(files, capsys):
    code, out, _ = run(["compare", files["triangle"], "--t", "1"], capsys)
    assert code == 0
    r = {row[0]: row[1:] for row in rows(out)[1:]}
    assert float(r["energy"][2]) == pytest.approx(0.829180 - 0.75, abs=1e-6)


def test_validation_exit_code(files, capsys):
    code, _, err = run(["bp", files["loop"]], capsys)
    assert code == 2
    assert "self-loop" in err
    code, _, _ = run(["exact", files["tree"].parent / "missing.json"], capsys)
    assert code == 2


def test_sweep(files, capsys):
    code, out, _ = run(["sweep", files["edge"], "--t-grid", "0.5,1,2"], capsys)
    assert code == 0
    for row in rows(out)[1:]:
        t = float(row[0])
        assert float(row[1]) * 2 == pytest.approx(t / (1 + t), rel=1e-12)
        assert float(row[2]) == pytest.approx(float(row[1]), rel=1e-12)
    code, out, _ = run(["sweep", files["empty"], "--t-grid", "1,3"], capsys)
    assert all(float(row[1]) == 0 for row in rows(out)[1:])
    code, out, _ = run(["sweep", files["tree"], "--t-grid", "1"], capsys)
    fe = float(rows(out)[1][3])
    assert fe == pytest.approx(exact_log_Z(TREE, 1.0) / TREE.n, abs=1e-6)


def test_limit(capsys, tmp_path):
    code, out, _ = run(["limit", "--c", "2", "--b", "1", "--format", "json"], capsys)
    rep = json.loads(out)["outputs"]
    assert rep["m_b"] == pytest.approx(karp_sipser(2.0), abs=1e-8)
    assert rep["karp_sipser"] == pytest.approx(karp_sipser(2.0), abs=1e-15)
    code, out, _ = run(["limit", "--d", "3", "--points", "5"], capsys)
    r = rows(out)
    assert r[0] == ["s", "f", "g", "H"] and len(r) == 6
    pi = tmp_path / "pi.txt"
    pi.write_text("0 0 0 1")
    code, out, _ = run(["limit", "--pi", pi, "--format", "json"], capsys)
    assert json.loads(out)["outputs"]["m_b"] == pytest.approx(0.5)


def test_rde(capsys):
    argv = ["rde", "--d", "3", "--b", "1", "--s-init", "0", "--pool", "500", "--iters", "3", "--seed", "4"]
    code, out, _ = run(argv, capsys)
    assert code == 0
    r = rows(out)
    assert r[0] == ["n", "s_n", "M_n", "stderr"]
    assert [float(row[2]) for row in r[1:]] == [0.5] * 4


def test_gen_and_determinism(tmp_path, capsys):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    for out in (out1, out2):
        code, _, _ = run(["gen", "--model", "er", "--n", "200", "--c", "3", "--b", "2", "--seed", "9", "--out", out], capsys)
        assert code == 0
    assert out1.read_bytes() == out2.read_bytes()
    net = read_network(out1)
    assert net.n == 200 and all(mu.capacity == 2 for mu in net.measures)
    argv = ["ensemble", "--model", "regular", "--n", "200", "--d", "3", "--seeds", "2", "--seed", "1"]
    a = run(argv, capsys)[1]
    b = run(argv, capsys)[1]
    assert a == b


def test_ensemble_regular(capsys):
    code, out, _ = run(["ensemble", "--model", "regular", "--n", "2000", "--d", "3", "--seeds", "3"], capsys)
    assert code == 0
    r = {row[0]: row for row in rows(out)[1:]}
    assert abs(float(r["mean"][2]) - 0.5) < 0.01
    assert float(r["analytic"][2]) == pytest.approx(0.5)


def test_missing_model_parameter(capsys):
    code, _, err = run(["gen", "--model", "er", "--n", "10"], capsys)
    assert code == 2 and "--c" in err


def test_module_entry_point(files):
    proc = subprocess.run(
        [sys.executable, "-m", "subgraph_cavity", "exact", str(files["edge"])], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert rows(proc.stdout)[1][3] == "0.5"
