import json

import numpy as np
import pytest

from npsroles import experiments as ex
from npsroles import svg
from npsroles.cli import ExperimentConfig, main, summarize_bounds
from npsroles.diagnostics import BoundRecord
from npsroles.nps import BetaPolicy
from npsroles.sbm import Assignment, ideal_adjacency, read_assignment, shuffle_nodes, write_assignment, write_edge_list


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGenerate:
    def test_files_and_reproducibility(self, tmp_path, capsys):
        out = tmp_path / "new" / "dir"
        code, *_ = run(capsys, "generate", "--n-grid", "2,3", "--trials", "2", "--out", out, "--seed", "4")
        assert code == 0
        edges = sorted(out.glob("*.edges"))
        assert len(edges) == 4 and len(list(out.glob("*.roles"))) == 4
        first = edges[0].read_bytes()
        lines = first.decode().splitlines()
        assert int(lines[0].split()[1]) == len(lines) - 1
        run(capsys, "generate", "--n-grid", "2,3", "--trials", "2", "--out", out, "--seed", "4")
        assert edges[0].read_bytes() == first

    def test_bad_grid(self, tmp_path, capsys):
        code, _, err = run(capsys, "generate", "--n-grid", "3,2", "--out", tmp_path)
        assert code == 2 and "strictly increasing" in err


class TestExtract:
    @pytest.fixture
    def ideal(self, tmp_path):
        truth = Assignment(np.repeat([0, 1, 2], 15))
        g, t, _ = shuffle_nodes(ideal_adjacency(truth, np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]])), truth, seed=2)
        write_edge_list(tmp_path / "ideal.edges", g)
        write_assignment(tmp_path / "ideal.roles", t)
        return tmp_path

    def test_ideal_graph(self, ideal, capsys):
        code, out, _ = run(
            capsys, "extract", ideal / "ideal.edges", "--truth", ideal / "ideal.roles", "--fhat",
            "--out", ideal / "res", "--spectrum-csv", ideal / "spec.csv", "--dump-similarity", ideal / "s.bin",
        )
        assert code == 0
        assert "estimated rank: 3" in out and "warning" not in out
        assert "fhat: 0.0" in out
        line = json.loads([ln for ln in out.splitlines() if ln.startswith("{")][0])
        assert line["fhat"] == 0.0 and sorted(line["matching"]) == [0, 1, 2]
        found = read_assignment(ideal / "res" / "ideal.found.roles")
        assert len(found) == 45
        assert (ideal / "spec.csv").read_text().startswith("index,eigenvalue,abs_gap,rel_gap\n")
        assert (ideal / "s.bin").stat().st_size == 24 + 8 * 45 * 45

    def test_rank_warning_and_sweep(self, ideal, capsys):
        code, out, _ = run(capsys, "extract", ideal / "ideal.edges", "--q", "4", "--sweep", "4", "--out", ideal)
        assert code == 0 and "warning: estimated rank 3" in out
        rows = [json.loads(ln) for ln in out.splitlines() if ln.startswith("{")]
        assert [r["q"] for r in rows] == [3, 4]

    def test_fhat_needs_truth(self, ideal, capsys):
        code, _, err = run(capsys, "extract", ideal / "ideal.edges", "--fhat", "--out", ideal)
        assert code == 2 and "--truth" in err

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.edges"
        bad.write_text("4 2\n0 1\n2 two\n")
        code, _, err = run(capsys, "extract", bad, "--out", tmp_path)
        assert code == 2 and "bad.edges:3:" in err

    def test_cycle_deterministic(self, tmp_path, capsys):
        run(capsys, "generate", "--n-grid", "50", "--seed", "7", "--out", tmp_path)
        graph = tmp_path / "cycle_p0.6_n50_seed7_t0.edges"
        outputs = []
        for sub in ("a", "b"):
            assert run(capsys, "extract", graph, "--seed", "7", "--out", tmp_path / sub)[0] == 0
            outputs.append((tmp_path / sub / "cycle_p0.6_n50_seed7_t0.found.roles").read_bytes())
        assert outputs[0] == outputs[1]


class TestFigures:
    def test_figure2(self, tmp_path, capsys):
        code, *_ = run(capsys, "figure2", "--n-grid", "2,4", "--out", tmp_path)
        assert code == 0
        rows = ex.read_rows(tmp_path / "figure2.csv")
        assert [(r["p"], r["n"]) for r in rows] == [(0.6, 2), (0.6, 4), (0.75, 2), (0.75, 4)]
        assert all(r["beta"] == 0.0 and r["k"] == 1 for r in rows)
        first_csv = (tmp_path / "figure2.csv").read_bytes()
        first_svg = (tmp_path / "figure2.svg").read_text()
        assert first_svg.count("p=0.6") == 1 and first_svg.count("p=0.75") == 1
        # CSV is byte-stable and the SVG is a function of the CSV
        run(capsys, "figure2", "--n-grid", "2,4", "--out", tmp_path)
        assert (tmp_path / "figure2.csv").read_bytes() == first_csv
        (tmp_path / "figure2.svg").unlink()
        run(capsys, "figure2", "--from-csv", tmp_path / "figure2.csv", "--out", tmp_path)
        assert (tmp_path / "figure2.svg").read_text() == first_svg

    def test_figure3(self, tmp_path, capsys):
        code, *_ = run(capsys, "figure3", "--n-grid", "2", "--p", "0.6", "--out", tmp_path)
        assert code == 0
        (row,) = ex.read_rows(tmp_path / "figure3.csv")
        assert row["k"] == 10 and row["beta"] > 0
        assert row["T1"] > row["T2"] >= row["T3"] > 0

    def test_figure4(self, tmp_path, capsys):
        code, out, err = run(capsys, "figure4", "--n-grid", "2,4", "--trials", "3", "--out", tmp_path)
        assert code == 0 and "fitted constant" in out and "figure4: 3/3" in err
        rows = ex.read_rows(tmp_path / "figure4.csv")
        assert list(rows[0]) == ["n", "trials", "fhat_k1", "fhat_k10", "overlay"]
        assert (tmp_path / "figure4.svg").exists()

    def test_overlay_value(self):
        assert ex.fhat_overlay(10) == pytest.approx(3 / 124)

    def test_noise_estimate(self):
        assert ex.noise_estimate(0.6, 50) == pytest.approx((3 + np.sqrt(8)) * 0.24 * 1500)


class TestBounds:
    def test_small_grid(self, tmp_path, capsys):
        code, out, _ = run(capsys, "bounds", "--n-grid", "2,4", "--trials", "1", "--out", tmp_path, "--bounds-csv", tmp_path / "b.csv")
        lines = (tmp_path / "b.csv").read_text().splitlines()
        assert lines[0] == "name,n,k,seed,lhs,rhs,holds" and len(lines) == 1 + 2 * 12
        names = {ln.split(",")[0] for ln in lines[1:]}
        table = out.split("wrote")[0]
        assert all(sum(ln.startswith(nm + " ") for ln in table.splitlines()) == 1 for nm in names)
        assert code in (0, 1)

    def test_summary_exit_rule(self):
        ok_rows, ok = summarize_bounds([BoundRecord("a", 2, 1, 10, kind="analytic"), BoundRecord("b", 1, 2, 10)])
        assert ok and [r["status"] for r in ok_rows] == ["open", "pass"]
        rows, ok = summarize_bounds([BoundRecord("a", 1, 2, 10), BoundRecord("a", 2, 1, 20, kind="exact")])
        assert not ok and rows[0]["status"] == "FAIL"

    def test_conjecture_command(self, capsys):
        code, out, _ = run(capsys, "conjecture", "--size", "100", "--trials", "2")
        assert code == 0 and "N=100 trials=2" in out


def test_config_validation(tmp_path):
    kw = dict(k=1, policy=BetaPolicy(), seed=0, out=tmp_path)
    with pytest.raises(ValueError):
        ExperimentConfig(p=(0.6,), n_grid=(10, 10), trials=1, **kw)
    with pytest.raises(ValueError):
        ExperimentConfig(p=(0.6,), n_grid=(10,), trials=0, **kw)
    with pytest.raises(ValueError):
        ExperimentConfig(p=(0.6, 0.7), n_grid=(10,), trials=1, **kw).single_p()


def test_workers_do_not_change_results():
    serial = ex.fhat_rows(0.6, [2], trials=4, ks=(1,), workers=1)
    parallel = ex.fhat_rows(0.6, [2], trials=4, ks=(1,), workers=2)
    assert serial == parallel


def test_svg_deterministic():
    panel = svg.Panel("t", [svg.Series("a", [1, 2], [1.0, 10.0]), svg.Series("", [1, 2], [2.0, 3.0], "circles")], logy=True)
    a = svg.render([panel])
    assert a == svg.render([panel])
    assert a.startswith("<svg") and a.rstrip().endswith("</svg>")
    assert a.count("<circle") == 2
