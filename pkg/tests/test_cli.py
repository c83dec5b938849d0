import csv

import pytest

from quantcons import fixtures
from quantcons.cli import main


@pytest.fixture
def edges(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


def data_rows(path):
    with open(path) as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def test_replay_example1_passes(capsys):
    assert main(["replay", "example1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("PASS") and "[4, 5, 4, 4]" in out


def test_replay_detects_perturbed_fixture(tmp_path, capsys):
    assert main(["replay", "example1", "--out", str(tmp_path)]) == 0
    golden = tmp_path / "replay.csv"
    lines = golden.read_text().splitlines()
    idx = next(i for i, l in enumerate(lines) if l.startswith("0,2,2,"))
    parts = lines[idx].split(",")
    parts[7] = "5"  # qs of node 2 at k=2
    lines[idx] = ",".join(parts)
    golden.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["replay", "example1", "--golden", str(golden)]) == 3
    assert capsys.readouterr().out.strip() == "FAIL k=2 node=2 field=qs: expected 5, got 4"


def test_replay_self_schedule_never_converges(edges, capsys):
    sched = edges("self.schedule", "0: 1->1,2->2,3->3,4->4\n")
    code = main(["replay", "--graph", "fig1", "--init", "5,3,7,2", "--schedule", sched,
                 "--repeat-schedule", "--max-rounds", "200"])
    assert code == 3
    assert "not converged after 200 rounds" in capsys.readouterr().out


def test_run_fig2(edges, tmp_path, capsys):
    g = edges("fig2.edges", fixtures.FIG2_EDGES)
    out = tmp_path / "out"
    code = main(["run", "--graph", g, "--init", "15,5,11,4,3,13,9", "--seed", "7",
                 "--out", str(out), "--emit-plot-data"])
    assert code == 0
    summary = capsys.readouterr().out
    assert summary.startswith("converged k0=") and "qs in {8,9}" in summary
    text = (out / "trace.csv").read_text()
    assert "# seed=7" in text and "# config_hash=" in text and "# tool=quantcons" in text
    rows = data_rows(out / "trace.csv")
    assert rows[0][:3] == ["run_id", "k", "node"]
    assert {r[8] for r in rows[1:]} == {"60"} and {r[9] for r in rows[1:]} == {"7"}
    plot = data_rows(out / "trace_plot.csv")
    assert plot[0] == ["run_id", "k", "q1", "q2", "q3", "q4", "q5", "q6", "q7"]
    assert plot[1] == ["0", "0", "15", "5", "11", "4", "3", "13", "9"]


def test_run_output_is_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert main(["run", "--graph", "fig2", "--seed", "3", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_run_disconnected_exits_2(edges, capsys):
    g = edges("oneway.edges", "n 2\n2 1\n")
    assert main(["run", "--graph", g, "--init", "1,2"]) == 2
    assert "strongly connected" in capsys.readouterr().err


def test_validation_and_usage_exit_codes(edges, capsys):
    g = edges("fig1.edges", fixtures.FIG1_EDGES)
    assert main(["run", "--graph", g, "--init", "1,2"]) == 2
    assert main(["run", "--graph", g]) == 1
    assert main(["run", "--graph", str(g) + ".missing", "--init", "1,2,3,4"]) == 2
    bad = edges("bad.edges", "n 3\n1 1\n")
    assert main(["bound-check", "--graph", bad]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_bound_check(capsys, tmp_path):
    assert main(["bound-check", "--graph", "fig1", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("min=1/12, bound=1/27, HOLDS")
    assert data_rows(tmp_path / "bound_check.csv")[1] == ["4", "2", "1/12", "1/27", "1"]


def test_campaign_cli(tmp_path, capsys):
    code = main(["campaign", "--num-graphs", "5", "--n", "10", "--total", "101", "--hi", "20",
                 "--seed", "1", "--out", str(tmp_path), "--emit-plot-data"])
    assert code == 0
    assert "converged=5/5" in capsys.readouterr().out
    rows = data_rows(tmp_path / "campaign.csv")
    assert len(rows) == 6 and rows[0][0] == "run_id"
    assert (tmp_path / "campaign_summary.json").exists()
    assert data_rows(tmp_path / "campaign_plot.csv")[0][:3] == ["run_id", "k", "q1"]


def test_campaign_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[campaign]\nnum_graphs = 2\nn = 7\ninit_policy = fixed\n"
                   "init_values = 15,5,11,4,3,13,9\ngraph = fig2\nseed = 8\n")
    assert main(["campaign", "--config", str(cfg)]) == 0
    assert "targets={8,9}" in capsys.readouterr().out


def test_gen_graph(tmp_path, capsys):
    out = tmp_path / "g.edges"
    assert main(["gen-graph", "--n", "12", "--seed", "5", "--out", str(out)]) == 0
    assert main(["bound-check", "--graph", str(out)]) == 0
    assert "# seed=5" in out.read_text()
