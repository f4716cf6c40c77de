import math

import pytest

from bellrand import cli, qstate
from bellrand.qstate import behavior, behavior_to_csv, chsh_optimal_settings, make_state


def interior_csv():
    b = behavior(make_state(0.9, math.pi / 4), chsh_optimal_settings(math.pi / 4))
    return behavior_to_csv(b)


def parse_report(text):
    # key/value lines are space-separated; table rows carry no spaces
    fields = {}
    for line in text.strip().splitlines():
        if " " in line:
            key, val = line.split(" ", 1)
            fields[key] = val
    return fields


def test_certify_from_behavior_file(tmp_path):
    src = tmp_path / "behavior.csv"
    out = tmp_path / "report.txt"
    src.write_text(interior_csv())
    code = cli.main(
        ["certify", "--behavior", str(src), "--level", "1", "--out", str(out)]
    )
    assert code == 0
    fields = parse_report(out.read_text())
    assert fields["status"] == "optimal"
    assert fields["level"] == "1"
    assert 0.25 <= float(fields["G"]) <= 1.0


def test_certify_writes_stdout(capsys):
    code = cli.main(
        ["certify", "--v", "0.9", "--level", "1", "--alice", "0,1.5707963",
         "--bob", "0.78539816,-0.78539816"]
    )
    assert code == 0
    fields = parse_report(capsys.readouterr().out)
    assert fields["status"] == "optimal"


def test_certify_missing_row_names_component(tmp_path, capsys):
    lines = interior_csv().strip().splitlines()
    dropped = [ln for ln in lines if not ln.startswith("-1,1,2,2")]
    assert len(dropped) == len(lines) - 1
    src = tmp_path / "behavior.csv"
    src.write_text("\n".join(dropped) + "\n")
    code = cli.main(["certify", "--behavior", str(src), "--level", "1"])
    assert code == 1
    assert "(-1,1,2,2)" in capsys.readouterr().err


def test_certify_generation_outside_file_scenario(tmp_path, capsys):
    src = tmp_path / "behavior.csv"
    src.write_text(interior_csv())
    code = cli.main(
        ["certify", "--behavior", str(src), "--level", "1", "--ystar", "3"]
    )
    assert code == 1
    assert "generation" in capsys.readouterr().err


def test_certify_missing_file(tmp_path):
    code = cli.main(["certify", "--behavior", str(tmp_path / "nope.csv")])
    assert code == 1


def test_bellbound_tsirelson(tmp_path):
    out = tmp_path / "bound.txt"
    code = cli.main(
        ["bellbound", "--value", repr(2.0 * math.sqrt(2.0)), "--out", str(out)]
    )
    assert code == 0
    fields = parse_report(out.read_text())
    assert abs(float(fields["hmin"]) - 1.22845) <= 2e-3


def test_bellbound_infeasible_value(capsys):
    code = cli.main(["bellbound", "--value", "3.0"])
    assert code == 2
    assert "infeasible" in capsys.readouterr().err


def test_bellbound_requires_an_operator(capsys):
    assert cli.main(["bellbound"]) == 1
    assert cli.main(["bellbound", "--ibeta-value", "2.6"]) == 1


def test_optimize_summary_and_trace(tmp_path):
    out = tmp_path / "summary.txt"
    trace = tmp_path / "trace.csv"
    code = cli.main(
        ["optimize", "--v", "0.9", "--level", "1", "--epsilon", "1e-3",
         "--starts", "2", "--seed", "3", "--max-iterations", "15",
         "--out", str(out), "--trace", str(trace)]
    )
    assert code == 0
    fields = parse_report(out.read_text())
    assert fields["status"] == "optimal"
    assert fields["converged"] == "True"
    assert len(fields["alice"].split(",")) == 2
    rows = trace.read_text().strip().splitlines()
    assert rows[0] == "start,iteration,g,hmin"
    starts_seen = {row.split(",")[0] for row in rows[1:]}
    assert starts_seen == {"0", "1"}
    assert len(rows) - 1 == int(fields["iterations"]) or len(rows) - 1 >= int(
        fields["iterations"]
    )


def test_optimize_rejects_bad_epsilon(capsys):
    assert cli.main(["optimize", "--epsilon", "0"]) == 1
    assert "epsilon" in capsys.readouterr().err


def test_sweep_deterministic_and_parallel(tmp_path):
    args = ["sweep", "--theta-grid", repr(math.pi / 4), "--v-grid", "0.5,0.9",
            "--level", "1", "--epsilon", "1e-3", "--starts", "2",
            "--max-iterations", "15"]
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    third = tmp_path / "c.csv"
    assert cli.main(args + ["--out", str(first)]) == 0
    assert cli.main(args + ["--out", str(second)]) == 0
    assert cli.main(args + ["--jobs", "2", "--out", str(third)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert first.read_bytes() == third.read_bytes()
    rows = first.read_text().strip().splitlines()
    assert rows[0] == "v,theta,mx,my,level,hmin,chsh,hmin_chsh,starts,converged,status"
    assert len(rows) == 3
    low, high = rows[1].split(","), rows[2].split(",")
    assert float(low[0]) == 0.5 and float(high[0]) == 0.9
    # local point certifies nothing, interior point certifies something
    assert float(low[5]) <= 1e-3
    assert float(high[5]) >= 0.01
    assert float(high[5]) >= float(high[7]) - 1e-6


def test_sweep_rejects_empty_grid(capsys):
    assert cli.main(["sweep", "--v-grid", ""]) == 1
    assert "v-grid is empty" in capsys.readouterr().err


def test_tomography_outputs_with_plot_companion(tmp_path):
    out = tmp_path / "tomo.csv"
    amap = tmp_path / "map.csv"
    code = cli.main(
        ["tomography", "--v", "1.0", "--theta", "0", "--grid-size", "8",
         "--map-grid", "8", "--angle-map", str(amap), "--out", str(out)]
    )
    assert code == 0
    rows = out.read_text().strip().splitlines()
    assert rows[0] == "v,theta,level,alpha,beta,hmin,status"
    assert len(rows) == 2
    assert rows[1].endswith("optimal")
    assert abs(float(rows[1].split(",")[5]) - 2.0) <= 1e-3
    gp = (tmp_path / "tomo.csv.gp").read_text()
    assert "plot" in gp and "tomo.csv" in gp
    map_rows = amap.read_text().strip().splitlines()
    assert map_rows[0] == "alpha1,beta1,hmin"
    assert len(map_rows) == 1 + 64
    assert (tmp_path / "map.csv.gp").exists()


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# solver settings\nlevel = 1\nv = 0.9\n")
    out = tmp_path / "r1.txt"
    assert cli.main(["certify", "--config", str(cfg), "--out", str(out)]) == 0
    assert parse_report(out.read_text())["level"] == "1"
    out2 = tmp_path / "r2.txt"
    assert cli.main(
        ["certify", "--config", str(cfg), "--level", "2", "--out", str(out2)]
    ) == 0
    assert parse_report(out2.read_text())["level"] == "2"


def test_rejected_flags_exit_via_argparse():
    with pytest.raises(SystemExit) as info:
        cli.main(["unknown-subcommand"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["certify", "--level", "5"])
    assert info.value.code == 2


def test_v_out_of_range(capsys):
    assert cli.main(["certify", "--v", "1.5", "--level", "1"]) == 1
    assert "v must lie" in capsys.readouterr().err
