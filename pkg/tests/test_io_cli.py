import json
import math

import pytest

from tclab import __version__
from tclab.cli import main
from tclab.io import fmt, load_config, read_table, write_table


def test_fmt_round_trips_floats():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17):
        assert float(fmt(x)) == x
    assert fmt(float("nan")) == "nan" and fmt(3) == "3" and fmt(True) == "1" and fmt("a") == "a"


def test_table_round_trip_and_sidecar(tmp_path):
    path = write_table(tmp_path / "t.csv", "demo", ["a", "b"], [(1, 0.5), (2, math.pi)], {"k": 1.5})
    schema, header, rows = read_table(path)
    assert schema == "demo.v1" and header == ["a", "b"] and rows[1][1] == math.pi
    meta = json.loads((tmp_path / "t.csv.json").read_text())
    assert meta == {"schema": "demo.v1", "columns": ["a", "b"], "artifact_version": __version__,
                    "config": {"k": 1.5}}
    with pytest.raises(ValueError):
        write_table(tmp_path / "u.csv", "demo", ["a", "b"], [(1,)])


def test_load_config_formats(tmp_path):
    (tmp_path / "c.toml").write_text('mu = 0.07\nregime = "maximal"\n')
    (tmp_path / "c.json").write_text('{"mu": 0.07}')
    (tmp_path / "n.toml").write_text("[table]\nx = 1\n")
    assert load_config(tmp_path / "c.toml") == {"mu": 0.07, "regime": "maximal"}
    assert load_config(tmp_path / "c.json") == {"mu": 0.07}
    with pytest.raises(ValueError):
        load_config(tmp_path / "n.toml")


def _run(argv, tmp_path, name="out.csv"):
    out = tmp_path / name
    code = main([*argv, "--output", str(out)])
    return code, out


@pytest.mark.parametrize("argv", [
    ["simulate", "--horizon", "0.5", "--seed", "3"],
    ["simulate", "--horizon", "0.5", "--paths", "50", "--policy", "reset", "--eta-star", "0.05"],
    ["density", "--policy", "inner"],
    ["costs", "--regime", "small"],
    ["boundaries", "--objective", "letf", "--eps", "1e-4"],
    ["residual", "--objective", "logcontract"],
])
def test_commands_are_deterministic(argv, tmp_path):
    c1, o1 = _run(argv, tmp_path, "a.csv")
    c2, o2 = _run(argv, tmp_path, "b.csv")
    assert c1 == c2 == 0
    assert o1.read_bytes() == o2.read_bytes()
    assert o1.read_text().startswith("# schema=")
    meta = json.loads((tmp_path / "a.csv.json").read_text())
    assert meta["artifact_version"] == __version__


def test_costs_table_contents(tmp_path):
    code, out = _run(["costs", "--regime", "maximal", "--eps-ladder", "1e-5"], tmp_path)
    assert code == 0
    schema, header, rows = read_table(out)
    assert header == ["eps", "trc", "atc", "sf", "ratio"]
    assert rows[0][0] == 1e-5 and rows[0][4] == pytest.approx(2.0, rel=0.05)


def test_unknown_flag_exits_2_without_output(tmp_path, capsys):
    out = tmp_path / "x.csv"
    with pytest.raises(SystemExit) as exc:
        main(["costs", "--no-such-flag", "--output", str(out)])
    assert exc.value.code == 2 and not out.exists()


def test_missing_objective_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["boundaries", "--output", str(tmp_path / "b.csv")])
    assert exc.value.code == 2


def test_config_values_apply_and_flags_override(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('regime = "maximal"\neps_ladder = "1e-5"\n')
    code, out = _run(["costs", "--config", str(cfg)], tmp_path, "cfg.csv")
    assert code == 0
    maximal = read_table(out)[2][0][4]
    code, out2 = _run(["costs", "--config", str(cfg), "--regime", "small"], tmp_path, "flag.csv")
    small = read_table(out2)[2][0][4]
    assert maximal == pytest.approx(2.0, rel=0.05) and small < 1.5
    bad = tmp_path / "bad.toml"
    bad.write_text("nonsense = 1\n")
    with pytest.raises(SystemExit) as exc:
        main(["costs", "--config", str(bad)])
    assert exc.value.code == 2


def test_domain_errors_exit_2(tmp_path):
    code, out = _run(["costs", "--target", "1.0"], tmp_path)
    assert code == 2 and not out.exists()
    code, _ = _run(["boundaries", "--objective", "power", "--gamma", "2", "--method", "numeric",
                    "--eps", "1e-3"], tmp_path)
    assert code == 2


def test_riskneutral_table(tmp_path, capsys):
    code, out = _run(["boundaries", "--objective", "riskneutral", "--mu", "0.04",
                      "--eps-ladder", "1e-4,1e-6"], tmp_path)
    assert code == 0
    text = capsys.readouterr().out
    assert "0.58281" in text
    _, header, rows = read_table(out)
    assert len(rows) == 2
