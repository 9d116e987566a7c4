import json
import subprocess
import sys
from pathlib import Path

import pytest

import edslab
from edslab import cli
from edslab.blockdiag import build_theta_system
from edslab.dsl import (DSLError, UndeclaredIdentifierError, canonical, parse_fields, parse_system,
                        print_system)

DATA = Path(edslab.__file__).parent / "data"

TOY = """# two generators
[generators]
a b
[structure]
d a = a^b
d b = 0
[ideal]
a
[independence]
b
"""


# system files


@pytest.mark.parametrize("text, line, column, kind", [
    ("[generators]\na b\n[structure]\nd a = a^c\nd b = 0\n[independence]\nb\n", 4, 9, UndeclaredIdentifierError),
    ("[generators]\na b\n[structure]\nd a = a^^b\nd b = 0\n[independence]\nb\n", 4, 9, DSLError),
    ("[generators]\na\n[bogus]\n", 3, 1, DSLError),
])
def test_errors_carry_position(text, line, column, kind):
    with pytest.raises(kind) as err:
        parse_system(text)
    assert (err.value.line, err.value.column) == (line, column)
    assert f"line {line}" in str(err.value)


def test_missing_structure_entry():
    with pytest.raises(DSLError, match="b"):
        parse_system("[generators]\na b\n[structure]\nd a = 0\n[independence]\nb\n")


def test_missing_independence():
    with pytest.raises(DSLError):
        parse_system("[generators]\na b\n[structure]\nd a = 0\nd b = 0\n")


def test_empty_ideal_and_self_wedge():
    sys_ = parse_system(TOY.replace("a^b", "a^a").replace("[ideal]\na\n", "[ideal]\n"))
    assert sys_.generators == []
    assert "d a = 0" in print_system(sys_)


def test_toy_round_trip():
    text = print_system(parse_system(TOY))
    assert print_system(parse_system(text)) == text
    assert canonical(text) == text


def test_power_versus_wedge():
    text = TOY.replace("[generators]\na b", "[generators]\na b\n[symbols]\ncoordinate: x y").replace(
        "d b = 0", "d b = x^2*a^b - (3/2)*y*x*b^a")
    sys_ = parse_system(text)
    assert "d b = (x^2 + 3/2*x*y)*a^b" in print_system(sys_)
    assert canonical(print_system(sys_)) == print_system(sys_)


def test_shipped_system_matches_builder():
    sys_ = parse_system((DATA / "blockdiag.eds").read_text())
    ref = build_theta_system()
    names = lambda s: [str(g) for g in s.generators]
    assert names(sys_) == names(ref)
    assert canonical((DATA / "blockdiag.eds").read_text()) == print_system(ref)


@pytest.mark.parametrize("name", sorted(p.name for p in DATA.glob("*.eds")))
def test_shipped_systems_round_trip(name):
    text = canonical((DATA / name).read_text())
    assert canonical(text) == text


@pytest.mark.parametrize("name", sorted(p.name for p in DATA.glob("*.fields")))
def test_shipped_fields_parse(name):
    ff = parse_fields((DATA / name).read_text())
    assert ff.fields or ff.metric is not None


def test_fields_errors():
    with pytest.raises(DSLError):
        parse_fields("[coordinates]\nx x\n")
    with pytest.raises(DSLError):
        parse_fields("[coordinates]\nx\n[metric]\ng12 = 1\n")


# commands

EXPECTED_EXIT = {name: 0 for name in cli.COMMANDS}
EXPECTED_EXIT["cartan-test"] = 1


@pytest.fixture(scope="module")
def reports():
    return {name: cli.run(name, {}) for name in cli.COMMANDS}


@pytest.mark.parametrize("name", cli.COMMANDS)
def test_command_default_run(reports, name):
    report, code = reports[name]
    assert code == EXPECTED_EXIT[name], report
    assert report["command"] == name
    assert len(report["inputs_digest"]) == 64
    assert "error" not in report


def test_cartan_report(reports):
    report, _ = reports["cartan-test"]
    assert report["results"]["characters"] == [0, 0, 0, 3, 6]
    assert not report["passed"]


def test_blockdiag_report(reports):
    res = reports["blockdiag-full"][0]["results"]
    assert res["characters"] == [6, 6, 5, 2]
    assert res["r1"] == 41
    assert res["family_dimension_after_Y"] == 21


def test_failing_tolerance_exits_one():
    report, code = cli.run("dep-check", {"tol": 0.0, "grid": 2, "fields": str(DATA / "curved_rotated.fields")})
    assert code == 1 and not report["passed"]


def test_wrong_input_kind_exits_two(tmp_path):
    bad = tmp_path / "bad.fields"
    bad.write_text("[coordinates]\nx y\n[fields]\nf = x\n")
    _, code = cli.run("dep-check", {"fields": str(bad)})
    assert code == 2


def test_reports_are_byte_identical(tmp_path, capsys):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        assert cli.main(["characters", "--seed", "3", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert "wall time" in capsys.readouterr().err
    data = json.loads(outs[0])
    assert list(data) == sorted(data)


def test_text_report(capsys):
    assert cli.main(["np-check", "--report", "text"]) == 0
    out = capsys.readouterr().out
    assert 'command: "np-check"' in out and "passed: true" in out


def test_json_float_format():
    assert cli.to_json({"b": 0.1, "a": [1, 2.5]}) == cli.to_json({"a": [1, 2.5], "b": 0.1})
    assert "0.10000000000000001" in cli.to_json({"x": 0.1})


def test_module_entry_point_rejects_bad_flag():
    proc = subprocess.run([sys.executable, "-m", "edslab", "characters", "--bogus"], capture_output=True, text=True)
    assert proc.returncode == 2
    proc = subprocess.run([sys.executable, "-m", "edslab", "nonsense"], capture_output=True, text=True)
    assert proc.returncode == 2
