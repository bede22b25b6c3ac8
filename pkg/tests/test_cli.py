import json
import subprocess
import sys
from pathlib import Path

import pytest

from phgraph.cli import main

DATA = Path(__file__).resolve().parents[1] / "data"
TRI = str(DATA / "triangle_msd.json")
THREE = str(DATA / "three_mass_damper13.json")


def test_check_passes(capsys):
    assert main(["check", "--system", TRI, "--system", THREE]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_check_parallel_matches_serial(capsys):
    main(["check", "--system", TRI, "--system", THREE])
    serial = capsys.readouterr().out
    main(["check", "--system", TRI, "--system", THREE, "--jobs", "2"])
    assert capsys.readouterr().out == serial


def test_simulate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--system", TRI, "--out", str(a)]) == 0
    assert main(["simulate", "--system", TRI, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    header = [ln for ln in a.read_text().splitlines() if not ln.startswith("#")][0]
    assert header.startswith("t,") and header.endswith("H,supplied,dissipated")


def test_simulate_overrides(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["simulate", "--system", TRI, "--T", "1", "--dt", "0.1", "--method", "rk4", "--out", str(out)]) == 0
    rows = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
    assert len(rows) == 1 + 11


def test_analyze_reports_persistent_mode(capsys):
    assert main(["analyze", "--system", THREE]) == 0
    out = capsys.readouterr().out
    assert "pervasive damping: false" in out
    assert "dimension 2" in out
    assert "second-order consensus: false" in out


def _open_line(prefix, boundary):
    return {
        "template": "mass_spring_boundary_masses",
        "graph": {
            "vertices": [{"id": f"{prefix}1"}, {"id": f"{prefix}2", "boundary": True}],
            "edges": [{"id": f"{prefix}s", "tail": f"{prefix}1", "head": f"{prefix}2"}],
        },
        "elements": {
            "vertices": {f"{prefix}1": {"type": "mass", "m": 1.0}, f"{prefix}2": {"type": "mass", "m": 0.5}},
            "edges": {f"{prefix}s": {"type": "spring", "k": 1.0}},
        },
    }


def test_compose_merges_masses(tmp_path):
    pa, pb, out = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "ab.json"
    pa.write_text(json.dumps(_open_line("a", True)))
    pb.write_text(json.dumps(_open_line("b", True)))
    assert main(["compose", "--system", str(pa), "--system", str(pb), "--pair", "a2=b2", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["elements"]["vertices"]["a2"]["m"] == 1.0
    assert len(doc["graph"]["edges"]) == 2


def test_circuit_commands(capsys, tmp_path):
    assert main(["circuit", "--netlist", str(DATA / "lc_tank.cir")]) == 0
    out = tmp_path / "rc.csv"
    rc = ["circuit", "--netlist", str(DATA / "rc_driven.cir"), "--simulate", "--T", "1", "--dt", "0.01"]
    assert main(rc + ["--input", "[1, 0]", "--out", str(out)]) == 0
    assert "terminal-current sums" in capsys.readouterr().out


def test_degenerate_circuit_exit_code(tmp_path, capsys):
    p = tmp_path / "loop.cir"
    p.write_text("C1 C 1 a b\nC2 C 1 b a\n")
    assert main(["circuit", "--netlist", str(p)]) == 1
    assert "capacitor-loop" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--system", "/nonexistent.json"],
        ["analyze"],
        ["circuit"],
        ["compose", "--system", TRI],
    ],
)
def test_input_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err


def test_bad_netlist_exit_2(tmp_path):
    p = tmp_path / "bad.cir"
    p.write_text("C1 C nope a b\n")
    assert main(["circuit", "--netlist", str(p)]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "phgraph.cli", "analyze", "--system", TRI], capture_output=True, text=True)
    assert r.returncode == 0 and "Casimirs:" in r.stdout
