import json
import subprocess
import sys

import pytest

from ecmrepair.cli import PipelineReport, main
from ecmrepair.ecm_grid import build_q_grid, dump_grid, load_grid
from ecmrepair.image_io import serialize_coords, serialize_voxgrid
from ecmrepair.repair import repair_grid

from corpus import EDGE_PAIR, SINGLE, TWO_DIAG

FIELDS = [
    "input_path", "voxels", "cells_q", "cells_p", "critical_count", "critical_classes_found",
    "betti_q", "betti_p", "euler_q", "euler_p", "e1_violations_q", "e2_violations_q",
    "well_composed_p", "bp_element_count", "timings_ms",
]


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, img in (("two_diag", TWO_DIAG), ("single", SINGLE), ("edge", EDGE_PAIR)):
        p = tmp_path / f"{name}.vox"
        p.write_bytes(serialize_voxgrid(img))
        out[name] = p
    c = tmp_path / "two_diag.csv"
    c.write_bytes(serialize_coords(TWO_DIAG))
    out["csv"] = c
    return out


def test_verify_two_diag(files, tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", str(files["two_diag"]), "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert list(data) == FIELDS
    assert data["critical_count"] == 1
    assert data["well_composed_p"] is True
    assert data["betti_q"] == data["betti_p"] == [1, 0, 0]
    assert data["euler_q"] == data["euler_p"] == 1
    assert data["e2_violations_q"] == 1 and data["e1_violations_q"] == 0


def test_verify_deterministic_apart_from_timings(files, tmp_path):
    runs = []
    for threads in ("1", "4", "1"):
        out = tmp_path / f"r{len(runs)}.json"
        main(["verify", str(files["two_diag"]), "--threads", threads, "--out", str(out)])
        data = json.loads(out.read_text())
        data.pop("timings_ms")
        runs.append(data)
    assert runs[0] == runs[1] == runs[2]


def test_detect(files, capsys):
    assert main(["detect", str(files["single"])]) == 0
    assert capsys.readouterr().out == ""
    assert main(["detect", str(files["csv"])]) == 0
    assert capsys.readouterr().out == "2 2 2\n"
    assert main(["detect", str(files["edge"]), "--format", "voxgrid"]) == 0
    assert capsys.readouterr().out == "2 2 -2\n2 2 2\n"


def test_repair_and_dump_grid_roundtrip(files, tmp_path):
    a, b = tmp_path / "a.grid", tmp_path / "b.grid"
    assert main(["repair", str(files["edge"]), str(a)]) == 0
    assert main(["dump-grid", str(files["edge"]), "p", "--out", str(b), "--threads", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()
    direct = repair_grid(build_q_grid(EDGE_PAIR)).g_p
    assert dump_grid(load_grid(a.read_bytes())) == dump_grid(direct)
    q = tmp_path / "q.grid"
    main(["dump-grid", str(files["edge"]), "q", str(q)])
    assert q.read_bytes() == dump_grid(build_q_grid(EDGE_PAIR))


def test_betti_and_info(files, capsys):
    assert main(["betti", str(files["two_diag"])]) == 0
    assert capsys.readouterr().out == "q 1 0 0\np 1 0 0\n"
    assert main(["info", str(files["two_diag"])]) == 0
    assert "critical 1" in capsys.readouterr().out


def test_mesh(files, tmp_path):
    out = tmp_path / "m.obj"
    assert main(["mesh", str(files["single"]), "q", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "v -0.50 -0.50 -0.50"
    assert sum(1 for line in lines if line.startswith("f ")) == 12


def test_exit_codes(files, tmp_path, capsys):
    assert main(["detect", str(tmp_path / "missing.vox")]) == 1
    bad = tmp_path / "bad.vox"
    bad.write_text("voxgrid 1 1 1\n7\n")
    assert main(["detect", str(bad)]) == 1
    assert "invalid token" in capsys.readouterr().err
    assert main(["detect", str(tmp_path / "x.dat")]) == 1
    # the edge pair hits the B_P collision: report written, exit 2
    out = tmp_path / "e.json"
    assert main(["verify", str(files["edge"]), str(out)]) == 2
    assert "invariant violation" in capsys.readouterr().err
    assert json.loads(out.read_text())["well_composed_p"] is True


def test_violations_listed_when_not_well_composed():
    r = PipelineReport("x", 0, [0] * 4, [0] * 4, 0, [], [0] * 3, [0] * 3, 0, 0, 0, 0, False, 0,
                       violations=[{"kind": "E2", "key": [2, 2, 2]}])
    data = json.loads(r.to_json())
    assert data["violations"] == [{"kind": "E2", "key": [2, 2, 2]}]
    r.violations = None
    assert "violations" not in json.loads(r.to_json())


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "ecmrepair", "detect", str(files["csv"])],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == "2 2 2\n"
