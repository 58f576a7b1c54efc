import json
import subprocess
import sys

import numpy as np
import pytest

from dnchar.cli import main
from dnchar.meshes import mesh_disk, write_off
from dnchar.serialize import load_operator, save_operator
from dnchar.solvers import dn_disk
from dnchar.boundary import GridSpec


@pytest.fixture
def disk_json(tmp_path):
    path = tmp_path / "dn.json"
    assert main(["solve", "--surface", "disk", "--modes", "16", "--out", str(path)]) == 0
    return path


def test_solve_writes_loadable_operator(disk_json):
    op = load_operator(disk_json)
    assert np.array_equal(op.matrix, dn_disk(GridSpec(16)).matrix)
    d = json.loads(disk_json.read_text())
    assert d["grid"]["modes"] == 16
    assert d["orientation"] == 1 and len(d["matrix"]) == 33 * 33


def test_operator_roundtrip_is_byte_identical(disk_json, tmp_path):
    again = tmp_path / "again.json"
    save_operator(load_operator(disk_json), again)
    assert again.read_bytes() == disk_json.read_bytes()


def test_sidecar_for_large_grids(tmp_path):
    path = tmp_path / "big.json"
    assert main(["solve", "--modes", "70", "--out", str(path)]) == 0
    side = tmp_path / "big.json.bin"
    assert side.stat().st_size == 16 * 141 * 141
    assert "matrix_file" in json.loads(path.read_text())
    assert np.array_equal(load_operator(path).matrix, dn_disk(GridSpec(70)).matrix)


def test_check_report_deterministic(disk_json, tmp_path, capsys):
    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert main(["check", str(disk_json), "--report", str(r1), "--seed", "4"]) == 0
    assert main(["check", str(disk_json), "--report", str(r2), "--seed", "4"]) == 0
    assert r1.read_bytes() == r2.read_bytes()
    rep = json.loads(r1.read_text())
    assert rep["verdict"] == "pass"
    assert "verdict: pass" in capsys.readouterr().err


def test_check_failing_operator_exits_one(tmp_path):
    op = dn_disk(GridSpec(16))
    mat = op.matrix.copy()
    mat[16 - 2, 16 + 1] += 0.05
    mat[16 + 2, 16 - 1] += 0.05
    path = tmp_path / "bad.json"
    save_operator(op.with_matrix(mat), path)
    assert main(["check", str(path), "--report", str(tmp_path / "r.json")]) == 1


def test_topology_and_reconstruct(disk_json, tmp_path):
    topo = tmp_path / "topo.json"
    assert main(["topology", str(disk_json), "--out", str(topo)]) == 0
    assert json.loads(topo.read_text())["genus"] == 0
    csv, svg, summ = tmp_path / "r.csv", tmp_path / "r.svg", tmp_path / "s.json"
    assert main(["reconstruct", str(disk_json), "--grid", "64", "--out", str(csv),
                 "--svg", str(svg), "--summary", str(summ)]) == 0
    lines = csv.read_text().splitlines()
    assert lines[0] == "x,y,d" and len(lines) == 64 * 64 + 1
    assert {ln.rsplit(",", 1)[1] for ln in lines[1:]} == {"0", "1"}
    assert svg.read_text().startswith("<svg")
    assert json.loads(summ.read_text())["multiplicity"] == 1


def test_solve_from_off_mesh(tmp_path):
    off = tmp_path / "disk.off"
    write_off(mesh_disk(0.1), off)
    out = tmp_path / "fem.json"
    assert main(["solve", "--surface", str(off), "--modes", "8", "--out", str(out)]) == 0
    op = load_operator(out)
    assert op.meta["source"] == "fem" and op.real_flag


def test_exit_codes(tmp_path, disk_json):
    garbage = tmp_path / "garbage.json"
    garbage.write_text("{not json")
    assert main(["check", str(garbage)]) == 65
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"format": "something-else"}))
    assert main(["topology", str(wrong)]) == 65
    assert main(["check", str(tmp_path / "missing.json")]) == 65
    assert main(["frobnicate"]) == 64
    assert main(["solve"]) == 64
    assert main(["solve", "--surface", "klein", "--out", str(tmp_path / "x.json")]) == 64
    assert main(["check", str(disk_json), "--threads", "0"]) == 64
    zero = tmp_path / "zero.json"
    save_operator(dn_disk(GridSpec(8)).with_matrix(np.zeros((17, 17), complex)), zero)
    assert main(["topology", str(zero)]) == 70


def test_console_script(disk_json):
    out = subprocess.run([sys.executable, "-m", "dnchar.cli", "topology", str(disk_json),
                          "--json-indent", "-1"], capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["r"] == 0
    assert "\n" not in out.stdout.strip()
