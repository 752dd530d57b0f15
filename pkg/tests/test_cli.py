import json
import subprocess
import sys

import numpy as np
import pytest

from fbms.cli import main
from fbms.config import RunConfig
from fbms.mesh import save_mesh
from fbms.serialize import config_hash, dumps, normalize

from conftest import shifted_disk


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_index_disk(capsys):
    code, out, _ = _run(capsys, "index", "--builtin", "flat_disk", "--resolution", "16", "--form", "area")
    assert code == 0
    assert "area: index 1, nullity 2" in out


def test_topo_catenoid(capsys):
    code, out, _ = _run(capsys, "topo", "--builtin", "critical_catenoid", "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["result"]["topology"] == {"g": 0, "m": 2, "chi": 0}
    assert doc["result"]["upsilon"] == 1


def test_report_shifted_disk_fails(tmp_path, capsys):
    p = tmp_path / "shifted.off"
    save_mesh(shifted_disk(), p)
    code, out, _ = _run(capsys, "report", "--mesh", str(p))
    assert code == 2
    assert "FAIL" in out


def test_missing_mesh_is_error(tmp_path, capsys):
    code, _, err = _run(capsys, "topo", "--mesh", str(tmp_path / "none.off"))
    assert code == 1 and "error" in err


def test_bad_config_is_error(capsys):
    code, _, err = _run(capsys, "index", "--builtin", "flat_disk", "--k", "0")
    assert code == 1


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"builtin": "flat_annulus", "resolution": 4}))
    code, out, _ = _run(capsys, "topo", "--config", str(cfg), "--resolution", "5", "--json")
    doc = json.loads(out)
    assert code == 0
    assert doc["config"]["builtin"] == "flat_annulus" and doc["config"]["resolution"] == 5


def test_unknown_config_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": 1}))
    assert _run(capsys, "topo", "--config", str(cfg))[0] == 1


def test_heat_artifacts(tmp_path, capsys):
    out, csv = tmp_path / "h.json", tmp_path / "h.csv"
    code, _, _ = _run(capsys, "heat", "--builtin", "flat_disk", "--resolution", "3",
                      "--t-grid", "0.01,1,4", "--out", str(out), "--csv", str(csv))
    doc = json.loads(out.read_text())
    assert code in (0, 2) and code == (0 if doc["pass"] else 2)
    assert doc["result"]["indb_pass"] and doc["result"]["eingb_pass"]
    lines = csv.read_text().strip().splitlines()
    assert len(lines) == 5 and lines[0].startswith("t,")


def test_envelope_fields(capsys):
    code, out, _ = _run(capsys, "bounds", "--builtin", "flat_disk", "--resolution", "6", "--json")
    doc = json.loads(out)
    assert doc["tool_version"] == "0.1.0"
    cfg = RunConfig(builtin="flat_disk", resolution=6).hashable()
    assert doc["config_sha256"] == config_hash(cfg)
    assert doc["seed"] == 0


def test_output_deterministic(tmp_path):
    outs = []
    for threads in ("1", "2"):
        p = tmp_path / f"r{threads}.json"
        env = {"FBMS_THREADS": threads, "PATH": "/usr/bin:/bin"}
        subprocess.run([sys.executable, "-m", "fbms", "sobolev", "--builtin", "flat_disk",
                        "--resolution", "6", "--samples", "10", "--out", str(p)],
                       env=env, check=False, capture_output=True)
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_normalize_rounding():
    assert normalize(0.1 + 0.2) == 0.3
    assert normalize(float("inf")) == "inf"
    assert normalize(np.int64(3)) == 3
    assert dumps({"b": 1, "a": 2}).index('"a"') < dumps({"b": 1, "a": 2}).index('"b"')
