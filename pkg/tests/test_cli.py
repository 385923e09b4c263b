import json
from pathlib import Path

import numpy as np
import pytest

from brachyplan.cli import main
from brachyplan.jsonutil import canonical_bytes
from brachyplan.planning import import_plan
from brachyplan.stlio import read_stl


def test_phantom_command(tmp_path):
    out = tmp_path / "ph"
    assert main(["phantom", "--out", str(out), "--seed", "3"]) == 0
    for name in ("volume.nrrd", "tumor_label.nrrd", "tumor_mesh.stl",
                 "landmarks.json", "template_config.json", "truth.json", "phantom_spec.json"):
        assert (out / name).exists(), name


def test_register_command(tmp_path, phantom_case):
    out = tmp_path / "t.json"
    rc = main(["register", "--landmarks", str(phantom_case["dir"] / "landmarks.json"),
               "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["fre_mm"] < 1e-6
    assert len(doc["rotation_wxyz"]) == 4


def test_icp_command(tmp_path, phantom_case):
    init = tmp_path / "init.json"
    main(["register", "--landmarks", str(phantom_case["dir"] / "landmarks.json"),
          "--out", str(init)])
    out = tmp_path / "refined.json"
    rc = main(["icp", "--volume", str(phantom_case["dir"] / "volume.nrrd"),
               "--config", str(phantom_case["dir"] / "template_config.json"),
               "--init", str(init), "--threshold", "500", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["icp"]["iterations"] >= 1
    assert len(doc["mse_trace"]) == doc["icp"]["iterations"]


def test_extract_surface_command(tmp_path, phantom_case):
    out = tmp_path / "surface.stl"
    rc = main(["extract-surface", "--volume", str(phantom_case["dir"] / "tumor_label.nrrd"),
               "--threshold", "0.5", "--out", str(out)])
    assert rc == 0
    mesh = read_stl(out.read_bytes())
    assert mesh.n_triangles > 0


def test_select_command(tmp_path, phantom_case):
    pose = tmp_path / "pose.json"
    main(["register", "--landmarks", str(phantom_case["dir"] / "landmarks.json"),
          "--out", str(pose)])
    out = tmp_path / "sel.json"
    rc = main(["select", "--config", str(phantom_case["dir"] / "template_config.json"),
               "--pose", str(pose), "--tumor-mesh", str(phantom_case["dir"] / "tumor_mesh.stl"),
               "--depth", "70", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert isinstance(doc["selected"], list)


def test_pipeline_command_writes_plan_and_report(tmp_path, phantom_case):
    out = tmp_path / "plandir"
    rc = main(["pipeline",
               "--volume", str(phantom_case["dir"] / "volume.nrrd"),
               "--config", str(phantom_case["dir"] / "template_config.json"),
               "--landmarks", str(phantom_case["dir"] / "landmarks.json"),
               "--threshold", "500",
               "--tumor-mesh", str(phantom_case["dir"] / "tumor_mesh.stl"),
               "--depth", "70",
               "--out", str(out)])
    assert rc == 0
    plan = import_plan((out / "plan.json").read_bytes())
    assert len(plan.selected_ids()) > 0
    assert (out / "report.csv").read_text().startswith("section,key,value")
    assert (out / "needles.csv").exists()
    for fig in ("icp_convergence.png", "template_schematic.png", "slice_axial.png"):
        path = out / "figures" / fig
        assert path.exists() and path.stat().st_size > 1000


def test_missing_file_exits_2(tmp_path):
    rc = main(["register", "--landmarks", str(tmp_path / "nope.json"),
               "--out", str(tmp_path / "out.json")])
    assert rc == 2


def test_bad_landmark_count_exits_2(tmp_path):
    bad = tmp_path / "two.json"
    bad.write_bytes(canonical_bytes([
        {"source": [0, 0, 0], "target": [0, 0, 0]},
        {"source": [1, 0, 0], "target": [1, 0, 0]},
    ]))
    rc = main(["register", "--landmarks", str(bad), "--out", str(tmp_path / "o.json")])
    assert rc == 2


def test_stage_failure_exits_3(tmp_path, phantom_case):
    init = tmp_path / "init.json"
    main(["register", "--landmarks", str(phantom_case["dir"] / "landmarks.json"),
          "--out", str(init)])
    rc = main(["icp", "--volume", str(phantom_case["dir"] / "volume.nrrd"),
               "--init", str(init), "--threshold", "1e9",
               "--out", str(tmp_path / "r.json")])
    assert rc == 3


def test_pipeline_without_tumor_exits_3(tmp_path, phantom_case):
    rc = main(["pipeline",
               "--volume", str(phantom_case["dir"] / "volume.nrrd"),
               "--landmarks", str(phantom_case["dir"] / "landmarks.json"),
               "--threshold", "500",
               "--out", str(tmp_path / "p")])
    assert rc == 3
