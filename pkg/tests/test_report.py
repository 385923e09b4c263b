import csv
import io

import numpy as np

from brachyplan.applicator import TemplateConfig
from brachyplan.geometry import RigidTransform
from brachyplan.pipeline import PipelineReport
from brachyplan.planning import NeedleState, Plan
from brachyplan.report import (
    fig_icp_convergence,
    fig_template_schematic,
    needles_csv,
    render_report,
    report_csv,
)


def make_report():
    return PipelineReport(
        stages=[("load-volume", 3.2), ("landmarks", 0.1), ("icp", 120.0)],
        fre_mm=1.5e-7,
        final_mse_mm2=4.25,
        icp_iterations=17,
        icp_termination="stalled",
        mse_trace=[30.0, 10.0, 5.0, 4.25],
        threshold_point_count=9000,
        selected_count=3,
    )


def make_plan():
    return Plan(
        RigidTransform.identity(),
        (NeedleState("A1", True, 60.0, 1.65), NeedleState("A2", False, 0.0, 1.65)),
        {"volume_id": "abc"},
    )


def test_report_csv_rows():
    rows = list(csv.reader(io.StringIO(report_csv(make_report()))))
    assert rows[0] == ["section", "key", "value"]
    stages = [r[1] for r in rows if r[0] == "stage_ms"]
    assert stages == ["load-volume", "landmarks", "icp"]
    metrics = {r[1]: r[2] for r in rows if r[0] == "metric"}
    assert metrics["icp_iterations"] == "17"
    assert metrics["selected_count"] == "3"


def test_needles_csv_rows():
    rows = list(csv.reader(io.StringIO(needles_csv(make_plan()))))
    assert rows[0] == ["hole_id", "selected", "depth_mm", "radius_mm"]
    assert rows[1] == ["A1", "1", "60", "1.65"]
    assert rows[2][1] == "0"


def test_figures_render():
    fig = fig_icp_convergence(make_report().mse_trace)
    assert fig.axes
    fig2 = fig_template_schematic(TemplateConfig(), make_plan())
    assert fig2.axes


def test_render_report_writes_files(tmp_path, phantom_case):
    written = render_report(tmp_path, make_plan(), make_report(), TemplateConfig(),
                            phantom_case["scene"].volume)
    for path in written:
        from pathlib import Path

        assert Path(path).exists()
    assert (tmp_path / "figures" / "slice_axial.png").stat().st_size > 1000
