"""Plan reporting: delimited summaries plus rendered figures.

The pipeline's report path writes, next to the exported plan:

* report.csv   - per-stage timings and headline metrics
* needles.csv  - per-hole selection state and insertion depth
* figures/icp_convergence.png   - per-iteration MSE trace
* figures/template_schematic.png - hole grid with selected needles
* figures/slice_axial.png       - center slice with device contours

Figures use the Agg backend so the CLI works headless.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .applicator import TemplateConfig, hole_grid, obturator_mesh, template_mesh
from .mesh import mesh_plane_contours
from .pipeline import PipelineReport
from .planning import Plan
from .volume import ScalarVolume


def report_csv(report: PipelineReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["section", "key", "value"])
    for name, ms in report.stages:
        w.writerow(["stage_ms", name, f"{ms:.3f}"])
    w.writerow(["metric", "total_ms", f"{report.total_ms:.3f}"])
    w.writerow(["metric", "fre_mm", f"{report.fre_mm:.9g}"])
    w.writerow(["metric", "final_mse_mm2", f"{report.final_mse_mm2:.9g}"])
    w.writerow(["metric", "icp_iterations", report.icp_iterations])
    w.writerow(["metric", "icp_termination", report.icp_termination])
    w.writerow(["metric", "threshold_point_count", report.threshold_point_count])
    w.writerow(["metric", "selected_count", report.selected_count])
    return buf.getvalue()


def needles_csv(plan: Plan) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["hole_id", "selected", "depth_mm", "radius_mm"])
    for n in plan.needles:
        w.writerow([n.hole_id, int(n.selected), f"{n.depth_mm:.9g}", f"{n.radius_mm:.9g}"])
    return buf.getvalue()


def fig_icp_convergence(mse_trace: list[float]):
    fig, ax = plt.subplots(figsize=(6, 4))
    if mse_trace:
        ax.semilogy(np.arange(1, len(mse_trace) + 1), mse_trace, marker="o", ms=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("MSE (mm$^2$)")
    ax.set_title("ICP convergence")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return fig


def fig_template_schematic(config: TemplateConfig, plan: Plan):
    """Hole-grid schematic with the selected needles annotated."""
    depths = {n.hole_id: n for n in plan.needles}
    fig, ax = plt.subplots(figsize=(7, 7))
    half_w = config.plate_width_mm / 2.0
    half_h = config.plate_height_mm / 2.0
    ax.add_patch(plt.Rectangle((-half_w, -half_h), 2 * half_w, 2 * half_h,
                               fill=False, color="0.4", lw=1.0))
    if config.obturator_hole_radius_mm > 0:
        ax.add_patch(plt.Circle((0, 0), config.obturator_hole_radius_mm,
                                fill=False, color="0.4", lw=1.0, ls="--"))
    for hole in hole_grid(config):
        x, y = hole.entry[0], hole.entry[1]
        state = depths.get(hole.id)
        if state is not None and state.selected:
            ax.add_patch(plt.Circle((x, y), config.hole_radius_mm * 1.6, color="tab:red"))
            ax.annotate(f"{hole.id}\n{state.depth_mm:.0f}", (x, y),
                        textcoords="offset points", xytext=(0, 7),
                        ha="center", fontsize=7, color="tab:red")
        else:
            ax.add_patch(plt.Circle((x, y), config.hole_radius_mm, fill=False, color="0.6", lw=0.7))
    ax.set_aspect("equal")
    pad = config.pitch_mm
    ax.set_xlim(-half_w - pad, half_w + pad)
    ax.set_ylim(-half_h - pad, half_h + pad)
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    ax.set_title("template schematic (selected needles, depth mm)")
    fig.tight_layout()
    return fig


def fig_slice_overlay(volume: ScalarVolume, config: TemplateConfig, plan: Plan,
                      axis: str = "axial", index: int | None = None):
    """Grayscale slice with template/obturator section contours."""
    k = {"sagittal": 0, "coronal": 1, "axial": 2}[axis]
    if index is None:
        index = volume.dims[k] // 2
    if axis == "axial":
        plane = volume.voxels[:, :, index].T
        u_ax, v_ax = 0, 1
    elif axis == "sagittal":
        plane = volume.voxels[index, :, :].T
        u_ax, v_ax = 1, 2
    else:
        plane = volume.voxels[:, index, :].T
        u_ax, v_ax = 0, 2
    idx0 = np.zeros(3)
    idx0[k] = index
    offset = float(volume.index_to_world(idx0)[k])

    lo, hi = volume.world_bounds()
    extent = (lo[u_ax], hi[u_ax], lo[v_ax], hi[v_ax])
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(plane, cmap="gray", origin="lower", extent=extent)
    for mesh, color, label in (
        (template_mesh(config), "tab:blue", "template"),
        (obturator_mesh(config), "tab:green", "obturator"),
    ):
        polys = mesh_plane_contours(mesh, plan.template_pose, axis, offset)
        for i, poly in enumerate(polys):
            pts = np.asarray(poly["points"])
            if poly["closed"]:
                pts = np.vstack([pts, pts[:1]])
            ax.plot(pts[:, 0], pts[:, 1], color=color, lw=1.0,
                    label=label if i == 0 else None)
    ax.set_xlabel("u (mm)")
    ax.set_ylabel("v (mm)")
    ax.set_title(f"{axis} slice {index} with device contours")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    return fig


def render_report(out_dir, plan: Plan, report: PipelineReport,
                  config: TemplateConfig, volume: ScalarVolume | None = None) -> list[str]:
    """Write the delimited report and figures; returns the written paths."""
    out = Path(out_dir)
    fig_dir = out / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    written = []

    (out / "report.csv").write_text(report_csv(report))
    written.append(str(out / "report.csv"))
    (out / "needles.csv").write_text(needles_csv(plan))
    written.append(str(out / "needles.csv"))

    fig = fig_icp_convergence(report.mse_trace)
    fig.savefig(fig_dir / "icp_convergence.png", dpi=110)
    plt.close(fig)
    written.append(str(fig_dir / "icp_convergence.png"))

    fig = fig_template_schematic(config, plan)
    fig.savefig(fig_dir / "template_schematic.png", dpi=110)
    plt.close(fig)
    written.append(str(fig_dir / "template_schematic.png"))

    if volume is not None:
        fig = fig_slice_overlay(volume, config, plan)
        fig.savefig(fig_dir / "slice_axial.png", dpi=110)
        plt.close(fig)
        written.append(str(fig_dir / "slice_axial.png"))
    return written
