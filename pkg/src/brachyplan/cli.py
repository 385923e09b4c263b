"""Command-line interface.

Subcommands mirror the workflow stages: phantom, register, icp,
extract-surface, select, pipeline, serve. Exit codes: 0 success,
2 input error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .applicator import TemplateConfig
from .errors import ConflictError, InputError, SchemaError, StageError
from .geometry import RigidTransform, UnitQuaternion
from .isosurface import marching_cubes
from .jsonutil import canonical_bytes
from .nrrdio import read_volume, write_volume
from .phantom import PhantomSpec, generate_phantom, ground_truth_selection, load_phantom_spec
from .pipeline import run_pipeline
from .planning import select_needles
from .registration import CorrespondencePairs, absolute_orientation, fiducial_registration_error
from .stlio import read_stl, write_stl
from .volume import RoiBox

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STAGE = 3


def _load_config(path: str | None) -> TemplateConfig:
    if path is None:
        return TemplateConfig()
    return TemplateConfig.from_jsonable(json.loads(Path(path).read_text()))


def _load_landmarks(path: str) -> CorrespondencePairs:
    return CorrespondencePairs.from_jsonable(json.loads(Path(path).read_text()))


def _load_pose(path: str) -> RigidTransform:
    doc = json.loads(Path(path).read_text())
    return RigidTransform(
        UnitQuaternion.from_array(np.asarray(doc["rotation_wxyz"], dtype=np.float64)),
        np.asarray(doc["translation_mm"], dtype=np.float64),
    )


def _pose_doc(t: RigidTransform, **extra) -> dict:
    q = t.rotation
    doc = {
        "rotation_wxyz": [float(q.w), float(q.x), float(q.y), float(q.z)],
        "translation_mm": [float(x) for x in t.translation],
    }
    doc.update(extra)
    return doc


def _parse_roi(text: str | None) -> RoiBox | None:
    if text is None:
        return None
    parts = [int(x) for x in text.replace(",", " ").split()]
    if len(parts) != 6:
        raise InputError(f"--roi needs 6 integers (x0 y0 z0 x1 y1 z1), got {text!r}")
    return RoiBox(tuple(parts[:3]), tuple(parts[3:]))


def cmd_phantom(args) -> int:
    if args.spec:
        spec = load_phantom_spec(Path(args.spec).read_bytes())
    else:
        spec = PhantomSpec()
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    scene = generate_phantom(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "volume.nrrd").write_bytes(write_volume(scene.volume))
    (out / "tumor_label.nrrd").write_bytes(write_volume(scene.tumor_label))
    (out / "tumor_mesh.stl").write_bytes(write_stl(scene.tumor_mesh))
    (out / "landmarks.json").write_bytes(canonical_bytes(scene.landmark_truth.to_jsonable()))
    (out / "template_config.json").write_bytes(canonical_bytes(spec.config.to_jsonable()))
    (out / "phantom_spec.json").write_bytes(canonical_bytes(spec.to_jsonable()))
    truth = {
        "pose": _pose_doc(scene.true_pose),
        "tumor_center_mm": [float(x) for x in scene.tumor_center],
        "tumor_radius_mm": float(scene.tumor_radius),
        "ground_truth_selection_depth60": ground_truth_selection(scene, 60.0),
    }
    (out / "truth.json").write_bytes(canonical_bytes(truth))
    print(f"phantom written to {out}")
    return EXIT_OK


def cmd_register(args) -> int:
    pairs = _load_landmarks(args.landmarks)
    pose = absolute_orientation(pairs)
    fre = fiducial_registration_error(pose, pairs)
    doc = _pose_doc(pose, fre_mm=fre)
    Path(args.out).write_bytes(canonical_bytes(doc))
    print(f"registered {len(pairs)} landmark pairs, FRE {fre:.6g} mm -> {args.out}")
    return EXIT_OK


def cmd_icp(args) -> int:
    from .pipeline import refine_pose

    volume = read_volume(Path(args.volume).read_bytes())
    config = _load_config(args.config)
    init = _load_pose(args.init)
    roi = _parse_roi(args.roi)
    from .volume import crop_roi, threshold_points

    working = crop_roi(volume, roi) if roi else volume
    points = threshold_points(working, args.threshold)
    if len(points) == 0:
        raise StageError("threshold", f"threshold {args.threshold} selects no voxels")
    pose, result = refine_pose(init, points, config)
    doc = _pose_doc(pose, icp=result.summary(), mse_trace=[float(m) for m in result.mse_trace])
    Path(args.out).write_bytes(canonical_bytes(doc))
    print(
        f"ICP: {result.iterations} iterations ({result.termination}), "
        f"final MSE {result.final_mse:.6g} mm^2 -> {args.out}"
    )
    return EXIT_OK


def cmd_extract_surface(args) -> int:
    volume = read_volume(Path(args.volume).read_bytes())
    mesh = marching_cubes(volume, args.threshold)
    Path(args.out).write_bytes(write_stl(mesh))
    print(f"isosurface at {args.threshold}: {mesh.n_vertices} vertices, "
          f"{mesh.n_triangles} triangles -> {args.out}")
    return EXIT_OK


def cmd_select(args) -> int:
    from .collision import build_obb_tree

    config = _load_config(args.config)
    pose = _load_pose(args.pose)
    tumor_mesh = _load_tumor_mesh(args)
    tree = build_obb_tree(tumor_mesh)
    selected = select_needles(config, pose, args.depth, tree)
    doc = {"depth_mm": float(args.depth), "selected": selected}
    Path(args.out).write_bytes(canonical_bytes(doc))
    print(f"{len(selected)} needles reach the tumor at depth {args.depth} mm -> {args.out}")
    return EXIT_OK


def _load_tumor_mesh(args):
    if getattr(args, "tumor_mesh", None):
        return read_stl(Path(args.tumor_mesh).read_bytes())
    if getattr(args, "tumor_label", None):
        label = read_volume(Path(args.tumor_label).read_bytes())
        mesh = marching_cubes(label, 0.5)
        if mesh.n_triangles == 0:
            raise InputError("tumor label volume produced an empty surface")
        return mesh
    raise InputError("provide --tumor-mesh or --tumor-label")


def cmd_pipeline(args) -> int:
    config = _load_config(args.config)
    landmarks = _load_landmarks(args.landmarks)
    tumor_mesh = read_stl(Path(args.tumor_mesh).read_bytes()) if args.tumor_mesh else None
    plan, report = run_pipeline(
        volume_path=args.volume,
        config=config,
        landmarks=landmarks,
        threshold=args.threshold,
        roi=_parse_roi(args.roi),
        tumor_mesh=tumor_mesh,
        tumor_label_path=args.tumor_label,
        depth=args.depth,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .planning import export_plan

    (out / "plan.json").write_bytes(export_plan(plan))
    from .report import render_report

    volume = read_volume(Path(args.volume).read_bytes())
    written = render_report(out, plan, report, config, volume)
    print(f"plan: {len(plan.selected_ids())} needles selected; FRE {report.fre_mm:.4g} mm; "
          f"ICP {report.icp_iterations} iters; total {report.total_ms:.0f} ms")
    for path in [str(out / 'plan.json')] + written:
        print(f"  {path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import serve

    serve(bind=args.bind, ui_dir=args.ui)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brachyplan",
        description="Template registration and virtual needle planning engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic ground-truth phantom")
    p.add_argument("--spec", help="phantom spec JSON (defaults applied when omitted)")
    p.add_argument("--seed", type=int, help="override the spec's random seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("register", help="closed-form landmark registration")
    p.add_argument("--landmarks", required=True, help="JSON array of {source, target} pairs (mm)")
    p.add_argument("--out", required=True, help="output transform JSON")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("icp", help="ICP refinement against thresholded voxels")
    p.add_argument("--volume", required=True)
    p.add_argument("--config", help="template config JSON")
    p.add_argument("--init", required=True, help="initial transform JSON")
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--roi", help="x0 y0 z0 x1 y1 z1 (inclusive index box)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_icp)

    p = sub.add_parser("extract-surface", help="marching cubes isosurface to STL")
    p.add_argument("--volume", required=True)
    p.add_argument("--threshold", type=float, required=True, help="isovalue")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract_surface)

    p = sub.add_parser("select", help="collision-based needle selection")
    p.add_argument("--config", help="template config JSON")
    p.add_argument("--pose", required=True, help="template pose JSON")
    p.add_argument("--tumor-mesh", help="tumor STL")
    p.add_argument("--tumor-label", help="tumor label NRRD")
    p.add_argument("--depth", type=float, default=60.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("pipeline", help="end-to-end: volume + landmarks -> plan + report")
    p.add_argument("--volume", required=True)
    p.add_argument("--config", help="template config JSON")
    p.add_argument("--landmarks", required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--roi")
    p.add_argument("--tumor-mesh")
    p.add_argument("--tumor-label")
    p.add_argument("--depth", type=float, default=60.0)
    p.add_argument("--out", required=True, help="output directory (plan + report + figures)")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("serve", help="run the HTTP planning service")
    p.add_argument("--bind", default="127.0.0.1:8077")
    p.add_argument("--ui", help="directory of static UI assets to serve")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, SchemaError, ConflictError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except StageError as e:
        print(f"stage failure: {e}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
