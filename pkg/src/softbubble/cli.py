"""Command-line entry points for the simulator and experiment runners."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io as sbio
from .classify import (
    DatasetManifest,
    NearestCentroidClassifier,
    PrototypeClassifier,
    degrade_resolution,
    evaluate,
    fit_on_manifest,
    generate_dataset,
    write_metrics_csv,
)
from .config import load_config
from .geometry import DepthImage
from .membrane import rest_shape, solve_membrane, build_obstacle
from .objects import (
    ObjectLibrary,
    six_object_library,
    surface_cloud,
    three_cube_library,
)
from .pose import PoseTracker, estimate_pose
from .render import apply_noise, render_depth
from .scenarios import (
    PressScenario,
    SortScenario,
    frustum_pose_experiment,
    patch_in_world,
    run_press,
    run_sort,
)
from .touch import capture_reference, extract_contact, is_touch


def _library(name: str) -> ObjectLibrary:
    if name == "six_object":
        return six_object_library()
    if name == "three_cube":
        return three_cube_library()
    raise SystemExit(f"unknown object library: {name}")


def _pose_log_writer(path):
    f = open(path, "w", newline="")
    w = csv.writer(f)
    w.writerow(
        [
            "frame",
            "timestamp",
            "qw",
            "qx",
            "qy",
            "qz",
            "tx",
            "ty",
            "tz",
            "fitness",
            "inlier_fraction",
            "init_index",
            "success",
        ]
    )
    return f, w


def _write_pose_row(w, frame, timestamp, est):
    if est.success:
        q = est.pose.quat
        t = est.pose.translation
        w.writerow(
            [
                frame,
                f"{timestamp:.3f}",
                *(f"{x:.9f}" for x in q),
                *(f"{x:.6f}" for x in t),
                f"{est.fitness:.6f}",
                f"{est.inlier_fraction:.6f}",
                est.init_index,
                1,
            ]
        )
    else:
        w.writerow([frame, f"{timestamp:.3f}"] + ["nan"] * 9 + [-1, 0])


def cmd_rest(args):
    cfg = load_config(args.config, args.seed)
    rig = cfg.rig()
    img = render_depth(rig, rest_shape(rig.bubble))
    if not cfg.noise.disabled():
        img = apply_noise(img, cfg.noise, rig.camera)
    sbio.write_pgm16(img, args.out)
    print(f"wrote {args.out}")


def cmd_press(args):
    cfg = load_config(args.config, args.seed)
    lib = _library(args.library)
    if args.object not in lib.meshes:
        raise SystemExit(f"unknown object {args.object!r} in library {lib.name}")
    scen = PressScenario(
        args.object, press_depth=args.depth, frames=args.frames, seed=cfg.seed
    )
    res = run_press(scen, lib, cfg.rig(), cfg.noise, cfg.touch)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, (img, patch) in enumerate(zip(res.frames, res.patches)):
        fname = f"frame_{k:04d}.pgm"
        sbio.write_pgm16(img, out / fname)
        if patch is not None and len(patch.points):
            sbio.write_ply(patch.cloud(), out / f"patch_{k:04d}.ply", patch.labels)
        entries.append(
            {
                "frame": k,
                "file": fname,
                "touch": bool(res.touch[k]),
                "pose_quat": list(res.poses[k].quat),
                "pose_translation": list(res.poses[k].translation),
            }
        )
    (out / "press_manifest.json").write_text(json.dumps(entries, indent=2) + "\n")
    print(f"wrote {len(entries)} frames to {out}")


def cmd_dataset_gen(args):
    cfg = load_config(args.config, args.seed)
    lib = _library(args.library)
    manifest = generate_dataset(
        lib,
        args.train if args.train else cfg.dataset.per_class_train,
        args.val if args.val else cfg.dataset.per_class_val,
        cfg.seed,
        args.out,
        cfg.rig(),
        cfg.noise,
        cfg.touch,
    )
    print(f"wrote {len(manifest.entries)} samples to {args.out}")


def _classifier_factory(cfg, baseline):
    if baseline == "centroid":
        return lambda: NearestCentroidClassifier(cfg.classifier.feature_size)
    return PrototypeClassifier


def cmd_classify_train(args):
    cfg = load_config(args.config, args.seed)
    manifest = DatasetManifest.load(Path(args.dataset) / "manifest.json")
    clf = fit_on_manifest(
        manifest,
        args.dataset,
        args.level,
        _classifier_factory(cfg, args.baseline),
    )
    clf.save(args.out)
    print(f"fitted {len(clf.classes)} classes at N={args.level}; wrote {args.out}")


def cmd_classify_eval(args):
    cfg = load_config(args.config, args.seed)
    manifest = DatasetManifest.load(Path(args.dataset) / "manifest.json")
    levels = [int(x) for x in args.levels.split(",")]
    rows = evaluate(
        manifest,
        args.dataset,
        levels,
        _classifier_factory(cfg, args.baseline),
    )
    write_metrics_csv(rows, args.out)
    for dataset, level, split, acc, n in rows:
        print(f"{dataset} N={level} {split} top1={acc:.4f} (n={n})")


def cmd_pose_estimate(args):
    cfg = load_config(args.config, args.seed)
    if not 1 <= args.inits <= 12:
        raise SystemExit("--inits must lie in 1..12")
    lib = six_object_library()
    model = surface_cloud(lib.meshes[args.object], seed=cfg.seed)
    records = frustum_pose_experiment(
        lib,
        model,
        n_axes=args.axes,
        press_depth=args.depth,
        n_inits=args.inits,
        seed=cfg.seed,
        rig=cfg.rig(),
        noise=cfg.noise,
        params=cfg.icp,
        label=args.object,
    )
    f, w = _pose_log_writer(args.out)
    with f:
        for k, rec in enumerate(records):
            _write_pose_row(w, k, 0.0, rec.estimate)
    ok = [r for r in records if r.estimate.success]
    if ok:
        terr = float(np.median([r.translation_error for r in ok]))
        rerr = float(np.median([r.rotation_error_deg for r in ok]))
        print(
            f"{len(ok)}/{len(records)} estimates; median errors "
            f"{terr:.2f} mm / {rerr:.2f} deg; log in {args.out}"
        )
    else:
        print("no successful estimates")


def cmd_track(args):
    cfg = load_config(args.config, args.seed)
    lib = six_object_library()
    rig = cfg.rig()
    model = surface_cloud(lib.meshes["prism"], seed=cfg.seed)
    tracker = PoseTracker(model, cfg.icp)
    f, w = _pose_log_writer(args.out)
    with f:
        for k in range(args.frames):
            scen = PressScenario(
                "prism",
                yaw_deg=args.rate_deg * k,
                press_depth=args.depth,
                frames=2,
                seed=cfg.seed + k,
            )
            res = run_press(scen, lib, rig, cfg.noise, cfg.touch)
            patch = res.patches[-1]
            if patch is None:
                est = tracker.step(patch_in_world(extract_empty(), rig))
            else:
                world_patch = patch_in_world(patch, rig)
                est = (
                    tracker.initialize(world_patch)
                    if tracker.state.last is None
                    else tracker.step(world_patch)
                )
            _write_pose_row(w, k, k / 2.0, est)
    print(f"tracked {args.frames} frames; log in {args.out}")


def extract_empty():
    from .touch import ContactPatch

    return ContactPatch(
        np.zeros((0, 3)), np.zeros(0, dtype=np.int64), np.zeros((1, 1), dtype=bool)
    )


def cmd_sort_demo(args):
    cfg = load_config(args.config, args.seed)
    lib = six_object_library()
    clf = (
        NearestCentroidClassifier.load(args.model)
        if args.baseline == "centroid"
        else PrototypeClassifier.load(args.model)
    )
    labels = sorted(lib.meshes)
    zones = {
        lab: (200.0 * math.cos(2 * math.pi * i / len(labels)),
              200.0 * math.sin(2 * math.pi * i / len(labels)))
        for i, lab in enumerate(labels)
    }
    scen = SortScenario(labels, zones, seed=cfg.seed)
    rows = run_sort(scen, lib, clf, cfg.rig(), cfg.noise)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["label", "predicted", "final_x", "final_y", "in_correct_zone"])
        for r in rows:
            w.writerow(
                [r.label, r.predicted, f"{r.final_position[0]:.1f}",
                 f"{r.final_position[1]:.1f}", int(r.in_correct_zone)]
            )
    correct = sum(r.label == r.predicted for r in rows)
    print(f"sorted {len(rows)} objects, {correct} classified correctly; {args.out}")


def build_parser():
    p = argparse.ArgumentParser(prog="softbubble", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="TOML run configuration")
        sp.add_argument("--seed", type=int, default=None, help="global seed override")
        return sp

    sp = common(sub.add_parser("rest", help="render a no-contact depth frame"))
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_rest)

    sp = common(sub.add_parser("press", help="run a press trajectory"))
    sp.add_argument("--library", default="six_object")
    sp.add_argument("--object", default="frustum")
    sp.add_argument("--depth", type=float, default=20.0)
    sp.add_argument("--frames", type=int, default=5)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_press)

    ds = sub.add_parser("dataset", help="dataset commands")
    dsub = ds.add_subparsers(dest="subcommand", required=True)
    sp = common(dsub.add_parser("gen", help="generate a simulated dataset"))
    sp.add_argument("--library", default="six_object")
    sp.add_argument("--train", type=int, default=None, help="per-class train count")
    sp.add_argument("--val", type=int, default=None, help="per-class val count")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_dataset_gen)

    cl = sub.add_parser("classify", help="classifier commands")
    csub = cl.add_subparsers(dest="subcommand", required=True)
    sp = common(csub.add_parser("train", help="fit the baseline classifier"))
    sp.add_argument("--dataset", required=True, help="dataset directory")
    sp.add_argument("--level", type=int, default=0, help="resolution level N")
    sp.add_argument("--baseline", choices=("prototype", "centroid"), default="prototype")
    sp.add_argument("--out", required=True, help="model file (npz)")
    sp.set_defaults(func=cmd_classify_train)
    sp = common(csub.add_parser("eval", help="accuracy vs resolution level"))
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--levels", default="0,1,2,3,4,5")
    sp.add_argument("--baseline", choices=("prototype", "centroid"), default="prototype")
    sp.add_argument("--out", required=True, help="metrics CSV")
    sp.set_defaults(func=cmd_classify_eval)

    po = sub.add_parser("pose", help="pose commands")
    psub = po.add_subparsers(dest="subcommand", required=True)
    sp = common(psub.add_parser("estimate", help="cone-press pose experiment"))
    sp.add_argument("--object", default="frustum")
    sp.add_argument("--axes", type=int, default=10)
    sp.add_argument("--depth", type=float, default=40.0)
    sp.add_argument("--inits", type=int, default=12)
    sp.add_argument("--out", required=True, help="pose log CSV")
    sp.set_defaults(func=cmd_pose_estimate)

    sp = common(sub.add_parser("track", help="track a rotating prism"))
    sp.add_argument("--frames", type=int, default=10)
    sp.add_argument("--rate-deg", type=float, default=5.0, help="yaw per frame")
    sp.add_argument("--depth", type=float, default=35.0)
    sp.add_argument("--out", required=True, help="pose log CSV")
    sp.set_defaults(func=cmd_track)

    sp = common(sub.add_parser("sort-demo", help="press-classify-push sorting"))
    sp.add_argument("--model", required=True, help="fitted classifier npz")
    sp.add_argument("--baseline", choices=("prototype", "centroid"), default="prototype")
    sp.add_argument("--out", required=True, help="sort report CSV")
    sp.set_defaults(func=cmd_sort_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
