"""Command-line entry point.

Reports are plain ``key=value`` lines on stdout. Exit codes: 0 success,
1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import evaluation, synthetic, tensor_io
from .assign import AssignConfig, assignment_stats, generate_heatmaps
from .decode import Detection, decode_predictions, rotated_nms
from .errors import GghlError
from .geometry import canonicalize_obb
from .loss import finite_diff_check, total_loss

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _thread_count(args) -> int:
    if args.threads:
        return args.threads
    env = os.environ.get("GGHL_THREADS")
    if env and env.isdigit() and int(env) > 0:
        return int(env)
    return os.cpu_count() or 1


def _add_assign_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strides", type=int, nargs="+", default=[8, 16, 32])
    p.add_argument("--tau", type=float, default=3.0)
    p.add_argument("--t-iou", type=float, default=0.3)
    p.add_argument("--img-size", type=int, default=800)
    p.add_argument("--classes", type=Path, help="class-list file, one name per line")


def _config(args, num_classes: int | None = None) -> AssignConfig:
    if num_classes is None:
        if not args.classes:
            raise GghlError("--classes is required")
        num_classes = len(tensor_io.read_class_list(args.classes))
    return AssignConfig(
        strides=tuple(args.strides),
        tau=args.tau,
        t_iou=args.t_iou,
        img_size=args.img_size,
        num_classes=num_classes,
    )


def _cmd_encode(args) -> int:
    class_list = tensor_io.read_class_list(args.classes)
    cfg = _config(args, len(class_list))
    files = sorted(Path(args.annotations).glob("*.txt"))
    args.out.mkdir(parents=True, exist_ok=True)

    def work(path: Path):
        anns = tensor_io.parse_dota(path, class_list)
        labels = generate_heatmaps(anns, cfg)
        tensor_io.write_tensorset(args.out / (path.stem + ".gghlt"), labels)
        return path.stem, assignment_stats(labels, anns), len(anns)

    with ThreadPoolExecutor(max_workers=_thread_count(args)) as pool:
        results = list(pool.map(work, files))
    total_objects = sum(n for _, _, n in results)
    mismatches = sum(s.mismatch_count for _, s, _ in results)
    print(f"files={len(results)}")
    print(f"objects={total_objects}")
    print(f"mismatches={mismatches}")
    for stem, stats, _ in results:
        print(f"positives.{stem}={sum(stats.per_scale_positives)}")
    return EXIT_OK


def _cmd_loss(args) -> int:
    labels = tensor_io.read_tensorset(args.labels, "labels")
    preds = tensor_io.read_tensorset(args.preds, "predictions")
    breakdown = total_loss(labels, preds, gamma=args.gamma)
    print(f"obj_pos={breakdown.obj_pos:.9g}")
    print(f"obj_neg={breakdown.obj_neg:.9g}")
    print(f"obb={breakdown.obb:.9g}")
    print(f"cls={breakdown.cls:.9g}")
    print(f"total={breakdown.total:.9g}")
    for i, t in enumerate(breakdown.per_scale):
        print(f"scale{i + 1}.total={sum(t):.9g}")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    worst = 0.0
    for i in range(args.sets):
        labels, preds = synthetic.random_problem(args.seed + i)
        report = finite_diff_check(labels, preds, gamma=args.gamma, h=args.h)
        worst = max(worst, report.max_rel_error)
    print(f"sets={args.sets}")
    print(f"max_rel_error={worst:.6g}")
    print(f"pass={'true' if worst <= 1e-4 else 'false'}")
    return EXIT_OK if worst <= 1e-4 else EXIT_RUNTIME


def _cmd_decode(args) -> int:
    preds = tensor_io.read_tensorset(args.preds, "predictions")
    dets = rotated_nms(decode_predictions(preds, conf=args.conf), iou_thr=args.nms)
    class_list = tensor_io.read_class_list(args.classes) if args.classes else None
    for d in dets:
        coords = " ".join(format(v, ".2f") for v in d.obb.vertices.ravel())
        label = class_list[d.class_id] if class_list else str(d.class_id)
        print(f"{coords} {label} {d.score:.4f}")
    return EXIT_OK


def _parse_detections(path: Path, class_list: list[str]) -> list[Detection]:
    index = {name: i for i, name in enumerate(class_list)}
    dets = []
    for line in path.read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if not parts:
            continue
        coords = np.asarray([float(v) for v in parts[:8]]).reshape(4, 2)
        class_id = index[parts[8]] if parts[8] in index else int(parts[8])
        dets.append(Detection(canonicalize_obb(coords), class_id, float(parts[9])))
    return dets


def _cmd_eval(args) -> int:
    class_list = tensor_io.read_class_list(args.classes)
    det_path, gt_path = Path(args.dets), Path(args.gt)
    if det_path.is_dir():
        scenes = []
        for gt_file in sorted(gt_path.glob("*.txt")):
            det_file = det_path / gt_file.name
            dets = _parse_detections(det_file, class_list) if det_file.exists() else []
            scenes.append((dets, tensor_io.parse_dota(gt_file, class_list)))
    else:
        scenes = [(_parse_detections(det_path, class_list), tensor_io.parse_dota(gt_path, class_list))]
    report = evaluation.evaluate_scenes(scenes, iou_thr=args.iou)
    for c in sorted(report.per_class_ap):
        print(f"ap.{class_list[c]}={report.per_class_ap[c]:.6f}")
    print(f"map={report.mean_ap:.6f}")
    print(f"tp={report.tp}")
    print(f"fp={report.fp}")
    print(f"fn={report.fn}")
    return EXIT_OK


def _cmd_viz(args) -> int:
    labels = tensor_io.read_tensorset(args.labels, "labels")
    args.out.mkdir(parents=True, exist_ok=True)
    for i, scale in enumerate(labels.scales):
        path = args.out / f"heatmap_s{scale.stride}.png"
        tensor_io.render_heatmap_png(labels, i, path)
        print(f"scale{i + 1}.file={path}")
        print(f"scale{i + 1}.size={scale.f.shape[1]}x{scale.f.shape[0]}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    cfg = AssignConfig(num_classes=15)
    anns = synthetic.random_scene(rng, args.objects, cfg)
    generate_heatmaps(anns, cfg)  # warm-up
    times = []
    for _ in range(args.iterations):
        t0 = time.perf_counter()
        generate_heatmaps(anns, cfg)
        times.append((time.perf_counter() - t0) * 1e3)
    times.sort()
    p50 = times[len(times) // 2]
    p95 = times[int(len(times) * 0.95)]
    print(f"iterations={args.iterations}")
    print(f"objects={args.objects}")
    print(f"p50_ms={p50:.3f}")
    print(f"p95_ms={p95:.3f}")
    print(f"images_per_sec={1e3 / p50:.1f}")
    return EXIT_OK


def _cmd_stats(args) -> int:
    class_list = tensor_io.read_class_list(args.classes)
    anns = tensor_io.parse_dota(args.annotations, class_list)
    labels = tensor_io.read_tensorset(args.labels, "labels")
    stats = assignment_stats(labels, anns)
    print(f"objects={len(anns)}")
    print(f"mismatches={stats.mismatch_count}")
    for i, (p, n) in enumerate(zip(stats.per_scale_positives, stats.per_scale_negatives)):
        print(f"scale{i + 1}.positives={p}")
        print(f"scale{i + 1}.negatives={n}")
    for i, c in enumerate(stats.per_object_positive_counts):
        print(f"object{i}.positives={c}")
    print("f_histogram=" + ",".join(str(int(v)) for v in stats.f_histogram))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="gghl", description="Oriented-detection label assignment and loss toolkit")
    parser.add_argument("--threads", type=int, default=0, help="worker threads (0 = auto, env GGHL_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="annotation files to label tensor files")
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_assign_flags(p)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("loss", help="loss breakdown of labels vs predictions")
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--preds", type=Path, required=True)
    p.add_argument("--gamma", type=float, default=2.0)
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sets", type=int, default=5)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--h", type=float, default=1e-5)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("decode", help="prediction tensors to detection lines")
    p.add_argument("--preds", type=Path, required=True)
    p.add_argument("--conf", type=float, default=0.2)
    p.add_argument("--nms", type=float, default=0.45)
    p.add_argument("--classes", type=Path)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("eval", help="average precision of detections vs ground truth")
    p.add_argument("--dets", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--classes", type=Path, required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("viz", help="render label heatmaps as PNGs")
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_viz)

    p = sub.add_parser("bench", help="label-generation throughput")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objects", type=int, default=30)
    p.add_argument("--iterations", type=int, default=500)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("stats", help="assignment statistics of a label tensor file")
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--classes", type=Path, required=True)
    p.set_defaults(func=_cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except GghlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
