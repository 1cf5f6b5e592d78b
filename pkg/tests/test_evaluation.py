import numpy as np
import pytest

from gghl import synthetic
from gghl.assign import ObbAnnotation
from gghl.decode import Detection
from gghl.evaluation import average_precision, evaluate_scenes
from gghl.geometry import polygon_iou


def scene(rng, n=10, classes=3, img=400):
    anns = []
    for _ in range(n):
        obb = synthetic.random_obb(rng, img_size=img, min_side=20, max_side=80)
        anns.append(ObbAnnotation(obb.vertices, int(rng.integers(classes))))
    return anns


def perfect_dets(anns, rng):
    return [
        Detection(synthetic.canonicalize_obb(a.vertices), a.class_id, float(rng.uniform(0.5, 1.0)))
        for a in anns
    ]


class TestAveragePrecision:
    def test_perfect_detections_full_ap(self, rng):
        anns = scene(rng)
        report = average_precision(perfect_dets(anns, rng), anns)
        assert report.mean_ap == 1.0
        assert all(ap == 1.0 for ap in report.per_class_ap.values())
        assert report.fp == 0 and report.fn == 0

    def test_no_detections_zero_ap(self, rng):
        anns = scene(rng)
        report = average_precision([], anns)
        assert report.mean_ap == 0.0
        assert report.fn == len(anns)

    def test_false_positives_reduce_precision(self, rng):
        anns = scene(rng, n=10, classes=1)
        dets = perfect_dets(anns, rng)
        for _ in range(3):  # low-scored false positives in empty space
            obb = synthetic.rotated_rect(float(rng.uniform(340, 380)), float(rng.uniform(340, 380)), 15, 10, 0.3)
            dets.append(Detection(obb, 0, 0.1))
        report = average_precision(dets, anns)
        # all-point envelope: recall reaches 1 before the false positives
        assert report.per_class_ap[0] == 1.0
        assert report.fp == 3

    def test_matches_brute_force_pr(self, rng):
        for _ in range(5):
            anns = scene(rng, n=8, classes=2)
            dets = perfect_dets(anns[:6], rng)
            for _ in range(4):
                obb = synthetic.random_obb(rng, img_size=400, min_side=15, max_side=60)
                dets.append(Detection(obb, int(rng.integers(2)), float(rng.uniform(0.05, 1.0))))
            report = average_precision(dets, anns, iou_thr=0.5)

            for c in report.per_class_ap:
                gts = [synthetic.canonicalize_obb(a.vertices) for a in anns if a.class_id == c]
                cand = sorted((d for d in dets if d.class_id == c), key=lambda d: -d.score)
                taken = set()
                flags = []
                for d in cand:
                    ious = [-1 if j in taken else polygon_iou(d.obb, g) for j, g in enumerate(gts)]
                    j = int(np.argmax(ious)) if ious else -1
                    if j >= 0 and ious[j] >= 0.5:
                        taken.add(j)
                        flags.append(1)
                    else:
                        flags.append(0)
                # independent envelope integration, point by point
                tp = np.cumsum(flags)
                rec = tp / max(len(gts), 1)
                prec = tp / np.arange(1, len(flags) + 1)
                ap = 0.0
                prev_r = 0.0
                for k in range(len(flags)):
                    if flags[k]:
                        ap += (rec[k] - prev_r) * float(prec[k:].max())
                        prev_r = rec[k]
                assert report.per_class_ap[c] == pytest.approx(ap, abs=1e-12)

    def test_difficult_ground_truth_ignored(self, rng):
        anns = scene(rng, n=6, classes=1)
        anns[0] = ObbAnnotation(anns[0].vertices, anns[0].class_id, difficult=True)
        dets = perfect_dets(anns[1:], rng)
        report = average_precision(dets, anns)
        assert report.mean_ap == 1.0
        assert report.fn == 0

    def test_double_detection_counts_fp(self, rng):
        anns = scene(rng, n=1, classes=1)
        d = perfect_dets(anns, rng)[0]
        report = average_precision([d, Detection(d.obb, 0, d.score / 2)], anns)
        assert report.tp == 1 and report.fp == 1


class TestEvaluateScenes:
    def test_pooled_over_scenes(self, rng):
        scenes = []
        for _ in range(4):
            anns = scene(rng, n=5)
            scenes.append((perfect_dets(anns, rng), anns))
        report = evaluate_scenes(scenes)
        assert report.mean_ap == 1.0
        assert report.tp == 20

    def test_classes_without_gt_excluded(self, rng):
        anns = scene(rng, n=4, classes=1)
        dets = perfect_dets(anns, rng)
        obb = synthetic.random_obb(rng, img_size=400, min_side=15, max_side=60)
        dets.append(Detection(obb, 2, 0.9))  # detection for an absent class
        report = evaluate_scenes([(dets, anns)])
        assert set(report.per_class_ap) == {0}

    def test_pr_curves_shapes(self, rng):
        anns = scene(rng, n=5, classes=2)
        report = average_precision(perfect_dets(anns, rng), anns)
        for rec, prec in report.pr_curves.values():
            assert rec.shape == prec.shape
            assert np.all(np.diff(rec) >= 0)
