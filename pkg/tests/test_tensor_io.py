import numpy as np
import pytest
from PIL import Image

from gghl import synthetic
from gghl.assign import AssignConfig, ObbAnnotation, generate_heatmaps
from gghl.errors import BadMagic, ParseError, TruncatedPayload, UnknownClass, VersionMismatch
from gghl.tensor_io import (
    MAGIC,
    parse_dota,
    read_class_list,
    read_tensorset,
    render_heatmap_png,
    write_dota,
    write_tensorset,
)

CFG = AssignConfig(strides=(8, 16), img_size=128, num_classes=2)
CLASSES = ["plane", "ship"]


class TestClassList:
    def test_reads_one_name_per_line(self, tmp_path):
        p = tmp_path / "classes.txt"
        p.write_text("plane\nship\n\n")
        assert read_class_list(p) == ["plane", "ship"]


class TestParse:
    def test_single_line(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("0 0 2 0 2 2 0 2 plane 0\n")
        anns = parse_dota(p, ["plane"])
        assert len(anns) == 1
        assert anns[0].class_id == 0
        assert not anns[0].difficult
        assert np.allclose(anns[0].vertices, [(0, 0), (2, 0), (2, 2), (0, 2)])

    def test_empty_file(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("")
        assert parse_dota(p, CLASSES) == []

    def test_headers_skipped(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("imagesource:GoogleEarth\ngsd:0.5\n0 0 2 0 2 2 0 2 ship 1\n")
        anns = parse_dota(p, CLASSES)
        assert len(anns) == 1 and anns[0].class_id == 1 and anns[0].difficult

    def test_short_line_names_line_number(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("0 0 2 0 2 2 0 2 plane 0\n1 2 3 4 5 6 7 plane 0\n")
        with pytest.raises(ParseError) as err:
            parse_dota(p, CLASSES)
        assert err.value.line_no == 2
        assert ":2:" in str(err.value)

    def test_non_numeric_coordinate(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("0 0 x 0 2 2 0 2 plane 0\n")
        with pytest.raises(ParseError):
            parse_dota(p, CLASSES)

    def test_unknown_class(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("0 0 2 0 2 2 0 2 car 0\n")
        with pytest.raises(UnknownClass):
            parse_dota(p, CLASSES)

    def test_write_read_roundtrip(self, tmp_path, rng):
        anns = [
            ObbAnnotation(synthetic.random_obb(rng, img_size=128, min_side=10, max_side=50).vertices, int(rng.integers(2)))
            for _ in range(5)
        ]
        p = tmp_path / "out.txt"
        write_dota(p, anns, CLASSES)
        back = parse_dota(p, CLASSES)
        for a, b in zip(anns, back):
            assert np.allclose(a.vertices, b.vertices, atol=1e-6)
            assert a.class_id == b.class_id


class TestTensorSets:
    def labels(self, rng):
        anns = synthetic.random_scene(rng, 5, CFG, min_side=15, max_side=60)
        return generate_heatmaps(anns, CFG)

    def test_label_roundtrip_bit_exact(self, tmp_path, rng):
        labels = self.labels(rng)
        p = tmp_path / "labels.gghlt"
        write_tensorset(p, labels)
        back = read_tensorset(p, "labels")
        assert back.num_classes == CFG.num_classes
        for a, b in zip(labels.scales, back.scales):
            assert a.stride == b.stride
            assert np.array_equal(a.f, b.f)
            assert np.array_equal(a.obj, b.obj)
            assert np.array_equal(a.obb, b.obb)
            assert np.array_equal(a.cls, b.cls)
            assert np.array_equal(a.region_id, b.region_id)
            assert np.array_equal(a.xi, b.xi)

    def test_prediction_roundtrip(self, tmp_path, rng):
        labels = self.labels(rng)
        preds = synthetic.random_predictions(rng, labels)
        p = tmp_path / "preds.gghlt"
        write_tensorset(p, preds)
        back = read_tensorset(p, "predictions")
        for a, b in zip(preds.scales, back.scales):
            assert a.stride == b.stride
            assert np.array_equal(a.obj.astype(np.float32), b.obj)
            assert np.array_equal(a.obb.astype(np.float32), b.obb)
            assert np.array_equal(a.cls.astype(np.float32), b.cls)

    def test_write_is_deterministic(self, tmp_path, rng):
        labels = self.labels(rng)
        write_tensorset(tmp_path / "a", labels)
        write_tensorset(tmp_path / "b", labels)
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x"
        p.write_bytes(b"NOTMYFMT" + b"\0" * 16)
        with pytest.raises(BadMagic):
            read_tensorset(p, "labels")

    def test_version_mismatch(self, tmp_path, rng):
        p = tmp_path / "x"
        write_tensorset(p, self.labels(rng))
        data = bytearray(p.read_bytes())
        data[8] = 99
        p.write_bytes(bytes(data))
        with pytest.raises(VersionMismatch):
            read_tensorset(p, "labels")

    def test_truncated_payload(self, tmp_path, rng):
        p = tmp_path / "x"
        write_tensorset(p, self.labels(rng))
        p.write_bytes(p.read_bytes()[:-5])
        with pytest.raises(TruncatedPayload):
            read_tensorset(p, "labels")

    def test_header_is_little_endian(self, tmp_path, rng):
        p = tmp_path / "x"
        write_tensorset(p, self.labels(rng))
        data = p.read_bytes()
        assert data[:8] == MAGIC
        assert data[8:10] == b"\x01\x00"  # version 1, little-endian uint16
        assert data[10] == 2  # two scales


class TestRenderHeatmap:
    def test_empty_labels_uniform_background(self, tmp_path):
        labels = generate_heatmaps([], CFG)
        p = tmp_path / "h.png"
        render_heatmap_png(labels, 0, p)
        img = np.asarray(Image.open(p))
        assert img.shape == (16, 16)
        assert not img.any()

    def test_single_object_blob_axis_ratio(self, tmp_path):
        # large tau keeps a big object on stride 8 so the blob spans many cells
        cfg = AssignConfig(strides=(8, 16), img_size=512, num_classes=2, tau=12.0)
        obb = synthetic.rotated_rect(256, 256, 260, 104, 0.0)
        labels = generate_heatmaps([ObbAnnotation(obb.vertices, 0)], cfg)
        p = tmp_path / "h.png"
        render_heatmap_png(labels, 0, p)
        img = np.asarray(Image.open(p)).astype(np.float64)
        assert img.max() > 200  # peak cell sits near, not exactly on, the mean
        ys, xs = np.nonzero(img)
        w = img[ys, xs]
        mx = np.average(xs, weights=w)
        my = np.average(ys, weights=w)
        sx = np.sqrt(np.average((xs - mx) ** 2, weights=w))
        sy = np.sqrt(np.average((ys - my) ** 2, weights=w))
        # second moments of the rescaled blob follow the 260:104 side ratio
        assert sx / max(sy, 1e-9) == pytest.approx(260 / 104, rel=0.10)

    def test_rendered_values_match_f_channel(self, tmp_path, rng):
        labels = self.labels = generate_heatmaps(
            synthetic.random_scene(rng, 3, CFG, min_side=20, max_side=60), CFG
        )
        p = tmp_path / "h.png"
        render_heatmap_png(labels, 0, p)
        img = np.asarray(Image.open(p))
        expect = np.round(np.clip(labels.scales[0].f, 0, 1) * 255).astype(np.uint8)
        assert np.array_equal(img, expect)
