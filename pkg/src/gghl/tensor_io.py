"""Annotation parsing, the binary tensor file format and heatmap rendering.

Tensor file layout (all little-endian):

    magic   8 bytes  b"GGHLTENS"
    version uint16
    scales  uint8
    per scale: stride uint16, height uint32, width uint32, channels uint32
    per scale: height * width * channels float32 values, row-major,
               channels-last

Label sets store channels [F, obj, obb(9), cls(C), region_id, xi]; prediction
sets store [obj, obb(9), cls(C)]. The kind is inferred from the reader call.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .assign import LabelTensorSet, ObbAnnotation, ScaleLabels
from .errors import BadMagic, ParseError, TruncatedPayload, UnknownClass, VersionMismatch
from .loss import PredictionTensorSet, ScalePredictions

MAGIC = b"GGHLTENS"
VERSION = 1

LABEL_FIXED_CHANNELS = 13  # F + obj + 9 box + region_id + xi
PRED_FIXED_CHANNELS = 10  # obj + 9 box


def read_class_list(path) -> list[str]:
    """One class name per line; index equals line number."""
    names = [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines()]
    return [n for n in names if n]


def parse_dota(path, class_list: list[str]) -> list[ObbAnnotation]:
    """Parse a DOTA-style annotation file.

    Each object line holds 8 coordinates, a class name and a difficulty
    flag. Header lines starting with 'imagesource' or 'gsd' are skipped.
    """
    annotations = []
    class_index = {name: i for i, name in enumerate(class_list)}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith(("imagesource", "gsd")):
            continue
        parts = line.split()
        if len(parts) < 10:
            raise ParseError(f"{path}:{line_no}: expected 8 coordinates, class and difficulty", line_no)
        try:
            coords = [float(v) for v in parts[:8]]
            difficult = int(parts[9])
        except ValueError as exc:
            raise ParseError(f"{path}:{line_no}: {exc}", line_no) from exc
        name = parts[8]
        if name not in class_index:
            raise UnknownClass(f"{path}:{line_no}: unknown class {name!r}")
        vertices = np.asarray(coords, dtype=np.float64).reshape(4, 2)
        annotations.append(ObbAnnotation(vertices, class_index[name], bool(difficult)))
    return annotations


def write_dota(path, annotations: list[ObbAnnotation], class_list: list[str]) -> None:
    lines = []
    for ann in annotations:
        coords = " ".join(format(v, ".6f") for v in ann.vertices.ravel())
        lines.append(f"{coords} {class_list[ann.class_id]} {int(ann.difficult)}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _write_scales(path, scales: list[tuple[int, np.ndarray]]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HB", VERSION, len(scales)))
        for stride, arr in scales:
            h, w, c = arr.shape
            fh.write(struct.pack("<HIII", stride, h, w, c))
        for _, arr in scales:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_scales(path) -> list[tuple[int, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise BadMagic(f"{path}: bad magic {data[:8]!r}")
    version, n_scales = struct.unpack_from("<HB", data, 8)
    if version != VERSION:
        raise VersionMismatch(f"{path}: version {version}, expected {VERSION}")
    offset = 11
    headers = []
    for _ in range(n_scales):
        if offset + 14 > len(data):
            raise TruncatedPayload(f"{path}: truncated header")
        headers.append(struct.unpack_from("<HIII", data, offset))
        offset += 14
    scales = []
    for stride, h, w, c in headers:
        nbytes = h * w * c * 4
        if offset + nbytes > len(data):
            raise TruncatedPayload(f"{path}: payload shorter than header implies")
        arr = np.frombuffer(data, dtype="<f4", count=h * w * c, offset=offset).reshape(h, w, c)
        scales.append((stride, arr.copy()))
        offset += nbytes
    return scales


def write_tensorset(path, tset: LabelTensorSet | PredictionTensorSet) -> None:
    """Serialize a label or prediction tensor set, bit-exact at float32."""
    scales = []
    if isinstance(tset, LabelTensorSet):
        for s in tset.scales:
            arr = np.concatenate(
                [
                    s.f[..., None],
                    s.obj[..., None],
                    s.obb,
                    s.cls,
                    s.region_id[..., None].astype(np.float32),
                    s.xi[..., None],
                ],
                axis=-1,
            )
            scales.append((s.stride, arr))
    else:
        for s in tset.scales:
            arr = np.concatenate(
                [np.asarray(s.obj, dtype=np.float32)[..., None], s.obb, s.cls], axis=-1
            )
            scales.append((s.stride, arr))
    _write_scales(path, scales)


def read_tensorset(path, kind: str) -> LabelTensorSet | PredictionTensorSet:
    """Read a tensor set; ``kind`` is "labels" or "predictions"."""
    raw = _read_scales(path)
    if kind == "labels":
        scales = []
        num_classes = raw[0][1].shape[-1] - LABEL_FIXED_CHANNELS if raw else 0
        for stride, arr in raw:
            c = arr.shape[-1] - LABEL_FIXED_CHANNELS
            if c < 1:
                raise TruncatedPayload(f"{path}: too few channels for a label set")
            scales.append(
                ScaleLabels(
                    stride=stride,
                    f=arr[..., 0].copy(),
                    obj=arr[..., 1].copy(),
                    obb=arr[..., 2:11].copy(),
                    cls=arr[..., 11 : 11 + c].copy(),
                    region_id=arr[..., 11 + c].astype(np.int32),
                    xi=arr[..., 12 + c].copy(),
                )
            )
        return LabelTensorSet(scales, num_classes)
    if kind == "predictions":
        scales = []
        for stride, arr in raw:
            c = arr.shape[-1] - PRED_FIXED_CHANNELS
            if c < 1:
                raise TruncatedPayload(f"{path}: too few channels for a prediction set")
            scales.append(
                ScalePredictions(
                    stride=stride,
                    obj=arr[..., 0].copy(),
                    obb=arr[..., 1:10].copy(),
                    cls=arr[..., 10:].copy(),
                )
            )
        return PredictionTensorSet(scales)
    raise ValueError(f"unknown tensor-set kind {kind!r}")


def render_heatmap_png(labels: LabelTensorSet, scale: int, path) -> None:
    """Write the Gaussian-weight map of one scale as a grayscale PNG."""
    from PIL import Image

    f = labels.scales[scale].f
    img = np.round(np.clip(f, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(img, mode="L").save(path, format="PNG")
