"""Sequence data model, on-disk format, validation, statistics and attribute rules.

On-disk layout per sequence directory:
    <name>/groundtruth.txt   one "x,y,w,h" line per frame
    <name>/absent.txt        optional, one "0"/"1" line per frame
    <name>/attributes.txt    optional, one line of 12 comma-separated 0/1 flags
    <name>/img/%06d.pgm      optional 8-bit grayscale frames

A dataset root holds a manifest.txt listing sequence directory names, one per
line, plus the listed directories.
"""

import logging
import math
import os
import re
from dataclasses import dataclass, field
from typing import List, Optional, Sequence as Seq, Tuple

import numpy as np

from .geometry import BoundingBox

logger = logging.getLogger(__name__)

# Fixed attribute order; part of the attributes.txt format.
ATTRIBUTE_NAMES = (
    "IV", "SV", "DEF", "MB", "FM", "OV", "BC", "LR", "POC", "ROT", "FOC", "ARC",
)

MANIFEST_NAME = "manifest.txt"

# FM triggers when the center moves by at least this fraction of the
# previous box size (size = sqrt(w*h)).
FM_DISPLACEMENT_FRACTION = 0.2
# LR triggers when the box area is strictly below this pixel count.
LR_AREA_THRESHOLD = 900.0
# ARC triggers when the aspect-ratio change relative to the first visible
# frame leaves this closed interval.
ARC_RATIO_LOW = 0.5
ARC_RATIO_HIGH = 2.0


class DatasetFormatError(ValueError):
    """Malformed dataset file; message carries file name and line number."""


@dataclass(frozen=True)
class FrameLabel:
    """Per-frame ground truth: a box, or absent (out of view / occluded)."""

    box: Optional[BoundingBox]

    @property
    def absent(self) -> bool:
        return self.box is None


ABSENT = FrameLabel(None)


@dataclass(frozen=True)
class AttributeSet:
    """The 12 challenge flags in fixed file order."""

    flags: Tuple[bool, ...]

    def __post_init__(self):
        if len(self.flags) != len(ATTRIBUTE_NAMES):
            raise ValueError(f"expected {len(ATTRIBUTE_NAMES)} flags, got {len(self.flags)}")

    @classmethod
    def none(cls) -> "AttributeSet":
        return cls(tuple(False for _ in ATTRIBUTE_NAMES))

    @classmethod
    def from_names(cls, names: Seq[str]) -> "AttributeSet":
        unknown = set(names) - set(ATTRIBUTE_NAMES)
        if unknown:
            raise ValueError(f"unknown attributes: {sorted(unknown)}")
        return cls(tuple(n in names for n in ATTRIBUTE_NAMES))

    def has(self, name: str) -> bool:
        return self.flags[ATTRIBUTE_NAMES.index(name)]

    def names(self) -> List[str]:
        return [n for n, f in zip(ATTRIBUTE_NAMES, self.flags) if f]

    def replace(self, name: str, value: bool) -> "AttributeSet":
        i = ATTRIBUTE_NAMES.index(name)
        flags = list(self.flags)
        flags[i] = value
        return AttributeSet(tuple(flags))


@dataclass
class Sequence:
    """One annotated video: ordered frame labels, attributes, optional frames."""

    name: str
    labels: List[FrameLabel]
    attributes: AttributeSet = field(default_factory=AttributeSet.none)
    frames: Optional[List[np.ndarray]] = None

    def __len__(self) -> int:
        return len(self.labels)

    def visible_boxes(self) -> List[Tuple[int, BoundingBox]]:
        """(frame index, box) for every non-absent frame."""
        return [(i, lab.box) for i, lab in enumerate(self.labels) if not lab.absent]


@dataclass(frozen=True)
class DatasetStats:
    num_videos: int
    total_frames: int
    min_frames: int
    max_frames: int
    avg_frames: int
    frame_range: int
    histogram: List[Tuple[int, int, int]]  # (bin lower bound, bin width, count)

    def as_dict(self) -> dict:
        return {
            "num_videos": self.num_videos,
            "total_frames": self.total_frames,
            "min_frames": self.min_frames,
            "max_frames": self.max_frames,
            "avg_frames": self.avg_frames,
            "frame_range": self.frame_range,
            "histogram": [list(b) for b in self.histogram],
        }


# ---------------------------------------------------------------------------
# Parsing / writing


def _parse_box_line(line: str, path: str, lineno: int) -> Tuple[float, float, float, float]:
    parts = line.strip().split(",")
    if len(parts) != 4:
        raise DatasetFormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
    try:
        x, y, w, h = (float(p) for p in parts)
    except ValueError:
        raise DatasetFormatError(f"{path}:{lineno}: non-numeric field in {line.strip()!r}")
    return x, y, w, h


def _read_lines(path: str) -> List[str]:
    with open(path, "r") as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        raise DatasetFormatError(f"{path}: empty file")
    return lines


def read_pgm(path: str) -> np.ndarray:
    """Read a binary (P5) 8-bit PGM into a float array in [0, 1]."""
    with open(path, "rb") as f:
        data = f.read()
    m = re.match(rb"P5\s+(?:#.*\s+)?(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise DatasetFormatError(f"{path}: not a binary PGM")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval > 255:
        raise DatasetFormatError(f"{path}: only 8-bit PGM supported")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=m.end())
    if pixels.size != width * height:
        raise DatasetFormatError(f"{path}: truncated pixel data")
    return pixels.reshape(height, width).astype(np.float64) / maxval


def write_pgm(path: str, frame: np.ndarray) -> None:
    """Write an intensity grid in [0, 1] as binary 8-bit PGM."""
    arr = np.clip(np.asarray(frame, dtype=np.float64), 0.0, 1.0)
    data = np.round(arr * 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def load_sequence(path: str, load_frames: bool = True) -> Sequence:
    """Load one sequence directory into a Sequence.

    A missing attributes file yields all-false flags with a warning; a missing
    absent file means every frame is visible.
    """
    name = os.path.basename(os.path.normpath(path))
    gt_path = os.path.join(path, "groundtruth.txt")
    if not os.path.isfile(gt_path):
        raise DatasetFormatError(f"{gt_path}: missing groundtruth file")
    gt_lines = _read_lines(gt_path)

    absent_flags = [False] * len(gt_lines)
    absent_path = os.path.join(path, "absent.txt")
    if os.path.isfile(absent_path):
        ab_lines = _read_lines(absent_path)
        if len(ab_lines) != len(gt_lines):
            raise DatasetFormatError(
                f"{absent_path}: {len(ab_lines)} lines but groundtruth has {len(gt_lines)}"
            )
        for i, ln in enumerate(ab_lines):
            v = ln.strip()
            if v not in ("0", "1"):
                raise DatasetFormatError(f"{absent_path}:{i + 1}: expected 0 or 1, got {v!r}")
            absent_flags[i] = v == "1"

    labels: List[FrameLabel] = []
    for i, ln in enumerate(gt_lines):
        if absent_flags[i]:
            labels.append(ABSENT)
            continue
        x, y, w, h = _parse_box_line(ln, gt_path, i + 1)
        labels.append(FrameLabel(BoundingBox(x, y, w, h)))

    attr_path = os.path.join(path, "attributes.txt")
    if os.path.isfile(attr_path):
        attr_line = _read_lines(attr_path)[0]
        parts = attr_line.strip().split(",")
        if len(parts) != len(ATTRIBUTE_NAMES):
            raise DatasetFormatError(
                f"{attr_path}:1: expected {len(ATTRIBUTE_NAMES)} flags, got {len(parts)}"
            )
        try:
            attrs = AttributeSet(tuple(bool(int(p)) for p in parts))
        except ValueError:
            raise DatasetFormatError(f"{attr_path}:1: non-binary flag in {attr_line.strip()!r}")
    else:
        logger.warning("%s: no attributes file, assuming no attributes", path)
        attrs = AttributeSet.none()

    frames = None
    img_dir = os.path.join(path, "img")
    if load_frames and os.path.isdir(img_dir):
        frames = [
            read_pgm(os.path.join(img_dir, fn))
            for fn in sorted(os.listdir(img_dir))
            if fn.endswith(".pgm")
        ]

    return Sequence(name=name, labels=labels, attributes=attrs, frames=frames)


def write_sequence(seq: Sequence, root: str) -> str:
    """Write a Sequence in the on-disk layout under root/<name>; returns the path."""
    path = os.path.join(root, seq.name)
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "groundtruth.txt"), "w") as f:
        for lab in seq.labels:
            if lab.absent:
                f.write("0,0,0,0\n")
            else:
                b = lab.box
                f.write(f"{b.x:g},{b.y:g},{b.w:g},{b.h:g}\n")
    if any(lab.absent for lab in seq.labels):
        with open(os.path.join(path, "absent.txt"), "w") as f:
            for lab in seq.labels:
                f.write("1\n" if lab.absent else "0\n")
    with open(os.path.join(path, "attributes.txt"), "w") as f:
        f.write(",".join("1" if v else "0" for v in seq.attributes.flags) + "\n")
    if seq.frames is not None:
        img_dir = os.path.join(path, "img")
        os.makedirs(img_dir, exist_ok=True)
        for i, frame in enumerate(seq.frames):
            write_pgm(os.path.join(img_dir, f"{i + 1:06d}.pgm"), frame)
    return path


def load_manifest(root: str, load_frames: bool = True) -> List[Sequence]:
    """Load every sequence listed in root/manifest.txt, in manifest order."""
    manifest = os.path.join(root, MANIFEST_NAME)
    if not os.path.isfile(manifest):
        raise FileNotFoundError(f"{manifest}: missing dataset manifest")
    names = _read_lines(manifest)
    return [load_sequence(os.path.join(root, n.strip()), load_frames) for n in names]


def write_manifest(root: str, names: Seq[str]) -> None:
    os.makedirs(root, exist_ok=True)
    with open(os.path.join(root, MANIFEST_NAME), "w") as f:
        for n in names:
            f.write(n + "\n")


# ---------------------------------------------------------------------------
# Validation


def validate_sequence(seq: Sequence) -> List[str]:
    """Consistency findings for one sequence; empty list means valid."""
    findings: List[str] = []
    if not seq.labels:
        findings.append(f"{seq.name}: empty label list")
        return findings
    if seq.labels[0].absent:
        findings.append(f"{seq.name}: uninitializable sequence, first frame absent")
    for i, lab in enumerate(seq.labels):
        if lab.absent:
            continue
        b = lab.box
        if b.w <= 0 or b.h <= 0:
            findings.append(f"{seq.name}: non-positive extent, frame {i}")
        elif not all(math.isfinite(v) for v in (b.x, b.y, b.w, b.h)):
            findings.append(f"{seq.name}: non-finite box, frame {i}")
    if seq.frames is not None:
        if len(seq.frames) != len(seq.labels):
            findings.append(
                f"{seq.name}: {len(seq.frames)} frames but {len(seq.labels)} labels"
            )
        else:
            shape = seq.frames[0].shape
            for i, fr in enumerate(seq.frames):
                if fr.shape != shape:
                    findings.append(f"{seq.name}: frame {i} shape {fr.shape} != {shape}")
            h, w = shape
            for i, lab in enumerate(seq.labels):
                if lab.absent or not lab.box.is_valid():
                    continue
                b = lab.box
                if b.x + b.w <= 0 or b.y + b.h <= 0 or b.x >= w or b.y >= h:
                    findings.append(f"{seq.name}: box fully outside frame bounds, frame {i}")
    return findings


# ---------------------------------------------------------------------------
# Statistics


def compute_stats(seqs: Seq[Sequence], bin_width: int = 100) -> DatasetStats:
    """Aggregate frame-count statistics plus a sequence-length histogram."""
    if not seqs:
        raise ValueError("empty dataset")
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    lengths = [len(s) for s in seqs]
    total = sum(lengths)
    lo, hi = min(lengths), max(lengths)
    histogram: List[Tuple[int, int, int]] = []
    for start in range(0, hi + 1, bin_width):
        count = sum(1 for n in lengths if start <= n < start + bin_width)
        histogram.append((start, bin_width, count))
    return DatasetStats(
        num_videos=len(lengths),
        total_frames=total,
        min_frames=lo,
        max_frames=hi,
        avg_frames=int(round(total / len(lengths))),
        frame_range=hi - lo,
        histogram=histogram,
    )


# ---------------------------------------------------------------------------
# Rule-based attributes


def auto_attribute_fm(seq: Sequence) -> bool:
    """Fast motion: any consecutive visible pair moves >= 20% of the previous size."""
    visible = seq.visible_boxes()
    if len(visible) < 2:
        logger.warning("%s: fewer than 2 visible frames, FM rule not evaluable", seq.name)
        return False
    for (i, prev), (j, cur) in zip(visible, visible[1:]):
        if j != i + 1:
            continue  # rule applies to consecutive frames only
        size = math.sqrt(prev.w * prev.h)
        px, py = prev.center
        cx, cy = cur.center
        if math.hypot(cx - px, cy - py) >= FM_DISPLACEMENT_FRACTION * size:
            return True
    return False


def auto_attribute_lr(seq: Sequence) -> bool:
    """Low resolution: any visible frame has box area strictly below 900 px."""
    visible = seq.visible_boxes()
    if not visible:
        raise ValueError(f"{seq.name}: no visible frames")
    return any(b.area < LR_AREA_THRESHOLD for _, b in visible)


def auto_attribute_arc(seq: Sequence) -> bool:
    """Aspect ratio change: ratio to the first visible frame leaves [0.5, 2]."""
    visible = seq.visible_boxes()
    if not visible:
        raise ValueError(f"{seq.name}: no visible frames")
    ref = visible[0][1].aspect_ratio
    for _, b in visible[1:]:
        r = b.aspect_ratio / ref
        if r < ARC_RATIO_LOW or r > ARC_RATIO_HIGH:
            return True
    return False


def auto_annotate(seq: Sequence) -> AttributeSet:
    """Apply the rule-based attributes (FM, LR, ARC) on top of existing flags."""
    attrs = seq.attributes
    attrs = attrs.replace("FM", auto_attribute_fm(seq))
    attrs = attrs.replace("LR", auto_attribute_lr(seq))
    attrs = attrs.replace("ARC", auto_attribute_arc(seq))
    return attrs


# ---------------------------------------------------------------------------
# Co-occurrence


def cooccurrence(seqs: Seq[Sequence]) -> np.ndarray:
    """12x12 matrix: M[a][b] = sequences carrying both attributes; diagonal = subset sizes."""
    if not seqs:
        raise ValueError("empty dataset")
    n = len(ATTRIBUTE_NAMES)
    m = np.zeros((n, n), dtype=np.int64)
    for s in seqs:
        idx = [i for i, f in enumerate(s.attributes.flags) if f]
        for a in idx:
            for b in idx:
                m[a, b] += 1
    return m
