"""Reference trackers and a synthetic reflection-style sequence generator."""

import json
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import dataset
from .dataset import AttributeSet, FrameLabel, Sequence
from .geometry import BoundingBox

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthSpec:
    """Parametric description of a synthetic grayscale sequence.

    The target is a textured patch moving on a linear integer trajectory; the
    optional distractor is its horizontal mirror image rendered across a
    vertical mirror line.
    """

    name: str
    frame_height: int = 64
    frame_width: int = 64
    target_w: int = 12
    target_h: int = 12
    start_x: int = 6
    start_y: int = 26
    vel_x: int = 0
    vel_y: int = 0
    length: int = 40
    mirror: bool = False
    mirror_x: Optional[int] = None  # vertical mirror line column; default frame center
    symmetric_texture: bool = False  # makes the reflection pixel-identical to the target
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.length < 2:
            raise ValueError("length must be >= 2")
        if self.target_w <= 0 or self.target_h <= 0:
            raise ValueError("target extents must be positive")

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        return cls(**json.loads(text))


def _target_position(spec: SynthSpec, t: int) -> Tuple[int, int]:
    return spec.start_x + spec.vel_x * t, spec.start_y + spec.vel_y * t


def generate(spec: SynthSpec) -> Sequence:
    """Render a deterministic sequence with ground truth following the target.

    The distractor (when enabled) mirrors the target texture across the
    mirror line; ground truth never follows it. Rule-based attributes
    (FM, LR, ARC) are derived from the generated boxes.
    """
    rng = np.random.default_rng(spec.seed)
    texture = rng.uniform(0.4, 1.0, size=(spec.target_h, spec.target_w))
    if spec.symmetric_texture:
        texture = 0.5 * (texture + texture[:, ::-1])
    mirror_x = spec.mirror_x if spec.mirror_x is not None else spec.frame_width // 2

    frames = []
    labels = []
    for t in range(spec.length):
        x, y = _target_position(spec, t)
        if not (0 <= x and x + spec.target_w <= spec.frame_width
                and 0 <= y and y + spec.target_h <= spec.frame_height):
            raise ValueError(f"{spec.name}: target leaves the frame at t={t}")
        frame = np.full((spec.frame_height, spec.frame_width), 0.1)
        if spec.mirror:
            # Reflect the target box across the vertical line x = mirror_x.
            mx = 2 * mirror_x - (x + spec.target_w)
            if 0 <= mx and mx + spec.target_w <= spec.frame_width:
                frame[y:y + spec.target_h, mx:mx + spec.target_w] = texture[:, ::-1]
        frame[y:y + spec.target_h, x:x + spec.target_w] = texture
        if spec.noise > 0:
            frame = np.clip(frame + rng.normal(0, spec.noise, frame.shape), 0.0, 1.0)
        frames.append(frame)
        labels.append(FrameLabel(BoundingBox(float(x), float(y),
                                             float(spec.target_w), float(spec.target_h))))

    seq = Sequence(name=spec.name, labels=labels, attributes=AttributeSet.none(),
                   frames=frames)
    seq.attributes = dataset.auto_annotate(seq)
    return seq


# ---------------------------------------------------------------------------
# Trackers


class StaticTracker:
    """Predicts the initialization box for every frame."""

    name = "static"

    def __init__(self):
        self._box = None

    def init(self, frame: np.ndarray, box: BoundingBox) -> None:
        self._box = box

    def step(self, frame: np.ndarray) -> BoundingBox:
        return self._box


class NccTracker:
    """Fixed-template tracker using zero-normalized cross-correlation.

    The template is cropped once at initialization and never updated. Each
    step scans integer offsets within search_radius of the previous box and
    returns the NCC argmax; ties break toward the smallest row-major offset.
    """

    name = "ncc"

    def __init__(self, search_radius: int = 8):
        self.search_radius = search_radius
        self._template = None
        self._box = None
        self._static = False

    def init(self, frame: np.ndarray, box: BoundingBox) -> None:
        x, y, w, h = int(round(box.x)), int(round(box.y)), int(round(box.w)), int(round(box.h))
        fh, fw = frame.shape
        if not (0 <= x and x + w <= fw and 0 <= y and y + h <= fh):
            raise ValueError("template does not fit inside the frame")
        self._template = frame[y:y + h, x:x + w].astype(np.float64)
        self._box = box
        if float(np.std(self._template)) == 0.0:
            logger.warning("zero-variance template, NCC degenerate; falling back to static")
            self._static = True

    def step(self, frame: np.ndarray) -> BoundingBox:
        if self._static:
            return self._box
        tpl = self._template - self._template.mean()
        tnorm = float(np.sqrt(np.sum(tpl ** 2)))
        th, tw = tpl.shape
        fh, fw = frame.shape
        px, py = int(round(self._box.x)), int(round(self._box.y))

        best = (-2.0, 0, 0)
        for dy in range(-self.search_radius, self.search_radius + 1):
            for dx in range(-self.search_radius, self.search_radius + 1):
                x, y = px + dx, py + dy
                if x < 0 or y < 0 or x + tw > fw or y + th > fh:
                    continue
                window = frame[y:y + th, x:x + tw]
                wz = window - window.mean()
                wnorm = float(np.sqrt(np.sum(wz ** 2)))
                if wnorm == 0.0 or tnorm == 0.0:
                    score = 0.0
                else:
                    score = float(np.sum(wz * tpl)) / (wnorm * tnorm)
                # strict > keeps the first (smallest row-major) offset on ties
                if score > best[0]:
                    best = (score, x, y)
        _, bx, by = best
        self._box = BoundingBox(float(bx), float(by), self._box.w, self._box.h)
        return self._box


TRACKERS = {
    "static": StaticTracker,
    "ncc": NccTracker,
}


def make_tracker(name: str):
    if name not in TRACKERS:
        raise ValueError(f"unknown tracker {name!r}; choose from {sorted(TRACKERS)}")
    return TRACKERS[name]()
