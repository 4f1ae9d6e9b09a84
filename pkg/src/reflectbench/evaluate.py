"""One-pass evaluation: precision/success curves, AUC/PRC20, attribute scopes, reports."""

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Sequence as Seq

import numpy as np

from .dataset import ATTRIBUTE_NAMES, Sequence
from .geometry import BoundingBox, center_error, overlap_score

logger = logging.getLogger(__name__)

PRECISION_THRESHOLDS = np.arange(0, 51, dtype=np.float64)        # 0..50 px
SUCCESS_THRESHOLDS = np.round(np.arange(101) * 0.01, 2)          # 0.00..1.00

OVERALL_SCOPE = "overall"


@dataclass
class TrackerOutput:
    """Per-frame box predictions for one sequence (one box per frame)."""

    sequence: str
    boxes: List[BoundingBox]
    invalid_frames: List[int] = field(default_factory=list)


@dataclass
class FrameScores:
    """Pooled per-frame center errors and overlap scores for evaluated frames."""

    errors: np.ndarray
    overlaps: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.errors.size


@dataclass
class ScopeResult:
    precision: np.ndarray  # 51 values
    success: np.ndarray    # 101 values
    prc20: float
    auc: float
    n_frames: int
    n_sequences: int


@dataclass
class EvalReport:
    tracker: str
    scopes: Dict[str, ScopeResult]

    @property
    def auc(self) -> float:
        return self.scopes[OVERALL_SCOPE].auc

    @property
    def prc20(self) -> float:
        return self.scopes[OVERALL_SCOPE].prc20


def run_ope(tracker, seq: Sequence) -> TrackerOutput:
    """One-pass evaluation: init once on frame 1 ground truth, step every later frame.

    The tracker is never re-initialized; invalid predicted boxes are recorded
    as-is and flagged.
    """
    if seq.frames is None:
        raise ValueError(f"{seq.name}: sequence has no image frames")
    if seq.labels[0].absent:
        raise ValueError(f"{seq.name}: first frame absent, cannot initialize")
    init_box = seq.labels[0].box
    tracker.init(seq.frames[0], init_box)
    boxes = [init_box]
    invalid = []
    for i in range(1, len(seq.frames)):
        box = tracker.step(seq.frames[i])
        if not box.is_valid():
            invalid.append(i)
            logger.warning("%s: invalid predicted box at frame %d", seq.name, i)
        boxes.append(box)
    return TrackerOutput(sequence=seq.name, boxes=boxes, invalid_frames=invalid)


def frame_scores(pred: TrackerOutput, seq: Sequence) -> FrameScores:
    """Center error and overlap per evaluated frame; absent frames are skipped.

    Invalid predictions score overlap 0 and center error +inf so the one-pass
    protocol never aborts.
    """
    if len(pred.boxes) != len(seq.labels):
        raise ValueError(
            f"{seq.name}: {len(pred.boxes)} predictions for {len(seq.labels)} frames"
        )
    errors, overlaps = [], []
    for lab, box in zip(seq.labels, pred.boxes):
        if lab.absent:
            continue
        if box.is_valid():
            errors.append(center_error(box, lab.box))
            overlaps.append(overlap_score(box, lab.box))
        else:
            errors.append(math.inf)
            overlaps.append(0.0)
    if not errors:
        raise ValueError(f"{seq.name}: zero evaluable frames")
    return FrameScores(np.array(errors), np.array(overlaps))


def precision_curve(scores: FrameScores) -> np.ndarray:
    """Fraction of frames with center error <= t, for t in 0..50 px."""
    return np.array([
        float(np.mean(scores.errors <= t)) for t in PRECISION_THRESHOLDS
    ])


def success_curve(scores: FrameScores) -> np.ndarray:
    """Fraction of frames with overlap strictly above t, for t in 0.00..1.00."""
    return np.array([
        float(np.mean(scores.overlaps > t)) for t in SUCCESS_THRESHOLDS
    ])


def _scope_result(pooled: FrameScores, n_sequences: int) -> ScopeResult:
    prec = precision_curve(pooled)
    succ = success_curve(pooled)
    return ScopeResult(
        precision=prec,
        success=succ,
        prc20=float(prec[20]),
        auc=float(np.mean(succ)),
        n_frames=pooled.n_frames,
        n_sequences=n_sequences,
    )


def _mean_curve_result(per_seq: List[FrameScores]) -> ScopeResult:
    precs = np.mean([precision_curve(s) for s in per_seq], axis=0)
    succs = np.mean([success_curve(s) for s in per_seq], axis=0)
    return ScopeResult(
        precision=precs,
        success=succs,
        prc20=float(precs[20]),
        auc=float(np.mean(succs)),
        n_frames=sum(s.n_frames for s in per_seq),
        n_sequences=len(per_seq),
    )


def aggregate(
    tracker: str,
    seqs: Seq[Sequence],
    per_seq_scores: Dict[str, FrameScores],
    pooled: bool = True,
) -> EvalReport:
    """Build an EvalReport with an overall scope plus one scope per attribute.

    With pooled=True (default) frames are pooled across a scope's sequences;
    otherwise per-sequence curves are averaged. Attributes carried by no
    sequence are omitted with a warning.
    """
    def build(members: List[Sequence]) -> ScopeResult:
        scores = [per_seq_scores[s.name] for s in members]
        if pooled:
            merged = FrameScores(
                np.concatenate([sc.errors for sc in scores]),
                np.concatenate([sc.overlaps for sc in scores]),
            )
            return _scope_result(merged, len(members))
        return _mean_curve_result(scores)

    scopes = {OVERALL_SCOPE: build(list(seqs))}
    for attr in ATTRIBUTE_NAMES:
        members = [s for s in seqs if s.attributes.has(attr)]
        if not members:
            logger.warning("attribute %s carried by no sequence, scope omitted", attr)
            continue
        scopes[attr] = build(members)
    return EvalReport(tracker=tracker, scopes=scopes)


def rank(reports: Seq[EvalReport]) -> List[EvalReport]:
    """Order by overall AUC desc, then PRC20 desc, then tracker name."""
    if not reports:
        raise ValueError("no reports to rank")
    return sorted(reports, key=lambda r: (-r.auc, -r.prc20, r.tracker))


# ---------------------------------------------------------------------------
# Serialization


def report_to_dict(r: EvalReport) -> dict:
    return {
        "tracker": r.tracker,
        "scopes": {
            name: {
                "auc": sr.auc,
                "prc20": sr.prc20,
                "n_frames": sr.n_frames,
                "n_sequences": sr.n_sequences,
                "precision": [[float(t), float(v)] for t, v in zip(PRECISION_THRESHOLDS, sr.precision)],
                "success": [[float(t), float(v)] for t, v in zip(SUCCESS_THRESHOLDS, sr.success)],
            }
            for name, sr in sorted(r.scopes.items())
        },
    }


def report_from_dict(d: dict) -> EvalReport:
    scopes = {}
    for name, s in d["scopes"].items():
        scopes[name] = ScopeResult(
            precision=np.array([v for _, v in s["precision"]]),
            success=np.array([v for _, v in s["success"]]),
            prc20=s["prc20"],
            auc=s["auc"],
            n_frames=s["n_frames"],
            n_sequences=s["n_sequences"],
        )
    return EvalReport(tracker=d["tracker"], scopes=scopes)


def emit_json(reports: Seq[EvalReport]) -> bytes:
    payload = {"reports": [report_to_dict(r) for r in reports]}
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("ascii")


def emit_csv(reports: Seq[EvalReport]) -> bytes:
    """One row per (tracker, scope, metric, threshold); scalars as metric rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tracker", "scope", "metric", "threshold", "value"])
    for r in reports:
        for scope, sr in sorted(r.scopes.items()):
            writer.writerow([r.tracker, scope, "auc", "", f"{sr.auc:.6f}"])
            writer.writerow([r.tracker, scope, "prc20", "", f"{sr.prc20:.6f}"])
            writer.writerow([r.tracker, scope, "n_frames", "", sr.n_frames])
            writer.writerow([r.tracker, scope, "n_sequences", "", sr.n_sequences])
            for t, v in zip(PRECISION_THRESHOLDS, sr.precision):
                writer.writerow([r.tracker, scope, "precision", f"{t:g}", f"{v:.6f}"])
            for t, v in zip(SUCCESS_THRESHOLDS, sr.success):
                writer.writerow([r.tracker, scope, "success", f"{t:.2f}", f"{v:.6f}"])
    return buf.getvalue().encode("ascii")


def emit_report(reports: Seq[EvalReport], fmt: str) -> bytes:
    if fmt == "json":
        return emit_json(reports)
    if fmt == "csv":
        return emit_csv(reports)
    raise ValueError(f"unknown report format {fmt!r}")


# ---------------------------------------------------------------------------
# Offline results


def load_results(results_dir: str, seqs: Seq[Sequence]) -> Dict[str, TrackerOutput]:
    """Load per-sequence result files (<sequence>.txt, one x,y,w,h line per frame)."""
    outputs: Dict[str, TrackerOutput] = {}
    for s in seqs:
        path = os.path.join(results_dir, f"{s.name}.txt")
        if not os.path.isfile(path):
            raise FileNotFoundError(f"missing result file for sequence {s.name}: {path}")
        boxes, invalid = [], []
        with open(path) as f:
            for i, ln in enumerate(ln for ln in f.read().splitlines() if ln.strip()):
                parts = ln.split(",")
                if len(parts) != 4:
                    raise ValueError(f"{path}:{i + 1}: expected 4 fields")
                x, y, w, h = (float(p) for p in parts)
                box = BoundingBox(x, y, w, h)
                if not box.is_valid():
                    invalid.append(i)
                boxes.append(box)
        outputs[s.name] = TrackerOutput(sequence=s.name, boxes=boxes, invalid_frames=invalid)
    return outputs


def save_results(outputs: Dict[str, TrackerOutput], results_dir: str) -> None:
    os.makedirs(results_dir, exist_ok=True)
    for name, out in sorted(outputs.items()):
        with open(os.path.join(results_dir, f"{name}.txt"), "w") as f:
            for b in out.boxes:
                f.write(f"{b.x:g},{b.y:g},{b.w:g},{b.h:g}\n")
