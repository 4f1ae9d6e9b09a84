"""Tracking benchmark toolkit: OPE metrics, dataset handling, baselines, and a
verifiable hierarchical aggregation encoder."""

from .geometry import BoundingBox, center_error, intersection_area, overlap_score

__all__ = [
    "BoundingBox",
    "center_error",
    "intersection_area",
    "overlap_score",
]

__version__ = "0.1.0"
