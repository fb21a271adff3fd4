"""Weighted fusion of several models' prediction sets.

Fusion happens in two stages. :func:`aggregate` lines up identical
``(class, start, end)`` candidates across models and replaces their
confidences by the weighted mean. :func:`iou_merge` then unions same-class
segments whose temporal IoU exceeds a threshold, keeping the max confidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DomainError
from .segments import TIME_RESOLUTION, PredictionSet, Segment, temporal_iou, time_scale, time_ticks

DEFAULT_MERGE_THRESHOLD = 0.5


@dataclass(frozen=True)
class WeightedModel:
    model_id: str
    weight: float
    predictions: PredictionSet

    def __post_init__(self):
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise DomainError(f"model {self.model_id!r}: weight must be positive, got {self.weight}")


@dataclass(frozen=True, order=True)
class CandidateKey:
    """Exact-match key; times are integer ticks of the quantization step."""

    label: int
    start: int
    end: int

    @classmethod
    def of(cls, seg: Segment, resolution: float = TIME_RESOLUTION) -> CandidateKey:
        return cls(seg.label, time_ticks(seg.start, resolution), time_ticks(seg.end, resolution))


def fuse_confidences(confidences: Iterable[tuple[float, float]]) -> float:
    """Weighted mean of ``(confidence, weight)`` pairs.

    Sums are exactly rounded so the result does not depend on input order.
    """
    pairs = list(confidences)
    if not pairs:
        raise DomainError("cannot fuse an empty confidence list")
    for c, w in pairs:
        if not (w > 0 and math.isfinite(w)):
            raise DomainError(f"weights must be positive, got {w}")
        if not 0.0 <= c <= 1.0:
            raise DomainError(f"confidence {c} outside [0, 1]")
    num = math.fsum(w * c for c, w in pairs)
    den = math.fsum(w for _, w in pairs)
    lo = min(c for c, _ in pairs)
    hi = max(c for c, _ in pairs)
    # clamp guards the convex-combination bound against last-bit rounding
    return min(hi, max(lo, num / den))


def aggregate(models: Sequence[WeightedModel], resolution: float = TIME_RESOLUTION) -> PredictionSet:
    """Build the per-video candidate dictionary and fuse each entry.

    A model that lists the same candidate twice contributes its highest
    confidence once. Output times are the quantized key times.
    """
    if not models:
        raise DomainError("aggregate needs at least one model")
    scale = time_scale(resolution)
    table: dict[str, dict[CandidateKey, list[tuple[float, float]]]] = {}
    for model in models:
        for vid, segs in model.predictions.items():
            per_video = table.setdefault(vid, {})
            best: dict[CandidateKey, float] = {}
            for seg in segs:
                key = CandidateKey.of(seg, resolution)
                best[key] = max(best.get(key, seg.confidence), seg.confidence)
            for key, conf in best.items():
                per_video.setdefault(key, []).append((conf, model.weight))
    return PredictionSet(
        {
            vid: [
                Segment(key.label, key.start / scale, key.end / scale, fuse_confidences(confs))
                for key, confs in cands.items()
            ]
            for vid, cands in table.items()
        }
    )


def _check_threshold(threshold: float) -> None:
    if not (0.0 < threshold <= 1.0):
        raise DomainError(f"merge threshold must be in (0, 1], got {threshold}")


def merge_overlapping(segments: Sequence[Segment], threshold: float) -> list[Segment]:
    """Fixed-point IoU union merge for segments of a single class.

    Each step merges the pair with the highest IoU above ``threshold``;
    ties go to the pair that comes first in canonical order.
    """
    _check_threshold(threshold)
    segs = sorted(segments, key=lambda s: (s.start, s.end, s.confidence))
    while True:
        best = None
        for i in range(len(segs)):
            a = segs[i]
            for j in range(i + 1, len(segs)):
                b = segs[j]
                if b.start >= a.end:
                    break  # sorted by start: nothing further overlaps a
                iou = temporal_iou(a, b)
                if iou > threshold and (best is None or iou > best[0]):
                    best = (iou, i, j)
        if best is None:
            return segs
        _, i, j = best
        a, b = segs[i], segs[j]
        merged = Segment(a.label, min(a.start, b.start), max(a.end, b.end), max(a.confidence, b.confidence))
        rest = [s for k, s in enumerate(segs) if k != i and k != j]
        rest.append(merged)
        segs = sorted(rest, key=lambda s: (s.start, s.end, s.confidence))


def iou_merge(p: PredictionSet, threshold: float = DEFAULT_MERGE_THRESHOLD) -> PredictionSet:
    """Run :func:`merge_overlapping` per video and per class."""
    _check_threshold(threshold)
    out = {}
    for vid, segs in p.items():
        by_class: dict[int, list[Segment]] = {}
        for s in segs:
            by_class.setdefault(s.label, []).append(s)
        out[vid] = [m for lab in sorted(by_class) for m in merge_overlapping(by_class[lab], threshold)]
    return PredictionSet(out)


@dataclass
class EnsembleStats:
    candidates_per_model: dict[str, int] = field(default_factory=dict)
    aggregated: int = 0
    shared_candidates: int = 0
    merged: int = 0

    def lines(self) -> list[str]:
        out = [f"model {mid}: {n} segment(s)" for mid, n in self.candidates_per_model.items()]
        out.append(f"aggregated candidates: {self.aggregated} ({self.shared_candidates} supported by >1 model)")
        out.append(f"after IoU merge: {self.merged}")
        return out


def ensemble_pipeline(
    models: Sequence[WeightedModel],
    threshold: float = DEFAULT_MERGE_THRESHOLD,
    resolution: float = TIME_RESOLUTION,
    stats: EnsembleStats | None = None,
) -> PredictionSet:
    """Aggregate then IoU-merge; pass ``stats`` to collect counts."""
    _check_threshold(threshold)
    fused = aggregate(models, resolution)
    merged = iou_merge(fused, threshold)
    if stats is not None:
        stats.candidates_per_model = {m.model_id: m.predictions.n_segments for m in models}
        stats.aggregated = fused.n_segments
        stats.shared_candidates = _shared_count(models, resolution)
        stats.merged = merged.n_segments
    return merged


def _shared_count(models: Sequence[WeightedModel], resolution: float) -> int:
    seen: dict[tuple[str, CandidateKey], set[int]] = {}
    for idx, model in enumerate(models):
        for vid, seg in model.predictions.records():
            seen.setdefault((vid, CandidateKey.of(seg, resolution)), set()).add(idx)
    return sum(1 for owners in seen.values() if len(owners) > 1)
