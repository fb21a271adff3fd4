"""Core domain types and temporal-interval geometry.

Times are real-valued seconds. Class labels are plain integer ids in
``[0, n_classes)``; the id ``n_classes`` is reserved for the background
("no action") class and only ever appears in interval streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Protocol

from .errors import DomainError

TIME_RESOLUTION = 0.001


class Interval(Protocol):
    @property
    def start(self) -> float: ...

    @property
    def end(self) -> float: ...


@dataclass(frozen=True, order=True)
class Segment:
    """One localized action instance.

    Construction does not validate; see :func:`validate_prediction_set`.
    """

    label: int
    start: float
    end: float
    confidence: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True, order=True)
class Annotation:
    """A ground-truth action instance."""

    label: int
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


def background_label(n_classes: int) -> int:
    return n_classes


def canonical_key(seg: Segment) -> tuple:
    return (seg.start, seg.end, seg.label, seg.confidence)


def time_scale(resolution: float = TIME_RESOLUTION) -> int:
    scale = round(1.0 / resolution)
    if scale <= 0 or not math.isclose(scale * resolution, 1.0, rel_tol=1e-9):
        raise DomainError(f"time resolution must be 1/k for integer k, got {resolution}")
    return scale


def time_ticks(x: float, resolution: float = TIME_RESOLUTION) -> int:
    """Integer count of ``resolution`` steps nearest to ``x``."""
    return round(x * time_scale(resolution))


def quantize_time(x: float, resolution: float = TIME_RESOLUTION) -> float:
    scale = time_scale(resolution)
    return round(x * scale) / scale


@dataclass(frozen=True)
class PredictionSet:
    """Segments for a collection of videos, keyed by video id.

    Segments within a video are kept in canonical order
    ``(start, end, label, confidence)``; videos iterate in id order.
    A video may map to an empty tuple.
    """

    videos: Mapping[str, tuple[Segment, ...]] = field(default_factory=dict)

    def __post_init__(self):
        canon = {
            str(vid): tuple(sorted(segs, key=canonical_key))
            for vid, segs in sorted(self.videos.items())
        }
        object.__setattr__(self, "videos", canon)

    def __iter__(self) -> Iterator[str]:
        return iter(self.videos)

    def __len__(self) -> int:
        return len(self.videos)

    def __getitem__(self, video_id: str) -> tuple[Segment, ...]:
        return self.videos[video_id]

    def __contains__(self, video_id) -> bool:
        return video_id in self.videos

    def items(self):
        return self.videos.items()

    def get(self, video_id: str) -> tuple[Segment, ...]:
        return self.videos.get(video_id, ())

    @property
    def n_segments(self) -> int:
        return sum(len(s) for s in self.videos.values())

    def drop_empty(self) -> PredictionSet:
        return PredictionSet({v: s for v, s in self.videos.items() if s})

    def quantized(self, resolution: float = TIME_RESOLUTION, conf_digits: int = 6) -> PredictionSet:
        """Snap times to ``resolution`` and round confidences, as on disk."""
        return PredictionSet(
            {
                vid: [
                    Segment(
                        s.label,
                        quantize_time(s.start, resolution),
                        quantize_time(s.end, resolution),
                        round(s.confidence, conf_digits),
                    )
                    for s in segs
                ]
                for vid, segs in self.videos.items()
            }
        )

    @classmethod
    def from_records(cls, records: Iterable[tuple[str, Segment]]) -> PredictionSet:
        videos: dict[str, list[Segment]] = {}
        for vid, seg in records:
            videos.setdefault(vid, []).append(seg)
        return cls(videos)

    def records(self) -> Iterator[tuple[str, Segment]]:
        for vid, segs in self.videos.items():
            for seg in segs:
                yield vid, seg


@dataclass(frozen=True)
class GroundTruth:
    """Annotated action instances plus per-video durations in seconds."""

    videos: Mapping[str, tuple[Annotation, ...]]
    durations: Mapping[str, float]
    n_classes: int | None = None

    def __post_init__(self):
        canon = {
            str(vid): tuple(sorted(anns, key=lambda a: (a.start, a.end, a.label)))
            for vid, anns in sorted(self.videos.items())
        }
        for vid in self.durations:
            canon.setdefault(str(vid), ())
        canon = dict(sorted(canon.items()))
        object.__setattr__(self, "videos", canon)
        object.__setattr__(self, "durations", {str(k): float(v) for k, v in sorted(self.durations.items())})

    def __iter__(self) -> Iterator[str]:
        return iter(self.videos)

    def __len__(self) -> int:
        return len(self.videos)

    def __getitem__(self, video_id: str) -> tuple[Annotation, ...]:
        return self.videos[video_id]

    def items(self):
        return self.videos.items()

    @property
    def n_annotations(self) -> int:
        return sum(len(a) for a in self.videos.values())

    def labels(self) -> set[int]:
        return {a.label for anns in self.videos.values() for a in anns}

    def as_predictions(self, confidence: float = 1.0) -> PredictionSet:
        """Every annotation as a segment with a fixed confidence."""
        return PredictionSet(
            {
                vid: [Segment(a.label, a.start, a.end, confidence) for a in anns]
                for vid, anns in self.videos.items()
            }
        )


def _check_interval(x: Interval) -> None:
    if not (math.isfinite(x.start) and math.isfinite(x.end)) or x.start >= x.end:
        raise DomainError(f"invalid interval [{x.start}, {x.end}]: need finite start < end")


def temporal_iou(a: Interval, b: Interval) -> float:
    """Intersection over union of two closed time intervals.

    Touching intervals have IoU 0.
    """
    _check_interval(a)
    _check_interval(b)
    inter = min(a.end, b.end) - max(a.start, b.start)
    if inter <= 0:
        return 0.0
    union = (a.end - a.start) + (b.end - b.start) - inter
    return min(1.0, inter / union)


@dataclass(frozen=True)
class Violation:
    video_id: str
    index: int
    kind: str
    detail: str = ""
    line: int | None = None

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line is not None else f"{self.video_id}[{self.index}]"
        msg = f"{where}: {self.kind}"
        return f"{msg} ({self.detail})" if self.detail else msg


def segment_violations(seg: Segment | Annotation, n_classes: int | None = None) -> list[tuple[str, str]]:
    """``(kind, detail)`` pairs for every invariant ``seg`` breaks."""
    out = []
    if not (math.isfinite(seg.start) and math.isfinite(seg.end)):
        out.append(("non-finite time", f"start={seg.start}, end={seg.end}"))
    elif seg.start >= seg.end:
        out.append(("empty interval", f"start={seg.start} >= end={seg.end}"))
    if math.isfinite(seg.start) and seg.start < 0:
        out.append(("negative start", f"start={seg.start}"))
    conf = getattr(seg, "confidence", None)
    if conf is not None and not (0.0 <= conf <= 1.0):
        out.append(("confidence range", f"confidence={conf}"))
    if n_classes is not None and seg.label == background_label(n_classes):
        out.append(("background label", f"label={seg.label}"))
    elif seg.label < 0 or (n_classes is not None and seg.label > n_classes):
        out.append(("label range", f"label={seg.label}"))
    return out


def validate_prediction_set(p: PredictionSet, n_classes: int | None = None) -> list[Violation]:
    """Every invariant violation in ``p``; empty iff ``p`` is valid.

    Without ``n_classes`` only negative labels are flagged.
    """
    found = []
    for vid, segs in p.items():
        for i, seg in enumerate(segs):
            for kind, detail in segment_violations(seg, n_classes):
                found.append(Violation(vid, i, kind, detail))
    return found


def validate_ground_truth(gt: GroundTruth) -> list[Violation]:
    found = []
    for vid, anns in gt.items():
        length = gt.durations.get(vid)
        if length is None:
            found.append(Violation(vid, -1, "missing duration"))
        elif not (math.isfinite(length) and length >= 0):
            found.append(Violation(vid, -1, "bad duration", f"duration={length}"))
            length = None
        seen = set()
        for i, ann in enumerate(anns):
            for kind, detail in segment_violations(ann, gt.n_classes):
                found.append(Violation(vid, i, kind, detail))
            if length is not None and ann.end > length:
                found.append(Violation(vid, i, "end beyond duration", f"end={ann.end} > {length}"))
            if ann in seen:
                found.append(Violation(vid, i, "duplicate annotation", f"{ann}"))
            seen.add(ann)
    return found
