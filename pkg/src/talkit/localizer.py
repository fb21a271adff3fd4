"""Turn per-interval classifier output into merged action segments.

A video of length ``L`` is cut into ``floor(L / t)`` back-to-back intervals
of width ``t``; entry ``k`` covers ``[k*t, (k+1)*t)``. Any trailing piece
shorter than ``t`` is never classified. Runs of consecutive intervals with
the same non-background label become one segment whose confidence is the
maximum over the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DomainError, InputError
from .segments import TIME_RESOLUTION, PredictionSet, Segment, background_label, quantize_time

# floor(L/t) would otherwise lose a whole interval to L/t = 2.9999999999999996
_FLOOR_SLACK = 1e-9

AGGREGATIONS = ("max", "mean")


def partition_count(length: float, t: float) -> int:
    """Number of whole intervals of width ``t`` that fit in ``length``."""
    if not (t > 0 and math.isfinite(t)):
        raise DomainError(f"interval width must be positive, got {t}")
    if not (length >= 0 and math.isfinite(length)):
        raise DomainError(f"video length must be non-negative, got {length}")
    return math.floor(length / t + _FLOOR_SLACK)


@dataclass(frozen=True)
class IntervalStream:
    """One video's sequence of fixed-width interval predictions."""

    video_id: str
    t: float
    duration: float
    n_classes: int
    labels: tuple[int, ...]
    confidences: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(int(x) for x in self.labels))
        object.__setattr__(self, "confidences", tuple(float(x) for x in self.confidences))
        if self.t < TIME_RESOLUTION:
            raise DomainError(f"interval width {self.t} is below the {TIME_RESOLUTION}s time resolution")
        if self.n_classes < 1:
            raise DomainError(f"n_classes must be >= 1, got {self.n_classes}")
        expected = partition_count(self.duration, self.t)
        if len(self.labels) != expected or len(self.confidences) != expected:
            raise InputError(
                f"{self.video_id}: expected floor(L/t) = {expected} records "
                f"(L={self.duration}, t={self.t}), got {len(self.labels)}"
            )
        bg = background_label(self.n_classes)
        for k, (lab, conf) in enumerate(zip(self.labels, self.confidences)):
            if not 0 <= lab <= bg:
                raise InputError(f"{self.video_id}: interval {k} label {lab} outside [0, {bg}]")
            if not 0.0 <= conf <= 1.0:
                raise InputError(f"{self.video_id}: interval {k} confidence {conf} outside [0, 1]")

    @property
    def background(self) -> int:
        return background_label(self.n_classes)

    def __len__(self) -> int:
        return len(self.labels)

    def interval(self, k: int) -> tuple[float, float]:
        return k * self.t, (k + 1) * self.t


def _runs(labels: Sequence[int], background: int, bridge_gaps: bool) -> list[tuple[int, int, int]]:
    """``(label, first, last)`` index runs, inclusive on both ends."""
    runs: list[list[int]] = []
    for k, lab in enumerate(labels):
        if lab == background:
            continue
        if runs and runs[-1][0] == lab:
            gap = k - runs[-1][2] - 1
            if gap == 0 or (bridge_gaps and gap == 1 and labels[k - 1] == background):
                runs[-1][2] = k
                continue
        runs.append([lab, k, k])
    return [tuple(r) for r in runs]


def merge_stream(stream: IntervalStream, *, bridge_gaps: bool = False, aggregate: str = "max") -> list[Segment]:
    """Merge consecutive same-label intervals into segments.

    Background intervals emit nothing and break runs. With ``bridge_gaps``
    a single background interval between two runs of the same label is
    absorbed; the bridged interval does not contribute to the confidence.
    ``aggregate="mean"`` averages run confidences instead of taking the max.
    """
    if aggregate not in AGGREGATIONS:
        raise DomainError(f"aggregate must be one of {AGGREGATIONS}, got {aggregate!r}")
    out = []
    for lab, first, last in _runs(stream.labels, stream.background, bridge_gaps):
        confs = [stream.confidences[k] for k in range(first, last + 1) if stream.labels[k] == lab]
        conf = max(confs) if aggregate == "max" else math.fsum(confs) / len(confs)
        start = quantize_time(first * stream.t)
        end = quantize_time((last + 1) * stream.t)
        out.append(Segment(lab, start, end, conf))
    return out


def localize(streams: Iterable[IntervalStream], *, bridge_gaps: bool = False, aggregate: str = "max") -> PredictionSet:
    """Apply :func:`merge_stream` per video and assemble a prediction set."""
    videos: dict[str, list[Segment]] = {}
    for s in streams:
        if s.video_id in videos:
            raise InputError(f"duplicate video id {s.video_id!r} in interval streams")
        videos[s.video_id] = merge_stream(s, bridge_gaps=bridge_gaps, aggregate=aggregate)
    return PredictionSet(videos)
