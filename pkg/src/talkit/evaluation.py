"""Per-class AP over temporal IoU thresholds and the averaged final score.

Protocol: within each video, predictions of one class are ranked by
confidence and greedily matched one-to-one to the unmatched ground truth
with the highest IoU (a match needs IoU >= threshold). Flags are pooled
across videos per class, and AP is the area under the interpolated
precision-recall curve. The final score averages class-mean AP over the
threshold set.

Only classes present in the ground truth enter the class mean. Classes that
appear solely in predictions are reported as excluded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DomainError, InputError, ValidationError
from .segments import Annotation, GroundTruth, PredictionSet, Segment, temporal_iou, validate_prediction_set

DEFAULT_THRESHOLDS = (0.5, 0.75, 0.95)
INTERPOLATIONS = ("101", "all")


@dataclass(frozen=True)
class EvalConfig:
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    n_classes: int | None = None
    interpolation: str = "101"
    strict: bool = True

    def __post_init__(self):
        ts = tuple(float(x) for x in self.thresholds)
        object.__setattr__(self, "thresholds", ts)
        if not ts:
            raise DomainError("at least one IoU threshold is required")
        if any(not (0.0 < x <= 1.0) for x in ts):
            raise DomainError(f"IoU thresholds must lie in (0, 1], got {ts}")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise DomainError(f"IoU thresholds must be strictly increasing, got {ts}")
        if self.n_classes is not None and self.n_classes < 1:
            raise DomainError(f"n_classes must be >= 1, got {self.n_classes}")
        if self.interpolation not in INTERPOLATIONS:
            raise DomainError(f"interpolation must be one of {INTERPOLATIONS}, got {self.interpolation!r}")


@dataclass(frozen=True)
class EvalReport:
    thresholds: tuple[float, ...]
    classes: tuple[int, ...]
    ap: dict[tuple[int, float], float]
    map_per_threshold: dict[float, float]
    final_score: float
    n_gt: dict[int, int] = field(default_factory=dict)
    excluded_classes: tuple[int, ...] = ()
    interpolation: str = "101"
    ignored_videos: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "final_score": self.final_score,
            "thresholds": list(self.thresholds),
            "interpolation": self.interpolation,
            "classes": list(self.classes),
            "map_per_threshold": {_tkey(t): v for t, v in self.map_per_threshold.items()},
            "ap": {
                str(c): {_tkey(t): self.ap[(c, t)] for t in self.thresholds}
                for c in self.classes
            },
            "n_gt": {str(c): self.n_gt.get(c, 0) for c in self.classes},
            "excluded_classes": list(self.excluded_classes),
            "ignored_videos": list(self.ignored_videos),
        }

    def format_table(self, class_names: dict[int, str] | None = None) -> str:
        names = class_names or {}
        head = ["class", "n_gt"] + [f"AP@{_tkey(t)}" for t in self.thresholds]
        rows = [
            [names.get(c, str(c)), str(self.n_gt.get(c, 0))] + [f"{self.ap[(c, t)]:.6f}" for t in self.thresholds]
            for c in self.classes
        ]
        rows.append(["mAP", ""] + [f"{self.map_per_threshold[t]:.6f}" for t in self.thresholds])
        widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
        fmt = lambda r: "  ".join(cell.rjust(w) for cell, w in zip(r, widths))
        lines = [fmt(head), "  ".join("-" * w for w in widths)]
        lines += [fmt(r) for r in rows]
        lines.append(f"final_score {self.final_score:.6f}")
        if self.excluded_classes:
            lines.append("excluded (no ground truth): " + ", ".join(map(str, self.excluded_classes)))
        if self.ignored_videos:
            lines.append("ignored unknown videos: " + ", ".join(self.ignored_videos))
        return "\n".join(lines)


def _tkey(t: float) -> str:
    return repr(float(t))


def rank_key(seg: Segment, video_id: str = "") -> tuple:
    """Descending confidence; ties by earlier start, then video id."""
    return (-seg.confidence, seg.start, video_id, seg.end, seg.label)


def match_predictions(
    preds: Sequence[Segment], gts: Sequence[Annotation], iou_thr: float
) -> list[tuple[Segment, bool]]:
    """Greedy one-to-one matching for one class in one video.

    Returns ``(prediction, matched)`` in ranked order.
    """
    ranked = sorted(preds, key=rank_key)
    taken = [False] * len(gts)
    out = []
    for p in ranked:
        best_iou, best_j = -1.0, -1
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            iou = temporal_iou(p, g)
            if iou >= iou_thr and iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0:
            taken[best_j] = True
        out.append((p, best_j >= 0))
    return out


def average_precision(flags: Sequence[tuple[float, bool]], n_gt: int, interpolation: str = "101") -> float:
    """AP of a confidence-ranked list of ``(confidence, matched)`` flags.

    ``"101"`` averages interpolated precision at recall 0, 0.01, ..., 1;
    ``"all"`` integrates the interpolated curve at every recall step.
    """
    if interpolation not in INTERPOLATIONS:
        raise DomainError(f"interpolation must be one of {INTERPOLATIONS}, got {interpolation!r}")
    if n_gt < 0:
        raise DomainError(f"n_gt must be non-negative, got {n_gt}")
    for (a, _), (b, _) in zip(flags, flags[1:]):
        if b > a:
            raise DomainError("flags must be sorted by descending confidence")
    if n_gt == 0 or not flags:
        return 0.0

    tps, precisions = [], []
    tp = 0
    for k, (_, hit) in enumerate(flags, start=1):
        tp += bool(hit)
        tps.append(tp)
        precisions.append(tp / k)
    if tp > n_gt:
        raise DomainError(f"{tp} matches exceed {n_gt} ground-truth instances")
    # precision envelope: best precision at this recall or beyond
    env = precisions[:]
    for i in range(len(env) - 2, -1, -1):
        env[i] = max(env[i], env[i + 1])

    if interpolation == "all":
        gains = [env[i] for i, (_, hit) in enumerate(flags) if hit]
        return math.fsum(gains) / n_gt

    total = []
    i = 0
    for r in range(101):
        # first rank reaching recall r/100, compared in integers
        while i < len(tps) and 100 * tps[i] < r * n_gt:
            i += 1
        if i == len(tps):
            break
        total.append(env[i])
    return math.fsum(total) / 101


def evaluate(preds: PredictionSet, gt: GroundTruth, cfg: EvalConfig | None = None) -> EvalReport:
    cfg = cfg or EvalConfig()
    n_classes = cfg.n_classes if cfg.n_classes is not None else gt.n_classes
    violations = validate_prediction_set(preds, n_classes)
    if violations:
        raise ValidationError(violations)
    if n_classes is not None:
        bad = sorted(a.label for anns in gt.videos.values() for a in anns if not 0 <= a.label < n_classes)
        if bad:
            raise InputError(f"ground-truth label {bad[0]} outside [0, {n_classes})")

    unknown = tuple(v for v in preds if v not in gt.videos)
    if unknown and cfg.strict:
        raise InputError(f"predictions reference {len(unknown)} unknown video(s): {', '.join(unknown[:5])}")

    gt_by: dict[int, dict[str, list[Annotation]]] = {}
    for vid, anns in gt.items():
        for a in anns:
            gt_by.setdefault(a.label, {}).setdefault(vid, []).append(a)
    pred_by: dict[int, dict[str, list[Segment]]] = {}
    n_kept = 0
    for vid, segs in preds.items():
        if vid not in gt.videos:
            continue
        for s in segs:
            pred_by.setdefault(s.label, {}).setdefault(vid, []).append(s)
            n_kept += 1

    classes = tuple(sorted(gt_by))
    excluded = tuple(sorted(set(pred_by) - set(gt_by)))
    n_gt = {c: sum(len(v) for v in gt_by[c].values()) for c in classes}

    ap: dict[tuple[int, float], float] = {}
    for c in classes:
        c_preds = pred_by.get(c, {})
        for thr in cfg.thresholds:
            pooled = []
            for vid, segs in c_preds.items():
                for seg, hit in match_predictions(segs, gt_by[c].get(vid, []), thr):
                    pooled.append((rank_key(seg, vid), seg.confidence, hit))
            pooled.sort(key=lambda x: x[0])
            ap[(c, thr)] = average_precision([(conf, hit) for _, conf, hit in pooled], n_gt[c], cfg.interpolation)

    if classes:
        maps = {t: math.fsum(ap[(c, t)] for c in classes) / len(classes) for t in cfg.thresholds}
    else:
        # nothing to find: perfect iff nothing was predicted
        vacuous = 1.0 if n_kept == 0 else 0.0
        maps = {t: vacuous for t in cfg.thresholds}
    final = math.fsum(maps.values()) / len(maps)
    return EvalReport(
        thresholds=cfg.thresholds,
        classes=classes,
        ap=ap,
        map_per_threshold=maps,
        final_score=final,
        n_gt=n_gt,
        excluded_classes=excluded,
        interpolation=cfg.interpolation,
        ignored_videos=unknown,
    )
