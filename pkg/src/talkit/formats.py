"""Readers and writers for every on-disk format.

Submission files are comma-separated records, one segment per line::

    video_id,class_id,start,end,confidence
    vid01,3,12.500,18.000,0.912345

The header is optional on input and detected automatically. Times are
written with 3 decimals (1 ms) and confidences with 6.

Times are seconds by default. Readers and writers for submissions and
ground truth take ``fps``: when given, file times are frame indices and are
divided by ``fps`` on read and multiplied by it on write.

Interval-stream files hold one or more blocks. Each block opens with a
``#`` header giving the video id, interval width, video duration and class
count, followed by exactly ``floor(duration / t)`` ``label,confidence``
records. Label ``n_classes`` is background::

    # video_id=vid01 t=0.5 duration=6.300 n_classes=38
    38,0.870000
    3,0.912345

Ground truth is CSV (``video_id,duration,class_id,start,end``; a video with
no actions has one row with the last three fields empty and an optional
``# n_classes=K`` comment line) or JSON::

    {"n_classes": 38,
     "videos": {"vid01": {"duration": 360.0, "annotations": [[3, 12.5, 18.0]]}}}

Ensemble configs are JSON::

    {"threshold": 0.5,
     "models": [{"path": "a.csv", "weight": 0.679}, {"path": "b.csv", "weight": 0.575}]}

Relative model paths resolve against the config file's directory.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .ensemble import DEFAULT_MERGE_THRESHOLD
from .errors import ParseError, ValidationError
from .evaluation import EvalReport
from .localizer import IntervalStream, partition_count
from .segments import (
    Annotation,
    GroundTruth,
    PredictionSet,
    Segment,
    Violation,
    segment_violations,
    validate_ground_truth,
)

SUBMISSION_HEADER = ("video_id", "class_id", "start", "end", "confidence")
GT_HEADER = ("video_id", "duration", "class_id", "start", "end")


def _fmt_time(x: float) -> str:
    return f"{x:.3f}"


def _fmt_conf(x: float) -> str:
    return f"{x:.6f}"


def _float(text: str, what: str, path, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{what} {text!r} is not a number", path, line) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} {text!r} is not finite", path, line)
    return value


def _int(text: str, what: str, path, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{what} {text!r} is not an integer", path, line) from None


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _check_fps(fps: float | None) -> None:
    if fps is not None and not (math.isfinite(fps) and fps > 0):
        raise ValueError(f"fps must be positive, got {fps!r}")


def _seg_from_file(seg: Segment, fps: float | None) -> Segment:
    if fps is None:
        return seg
    return Segment(seg.label, seg.start / fps, seg.end / fps, seg.confidence)


def _rows(text: str):
    """``(line_number, fields)`` for non-blank, non-comment lines."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        fields = next(csv.reader([raw]))
        yield lineno, [f.strip() for f in fields]


# -- submissions -------------------------------------------------------------


def read_submission_records(path, fps: float | None = None) -> list[tuple[int, str, Segment]]:
    """Raw ``(line, video_id, segment)`` records; only syntax is checked."""
    _check_fps(fps)
    text = Path(path).read_text(encoding="utf-8")
    out = []
    first = True
    for lineno, fields in _rows(text):
        if first:
            first = False
            if len(fields) == 5 and not all(_is_number(f) for f in fields[1:]):
                continue  # header
        if len(fields) != 5:
            raise ParseError(f"expected 5 fields, got {len(fields)}", path, lineno)
        vid, cls, start, end, conf = fields
        if not vid:
            raise ParseError("empty video id", path, lineno)
        seg = Segment(
            _int(cls, "class_id", path, lineno),
            _float(start, "start", path, lineno),
            _float(end, "end", path, lineno),
            _float(conf, "confidence", path, lineno),
        )
        out.append((lineno, vid, _seg_from_file(seg, fps)))
    return out


def load_submission(path, fps: float | None = None) -> PredictionSet:
    """Read a submission without checking segment invariants."""
    return PredictionSet.from_records((vid, seg) for _, vid, seg in read_submission_records(path, fps))


def parse_submission(
    path, *, strict: bool = True, n_classes: int | None = None, fps: float | None = None
) -> PredictionSet:
    """Read and validate a submission file.

    With ``strict=False`` out-of-range confidences are clamped into [0, 1];
    every other violation is still rejected.
    """
    records = read_submission_records(path, fps)
    violations = []
    kept = []
    for lineno, vid, seg in records:
        if not strict and not 0.0 <= seg.confidence <= 1.0:
            seg = Segment(seg.label, seg.start, seg.end, min(1.0, max(0.0, seg.confidence)))
        for kind, detail in segment_violations(seg, n_classes):
            violations.append(Violation(vid, -1, kind, detail, line=lineno))
        kept.append((vid, seg))
    if violations:
        raise ValidationError(violations, path)
    return PredictionSet.from_records(kept)


def format_submission(p: PredictionSet, header: bool = True, fps: float | None = None) -> str:
    _check_fps(fps)
    k = 1.0 if fps is None else fps
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(SUBMISSION_HEADER)
    for vid, seg in p.records():
        writer.writerow([vid, seg.label, _fmt_time(seg.start * k), _fmt_time(seg.end * k), _fmt_conf(seg.confidence)])
    return buf.getvalue()


def serialize_submission(p: PredictionSet, path, header: bool = True, fps: float | None = None) -> None:
    # quantize before writing so the on-disk order matches what is read back
    Path(path).write_text(format_submission(p.quantized(), header, fps), encoding="utf-8")


# -- interval streams ----------------------------------------------------------


def _parse_stream_header(line: str, path, lineno: int) -> dict:
    fields = {}
    for token in line.lstrip("#").split():
        if "=" not in token:
            raise ParseError(f"malformed header token {token!r}", path, lineno)
        k, v = token.split("=", 1)
        fields[k] = v
    missing = {"video_id", "t", "duration", "n_classes"} - set(fields)
    if missing:
        raise ParseError(f"stream header missing {', '.join(sorted(missing))}", path, lineno)
    return {
        "video_id": fields["video_id"],
        "t": _float(fields["t"], "t", path, lineno),
        "duration": _float(fields["duration"], "duration", path, lineno),
        "n_classes": _int(fields["n_classes"], "n_classes", path, lineno),
    }


def parse_streams(path) -> list[IntervalStream]:
    """Read every interval-stream block in ``path``."""
    text = Path(path).read_text(encoding="utf-8")
    blocks: list[tuple[int, dict, list]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            blocks.append((lineno, _parse_stream_header(line, path, lineno), []))
            continue
        if not blocks:
            raise ParseError("record before any '# video_id=...' header", path, lineno)
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields (label,confidence), got {len(fields)}", path, lineno)
        blocks[-1][2].append((_int(fields[0], "label", path, lineno), _float(fields[1], "confidence", path, lineno)))

    streams = []
    for lineno, head, recs in blocks:
        try:
            expected = partition_count(head["duration"], head["t"])
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
        if len(recs) != expected:
            raise ParseError(
                f"stream {head['video_id']!r}: expected floor(L/t) = {expected} records, got {len(recs)}",
                path,
                lineno,
            )
        try:
            streams.append(
                IntervalStream(
                    head["video_id"], head["t"], head["duration"], head["n_classes"],
                    tuple(r[0] for r in recs), tuple(r[1] for r in recs),
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
    return streams


def format_streams(streams: Iterable[IntervalStream]) -> str:
    lines = []
    for s in streams:
        if not s.video_id or any(ch.isspace() for ch in s.video_id):
            raise ValueError(f"stream video id {s.video_id!r} must be non-empty without whitespace")
        lines.append(f"# video_id={s.video_id} t={s.t!r} duration={_fmt_time(s.duration)} n_classes={s.n_classes}")
        lines += [f"{lab},{_fmt_conf(c)}" for lab, c in zip(s.labels, s.confidences)]
    return "\n".join(lines) + ("\n" if lines else "")


def serialize_streams(streams: Iterable[IntervalStream], path) -> None:
    Path(path).write_text(format_streams(streams), encoding="utf-8")


# -- ground truth --------------------------------------------------------------


def _gt_format(path, fmt: str) -> str:
    if fmt == "auto":
        return "json" if Path(path).suffix.lower() == ".json" else "csv"
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown ground-truth format {fmt!r}")
    return fmt


def _parse_gt_csv(path) -> GroundTruth:
    text = Path(path).read_text(encoding="utf-8")
    n_classes = None
    for raw in text.splitlines():
        s = raw.strip()
        if s.startswith("#") and "n_classes=" in s:
            n_classes = int(s.split("n_classes=", 1)[1].split()[0])
    videos: dict[str, list[Annotation]] = {}
    durations: dict[str, float] = {}
    first = True
    for lineno, fields in _rows(text):
        if first:
            first = False
            if not _is_number(fields[1] if len(fields) > 1 else ""):
                continue
        if len(fields) != 5:
            raise ParseError(f"expected 5 fields, got {len(fields)}", path, lineno)
        vid, dur, cls, start, end = fields
        if not vid:
            raise ParseError("empty video id", path, lineno)
        length = _float(dur, "duration", path, lineno)
        if vid in durations and durations[vid] != length:
            raise ParseError(f"video {vid!r} has conflicting durations", path, lineno)
        durations[vid] = length
        anns = videos.setdefault(vid, [])
        if not (cls or start or end):
            continue
        anns.append(Annotation(_int(cls, "class_id", path, lineno), _float(start, "start", path, lineno), _float(end, "end", path, lineno)))
    return GroundTruth(videos, durations, n_classes)


def _parse_gt_json(path) -> GroundTruth:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        videos, durations = {}, {}
        for vid, entry in doc["videos"].items():
            durations[vid] = float(entry["duration"])
            videos[vid] = [Annotation(int(c), float(s), float(e)) for c, s, e in entry.get("annotations", [])]
        n_classes = doc.get("n_classes")
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad ground-truth JSON: {exc}", path) from None
    return GroundTruth(videos, durations, None if n_classes is None else int(n_classes))


def _rescale_gt(gt: GroundTruth, factor: float) -> GroundTruth:
    videos = {vid: [Annotation(a.label, a.start * factor, a.end * factor) for a in anns] for vid, anns in gt.items()}
    return GroundTruth(videos, {vid: d * factor for vid, d in gt.durations.items()}, gt.n_classes)


def parse_ground_truth(path, fmt: str = "auto", fps: float | None = None) -> GroundTruth:
    """Read and validate ground truth; ``fmt`` is ``auto``, ``csv`` or ``json``."""
    _check_fps(fps)
    fmt = _gt_format(path, fmt)
    gt = _parse_gt_json(path) if fmt == "json" else _parse_gt_csv(path)
    if fps is not None:
        gt = _rescale_gt(gt, 1.0 / fps)
    violations = validate_ground_truth(gt)
    if violations:
        raise ValidationError(violations, path)
    return gt


def format_ground_truth(gt: GroundTruth, fmt: str = "csv") -> str:
    if fmt == "json":
        doc = {
            "n_classes": gt.n_classes,
            "videos": {
                vid: {
                    "duration": quantize_ms(gt.durations[vid]),
                    "annotations": [[a.label, quantize_ms(a.start), quantize_ms(a.end)] for a in anns],
                }
                for vid, anns in gt.items()
            },
        }
        if gt.n_classes is None:
            del doc["n_classes"]
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    if gt.n_classes is not None:
        buf.write(f"# n_classes={gt.n_classes}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(GT_HEADER)
    for vid, anns in gt.items():
        dur = _fmt_time(gt.durations[vid])
        if not anns:
            writer.writerow([vid, dur, "", "", ""])
        for a in anns:
            writer.writerow([vid, dur, a.label, _fmt_time(a.start), _fmt_time(a.end)])
    return buf.getvalue()


def quantize_ms(x: float) -> float:
    return float(_fmt_time(x))


def serialize_ground_truth(gt: GroundTruth, path, fmt: str = "auto", fps: float | None = None) -> None:
    _check_fps(fps)
    if fps is not None:
        gt = _rescale_gt(gt, fps)
    Path(path).write_text(format_ground_truth(gt, _gt_format(path, fmt)), encoding="utf-8")


# -- ensemble config -------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleConfig:
    models: tuple[tuple[Path, float], ...]
    threshold: float


def parse_ensemble_config(path) -> EnsembleConfig:
    """Read an ensemble config; a missing threshold falls back to 0.5 with a warning."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad JSON: {exc}", path) from None
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object", path)
    entries = doc.get("models")
    if not isinstance(entries, list) or not entries:
        raise ParseError("config needs a non-empty 'models' list", path)
    models = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "path" not in entry or "weight" not in entry:
            raise ParseError(f"models[{i}] needs 'path' and 'weight'", path)
        try:
            weight = float(entry["weight"])
        except (TypeError, ValueError):
            raise ParseError(f"models[{i}] weight {entry['weight']!r} is not a number", path) from None
        if not (weight > 0 and math.isfinite(weight)):
            raise ParseError(f"models[{i}] weight must be positive, got {weight}", path)
        p = Path(entry["path"])
        models.append((p if p.is_absolute() else path.parent / p, weight))
    if "threshold" not in doc:
        warnings.warn(f"{path}: no merge threshold given, using {DEFAULT_MERGE_THRESHOLD}", stacklevel=2)
        threshold = DEFAULT_MERGE_THRESHOLD
    else:
        try:
            threshold = float(doc["threshold"])
        except (TypeError, ValueError):
            raise ParseError(f"threshold {doc['threshold']!r} is not a number", path) from None
        if not 0.0 < threshold <= 1.0:
            raise ParseError(f"threshold must be in (0, 1], got {threshold}", path)
    return EnsembleConfig(tuple(models), threshold)


# -- reports -----------------------------------------------------------------------


def write_report(report: EvalReport, path, extra: dict | None = None) -> None:
    doc = report.to_dict()
    if extra:
        doc["meta"] = extra
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
