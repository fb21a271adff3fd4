"""Synthetic ground truth and noisy interval classifiers.

Random streams
--------------
Every draw comes from a :class:`random.Random` seeded with a string,
``f"{seed}:{purpose}:{key}"``. String seeds are hashed with SHA-512 by the
standard library, so streams are identical across platforms and Python
versions. Purposes are ``gt`` (one stream per video index) and
``clf/<model>`` (one stream per video id, ``<model>`` being the classifier
index within an ensemble).

Ground truth for video ``i`` draws, in order: ``duration_ms`` with
``randint(lo_ms, hi_ms)``; ``count = floor(density * duration / 60 +
random())``; per action a length ``randint(min_ms, max_ms)`` then a label
``randrange(n_classes)``; finally ``count`` cut points ``randint(0, free_ms)``
that split the idle time into gaps.

The classifier visits intervals in order and for each draws ``u =
random()``; if ``u < noise`` it flips, drawing ``j = randrange(n_classes)``
and taking the ``j``-th label of the ``n_classes + 1`` labels (background
included) once the true label is removed. It then draws ``random()`` for
the confidence, scaled into the correct or wrong range.
"""

from __future__ import annotations

import math
import random
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

from .ensemble import DEFAULT_MERGE_THRESHOLD, WeightedModel, ensemble_pipeline
from .errors import DomainError, GenerationError
from .evaluation import DEFAULT_THRESHOLDS, EvalConfig, evaluate
from .localizer import IntervalStream, localize, partition_count
from .segments import Annotation, GroundTruth

N_CLASSES_DEFAULT = 38
LABEL_RULES = ("midpoint", "majority")


def rng_for(seed: int, purpose: str, key) -> random.Random:
    return random.Random(f"{seed}:{purpose}:{key}")


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_videos: int = 10
    duration_range: tuple[float, float] = (120.0, 240.0)
    n_classes: int = N_CLASSES_DEFAULT
    density: float = 3.0
    action_duration: tuple[float, float] = (3.0, 15.0)
    noise: float = 0.1
    correct_confidence: tuple[float, float] = (0.6, 1.0)
    wrong_confidence: tuple[float, float] = (0.2, 0.7)
    label_rule: str = "midpoint"
    allow_overlap: bool = False

    def __post_init__(self):
        for name in ("duration_range", "action_duration", "correct_confidence", "wrong_confidence"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        lo, hi = self.duration_range
        if self.n_videos < 0:
            raise DomainError(f"n_videos must be >= 0, got {self.n_videos}")
        if not 0 <= lo <= hi:
            raise DomainError(f"duration_range must satisfy 0 <= lo <= hi, got {self.duration_range}")
        if self.n_classes < 1:
            raise DomainError(f"n_classes must be >= 1, got {self.n_classes}")
        if self.density < 0:
            raise DomainError(f"density must be >= 0, got {self.density}")
        amin, amax = self.action_duration
        if not 0 < amin <= amax:
            raise DomainError(f"action_duration needs 0 < min <= max, got {self.action_duration}")
        if not 0.0 <= self.noise <= 1.0:
            raise DomainError(f"noise must be in [0, 1], got {self.noise}")
        for name in ("correct_confidence", "wrong_confidence"):
            c_lo, c_hi = getattr(self, name)
            if not 0.0 <= c_lo <= c_hi <= 1.0:
                raise DomainError(f"{name} must satisfy 0 <= lo <= hi <= 1, got {(c_lo, c_hi)}")
        if self.label_rule not in LABEL_RULES:
            raise DomainError(f"label_rule must be one of {LABEL_RULES}, got {self.label_rule!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> SimConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise DomainError(f"unknown simulator option(s): {', '.join(sorted(unknown))}")
        return cls(**doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def video_id(index: int) -> str:
    return f"video_{index:04d}"


def _ms(x: float) -> int:
    return round(x * 1000)


def generate_ground_truth(cfg: SimConfig) -> GroundTruth:
    """Draw videos and non-overlapping actions, all on a 1 ms grid."""
    amin, amax = _ms(cfg.action_duration[0]), _ms(cfg.action_duration[1])
    mean_len = (cfg.action_duration[0] + cfg.action_duration[1]) / 2
    if cfg.density * mean_len / 60.0 >= 1.0 and not cfg.allow_overlap:
        raise GenerationError(
            f"density {cfg.density}/min with {mean_len}s mean actions would fill every video"
        )
    videos, durations = {}, {}
    for i in range(cfg.n_videos):
        rng = rng_for(cfg.seed, "gt", i)
        length = rng.randint(_ms(cfg.duration_range[0]), _ms(cfg.duration_range[1]))
        count = math.floor(cfg.density * length / 60000.0 + rng.random())
        acts = [(rng.randint(amin, amax), rng.randrange(cfg.n_classes)) for _ in range(count)]
        vid = video_id(i)
        if cfg.allow_overlap:
            anns = set()
            for dur, lab in acts:
                if dur > length:
                    continue
                s = rng.randint(0, length - dur)
                anns.add(Annotation(lab, s / 1000, (s + dur) / 1000))
            anns = sorted(anns)
        else:
            # a draw that overfills the video loses its trailing actions
            while sum(d for d, _ in acts) > length:
                acts.pop()
            free = length - sum(d for d, _ in acts)
            cuts = sorted(rng.randint(0, free) for _ in range(len(acts)))
            anns, pos, prev = [], 0, 0
            for cut, (dur, lab) in zip(cuts, acts):
                pos += cut - prev
                prev = cut
                anns.append(Annotation(lab, pos / 1000, (pos + dur) / 1000))
                pos += dur
        videos[vid] = anns
        durations[vid] = length / 1000
    return GroundTruth(videos, durations, cfg.n_classes)


def true_labels(anns: Sequence[Annotation], n: int, t: float, background: int, rule: str = "midpoint") -> list[int]:
    """Reference label of each of ``n`` intervals of width ``t``."""
    out = []
    for k in range(n):
        lo, hi = k * t, (k + 1) * t
        if rule == "midpoint":
            mid = (k + 0.5) * t
            hit = [a for a in anns if a.start <= mid < a.end]
            out.append(hit[0].label if hit else background)
        else:
            best, best_cov = background, t / 2
            for a in anns:
                cov = min(hi, a.end) - max(lo, a.start)
                if cov > best_cov:
                    best, best_cov = a.label, cov
            out.append(best)
    return out


def simulate_classifier(gt: GroundTruth, t: float, cfg: SimConfig, seed: int, model: int = 0) -> list[IntervalStream]:
    """One noisy interval stream per ground-truth video."""
    n_classes = gt.n_classes if gt.n_classes is not None else cfg.n_classes
    bg = n_classes
    c_lo, c_hi = cfg.correct_confidence
    w_lo, w_hi = cfg.wrong_confidence
    streams = []
    for vid, anns in gt.items():
        length = gt.durations[vid]
        n = partition_count(length, t)
        truth = true_labels(anns, n, t, bg, cfg.label_rule)
        rng = rng_for(seed, f"clf/{model}", vid)
        labels, confs = [], []
        for lab in truth:
            if rng.random() < cfg.noise:
                j = rng.randrange(n_classes)
                labels.append(j if j < lab else j + 1)
                confs.append(w_lo + (w_hi - w_lo) * rng.random())
            else:
                labels.append(lab)
                confs.append(c_lo + (c_hi - c_lo) * rng.random())
        streams.append(IntervalStream(vid, t, length, n_classes, tuple(labels), tuple(confs)))
    return streams


@dataclass(frozen=True)
class SweepConfig:
    t_values: tuple[float, ...] = (1.0, 0.5, 0.25)
    noise_values: tuple[float, ...] = (0.0, 0.15)
    ensemble_sizes: tuple[int, ...] = (1, 3)
    merge_threshold: float = DEFAULT_MERGE_THRESHOLD
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS

    def __post_init__(self):
        for name in ("t_values", "noise_values", "thresholds"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        object.__setattr__(self, "ensemble_sizes", tuple(int(x) for x in self.ensemble_sizes))
        if any(k < 1 for k in self.ensemble_sizes):
            raise DomainError(f"ensemble sizes must be >= 1, got {self.ensemble_sizes}")

    @classmethod
    def from_dict(cls, doc: dict) -> SweepConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise DomainError(f"unknown sweep option(s): {', '.join(sorted(unknown))}")
        return cls(**doc)


@dataclass
class SweepRow:
    t: float
    noise: float
    n_models: int
    final_score: float
    single_scores: list[float] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)

    @property
    def method(self) -> str:
        return "single" if self.n_models == 1 else f"ensemble x{self.n_models}"

    @property
    def best_single(self) -> float:
        return max(self.single_scores)


def run_cell(gt: GroundTruth, cfg: SimConfig, t: float, noise: float, n_models: int, sweep: SweepConfig, seed: int) -> SweepRow:
    """Localize ``n_models`` independently seeded classifiers, fuse, score.

    Each model's ensemble weight is its own final score, floored at 1e-6,
    mirroring weights taken from leaderboard scores.
    """
    eval_cfg = EvalConfig(thresholds=sweep.thresholds, n_classes=gt.n_classes)
    cell_cfg = replace(cfg, noise=noise)
    models, singles = [], []
    for m in range(n_models):
        preds = localize(simulate_classifier(gt, t, cell_cfg, seed, model=m))
        score = evaluate(preds, gt, eval_cfg).final_score
        singles.append(score)
        models.append(WeightedModel(f"model_{m}", max(score, 1e-6), preds))
    if n_models == 1:
        final = singles[0]
    else:
        fused = ensemble_pipeline(models, sweep.merge_threshold)
        final = evaluate(fused, gt, eval_cfg).final_score
    return SweepRow(t, noise, n_models, final, singles, [m.weight for m in models])


def sweep_cells(sweep: SweepConfig) -> list[tuple[float, float, int]]:
    return [(t, e, k) for e in sweep.noise_values for k in sweep.ensemble_sizes for t in sweep.t_values]


def sweep(gt: GroundTruth, cfg: SimConfig, sweep_cfg: SweepConfig, seed: int | None = None, jobs: int = 1) -> list[SweepRow]:
    """Score every ``(t, noise, ensemble size)`` cell; rows follow :func:`sweep_cells` order."""
    seed = cfg.seed if seed is None else seed
    cells = sweep_cells(sweep_cfg)
    if jobs > 1 and len(cells) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_cell, gt, cfg, t, e, k, sweep_cfg, seed) for t, e, k in cells]
            return [f.result() for f in futures]
    return [run_cell(gt, cfg, t, e, k, sweep_cfg, seed) for t, e, k in cells]
