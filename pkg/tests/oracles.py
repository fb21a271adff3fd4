"""Brute-force reference implementations used as test oracles.

None of these import talkit; they work on plain tuples and exact
fractions so they share no code path with the package.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def frac(x) -> Fraction:
    return Fraction(x) if not isinstance(x, str) else Fraction(x)


def iou_exact(a, b) -> Fraction:
    """a, b: (start, end) pairs."""
    s1, e1 = frac(a[0]), frac(a[1])
    s2, e2 = frac(b[0]), frac(b[1])
    inter = max(Fraction(0), min(e1, e2) - max(s1, s2))
    if inter == 0:
        return Fraction(0)
    return inter / ((e1 - s1) + (e2 - s2) - inter)


def rle_segments(labels, confs, t, background):
    """Naive run-length encoding: (label, start, end, max_conf) per run."""
    out = []
    k = 0
    for lab, group in itertools.groupby(zip(labels, confs), key=lambda x: x[0]):
        run = list(group)
        if lab != background:
            out.append((lab, k * t, (k + len(run)) * t, max(c for _, c in run)))
        k += len(run)
    return out


def pr_points(hits, n_gt):
    """(precision, recall) after each ranked prediction, as fractions."""
    pts = []
    tp = 0
    for k, h in enumerate(hits, start=1):
        tp += h
        pts.append((Fraction(tp, k), Fraction(tp, n_gt)))
    return pts


def ap_exhaustive(hits, n_gt, mode="101") -> Fraction:
    """AP by enumerating every PR point for every recall level."""
    if n_gt == 0 or not hits:
        return Fraction(0)
    pts = pr_points(hits, n_gt)
    if mode == "101":
        levels = [Fraction(r, 100) for r in range(101)]
        total = Fraction(0)
        for r in levels:
            cands = [p for p, rec in pts if rec >= r]
            total += max(cands) if cands else 0
        return total / 101
    # all-point: area under the envelope, step by step in recall
    recalls = sorted({rec for _, rec in pts})
    total = Fraction(0)
    prev = Fraction(0)
    for r in recalls:
        total += (r - prev) * max(p for p, rec in pts if rec >= r)
        prev = r
    return total


def greedy_match(preds, gts, thr):
    """preds: list of (conf, start, end) already ranked; gts: (start, end).

    Returns hit flags. Each prediction takes the free ground truth with the
    highest exact IoU (lowest index on ties) if that IoU >= thr.
    """
    free = set(range(len(gts)))
    flags = []
    for _, s, e in preds:
        scored = [(iou_exact((s, e), gts[j]), -j) for j in free]
        scored = [x for x in scored if x[0] >= frac(thr)]
        if scored:
            best = max(scored)
            free.discard(-best[1])
            flags.append(True)
        else:
            flags.append(False)
    return flags


def score(preds, gts, thresholds, mode="101"):
    """Reference final score.

    preds: {video: [(label, start, end, conf)]}; gts: {video: [(label, start, end)]}.
    Returns (final, {(label, thr): ap}). Classes are those present in gts.
    """
    classes = sorted({a[0] for anns in gts.values() for a in anns})
    aps = {}
    for c in classes:
        n_gt = sum(1 for anns in gts.values() for a in anns if a[0] == c)
        for thr in thresholds:
            pooled = []
            for vid in sorted(preds):
                mine = [(p[3], p[1], p[2]) for p in preds[vid] if p[0] == c]
                mine.sort(key=lambda x: (-x[0], x[1], x[2]))
                g = sorted((a[1], a[2]) for a in gts.get(vid, []) if a[0] == c)
                for (conf, s, e), hit in zip(mine, greedy_match(mine, g, thr)):
                    pooled.append(((-conf, s, vid, e), hit))
            pooled.sort(key=lambda x: x[0])
            aps[(c, thr)] = ap_exhaustive([h for _, h in pooled], n_gt, mode)
    if not classes:
        empty = all(not v for v in preds.values())
        return (Fraction(1) if empty else Fraction(0)), aps
    per_t = [sum(aps[(c, t)] for c in classes) / len(classes) for t in thresholds]
    return sum(per_t) / len(per_t), aps


def merge_fixed_point(segs, thr):
    """segs: list of (start, end, conf) of one class.

    At each step unions the pair with the largest exact IoU above thr; ties
    go to the lexicographically smallest pair of (start, end, conf) tuples.
    """
    segs = sorted(segs)
    thr = frac(thr)
    while True:
        best = None
        for i, j in itertools.combinations(range(len(segs)), 2):
            v = iou_exact(segs[i][:2], segs[j][:2])
            if v > thr:
                key = (-v, segs[i], segs[j])
                if best is None or key < best[0]:
                    best = (key, i, j)
        if best is None:
            return segs
        _, i, j = best
        a, b = segs[i], segs[j]
        rest = [s for k, s in enumerate(segs) if k not in (i, j)]
        rest.append((min(a[0], b[0]), max(a[1], b[1]), max(a[2], b[2])))
        segs = sorted(rest)


def ensemble_reference(models, thr):
    """models: list of (weight, {video: [(label, start, end, conf)]}).

    Exact-key candidate averaging followed by per-class fixed-point merge.
    Inputs must not repeat a key within one model.
    """
    table = {}
    for w, preds in models:
        for vid, segs in preds.items():
            for lab, s, e, c in segs:
                table.setdefault(vid, {}).setdefault((lab, s, e), []).append((c, w))
    out = {}
    for vid, cands in table.items():
        fused = {}
        for (lab, s, e), cw in cands.items():
            conf = sum(Fraction(c) * Fraction(w) for c, w in cw) / sum(Fraction(w) for _, w in cw)
            fused.setdefault(lab, []).append((s, e, conf))
        merged = []
        for lab, segs in fused.items():
            merged += [(lab, s, e, c) for s, e, c in merge_fixed_point(segs, thr)]
        out[vid] = sorted(merged, key=lambda x: (x[1], x[2], x[0]))
    return out
