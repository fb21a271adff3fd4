import random

import pytest
from hypothesis import given, strategies as st

from talkit.ensemble import (
    CandidateKey,
    EnsembleStats,
    WeightedModel,
    aggregate,
    ensemble_pipeline,
    fuse_confidences,
    iou_merge,
)
from talkit.errors import DomainError
from talkit.segments import PredictionSet, Segment, temporal_iou

from oracles import ensemble_reference, merge_fixed_point

A, B = 0, 1


def ps(**videos):
    return PredictionSet({vid: [Segment(*x) for x in segs] for vid, segs in videos.items()})


def model(preds, weight=1.0, mid="m"):
    return WeightedModel(mid, weight, preds)


@pytest.mark.parametrize(
    "pairs, expected",
    [([(0.8, 1.0), (0.6, 1.0)], 0.7), ([(0.9, 1.0)], 0.9), ([(1.0, 3.0), (0.0, 1.0)], 0.75)],
)
def test_fuse_examples(pairs, expected):
    assert fuse_confidences(pairs) == expected


@pytest.mark.parametrize("pairs", [[], [(0.5, 0.0)], [(0.5, -1.0)], [(1.5, 1.0)]])
def test_fuse_rejects(pairs):
    with pytest.raises(DomainError):
        fuse_confidences(pairs)


pairs = st.lists(st.tuples(st.floats(0, 1), st.floats(1e-3, 1e3)), min_size=1, max_size=6)


@given(pairs, st.floats(1e-3, 1e3))
def test_fuse_convex_and_scale_invariant(cw, k):
    c = fuse_confidences(cw)
    assert min(x for x, _ in cw) <= c <= max(x for x, _ in cw)
    assert fuse_confidences([(x, w * k) for x, w in cw]) == pytest.approx(c, abs=1e-12)


@given(pairs)
def test_fuse_order_invariant(cw):
    assert fuse_confidences(cw) == fuse_confidences(list(reversed(cw)))


def test_weighted_model_rejects_nonpositive_weight():
    with pytest.raises(DomainError):
        model(ps(), weight=0.0)


def test_aggregate_single_model_identity():
    p = ps(v=[(A, 0.0, 1.0, 0.3), (B, 0.5, 2.25, 0.8)], w=[(A, 3.0, 4.0, 0.1)])
    assert aggregate([model(p)]) == p


def test_aggregate_duplicate_candidate_is_averaged():
    p1 = ps(v=[(A, 1.0, 2.0, 0.8)])
    p2 = ps(v=[(A, 1.0, 2.0, 0.6)])
    assert aggregate([model(p1), model(p2)]) == ps(v=[(A, 1.0, 2.0, 0.7)])


def test_aggregate_disjoint_keys_union():
    p1 = ps(v=[(A, 1.0, 2.0, 0.8)])
    p2 = ps(v=[(B, 1.0, 2.0, 0.6)], w=[(A, 0.0, 1.0, 0.2)])
    out = aggregate([model(p1), model(p2)])
    assert out == ps(v=[(A, 1.0, 2.0, 0.8), (B, 1.0, 2.0, 0.6)], w=[(A, 0.0, 1.0, 0.2)])


def test_candidate_key_absorbs_float_noise():
    assert CandidateKey.of(Segment(A, 0.1 + 0.2, 1.0, 0.5)) == CandidateKey.of(Segment(A, 0.3, 1.0, 0.5))
    p1 = ps(v=[(A, 0.1 + 0.2, 1.0, 0.2)])
    p2 = ps(v=[(A, 0.3, 1.0, 0.4)])
    assert aggregate([model(p1), model(p2)]).n_segments == 1


def test_aggregate_needs_a_model():
    with pytest.raises(DomainError):
        aggregate([])


def test_iou_merge_pair():
    p = ps(v=[(A, 0, 2, 0.5), (A, 1, 3, 0.9)])
    assert iou_merge(p, 0.3) == ps(v=[(A, 0, 3, 0.9)])


def test_iou_merge_never_crosses_classes():
    p = ps(v=[(A, 0, 2, 0.5), (B, 1, 3, 0.9)])
    for thr in (0.01, 0.3, 1.0):
        assert iou_merge(p, thr) == p


def test_iou_merge_chain_matches_fixed_point_oracle():
    segs = [(0.0, 2.0, 0.5), (1.0, 3.0, 0.9), (2.5, 4.5, 0.4)]
    expected = merge_fixed_point(segs, 0.3)
    assert expected == [(0.0, 3.0, 0.9), (2.5, 4.5, 0.4)]
    out = iou_merge(ps(v=[(A, *s) for s in segs]), 0.3)
    assert [(s.start, s.end, s.confidence) for s in out["v"]] == expected


def test_iou_merge_is_strict():
    # IoU exactly 0.5 does not exceed 0.5
    p = ps(v=[(A, 0, 2, 0.5), (A, 0, 1, 0.9)])
    assert iou_merge(p, 0.5) == p
    assert iou_merge(p, 0.49).n_segments == 1


@pytest.mark.parametrize("thr", [0.0, -0.1, 1.01])
def test_iou_merge_threshold_domain(thr):
    with pytest.raises(DomainError):
        iou_merge(ps(), thr)


dyadic = st.tuples(st.integers(0, 40), st.integers(1, 12)).map(lambda p: (p[0] / 4, (p[0] + p[1]) / 4))
same_class = st.lists(st.tuples(dyadic, st.integers(0, 10).map(lambda x: x / 10)), max_size=8)


@given(same_class, st.sampled_from([0.1, 0.3, 0.5, 0.75, 1.0]))
def test_iou_merge_properties(raw, thr):
    p = ps(v=[(A, s, e, c) for (s, e), c in raw])
    out = iou_merge(p, thr)
    segs = out.get("v")
    assert len(segs) <= len(raw)
    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            assert temporal_iou(segs[i], segs[j]) <= thr
    assert iou_merge(out, thr) == out
    # union of covered time never shrinks
    before = {x for (s, e), _ in raw for x in range(int(s * 4), int(e * 4))}
    after = {x for sg in segs for x in range(int(sg.start * 4), int(sg.end * 4))}
    assert before <= after
    assert [(s.start, s.end, s.confidence) for s in segs] == merge_fixed_point([(s, e, c) for (s, e), c in raw], thr)


def _random_models(rng, n_models, max_segs=5):
    models = []
    for m in range(n_models):
        videos = {}
        for vid in ("a", "b"):
            keys = set()
            for _ in range(rng.randint(0, max_segs)):
                s = rng.randint(0, 8) / 2
                keys.add((rng.randint(0, 1), s, s + rng.randint(1, 4) / 2))
            videos[vid] = [(lab, s, e, rng.randint(0, 8) / 8) for lab, s, e in sorted(keys)]
        models.append((rng.randint(1, 4) / 2, videos))
    return models


@pytest.mark.parametrize("seed", range(40))
def test_pipeline_matches_reference(seed):
    rng = random.Random(seed)
    raw = _random_models(rng, 3)
    models = [model(ps(**v), w, f"m{i}") for i, (w, v) in enumerate(raw)]
    got = ensemble_pipeline(models, 0.3)
    ref = ensemble_reference(raw, 0.3)
    for vid in ("a", "b"):
        mine = [(s.label, s.start, s.end) for s in got.get(vid)]
        theirs = [(lab, s, e) for lab, s, e, _ in ref.get(vid, [])]
        assert sorted(mine) == sorted(theirs)
        conf_mine = sorted((s.label, s.start, s.end, s.confidence) for s in got.get(vid))
        conf_ref = sorted(ref.get(vid, []))
        for x, y in zip(conf_mine, conf_ref):
            assert x[3] == pytest.approx(float(y[3]), abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_pipeline_model_order_invariant(seed):
    rng = random.Random(1000 + seed)
    raw = _random_models(rng, 4)
    models = [model(ps(**v), w, f"m{i}") for i, (w, v) in enumerate(raw)]
    base = ensemble_pipeline(models, 0.5)
    shuffled = models[:]
    rng.shuffle(shuffled)
    assert ensemble_pipeline(shuffled, 0.5) == base


def test_pipeline_examples_and_stats():
    p = ps(v=[(A, 0, 1, 0.5), (A, 2, 3, 0.6)])
    assert ensemble_pipeline([model(p)], 0.99) == p
    stats = EnsembleStats()
    p1, p2 = ps(v=[(A, 1.0, 2.0, 0.8)]), ps(v=[(A, 1.0, 2.0, 0.6)])
    out = ensemble_pipeline([model(p1, mid="x"), model(p2, mid="y")], 0.5, stats=stats)
    assert out == ps(v=[(A, 1.0, 2.0, 0.7)])
    assert stats.candidates_per_model == {"x": 1, "y": 1}
    assert (stats.aggregated, stats.shared_candidates, stats.merged) == (1, 1, 1)
