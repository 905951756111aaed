import pytest
from hypothesis import given, settings, strategies as st

from driverloc.evaluate import (Activity, GroundTruth, evaluate, format_table, match_and_score,
                                overlap_score, read_ground_truth, within_tolerance,
                                write_ground_truth)
from driverloc.intervals import ActivityInterval
from driverloc.keypoints import View


def pred(s, e, cid=None, vid="v"):
    return ActivityInterval(vid, View.FUSED, s, e, 1.0, 0.01, cid)


def test_overlap_fixtures():
    assert overlap_score((236, 241), (237.3, 240)) == pytest.approx(0.54, abs=1e-9)
    assert overlap_score((236, 241), (233.9, 236.067)) == pytest.approx(0.00944, abs=1e-4)


def test_tolerance_fixtures():
    assert within_tolerance((236, 241), (237.3, 240))
    assert within_tolerance((236, 241), (233.9, 236.067))
    assert within_tolerance((100, 120), (110, 130))
    assert not within_tolerance((100, 120), (110.01, 130))
    assert not within_tolerance((100, 120), (100, 130.5))


span = st.tuples(st.floats(0, 1000), st.floats(0.01, 100)).map(lambda t: (t[0], t[0] + t[1]))


@given(span, span)
def test_overlap_properties(a, b):
    v = overlap_score(a, b)
    assert 0 <= v <= 1
    assert v == overlap_score(b, a)
    assert overlap_score(a, a) == 1
    if a[1] <= b[0] or b[1] <= a[0]:
        assert v == 0


def test_accuracy_arithmetic():
    gt = GroundTruth("v", [Activity(1, 10 * i, 10 * i + 5) for i in range(450)])
    preds = [pred(10 * i, 10 * i + 5) for i in range(242)]
    r = match_and_score(gt, preds)
    assert (r.matched, r.total) == (242, 450)
    assert 100 * r.accuracy == pytest.approx(53.8, abs=0.05)
    assert r.mean_overlap == 1.0


def test_one_to_one():
    gt = GroundTruth("v", [Activity(1, 100, 110), Activity(1, 102, 112)])
    r = match_and_score(gt, [pred(101, 111)])
    assert r.matched == 1
    r = match_and_score(gt, [pred(101, 111), pred(103, 113)])
    assert r.matched == 2


def test_extra_prediction_cannot_cost_a_match():
    # a greedy best-overlap-first assignment matches 5 here without the last
    # prediction and only 4 with it
    g = [(7.238894454632279, 12.707918338576146), (9.922618863708987, 13.324594489466195),
         (4.96449378843786, 9.929363236967367), (7.91036533998469, 12.505817444798456),
         (6.94590160296819, 10.595398164019628)]
    p = [(0.8311937266327252, 3.220849732703508), (7.711366494639071, 11.92657316601941),
         (8.638231755511464, 10.584248627155262), (1.3806774612515171, 2.7205814772179973),
         (2.9383553497741755, 5.877491518228613), (2.8866525551893285, 8.200690693997334)]
    gt = GroundTruth("v", [Activity(1, *x) for x in g])
    base = match_and_score(gt, [pred(*x) for x in p[:-1]], tol_s=8).matched
    assert base == 5
    assert match_and_score(gt, [pred(*x) for x in p], tol_s=8).matched == 5


def test_unique_best_overlaps_are_kept():
    gt = GroundTruth("v", [Activity(1, 0, 10), Activity(1, 20, 30)])
    r = match_and_score(gt, [pred(1, 10), pred(0, 10), pred(20, 29), pred(21, 31)])
    assert [(gi, pi) for _, gi, pi, _ in r.pairs] == [(0, 1), (1, 2)]


def test_classified_mode_needs_class():
    gt = GroundTruth("v", [Activity(5, 100, 110)])
    assert match_and_score(gt, [pred(100, 110, 4)], "classified").matched == 0
    assert match_and_score(gt, [pred(100, 110, 5)], "classified").matched == 1
    assert match_and_score(gt, [pred(100, 110, 4)], "proposal").matched == 1
    with pytest.raises(ValueError):
        match_and_score(gt, [], "other")


def test_multi_video_and_per_class():
    gts = [GroundTruth("a", [Activity(3, 10, 20)]), GroundTruth("b", [Activity(3, 10, 20),
                                                                      Activity(7, 40, 50)])]
    r = evaluate(gts, [pred(11, 19, vid="a"), pred(41, 49, vid="b")])
    assert (r.matched, r.total) == (2, 3)
    assert r.per_class == {3: (1, 2), 7: (1, 1)}
    assert "66.7" in format_table({"x": r})
    assert r.to_dict()["per_class"]["3"] == {"matched": 1, "total": 2}


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(1, 10)), max_size=8),
       st.lists(st.tuples(st.integers(0, 50), st.integers(1, 10)), max_size=8),
       st.tuples(st.integers(0, 50), st.integers(1, 10)))
@settings(max_examples=100, deadline=None)
def test_adding_prediction_never_lowers_matches(gts, preds, extra):
    # equivalently, removing a prediction never raises the count
    gt = GroundTruth("v", [Activity(1, s * 5, s * 5 + d) for s, d in gts])
    ps = [pred(s * 5 + 1, s * 5 + d + 2) for s, d in preds]
    base = match_and_score(gt, ps, tol_s=3).matched
    more = match_and_score(gt, ps + [pred(extra[0] * 5, extra[0] * 5 + extra[1])], tol_s=3).matched
    assert more >= base
    assert base <= min(len(gt.activities), len(ps))


def test_ground_truth_round_trip():
    gts = [GroundTruth("a", [Activity(3, 10.1, 20.25)]), GroundTruth("b", [Activity(16, 0.5, 1.0)])]
    text = write_ground_truth(gts)
    assert text.splitlines()[0] == "video_id,class_id,start_s,end_s"
    assert read_ground_truth(text) == gts
    with pytest.raises(ValueError):
        read_ground_truth("a,b\n1,2\n")


@given(span, span, st.floats(-100, 100))
def test_translation_invariance(a, b, shift):
    a2, b2 = (a[0] + shift, a[1] + shift), (b[0] + shift, b[1] + shift)
    assert overlap_score(a2, b2) == pytest.approx(overlap_score(a, b), abs=1e-9)


def test_ground_truth_as_predictions_scores_one():
    acts = [Activity(3, 10, 20), Activity(7, 40, 55), Activity(3, 80, 90)]
    gt = GroundTruth("v", acts)
    preds = [pred(a.start_s, a.end_s, a.class_id) for a in acts]
    for mode in ("proposal", "classified"):
        r = match_and_score(gt, preds, mode)
        assert r.accuracy == 1.0 and r.mean_overlap == 1.0
