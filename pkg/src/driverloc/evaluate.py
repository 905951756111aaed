"""Overlap-score evaluation of predicted activity intervals.

A ground-truth activity ``g = (gs, ge)`` is matched by a prediction
``p = (ps, pe)`` when ``ps`` is within ``tol_s`` of ``gs`` and ``pe`` within
``tol_s`` of ``ge``; in ``classified`` mode the classes must agree too. Among
eligible predictions the one with the highest overlap score (temporal IoU)
is preferred. Each prediction is used at most once; contention is resolved
in favour of more matches.
"""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment


MODES = ("proposal", "classified")


@dataclass(frozen=True)
class Activity:
    class_id: int
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError(f"activity start {self.start_s} must precede end {self.end_s}")
        if not 1 <= self.class_id <= 16:
            raise ValueError(f"class_id {self.class_id} outside 1..16")


@dataclass
class GroundTruth:
    video_id: str
    activities: list[Activity] = field(default_factory=list)


@dataclass
class EvaluationReport:
    mode: str
    matched: int
    total: int
    per_class: dict[int, tuple[int, int]]
    mean_overlap: float
    pairs: list[tuple[str, int, int, float]] = field(default_factory=list, repr=False)

    @property
    def accuracy(self) -> float:
        return self.matched / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "matched": self.matched,
            "total": self.total,
            "accuracy": self.accuracy,
            "mean_overlap": self.mean_overlap,
            "per_class": {str(c): {"matched": m, "total": t}
                          for c, (m, t) in sorted(self.per_class.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def overlap_score(g, p) -> float:
    """Temporal intersection over union of two (start, end) intervals."""
    gs, ge = g
    ps, pe = p
    inter = max(0.0, min(ge, pe) - max(gs, ps))
    union = max(ge, pe) - min(gs, ps)
    return inter / union if union > 0 else 0.0


def within_tolerance(g, p, tol_s: float = 10.0) -> bool:
    gs, ge = g
    ps, pe = p
    return gs - tol_s <= ps <= gs + tol_s and ge - tol_s <= pe <= ge + tol_s


def match_and_score(gt: GroundTruth, preds, mode: str = "proposal",
                    tol_s: float = 10.0) -> EvaluationReport:
    """Match one video's predictions to its ground truth, one-to-one.

    Among eligible (ground truth, prediction) pairs the matching maximizes
    the number of matches, then the total overlap score. Without contention
    every ground truth simply gets its highest-overlap prediction. Unlike a
    greedy assignment, adding a prediction can never lower the count.
    Predictions for other videos are ignored.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    preds = [p for p in preds if p.video_id == gt.video_id]
    n_g = len(gt.activities)
    # eligible pairs weigh (n_g + 1) + os, so cardinality dominates overlap
    weight = np.zeros((n_g, len(preds)))
    scores = np.zeros_like(weight)
    for gi, a in enumerate(gt.activities):
        for pi, p in enumerate(preds):
            if mode == "classified" and p.class_id != a.class_id:
                continue
            if within_tolerance((a.start_s, a.end_s), (p.start_s, p.end_s), tol_s):
                scores[gi, pi] = overlap_score((a.start_s, a.end_s), (p.start_s, p.end_s))
                weight[gi, pi] = n_g + 1 + scores[gi, pi]
    pairs = []
    if weight.size:
        rows, cols = linear_sum_assignment(weight, maximize=True)
        pairs = [(gt.video_id, int(gi), int(pi), float(scores[gi, pi]))
                 for gi, pi in zip(rows, cols) if weight[gi, pi] > 0]

    per_class: dict[int, list[int]] = defaultdict(lambda: [0, 0])
    for a in gt.activities:
        per_class[a.class_id][1] += 1
    for _, gi, _, _ in pairs:
        per_class[gt.activities[gi].class_id][0] += 1
    mean_os = sum(p[3] for p in pairs) / len(pairs) if pairs else 0.0
    return EvaluationReport(mode, len(pairs), len(gt.activities),
                            {c: tuple(v) for c, v in per_class.items()}, mean_os,
                            sorted(pairs, key=lambda t: t[1]))


def merge_reports(reports) -> EvaluationReport:
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to merge")
    modes = {r.mode for r in reports}
    if len(modes) != 1:
        raise ValueError("cannot merge reports of different modes")
    per_class: dict[int, list[int]] = defaultdict(lambda: [0, 0])
    pairs = []
    for r in reports:
        for c, (m, t) in r.per_class.items():
            per_class[c][0] += m
            per_class[c][1] += t
        pairs.extend(r.pairs)
    matched = sum(r.matched for r in reports)
    mean_os = sum(p[3] for p in pairs) / len(pairs) if pairs else 0.0
    return EvaluationReport(modes.pop(), matched, sum(r.total for r in reports),
                            {c: tuple(v) for c, v in per_class.items()}, mean_os, pairs)


def evaluate(gts, preds, mode: str = "proposal", tol_s: float = 10.0) -> EvaluationReport:
    """Score predictions against ground truth spanning several videos."""
    preds = list(preds)
    return merge_reports(match_and_score(gt, preds, mode, tol_s) for gt in gts)


def format_table(reports: dict[str, EvaluationReport]) -> str:
    """Aligned text table, one row per labelled report."""
    rows = [("run", "mode", "accurate predictions", "total", "accuracy %", "mean os")]
    for label, r in reports.items():
        rows.append((label, r.mode, str(r.matched), str(r.total),
                     f"{100 * r.accuracy:.1f}", f"{r.mean_overlap:.3f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# ground-truth CSV: video_id,class_id,start_s,end_s

GT_FIELDS = ["video_id", "class_id", "start_s", "end_s"]


def read_ground_truth(text: str) -> list[GroundTruth]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != GT_FIELDS:
        raise ValueError(f"ground-truth CSV must have header {','.join(GT_FIELDS)}")
    videos: dict[str, GroundTruth] = {}
    for row in reader:
        vid = row["video_id"]
        gt = videos.setdefault(vid, GroundTruth(vid))
        gt.activities.append(Activity(int(row["class_id"]), float(row["start_s"]),
                                      float(row["end_s"])))
    return list(videos.values())


def write_ground_truth(gts) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GT_FIELDS)
    for gt in gts:
        for a in gt.activities:
            w.writerow([gt.video_id, a.class_id, repr(float(a.start_s)), repr(float(a.end_s))])
    return buf.getvalue()
