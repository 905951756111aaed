"""Window sweeps, proposal de-duplication and multi-view fusion."""

from __future__ import annotations

from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor

from .config import DetectionConfig
from .evaluate import overlap_score
from .intervals import ActivityInterval
from .keypoints import KeypointSeries, View, resample, window
from .scan import detect

MIN_WINDOW_OBS = 20


def _detect_job(args):
    w, cfg = args
    return detect(w, cfg)


def sweep(series: KeypointSeries, cfg: DetectionConfig, threads: int = 1) -> list[ActivityInterval]:
    """Detect on every window of both passes (offset 0 and ``offset_secs``).

    Output order follows the window order, independent of ``threads``.
    """
    s = resample(series, cfg.sample_hz)
    wins = [w for _, w in window(s, cfg.window_secs, cfg.offset_secs, MIN_WINDOW_OBS)]
    jobs = [(w, cfg) for w in wins]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            found = list(pool.map(_detect_job, jobs))
    else:
        found = [_detect_job(j) for j in jobs]
    return [iv for iv in found if iv is not None]


def _iou(a: ActivityInterval, b: ActivityInterval) -> float:
    return overlap_score((a.start_s, a.end_s), (b.start_s, b.end_s))


def _rank_key(iv: ActivityInterval):
    p = iv.p_value if iv.p_value is not None else float("inf")
    stat = iv.stat_value if iv.stat_value == iv.stat_value else float("-inf")
    return (p, -stat, iv.start_s, iv.end_s)


def merge_proposals(proposals, iou_min: float = 0.3) -> list[ActivityInterval]:
    """Single-link clustering by IoU >= ``iou_min``; keep each cluster's best.

    Best means smallest p-value, then larger statistic, then earlier start.
    """
    props = list(proposals)
    parent = list(range(len(props)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(props)):
        for j in range(i + 1, len(props)):
            if _iou(props[i], props[j]) >= iou_min:
                parent[find(i)] = find(j)

    clusters = defaultdict(list)
    for i, p in enumerate(props):
        clusters[find(i)].append(p)
    kept = [min(members, key=_rank_key) for members in clusters.values()]
    return sorted(kept, key=lambda iv: (iv.start_s, iv.end_s))


def _agrees(a, b, start_tol, end_tol) -> bool:
    return abs(a.start_s - b.start_s) <= start_tol and abs(a.end_s - b.end_s) <= end_tol


def fuse_views(per_view: dict, start_tol_s: float = 2.0, end_tol_s: float = 2.0,
               min_views: int = 2) -> list[ActivityInterval]:
    """Keep intervals that at least ``min_views`` camera views agree on.

    Proposals are visited in (start, end, view) order. Each unused proposal
    anchors a group with, from every other view, the closest unused proposal
    whose start and end are within tolerance of the anchor's. Groups spanning
    ``min_views`` views become one interval at the members' mean endpoints.
    """
    pool = []
    for view, ivs in per_view.items():
        view = view if isinstance(view, View) else View.parse(view)
        pool.extend((iv, view) for iv in ivs)
    pool.sort(key=lambda t: (t[0].video_id, t[0].start_s, t[0].end_s, t[1].value,
                             _rank_key(t[0])))
    used = [False] * len(pool)
    fused = []
    for a_idx, (anchor, a_view) in enumerate(pool):
        if used[a_idx]:
            continue
        members = [a_idx]
        views = {a_view}
        for view in sorted({v for _, v in pool} - {a_view}, key=lambda v: v.value):
            best = None
            for j, (iv, v) in enumerate(pool):
                if used[j] or v != view or iv.video_id != anchor.video_id:
                    continue
                if not _agrees(anchor, iv, start_tol_s, end_tol_s):
                    continue
                key = (abs(iv.start_s - anchor.start_s) + abs(iv.end_s - anchor.end_s),
                       iv.start_s, iv.end_s)
                if best is None or key < best[0]:
                    best = (key, j)
            if best is not None:
                members.append(best[1])
                views.add(view)
        if len(views) < min_views:
            continue
        for j in members:
            used[j] = True
        ivs = [pool[j][0] for j in members]
        ps = [iv.p_value for iv in ivs if iv.p_value is not None]
        stats = [iv.stat_value for iv in ivs if iv.stat_value == iv.stat_value]
        fused.append(ActivityInterval(
            video_id=anchor.video_id,
            view=View.FUSED,
            start_s=sum(iv.start_s for iv in ivs) / len(ivs),
            end_s=sum(iv.end_s for iv in ivs) / len(ivs),
            stat_value=sum(stats) / len(stats) if stats else float("nan"),
            p_value=max(ps) if ps else None,
        ))
    return sorted(fused, key=lambda iv: (iv.video_id, iv.start_s, iv.end_s))


def propose(series_by_view: dict, cfg: DetectionConfig, merge_iou: float = 0.3,
            start_tol_s: float = 2.0, end_tol_s: float = 2.0, min_views: int = 2,
            threads: int = 1) -> tuple[dict, list[ActivityInterval]]:
    """Sweep every view, merge each view's proposals, then fuse across views.

    ``min_views`` is capped at the number of views supplied. Returns the
    merged per-view proposals and the fused intervals.
    """
    jobs, owners = [], []
    for view, series in series_by_view.items():
        s = resample(series, cfg.sample_hz)
        for _, w in window(s, cfg.window_secs, cfg.offset_secs, MIN_WINDOW_OBS):
            jobs.append((w, cfg))
            owners.append(view)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            found = list(pool.map(_detect_job, jobs))
    else:
        found = [_detect_job(j) for j in jobs]
    per_view = {view: [] for view in series_by_view}
    for view, iv in zip(owners, found):
        if iv is not None:
            per_view[view].append(iv)
    merged = {view: merge_proposals(ivs, merge_iou) for view, ivs in per_view.items()}
    fused = fuse_views(merged, start_tol_s, end_tol_s, min(min_views, len(merged)))
    return merged, fused
