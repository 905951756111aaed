"""Synthetic sequences and multi-view scenarios with planted activities."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import OverlappingActivities
from .evaluate import Activity, GroundTruth, write_ground_truth
from .keypoints import (CAMERA_VIEWS, DEFAULT_FRAME_H, DEFAULT_FRAME_W, HEAD_HANDS,
                        NUM_KEYPOINTS, KeypointSeries, View, write_keypoints_csv)


def gen_null(n: int, dim: int, seed=None) -> np.ndarray:
    """i.i.d. standard Gaussian observations, one per row."""
    if n < 4:
        raise ValueError("n must be >= 4")
    return np.random.default_rng(seed).standard_normal((n, dim))


def gen_planted(n: int, dim: int, t1: int, t2: int, shift, seed=None) -> np.ndarray:
    """Null observations with ``shift`` added to rows ``t1 .. t2-1``."""
    if not 0 <= t1 < t2 <= n:
        raise ValueError(f"need 0 <= t1 < t2 <= n, got ({t1}, {t2})")
    x = gen_null(n, dim, seed)
    x[t1:t2] += np.broadcast_to(np.asarray(shift, dtype=float), (dim,))
    return x


@dataclass
class ScenarioActivity:
    class_id: int
    start_s: float
    end_s: float
    shift: list[float] | None = None
    cov_scale: float | None = None


@dataclass
class ScenarioSpec:
    n_seconds: float
    sample_hz: float = 10.0
    dim: int = 2 * len(HEAD_HANDS)
    activities: list[ScenarioActivity] = field(default_factory=list)
    noise_sd: float = 1.0
    seed: int = 0
    video_id: str = "synth"
    # per-dimension shift, in noise_sd units, for activities without one
    default_shift: float = 1.5

    def validate(self) -> "ScenarioSpec":
        acts = sorted(self.activities, key=lambda a: a.start_s)
        for a in acts:
            if not 0 <= a.start_s < a.end_s <= self.n_seconds:
                raise OverlappingActivities(
                    f"activity ({a.start_s}, {a.end_s}) outside [0, {self.n_seconds}]")
            if a.shift is not None and len(a.shift) != self.dim:
                raise ValueError(f"shift of length {len(a.shift)} for dim {self.dim}")
        for a, b in zip(acts, acts[1:]):
            if b.start_s < a.end_s:
                raise OverlappingActivities(
                    f"activities ({a.start_s}, {a.end_s}) and ({b.start_s}, {b.end_s}) overlap")
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        d = json.loads(text)
        d["activities"] = [ScenarioActivity(**a) for a in d.get("activities", [])]
        return cls(**d)


def random_scenario(n_activities: int = 10, seed: int = 0, sample_hz: float = 10.0,
                    duration_s=(8.0, 20.0), gap_s=(20.0, 45.0), video_id: str = "synth",
                    **kwargs) -> ScenarioSpec:
    """Activities with random class, duration and spacing, in time order."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    t = float(rng.uniform(*gap_s))
    acts = []
    for _ in range(n_activities):
        dur = float(rng.uniform(*duration_s))
        acts.append(ScenarioActivity(int(rng.integers(1, 17)), round(t, 1), round(t + dur, 1)))
        t += dur + float(rng.uniform(*gap_s))
    return ScenarioSpec(n_seconds=round(t, 1), sample_hz=sample_hz, activities=acts,
                        seed=seed, video_id=video_id, **kwargs).validate()


def _squash(z):
    return 1.0 / (1.0 + np.exp(-z))


def gen_scenario(spec: ScenarioSpec) -> tuple[dict[View, KeypointSeries], GroundTruth]:
    """Three synchronized views sharing activity signals, plus annotations.

    Each view is ``sigmoid(baseline + activity_signal + view_noise)``, so
    values lie in (0, 1). Activities add a shared mean shift (or scale the
    noise) over the same samples in every view.
    """
    spec.validate()
    n = int(round(spec.n_seconds * spec.sample_hz))
    root = np.random.SeedSequence([spec.seed, 2])
    act_seq, *view_seqs = root.spawn(1 + len(CAMERA_VIEWS))
    act_rng = np.random.default_rng(act_seq)

    signal = np.zeros((n, spec.dim))
    scale = np.ones((n, 1))
    for a in spec.activities:
        i0 = int(round(a.start_s * spec.sample_hz))
        i1 = int(round(a.end_s * spec.sample_hz))
        if a.shift is not None:
            shift = np.asarray(a.shift, dtype=float)
        else:
            signs = act_rng.choice([-1.0, 1.0], size=spec.dim)
            shift = spec.default_shift * spec.noise_sd * signs
        if a.cov_scale is not None:
            scale[i0:i1] = a.cov_scale
        else:
            signal[i0:i1] += shift

    series = {}
    for view, seq in zip(CAMERA_VIEWS, view_seqs):
        rng = np.random.default_rng(seq)
        baseline = rng.uniform(-1.0, 1.0, size=spec.dim)
        z = baseline + signal + scale * spec.noise_sd * rng.standard_normal((n, spec.dim))
        series[view] = KeypointSeries(spec.video_id, view, spec.sample_hz, _squash(z))
    gt = GroundTruth(spec.video_id, [Activity(a.class_id, a.start_s, a.end_s)
                                     for a in sorted(spec.activities, key=lambda a: a.start_s)])
    return series, gt


def series_to_rows(series: KeypointSeries, subset=HEAD_HANDS, frame_w=DEFAULT_FRAME_W,
                   frame_h=DEFAULT_FRAME_H, confidence: float = 0.9):
    """Keypoint CSV rows that normalize back to ``series`` (one per sample)."""
    if series.dim != 2 * len(subset):
        raise ValueError("series dimensionality does not match the keypoint subset")
    idx = np.asarray(subset)
    for t, v in enumerate(series.values):
        kp = np.zeros((NUM_KEYPOINTS, 3))
        xy = v.reshape(-1, 2)
        kp[idx, 0] = xy[:, 0] * frame_w
        kp[idx, 1] = xy[:, 1] * frame_h
        kp[idx, 2] = confidence
        yield t, 0, kp


def write_scenario(spec: ScenarioSpec, out_dir) -> dict[str, Path]:
    """Write per-view keypoint CSVs, ground truth and the scenario spec into ``out_dir``.

    The CSVs hold one row per sample, so they are read back with
    ``fps = spec.sample_hz``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series, gt = gen_scenario(spec)
    paths = {}
    for view, s in series.items():
        p = out / f"{spec.video_id}_{view.value}.csv"
        write_keypoints_csv(p, series_to_rows(s))
        paths[view.value] = p
    paths["ground_truth"] = out / "ground_truth.csv"
    paths["ground_truth"].write_text(write_ground_truth([gt]))
    paths["spec"] = out / "scenario.json"
    paths["spec"].write_text(spec.to_json())
    return paths
