"""Pose keypoint ingestion: parsing, confidence filtering, normalization,
gap imputation, resampling and windowing.

Keypoints follow the COCO-17 layout::

    0 nose         5 left_shoulder    10 right_wrist    15 left_ankle
    1 left_eye     6 right_shoulder   11 left_hip       16 right_ankle
    2 right_eye    7 left_elbow       12 right_hip
    3 left_ear     8 right_elbow      13 left_knee
    4 right_ear    9 left_wrist       14 right_knee
"""

from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptySeries, MalformedRow, NonMonotonicFrames, UpsampleRequested

NUM_KEYPOINTS = 17
COCO_KEYPOINTS = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)
# nose, eyes, ears, shoulders, elbows, wrists
HEAD_HANDS = tuple(range(11))

DEFAULT_FRAME_W = 1920
DEFAULT_FRAME_H = 1080
DEFAULT_CONF_THRESHOLD = 0.5

CSV_HEADER = ["frame_index", "person_id"] + [
    f"kp{i}_{c}" for i in range(NUM_KEYPOINTS) for c in ("x", "y", "c")
]


class View(str, enum.Enum):
    DASHBOARD = "Dashboard"
    REARVIEW = "Rearview"
    RIGHT_WINDOW = "RightWindow"
    FUSED = "Fused"

    @classmethod
    def parse(cls, name: str) -> "View":
        key = name.strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "dashboard": cls.DASHBOARD, "dash": cls.DASHBOARD,
            "rearview": cls.REARVIEW, "rear": cls.REARVIEW,
            "rightwindow": cls.RIGHT_WINDOW, "right": cls.RIGHT_WINDOW,
            "rightsidewindow": cls.RIGHT_WINDOW,
            "fused": cls.FUSED,
        }
        if key not in aliases:
            raise ValueError(f"unknown camera view {name!r}")
        return aliases[key]


CAMERA_VIEWS = (View.DASHBOARD, View.REARVIEW, View.RIGHT_WINDOW)


@dataclass(frozen=True)
class RawKeypointFrame:
    frame_index: int
    timestamp_s: float
    keypoints: np.ndarray  # (17, 3): x px, y px, confidence
    person_id: int = 0

    @property
    def mean_confidence(self) -> float:
        return float(self.keypoints[:, 2].mean())


@dataclass(frozen=True)
class FeatureVector:
    """Normalized (x, y) pairs for the selected keypoints.

    ``mask[i]`` is True when keypoint i was observed in this frame and False
    when its coordinates were carried forward from an earlier frame.
    """

    values: np.ndarray  # (2*S,)
    mask: np.ndarray  # (S,) bool


@dataclass
class KeypointSeries:
    """Uniformly sampled feature vectors for one camera view of one video."""

    video_id: str
    view: View
    sample_hz: float
    values: np.ndarray  # (T, 2*S)
    mask: np.ndarray = field(default=None)  # (T, S) bool
    start_s: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D (time, feature) array")
        if self.mask is None:
            self.mask = np.ones((len(self.values), self.values.shape[1] // 2), dtype=bool)
        if self.sample_hz <= 0:
            raise ValueError("sample_hz must be positive")

    def __len__(self):
        return len(self.values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_hz

    @property
    def times(self) -> np.ndarray:
        return self.start_s + np.arange(len(self)) / self.sample_hz

    def vectors(self) -> Iterator[FeatureVector]:
        for v, m in zip(self.values, self.mask):
            yield FeatureVector(v, m)


# ---------------------------------------------------------------------------
# parsing

def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="ascii", newline="")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("ascii"))
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="ascii", newline="")


def _iter_csv(lines: Iterable[str]):
    it = iter(enumerate(lines, start=1))
    for line_no, line in it:
        if line.strip():
            header = [h.strip() for h in line.strip().split(",")]
            if header[:2] != CSV_HEADER[:2] or len(header) != len(CSV_HEADER):
                raise MalformedRow(line_no, "missing or invalid header row")
            break
    else:
        return
    for line_no, line in it:
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(CSV_HEADER):
            raise MalformedRow(line_no, f"expected {len(CSV_HEADER)} columns, got {len(parts)}")
        try:
            frame = int(parts[0])
            person = int(parts[1])
            kp = np.array([float(p) for p in parts[2:]], dtype=float).reshape(NUM_KEYPOINTS, 3)
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
        yield line_no, frame, person, kp


def _iter_jsonl(lines: Iterable[str]):
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            frame = int(rec["frame"])
            person = int(rec.get("person", 0))
            kp = np.asarray(rec["keypoints"], dtype=float)
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedRow(line_no, str(exc)) from None
        if kp.shape != (NUM_KEYPOINTS, 3):
            raise MalformedRow(line_no, f"expected 17 [x,y,c] triples, got shape {kp.shape}")
        yield line_no, frame, person, kp


def parse_keypoints(source: BinaryIO | str | Path | bytes, fps: float,
                    person_id: int | None = None) -> list[RawKeypointFrame]:
    """Read a keypoint CSV (or JSON-lines) stream into per-frame records.

    Several rows may share a frame index (one per detected person); the one
    with the highest mean confidence is kept unless ``person_id`` selects a
    specific person.
    """
    if fps <= 0:
        raise ValueError("fps must be positive")
    fh = _open_text(source)
    try:
        lines = list(fh)
    finally:
        if isinstance(source, (str, Path)):
            fh.close()
    first = next((ln for ln in lines if ln.strip()), "")
    rows = _iter_jsonl(lines) if first.lstrip().startswith("{") else _iter_csv(lines)

    frames: list[RawKeypointFrame] = []
    for line_no, frame, person, kp in rows:
        if frame < 0:
            raise MalformedRow(line_no, "negative frame index")
        if not np.all(np.isfinite(kp)):
            raise MalformedRow(line_no, "non-finite value")
        if person_id is not None and person != person_id:
            continue
        kp[:, 2] = np.clip(kp[:, 2], 0.0, 1.0)
        rec = RawKeypointFrame(frame, frame / fps, kp, person)
        if frames and frame < frames[-1].frame_index:
            raise NonMonotonicFrames(
                f"frame index {frame} at line {line_no} follows {frames[-1].frame_index}")
        if frames and frame == frames[-1].frame_index:
            if rec.mean_confidence > frames[-1].mean_confidence:
                frames[-1] = rec
            continue
        frames.append(rec)
    return frames


# ---------------------------------------------------------------------------
# per-frame features

def select_and_normalize(frame: RawKeypointFrame, frame_w: float, frame_h: float,
                         conf_threshold: float = DEFAULT_CONF_THRESHOLD,
                         subset: Sequence[int] = HEAD_HANDS,
                         previous: FeatureVector | None = None) -> FeatureVector:
    if frame_w <= 0 or frame_h <= 0:
        raise ValueError("frame dimensions must be positive")
    idx = np.asarray(subset, dtype=int)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= NUM_KEYPOINTS:
        raise ValueError("subset must be a non-empty subset of 0..16")
    kp = frame.keypoints[idx]
    xy = np.clip(kp[:, :2] / np.array([frame_w, frame_h]), 0.0, 1.0)
    observed = kp[:, 2] > conf_threshold
    if previous is not None:
        fallback = previous.values.reshape(-1, 2)
    else:
        fallback = np.zeros_like(xy)
    out = np.where(observed[:, None], xy, fallback)
    return FeatureVector(out.reshape(-1), observed)


def build_series(frames: Sequence[RawKeypointFrame], fps: float, video_id: str, view: View,
                 frame_w: float = DEFAULT_FRAME_W, frame_h: float = DEFAULT_FRAME_H,
                 conf_threshold: float = DEFAULT_CONF_THRESHOLD,
                 subset: Sequence[int] = HEAD_HANDS) -> KeypointSeries:
    """Turn parsed frames into a uniformly spaced series at ``fps``.

    Frame indices missing from the input (no detection) are filled by carrying
    the previous vector forward with an all-imputed mask. The series starts
    at frame 0.
    """
    if not frames:
        raise EmptySeries("no keypoint frames")
    s = len(subset)
    n = frames[-1].frame_index + 1
    values = np.zeros((n, 2 * s))
    mask = np.zeros((n, s), dtype=bool)
    prev = None
    pos = 0
    for fr in frames:
        while pos < fr.frame_index:
            if prev is not None:
                values[pos] = prev.values
            pos += 1
        prev = select_and_normalize(fr, frame_w, frame_h, conf_threshold, subset, prev)
        values[pos] = prev.values
        mask[pos] = prev.mask
        pos += 1
    return KeypointSeries(video_id, View(view), float(fps), values, mask)


# ---------------------------------------------------------------------------
# time-axis transforms

def resample(series: KeypointSeries, target_hz: float) -> KeypointSeries:
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    if target_hz > series.sample_hz * (1 + 1e-9):
        raise UpsampleRequested(f"{target_hz} Hz requested from {series.sample_hz} Hz input")
    step = max(1, int(math.floor(series.sample_hz / target_hz + 1e-9)))
    if step == 1:
        return series
    return replace(series, sample_hz=series.sample_hz / step,
                   values=series.values[::step], mask=series.mask[::step])


def _slice(series: KeypointSeries, start_s: float, stop_s: float) -> KeypointSeries:
    i0 = int(round((start_s - series.start_s) * series.sample_hz))
    i1 = int(round((stop_s - series.start_s) * series.sample_hz))
    i0, i1 = max(i0, 0), min(i1, len(series))
    return replace(series, values=series.values[i0:i1], mask=series.mask[i0:i1],
                   start_s=series.start_s + i0 / series.sample_hz)


def window(series: KeypointSeries, window_s: float, offset_s: float = 0.0,
           min_obs: int = 20) -> list[tuple[float, KeypointSeries]]:
    """Cut the series into back-to-back windows, plus a shifted second pass.

    The first pass starts at 0; when ``offset_s > 0`` a second pass starts at
    ``offset_s``. Windows holding fewer than ``min_obs`` observations (short
    trailing pieces) are dropped. Results are ordered by pass, then start.
    """
    if len(series) == 0:
        raise EmptySeries("cannot window an empty series")
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    if not 0 <= offset_s < window_s:
        raise ValueError("offset_s must satisfy 0 <= offset_s < window_s")
    end = series.start_s + series.duration_s
    out = []
    passes = [0.0] if offset_s == 0 else [0.0, offset_s]
    for first in passes:
        start = series.start_s + first
        while start < end - 1e-9:
            w = _slice(series, start, start + window_s)
            if len(w) >= min_obs:
                out.append((w.start_s, w))
            start += window_s
    return out


# ---------------------------------------------------------------------------
# writing

def write_keypoints_csv(path, rows: Iterable[tuple[int, int, np.ndarray]]) -> None:
    """Write ``(frame_index, person_id, keypoints[17, 3])`` rows as keypoint CSV."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for frame, person, kp in rows:
            vals = ",".join(f"{v:.6g}" for v in np.asarray(kp, dtype=float).reshape(-1))
            fh.write(f"{frame},{person},{vals}\n")
