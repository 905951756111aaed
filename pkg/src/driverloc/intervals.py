"""Activity interval records and their JSON / CSV encodings."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, replace

from .keypoints import View

CSV_FIELDS = ["video_id", "view", "start_s", "end_s", "stat", "p", "class_id"]


@dataclass(frozen=True)
class ActivityInterval:
    video_id: str
    view: View
    start_s: float
    end_s: float
    stat_value: float = float("nan")
    p_value: float | None = None
    class_id: int | None = None
    label: str | None = None
    error: str | None = None

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError(f"interval start {self.start_s} must precede end {self.end_s}")
        if self.class_id is not None and not 1 <= self.class_id <= 16:
            raise ValueError(f"class_id {self.class_id} outside 1..16")
        if not isinstance(self.view, View):
            object.__setattr__(self, "view", View.parse(str(self.view)))

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def with_class(self, class_id, label=None, error=None) -> "ActivityInterval":
        return replace(self, class_id=class_id, label=label, error=error)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["view"] = self.view.value
        if d["stat_value"] != d["stat_value"]:
            d["stat_value"] = None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ActivityInterval":
        stat = d.get("stat_value")
        return cls(
            video_id=str(d["video_id"]),
            view=View.parse(d["view"]),
            start_s=float(d["start_s"]),
            end_s=float(d["end_s"]),
            stat_value=float("nan") if stat is None else float(stat),
            p_value=None if d.get("p_value") is None else float(d["p_value"]),
            class_id=None if d.get("class_id") is None else int(d["class_id"]),
            label=d.get("label"),
            error=d.get("error"),
        )


def intervals_to_json(intervals, **extra) -> str:
    """Serialize intervals, plus any extra top-level keys (e.g. the config)."""
    doc = dict(extra)
    doc["intervals"] = [iv.to_dict() for iv in intervals]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def intervals_from_json(text: str) -> list[ActivityInterval]:
    doc = json.loads(text)
    items = doc["intervals"] if isinstance(doc, dict) else doc
    return [ActivityInterval.from_dict(d) for d in items]


def intervals_to_csv(intervals) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for iv in intervals:
        w.writerow([
            iv.video_id, iv.view.value, repr(iv.start_s), repr(iv.end_s),
            "" if iv.stat_value != iv.stat_value else repr(iv.stat_value),
            "" if iv.p_value is None else repr(iv.p_value),
            "" if iv.class_id is None else iv.class_id,
        ])
    return buf.getvalue()


def intervals_from_csv(text: str) -> list[ActivityInterval]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(ActivityInterval(
            video_id=row["video_id"],
            view=View.parse(row["view"]),
            start_s=float(row["start_s"]),
            end_s=float(row["end_s"]),
            stat_value=float(row["stat"]) if row["stat"] else float("nan"),
            p_value=float(row["p"]) if row["p"] else None,
            class_id=int(row["class_id"]) if row["class_id"] else None,
        ))
    return out
