"""Interval classification through a video question-answering service.

The service sees a clip reference, the interval bounds and a prompt, and
returns free text. Answers are untrusted and always go through
:func:`parse_answer`. :class:`MockClassifier` stands in for the service
using ground-truth annotations.
"""

from __future__ import annotations

import json
import logging
import re
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .evaluate import Activity, GroundTruth, overlap_score
from .intervals import ActivityInterval

log = logging.getLogger(__name__)

ACTIVITY_CLASSES = {
    1: "Normal Forward Driving",
    2: "Drinking",
    3: "Phone Call(right)",
    4: "Phone Call(left)",
    5: "Eating",
    6: "Text (Right)",
    7: "Text (Left)",
    8: "Reaching behind",
    9: "Adjust control panel",
    10: "Pick up from floor (Driver)",
    11: "Pick up from floor (Passenger)",
    12: "Talk to passenger at the right",
    13: "Talk to passenger at backseat",
    14: "Yawning",
    15: "Hand on head",
    16: "Singing and dancing with music",
}

# Wording of the enumerated activity list in prompts 2 and 3.
SIMULATION_PHRASES = {
    1: "Normal Forward Driving",
    2: "Pretending to drink a beverage",
    3: "Simulating a phone call with the right hand",
    4: "Simulating a phone call with the left hand",
    5: "Pretending to eat food",
    6: "Simulating texting with the right hand",
    7: "Simulating texting with the left hand",
    8: "Pretending to reach behind the seat",
    9: "Simulating adjusting the control panel",
    10: "Pretending to pick up an object from the floor on the driver's side",
    11: "Pretending to pick up an object from the floor on the passenger's side",
    12: "Simulating talking to a passenger seated on the right side",
    13: "Simulating talking to a passenger seated in the backseat",
    14: "Simulating yawning",
    15: "Pretending to place a hand on the head",
    16: "Simulating singing or dancing to music",
}

# Wording used in prompt 1's list, where it differs from the class names.
LIST_PHRASES = {
    3: "Phone Call (right)",
    4: "Phone Call (left)",
    9: "Adjusting control panel",
    16: "Singing or dancing with music",
}

# Shorter forms seen in free-text answers. Version 1 of the alias table.
EXTRA_ALIASES = {
    2: ["drinking a beverage", "drink a beverage"],
    3: ["phone call with the right hand", "phone call (right hand)"],
    4: ["phone call with the left hand", "phone call (left hand)"],
    5: ["eating food", "eat food"],
    6: ["texting with the right hand", "text (right hand)"],
    7: ["texting with the left hand", "text (left hand)"],
    8: ["reaching behind the seat", "reach behind the seat"],
    9: ["adjusting the control panel", "adjust the control panel"],
    10: ["pick up an object from the floor on the driver's side",
         "picking up an object from the floor on the driver's side"],
    11: ["pick up an object from the floor on the passenger's side",
         "picking up an object from the floor on the passenger's side"],
    12: ["talking to a passenger seated on the right side",
         "talking to the passenger on the right"],
    13: ["talking to a passenger seated in the backseat",
         "talking to the passenger in the backseat"],
    15: ["place a hand on the head", "placing a hand on the head", "hand on the head"],
    16: ["singing or dancing to music", "singing and dancing", "singing or dancing"],
}

_ACTIVITY_LIST_Q1 = (
    "Normal Forward Driving, Drinking, Phone Call (right), Phone Call (left), Eating, "
    "Text (Right), Text (Left), Reaching behind, Adjusting control panel, "
    "Pick up from floor (Driver), Pick up from floor (Passenger), "
    "Talk to passenger at the right, Talk to passenger at backseat, Yawning, "
    "Hand on head, and Singing or dancing with music"
)
_ACTIVITY_LIST_Q23 = ", ".join(f"{i}. {t}" for i, t in SIMULATION_PHRASES.items())

PROMPT_TEXTS = {
    1: f"Based on the following activities: {_ACTIVITY_LIST_Q1}, "
       "which activity is being performed in the video?",
    2: f"Is the driver simulating any of the following activities? {_ACTIVITY_LIST_Q23}. "
       "Please provide a 'yes' or 'no' response for each activity.",
    3: f"Is the driver simulating any of the following activities? {_ACTIVITY_LIST_Q23}. "
       "Please provide the activity the driver is doing.",
}
DEFAULT_TEMPLATE = 3


@dataclass(frozen=True)
class PromptTemplate:
    id: int
    text: str

    @classmethod
    def get(cls, template_id: int) -> "PromptTemplate":
        if template_id not in PROMPT_TEXTS:
            raise ValueError(f"no prompt template {template_id}; choose 1, 2 or 3")
        return cls(template_id, PROMPT_TEXTS[template_id])


@dataclass(frozen=True)
class ClassOutcome:
    """A class id, or ``class_id=None`` for "no activity"."""

    class_id: int | None = None
    error: str | None = None

    @property
    def is_activity(self) -> bool:
        return self.class_id is not None

    @property
    def label(self) -> str | None:
        return ACTIVITY_CLASSES.get(self.class_id)


NO_ACTIVITY = ClassOutcome()


@dataclass(frozen=True)
class ClassificationRequest:
    clip: str
    start_s: float
    end_s: float
    prompt: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ClassificationRequest":
        d = json.loads(text)
        return cls(str(d["clip"]), float(d["start_s"]), float(d["end_s"]), str(d["prompt"]))


def build_request(clip_ref: str, interval: ActivityInterval,
                  template: int | PromptTemplate = DEFAULT_TEMPLATE) -> ClassificationRequest:
    if not isinstance(template, PromptTemplate):
        template = PromptTemplate.get(template)
    return ClassificationRequest(clip_ref, interval.start_s, interval.end_s, template.text)


# ---------------------------------------------------------------------------
# answer parsing

def _norm(text: str) -> str:
    text = text.lower().replace("’", "'").replace("‘", "'")
    text = re.sub(r"\s+", " ", text)
    text = re.sub(r"\s*\(\s*", "(", text)
    return re.sub(r"\s*\)", ")", text)


def _alias_table() -> list[tuple[str, int]]:
    table = {}
    for source in (ACTIVITY_CLASSES, SIMULATION_PHRASES, LIST_PHRASES):
        for cid, name in source.items():
            table[_norm(name)] = cid
    for cid, names in EXTRA_ALIASES.items():
        for name in names:
            table[_norm(name)] = cid
    return sorted(table.items(), key=lambda t: -len(t[0]))


_ALIASES = _alias_table()
_ALIAS_RE = re.compile(
    "|".join(rf"(?<![\w]){re.escape(a)}(?![\w])" for a, _ in _ALIASES)
)
_ALIAS_LOOKUP = dict(_ALIASES)
_NO_RE = re.compile(r"^\W*no\W*$")


def parse_answer(text: str) -> ClassOutcome:
    """Map a free-text answer to a class; the earliest mention wins.

    At a given position the longest alias matches (the regex alternation is
    ordered longest first). A bare "no" or an answer naming no class is
    "no activity".
    """
    if text is None:
        return NO_ACTIVITY
    t = _norm(str(text))
    if _NO_RE.match(t):
        return NO_ACTIVITY
    m = _ALIAS_RE.search(t)
    if m is None:
        return NO_ACTIVITY
    return ClassOutcome(_ALIAS_LOOKUP[m.group(0)])


# ---------------------------------------------------------------------------
# classifiers

def _activities_for(ground_truth, video_id: str) -> list[Activity]:
    if isinstance(ground_truth, GroundTruth):
        return ground_truth.activities if ground_truth.video_id == video_id else []
    acts = []
    for item in ground_truth:
        if isinstance(item, GroundTruth):
            if item.video_id == video_id:
                acts.extend(item.activities)
        else:
            acts.append(item)
    return acts


def mock_classify(interval: ActivityInterval, ground_truth, error_rate: float = 0.0,
                  seed: int = 0) -> ClassOutcome:
    """Class of the best-overlapping annotation, corrupted with ``error_rate``.

    Randomness is keyed on (seed, interval bounds), so the same interval
    always gets the same answer.
    """
    best, best_os = None, 0.0
    for a in _activities_for(ground_truth, interval.video_id):
        os_ = overlap_score((a.start_s, a.end_s), (interval.start_s, interval.end_s))
        if os_ > best_os:
            best, best_os = a, os_
    if best is None:
        return NO_ACTIVITY
    key = [int(seed), int(round(interval.start_s * 1000)), int(round(interval.end_s * 1000))]
    rng = np.random.default_rng(np.random.SeedSequence([abs(k) for k in key]))
    if rng.random() < error_rate:
        wrong = [c for c in ACTIVITY_CLASSES if c != best.class_id]
        return ClassOutcome(int(wrong[rng.integers(len(wrong))]))
    return ClassOutcome(best.class_id)


class MockClassifier:
    def __init__(self, ground_truth, error_rate: float = 0.0, seed: int = 0):
        self.ground_truth = ground_truth
        self.error_rate = error_rate
        self.seed = seed

    def classify(self, interval: ActivityInterval) -> ClassOutcome:
        return mock_classify(interval, self.ground_truth, self.error_rate, self.seed)


class HttpClassifier:
    """POSTs ``{"clip", "start_s", "end_s", "prompt"}``; expects ``{"answer"}``."""

    def __init__(self, endpoint: str, template: int = DEFAULT_TEMPLATE,
                 timeout_s: float = 60.0, retries: int = 2,
                 clip_pattern: str = "{video_id}.mp4"):
        self.endpoint = endpoint
        self.template = PromptTemplate.get(template)
        self.timeout_s = timeout_s
        self.retries = retries
        self.clip_pattern = clip_pattern

    def clip_for(self, interval: ActivityInterval) -> str:
        return self.clip_pattern.format(video_id=interval.video_id, view=interval.view.value)

    def classify(self, interval: ActivityInterval) -> ClassOutcome:
        req = build_request(self.clip_for(interval), interval, self.template)
        body = req.to_json().encode("utf-8")
        last_err = None
        for _ in range(self.retries + 1):
            http_req = urllib.request.Request(
                self.endpoint, data=body, headers={"Content-Type": "application/json"})
            try:
                with urllib.request.urlopen(http_req, timeout=self.timeout_s) as resp:
                    answer = json.loads(resp.read().decode("utf-8"))["answer"]
                return parse_answer(answer)
            except (urllib.error.URLError, OSError, ValueError, KeyError, TypeError) as exc:
                last_err = f"{type(exc).__name__}: {exc}"
                log.warning("classifier request failed: %s", last_err)
        return ClassOutcome(None, error=last_err)


def classify_intervals(intervals, classifier, threads: int = 1) -> list[ActivityInterval]:
    """Attach a class to every interval; results ordered by start time."""
    ivs = sorted(intervals, key=lambda iv: (iv.video_id, iv.start_s, iv.end_s))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(classifier.classify, ivs))
    else:
        outcomes = [classifier.classify(iv) for iv in ivs]
    return [iv.with_class(o.class_id, o.label, o.error) for iv, o in zip(ivs, outcomes)]
