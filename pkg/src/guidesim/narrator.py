"""Scene narration: three detail levels, two-stage refinement, scheduling.

The template renderer is the deterministic test-time provider; an external
multimodal model can replace it behind the same contract (see providers).
Budgets are character windows per level; composition always produces at
least the minimum and keeps every sentence shorter than the window width so
that refine can truncate at sentence boundaries without undershooting.

Sentences carry fixed direction markers ("your left", "ahead", "your
right") in left/front/right order; the detailed level prepends an overview
sentence. Sides with no sightings are skipped entirely.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, replace
from enum import Enum

from .gridworld import Pose, PoiSighting, Side
from .planner import MotionState, MotionStatus


class DescriptionLevel(Enum):
    CONCISE = "concise"
    BALANCED = "balanced"
    DETAILED = "detailed"


class Stage(Enum):
    INITIAL = "initial"
    REFINED = "refined"


@dataclass(frozen=True)
class LevelBudget:
    min_chars: int
    max_chars: int
    min_sentences: int
    max_sentences: int


DEFAULT_BUDGETS: dict[DescriptionLevel, LevelBudget] = {
    DescriptionLevel.DETAILED: LevelBudget(120, 240, 3, 4),
    DescriptionLevel.BALANCED: LevelBudget(60, 120, 2, 3),
    DescriptionLevel.CONCISE: LevelBudget(0, 59, 1, 2),
}

# tokens stripped from balanced/concise text on refinement
SUBJECTIVE_ADJECTIVES = ("futuristic", "stylish", "modern", "classic",
                         "beautiful", "elegant", "charming")
LIGHTING_WORDS = ("bright", "brightness", "dim", "dimly", "dark", "sunlit",
                  "lighting", "light", "lit", "illuminated", "glowing")

_MARKERS = {Side.LEFT: "your left", Side.FRONT: "ahead", Side.RIGHT: "your right"}
_SIDE_ORDER = (Side.LEFT, Side.FRONT, Side.RIGHT)

_OVERVIEW_PLACES = ("an open area", "a wide walkway", "a spacious area")
_FILLERS = (
    "The walkway continues on without change.",
    "Nothing else stands out in view at the moment.",
    "I will call out new points of interest as they appear.",
)


@dataclass(frozen=True)
class Description:
    text: str
    level: DescriptionLevel
    scene_tags: tuple[str, ...]
    pose_at_capture: Pose
    timestamp: float
    stage: Stage


@dataclass(frozen=True)
class NarrationSchedule:
    prev_end: float
    next_due: float
    gap_bounds: tuple[float, float] = (5.0, 10.0)
    rng_seed: int = 0


def _clip(s: str, n: int) -> str:
    return s if len(s) <= n else s[:n].rstrip()


def _fit_sentence(mandatory: str, optional: list[str], cap: int) -> str:
    """Assemble mandatory + as many optional fragments as fit under cap."""
    parts = [mandatory] + optional
    while len(parts) > 1 and len("".join(parts)) + 1 > cap:
        parts.pop()
    text = "".join(parts) + "."
    if len(text) > cap:
        text = _clip(text[:-1], cap - 1) + "."
    return text


def _split_sentences(text: str) -> list[str]:
    return [s for s in re.split(r"(?<=[.!?])\s+", text.strip()) if s]


def _by_side(sightings: list[PoiSighting]) -> dict[Side, list[PoiSighting]]:
    out: dict[Side, list[PoiSighting]] = {s: [] for s in _SIDE_ORDER}
    for s in sightings:
        if s.side in out:
            out[s.side].append(s)
    return out


def _pad_to_minimum(sentences: list[str], budget: LevelBudget) -> list[str]:
    i = 0
    while (len(" ".join(sentences)) < budget.min_chars
           or len(sentences) < budget.min_sentences):
        sentences.append(_FILLERS[i % len(_FILLERS)])
        i += 1
    return sentences


def compose_description(sightings: list[PoiSighting], level: DescriptionLevel,
                        seed: int,
                        budgets: dict[DescriptionLevel, LevelBudget] | None = None,
                        pose: Pose = Pose(0.0, 0.0, 0.0),
                        timestamp: float = 0.0) -> Description:
    """Render an initial description from the sighting set.

    Deterministic in (sightings, level, seed): the seed only picks among
    phrasing variants and which fact to mention.
    """
    budget = (budgets or DEFAULT_BUDGETS)[level]
    cap = max(budget.max_chars - budget.min_chars - 1, 20)
    rng = random.Random(seed)
    sides = _by_side(sightings)
    sentences: list[str] = []
    tags: list[str] = []

    if level is DescriptionLevel.DETAILED:
        k = len(sightings)
        place = rng.choice(_OVERVIEW_PLACES)
        if k == 0:
            sentences.append("You are in a quiet stretch with nothing notable in view yet.")
        else:
            noun = "point of interest" if k == 1 else "points of interest"
            sentences.append(f"You are in {place} with {k} {noun} in view.")
        for side in _SIDE_ORDER:
            group = sides[side]
            if not group:
                continue
            s0 = group[0]
            d = max(1, round(s0.distance))
            mandatory = f"On {_MARKERS[side]}, about {d} meters away, {_clip(s0.poi.name, 40)}"
            optional = []
            if s0.poi.category:
                optional.append(f", a {_clip(s0.poi.category, 24)}")
            if s0.poi.facts:
                optional.append(f"; {_clip(rng.choice(s0.poi.facts), 44)}")
            if len(group) > 1:
                optional.append(f", with {len(group) - 1} more nearby")
            sentences.append(_fit_sentence(mandatory, optional, cap))
            tags.append(s0.poi.id)
    elif level is DescriptionLevel.BALANCED:
        for side in _SIDE_ORDER:
            group = sides[side]
            if not group:
                continue
            s0 = group[0]
            mandatory = f"On {_MARKERS[side]}, {_clip(s0.poi.name, 32)}"
            optional = []
            if s0.poi.category:
                optional.append(f", a {_clip(s0.poi.category, 20)}")
            sentences.append(_fit_sentence(mandatory, optional, cap))
            tags.append(s0.poi.id)
        if not sentences:
            sentences.append("No landmarks in view at the moment.")
    else:  # CONCISE
        nearest = sorted(sightings, key=lambda s: (s.distance, s.poi.id))[:2]
        keep = [s for s in nearest if s.side in _MARKERS]
        keep.sort(key=lambda s: _SIDE_ORDER.index(s.side))
        words = {Side.LEFT: "left", Side.FRONT: "ahead", Side.RIGHT: "right"}
        if keep:
            frags = [f"{_clip(s.poi.name, 22)} {words[s.side]}" for s in keep]
            sentence = ", ".join(frags) + "."
            if len(sentence) > cap:
                sentence = frags[0] + "."
            if len(sentence) > cap:
                sentence = _clip(frags[0], cap - 1) + "."
            sentences.append(sentence)
            tags.extend(s.poi.id for s in keep if s.poi.name in sentence)
        else:
            sentences.append("Clear space, nothing notable in view.")

    sentences = _pad_to_minimum(sentences, budget)
    return Description(text=" ".join(sentences), level=level,
                       scene_tags=tuple(tags), pose_at_capture=pose,
                       timestamp=timestamp, stage=Stage.INITIAL)


def _strip_tokens(text: str, tokens: tuple[str, ...]) -> str:
    for tok in tokens:
        text = re.sub(rf"(,\s*|\s+|^){re.escape(tok)}(?![a-z])", r"\1", text, flags=re.I)
    text = re.sub(r"\s{2,}", " ", text)
    text = re.sub(r"\s+([.,;])", r"\1", text)
    text = re.sub(r",\s*([.,;])", r"\1", text)
    return text.strip()


def refine(d: Description,
           budgets: dict[DescriptionLevel, LevelBudget] | None = None) -> Description:
    """Second inference stage: enforce the level budget by dropping whole
    trailing sentences, and strip content the level disallows."""
    if d.stage is not Stage.INITIAL:
        raise ValueError("refine expects an initial-stage description")
    budget = (budgets or DEFAULT_BUDGETS)[d.level]
    text = d.text
    if d.level in (DescriptionLevel.BALANCED, DescriptionLevel.CONCISE):
        text = _strip_tokens(text, SUBJECTIVE_ADJECTIVES + LIGHTING_WORDS)
    sentences = _split_sentences(text)
    while len(" ".join(sentences)) > budget.max_chars and len(sentences) > 1:
        sentences.pop()
    return replace(d, text=" ".join(sentences), stage=Stage.REFINED)


def schedule_next(prev_end: float, rng: random.Random,
                  gap_bounds: tuple[float, float] = (5.0, 10.0)) -> float:
    """Next due time: prev_end plus a uniform draw from the gap bounds."""
    if prev_end < 0:
        raise ValueError("prev_end must be >= 0")
    lo, hi = gap_bounds
    return prev_end + rng.uniform(lo, hi)


def should_emit(motion: MotionState, now: float, sched: NarrationSchedule,
                mode) -> bool:
    """Emit only when due, moving, and not conversing.

    `now` is the narration clock (time accumulated while navigating), so a
    paused robot never owes a backlog of descriptions. `mode` is the
    interaction mode kind; narration runs in auto and manual modes only.
    """
    mode_name = getattr(mode, "value", str(mode))
    return (now >= sched.next_due
            and motion.status is MotionStatus.NAVIGATING
            and mode_name in ("auto", "manual"))
