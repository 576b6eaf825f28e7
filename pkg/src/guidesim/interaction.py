"""Mode state machine and conversation intents.

Three modes: auto (robot picks waypoints), manual (user picks directions),
and conversation (robot paused, utterances classified into destination /
question / direction intents). The center button switches modes, a long
center press toggling conversation; directional buttons adjust speed and
description level in auto mode and request directions in manual mode, and
are disabled during conversation.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from enum import Enum

from .gridworld import Pose, PoiSighting, World, normalize_angle
from .narrator import DescriptionLevel
from .providers import ProviderUnavailable
from .semantic_map import TargetSpec, UnresolvedTarget, resolve_target
from .waypoints import Waypoint

SPEED_STEP = 0.05
DIRECTION_SECTOR_HALF_ANGLE = math.pi / 4

DEFAULT_ENDING_PHRASES = ("thank you", "thanks", "that's all", "that is all",
                          "goodbye", "bye", "i'm done", "we're done")


class ModeKind(Enum):
    AUTO = "auto"
    MANUAL = "manual"
    CONVERSATION = "conversation"


@dataclass(frozen=True)
class Mode:
    kind: ModeKind
    prior: ModeKind | None = None

    def __post_init__(self):
        if self.kind is ModeKind.CONVERSATION:
            if self.prior not in (ModeKind.AUTO, ModeKind.MANUAL):
                raise ValueError("conversation mode must store the prior mode")
        elif self.prior is not None:
            raise ValueError("prior is only meaningful in conversation mode")


@dataclass(frozen=True)
class InteractionState:
    mode: Mode = Mode(ModeKind.AUTO)
    speed: float = 0.5
    level: DescriptionLevel = DescriptionLevel.BALANCED
    hold: bool = True
    initial_heading: float = 0.0


class Button(Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"
    CENTER = "center"


class Press(Enum):
    SHORT = "short"
    LONG = "long"


@dataclass(frozen=True)
class ButtonEvent:
    button: Button
    press: Press = Press.SHORT


class Direction(Enum):
    FORWARD = "forward"
    BACK = "back"
    LEFT = "left"
    RIGHT = "right"


# effects handed back to the simulation owner
@dataclass(frozen=True)
class PauseRobot:
    pass


@dataclass(frozen=True)
class ResumeRobot:
    pass


@dataclass(frozen=True)
class RequestDirection:
    direction: Direction


@dataclass(frozen=True)
class SpeedChanged:
    speed: float


@dataclass(frozen=True)
class LevelChanged:
    level: DescriptionLevel


Effect = PauseRobot | ResumeRobot | RequestDirection | SpeedChanged | LevelChanged


def adjust_speed(v: float, direction: Button) -> float:
    """One 0.05 m/s step up or down, clamped to [0, 1] and kept exactly on
    the lattice."""
    step = 1 if direction is Button.UP else -1
    ticks = round(v / SPEED_STEP) + step
    return min(max(ticks, 0), round(1.0 / SPEED_STEP)) * SPEED_STEP


_LEVEL_ORDER = (DescriptionLevel.CONCISE, DescriptionLevel.BALANCED,
                DescriptionLevel.DETAILED)


def cycle_level(level: DescriptionLevel, direction: Button) -> DescriptionLevel:
    """Right moves toward detailed, left toward concise; saturates at the
    ends."""
    i = _LEVEL_ORDER.index(level)
    i += 1 if direction is Button.RIGHT else -1
    return _LEVEL_ORDER[min(max(i, 0), len(_LEVEL_ORDER) - 1)]


_MANUAL_DIRECTIONS = {Button.UP: Direction.FORWARD, Button.DOWN: Direction.BACK,
                      Button.LEFT: Direction.LEFT, Button.RIGHT: Direction.RIGHT}


def press(state: InteractionState, ev: ButtonEvent) -> tuple[InteractionState, list[Effect]]:
    """Apply one button event; long presses only matter on the center
    button. Directional buttons are inert during conversation."""
    mode = state.mode
    if mode.kind is ModeKind.CONVERSATION:
        if ev.button is Button.CENTER and ev.press is Press.LONG:
            return replace(state, mode=Mode(mode.prior)), [ResumeRobot()]
        return state, []
    if ev.button is Button.CENTER:
        if ev.press is Press.LONG:
            return (replace(state, mode=Mode(ModeKind.CONVERSATION, prior=mode.kind)),
                    [PauseRobot()])
        nxt = ModeKind.MANUAL if mode.kind is ModeKind.AUTO else ModeKind.AUTO
        return replace(state, mode=Mode(nxt)), []
    if mode.kind is ModeKind.AUTO:
        if ev.button in (Button.UP, Button.DOWN):
            new = adjust_speed(state.speed, ev.button)
            if new == state.speed:
                return state, []
            return replace(state, speed=new), [SpeedChanged(new)]
        new_level = cycle_level(state.level, ev.button)
        if new_level is state.level:
            return state, []
        return replace(state, level=new_level), [LevelChanged(new_level)]
    # manual mode: any directional press asks for a waypoint that way
    return state, [RequestDirection(_MANUAL_DIRECTIONS[ev.button])]


_SECTOR_CENTERS = {Direction.FORWARD: 0.0, Direction.BACK: math.pi,
                   Direction.LEFT: math.pi / 2, Direction.RIGHT: -math.pi / 2}


def handle_direction(direction: Direction, candidates: list[Waypoint],
                     pose: Pose) -> Waypoint | None:
    """Waypoint in the +-45 deg sector around the requested direction,
    nearest to the sector center (ties to the farther candidate); None when
    the sector is empty.

    Sectors are half-open ([-45, +45) degrees of offset) so the four of
    them tile the circle and every candidate falls in exactly one.
    """
    center = _SECTOR_CENTERS[direction]
    scored = []
    for c in candidates:
        bearing = normalize_angle(
            math.atan2(c.position[1] - pose.y, c.position[0] - pose.x) - pose.heading)
        off = normalize_angle(bearing - center)
        if -DIRECTION_SECTOR_HALF_ANGLE <= off < DIRECTION_SECTOR_HALF_ANGLE:
            dist = math.hypot(c.position[0] - pose.x, c.position[1] - pose.y)
            scored.append((abs(off), -dist, c.position[0], c.position[1], c))
    if not scored:
        return None
    return min(scored)[4]


@dataclass(frozen=True)
class TakeMeThere:
    target: TargetSpec


@dataclass(frozen=True)
class QnA:
    question: str


@dataclass(frozen=True)
class DirectionSpec:
    direction: Direction


Intent = TakeMeThere | QnA | DirectionSpec

_DIRECTION_WORDS = {
    "right": Direction.RIGHT, "left": Direction.LEFT,
    "forward": Direction.FORWARD, "ahead": Direction.FORWARD,
    "straight": Direction.FORWARD, "front": Direction.FORWARD,
    "back": Direction.BACK, "backward": Direction.BACK,
    "backwards": Direction.BACK, "behind": Direction.BACK,
}

_TURN_PATTERN = re.compile(
    r"\b(?:turn|go|head|move|proceed|take)\s+(?:me\s+)?(?:to\s+)?(?:the\s+)?"
    r"(right|left|forward|straight|ahead|back|backward|backwards)\b[\s.!?]*$",
    re.IGNORECASE,
)


def classify_intent(utterance: str, classifier=None) -> Intent:
    """Total classification into destination / question / direction; a
    pluggable classifier may pre-empt the rules, QnA is the catch-all."""
    if not utterance.strip():
        raise ValueError("utterance must be non-empty")
    if classifier is not None:
        result = classifier(utterance)
        if result is not None:
            return result
    stripped = utterance.strip().strip(".!?").strip().lower()
    if stripped in _DIRECTION_WORDS:
        return DirectionSpec(_DIRECTION_WORDS[stripped])
    m = _TURN_PATTERN.search(utterance)
    if m:
        return DirectionSpec(_DIRECTION_WORDS[m.group(1).lower()])
    try:
        target = resolve_target(utterance)
    except UnresolvedTarget:
        return QnA(question=utterance)
    if target.name.strip().lower() in _DIRECTION_WORDS:
        return DirectionSpec(_DIRECTION_WORDS[target.name.strip().lower()])
    return TakeMeThere(target=target)


def is_ending_phrase(utterance: str,
                     phrases: tuple[str, ...] = DEFAULT_ENDING_PHRASES) -> bool:
    """Case-insensitive whole-word match against the ending-phrase list."""
    norm = re.sub(r"\s+", " ", utterance.strip().lower())
    if not norm:
        return False
    return any(re.search(rf"\b{re.escape(p)}\b", norm) for p in phrases)


_STOPWORDS = {
    "what", "whats", "does", "the", "a", "an", "is", "are", "there", "have",
    "has", "do", "can", "you", "i", "see", "of", "in", "on", "at", "to",
    "any", "me", "tell", "about", "it", "this", "that", "and", "or", "how",
    "where", "which", "please", "near", "here",
}


def _tokens(text: str) -> set[str]:
    return {t for t in re.findall(r"[a-z0-9]+", text.lower()) if t not in _STOPWORDS}


def _side_phrase(s: PoiSighting) -> str:
    d = max(1, round(s.distance))
    place = {"front": "ahead", "left": "to your left", "right": "to your right",
             "behind": "behind you"}[s.side.value]
    return f"about {d} meters {place}"


def answer_question(question: str, sightings: list[PoiSighting], world: World,
                    provider=None) -> str:
    """Grounded answer from sighted POI facts only; deterministic.

    Falls back to the rule-based answer if the external provider fails.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    if provider is not None:
        try:
            return provider(question, sightings)
        except ProviderUnavailable:
            pass
    q = _tokens(question)
    best: tuple[int, PoiSighting] | None = None
    for s in sightings:
        hit = len(q & (_tokens(s.poi.name) | _tokens(s.poi.category)
                       | set().union(*[_tokens(f) for f in s.poi.facts], set())))
        if hit > 0 and (best is None or hit > best[0]):
            best = (hit, s)
    if best is None:
        for poi in world.pois:
            if q & _tokens(poi.name):
                return f"{poi.name} is not in view from here."
        return "I can't see anything matching that around here right now."
    s = best[1]
    matching = [f for f in s.poi.facts if _tokens(f) & q]
    facts = matching or list(s.poi.facts[:2])
    if facts:
        return f"{s.poi.name}, {_side_phrase(s)}: {'; '.join(facts)}."
    cat = f", a {s.poi.category}," if s.poi.category else ""
    return f"I can see {s.poi.name}{cat} {_side_phrase(s)}, but I have no more details."
