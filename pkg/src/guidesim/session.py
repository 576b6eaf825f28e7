"""Append-only session event log and the activity analyzers.

Events are (t, kind, data) records serialized one JSON object per line so
logs diff cleanly and replay byte-identically. The analyzers reproduce the
study-style tables: per-mode duration ratios and activation counts, query
class percentages, per-level duration ratios, and the error-annotation
tally with its same-category-collapse counting rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum


class NonMonotoneTimestamp(ValueError):
    pass


class UnbalancedModeEvents(ValueError):
    pass


# event kinds
MODE_ENTER = "mode_enter"
MODE_EXIT = "mode_exit"
BUTTON_PRESS = "button_press"
DESCRIPTION = "description"
QUERY = "query"
INTENT = "intent"
ANSWER = "answer"
GOAL_SET = "goal_set"
ARRIVED = "arrived"
PAUSED = "paused"
RESUMED = "resumed"
LEVEL_CHANGED = "level_changed"
SPEED_CHANGED = "speed_changed"
OBSTACLE = "obstacle"
NOTICE = "notice"

MODES = ("auto", "conversation", "manual")
QUERY_CLASSES = ("general", "specific", "command")
LEVELS = ("concise", "balanced", "detailed")


@dataclass(frozen=True)
class SessionEvent:
    t: float
    kind: str
    data: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "kind": self.kind, **self.data},
                          sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "SessionEvent":
        obj = json.loads(line)
        t = obj.pop("t")
        kind = obj.pop("kind")
        return cls(t=t, kind=kind, data=obj)


class EventLog:
    """Strictly time-ordered, append-only event sequence."""

    def __init__(self):
        self._events: list[SessionEvent] = []

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self):
        return iter(self._events)

    @property
    def events(self) -> tuple[SessionEvent, ...]:
        return tuple(self._events)

    def append(self, e: SessionEvent) -> "EventLog":
        if self._events and e.t < self._events[-1].t:
            raise NonMonotoneTimestamp(
                f"event at t={e.t} before log tail t={self._events[-1].t}")
        self._events.append(e)
        return self

    def to_text(self) -> str:
        return "".join(e.to_json() + "\n" for e in self._events)

    @classmethod
    def from_text(cls, text: str) -> "EventLog":
        log = cls()
        for line in text.splitlines():
            if line.strip():
                log.append(SessionEvent.from_json(line))
        return log


@dataclass(frozen=True)
class ModeStat:
    ratio: float  # percent of total duration
    count: int    # activations


def mode_stats(log: EventLog, total_duration: float) -> dict[str, ModeStat]:
    """Summed enter-to-exit durations per mode over the total duration, plus
    activation counts. An open span at end-of-log closes at total_duration."""
    durations = {m: 0.0 for m in MODES}
    counts = {m: 0 for m in MODES}
    current: str | None = None
    since = 0.0
    for e in log:
        if e.kind == MODE_ENTER:
            mode = e.data["mode"]
            if current is not None:
                raise UnbalancedModeEvents(
                    f"mode_enter({mode}) at t={e.t} while in {current}")
            if mode not in durations:
                raise UnbalancedModeEvents(f"unknown mode {mode!r}")
            current = mode
            since = e.t
            counts[mode] += 1
        elif e.kind == MODE_EXIT:
            mode = e.data["mode"]
            if current != mode:
                raise UnbalancedModeEvents(
                    f"mode_exit({mode}) at t={e.t} while in {current}")
            durations[mode] += e.t - since
            current = None
    if current is not None:
        durations[current] += total_duration - since
    out = {}
    for m in MODES:
        ratio = 100.0 * durations[m] / total_duration if total_duration > 0 else 0.0
        out[m] = ModeStat(ratio=ratio, count=counts[m])
    return out


@dataclass(frozen=True)
class QueryStat:
    ratio: float
    count: int


def query_stats(log: EventLog) -> tuple[dict[str, QueryStat], int]:
    """Per-class query counts and count percentages; total query count."""
    counts = {c: 0 for c in QUERY_CLASSES}
    for e in log:
        if e.kind == QUERY:
            cls_ = e.data["class"]
            if cls_ in counts:
                counts[cls_] += 1
    total = sum(counts.values())
    stats = {c: QueryStat(ratio=100.0 * n / total if total else 0.0, count=n)
             for c, n in counts.items()}
    return stats, total


def level_stats(log: EventLog, total_duration: float) -> dict[str, float]:
    """Percent of total duration spent at each description level; the level
    is balanced until the first level_changed event."""
    durations = {lv: 0.0 for lv in LEVELS}
    current = "balanced"
    since = 0.0
    for e in log:
        if e.kind == LEVEL_CHANGED:
            level = e.data["level"]
            durations[current] += e.t - since
            current = level if level in durations else current
            since = e.t
    durations[current] += max(total_duration - since, 0.0)
    if total_duration <= 0:
        return {lv: 0.0 for lv in LEVELS}
    return {lv: 100.0 * d / total_duration for lv, d in durations.items()}


class ErrorCategory(Enum):
    WRONG_CHARACTER_RECOGNITION = "wrong_character_recognition"
    WRONG_OBJECT_RECOGNITION = "wrong_object_recognition"
    NONEXISTENT_OBJECTS_AND_TEXTS = "nonexistent_objects_and_texts"
    MISUNDERSTANDING_USER_INPUT = "misunderstanding_user_input"
    INACCURATE_USER_INPUT = "inaccurate_user_input"
    NO_ERROR = "no_error"


@dataclass(frozen=True)
class ErrorAnnotation:
    target: str  # reference to the annotated description or answer
    category: ErrorCategory


@dataclass(frozen=True)
class ErrorTally:
    counts: dict
    total_outputs: int


def error_tally(annotations: list[ErrorAnnotation]) -> ErrorTally:
    """Per-category counts with the collapse rule: same-category errors on
    one output count once; different categories count separately. An output
    annotated only no_error counts toward no_error."""
    per_target: dict[str, set[ErrorCategory]] = {}
    for a in annotations:
        per_target.setdefault(a.target, set()).add(a.category)
    counts = {c: 0 for c in ErrorCategory}
    for cats in per_target.values():
        for c in cats:
            if c is ErrorCategory.NO_ERROR:
                if cats == {ErrorCategory.NO_ERROR}:
                    counts[c] += 1
            else:
                counts[c] += 1
    return ErrorTally(counts=counts, total_outputs=len(per_target))


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines)


def render_reports(log: EventLog, total_duration: float) -> str:
    """The three analyzer tables as aligned text."""
    ms = mode_stats(log, total_duration)
    qs, total = query_stats(log)
    ls = level_stats(log, total_duration)
    parts = [
        "Mode activity",
        _table(["mode", "ratio_pct", "count"],
               [[m, f"{ms[m].ratio:.2f}", str(ms[m].count)] for m in MODES]),
        "",
        f"Conversation queries (total {total})",
        _table(["class", "ratio_pct", "count"],
               [[c, f"{qs[c].ratio:.2f}", str(qs[c].count)] for c in QUERY_CLASSES]),
        "",
        "Description level usage",
        _table(["level", "ratio_pct"],
               [[lv, f"{ls[lv]:.2f}"] for lv in LEVELS]),
    ]
    return "\n".join(parts) + "\n"


def reports_as_dict(log: EventLog, total_duration: float) -> dict:
    """Structured analyzer output for machine consumers."""
    ms = mode_stats(log, total_duration)
    qs, total = query_stats(log)
    ls = level_stats(log, total_duration)
    return {
        "modes": {m: {"ratio_pct": ms[m].ratio, "count": ms[m].count} for m in MODES},
        "queries": {"total": total,
                    **{c: {"ratio_pct": qs[c].ratio, "count": qs[c].count}
                       for c in QUERY_CLASSES}},
        "levels": {lv: ls[lv] for lv in LEVELS},
    }
