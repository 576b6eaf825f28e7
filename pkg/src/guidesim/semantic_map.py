"""Semantic map: retrieval of previously described places by name.

Each emitted description is stored with the pose it was captured at, plus
two unit embeddings: one of the description text and one of the sighted POI
labels (the simulation stand-in for image features). A verbally named
target is embedded the same way and resolved to the stored record with the
highest dot product across both fields; the special initial-point intent
returns the session start pose directly.

Embeddings are hashed character-trigram count vectors (D = 256, bucket 0
reserved for empty text), so identical text always embeds identically and
retrieval is exactly reproducible.
"""

from __future__ import annotations

import json
import math
import re
import zlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .gridworld import Pose, PoiSighting
from .narrator import Description, Stage

EMBEDDING_DIM = 256


class UnresolvedTarget(Exception):
    """Utterance matched no destination pattern."""


class EmptyStore(Exception):
    """Named retrieval over a store with no records."""


def embed_text(s: str) -> np.ndarray:
    """Unit-norm hashed trigram vector; whitespace-only text maps to the
    reserved bucket."""
    norm = re.sub(r"\s+", " ", s.strip().lower())
    vec = np.zeros(EMBEDDING_DIM, dtype=np.float64)
    if not norm:
        vec[0] = 1.0
        return vec
    padded = f" {norm} "
    for i in range(len(padded) - 2):
        tri = padded[i:i + 3]
        bucket = 1 + zlib.crc32(tri.encode("utf-8")) % (EMBEDDING_DIM - 1)
        vec[bucket] += 1.0
    return vec / np.linalg.norm(vec)


class TargetKind(Enum):
    NAMED = "named"
    INITIAL = "initial"


@dataclass(frozen=True)
class TargetSpec:
    kind: TargetKind
    name: str = ""

    def __post_init__(self):
        if self.kind is TargetKind.NAMED and not self.name:
            raise ValueError("named target needs a non-empty name")


class MatchedField(Enum):
    DESCRIPTION = "description"
    SCENE = "scene"


@dataclass(frozen=True)
class RetrievalResult:
    record_id: int | None
    pose: Pose
    score: float
    matched_field: MatchedField | None


@dataclass(frozen=True)
class SemanticRecord:
    id: int
    pose: Pose
    description_text: str
    scene_text: str
    desc_embedding: np.ndarray
    scene_embedding: np.ndarray
    timestamp: float


_INITIAL_PATTERNS = (
    r"\b(?:back|return)\b.{0,40}?\b(?:start|beginning|initial|entrance|origin)",
    r"\b(?:initial|original|starting)\s+(?:point|location|position|place|spot)\b",
    r"\btake me back\b[\s.!?]*$",
    r"\bwhere (?:we|i) (?:started|began)\b",
)

_GO_TO_PATTERN = re.compile(
    r"(?:take me|bring me|go|going|navigate|guide me|head|walk|return)\s+"
    r"(?:back\s+)?to\s+(?:the\s+|a\s+|an\s+)?(?P<target>.+)",
    re.IGNORECASE,
)


def resolve_target(utterance: str, resolver=None) -> TargetSpec:
    """Map an utterance to a destination: the initial point or a named
    place. A pluggable resolver may pre-empt the rule set."""
    if not utterance.strip():
        raise UnresolvedTarget("empty utterance")
    if resolver is not None:
        spec = resolver(utterance)
        if spec is not None:
            return spec
    low = utterance.lower()
    for pat in _INITIAL_PATTERNS:
        if re.search(pat, low):
            return TargetSpec(TargetKind.INITIAL)
    m = _GO_TO_PATTERN.search(utterance)
    if m:
        name = m.group("target").strip().strip(".!?,;").strip()
        if name:
            return TargetSpec(TargetKind.NAMED, name=name)
    raise UnresolvedTarget(f"no destination pattern in {utterance!r}")


class SemanticStore:
    """Append-only record store; single writer, snapshot-friendly readers."""

    def __init__(self):
        self._records: list[SemanticRecord] = []

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[SemanticRecord, ...]:
        return tuple(self._records)

    def record(self, pose: Pose, description: Description,
               sightings: list[PoiSighting], timestamp: float | None = None) -> int:
        """Append a record for a refined description; returns its id."""
        if description.stage is not Stage.REFINED:
            raise ValueError("only refined descriptions are recorded")
        t = description.timestamp if timestamp is None else timestamp
        if self._records and t <= self._records[-1].timestamp:
            raise ValueError("record timestamps must strictly increase")
        scene_text = " ".join(
            f"{s.poi.name} {s.poi.category}".strip() for s in sightings)
        rec = SemanticRecord(
            id=len(self._records),
            pose=pose,
            description_text=description.text,
            scene_text=scene_text,
            desc_embedding=embed_text(description.text),
            scene_embedding=embed_text(scene_text),
            timestamp=t,
        )
        self._records.append(rec)
        return rec.id

    def retrieve(self, target: TargetSpec, start_pose: Pose) -> RetrievalResult:
        """Best record by dot product over both embedding fields; initial
        targets short-circuit to the start pose with score 1."""
        if target.kind is TargetKind.INITIAL:
            return RetrievalResult(None, start_pose, 1.0, None)
        if not self._records:
            raise EmptyStore("no records to retrieve a named target from")
        q = embed_text(target.name)
        best: RetrievalResult | None = None
        for rec in self._records:
            ds = float(q @ rec.desc_embedding)
            ss = float(q @ rec.scene_embedding)
            score, field = ((ds, MatchedField.DESCRIPTION) if ds >= ss
                            else (ss, MatchedField.SCENE))
            if best is None or score > best.score:
                best = RetrievalResult(rec.id, rec.pose, score, field)
        return best

    def export_lines(self) -> str:
        """One JSON object per line; embeddings are recomputed on import."""
        lines = []
        for r in self._records:
            lines.append(json.dumps({
                "id": r.id,
                "x": r.pose.x, "y": r.pose.y, "heading": r.pose.heading,
                "text": r.description_text,
                "scene_text": r.scene_text,
                "t": r.timestamp,
            }, ensure_ascii=False))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def import_lines(cls, text: str) -> "SemanticStore":
        store = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            rec = SemanticRecord(
                id=len(store._records),
                pose=Pose(obj["x"], obj["y"], obj.get("heading", 0.0)),
                description_text=obj["text"],
                scene_text=obj.get("scene_text", ""),
                desc_embedding=embed_text(obj["text"]),
                scene_embedding=embed_text(obj.get("scene_text", "")),
                timestamp=float(obj["t"]),
            )
            store._records.append(rec)
        return store
