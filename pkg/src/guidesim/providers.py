"""Pluggable description / intent / answer providers.

The deterministic template provider is the default everywhere so the whole
suite runs offline. An external multimodal endpoint can be swapped in behind
the same contracts; its request carries the level's prompt asset verbatim
and its reply must be the documented JSON envelope with keys
initial_description, improve_thoughts, description.
"""

from __future__ import annotations

import json
import urllib.request
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Protocol

from .gridworld import Pose, PoiSighting
from .narrator import (Description, DescriptionLevel, Stage,
                       compose_description, refine)


class ProviderUnavailable(Exception):
    """The external endpoint failed, timed out, or is not configured."""


class MalformedProviderReply(Exception):
    """Reply envelope is missing the required description key."""


def load_prompt_asset(level: DescriptionLevel) -> str:
    path = resources.files("guidesim").joinpath("prompts", f"{level.value}.txt")
    return path.read_text(encoding="utf-8")


def external_provider_request(images_meta, level: DescriptionLevel) -> dict:
    """Build the one-shot request document for the external describer."""
    return {
        "v": 1,
        "kind": "describe",
        "level": level.value,
        "prompt": load_prompt_asset(level),
        "scene": images_meta,
    }


@dataclass(frozen=True)
class ProviderReply:
    initial_description: str
    improve_thoughts: str
    description: str


def parse_provider_reply(reply) -> ProviderReply:
    if isinstance(reply, (str, bytes)):
        try:
            reply = json.loads(reply)
        except json.JSONDecodeError as e:
            raise MalformedProviderReply(f"reply is not JSON: {e}") from e
    if not isinstance(reply, dict) or "description" not in reply:
        raise MalformedProviderReply("reply missing 'description' key")
    return ProviderReply(
        initial_description=str(reply.get("initial_description", "")),
        improve_thoughts=str(reply.get("improve_thoughts", "")),
        description=str(reply["description"]),
    )


def http_json_transport(endpoint: str, timeout: float = 10.0) -> Callable[[dict], dict]:
    """POST the request as JSON and return the parsed JSON reply."""

    def send(request: dict) -> dict:
        body = json.dumps(request).encode("utf-8")
        req = urllib.request.Request(endpoint, data=body,
                                     headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))

    return send


class DescriptionProvider(Protocol):
    def describe(self, sightings: list[PoiSighting], level: DescriptionLevel,
                 seed: int, pose: Pose, timestamp: float) -> Description: ...


class TemplateDescriptionProvider:
    """Deterministic offline provider: compose then refine."""

    def describe(self, sightings, level, seed, pose, timestamp) -> Description:
        return refine(compose_description(sightings, level, seed,
                                          pose=pose, timestamp=timestamp))


class ExternalDescriptionProvider:
    """Client for a remote describer speaking the documented envelope.

    transport is injectable for tests; any transport failure surfaces as
    ProviderUnavailable so callers can fall back to the template provider.
    """

    def __init__(self, endpoint: str = "",
                 transport: Callable[[dict], dict] | None = None,
                 timeout: float = 10.0):
        if transport is None:
            if not endpoint:
                raise ValueError("need an endpoint or an explicit transport")
            transport = http_json_transport(endpoint, timeout)
        self._transport = transport

    def describe(self, sightings, level, seed, pose, timestamp) -> Description:
        images_meta = [
            {"id": s.poi.id, "name": s.poi.name, "category": s.poi.category,
             "side": s.side.value, "distance": round(s.distance, 2)}
            for s in sightings
        ]
        request = external_provider_request(images_meta, level)
        try:
            raw = self._transport(request)
        except MalformedProviderReply:
            raise
        except Exception as e:
            raise ProviderUnavailable(str(e)) from e
        reply = parse_provider_reply(raw)
        tags = tuple(s.poi.id for s in sightings if s.poi.name in reply.description)
        return Description(text=reply.description, level=level, scene_tags=tags,
                           pose_at_capture=pose, timestamp=timestamp,
                           stage=Stage.REFINED)


class ExternalTextClient:
    """Shared endpoint client for the intent classifier and answerer."""

    def __init__(self, endpoint: str = "",
                 transport: Callable[[dict], dict] | None = None,
                 timeout: float = 10.0):
        if transport is None:
            if not endpoint:
                raise ValueError("need an endpoint or an explicit transport")
            transport = http_json_transport(endpoint, timeout)
        self._transport = transport

    def request(self, payload: dict) -> dict:
        try:
            reply = self._transport(payload)
        except Exception as e:
            raise ProviderUnavailable(str(e)) from e
        if not isinstance(reply, dict):
            raise MalformedProviderReply("reply must be a JSON object")
        return reply
