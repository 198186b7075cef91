"""Topic string validation and canonicalization."""

from __future__ import annotations

import re
from typing import Final

from guidefleet.core.errors import FleetError

MAX_TOPIC_LENGTH: Final[int] = 256

_SEGMENT_RE: Final[re.Pattern[str]] = re.compile(r"^[a-z0-9_-]+$")


class MalformedTopic(FleetError):
    """Topic violates the grammar: empty segment, bad charset, or too long."""


def validate_topic(raw: str) -> str:
    """Validate a `/`-separated topic and return its canonical form.

    Segments are non-empty and drawn from [a-z0-9_-]. The canonical form of a
    valid topic is the topic itself, so validation is idempotent.
    """
    if not isinstance(raw, str):
        raise MalformedTopic(f"topic must be a string, got {type(raw).__name__}")
    if len(raw) > MAX_TOPIC_LENGTH:
        raise MalformedTopic(f"topic longer than {MAX_TOPIC_LENGTH} chars")
    if not raw:
        raise MalformedTopic("topic is empty")
    for segment in raw.split("/"):
        if not segment:
            raise MalformedTopic(f"empty segment in topic {raw!r}")
        if not _SEGMENT_RE.match(segment):
            raise MalformedTopic(f"bad segment {segment!r} in topic {raw!r}")
    return raw
