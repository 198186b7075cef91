"""Topic pattern grammar and segment-wise wildcard matching.

`+` matches exactly one segment; `#` is only legal as the final segment and
matches zero or more trailing segments.
"""

from __future__ import annotations

import re
from typing import Final

from guidefleet.core.errors import FleetError
from guidefleet.core.topics import MAX_TOPIC_LENGTH

_LITERAL_RE: Final[re.Pattern[str]] = re.compile(r"^[a-z0-9_-]+$")


class MalformedPattern(FleetError):
    pass


def validate_pattern(raw: str) -> str:
    if not isinstance(raw, str) or not raw:
        raise MalformedPattern("pattern is empty")
    if len(raw) > MAX_TOPIC_LENGTH:
        raise MalformedPattern(f"pattern longer than {MAX_TOPIC_LENGTH} chars")
    segments = raw.split("/")
    for i, segment in enumerate(segments):
        if segment == "#":
            if i != len(segments) - 1:
                raise MalformedPattern(f"'#' must be the final segment in {raw!r}")
        elif segment != "+" and not _LITERAL_RE.match(segment):
            raise MalformedPattern(f"bad segment {segment!r} in pattern {raw!r}")
    return raw


def match_topic(pattern: str, topic: str) -> bool:
    """Segment-wise match of a canonical pattern against a canonical topic."""
    p_segs = pattern.split("/")
    t_segs = topic.split("/")
    for i, p in enumerate(p_segs):
        if p == "#":
            return True  # consumes zero or more trailing segments
        if i >= len(t_segs):
            return False
        if p != "+" and p != t_segs[i]:
            return False
    return len(p_segs) == len(t_segs)
