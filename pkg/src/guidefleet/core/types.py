"""Domain value types: robot identity, kind, operational status, position."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Final

from guidefleet.core.errors import FleetError

_ROBOT_ID_RE: Final[re.Pattern[str]] = re.compile(r"^[a-z0-9-]{1,32}$")

# Facility-scale sanity bound on coordinates, in meters.
MAX_COORDINATE_M: Final[float] = 10_000.0
MAX_FLOOR: Final[int] = 200


class InvalidRobotId(FleetError):
    pass


def validate_robot_id(value: str) -> str:
    """Robot ids are 1-32 chars of [a-z0-9-]; lexicographic order breaks ties."""
    if not isinstance(value, str) or not _ROBOT_ID_RE.match(value):
        raise InvalidRobotId(f"invalid robot id {value!r}")
    return value


class RobotKind(str, enum.Enum):
    RECEPTION = "reception"
    GUIDE = "guide"


class OperationalStatus(str, enum.Enum):
    IDLE = "idle"
    ASSIGNED = "assigned"
    PICKUP = "pickup"
    GUIDING = "guiding"
    RETURNING = "returning"
    CHARGING = "charging"
    ERROR = "error"
    OFFLINE = "offline"  # derived from staleness, never self-reported


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    floor: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("position coordinates must be finite")
        if abs(self.x) > MAX_COORDINATE_M or abs(self.y) > MAX_COORDINATE_M:
            raise ValueError(f"position out of facility bounds: ({self.x}, {self.y})")
        if not isinstance(self.floor, int) or abs(self.floor) > MAX_FLOOR:
            raise ValueError(f"implausible floor {self.floor!r}")

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "floor": self.floor}

    @classmethod
    def from_dict(cls, d: dict) -> "Position":
        return cls(x=float(d["x"]), y=float(d["y"]), floor=int(d.get("floor", 0)))
