"""Virtual clock and time units.

Simulated time is seconds since the Unix epoch, so trace timestamps parse
directly and audit exports render as ISO 8601 without a translation table.
"""
from __future__ import annotations

from datetime import datetime, timezone

MINUTE = 60.0
HOUR = 3600.0
DAY = 24 * HOUR
MONTH = 30 * DAY  # billing month for storage cost accounting


class Clock:
    """Monotone simulated clock shared by every module in a deployment."""

    def __init__(self, start: float = 0.0, tick: float = MINUTE):
        if tick <= 0:
            raise ValueError("tick must be positive")
        self.now = float(start)
        self.tick = float(tick)

    def advance(self, to: float) -> float:
        if to < self.now:
            raise ValueError(f"clock moved backwards: {to} < {self.now}")
        self.now = float(to)
        return self.now

    def step(self) -> float:
        return self.advance(self.now + self.tick)


def iso8601(t: float) -> str:
    dt = datetime.fromtimestamp(round(t, 6), tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_iso8601(text: str) -> float:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()
