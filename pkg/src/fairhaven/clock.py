"""Injectable clocks so lifecycle, embargo and undelete tests can move time.

All timestamps in the platform are timezone-aware UTC datetimes.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone


def utc(ts: str) -> datetime:
    """Parse an ISO-8601 timestamp into an aware UTC datetime."""
    dt = datetime.fromisoformat(ts.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def isoformat(dt: datetime) -> str:
    """Render an aware datetime as ISO-8601 with a Z suffix."""
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


class Clock:
    def now(self) -> datetime:
        raise NotImplementedError


class SystemClock(Clock):
    def now(self) -> datetime:
        return datetime.now(timezone.utc)


class ManualClock(Clock):
    """Clock that only moves when told to; the backbone of deterministic tests."""

    def __init__(self, start: datetime | str = "2024-01-01T00:00:00Z"):
        self._now = utc(start) if isinstance(start, str) else start.astimezone(timezone.utc)

    def now(self) -> datetime:
        return self._now

    def set(self, ts: datetime | str) -> None:
        self._now = utc(ts) if isinstance(ts, str) else ts.astimezone(timezone.utc)

    def advance(self, *, days: float = 0, hours: float = 0, minutes: float = 0, seconds: float = 0) -> datetime:
        self._now += timedelta(days=days, hours=hours, minutes=minutes, seconds=seconds)
        return self._now
