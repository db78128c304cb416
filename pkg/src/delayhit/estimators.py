"""Sliding-window estimates of per-object arrival rate and residual time.

The window holds the S most recent requests across all objects. Rate is the
inverse of the mean inter-arrival time over an object's retained arrivals;
residual time is approximated by recency (time since last access).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .core import ObjectId

RATE_FLOOR = 1e-6
RATE_CEILING = 1e6
EPSILON_R = 1e-3


class TimeRegression(ValueError):
    pass


class UnknownObject(KeyError):
    pass


@dataclass
class ObjectStats:
    object: ObjectId
    arrival_times: deque = field(default_factory=deque)
    last_access: float = 0.0
    first_seen: int = 0  # global insertion order, for tie-breaking


class WindowState:
    def __init__(self, window_size: int):
        if window_size < 1:
            raise ValueError("window_size must be >= 1")
        self.window_size = window_size
        self.stats: dict[ObjectId, ObjectStats] = {}
        self._window: deque = deque()  # object ids, oldest first
        self.counter = 0
        self._last_time = float("-inf")

    def __contains__(self, obj: ObjectId) -> bool:
        return obj in self.stats

    def __getitem__(self, obj: ObjectId) -> ObjectStats:
        try:
            return self.stats[obj]
        except KeyError:
            raise UnknownObject(obj) from None

    @property
    def retained(self) -> int:
        return len(self._window)

    def record_arrival(self, t: float, obj: ObjectId) -> None:
        if t < self._last_time:
            raise TimeRegression(f"arrival at {t} precedes {self._last_time}")
        self._last_time = t
        st = self.stats.get(obj)
        if st is None:
            st = self.stats[obj] = ObjectStats(obj, first_seen=self.counter)
        st.arrival_times.append(t)
        st.last_access = t
        self._window.append(obj)
        self.counter += 1
        if len(self._window) > self.window_size:
            # per-object deques are time-ordered, so the global oldest is at their front
            self.stats[self._window.popleft()].arrival_times.popleft()

    def estimate_rate(self, obj: ObjectId, now: float) -> float:
        """Arrivals per ms for ``obj``.

        Uses (n - 1) / (t_last - t_first) over retained arrivals; with a single
        arrival falls back to 1 / (now - t); with none, to the rate floor.
        """
        times = self[obj].arrival_times
        n = len(times)
        if n == 0:
            return RATE_FLOOR
        if n == 1:
            gap = now - times[0]
        else:
            gap = (times[-1] - times[0]) / (n - 1)
        if gap <= 0:
            return RATE_CEILING
        return min(max(1.0 / gap, RATE_FLOOR), RATE_CEILING)

    def estimate_residual(self, obj: ObjectId, now: float) -> float:
        return max(now - self[obj].last_access, EPSILON_R)


def record_arrival(state: WindowState, t: float, obj: ObjectId) -> WindowState:
    state.record_arrival(t, obj)
    return state


def estimate_rate(state: WindowState, obj: ObjectId, now: float) -> float:
    return state.estimate_rate(obj, now)


def estimate_residual(state: WindowState, obj: ObjectId, now: float) -> float:
    return state.estimate_residual(obj, now)
