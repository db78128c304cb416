"""Shared domain types: trace events, cache configuration, trace validation.

Time is continuous and measured in milliseconds. Sizes are integer bytes,
with MB = 10**6 and GB = 10**9.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

MB = 10**6
GB = 10**9

ObjectId = str


class TraceError(ValueError):
    """Base class for malformed traces."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class UnsortedTrace(TraceError):
    pass


class InconsistentSize(TraceError):
    pass


class ObjectLargerThanCache(TraceError):
    pass


@dataclass(frozen=True, slots=True)
class TraceEvent:
    time: float
    object: ObjectId
    size: int

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError(f"size must be positive, got {self.size}")
        if self.time < 0:
            raise ValueError(f"time must be non-negative, got {self.time}")
        if self.object == "":
            raise ValueError("object id must be non-empty")


@dataclass(frozen=True)
class LatencySpec:
    """Miss latency with mean ``base + per_byte * size``.

    ``kind`` is ``"deterministic"`` (every fetch takes exactly the mean) or
    ``"exponential"`` (fetch time is exponential with that mean).
    """

    kind: str = "exponential"
    base: float = 5.0
    per_byte: float | None = None

    def __post_init__(self):
        if self.kind not in ("deterministic", "exponential"):
            raise ValueError(f"unknown latency kind {self.kind!r}")
        if self.base < 0:
            raise ValueError("base latency must be >= 0")
        if self.per_byte is not None and self.per_byte < 0:
            raise ValueError("per-byte latency must be >= 0")

    @property
    def coefficient(self) -> float:
        # default spans [0.01 L, L] over 1 MB..100 MB objects
        if self.per_byte is None:
            return self.base / (100 * MB)
        return self.per_byte

    @property
    def stochastic(self) -> bool:
        return self.kind == "exponential"

    def mean_for(self, size: int) -> float:
        return self.base + self.coefficient * size


@dataclass(frozen=True)
class CacheConfig:
    capacity: int
    policy: str = "va-stoch"
    window_size: int = 10_000
    omega: float = 1.0
    latency: LatencySpec = field(default_factory=LatencySpec)
    rng_seed: int = 0
    cala_weight: float = 0.5
    mad_alpha: float = 0.5
    # "always": the fetched object is always admitted (victims among residents)
    # "compete": the fetched object is bypassed if it ranks below the residents it would displace
    # "never": nothing is ever cached (every request misses or waits on a fetch)
    admission: str = "always"

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if self.omega < 0:
            raise ValueError("omega must be >= 0")
        if not 0.0 <= self.cala_weight <= 1.0:
            raise ValueError("cala_weight must be in [0, 1]")
        if not 0.0 < self.mad_alpha <= 1.0:
            raise ValueError("mad_alpha must be in (0, 1]")
        if self.admission not in ("always", "compete", "never"):
            raise ValueError(f"unknown admission mode {self.admission!r}")


def validate_trace(events: Sequence[TraceEvent], config: CacheConfig | None = None) -> list[TraceEvent]:
    """Check ordering, per-object size consistency and the capacity bound.

    Returns the events as a list. Raises the first violation found, with
    ``.index`` set to the offending event position.
    """
    sizes: dict[ObjectId, int] = {}
    prev = None
    for idx, ev in enumerate(events):
        if prev is not None and ev.time < prev:
            raise UnsortedTrace(f"event {idx} at t={ev.time} precedes t={prev}", idx)
        prev = ev.time
        known = sizes.setdefault(ev.object, ev.size)
        if known != ev.size:
            raise InconsistentSize(
                f"event {idx}: object {ev.object!r} has size {ev.size}, earlier {known}", idx)
        if config is not None and ev.size >= config.capacity:
            raise ObjectLargerThanCache(
                f"event {idx}: object {ev.object!r} size {ev.size} >= capacity {config.capacity}", idx)
    return list(events)


_SIZE_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*([KMG]?B?)\s*$", re.IGNORECASE)
_UNITS = {"": 1, "B": 1, "K": 10**3, "KB": 10**3, "M": MB, "MB": MB, "G": GB, "GB": GB}


def parse_size(text: str) -> int:
    """Parse ``"500MB"``, ``"256 GB"`` or a bare byte count."""
    m = _SIZE_RE.match(str(text))
    if not m:
        raise ValueError(f"cannot parse size {text!r}")
    value = float(m.group(1)) * _UNITS[m.group(2).upper()]
    if value != int(value):
        raise ValueError(f"size {text!r} is not a whole number of bytes")
    return int(value)


def format_time(t: float) -> str:
    if float(t).is_integer():
        return str(int(t))
    return repr(float(t))


def footprint(events: Sequence[TraceEvent]) -> int:
    """Total bytes of distinct objects in a trace."""
    return sum({ev.object: ev.size for ev in events}.values())
