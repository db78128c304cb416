"""Synthetic workloads and trace CSV I/O.

Trace CSV: header ``time_ms,object_id,size_bytes``, one request per line.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import MB, CacheConfig, TraceEvent, format_time, validate_trace

TRACE_HEADER = ["time_ms", "object_id", "size_bytes"]
POPULARITY_HEADER = ["object_id", "count", "mean_interarrival_ms", "size_bytes"]


class InvalidSpec(ValueError):
    pass


class EmptyTrace(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class SyntheticSpec:
    n_objects: int = 100
    n_requests: int = 100_000
    zipf_alpha: float = 1.0
    arrival: str = "poisson"  # "poisson" | "pareto"
    rate: float = 1.0  # total requests per ms; sets the mean gap for both modes
    pareto_shape: float = 1.5
    size_min: int = 1 * MB
    size_max: int = 100 * MB
    seed: int = 0

    def check(self) -> None:
        if self.n_objects < 1 or self.n_requests < 1:
            raise InvalidSpec("n_objects and n_requests must be positive")
        if self.zipf_alpha <= 0:
            raise InvalidSpec("zipf_alpha must be > 0")
        if self.arrival not in ("poisson", "pareto"):
            raise InvalidSpec(f"unknown arrival model {self.arrival!r}")
        if self.rate <= 0:
            raise InvalidSpec("rate must be > 0")
        if self.arrival == "pareto" and self.pareto_shape <= 1:
            raise InvalidSpec("pareto_shape must be > 1 for a finite mean")
        if not 0 < self.size_min <= self.size_max:
            raise InvalidSpec("need 0 < size_min <= size_max")

    @property
    def pareto_scale(self) -> float:
        # Pareto(shape, scale) has mean shape * scale / (shape - 1)
        return (1.0 / self.rate) * (self.pareto_shape - 1) / self.pareto_shape


def zipf_probabilities(n: int, alpha: float) -> np.ndarray:
    w = np.arange(1, n + 1, dtype=float) ** -alpha
    return w / w.sum()


def inter_arrival_gaps(spec: SyntheticSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    if spec.arrival == "poisson":
        return rng.exponential(1.0 / spec.rate, n)
    # numpy's pareto is the Lomax form; shift by one for the classical Pareto
    return spec.pareto_scale * (1.0 + rng.pareto(spec.pareto_shape, n))


def gen_synthetic(spec: SyntheticSpec) -> list[TraceEvent]:
    """Zipf object popularity, fixed uniform integer sizes, Poisson or Pareto gaps.

    Object ``"k"`` has popularity rank k (1 = most popular).
    """
    spec.check()
    rng = np.random.default_rng(spec.seed)
    sizes = rng.integers(spec.size_min, spec.size_max, size=spec.n_objects, endpoint=True)
    labels = rng.choice(spec.n_objects, size=spec.n_requests, p=zipf_probabilities(spec.n_objects, spec.zipf_alpha))
    times = np.cumsum(inter_arrival_gaps(spec, rng, spec.n_requests))
    ids = [str(i + 1) for i in range(spec.n_objects)]
    trace = [TraceEvent(float(t), ids[k], int(sizes[k])) for t, k in zip(times, labels)]
    return validate_trace(trace)


def empirical_popularity(trace: Sequence[TraceEvent]) -> list[dict]:
    """Per-object request counts and mean inter-arrival times, most popular first."""
    if not trace:
        raise EmptyTrace("trace is empty")
    first, last, count, size = {}, {}, {}, {}
    for ev in trace:
        first.setdefault(ev.object, ev.time)
        last[ev.object] = ev.time
        count[ev.object] = count.get(ev.object, 0) + 1
        size[ev.object] = ev.size
    rows = []
    for obj, n in count.items():
        mean_gap = (last[obj] - first[obj]) / (n - 1) if n > 1 else float("nan")
        rows.append({"object_id": obj, "count": n, "mean_interarrival_ms": mean_gap, "size_bytes": size[obj]})
    # stable on ties: first appearance order
    rows.sort(key=lambda r: -r["count"])
    return rows


def write_popularity_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=POPULARITY_HEADER, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "mean_interarrival_ms": repr(float(r["mean_interarrival_ms"]))})
    return buf.getvalue()


def dumps_trace(trace: Sequence[TraceEvent]) -> str:
    lines = [",".join(TRACE_HEADER)]
    lines += [f"{format_time(ev.time)},{ev.object},{ev.size}" for ev in trace]
    return "\n".join(lines) + "\n"


def save_trace(trace: Sequence[TraceEvent], path) -> None:
    Path(path).write_text(dumps_trace(trace), encoding="utf-8", newline="\n")


def loads_trace(text: str, config: CacheConfig | None = None) -> list[TraceEvent]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != TRACE_HEADER:
        raise ParseError(f"expected header {','.join(TRACE_HEADER)}, got {header}", 1)
    events = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", lineno)
        try:
            events.append(TraceEvent(float(row[0]), row[1], int(row[2])))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return validate_trace(events, config)


def load_trace(path, config: CacheConfig | None = None) -> list[TraceEvent]:
    return loads_trace(Path(path).read_text(encoding="utf-8"), config)


def toy_trace(sequence: str = "AAABAAABBBBAABBBB", size: int = 10) -> list[TraceEvent]:
    """One request per ms starting at t=1, e.g. the two-object A/B example."""
    return [TraceEvent(float(t), obj, size) for t, obj in enumerate(sequence, start=1)]
