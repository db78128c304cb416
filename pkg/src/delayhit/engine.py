"""Event-driven cache simulator with delayed hits.

A request for a resident object is a hit (zero latency). A request for an
object whose fetch is in flight is a delayed hit and waits for the remaining
fetch time. Any other request is a miss: it samples a fetch time Z, waits Z,
and opens a fetch episode. When the fetch completes the episode's aggregate
delay is finalized and the object is offered to the cache; the eviction
policy picks victims among residents.

Completions are processed before requests that arrive at the same instant.
"""
from __future__ import annotations

import csv
import heapq
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import CacheConfig, LatencySpec, ObjectId, TraceEvent, validate_trace
from .delay_model import LatencyModel, sample_latency
from .estimators import WindowState
from .policies import (EvictionContext, PolicyKind, PolicyParams, admit_or_bypass,
                       choose_victims, mad_update, parse_policy)


class ZeroBaseline(ZeroDivisionError):
    pass


@dataclass
class InFlightFetch:
    object: ObjectId
    start: float
    completion: float
    queued_requests: list = field(default_factory=list)


@dataclass(frozen=True)
class Episode:
    object: ObjectId
    start: float
    completion: float
    delayed_hits: int
    aggregate_delay: float


REPORT_FIELDS = ["policy", "seed", "C_bytes", "S", "omega", "L_ms", "c_ms_per_byte",
                 "latency_model", "total_latency_ms", "hits", "delayed_hits", "misses",
                 "improvement_vs_lru"]


@dataclass
class SimReport:
    policy: str
    seed: int
    capacity: int
    window_size: int
    omega: float
    base_latency: float
    per_byte: float
    latency_model: str
    total_latency: float
    hits: int
    delayed_hits: int
    misses: int
    improvement_vs_lru: float | None = None
    episodes: list[Episode] = field(default_factory=list, repr=False)
    admission: str = "always"
    extra: dict = field(default_factory=dict, repr=False)

    @property
    def requests(self) -> int:
        return self.hits + self.delayed_hits + self.misses

    def row(self) -> dict:
        imp = "" if self.improvement_vs_lru is None else repr(self.improvement_vs_lru)
        return {
            "policy": self.policy, "seed": self.seed, "C_bytes": self.capacity,
            "S": self.window_size, "omega": repr(self.omega), "L_ms": repr(self.base_latency),
            "c_ms_per_byte": repr(self.per_byte), "latency_model": self.latency_model,
            "total_latency_ms": repr(self.total_latency), "hits": self.hits,
            "delayed_hits": self.delayed_hits, "misses": self.misses,
            "improvement_vs_lru": imp,
        }

    @classmethod
    def from_row(cls, row: dict) -> "SimReport":
        imp = row["improvement_vs_lru"]
        return cls(
            policy=row["policy"], seed=int(row["seed"]), capacity=int(row["C_bytes"]),
            window_size=int(row["S"]), omega=float(row["omega"]), base_latency=float(row["L_ms"]),
            per_byte=float(row["c_ms_per_byte"]), latency_model=row["latency_model"],
            total_latency=float(row["total_latency_ms"]), hits=int(row["hits"]),
            delayed_hits=int(row["delayed_hits"]), misses=int(row["misses"]),
            improvement_vs_lru=float(imp) if imp != "" else None,
        )

    def detail_json(self) -> str:
        doc = self.row()
        doc["episodes"] = [asdict(e) for e in self.episodes]
        return json.dumps(doc)


def write_report_csv(reports: Iterable[SimReport], stream=None, extra: Sequence[str] = ()) -> str:
    """Serialize reports as CSV rows; ``extra`` names leading columns taken from ``report.extra``."""
    buf = stream if stream is not None else io.StringIO()
    w = csv.DictWriter(buf, fieldnames=[*extra, *REPORT_FIELDS], lineterminator="\n")
    w.writeheader()
    for r in reports:
        row = r.row()
        for name in extra:
            row[name] = r.extra.get(name, "")
        w.writerow(row)
    return buf.getvalue() if stream is None else ""


def read_report_csv(text: str) -> list[SimReport]:
    return [SimReport.from_row(row) for row in csv.DictReader(io.StringIO(text))]


def episode_aggregate_delay(fetch: InFlightFetch) -> float:
    """Fetch time plus every queued request's remaining wait."""
    return (fetch.completion - fetch.start) + sum(fetch.completion - t for t in fetch.queued_requests)


def latency_improvement(latency_lru: float, latency_a: float) -> float:
    if latency_lru == 0:
        raise ZeroBaseline("LRU latency is zero; improvement undefined")
    return (latency_lru - latency_a) / latency_lru


def miss_latency_for(size: int, base: float, per_byte: float, stochastic: bool,
                     rng: np.random.Generator | None = None) -> float:
    z = base + per_byte * size
    if not z > 0:
        raise ValueError("mean miss latency must be positive")
    if not stochastic:
        return z
    return sample_latency(LatencyModel.exponential(z), rng)


class _Welford:
    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n, self.mean, self.m2 = 0, 0.0, 0.0

    def add(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    @property
    def pstd(self) -> float:
        return math.sqrt(self.m2 / self.n) if self.n else 0.0


class Simulator:
    """One simulation run. Use :func:`simulate` unless you need the internals."""

    def __init__(self, config: CacheConfig):
        self.config = config
        self.policy = parse_policy(config.policy)
        self.params = PolicyParams(omega=config.omega, cala_weight=config.cala_weight)
        self.latency: LatencySpec = config.latency
        self.rng = np.random.default_rng(config.rng_seed)
        self.window = WindowState(config.window_size)
        self.resident: dict[ObjectId, int] = {}
        self.admitted_at: dict[ObjectId, int] = {}
        self.used = 0
        self.inflight: dict[ObjectId, InFlightFetch] = {}
        self._heap: list = []
        self._seq = 0
        self.sizes: dict[ObjectId, int] = {}
        self.ewma: dict[ObjectId, float] = {}
        self.history: dict[ObjectId, _Welford] = {}
        self.episodes: list[Episode] = []
        self.event_latency: list[float] = []
        self.hits = self.delayed_hits = self.misses = 0

    # -- events ---------------------------------------------------------------

    def request(self, t: float, obj: ObjectId, size: int) -> float:
        self._complete_until(t)
        self.sizes[obj] = size
        self.window.record_arrival(t, obj)
        if obj in self.resident:
            self.hits += 1
            lat = 0.0
        elif obj in self.inflight:
            fetch = self.inflight[obj]
            fetch.queued_requests.append(t)
            self.delayed_hits += 1
            lat = fetch.completion - t
        else:
            z = miss_latency_for(size, self.latency.base, self.latency.coefficient,
                                 self.latency.stochastic, self.rng)
            fetch = InFlightFetch(obj, t, t + z)
            self.inflight[obj] = fetch
            heapq.heappush(self._heap, (fetch.completion, self._seq, obj))
            self._seq += 1
            self.misses += 1
            lat = z
        self.event_latency.append(lat)
        return lat

    def _complete_until(self, t: float) -> None:
        while self._heap and self._heap[0][0] <= t:
            _, _, obj = heapq.heappop(self._heap)
            self._complete(obj)

    def finish(self) -> None:
        self._complete_until(math.inf)

    def _complete(self, obj: ObjectId) -> None:
        fetch = self.inflight.pop(obj)
        now = fetch.completion
        d = episode_aggregate_delay(fetch)
        self.episodes.append(Episode(obj, fetch.start, now, len(fetch.queued_requests), d))
        self.ewma[obj] = mad_update(self.ewma.get(obj), d, self.config.mad_alpha)
        self.history.setdefault(obj, _Welford()).add(d)
        self._admit(obj, now)
        assert self.used <= self.config.capacity

    # -- admission ------------------------------------------------------------

    def _context(self, obj: ObjectId, now: float) -> EvictionContext:
        size = self.sizes[obj]
        st = self.window[obj]
        hist = self.history.get(obj)
        return EvictionContext(
            object=obj, size=size,
            lam=self.window.estimate_rate(obj, now),
            residual=self.window.estimate_residual(obj, now),
            z=self.latency.mean_for(size),
            last_access=st.last_access,
            order=self.admitted_at.get(obj, self._seq),
            agg_ewma=self.ewma.get(obj, 0.0),
            history_mean=hist.mean if hist else 0.0,
            history_std=hist.pstd if hist else 0.0,
        )

    def _admit(self, obj: ObjectId, now: float) -> None:
        size = self.sizes[obj]
        free = self.config.capacity - self.used
        mode = self.config.admission
        if mode == "never":
            return
        if size <= free:
            victims, admit = [], True
        else:
            residents = [self._context(o, now) for o in self.resident]
            if mode == "compete":
                admit, victims = admit_or_bypass(residents, self._context(obj, now), free,
                                                 self.policy, self.params)
            else:
                admit, victims = True, choose_victims(residents, free, size, self.policy, self.params)
        for v in victims:
            self.used -= self.resident.pop(v)
            del self.admitted_at[v]
        if admit:
            self.resident[obj] = size
            self.admitted_at[obj] = self._seq
            self._seq += 1
            self.used += size

    # -- results --------------------------------------------------------------

    def report(self) -> SimReport:
        total = math.fsum(self.event_latency)
        by_episode = math.fsum(e.aggregate_delay for e in self.episodes)
        assert math.isclose(total, by_episode, rel_tol=1e-9, abs_tol=1e-9), (total, by_episode)
        cfg = self.config
        return SimReport(
            policy=self.policy.label, seed=cfg.rng_seed, capacity=cfg.capacity,
            window_size=cfg.window_size, omega=cfg.omega, base_latency=self.latency.base,
            per_byte=self.latency.coefficient, latency_model=self.latency.kind,
            total_latency=total, hits=self.hits, delayed_hits=self.delayed_hits,
            misses=self.misses, episodes=self.episodes, admission=cfg.admission,
        )


def simulate(trace: Sequence[TraceEvent], config: CacheConfig, validate: bool = True) -> SimReport:
    if validate:
        trace = validate_trace(trace, config)
    sim = Simulator(config)
    for ev in trace:
        sim.request(ev.time, ev.object, ev.size)
    sim.finish()
    return sim.report()


def with_improvements(reports: list[SimReport]) -> list[SimReport]:
    """Fill ``improvement_vs_lru`` from the LRU report that shares each run's seed."""
    baseline = {r.seed: r.total_latency for r in reports if r.policy == PolicyKind.LRU.value}
    for r in reports:
        if r.seed in baseline:
            r.improvement_vs_lru = latency_improvement(baseline[r.seed], r.total_latency)
    return reports


__all__ = ["Episode", "InFlightFetch", "SimReport", "Simulator", "ZeroBaseline",
           "episode_aggregate_delay", "latency_improvement", "miss_latency_for",
           "read_report_csv", "simulate", "with_improvements", "write_report_csv"]
