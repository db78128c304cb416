"""Ranking functions and victim selection.

Every rank-based policy scores a cached object as
``expected_delay_cost / (residual * size)``; higher scores are kept, the
lowest are evicted first. Ties break by recency (least recent goes first),
then insertion order, then object id.

LAC, CALA and MAD are simplified reconstructions from one-line descriptions
and are labelled ``*-style`` in reports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .core import ObjectId


class DegenerateInput(ValueError):
    pass


class CannotFit(RuntimeError):
    pass


class PolicyKind(str, Enum):
    LRU = "lru"
    STOCHASTIC_VA = "va-stoch"
    DETERMINISTIC_VA = "va-det"
    LAC = "lac"
    CALA = "cala"
    MAD = "mad"
    # mean + omega * std of the observed episode delays, no residual/size scaling
    HISTORY_VA = "hist-va"

    @property
    def label(self) -> str:
        if self in (PolicyKind.LAC, PolicyKind.CALA, PolicyKind.MAD):
            return f"{self.value}-style"
        return self.value


POLICY_NAMES = [p.value for p in PolicyKind]


def parse_policy(name: str) -> PolicyKind:
    key = name.strip().lower()
    if key.endswith("-style"):
        key = key[: -len("-style")]
    try:
        return PolicyKind(key)
    except ValueError:
        raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}") from None


def _denominator(residual: float, size: float) -> float:
    if residual <= 0 or size <= 0:
        raise DegenerateInput(f"residual and size must be positive (got R={residual}, s={size})")
    return residual * size


def rank_stochastic(lam: float, z: float, omega: float, residual: float, size: float) -> float:
    """Variance-aware rank for exponentially distributed fetch latency with mean z."""
    den = _denominator(residual, size)
    mean = z + lam * z * z
    std = math.sqrt(z * z + 6 * lam * z**3 + 5 * lam * lam * z**4)
    return (mean + omega * std) / den


def rank_deterministic_va(lam: float, z: float, omega: float, residual: float, size: float) -> float:
    den = _denominator(residual, size)
    mean = z * (1 + lam * z / 2)
    std = math.sqrt(lam * z**3 / 3)
    return (mean + omega * std) / den


def rank_lac(lam: float, z: float, residual: float, size: float) -> float:
    return rank_deterministic_va(lam, z, 0.0, residual, size)


def rank_cala(agg_delay_ewma: float, z: float, weight: float, residual: float, size: float) -> float:
    # z^2 is divided by 1 ms so both blend terms are in ms
    if not 0.0 <= weight <= 1.0:
        raise DegenerateInput(f"weight must be in [0, 1], got {weight}")
    den = _denominator(residual, size)
    return (weight * agg_delay_ewma + (1 - weight) * z * z) / den


def rank_mad(agg_delay_ewma: float, residual: float, size: float) -> float:
    return agg_delay_ewma / _denominator(residual, size)


def mad_update(ewma: float | None, observed: float, alpha: float) -> float:
    """Exponentially weighted average of episode delays; ``None`` means unseen."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    if ewma is None:
        return observed
    return alpha * observed + (1 - alpha) * ewma


@dataclass(slots=True)
class EvictionContext:
    """What a policy knows about one cached (or just-fetched) object."""

    object: ObjectId
    size: int
    lam: float
    residual: float
    z: float
    last_access: float
    order: int = 0
    agg_ewma: float = 0.0
    history_mean: float = 0.0
    history_std: float = 0.0


@dataclass(frozen=True)
class PolicyParams:
    omega: float = 1.0
    cala_weight: float = 0.5


def score(policy: PolicyKind, ctx: EvictionContext, params: PolicyParams = PolicyParams()) -> float:
    if policy is PolicyKind.LRU:
        return ctx.last_access
    if policy is PolicyKind.STOCHASTIC_VA:
        return rank_stochastic(ctx.lam, ctx.z, params.omega, ctx.residual, ctx.size)
    if policy is PolicyKind.DETERMINISTIC_VA:
        return rank_deterministic_va(ctx.lam, ctx.z, params.omega, ctx.residual, ctx.size)
    if policy is PolicyKind.LAC:
        return rank_lac(ctx.lam, ctx.z, ctx.residual, ctx.size)
    if policy is PolicyKind.CALA:
        return rank_cala(ctx.agg_ewma, ctx.z, params.cala_weight, ctx.residual, ctx.size)
    if policy is PolicyKind.MAD:
        return rank_mad(ctx.agg_ewma, ctx.residual, ctx.size)
    if policy is PolicyKind.HISTORY_VA:
        return ctx.history_mean + params.omega * ctx.history_std
    raise ValueError(policy)


def eviction_order(entries: Sequence[EvictionContext], policy: PolicyKind,
                   params: PolicyParams = PolicyParams()) -> list[EvictionContext]:
    """Entries sorted from first-to-evict to last."""
    return sorted(entries, key=lambda e: (score(policy, e, params), e.last_access, e.order, e.object))


def choose_victims(entries: Sequence[EvictionContext], free: int, incoming_size: int,
                   policy: PolicyKind, params: PolicyParams = PolicyParams()) -> list[ObjectId]:
    """Shortest lowest-rank prefix whose removal makes room for ``incoming_size``."""
    if incoming_size <= free:
        return []
    victims = []
    for e in eviction_order(entries, policy, params):
        victims.append(e.object)
        free += e.size
        if free >= incoming_size:
            return victims
    raise CannotFit(f"cannot free {incoming_size} bytes even by evicting everything")


def admit_or_bypass(entries: Sequence[EvictionContext], incoming: EvictionContext, free: int,
                    policy: PolicyKind, params: PolicyParams = PolicyParams()) -> tuple[bool, list[ObjectId]]:
    """Let the fetched object compete with residents for space.

    Residents are evicted in rank order until the incoming object fits; if
    the incoming object's own rank comes up first, it is not admitted and
    nothing is evicted.
    """
    if incoming.size <= free:
        return True, []
    victims = []
    for e in eviction_order([*entries, incoming], policy, params):
        if e is incoming:
            return False, []
        victims.append(e.object)
        free += e.size
        if free >= incoming.size:
            return True, victims
    raise CannotFit(f"cannot free {incoming.size} bytes even by evicting everything")
