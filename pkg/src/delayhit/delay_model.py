"""Aggregate-delay statistics for one fetch episode.

An episode starts with a miss on object i. The fetch takes time Z (fixed or
exponential with mean z), requests for i keep arriving as a Poisson process
with rate ``lam`` and each waits for the remaining fetch time. The aggregate
delay is Z plus the sum of those waits.

This module has closed-form moments for both latency models, a numeric
density for the exponential case, and a brute-force Monte Carlo sampler that
checks all of them.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln


class NonPositiveLatency(ValueError):
    pass


class NegativeRate(ValueError):
    pass


class TruncationWarning(RuntimeWarning):
    """The last retained term of the arrival-count series is not negligible."""


@dataclass(frozen=True)
class LatencyModel:
    kind: str  # "deterministic" | "exponential"
    mean: float

    def __post_init__(self):
        if self.kind not in ("deterministic", "exponential"):
            raise ValueError(f"unknown latency model {self.kind!r}")
        if not self.mean > 0:
            raise NonPositiveLatency(f"mean latency must be > 0, got {self.mean}")

    @classmethod
    def deterministic(cls, z: float) -> "LatencyModel":
        return cls("deterministic", z)

    @classmethod
    def exponential(cls, z: float) -> "LatencyModel":
        return cls("exponential", z)

    @property
    def rate(self) -> float:
        return 1.0 / self.mean

    def quantile(self, p: float) -> float:
        if self.kind == "deterministic":
            return self.mean
        return -self.mean * math.log1p(-p)


@dataclass(frozen=True)
class DelayMoments:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class OracleEstimate:
    mean: float
    variance: float
    se_mean: float
    se_variance: float
    n_samples: int

    @property
    def moments(self) -> DelayMoments:
        return DelayMoments(self.mean, self.variance)


@dataclass(frozen=True)
class PdfEvalConfig:
    k_max: int = 20
    quad_points: int = 64

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.quad_points < 16:
            raise ValueError("quad_points must be >= 16")

    @classmethod
    def default_for(cls, lam: float, mu: float, quad_points: int = 64) -> "PdfEvalConfig":
        z_q = -math.log(1e-6) / mu
        m = lam * z_q
        return cls(max(20, math.ceil(m + 8 * math.sqrt(m))), quad_points)


def _check(lam: float, z: float) -> None:
    if lam < 0:
        raise NegativeRate(f"arrival rate must be >= 0, got {lam}")
    if not z > 0:
        raise NonPositiveLatency(f"latency must be > 0, got {z}")


def moments_deterministic(lam: float, z: float) -> DelayMoments:
    """Mean z(1 + lam z / 2) and variance lam z^3 / 3 for a fixed fetch time z."""
    _check(lam, z)
    return DelayMoments(z * (1 + lam * z / 2), lam * z**3 / 3)


def moments_exponential(lam: float, z: float) -> DelayMoments:
    """Moments when the fetch time is exponential with mean z."""
    _check(lam, z)
    return DelayMoments(z + lam * z**2, z**2 + 6 * lam * z**3 + 5 * lam**2 * z**4)


def moments_for(lam: float, model: LatencyModel) -> DelayMoments:
    if model.kind == "deterministic":
        return moments_deterministic(lam, model.mean)
    return moments_exponential(lam, model.mean)


def sample_latency(model: LatencyModel, rng: np.random.Generator) -> float:
    if model.kind == "deterministic":
        return model.mean
    u = 1.0 - rng.random()  # (0, 1]
    return -model.mean * math.log(u)


def sample_latencies(model: LatencyModel, n: int, rng: np.random.Generator) -> np.ndarray:
    if model.kind == "deterministic":
        return np.full(n, model.mean)
    return -model.mean * np.log(1.0 - rng.random(n))


def sample_aggregate_delay(lam: float, model: LatencyModel, n: int,
                           rng: np.random.Generator, chunk: int = 200_000) -> np.ndarray:
    """Draw ``n`` independent episode aggregate delays by direct simulation.

    Each draw samples Z, a Poisson(lam Z) number of arrivals, places them
    uniformly on (0, Z] and adds up every remaining wait.
    """
    out = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        z = sample_latencies(model, hi - lo, rng)
        k = rng.poisson(lam * z) if lam > 0 else np.zeros(hi - lo, dtype=np.int64)
        total = int(k.sum())
        waits = np.zeros(hi - lo)
        if total:
            owner = np.repeat(np.arange(hi - lo), k)
            offsets = (1.0 - rng.random(total)) * z[owner]  # on (0, Z]
            waits = np.bincount(owner, weights=z[owner] - offsets, minlength=hi - lo)
        out[lo:hi] = z + waits
    return out


def aggregate_delay_oracle(lam: float, model: LatencyModel, n_samples: int,
                           rng: np.random.Generator) -> OracleEstimate:
    """Monte Carlo mean/variance of the aggregate delay with standard errors.

    The variance estimate is unbiased (n - 1); its standard error uses the
    fourth central moment.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    d = sample_aggregate_delay(lam, model, n_samples, rng)
    n = n_samples
    mean = float(d.mean())
    if n == 1:
        return OracleEstimate(mean, 0.0, math.inf, math.inf, 1)
    dev = d - mean
    m2 = float(np.mean(dev**2))
    m4 = float(np.mean(dev**4))
    var = m2 * n / (n - 1)
    se_mean = math.sqrt(var / n)
    var_of_var = (m4 - var**2 * (n - 3) / (n - 1)) / n if n > 3 else m4 / n
    return OracleEstimate(mean, var, se_mean, math.sqrt(max(var_of_var, 0.0)), n)


# -- density ------------------------------------------------------------------

def pdf_point_mass_term(lam: float, mu: float, d: float) -> float:
    """Density contributed by episodes with no delayed hits (D = Z)."""
    return mu * math.exp(-(lam + mu) * d)


def conditional_pdf_given_k_z(k: int, z: float, d: float) -> float:
    """Density of D given k delayed hits and fetch time z.

    D - z is z times an Irwin-Hall(k) variable, so the support is (z, (k+1) z].
    """
    if k < 1 or not z > 0:
        raise ValueError("need k >= 1 and z > 0")
    if not z < d <= (k + 1) * z:
        return 0.0
    return float(_irwin_hall_scaled(k, np.array([z]), d)[0])


def _irwin_hall_scaled(k: int, z: np.ndarray, d: float) -> np.ndarray:
    """Alternating-sum density of D | (k, z) evaluated for an array of z.

    Uses the symmetry of Irwin-Hall about k/2 and long double terms to keep
    the cancellation in check; the caller guarantees z < d <= (k+1) z.
    """
    x = d / z - 1.0
    x = np.minimum(x, k - x).astype(np.longdouble)
    j = np.arange(k + 1, dtype=np.longdouble)
    base = x[:, None] - j[None, :]
    pos = base > 0
    coef = np.array([math.comb(k, int(i)) for i in range(k + 1)], dtype=np.longdouble)
    sign = np.where(np.arange(k + 1) % 2 == 0, 1, -1).astype(np.longdouble)
    terms = np.where(pos, sign * coef * np.where(pos, base, 0) ** (k - 1), 0)
    s = terms.sum(axis=1) / math.factorial(k - 1)
    return np.maximum(np.asarray(s / z, dtype=float), 0.0)


@lru_cache(maxsize=None)
def _node_table(k: int, quad_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes for the k-th series term, as fractions u = z / d.

    The z-range [d/(k+1), d) is split at d/m, m = 2..k, where the number of
    active terms in the alternating sum changes, so each piece is smooth.
    Because x = d/z - 1 = 1/u - 1 does not depend on d, the conditional
    density table is computed once per (k, quad_points).
    Returns ``u`` and ``weight * d * f(d | k, z)`` (which is d-free).
    """
    nodes, weights = leggauss(quad_points)
    edges = 1.0 / np.arange(k + 1, 0, -1, dtype=float)
    a, b = edges[:-1], edges[1:]
    half = (b - a) / 2
    u = (a[:, None] + half[:, None] * (nodes[None, :] + 1)).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    # f(d | k, z) = ih(x) / z and dz = d du, so d cancels
    ih = _irwin_hall_scaled(k, u, 1.0) * u
    return u, w * ih / u


def _series_terms(lam: float, mu: float, d: np.ndarray, k_max: int,
                  quad_points: int) -> tuple[np.ndarray, np.ndarray]:
    total = np.zeros_like(d)
    last = np.zeros_like(d)
    for k in range(1, k_max + 1):
        u, wf = _node_table(k, quad_points)
        z = d[:, None] * u[None, :]
        log_g = k * np.log(lam * z) - (lam + mu) * z - gammaln(k + 1) + math.log(mu)
        last = np.exp(log_g) @ wf
        total += last
    return total, last


def pdf_numeric(lam: float, mu: float, d, cfg: PdfEvalConfig | None = None):
    """Density of the aggregate delay for exponential fetch time (rate mu).

    Truncates the arrival-count series at ``cfg.k_max`` and integrates each
    term by piecewise Gauss-Legendre quadrature. ``d`` may be a scalar or an
    array. Warns with :class:`TruncationWarning` when the last term carries
    more than 1e-6 of the density.
    """
    scalar = np.ndim(d) == 0
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if not np.all(d > 0):
        raise ValueError("d must be > 0")
    if lam < 0 or not mu > 0:
        raise ValueError("need lam >= 0 and mu > 0")
    cfg = cfg or PdfEvalConfig.default_for(lam, mu)
    total = mu * np.exp(-(lam + mu) * d)
    if lam > 0:
        series, last = _series_terms(lam, mu, d, cfg.k_max, cfg.quad_points)
        total = total + series
        bad = last > 1e-6 * total
        if np.any(bad):
            warnings.warn(f"k_max={cfg.k_max} term holds more than 1e-6 of the density "
                          f"at {int(bad.sum())} point(s), first d={d[bad][0]}",
                          TruncationWarning, stacklevel=2)
    return float(total[0]) if scalar else total
