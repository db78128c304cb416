"""Cache simulation and analysis for delayed hits under random fetch latency."""
from .core import MB, GB, CacheConfig, LatencySpec, TraceEvent, validate_trace
from .delay_model import (LatencyModel, aggregate_delay_oracle, moments_deterministic,
                          moments_exponential, pdf_numeric)
from .engine import SimReport, latency_improvement, simulate
from .policies import PolicyKind, rank_stochastic
from .tracegen import SyntheticSpec, gen_synthetic, load_trace

__version__ = "0.1.0"
