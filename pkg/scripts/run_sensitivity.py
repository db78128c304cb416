"""Improvement of va-stoch over LRU as omega and the window size vary."""
import argparse
import statistics

from delayhit.core import MB, CacheConfig, LatencySpec
from delayhit.engine import latency_improvement, simulate
from delayhit.tracegen import SyntheticSpec, gen_synthetic

OMEGAS = (0.0, 0.5, 1.0, 2.0)
WINDOWS = (1_000, 10_000, 100_000)


def total(trace, seed, policy, omega=1.0, window=10_000):
    cfg = CacheConfig(capacity=500 * MB, policy=policy, omega=omega, window_size=window,
                      latency=LatencySpec("exponential", 5.0), rng_seed=seed)
    return simulate(trace, cfg).total_latency


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=5)
    args = p.parse_args()
    traces = {s: gen_synthetic(SyntheticSpec(seed=s)) for s in range(args.seeds)}
    lru = {s: total(t, s, "lru") for s, t in traces.items()}

    print("axis,value,mean_improvement,min_improvement")
    grid = [("omega", w, dict(omega=w)) for w in OMEGAS] + [("window", s, dict(window=s)) for s in WINDOWS]
    for axis, value, kw in grid:
        imps = [latency_improvement(lru[s], total(t, s, "va-stoch", **kw)) for s, t in traces.items()]
        print(f"{axis},{value:g},{statistics.fmean(imps):.4f},{min(imps):.4f}")


if __name__ == "__main__":
    main()
