"""Compare every policy on synthetic Zipf traces over several seeds."""
import argparse
import sys

from delayhit.core import MB, CacheConfig, LatencySpec
from delayhit.engine import simulate, with_improvements, write_report_csv
from delayhit.policies import POLICY_NAMES
from delayhit.tracegen import SyntheticSpec, gen_synthetic


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--arrival", choices=["poisson", "pareto"], default="poisson")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--requests", type=int, default=100_000)
    p.add_argument("--cache-mb", type=int, default=500)
    p.add_argument("--policies", default="lru,lac,cala,mad,va-det,va-stoch")
    args = p.parse_args()
    policies = args.policies.split(",")
    unknown = set(policies) - set(POLICY_NAMES)
    if unknown:
        sys.exit(f"unknown policies: {sorted(unknown)}")

    reports = []
    for seed in range(args.seeds):
        trace = gen_synthetic(SyntheticSpec(n_requests=args.requests, arrival=args.arrival, seed=seed))
        for policy in policies:
            cfg = CacheConfig(capacity=args.cache_mb * MB, policy=policy,
                              latency=LatencySpec("exponential", 5.0), rng_seed=seed)
            reports.append(simulate(trace, cfg))
    sys.stdout.write(write_report_csv(with_improvements(reports)))


if __name__ == "__main__":
    main()
