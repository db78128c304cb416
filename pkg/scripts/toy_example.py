"""Two-object toy timeline: a mean-only ranking vs mean plus spread.

Objects A and B are 10 bytes each, the cache holds one of them, every miss
takes exactly 4 ms, and one request arrives per ms from t=1.
"""
import argparse

from delayhit.core import CacheConfig, LatencySpec
from delayhit.engine import latency_improvement, simulate
from delayhit.tracegen import toy_trace


def run(sequence: str, omega: float):
    cfg = CacheConfig(capacity=15, policy="hist-va", omega=omega,
                      latency=LatencySpec("deterministic", 4.0, 0.0), admission="compete")
    return simulate(toy_trace(sequence), cfg)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sequence", default="AAABAAABBBBAABBBB")
    args = p.parse_args()
    totals = []
    for omega in (0.0, 1.0):
        report = run(args.sequence, omega)
        totals.append(report.total_latency)
        episodes = " ".join(f"{e.object}@{e.start:g}:{e.aggregate_delay:g}" for e in report.episodes)
        print(f"omega={omega:g} total={report.total_latency:g} episodes: {episodes}")
    print(f"improvement of mean+std over mean-only: {latency_improvement(*totals):.4f}")


if __name__ == "__main__":
    main()
