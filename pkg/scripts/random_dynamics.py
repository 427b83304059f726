"""Improving-move dynamics on random square instances.

For each instance size, runs the dynamics from singleton and random starts
and records moves, final bins, the ratio against the exact optimum (small n)
or the area bound, and how many bins end below 4/9. Optionally writes a CSV.
"""

import argparse
import csv
import statistics
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from selfish_packing.analysis import config_ratio, occupancy_audit, square_bound_audit
from selfish_packing.game import Configuration, FeasibilityOracle, MovePolicy, run_dynamics
from selfish_packing.instances import gen_random, random_configuration


@dataclass
class ExperimentConfig:
    sizes: list[int] = field(default_factory=lambda: [4, 6, 8, 10, 12])
    seeds: int = 50
    oracle: str = "nfdh"
    exact_limit: int = 12
    policy: str = "best"
    order: str = "random"
    max_side: Fraction = Fraction(1, 2)
    grid: int = 16
    csv: str | None = None


@dataclass
class Run:
    n: int
    seed: int
    start: str
    moves: int
    bins: int
    opt: int
    certificate: str
    ratio: str
    below_four_ninths: int
    audit_holds: bool


def run_one(cfg: ExperimentConfig, oracle, n: int, seed: int, start: str) -> Run:
    items = gen_random(n, seed, max_side=cfg.max_side, grid=cfg.grid)
    c0 = Configuration.singletons(items) if start == "singletons" else random_configuration(items, seed)
    final, trace = run_dynamics(c0, oracle, MovePolicy(cfg.order, cfg.policy, seed))
    r = config_ratio(final, oracle)
    below, _ = occupancy_audit(final, Fraction(4, 9))
    return Run(n, seed, start, len(trace), final.num_bins, r.opt_bins, r.opt_certificate, str(r.ratio), below,
               square_bound_audit(final).holds)


def main(cfg: ExperimentConfig) -> int:
    oracle = FeasibilityOracle(cfg.oracle, cfg.exact_limit)
    runs = []
    t0 = time.perf_counter()
    print(f"{'n':>3} {'runs':>5} {'moves':>7} {'max':>4} {'worst ratio':>12} {'max<4/9':>8}")
    for n in cfg.sizes:
        batch = [run_one(cfg, oracle, n, s, st) for s in range(cfg.seeds) for st in ("singletons", "random")]
        runs += batch
        worst = max(Fraction(r.ratio) for r in batch)
        print(f"{n:>3} {len(batch):>5} {statistics.mean(r.moves for r in batch):>7.2f} "
              f"{max(r.moves for r in batch):>4} {float(worst):>12.4f} {max(r.below_four_ninths for r in batch):>8}")
    bad = [r for r in runs if r.below_four_ninths > 2 or not r.audit_holds]
    print(f"{len(runs)} runs in {time.perf_counter() - t0:.1f}s, {len(bad)} audit violations")
    if cfg.csv:
        with open(cfg.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(asdict(runs[0])))
            w.writeheader()
            w.writerows(asdict(r) for r in runs)
    return 1 if bad else 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 6, 8, 10, 12])
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--oracle", choices=["nfdh", "exact"], default="nfdh")
    ap.add_argument("--policy", choices=["first", "best"], default="best")
    ap.add_argument("--order", choices=["lowest-id", "random"], default="random")
    ap.add_argument("--max-side", type=Fraction, default=Fraction(1, 2))
    ap.add_argument("--grid", type=int, default=16)
    ap.add_argument("--csv")
    a = ap.parse_args()
    sys.exit(main(ExperimentConfig(a.sizes, a.seeds, a.oracle, 12, a.policy, a.order, a.max_side, a.grid, a.csv)))
