"""Rebuild every lower-bound construction and print its exact ratio next to the upper bounds."""

import argparse
import time
from dataclasses import dataclass, field
from fractions import Fraction

from selfish_packing.analysis import decimal, lk_series, parametric_bound, poa_ratio, ratio_lemma_bound, spoa_constant
from selfish_packing.game import NFDH, FeasibilityOracle, is_nash, is_strong_nash_bounded
from selfish_packing.instances import gen_square_poa, gen_strong_poa, gen_unbounded_poa


@dataclass
class BoundsConfig:
    unbounded_k: list[int] = field(default_factory=lambda: [3, 5, 10, 20])
    strong_k: list[int] = field(default_factory=lambda: [3, 4, 5, 10, 20])
    strong_check_k: int = 4  # also run the bounded coalition search on this one
    coalition_size: int = 8
    digits: int = 10


def row(label, value, note=""):
    print(f"{label:<34} {value:<28} {note}")


def main(cfg: BoundsConfig):
    t0 = time.perf_counter()
    print("lower bounds (equilibrium bins / optimal bins)")
    exact = FeasibilityOracle("exact", 12)
    for k in cfg.unbounded_k:
        out = gen_unbounded_poa(k)
        r = poa_ratio(out, NFDH)
        nash_exact = is_nash(out.eq_config, exact)[0]
        row(f"rectangles, k={k}", str(r.ratio), f"NE nfdh/exact: true/{str(nash_exact).lower()}")

    for extended in (False, True):
        out = gen_square_poa(extended=extended)
        r = poa_ratio(out, NFDH)
        p = out.params
        row(
            f"squares{' (extended)' if extended else ''}",
            decimal(r.ratio, cfg.digits),
            f"eps={p['eps']} N={p['N']} eq bins={r.eq_bins}",
        )

    for k in cfg.strong_k:
        out = gen_strong_poa(k)
        note = f"N={out.declared_opt} eps={out.params['eps']}"
        if k == cfg.strong_check_k:
            sne = is_strong_nash_bounded(out.eq, NFDH, cfg.coalition_size)
            note += f" no coalition <= {cfg.coalition_size}: {str(sne).lower()}"
        row(f"strong, k={k}", decimal(out.declared_ratio, cfg.digits), note)
    row("L_k limit (k=200)", decimal(lk_series(200), cfg.digits))

    print("\nupper bounds")
    row("squares, ratio lemma (1/4, 4/9)", str(ratio_lemma_bound(Fraction(1, 4), Fraction(4, 9))))
    s = spoa_constant()
    row("strong, root x", f"[{decimal(s.lo, 12)}, {decimal(s.hi, 12)}]")
    row("strong, case bound", decimal(s.bound, cfg.digits), f"overlap={s.cases_overlap} side={s.side_condition}")
    for m in (2, 3, 4, 10):
        row(f"sides <= 1/{m}", str(parametric_bound(m)))
    print(f"\n{time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--coalition-size", type=int, default=8)
    ap.add_argument("--digits", type=int, default=10)
    a = ap.parse_args()
    main(BoundsConfig(coalition_size=a.coalition_size, digits=a.digits))
