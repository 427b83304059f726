"""Command line: generate | converge | verify | bounds | report.

Exit codes: 0 success or pass, 1 verification failure, 2 step limit reached,
64 usage or input error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import analysis, instances
from .errors import PackingError, StepLimitReached
from .game import (
    NEW_BIN,
    Configuration,
    FeasibilityOracle,
    MovePolicy,
    Profile,
    find_coalition,
    is_nash,
    run_dynamics,
)
from .geometry import DEFAULT_EXACT_LIMIT, Packing, Placement
from .serialize import config_to_json, dumps, items_to_json, load_doc, loads, profile_to_json, q2s, s2q

EXIT_OK, EXIT_FAIL, EXIT_STEPS, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rational(text: str) -> Fraction:
    try:
        return s2q(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _fmt_potential(vec) -> str:
    return "[" + ", ".join(q2s(v) for v in vec) + "]"


def _fmt_ratio(q: Fraction) -> str:
    return f"{q2s(q)} ({analysis.decimal(q, 10)})"


def _oracle(args) -> FeasibilityOracle:
    return FeasibilityOracle(args.oracle, args.exact_limit)


def _read_state(path: str):
    try:
        doc = loads(Path(path).read_text(encoding="utf-8"))
        return load_doc(doc)
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise UsageError(f"cannot read {path}: {e}") from None


# ---------------------------------------------------------------------------
# generate


def _bin_packings(c: Configuration, profile: Profile) -> dict[int, Packing] | None:
    """Witness packings for an expanded profile, with the real item ids."""
    out = {}
    bins = c.bins()
    labels = iter(sorted(bins))
    for cls in profile.classes:
        for _ in range(cls.count):
            b = next(labels)
            if cls.witness is None or (cls.witness.sand is not None and cls.witness.sand.count):
                return None
            pool: dict = {}
            for it in bins[b]:
                pool.setdefault(it.shape, []).append(it)
            pls = [Placement(pool[p.item.shape].pop(0), p.x, p.y) for p in cls.witness.placements]
            for blk in cls.witness.blocks:
                for r in range(blk.rows):
                    for col in range(blk.cols):
                        it = pool[blk.shape].pop(0)
                        pls.append(Placement(it, blk.x + col * blk.shape.width, blk.y + r * blk.shape.height))
            out[b] = Packing(tuple(pls))
    return out


def cmd_generate(args) -> int:
    name = args.construction
    if name == "random":
        max_side = args.max_side if args.max_side is not None else Fraction(1)
        items = instances.gen_random(args.n, args.seed, squares=not args.rects, max_side=max_side, grid=args.grid)
        doc = {"items": items_to_json(items)}
        path = Path(args.out) / f"random-n{args.n}-s{args.seed}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(doc), encoding="utf-8")
        print(f"wrote {path}")
        return EXIT_OK

    if name == "unbounded-poa":
        out = instances.gen_unbounded_poa(args.k if args.k is not None else 5)
    elif name in ("square-poa", "square-poa-ext"):
        out = instances.gen_square_poa(args.N, args.eps, extended=name.endswith("ext"))
    elif name == "strong-poa":
        out = instances.gen_strong_poa(args.k if args.k is not None else 4, args.eps, args.sigma_k, args.N)
    elif name == "two-bad-bins":
        out = instances.gen_two_bad_bins(args.eps if args.eps is not None else Fraction(1, 100))
    else:
        raise UsageError(f"unknown construction {name!r}")

    base = Path(args.out)
    base.mkdir(parents=True, exist_ok=True)
    if out.expandable:
        opt_c = out.opt_config
        eq_c = out.eq_config
        docs = {
            "instance": {"items": items_to_json(opt_c.items.values())},
            "opt": config_to_json(opt_c, _bin_packings(opt_c, out.opt)),
            "eq": config_to_json(eq_c, _bin_packings(eq_c, out.eq)),
        }
    else:
        docs = {"instance": profile_to_json(out.opt), "opt": profile_to_json(out.opt), "eq": profile_to_json(out.eq)}
    for kind, doc in docs.items():
        doc["params"] = {k: (q2s(v) if isinstance(v, Fraction) else v) for k, v in out.params.items()}
        path = base / f"{out.name}.{kind}.json"
        path.write_text(dumps(doc), encoding="utf-8")
        print(f"wrote {path}")
    print(f"eq bins: {out.declared_eq_bins}")
    print(f"opt bins: {out.declared_opt}")
    print(f"ratio: {_fmt_ratio(out.declared_ratio)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# converge


def cmd_converge(args) -> int:
    items, state, _ = _read_state(args.file)
    if isinstance(state, Profile):
        raise UsageError("converge needs an explicit item list")
    c0 = state if state is not None else Configuration.singletons(items)
    oracle = _oracle(args)
    policy = MovePolicy(args.order, args.policy, args.seed)
    try:
        final, trace = run_dynamics(c0, oracle, policy, args.max_steps)
        code = EXIT_OK
    except StepLimitReached as e:
        final, trace = e.config, e.trace
        code = EXIT_STEPS
    for k, step in enumerate(trace, 1):
        print(f"step {k}: item {step.item} bin {step.source} -> {step.target} potential {_fmt_potential(step.potential)}")
    ne, _ = is_nash(final, oracle)
    print(f"steps: {len(trace)}")
    print(f"bins: {final.num_bins}")
    print(f"potential increasing: {str(trace.is_strictly_increasing()).lower()}")
    print(f"nash: {str(ne).lower()}")
    if args.output:
        Path(args.output).write_text(dumps(config_to_json(final)), encoding="utf-8")
    if code == EXIT_OK and not ne:
        code = EXIT_FAIL
    return code


# ---------------------------------------------------------------------------
# verify


def _move_json(m) -> dict:
    item = m.item
    if hasattr(item, "width"):
        item = {"w": q2s(item.width), "h": q2s(item.height)}
    return {"item": item, "source": m.source, "target": "new" if m.target == NEW_BIN else m.target, "new_cost": q2s(m.new_cost)}


def _coalition_json(coal) -> dict:
    members = [
        {"w": q2s(m.width), "h": q2s(m.height)} if hasattr(m, "width") else m for m in coal.members
    ]
    return {
        "members": members,
        "sources": list(coal.sources),
        "target": "new" if coal.target == NEW_BIN else coal.target,
        "new_area": q2s(coal.new_area),
    }


def cmd_verify(args) -> int:
    _, state, _ = _read_state(args.file)
    if state is None:
        raise UsageError("verify needs an assignment or a profile")
    oracle = _oracle(args)
    report: dict = {"mode": args.mode}
    if args.mode == "nash":
        ok, move = is_nash(state, oracle)
        report["pass"] = ok
        if move is not None:
            report["witness"] = _move_json(move)
    elif args.mode == "strong":
        coal = find_coalition(state, oracle, args.max_size, args.budget)
        report["max_size"] = args.max_size
        report["pass"] = coal is None
        if coal is not None:
            report["witness"] = _coalition_json(coal)
    else:
        threshold = args.threshold if args.threshold is not None else Fraction(4, 9)
        count, offenders = analysis.occupancy_audit(state, threshold)
        report["threshold"] = q2s(threshold)
        report["below"] = count
        report["offenders"] = [{"bin": b, "area": q2s(a)} for b, a in offenders]
        report["pass"] = count <= args.max_below
    print(dumps(report), end="")
    return EXIT_OK if report["pass"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# bounds and report


def bounds_rows() -> list[tuple[str, str]]:
    rows = []
    for m in range(2, 11):
        rows.append((f"parametric (m/(m-1))^2, m={m}", _fmt_ratio(analysis.parametric_bound(m))))
    upper = analysis.ratio_lemma_bound(Fraction(1, 4), Fraction(4, 9))
    rows.append(("PoA upper (squares)", _fmt_ratio(upper)))
    lower = instances.square_ratio(instances.default_square_eps(True), True)
    rows.append(("PoA lower (squares), construction", _fmt_ratio(lower)))
    rows.append(("PoA window (squares)", f"[2.3634, {analysis.decimal(upper, 4)}]"))
    s = analysis.spoa_constant()
    rows.append(("SPoA root x, interval", f"[{analysis.decimal(s.lo, 12)}, {analysis.decimal(s.hi, 12)}]"))
    rows.append(("SPoA case bound 1 + 3/(16(1-x)^2)", analysis.decimal(s.case_big[1], 10)))
    rows.append(("SPoA case bound 1 + 9(1-x^2)/4", analysis.decimal(s.case_medium[1], 10)))
    rows.append(("SPoA upper (squares)", "2.3605"))
    rows.append(("SPoA window (squares)", "[2.076, 2.3605]"))
    for k in range(2, 31):
        rows.append((f"L_{k}", _fmt_ratio(analysis.lk_series(k))))
    return rows


def cmd_bounds(args) -> int:
    rows = bounds_rows()
    width = max(len(r[0]) for r in rows)
    for label, value in rows:
        print(f"{label.ljust(width)}  {value}")
    return EXIT_OK


def _report_one(job):
    seed, n, max_side, oracle_kind, limit, policy = job
    items = instances.gen_random(n, seed, squares=True, max_side=max_side)
    c0 = instances.random_configuration(items, seed)
    oracle = FeasibilityOracle(oracle_kind, limit)
    final, trace = run_dynamics(c0, oracle, MovePolicy("random", policy, seed))
    ok, _ = is_nash(final, oracle)
    m = int(1 / max_side) if (1 / max_side).denominator == 1 else None
    audit = analysis.parametric_audit(final, m) if m and m >= 2 else None
    below, _ = analysis.occupancy_audit(final, Fraction(4, 9))
    ratio = analysis.config_ratio(final, oracle, verify=False)
    return seed, len(trace), final.num_bins, ratio, ok, audit, below


def cmd_report(args) -> int:
    max_side = args.max_side if args.max_side is not None else Fraction(1, 2)
    jobs = [(args.seed + k, args.n, max_side, args.oracle, args.exact_limit, args.policy) for k in range(args.count)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_report_one, jobs))
    else:
        results = [_report_one(j) for j in jobs]
    failures = 0
    worst = Fraction(0)
    print("seed steps bins opt cert ratio nash below-4/9 audit")
    for seed, steps, bins, ratio, ok, audit, below in results:
        audit_ok = audit.holds if audit is not None else True
        failures += (not ok) + (not audit_ok)
        worst = max(worst, ratio.ratio)
        print(
            f"{seed} {steps} {bins} {ratio.opt_bins} {ratio.opt_certificate} {q2s(ratio.ratio)} "
            f"{str(ok).lower()} {below} {'-' if audit is None else str(audit.holds).lower()}"
        )
    print(f"instances: {len(results)}")
    print(f"worst ratio: {_fmt_ratio(worst)}")
    m = 1 / max_side
    if m.denominator == 1 and m >= 2:
        print(f"parametric bound (m={m}): {_fmt_ratio(analysis.parametric_bound(int(m)))}")
    print(f"failures: {failures}")
    return EXIT_OK if not failures else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="selfish-packing", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def oracle_flags(sp):
        sp.add_argument("--oracle", choices=["nfdh", "exact"], default="nfdh")
        sp.add_argument("--exact-limit", type=int, default=DEFAULT_EXACT_LIMIT)

    g = sub.add_parser("generate", help="write a construction or random instance")
    g.add_argument(
        "construction",
        choices=["unbounded-poa", "square-poa", "square-poa-ext", "strong-poa", "two-bad-bins", "random"],
    )
    g.add_argument("--k", type=int)
    g.add_argument("--N", type=int)
    g.add_argument("--eps", type=_rational)
    g.add_argument("--sigma-k", type=_rational)
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--squares", action="store_true", help="square items (default)")
    g.add_argument("--rects", action="store_true", help="independent widths and heights")
    g.add_argument("--max-side", type=_rational)
    g.add_argument("--grid", type=int, default=16)
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("converge", help="run improving-move dynamics")
    c.add_argument("file")
    oracle_flags(c)
    c.add_argument("--policy", choices=["first", "best"], default="first")
    c.add_argument("--order", choices=["lowest-id", "random"], default="lowest-id")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--max-steps", type=int)
    c.add_argument("--output", help="write the final configuration here")
    c.set_defaults(func=cmd_converge)

    v = sub.add_parser("verify", help="check equilibrium or occupancy properties")
    v.add_argument("mode", choices=["nash", "strong", "occupancy"])
    v.add_argument("file")
    oracle_flags(v)
    v.add_argument("--max-size", type=int, default=2)
    v.add_argument("--budget", type=int, default=2_000_000)
    v.add_argument("--threshold", type=_rational)
    v.add_argument("--max-below", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bounds", help="print the closed-form bounds")
    b.set_defaults(func=cmd_bounds)

    r = sub.add_parser("report", help="random dynamics batch with ratio and audit summary")
    oracle_flags(r)
    r.add_argument("--n", type=int, default=10)
    r.add_argument("--count", type=int, default=20)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--max-side", type=_rational)
    r.add_argument("--policy", choices=["first", "best"], default="first")
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, PackingError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
