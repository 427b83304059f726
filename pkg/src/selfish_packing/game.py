"""Selfish bin packing game with proportional (area-share) cost.

An item in bin ``k`` pays ``a_i / a(R(k))`` where ``a(R(k))`` is the occupied
area of the bin, or zero when the feasibility oracle rejects the bin. Items
migrate one at a time (or, for strong equilibria, in coalitions heading to one
common bin) whenever the move strictly lowers their cost.

Two state representations are supported. :class:`Configuration` names every
item and bin explicitly and drives the dynamics. :class:`Profile` stores bin
contents as shape multisets with a multiplicity per bin class, which is what
the large lower-bound constructions need (their optimal bin count has dozens
of digits). Equilibrium and coalition checks run on profiles; explicit
configurations are grouped into one first.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Iterable, Iterator, Sequence

from .errors import (
    InstanceTooLarge,
    PotentialViolation,
    SearchSpaceTooLarge,
    StepLimitReached,
    UnknownItem,
)
from .geometry import (
    DEFAULT_EXACT_LIMIT,
    ZERO,
    Item,
    Packing,
    Rect,
    bottom_left_pack,
    exact_fits,
    full_span_excludes,
    lattice_excludes,
)
from .nfdh import nfdh_fits_counts

INFINITE = math.inf
NEW_BIN = -1

ShapeCounts = tuple[tuple[Rect, int], ...]

# bottom-left heuristic is quartic in the item count; skip it above this size
_BL_MAX_ITEMS = 40


def canonical(shapes: Iterable) -> ShapeCounts:
    """Sorted ``(shape, count)`` pairs for an iterable of Rects, Items or pairs."""
    counts: Counter = Counter()
    for s in shapes:
        if isinstance(s, Item):
            counts[s.shape] += 1
        elif isinstance(s, Rect):
            counts[s] += 1
        else:
            shape, n = s
            counts[shape] += n
    return tuple(sorted((r, n) for r, n in counts.items() if n))


def counts_area(counts: ShapeCounts) -> Fraction:
    return sum((r.area * n for r, n in counts), ZERO)


def _merge(a: ShapeCounts, b: ShapeCounts) -> ShapeCounts:
    return canonical([*a, *b])


@lru_cache(maxsize=1 << 16)
def _fits_cached(kind: str, limit: int, key: ShapeCounts) -> bool:
    if not key:
        return True
    if counts_area(key) > 1:
        return False
    if kind == "nfdh":
        return nfdh_fits_counts(key)
    if lattice_excludes(key) or full_span_excludes(key):
        return False
    if nfdh_fits_counts(key):
        return True
    n = sum(c for _, c in key)
    if n > max(limit, _BL_MAX_ITEMS):
        raise InstanceTooLarge(f"{n} items exceed the exact-oracle limit of {limit}")
    items = [Item(k, r) for k, r in enumerate(r for r, c in key for _ in range(c))]
    if bottom_left_pack(items) is not None:
        return True
    return exact_fits(items, limit) is not None


@dataclass(frozen=True)
class FeasibilityOracle:
    """Decides whether a set of items fits together in one bin.

    ``nfdh`` accepts exactly what NFDH packs. ``exact`` answers the true
    geometric question: it rejects on area or a lattice-point count, accepts
    on an NFDH or bottom-left witness, and otherwise runs the complete search
    of :func:`exact_fits`, which refuses more than ``limit`` items.
    """

    kind: str = "nfdh"
    limit: int = DEFAULT_EXACT_LIMIT

    def __post_init__(self):
        if self.kind not in ("nfdh", "exact"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")

    def fits(self, shapes: Iterable) -> bool:
        return _fits_cached(self.kind, self.limit, canonical(shapes))

    def fits_counts(self, counts: ShapeCounts) -> bool:
        return _fits_cached(self.kind, self.limit, counts)


NFDH = FeasibilityOracle("nfdh")
EXACT = FeasibilityOracle("exact")


# ---------------------------------------------------------------------------
# States


@dataclass
class Configuration:
    """Explicit game state: ``assignment[item_id] = bin index``."""

    items: dict[int, Item]
    assignment: dict[int, int]

    def __post_init__(self):
        if set(self.items) != set(self.assignment):
            raise ValueError("every item must be assigned to exactly one bin")
        for k, it in self.items.items():
            if it.id != k:
                raise ValueError(f"item keyed {k} carries id {it.id}")

    @classmethod
    def from_bins(cls, bins: Iterable[Iterable[Item]]) -> "Configuration":
        items, assignment = {}, {}
        for b, content in enumerate(bins):
            for it in content:
                if it.id in items:
                    raise ValueError(f"item {it.id} appears twice")
                items[it.id] = it
                assignment[it.id] = b
        return cls(items, assignment)

    @classmethod
    def singletons(cls, items: Iterable[Item]) -> "Configuration":
        return cls.from_bins([it] for it in sorted(items, key=lambda it: it.id))

    def bins(self) -> dict[int, list[Item]]:
        out: dict[int, list[Item]] = {}
        for iid in sorted(self.assignment):
            out.setdefault(self.assignment[iid], []).append(self.items[iid])
        return dict(sorted(out.items()))

    def bin_of(self, item_id: int) -> int:
        try:
            return self.assignment[item_id]
        except KeyError:
            raise UnknownItem(item_id) from None

    @property
    def num_bins(self) -> int:
        return len(set(self.assignment.values()))

    def fresh_bin(self) -> int:
        return max(self.assignment.values(), default=-1) + 1

    def moved(self, item_ids: Iterable[int], target: int) -> "Configuration":
        if target == NEW_BIN:
            target = self.fresh_bin()
        assignment = dict(self.assignment)
        for iid in item_ids:
            if iid not in assignment:
                raise UnknownItem(iid)
            assignment[iid] = target
        return Configuration(self.items, assignment)

    def relabeled(self, item_map: dict[int, int] | None = None, bin_map: dict[int, int] | None = None) -> "Configuration":
        item_map = item_map or {k: k for k in self.items}
        bin_map = bin_map or {b: b for b in set(self.assignment.values())}
        items = {item_map[k]: Item(item_map[k], it.shape) for k, it in self.items.items()}
        assignment = {item_map[k]: bin_map[b] for k, b in self.assignment.items()}
        return Configuration(items, assignment)

    def to_profile(self) -> "Profile":
        return Profile(tuple(BinClass(canonical(content)) for content in self.bins().values()))


@dataclass(frozen=True)
class BinClass:
    """``count`` identical bins, each holding the shape multiset ``contents``."""

    contents: ShapeCounts
    count: int = 1
    witness: Packing | None = None

    @property
    def area(self) -> Fraction:
        return counts_area(self.contents)

    @property
    def num_items(self) -> int:
        return sum(n for _, n in self.contents)


@dataclass(frozen=True)
class Profile:
    classes: tuple[BinClass, ...]

    @property
    def num_bins(self) -> int:
        return sum(c.count for c in self.classes)

    @property
    def num_items(self) -> int:
        return sum(c.count * c.num_items for c in self.classes)

    def shape_counts(self) -> Counter:
        out: Counter = Counter()
        for c in self.classes:
            for r, n in c.contents:
                out[r] += n * c.count
        return out

    @property
    def total_area(self) -> Fraction:
        return sum((c.area * c.count for c in self.classes), ZERO)

    def expand(self, max_items: int = 200_000) -> Configuration:
        """Materialize one Item per square, numbering items and bins in class order."""
        if self.num_items > max_items:
            raise ValueError(f"profile holds {self.num_items} items, above max_items={max_items}")
        bins = []
        next_id = 0
        for c in self.classes:
            for _ in range(c.count):
                content = []
                for r, n in c.contents:
                    for _ in range(n):
                        content.append(Item(next_id, r))
                        next_id += 1
                bins.append(content)
        return Configuration.from_bins(bins)


# ---------------------------------------------------------------------------
# Costs and single moves


def bin_area(content: Iterable, oracle: FeasibilityOracle) -> Fraction:
    """``a(R(k))``: total area if the oracle accepts the bin, else 0."""
    key = canonical(content)
    return counts_area(key) if oracle.fits_counts(key) else ZERO


def cost(c: Configuration, item, oracle: FeasibilityOracle):
    iid = item.id if isinstance(item, Item) else item
    if iid not in c.items:
        raise UnknownItem(iid)
    content = c.bins()[c.assignment[iid]]
    a = bin_area(content, oracle)
    return c.items[iid].area / a if a else INFINITE


@dataclass(frozen=True)
class Move:
    """Single migration. ``item`` is an id (explicit) or a Rect (profile)."""

    item: object
    source: int
    target: int
    new_cost: Fraction


def improving_moves(c: Configuration, item, oracle: FeasibilityOracle) -> list[Move]:
    iid = item.id if isinstance(item, Item) else item
    if iid not in c.items:
        raise UnknownItem(iid)
    it = c.items[iid]
    bins = c.bins()
    src = c.assignment[iid]
    src_area = bin_area(bins[src], oracle)
    moves = []
    for b, content in bins.items():
        if b == src:
            continue
        key = canonical(content)
        if not oracle.fits_counts(key):
            continue
        new_area = counts_area(key) + it.area
        if new_area <= src_area or new_area > 1:
            continue
        if oracle.fits_counts(_merge(key, ((it.shape, 1),))):
            moves.append(Move(iid, src, b, it.area / new_area))
    if not src_area:
        moves.append(Move(iid, src, NEW_BIN, Fraction(1)))
    return moves


def potential(c: Configuration, oracle: FeasibilityOracle) -> tuple[Fraction, ...]:
    """Occupied areas of the non-empty bins, non-increasing; infeasible bins count 0."""
    return tuple(sorted((bin_area(content, oracle) for content in c.bins().values()), reverse=True))


@dataclass(frozen=True)
class MovePolicy:
    order: str = "lowest-id"  # or "random"
    target: str = "first"  # or "best"
    seed: int = 0

    def __post_init__(self):
        if self.order not in ("lowest-id", "random"):
            raise ValueError(f"unknown item order {self.order!r}")
        if self.target not in ("first", "best"):
            raise ValueError(f"unknown target rule {self.target!r}")


@dataclass(frozen=True)
class TraceStep:
    items: tuple[int, ...]
    sources: tuple[int, ...]
    target: int
    potential: tuple[Fraction, ...]

    @property
    def item(self) -> int:
        return self.items[0]

    @property
    def source(self) -> int:
        return self.sources[0]

    @property
    def is_coalition(self) -> bool:
        return len(self.items) > 1


@dataclass
class GameTrace:
    initial_potential: tuple[Fraction, ...] = ()
    steps: list[TraceStep] = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def __iter__(self) -> Iterator[TraceStep]:
        return iter(self.steps)

    def potentials(self) -> list[tuple[Fraction, ...]]:
        return [self.initial_potential] + [s.potential for s in self.steps]

    def is_strictly_increasing(self) -> bool:
        ps = self.potentials()
        return all(a < b for a, b in zip(ps, ps[1:]))


def _pick_target(moves: list[Move], rule: str) -> Move:
    if rule == "first":
        return moves[0]
    # lowest cost, ties to lowest bin index, the new bin last
    return min(moves, key=lambda m: (m.new_cost, m.target == NEW_BIN, m.target))


def _step_order(c: Configuration, oracle: FeasibilityOracle, policy: MovePolicy, rng: random.Random) -> list[int]:
    bins = c.bins()
    infeasible = {b for b, content in bins.items() if not oracle.fits(content)}
    ids = sorted(c.items)
    if policy.order == "random":
        rng.shuffle(ids)
    first = [i for i in ids if c.assignment[i] in infeasible]
    rest = [i for i in ids if c.assignment[i] not in infeasible]
    return first + rest


def run_dynamics(
    c0: Configuration,
    oracle: FeasibilityOracle = NFDH,
    policy: MovePolicy = MovePolicy(),
    max_steps: int | None = None,
    trace: GameTrace | None = None,
) -> tuple[Configuration, GameTrace]:
    """Apply improving single moves until none remains.

    Items in infeasible bins always move first. Raises
    :class:`StepLimitReached` if ``max_steps`` moves were made and another
    improving move exists.
    """
    if max_steps is not None and max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    rng = random.Random(policy.seed)
    c = c0
    current = potential(c, oracle)
    if trace is None:
        trace = GameTrace(current)
    steps = 0
    while True:
        move = None
        for iid in _step_order(c, oracle, policy, rng):
            moves = improving_moves(c, iid, oracle)
            if moves:
                move = _pick_target(moves, policy.target)
                break
        if move is None:
            return c, trace
        if max_steps is not None and steps >= max_steps:
            raise StepLimitReached(f"stopped after {steps} steps", c, trace)
        c = c.moved([move.item], move.target)
        target = c.assignment[move.item]
        nxt = potential(c, oracle)
        if not nxt > current:
            raise PotentialViolation(f"potential did not increase: {current} -> {nxt}")
        trace.steps.append(TraceStep((move.item,), (move.source,), target, nxt))
        current = nxt
        steps += 1


# ---------------------------------------------------------------------------
# Grouped view used by the equilibrium and coalition checks


@dataclass
class _Group:
    contents: ShapeCounts
    count: int
    area: Fraction  # 0 when infeasible
    feasible: bool
    bins: list[list[Item]] | None = None  # explicit members, one list per bin
    labels: list[int] | None = None


def _groups_from_profile(p: Profile, oracle: FeasibilityOracle) -> list[_Group]:
    out = []
    for cls in p.classes:
        if cls.witness is not None and oracle.kind == "exact":
            ok = True  # constructive witness, validated by the generator
        else:
            ok = oracle.fits_counts(cls.contents)
        out.append(_Group(cls.contents, cls.count, cls.area if ok else ZERO, ok))
    return out


def _groups_from_config(c: Configuration, oracle: FeasibilityOracle) -> list[_Group]:
    merged: dict[ShapeCounts, _Group] = {}
    for b, content in c.bins().items():
        key = canonical(content)
        g = merged.get(key)
        if g is None:
            ok = oracle.fits_counts(key)
            g = merged[key] = _Group(key, 0, counts_area(key) if ok else ZERO, ok, [], [])
        g.count += 1
        g.bins.append(content)
        g.labels.append(b)
    return list(merged.values())


def _groups(state, oracle):
    if isinstance(state, Configuration):
        return _groups_from_config(state, oracle), True
    if isinstance(state, Profile):
        return _groups_from_profile(state, oracle), False
    raise TypeError(f"expected Configuration or Profile, got {type(state).__name__}")


def is_nash(state, oracle: FeasibilityOracle = NFDH) -> tuple[bool, Move | None]:
    """True iff no single item has an improving move; otherwise one witness move.

    For a Configuration the witness names an item id and bin indices; for a
    Profile it names a shape and class indices.
    """
    groups, explicit = _groups(state, oracle)
    for gi, g in enumerate(groups):
        for shape, _ in g.contents:
            for tj, t in enumerate(groups):
                if tj == gi and g.count < 2:
                    continue
                if not t.feasible:
                    continue
                new_area = t.area + shape.area
                if new_area <= g.area or new_area > 1:
                    continue
                if oracle.fits_counts(_merge(t.contents, ((shape, 1),))):
                    return False, _witness_move(g, t, gi, tj, shape, new_area, explicit)
            if not g.feasible:
                return False, _witness_move(g, None, gi, NEW_BIN, shape, shape.area, explicit)
    return True, None


def _witness_move(g, t, gi, tj, shape, new_area, explicit) -> Move:
    if not explicit:
        return Move(shape, gi, tj, shape.area / new_area)
    src_bin = g.labels[0]
    item = next(it for it in g.bins[0] if it.shape == shape)
    if t is None:
        target = NEW_BIN
    else:
        target = next(lbl for lbl in t.labels if lbl != src_bin)
    return Move(item.id, src_bin, target, shape.area / new_area)


@dataclass(frozen=True)
class Coalition:
    """Items jointly moving to one common bin (or a new one).

    For explicit configurations ``members`` are item ids and ``sources`` their
    bins; for profiles ``members`` are shapes and ``sources`` class indices.
    """

    members: tuple
    sources: tuple[int, ...]
    target: int
    new_area: Fraction

    @property
    def size(self) -> int:
        return len(self.members)


DEFAULT_SEARCH_BUDGET = 2_000_000


def _multisets(shapes: Sequence[Rect], caps: Sequence[int], size: int, budget_left: int) -> Iterator[tuple[int, ...]]:
    for combo in combinations_with_replacement(range(len(shapes)), size):
        cnt = Counter(combo)
        if all(cnt[j] <= caps[j] for j in cnt):
            yield combo


def find_coalition(
    state,
    oracle: FeasibilityOracle = NFDH,
    max_size: int = 2,
    budget: int = DEFAULT_SEARCH_BUDGET,
) -> Coalition | None:
    """First improving coalition of at most ``max_size`` items, or None.

    All members move to one common bin, an existing one or a new empty one,
    and each must strictly lower its cost. Since every member's new cost is
    ``a_i / a(target + S)``, the move improves iff that area exceeds every
    member's current bin area; members of a given shape are therefore drawn
    from the least-filled bins holding that shape. Candidates are visited by
    size, then lexicographically by shape, then by target.
    """
    if max_size < 1:
        raise ValueError("max_size must be at least 1")
    groups, explicit = _groups(state, oracle)
    shapes = sorted({r for g in groups for r, _ in g.contents})
    # sources per shape: (area, group index, copies per bin)
    sources: dict[Rect, list[tuple[Fraction, int, int]]] = {r: [] for r in shapes}
    for gi, g in enumerate(groups):
        for r, n in g.contents:
            sources[r].append((g.area, gi, n))
    for r in shapes:
        sources[r].sort(key=lambda s: (s[0], s[1]))

    targets = [(tj, t) for tj, t in enumerate(groups) if t.feasible] + [(NEW_BIN, None)]
    evaluated = 0
    for size in range(1, max_size + 1):
        for tj, t in targets:
            caps = []
            for r in shapes:
                avail = 0
                for _, gi, n in sources[r]:
                    copies = groups[gi].count - (1 if gi == tj else 0)
                    avail += copies * n
                caps.append(min(avail, size))
            t_area = t.area if t is not None else ZERO
            t_contents = t.contents if t is not None else ()
            for combo in _multisets(shapes, caps, size, budget - evaluated):
                evaluated += 1
                if evaluated > budget:
                    raise SearchSpaceTooLarge(f"coalition search exceeded {budget} candidates")
                need = Counter(combo)
                s_area = sum((shapes[j].area * k for j, k in need.items()), ZERO)
                new_area = t_area + s_area
                if new_area > 1:
                    continue
                picks = _pick_sources(need, shapes, sources, groups, tj)
                worst = max(area for _, area, _ in picks)
                if new_area <= worst:
                    continue
                merged = _merge(t_contents, tuple((shapes[j], k) for j, k in need.items()))
                if not oracle.fits_counts(merged):
                    continue
                return _coalition_witness(picks, groups, t, tj, new_area, explicit)
    return None


def _pick_sources(need, shapes, sources, groups, tj):
    """Greedy least-area sources: list of (shape, area, group index) per member."""
    picks = []
    for j in sorted(need):
        k = need[j]
        for area, gi, n in sources[shapes[j]]:
            copies = groups[gi].count - (1 if gi == tj else 0)
            take = min(k, copies * n)
            picks.extend([(shapes[j], area, gi)] * take)
            k -= take
            if not k:
                break
    return picks


def _coalition_witness(picks, groups, t, tj, new_area, explicit) -> Coalition:
    if not explicit:
        return Coalition(
            tuple(shape for shape, _, _ in picks),
            tuple(gi for _, _, gi in picks),
            tj,
            new_area,
        )
    target_bin = None
    if t is not None:
        target_bin = t.labels[0]
    used: set[int] = set()
    members, srcs = [], []
    for shape, _, gi in picks:
        g = groups[gi]
        found = False
        for lbl, content in zip(g.labels, g.bins):
            if lbl == target_bin:
                continue
            for it in content:
                if it.shape == shape and it.id not in used:
                    used.add(it.id)
                    members.append(it.id)
                    srcs.append(lbl)
                    found = True
                    break
            if found:
                break
    return Coalition(tuple(members), tuple(srcs), target_bin if target_bin is not None else NEW_BIN, new_area)


def is_improving_coalition(c: Configuration, members: Sequence[int], target: int, oracle: FeasibilityOracle) -> bool:
    """Check one explicit joint move of ``members`` into ``target`` (or NEW_BIN)."""
    bins = c.bins()
    if not members:
        return False
    if target != NEW_BIN:
        if target not in bins or any(c.bin_of(i) == target for i in members):
            return False
        base = bins[target]
        if not oracle.fits(base):
            return False
    else:
        base = []
    moving = [c.items[i] for i in members]
    new_content = [*base, *moving]
    if not oracle.fits(new_content):
        return False
    new_area = sum((it.area for it in new_content), ZERO)
    return all(new_area > bin_area(bins[c.bin_of(i)], oracle) for i in members)


def is_strong_nash_bounded(state, oracle: FeasibilityOracle = NFDH, max_size: int = 2, budget: int = DEFAULT_SEARCH_BUDGET) -> bool:
    """No improving coalition of at most ``max_size`` items. A bounded certificate only."""
    return find_coalition(state, oracle, max_size, budget) is None


def apply_coalition(c: Configuration, coalition: Coalition) -> Configuration:
    return c.moved(coalition.members, coalition.target)


def run_strong_dynamics(
    c0: Configuration,
    oracle: FeasibilityOracle = NFDH,
    max_size: int = 2,
    policy: MovePolicy = MovePolicy(),
    max_rounds: int | None = None,
    budget: int = DEFAULT_SEARCH_BUDGET,
) -> tuple[Configuration, GameTrace]:
    """Alternate single-move dynamics with coalition moves until neither applies.

    A coalition move also raises the sorted area vector: the target's new area
    exceeds the old area of every bin the move touches.
    """
    c, trace = run_dynamics(c0, oracle, policy)
    rounds = 0
    while True:
        coal = find_coalition(c, oracle, max_size, budget)
        if coal is None:
            return c, trace
        if max_rounds is not None and rounds >= max_rounds:
            raise StepLimitReached(f"stopped after {rounds} coalition rounds", c, trace)
        before = potential(c, oracle)
        c = apply_coalition(c, coal)
        after = potential(c, oracle)
        if not after > before:
            raise PotentialViolation(f"coalition move did not raise the potential: {before} -> {after}")
        target = c.assignment[coal.members[0]]
        trace.steps.append(TraceStep(tuple(coal.members), tuple(coal.sources), target, after))
        c, trace = run_dynamics(c, oracle, policy, trace=trace)
        rounds += 1
