"""Exact rational geometry for packing rectangles into the unit bin.

Every length, area and coordinate is a :class:`fractions.Fraction`; nothing in
this module touches floating point. Rectangles are closed and may share
boundary segments, so two placements conflict only when their interiors meet.
"""

from __future__ import annotations

import math
import sys
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import InstanceTooLarge

Rational = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)

DEFAULT_EXACT_LIMIT = 10


def as_rational(value) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings. Floats are rejected."""
    if isinstance(value, float):
        raise TypeError("floating point values are not accepted; use Fraction or 'p/q'")
    return Fraction(value)


@dataclass(frozen=True, order=True)
class Rect:
    width: Fraction
    height: Fraction

    def __post_init__(self):
        w = as_rational(self.width)
        h = as_rational(self.height)
        if not (0 < w <= 1 and 0 < h <= 1):
            raise ValueError(f"rectangle {w} x {h} does not fit in the unit bin")
        object.__setattr__(self, "width", w)
        object.__setattr__(self, "height", h)

    @classmethod
    def square(cls, side) -> "Rect":
        return cls(side, side)

    @property
    def area(self) -> Fraction:
        return self.width * self.height

    def is_square(self) -> bool:
        return self.width == self.height

    def __repr__(self):
        return f"Rect({self.width}, {self.height})"


def size_class(side: Fraction) -> str:
    """Classify a square side as ``big`` (> 1/2), ``medium`` (> 1/3) or ``small``."""
    if side > Fraction(1, 2):
        return "big"
    if side > Fraction(1, 3):
        return "medium"
    return "small"


@dataclass(frozen=True, order=True)
class Item:
    id: int
    shape: Rect

    @property
    def width(self) -> Fraction:
        return self.shape.width

    @property
    def height(self) -> Fraction:
        return self.shape.height

    @property
    def area(self) -> Fraction:
        return self.shape.area

    def is_square(self) -> bool:
        return self.shape.is_square()

    @property
    def size_class(self) -> str:
        if not self.is_square():
            raise ValueError(f"item {self.id} is not a square")
        return size_class(self.width)


@dataclass(frozen=True)
class Placement:
    """Lower-left corner of ``item`` inside the bin ``[0, 1]^2``."""

    item: Item
    x: Fraction
    y: Fraction

    def __post_init__(self):
        object.__setattr__(self, "x", as_rational(self.x))
        object.__setattr__(self, "y", as_rational(self.y))

    @property
    def box(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.x, self.y, self.x + self.item.width, self.y + self.item.height)


@dataclass(frozen=True)
class GridBlock:
    """``cols * rows`` copies of ``shape`` tiled edge to edge from ``(x, y)``.

    Homogeneous bins in the large constructions hold up to ``(2^19 - 1)^2``
    squares, so they are stored as one block rather than one placement each.
    """

    shape: Rect
    x: Fraction
    y: Fraction
    cols: int
    rows: int

    def __post_init__(self):
        object.__setattr__(self, "x", as_rational(self.x))
        object.__setattr__(self, "y", as_rational(self.y))
        if self.cols < 1 or self.rows < 1:
            raise ValueError("grid blocks need at least one row and one column")

    @property
    def count(self) -> int:
        return self.cols * self.rows

    @property
    def box(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return (
            self.x,
            self.y,
            self.x + self.cols * self.shape.width,
            self.y + self.rows * self.shape.height,
        )


@dataclass(frozen=True)
class SandFill:
    """``count`` squares of side ``side`` filling every free cell of the side-grid."""

    side: Fraction
    count: int

    def __post_init__(self):
        object.__setattr__(self, "side", as_rational(self.side))


@dataclass(frozen=True)
class Packing:
    placements: tuple[Placement, ...] = ()
    blocks: tuple[GridBlock, ...] = ()
    sand: SandFill | None = None

    def __post_init__(self):
        object.__setattr__(self, "placements", tuple(self.placements))
        object.__setattr__(self, "blocks", tuple(self.blocks))

    def contents(self) -> Counter:
        """Multiset of shapes held by this packing, sand included."""
        counts: Counter = Counter(p.item.shape for p in self.placements)
        for b in self.blocks:
            counts[b.shape] += b.count
        if self.sand is not None and self.sand.count:
            counts[Rect.square(self.sand.side)] += self.sand.count
        return counts

    @property
    def area(self) -> Fraction:
        return sum((shape.area * n for shape, n in self.contents().items()), ZERO)

    def item_ids(self) -> list[int]:
        return [p.item.id for p in self.placements]


def total_area(items: Iterable) -> Fraction:
    """Sum of areas of items (anything with an ``area`` attribute)."""
    return sum((it.area for it in items), ZERO)


def _interiors_meet(a, b) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def packing_is_valid(p: Packing) -> bool:
    """In-bounds and pairwise interior-disjoint; sand must tile the free grid cells."""
    boxes = [pl.box for pl in p.placements] + [b.box for b in p.blocks]
    for x0, y0, x1, y1 in boxes:
        if x0 < 0 or y0 < 0 or x1 > 1 or y1 > 1:
            return False
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if _interiors_meet(boxes[i], boxes[j]):
                return False
    if p.sand is not None:
        s = p.sand.side
        if s <= 0 or (1 / s).denominator != 1:
            return False
        cells_per_side = int(1 / s)
        covered = 0
        for x0, y0, x1, y1 in boxes:
            for v in (x0, y0, x1, y1):
                if (v / s).denominator != 1:
                    return False
            covered += int((x1 - x0) / s) * int((y1 - y0) / s)
        if p.sand.count != cells_per_side * cells_per_side - covered:
            return False
    return True


# ---------------------------------------------------------------------------
# Fast necessary conditions


def lattice_excludes(counts: Iterable[tuple[Rect, int]]) -> bool:
    """True if a lattice-point count proves the multiset cannot be packed.

    An open interval of length ``w`` holds at least ``ceil(w*p) - 1`` points of
    ``(1/p)Z``, all strictly inside ``(0, 1)``. Interiors of packed rectangles
    are disjoint, so the points of the ``(p-1) x (r-1)`` interior grid they
    contain are distinct.
    """
    counts = [(r, n) for r, n in counts if n]
    ps = sorted({math.floor(1 / r.width) + 1 for r, _ in counts})
    rs = sorted({math.floor(1 / r.height) + 1 for r, _ in counts})
    for p in ps:
        cover_x = [(math.ceil(r.width * p) - 1, r, n) for r, n in counts]
        for q in rs:
            need = 0
            for cx, r, n in cover_x:
                if cx:
                    need += n * cx * (math.ceil(r.height * q) - 1)
            if need > (p - 1) * (q - 1):
                return True
    return False


def full_span_excludes(counts: Iterable[tuple[Rect, int]]) -> bool:
    """True if full-width (or full-height) items leave too little room for the rest.

    A width-1 item meets every other item's x-range, so the others avoid its
    y-range entirely; each must fit in one of the gaps, of total length
    ``1 - H``. The same holds with the axes swapped.
    """
    counts = [(r, n) for r, n in counts if n]
    for along, across in ((lambda r: r.width, lambda r: r.height), (lambda r: r.height, lambda r: r.width)):
        used = sum((across(r) * n for r, n in counts if along(r) == 1), ZERO)
        if used > 1 or any(across(r) > 1 - used for r, _ in counts if along(r) < 1):
            return True
    return False


def bottom_left_pack(items: Sequence[Item]) -> Packing | None:
    """Greedy bottom-left placement, tallest first. A sufficient test only."""
    order = sorted(items, key=lambda it: (-it.height, -it.width, it.id))
    placed: list[Placement] = []
    boxes: list[tuple] = []
    for it in order:
        xs = sorted({ZERO} | {b[2] for b in boxes})
        ys = sorted({ZERO} | {b[3] for b in boxes})
        spot = None
        for y in ys:
            if y + it.height > 1:
                break
            for x in xs:
                if x + it.width > 1:
                    break
                box = (x, y, x + it.width, y + it.height)
                if not any(_interiors_meet(box, b) for b in boxes):
                    spot = (x, y, box)
                    break
            if spot:
                break
        if spot is None:
            return None
        placed.append(Placement(it, spot[0], spot[1]))
        boxes.append(spot[2])
    return Packing(tuple(placed))


# ---------------------------------------------------------------------------
# Exact feasibility oracle


def _normal_patterns(lengths: Iterable[Fraction]) -> list[Fraction]:
    sums = {ZERO}
    for length in lengths:
        sums |= {s + length for s in sums if s + length <= 1}
    sums.add(ONE)
    return sorted(sums)


def exact_fits(items: Sequence[Item], limit: int = DEFAULT_EXACT_LIMIT) -> Packing | None:
    """Decide exactly whether the oriented ``items`` fit together in one bin.

    Any packing can be pushed left and down until every coordinate is a sum of
    widths (heights) of other items, so the search runs on the grid spanned by
    those subset sums. Cells are decided in row-major order from the bottom
    left: the first undecided cell is either the lower-left corner of some
    unplaced item or wasted. Failed states are memoised and branches are cut
    once wasted area exceeds ``1 - area(items)``.

    Infeasibility is inherited by supersets, so the largest items are tried on
    their own first; tiny items blow up the grid and are only added once the
    big ones are known to fit.
    """
    items = list(items)
    if len(items) > limit:
        raise InstanceTooLarge(f"{len(items)} items exceed the exact-oracle limit of {limit}")
    if not items:
        return Packing()
    if total_area(items) > 1:
        return None
    counts = Counter(it.shape for it in items).items()
    if lattice_excludes(counts) or full_span_excludes(counts):
        return None
    order = sorted(items, key=lambda it: (-it.area, -it.height, it.id))
    for m in range(2, len(order)):
        if order[m].shape != order[m - 1].shape and _cell_search(order[:m]) is None:
            return None
    return _cell_search(items)


def _cell_search(items: list[Item]) -> Packing | None:
    slack = 1 - total_area(items)
    shapes = sorted({it.shape for it in items})
    xs = _normal_patterns(it.width for it in items)
    ys = _normal_patterns(it.height for it in items)
    xi = {v: k for k, v in enumerate(xs)}
    yi = {v: k for k, v in enumerate(ys)}
    ncols, nrows = len(xs) - 1, len(ys) - 1
    ncells = ncols * nrows
    full = (1 << ncells) - 1
    # integer cell areas on the common denominator keep the inner loop fast
    scale = math.lcm(*(v.denominator for v in xs), *(v.denominator for v in ys))
    cell_area = [
        int((xs[c + 1] - xs[c]) * scale) * int((ys[r + 1] - ys[r]) * scale)
        for r in range(nrows)
        for c in range(ncols)
    ]
    slack_units = int(slack * scale * scale)

    # place_mask[j][cell] -> bitmask of the cells shape j covers with its corner there
    place_mask: list[dict[int, int]] = []
    for shape in shapes:
        masks = {}
        for r in range(nrows):
            r2 = yi.get(ys[r] + shape.height)
            if r2 is None:
                continue
            for c in range(ncols):
                c2 = xi.get(xs[c] + shape.width)
                if c2 is None:
                    continue
                m = 0
                for rr in range(r, r2):
                    m |= ((1 << (c2 - c)) - 1) << (rr * ncols + c)
                masks[r * ncols + c] = m
        place_mask.append(masks)
    widths = [s.width for s in shapes]

    counts = Counter(it.shape for it in items)
    remaining = [counts[s] for s in shapes]
    chosen: list[tuple[int, int]] = []
    failed: set = set()

    def free_run(mask: int, cell: int) -> tuple[int, int, Fraction]:
        # free cells to the right of ``cell`` in its row: (bits, area, width)
        r, c = divmod(cell, ncols)
        bits, area = 0, 0
        end = c
        while end < ncols and not mask >> (r * ncols + end) & 1:
            bits |= 1 << (r * ncols + end)
            area += cell_area[r * ncols + end]
            end += 1
        return bits, area, xs[end] - xs[c]

    def search(mask: int, waste: int) -> bool:
        if not any(remaining):
            return True
        key = (mask, tuple(remaining))
        if key in failed:
            return False
        free = ~mask & full
        if not free:
            failed.add(key)
            return False
        cell = (free & -free).bit_length() - 1
        narrowest = min(widths[j] for j in range(len(shapes)) if remaining[j])
        c = cell % ncols
        if narrowest > xs[c + 1] - xs[c]:
            run_bits, run_area, run_width = free_run(mask, cell)
        else:
            run_width = narrowest
        if narrowest > run_width:
            # nothing can cover any cell of this run: every item touching it would
            # have to start on this row inside the run
            w = waste + run_area
            ok = w <= slack_units and search(mask | run_bits, w)
            if not ok:
                failed.add(key)
            return ok
        for j, masks in enumerate(place_mask):
            if not remaining[j]:
                continue
            m = masks.get(cell)
            if m is None or m & mask:
                continue
            remaining[j] -= 1
            chosen.append((j, cell))
            if search(mask | m, waste):
                return True
            chosen.pop()
            remaining[j] += 1
        w = waste + cell_area[cell]
        if w <= slack_units and search(mask | (1 << cell), w):
            return True
        failed.add(key)
        return False

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 4 * ncells + 200))
    try:
        found = search(0, 0)
    finally:
        sys.setrecursionlimit(old_limit)
    if not found:
        return None

    by_shape: dict[Rect, list[Item]] = {}
    for it in sorted(items, key=lambda it: it.id):
        by_shape.setdefault(it.shape, []).append(it)
    placements = []
    for j, cell in chosen:
        it = by_shape[shapes[j]].pop(0)
        r, c = divmod(cell, ncols)
        placements.append(Placement(it, xs[c], ys[r]))
    return Packing(tuple(placements))
