"""Next Fit Decreasing Height level packing and checkers for its area guarantees."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import PreconditionViolated
from .geometry import ONE, ZERO, Item, Packing, Placement, Rect, total_area


@dataclass
class Level:
    y: Fraction
    height: Fraction
    used_width: Fraction = ZERO
    placements: list[Placement] = field(default_factory=list)


@dataclass
class NfdhRun:
    """Full record of one NFDH run, including the prefix packed before a failure."""

    levels: list[Level]
    placements: list[Placement]
    rejected: Item | None
    unpacked: list[Item]

    @property
    def packed_all(self) -> bool:
        return self.rejected is None

    @property
    def packed_area(self) -> Fraction:
        return total_area(p.item for p in self.placements)

    def packing(self) -> Packing | None:
        return Packing(tuple(self.placements)) if self.packed_all else None


def nfdh_order(items: Iterable[Item]) -> list[Item]:
    # non-increasing height, then non-increasing width, then ascending id
    return sorted(items, key=lambda it: (-it.height, -it.width, it.id))


def run_nfdh(items: Sequence[Item], region_width=ONE, region_height=ONE) -> NfdhRun:
    region_width = Fraction(region_width)
    region_height = Fraction(region_height)
    levels: list[Level] = []
    placements: list[Placement] = []
    order = nfdh_order(items)
    for k, it in enumerate(order):
        level = levels[-1] if levels else None
        if level is not None and level.used_width + it.width <= region_width:
            pl = Placement(it, level.used_width, level.y)
        else:
            y = level.y + level.height if level is not None else ZERO
            if y + it.height > region_height or it.width > region_width:
                return NfdhRun(levels, placements, it, order[k:])
            level = Level(y, it.height)
            levels.append(level)
            pl = Placement(it, ZERO, y)
        level.used_width += it.width
        level.placements.append(pl)
        placements.append(pl)
    return NfdhRun(levels, placements, None, [])


def nfdh_pack_region(items: Sequence[Item], region_width=ONE, region_height=ONE) -> Packing | None:
    return run_nfdh(items, region_width, region_height).packing()


def nfdh_fits_counts(counts: Iterable[tuple[Rect, int]], region_width=ONE, region_height=ONE) -> bool:
    """NFDH success test on a multiset of shapes, in O(number of distinct shapes).

    A run of identical shapes fills the current level, then whole levels of
    ``floor(W / w)`` copies, then a partial level; only the arithmetic is done.
    """
    W = Fraction(region_width)
    H = Fraction(region_height)
    runs = sorted(((r, n) for r, n in counts if n), key=lambda rn: (-rn[0].height, -rn[0].width))
    top = None  # top edge of the current level; None before the first level
    used = ZERO
    for shape, n in runs:
        w, h = shape.width, shape.height
        if w > W:
            return False
        if top is not None:
            k = min(n, math.floor((W - used) / w))
            used += k * w
            n -= k
            if not n:
                continue
        per_level = math.floor(W / w)
        full, rest = divmod(n, per_level)
        new_levels = full + (1 if rest else 0)
        base = top if top is not None else ZERO
        top = base + new_levels * h
        if top > H:
            return False
        used = (rest if rest else per_level) * w
    return True


def nfdh_fits(items: Iterable[Item]) -> bool:
    return nfdh_fits_counts(Counter(it.shape for it in items).items())


# ---------------------------------------------------------------------------
# Published guarantees, phrased as checks that must always return True


def check_epstein_levy(items_packed: Sequence[Item], rejected: Item, m: int) -> bool:
    """If NFDH packs ``L`` but not ``L + {r}`` (all sides <= 1/m), then a(L) >= ((m-1)/m)^2."""
    if m < 2:
        raise PreconditionViolated("m must be at least 2")
    cap = Fraction(1, m)
    if any(it.width > cap or it.height > cap for it in [*items_packed, rejected]):
        raise PreconditionViolated(f"some dimension exceeds 1/{m}")
    if not nfdh_fits(items_packed):
        raise PreconditionViolated("NFDH does not pack the base set")
    if nfdh_fits([*items_packed, rejected]):
        raise PreconditionViolated("NFDH packs the extended set")
    return total_area(items_packed) >= Fraction(m - 1, m) ** 2


def check_meir_moser(squares: Sequence[Item], b, h) -> bool:
    """Squares with largest side l <= min(b, h) and area <= l^2 + (b-l)(h-l) fit by NFDH in (b, h)."""
    b, h = Fraction(b), Fraction(h)
    if not squares:
        return True
    if not all(it.is_square() for it in squares):
        raise PreconditionViolated("all items must be squares")
    ell = max(it.width for it in squares)
    if ell > min(b, h):
        raise PreconditionViolated("largest side exceeds the region")
    if total_area(squares) > ell * ell + (b - ell) * (h - ell):
        return True
    return nfdh_pack_region(squares, b, h) is not None


def check_harren_vanstee(items: Sequence[Item], a, b) -> bool:
    """NFDH into (a, b) packs everything or at least (a - w_max)(b - h_max) area."""
    a, b = Fraction(a), Fraction(b)
    if not items:
        return True
    if any(it.width > a or it.height > b for it in items):
        raise PreconditionViolated("an item does not fit the region on its own")
    run = run_nfdh(items, a, b)
    if run.packed_all:
        return True
    w_max = max(it.width for it in items)
    h_max = max(it.height for it in items)
    return run.packed_area >= (a - w_max) * (b - h_max)
