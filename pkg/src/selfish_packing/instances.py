"""Lower-bound constructions and random instance generators.

Each construction returns the instance together with an optimal profile whose
bins carry packing witnesses and an equilibrium profile. Profiles are kept in
the compact per-class form because the square constructions need astronomically
many bins before every class count is an integer.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import BadEpsilon, BadN, BadSigmaK
from .game import NFDH, BinClass, Configuration, Profile, canonical, is_nash
from .geometry import (
    ZERO,
    GridBlock,
    Item,
    Packing,
    Placement,
    Rect,
    SandFill,
    as_rational,
    packing_is_valid,
)
from .nfdh import nfdh_pack_region

EXPAND_LIMIT = 200_000


@dataclass
class ConstructionOutput:
    name: str
    opt: Profile
    eq: Profile
    params: dict = field(default_factory=dict)

    @property
    def declared_opt(self) -> int:
        return self.opt.num_bins

    @property
    def declared_eq_bins(self) -> int:
        return self.eq.num_bins

    @property
    def num_items(self) -> int:
        return self.opt.num_items

    @property
    def declared_ratio(self) -> Fraction:
        return Fraction(self.declared_eq_bins, self.declared_opt)

    @property
    def expandable(self) -> bool:
        return self.num_items <= EXPAND_LIMIT

    @property
    def opt_config(self) -> Configuration:
        return self.opt.expand(EXPAND_LIMIT)

    @property
    def eq_config(self) -> Configuration:
        """Equilibrium with item ids matched to those of :attr:`opt_config`."""
        return _matched(self.opt.expand(EXPAND_LIMIT), self.eq)

    @property
    def items(self) -> list[Item]:
        c = self.opt_config
        return [c.items[k] for k in sorted(c.items)]

    def witnesses_valid(self) -> bool:
        for profile in (self.opt, self.eq):
            for cls in profile.classes:
                if cls.witness is None:
                    continue
                if not packing_is_valid(cls.witness):
                    return False
                if canonical(cls.witness.contents().items()) != cls.contents:
                    return False
        return True


def _matched(opt: Configuration, eq: Profile) -> Configuration:
    pools: dict[Rect, list[int]] = {}
    for iid in sorted(opt.items):
        pools.setdefault(opt.items[iid].shape, []).append(iid)
    bins = []
    for cls in eq.classes:
        for _ in range(cls.count):
            content = []
            for r, n in cls.contents:
                for _ in range(n):
                    content.append(opt.items[pools[r].pop(0)])
            bins.append(content)
    return Configuration.from_bins(bins)


def _local_items(shapes: Sequence[Rect]) -> list[Item]:
    return [Item(k, s) for k, s in enumerate(shapes)]


def _homogeneous(side: Fraction, per_axis: int, count: int) -> BinClass:
    shape = Rect.square(side)
    witness = Packing(blocks=(GridBlock(shape, ZERO, ZERO, per_axis, per_axis),))
    return BinClass(((shape, per_axis * per_axis),), count, witness)


def _sand_class(side: Fraction, count: int) -> BinClass:
    per_axis = int(1 / side)
    return BinClass(((Rect.square(side), per_axis * per_axis),), count, Packing(sand=SandFill(side, per_axis * per_axis)))


# ---------------------------------------------------------------------------
# Rectangles: unbounded price of anarchy


def gen_unbounded_poa(k: int) -> ConstructionOutput:
    """Bins holding a ``(1, 1/2^i)`` strip and a ``(1/2^i, 1 - 1/2^i)`` bar, i = 1..k."""
    if k < 1:
        raise ValueError("k must be at least 1")
    strips = [Rect(1, Fraction(1, 2**i)) for i in range(1, k + 1)]
    bars = [Rect(Fraction(1, 2**i), 1 - Fraction(1, 2**i)) for i in range(1, k + 1)]
    eq_classes = []
    for i in range(k):
        s, b = _local_items([strips[i], bars[i]])
        witness = Packing((Placement(s, 0, 0), Placement(b, 0, strips[i].height)))
        eq_classes.append(BinClass(canonical([strips[i], bars[i]]), 1, witness))
    if k == 1:
        opt_classes = list(eq_classes)
    else:
        y = ZERO
        placed = []
        for it in _local_items(strips):
            placed.append(Placement(it, 0, y))
            y += it.height
        x = ZERO
        side_by_side = []
        for it in _local_items(bars):
            side_by_side.append(Placement(it, x, 0))
            x += it.width
        opt_classes = [
            BinClass(canonical(strips), 1, Packing(tuple(placed))),
            BinClass(canonical(bars), 1, Packing(tuple(side_by_side))),
        ]
    return ConstructionOutput("unbounded-poa", Profile(tuple(opt_classes)), Profile(tuple(eq_classes)), {"k": k})


# ---------------------------------------------------------------------------
# Squares: the full-bin layout and its homogeneous equilibrium

# (i, x constant, x multiple of eps, y constant, y multiple of eps); side 1/i + eps
_LAYOUT = (
    (2, "0", 0, "0", 0), (3, "9/14", 2, "0", 0), (3, "23/56", 3, "37/56", 4),
    (3, "0", 0, "1/2", 1), (4, "1/2", 1, "23/56", 3), (4, "125/168", 4, "11/15", 3),
    (5, "3/4", 2, "8/15", 2), (5, "81/104", 4, "1/3", 1), (7, "1/2", 1, "1/7", 1),
    (7, "0", 0, "5/6", 2), (7, "1/2", 1, "0", 0), (7, "1/3", 1, "1/2", 1),
    (7, "1/7", 1, "5/6", 2), (8, "1/2", 1, "2/7", 2), (8, "2/7", 2, "159/182", 5),
    (13, "1/3", 1, "9/14", 2), (13, "1/3", 1, "131/182", 3), (13, "1/3", 1, "145/182", 4),
    (13, "73/104", 3, "1/3", 1), (13, "5/8", 2, "1/3", 1),
)

# same bin with two squares of side 1/14, one of 1/18, two of 1/21, two of 1/25
# and 24 of 1/43 (all plus eps) added
_LAYOUT_EXT = (
    (2, "0", 0, "0", 0), (3, "401/602", 4, "23/56", 3), (3, "0", 0, "401/602", 3),
    (3, "1/2", 1, "0", 0), (4, "16027/21672", 6, "125/168", 4), (4, "23/56", 3, "23/42", 3),
    (5, "8/15", 2, "403/504", 5), (5, "1/3", 1, "67/84", 4), (7, "221/258", 3, "0", 0),
    (7, "1/7", 1, "1/2", 1), (7, "221/258", 3, "1/7", 1), (7, "1/2", 1, "1/3", 1),
    (7, "0", 0, "45/86", 2), (8, "2/7", 2, "1/2", 1), (8, "159/182", 5, "2/7", 2),
    (13, "131/182", 3, "1/3", 1), (13, "1/3", 1, "5/8", 2), (13, "9/14", 2, "1/3", 1),
    (13, "145/182", 4, "1/3", 1), (13, "1/3", 1, "73/104", 3), (14, "179/301", 3, "10/21", 2),
    (14, "45/86", 2, "10/21", 2), (18, "1647/2408", 5, "125/168", 4), (21, "11/24", 4, "1/2", 1),
    (21, "23/56", 3, "1/2", 1), (25, "2/7", 2, "5/8", 2), (25, "5/6", 2, "2/7", 2),
    (43, "5/6", 2, "1/43", 1), (43, "71/301", 5, "9/14", 2), (43, "4/43", 4, "1/2", 1),
    (43, "57/301", 3, "9/14", 2), (43, "5/43", 5, "1/2", 1), (43, "50/301", 2, "9/14", 2),
    (43, "64/301", 4, "9/14", 2), (43, "1/7", 1, "9/14", 2), (43, "5/6", 2, "3/43", 3),
    (43, "5/6", 2, "6/43", 6), (43, "37/56", 4, "5543/7224", 5), (43, "5/6", 2, "7/43", 7),
    (43, "5/6", 2, "5/43", 5), (43, "37/56", 4, "125/168", 4), (43, "5/6", 2, "0", 0),
    (43, "1/43", 1, "1/2", 1), (43, "3/43", 3, "1/2", 1), (43, "1/2", 1, "10/21", 2),
    (43, "2/43", 2, "1/2", 1), (43, "78/301", 6, "9/14", 2), (43, "5/6", 2, "4/43", 4),
    (43, "0", 0, "1/2", 1), (43, "9/14", 2, "16/39", 2), (43, "5/6", 2, "2/43", 2),
)

SQUARE_RATIO_TARGET = Fraction(23604, 10000)
SQUARE_RATIO_TARGET_EXT = Fraction(23634, 10000)


def _layout(extended: bool):
    return _LAYOUT_EXT if extended else _LAYOUT


def square_classes(extended: bool = False) -> list[tuple[int, int]]:
    """``(i, n_i)``: the full bin holds ``n_i`` squares of side ``1/i + eps``."""
    counts: dict[int, int] = {}
    for i, *_ in _layout(extended):
        counts[i] = counts.get(i, 0) + 1
    return sorted(counts.items())


def _layout_denominator(extended: bool) -> int:
    d = 1
    for i, xc, _, yc, _ in _layout(extended):
        d = math.lcm(d, i, Fraction(xc).denominator, Fraction(yc).denominator)
    return d


@dataclass(frozen=True)
class SquareLayout:
    eps: Fraction
    boxes: tuple[tuple[int, Fraction, Fraction], ...]  # (i, x, y)
    sand_side: Fraction
    sand_count: int

    def side(self, i: int) -> Fraction:
        return Fraction(1, i) + self.eps

    @property
    def sand_area(self) -> Fraction:
        return self.sand_side**2 * self.sand_count

    def packing(self) -> Packing:
        items = _local_items([Rect.square(self.side(i)) for i, _, _ in self.boxes])
        placements = tuple(Placement(it, x, y) for it, (_, x, y) in zip(items, self.boxes))
        return Packing(placements, sand=SandFill(self.sand_side, self.sand_count))


def square_layout(eps, extended: bool = False) -> SquareLayout:
    """Place the full-bin layout at ``eps``; BadEpsilon if it is not a valid packing."""
    eps = as_rational(eps)
    if eps <= 0:
        raise BadEpsilon("eps must be positive")
    boxes = tuple(
        (i, Fraction(xc) + xk * eps, Fraction(yc) + yk * eps) for i, xc, xk, yc, yk in _layout(extended)
    )
    d = 1
    for i, x, y in boxes:
        s = Fraction(1, i) + eps
        for v in (x, y, x + s, y + s):
            d = math.lcm(d, v.denominator)
    side = Fraction(1, d)
    covered = sum(((Fraction(1, i) + eps) * d) ** 2 for i, _, _ in boxes)
    if covered > d * d:
        raise BadEpsilon(f"layout at eps={eps} overflows the bin")
    lay = SquareLayout(eps, boxes, side, d * d - int(covered))
    if not packing_is_valid(lay.packing()):
        raise BadEpsilon(f"layout at eps={eps} is not a valid packing")
    return lay


def homogeneous_capacity(i: int, eps: Fraction) -> int:
    return math.floor(1 / (Fraction(1, i) + eps)) ** 2


def square_ne_inequalities(eps, extended: bool = False) -> bool:
    """Each homogeneous class holds ``(i-1)^2`` squares and repels every smaller square.

    For classes ``i < j``: ``s_j^2 + (i-1)^2 s_i^2 < (j-1)^2 s_j^2`` with
    ``s_i = 1/i + eps``, so a lone smaller square never gains by joining.
    """
    eps = as_rational(eps)
    idx = [i for i, _ in square_classes(extended)]
    for i in idx:
        if homogeneous_capacity(i, eps) != (i - 1) ** 2:
            return False
    for a, i in enumerate(idx):
        si = Fraction(1, i) + eps
        for j in idx[a + 1:]:
            sj = Fraction(1, j) + eps
            if not sj * sj + (i - 1) ** 2 * si * si < (j - 1) ** 2 * sj * sj:
                return False
    return True


def square_ratio(eps, extended: bool = False) -> Fraction:
    """Equilibrium bins per optimal bin, exact."""
    lay = square_layout(eps, extended)
    return sum((Fraction(n, (i - 1) ** 2) for i, n in square_classes(extended)), ZERO) + lay.sand_area


def default_square_eps(extended: bool = False, max_t: int = 400) -> Fraction:
    """Largest ``1/(t L)`` (L = layout denominator) meeting layout, equilibrium and ratio checks."""
    base = _layout_denominator(extended)
    target = SQUARE_RATIO_TARGET_EXT if extended else SQUARE_RATIO_TARGET
    for t in range(1, max_t + 1):
        eps = Fraction(1, t * base)
        try:
            if square_ne_inequalities(eps, extended) and square_ratio(eps, extended) > target:
                return eps
        except BadEpsilon:
            continue
    raise BadEpsilon(f"no eps of the form 1/(t*{base}) with t <= {max_t} meets the checks")


def minimal_square_n(eps, extended: bool = False) -> int:
    lay = square_layout(eps, extended)
    n = 1
    for i, ni in square_classes(extended):
        cap = (i - 1) ** 2
        n = math.lcm(n, cap // math.gcd(cap, ni))
    if lay.sand_count:
        cap = int(1 / lay.sand_side) ** 2
        n = math.lcm(n, cap // math.gcd(cap, lay.sand_count))
    return n


def gen_square_poa(N: int | None = None, eps=None, extended: bool = False) -> ConstructionOutput:
    """``N`` full bins against the all-homogeneous equilibrium."""
    eps = default_square_eps(extended) if eps is None else as_rational(eps)
    lay = square_layout(eps, extended)
    if not square_ne_inequalities(eps, extended):
        raise BadEpsilon(f"eps={eps} breaks the homogeneous equilibrium inequalities")
    n_min = minimal_square_n(eps, extended)
    if N is None:
        N = n_min
    if N < 1 or N % n_min:
        raise BadN(f"N={N} leaves a fractional bin count; use a multiple of {n_min}")

    opt_witness = lay.packing()
    opt = Profile((BinClass(canonical(opt_witness.contents().items()), N, opt_witness),))
    eq_classes = []
    for i, ni in square_classes(extended):
        cap = (i - 1) ** 2
        eq_classes.append(_homogeneous(lay.side(i), i - 1, ni * N // cap))
    if lay.sand_count:
        cap = int(1 / lay.sand_side) ** 2
        eq_classes.append(_sand_class(lay.sand_side, lay.sand_count * N // cap))
    out = ConstructionOutput(
        "square-poa-ext" if extended else "square-poa",
        opt,
        Profile(tuple(eq_classes)),
        {"N": N, "eps": eps, "extended": extended, "sand_side": lay.sand_side, "sand_count": lay.sand_count},
    )
    ok, witness = is_nash(out.eq, NFDH)
    if not ok:
        raise BadEpsilon(f"homogeneous configuration is not an equilibrium at eps={eps}: {witness}")
    return out


# ---------------------------------------------------------------------------
# Squares: strong equilibrium lower bound


def strong_counts(k: int) -> list[tuple[int, int]]:
    """``(i, n_i)`` with ``n_i = 2^(i+1) - 3`` for i = 1..k-1."""
    return [(i, 2 ** (i + 1) - 3) for i in range(1, k)]


def gen_strong_poa(k: int, eps=None, sigma_k=None, N: int | None = None) -> ConstructionOutput:
    """Full bins of squares ``sigma_i = (1+eps)/2^i`` nested in L-shaped layers.

    The square ``sigma_1`` sits at the origin; layer ``i`` adds a column of
    ``2^i - 1`` and a row of ``2^i - 2`` squares of side ``sigma_i`` around the
    square already covered, and squares of side ``sigma_k`` fill the rest.
    """
    if k < 3:
        raise ValueError("k must be at least 3")
    eps_max = Fraction(1, 2 ** (k - 1) - 1)
    eps = eps_max if eps is None else as_rational(eps)
    if not 0 < eps <= eps_max:
        raise BadEpsilon(f"eps must lie in (0, {eps_max}]")
    sigma = {i: (1 + eps) / 2**i for i in range(1, k)}
    if sigma_k is None:
        sigma_k = Fraction(1, eps.denominator * 2 ** (k - 1))
    sigma_k = as_rational(sigma_k)
    if sigma_k <= 0 or (1 / sigma_k).denominator != 1 or (sigma[k - 1] / sigma_k).denominator != 1:
        raise BadSigmaK(f"sigma_k={sigma_k} must divide both 1 and sigma_(k-1)={sigma[k - 1]}")

    placements = [Placement(Item(0, Rect.square(sigma[1])), 0, 0)]
    blocks = []
    for i in range(2, k):
        shape = Rect.square(sigma[i])
        edge = (2 ** (i - 1) - 1) * sigma[i - 1]
        blocks.append(GridBlock(shape, edge, ZERO, 1, 2**i - 1))
        blocks.append(GridBlock(shape, ZERO, edge, 2**i - 2, 1))
    covered = (2 ** (k - 1) - 1) * sigma[k - 1]
    per_axis = int(1 / sigma_k)
    sand_count = per_axis * per_axis - int((covered / sigma_k) ** 2)
    opt_witness = Packing(tuple(placements), tuple(blocks), SandFill(sigma_k, sand_count))

    counts = strong_counts(k)
    if N is None:
        N = 1
        for i, ni in counts:
            cap = (2**i - 1) ** 2
            N = math.lcm(N, cap // math.gcd(cap, ni))
        if sand_count:
            cap = per_axis * per_axis
            N = math.lcm(N, cap // math.gcd(cap, sand_count))
    eq_classes = []
    for i, ni in counts:
        cap = (2**i - 1) ** 2
        if (ni * N) % cap:
            raise BadN(f"N={N} gives a fractional count of sigma_{i} bins")
        eq_classes.append(_homogeneous(sigma[i], 2**i - 1, ni * N // cap))
    if sand_count:
        cap = per_axis * per_axis
        if (sand_count * N) % cap:
            raise BadN(f"N={N} gives a fractional count of sand bins")
        eq_classes.append(_sand_class(sigma_k, sand_count * N // cap))
    opt = Profile((BinClass(canonical(opt_witness.contents().items()), N, opt_witness),))
    return ConstructionOutput(
        "strong-poa",
        opt,
        Profile(tuple(eq_classes)),
        {"k": k, "eps": eps, "sigma_k": sigma_k, "N": N, "sand_count": sand_count},
    )


# ---------------------------------------------------------------------------
# Two bins below 4/9


def gen_two_bad_bins(eps=Fraction(1, 100)) -> ConstructionOutput:
    """A lone 1/2 square, and three ``1/3 + eps`` squares with two 1/6 squares.

    Both bins are below 4/9 and NFDH cannot merge them. The single-bin
    optimum below shows the exact game does allow the half square to join.
    """
    eps = as_rational(eps)
    if not 0 < eps <= Fraction(1, 12):
        raise BadEpsilon("eps must lie in (0, 1/12]")
    half = Rect.square(Fraction(1, 2))
    mid = Rect.square(Fraction(1, 3) + eps)
    sixth = Rect.square(Fraction(1, 6))
    second = [mid, mid, mid, sixth, sixth]
    w1 = Packing((Placement(Item(0, half), 0, 0),))
    w2 = nfdh_pack_region(_local_items(second))
    eq = Profile((BinClass(canonical([half]), 1, w1), BinClass(canonical(second), 1, w2)))

    s = mid.width
    h = Fraction(1, 2)
    items = _local_items([half, mid, mid, mid, sixth, sixth])
    spots = [(0, 0), (h, 0), (h, s), (0, h), (h, 2 * s), (h + sixth.width, 2 * s)]
    w_opt = Packing(tuple(Placement(it, x, y) for it, (x, y) in zip(items, spots)))
    opt = Profile((BinClass(canonical([half, *second]), 1, w_opt),))
    return ConstructionOutput("two-bad-bins", opt, eq, {"eps": eps})


# ---------------------------------------------------------------------------
# Random instances


def gen_random(n: int, seed: int = 0, squares: bool = True, max_side=1, grid: int = 16) -> list[Item]:
    """``n`` items with sides drawn uniformly from ``{1/grid, ..., max_side}``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    max_side = as_rational(max_side)
    top = math.floor(max_side * grid)
    if top < 1:
        raise ValueError(f"no multiple of 1/{grid} is at most {max_side}")
    rng = random.Random(seed)
    items = []
    for k in range(n):
        w = Fraction(rng.randint(1, top), grid)
        h = w if squares else Fraction(rng.randint(1, top), grid)
        items.append(Item(k, Rect(w, h)))
    return items


def random_configuration(items: Sequence[Item], seed: int = 0, num_bins: int | None = None) -> Configuration:
    """Uniform random assignment; may well contain infeasible bins."""
    rng = random.Random(seed)
    if num_bins is None:
        num_bins = rng.randint(1, len(items))
    return Configuration({it.id: it for it in items}, {it.id: rng.randrange(num_bins) for it in items})
