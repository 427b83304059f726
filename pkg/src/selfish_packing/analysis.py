"""Ratios, closed-form bounds and area audits of equilibria."""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Sequence

from .errors import InstanceTooLarge, NotAnEquilibrium, PreconditionViolated
from .game import EXACT, NFDH, Configuration, FeasibilityOracle, Profile, canonical, counts_area, is_nash
from .geometry import ZERO, Item, total_area

OPT_EXACT_LIMIT = 10


def decimal(q: Fraction, digits: int = 12) -> str:
    """Decimal rendering of an exact rational, rounded to ``digits`` places."""
    with localcontext() as ctx:
        ctx.prec = digits + 40
        d = Decimal(q.numerator) / Decimal(q.denominator)
        return str(d.quantize(Decimal(1).scaleb(-digits)))


@dataclass(frozen=True)
class RatioReport:
    eq_bins: int
    opt_bins: int
    ratio: Fraction
    opt_certificate: str  # full-bins | area-lower-bound | exact-oracle


def optimal_bins(items: Sequence[Item], oracle: FeasibilityOracle = EXACT) -> tuple[int, list[list[Item]]]:
    """Minimum bin count by branch and bound over assignments, with a witness partition."""
    items = sorted(items, key=lambda it: (-it.area, it.id))
    if len(items) > OPT_EXACT_LIMIT:
        raise InstanceTooLarge(f"{len(items)} items exceed the exact optimum limit of {OPT_EXACT_LIMIT}")
    if not items:
        return 0, []
    lower = math.ceil(total_area(items))
    best: list = [len(items) + 1, None]
    bins: list[list[Item]] = []
    areas: list[Fraction] = []
    suffix = [ZERO] * (len(items) + 1)
    for k in range(len(items) - 1, -1, -1):
        suffix[k] = suffix[k + 1] + items[k].area

    def place(k: int):
        if best[0] == lower:
            return
        if k == len(items):
            if len(bins) < best[0]:
                best[0] = len(bins)
                best[1] = [list(b) for b in bins]
            return
        free = sum(1 - a for a in areas)
        extra = max(0, math.ceil(suffix[k] - free))
        if len(bins) + extra >= best[0]:
            return
        it = items[k]
        seen = set()
        for b in range(len(bins)):
            key = canonical(bins[b])
            if key in seen or areas[b] + it.area > 1:
                continue
            seen.add(key)
            if oracle.fits([*bins[b], it]):
                bins[b].append(it)
                areas[b] += it.area
                place(k + 1)
                areas[b] -= it.area
                bins[b].pop()
        if len(bins) + 1 < best[0]:
            bins.append([it])
            areas.append(it.area)
            place(k + 1)
            areas.pop()
            bins.pop()

    place(0)
    return best[0], best[1]


def _opt_certificate(opt: Profile, oracle: FeasibilityOracle) -> tuple[int, str]:
    area = opt.total_area
    if all(cls.area == 1 for cls in opt.classes):
        return opt.num_bins, "full-bins"
    lower = math.ceil(area)
    if lower == opt.num_bins:
        return lower, "area-lower-bound"
    if opt.num_items <= OPT_EXACT_LIMIT:
        c = opt.expand()
        n, _ = optimal_bins(list(c.items.values()), EXACT)
        return n, "exact-oracle"
    return lower, "area-lower-bound"


def poa_ratio(out, oracle: FeasibilityOracle = NFDH, verify: bool = True) -> RatioReport:
    """Equilibrium bins over certified optimum for a construction output."""
    if verify:
        ok, witness = is_nash(out.eq, oracle)
        if not ok:
            raise NotAnEquilibrium(f"equilibrium profile admits {witness}")
    opt_bins, cert = _opt_certificate(out.opt, oracle)
    eq_bins = out.eq.num_bins
    return RatioReport(eq_bins, opt_bins, Fraction(eq_bins, opt_bins), cert)


def config_ratio(c: Configuration, oracle: FeasibilityOracle = NFDH, verify: bool = True) -> RatioReport:
    """Ratio for an explicit equilibrium; exact optimum for small instances, area bound otherwise."""
    if verify:
        ok, witness = is_nash(c, oracle)
        if not ok:
            raise NotAnEquilibrium(f"configuration admits {witness}")
    items = list(c.items.values())
    if len(items) <= OPT_EXACT_LIMIT:
        opt, _ = optimal_bins(items, EXACT)
        cert = "exact-oracle"
    else:
        opt, cert = math.ceil(total_area(items)), "area-lower-bound"
    return RatioReport(c.num_bins, opt, Fraction(c.num_bins, opt), cert)


def lk_series(k: int) -> Fraction:
    """``sum_{i=1}^{k-1} (2^(i+1) - 3) / (2^i - 1)^2``."""
    if k < 2:
        raise ValueError("k must be at least 2")
    return sum((Fraction(2 ** (i + 1) - 3, (2**i - 1) ** 2) for i in range(1, k)), ZERO)


def bin_areas(state) -> list[tuple[object, Fraction, int]]:
    """``(label, occupied area, multiplicity)`` per bin, or per class of a Profile."""
    if isinstance(state, Configuration):
        return [(b, total_area(content), 1) for b, content in state.bins().items()]
    if isinstance(state, Profile):
        return [(idx, cls.area, cls.count) for idx, cls in enumerate(state.classes)]
    raise TypeError(f"expected Configuration or Profile, got {type(state).__name__}")


def occupancy_audit(state, threshold) -> tuple[int, list[tuple[object, Fraction]]]:
    """Number of bins with occupied area strictly below ``threshold``, and those bins."""
    threshold = Fraction(threshold)
    count = 0
    offenders = []
    for label, a, mult in bin_areas(state):
        if a < threshold:
            count += mult
            offenders.append((label, a))
    return count, offenders


def ratio_lemma_bound(gamma, delta) -> Fraction:
    gamma, delta = Fraction(gamma), Fraction(delta)
    if not 0 < gamma < delta < 1:
        raise PreconditionViolated("need 0 < gamma < delta < 1")
    return 1 + (1 - gamma) / delta


def check_ratio_lemma(a, b, gamma, delta) -> bool:
    """``(a + b) / max(a, gamma a + delta b) <= 1 + (1 - gamma) / delta``."""
    a, b = Fraction(a), Fraction(b)
    if a <= 0 or b < 0:
        raise PreconditionViolated("need a > 0 and b >= 0")
    bound = ratio_lemma_bound(gamma, delta)
    return (a + b) / max(a, Fraction(gamma) * a + Fraction(delta) * b) <= bound


def parametric_bound(m: int) -> Fraction:
    if m < 2:
        raise ValueError("m must be at least 2")
    return Fraction(m, m - 1) ** 2


# ---------------------------------------------------------------------------
# Root of (1 - x^2)(1 - x)^2 = 1/12


SPOA_TARGET = Fraction(23605, 10000)


def _f(x: Fraction) -> Fraction:
    return (1 - x * x) * (1 - x) ** 2 - Fraction(1, 12)


def spoa_case_big(x: Fraction) -> Fraction:
    return 1 + Fraction(3, 16) / (1 - x) ** 2


def spoa_case_medium(x: Fraction) -> Fraction:
    return 1 + Fraction(9, 4) * (1 - x * x)


@dataclass(frozen=True)
class SpoaConstant:
    lo: Fraction
    hi: Fraction
    case_big: tuple[Fraction, Fraction]  # increasing in x: values at lo and hi
    case_medium: tuple[Fraction, Fraction]  # decreasing in x: values at hi and lo

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def bound(self) -> Fraction:
        """Largest value either case bound takes anywhere on the root interval."""
        return max(self.case_big[1], self.case_medium[1])

    @property
    def cases_overlap(self) -> bool:
        a0, a1 = self.case_big
        b0, b1 = self.case_medium
        return max(a0, b0) <= min(a1, b1)

    @property
    def side_condition(self) -> bool:
        # 4(1-x)^2 is decreasing, so the worst point is lo
        return Fraction(9, 16) >= 4 * (1 - self.lo) ** 2


def spoa_constant(tol=Fraction(1, 10**9)) -> SpoaConstant:
    """Bisect ``f(x) = (1-x^2)(1-x)^2 - 1/12`` on [0, 1] in exact arithmetic.

    ``f`` is strictly decreasing on (0, 1), so the root is unique.
    """
    lo, hi = Fraction(0), Fraction(1)
    assert _f(lo) > 0 > _f(hi)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if _f(mid) > 0:
            lo = mid
        else:
            hi = mid
    assert Fraction(62, 100) <= lo and hi <= Fraction(63, 100)
    return SpoaConstant(
        lo,
        hi,
        (spoa_case_big(lo), spoa_case_big(hi)),
        (spoa_case_medium(hi), spoa_case_medium(lo)),
    )


# ---------------------------------------------------------------------------
# Audits of the accounting behind the upper bounds


@dataclass(frozen=True)
class ParametricAudit:
    m: int
    bins: int
    area: Fraction
    below: int  # bins under ((m-1)/m)^2
    holds: bool


def parametric_audit(c: Configuration, m: int) -> ParametricAudit:
    """On an equilibrium with every side at most 1/m, all but one bin reach ((m-1)/m)^2.

    Hence ``bins <= (m/(m-1))^2 a(L) + 1``.
    """
    cap = Fraction(1, m)
    if any(it.width > cap or it.height > cap for it in c.items.values()):
        raise PreconditionViolated(f"some item side exceeds 1/{m}")
    below, _ = occupancy_audit(c, Fraction(m - 1, m) ** 2)
    area = total_area(c.items.values())
    holds = below <= 1 and c.num_bins <= parametric_bound(m) * area + 1
    return ParametricAudit(m, c.num_bins, area, below, holds)


@dataclass(frozen=True)
class SquareBoundAudit:
    n_big: int  # bins holding a big square
    n_rest: int  # remaining bins, minus the two that may be under 4/9
    below_four_ninths: int
    opt_lower: Fraction
    bins: int
    holds: bool


def square_bound_audit(state) -> SquareBoundAudit:
    """Recheck the 43/16 accounting on a square equilibrium.

    Bins with a big square hold area above 1/4; among the others at most two
    fall below 4/9. Then ``OPT >= max(N_B, N_B/4 + 4 N_C/9)`` and the bin
    count is at most ``43/16`` of that plus 2.
    """
    n_big = rest = below = 0
    area = ZERO
    for content, a, mult in _bin_contents(state):
        area += a * mult
        if any(r.width > Fraction(1, 2) for r, _ in content):
            n_big += mult
        else:
            rest += mult
            if a < Fraction(4, 9):
                below += mult
    n_c = max(rest - 2, 0)
    lower = max(Fraction(n_big), Fraction(n_big, 4) + Fraction(4, 9) * n_c)
    bins = n_big + rest
    holds = (
        below <= 2
        and area >= Fraction(n_big, 4) + Fraction(4, 9) * n_c
        and bins <= ratio_lemma_bound(Fraction(1, 4), Fraction(4, 9)) * lower + 2
    )
    return SquareBoundAudit(n_big, n_c, below, lower, bins, holds)


def _bin_contents(state):
    if isinstance(state, Configuration):
        for content in state.bins().values():
            key = canonical(content)
            yield key, counts_area(key), 1
    else:
        for cls in state.classes:
            yield cls.contents, cls.area, cls.count


def strong_occupancy_audit(state, k: int) -> tuple[int, bool]:
    """Bins below ``(k/(k+1))^2`` and whether there are at most ``k^2`` of them."""
    below, _ = occupancy_audit(state, Fraction(k, k + 1) ** 2)
    return below, below <= k * k
