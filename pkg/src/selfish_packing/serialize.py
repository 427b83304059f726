"""JSON form of instances, configurations and compact profiles.

Every rational is written as a ``"p/q"`` string in lowest terms, so a
round trip is exact.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any

from .game import BinClass, Configuration, Profile, canonical
from .geometry import Item, Packing, Placement, Rect


def q2s(q) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def s2q(s) -> Fraction:
    if isinstance(s, bool) or not isinstance(s, (str, int)):
        raise ValueError(f"expected a 'p/q' string, got {s!r}")
    if isinstance(s, int):
        return Fraction(s)
    num, sep, den = s.strip().partition("/")
    try:
        if not sep:
            return Fraction(int(num))
        return Fraction(int(num), int(den))
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a rational: {s!r}") from None


def items_to_json(items) -> list[dict]:
    return [{"id": it.id, "w": q2s(it.width), "h": q2s(it.height)} for it in sorted(items, key=lambda it: it.id)]


def items_from_json(rows) -> list[Item]:
    items = []
    seen = set()
    for row in rows:
        iid = int(row["id"])
        if iid in seen:
            raise ValueError(f"duplicate item id {iid}")
        seen.add(iid)
        items.append(Item(iid, Rect(s2q(row["w"]), s2q(row["h"]))))
    return items


def config_to_json(c: Configuration, placements: dict[int, Packing] | None = None) -> dict:
    doc: dict[str, Any] = {
        "items": items_to_json(c.items.values()),
        "assignment": {str(k): c.assignment[k] for k in sorted(c.assignment)},
    }
    if placements:
        rows = []
        for b in sorted(placements):
            for p in placements[b].placements:
                rows.append({"id": p.item.id, "bin": b, "x": q2s(p.x), "y": q2s(p.y)})
        doc["placements"] = rows
    return doc


def profile_to_json(p: Profile) -> dict:
    return {
        "profile": [
            {
                "count": cls.count,
                "contents": [{"w": q2s(r.width), "h": q2s(r.height), "count": n} for r, n in cls.contents],
            }
            for cls in p.classes
        ]
    }


def profile_from_json(rows) -> Profile:
    classes = []
    for row in rows:
        contents = canonical((Rect(s2q(c["w"]), s2q(c["h"])), int(c["count"])) for c in row["contents"])
        classes.append(BinClass(contents, int(row["count"])))
    return Profile(tuple(classes))


def load_doc(doc: dict):
    """Return ``(items, state, placements)``.

    ``state`` is a Configuration when an assignment is present, a Profile for
    compact documents and None for a bare item list.
    """
    if "profile" in doc:
        p = profile_from_json(doc["profile"])
        return None, p, {}
    items = items_from_json(doc.get("items", []))
    state = None
    if "assignment" in doc:
        byid = {it.id: it for it in items}
        assignment = {int(k): int(v) for k, v in doc["assignment"].items()}
        state = Configuration(byid, assignment)
    placements: dict[int, list[Placement]] = {}
    if "placements" in doc:
        byid = {it.id: it for it in items}
        for row in doc["placements"]:
            pl = Placement(byid[int(row["id"])], s2q(row["x"]), s2q(row["y"]))
            placements.setdefault(int(row["bin"]), []).append(pl)
    return items, state, {b: Packing(tuple(pls)) for b, pls in placements.items()}


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1) + "\n"


def loads(text: str) -> dict:
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("instance file must hold a JSON object")
    return doc
