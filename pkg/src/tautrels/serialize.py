"""JSON round-tripping for series, graphs and relations.

Rational coefficients are stored as decimal strings so that arbitrarily
large numerators and denominators survive any JSON implementation.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any

from .series import Ring, Series, VarSpec


def series_to_dict(s: Series) -> dict:
    return {
        "ring": [
            {"var": v.name, "min": v.min_exponent, "max": v.trunc_order}
            for v in s.ring.specs
        ],
        "terms": [
            {
                "exp": list(e),
                "num": str(c.numerator),
                "den": str(c.denominator),
            }
            for e, c in sorted(s.coeffs.items())
        ],
    }


def series_from_dict(d: dict) -> Series:
    ring = Ring([VarSpec(v["var"], v["min"], v["max"]) for v in d["ring"]])
    terms = {
        tuple(t["exp"]): Fraction(int(t["num"]), int(t["den"])) for t in d["terms"]
    }
    return ring.series(terms)


def dumps(obj: Any, **kw) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), **kw)
