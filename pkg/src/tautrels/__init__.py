"""Exact-arithmetic tautological relations on weighted moduli of curves."""

from .series import (
    FloorUnderflow,
    NotDivisible,
    Ring,
    RingMismatch,
    Series,
    SeriesError,
    VarSpec,
    WindowError,
    embed,
)

__all__ = [
    "FloorUnderflow",
    "NotDivisible",
    "Ring",
    "RingMismatch",
    "Series",
    "SeriesError",
    "VarSpec",
    "WindowError",
    "embed",
]
