"""Truncated multivariate Laurent series with exact rational coefficients.

A :class:`Ring` fixes, once and for all, an ordered tuple of variables
together with a per-variable exponent window ``[min_exponent, trunc_order)``.
At most one variable may have a negative ``min_exponent`` (a Laurent
variable); all other variables are ordinary power-series variables.

A :class:`Series` is a sparse dictionary mapping exponent tuples to nonzero
:class:`fractions.Fraction` coefficients.  All arithmetic is exact: products
drop exponents at or above a variable's truncation order (which is sound,
because exponents only ever increase under multiplication by ordinary terms),
while any operation that would push an exponent *below* a variable's floor
raises :class:`FloorUnderflow` rather than silently losing information.

>>> R = Ring([VarSpec("t", 0, 6)])
>>> t = R.var("t")
>>> ((1 + t).log().exp() - (1 + t)).is_zero()
True
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

Scalar = Union[int, Fraction]


class SeriesError(Exception):
    """Base class for all series-arithmetic failures."""


class RingMismatch(SeriesError):
    """Operands live in different rings."""


class FloorUnderflow(SeriesError):
    """An exponent fell below a variable's Laurent floor."""


class NotDivisible(SeriesError):
    """Exact division left a nonzero remainder."""


class WindowError(SeriesError):
    """A requested exponent lies outside the ring's exponent window."""


@dataclass(frozen=True)
class VarSpec:
    """One formal variable: name plus exponent window [min_exponent, trunc_order)."""

    name: str
    min_exponent: int = 0
    trunc_order: int = 1

    def __post_init__(self) -> None:
        if self.min_exponent >= self.trunc_order:
            raise ValueError(
                f"empty exponent window for {self.name!r}: "
                f"[{self.min_exponent}, {self.trunc_order})"
            )


class Ring:
    """An ordered collection of :class:`VarSpec` defining a truncated series ring."""

    __slots__ = ("specs", "index")

    def __init__(self, specs: Iterable[VarSpec]):
        specs = tuple(specs)
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names")
        if sum(1 for s in specs if s.min_exponent < 0) > 1:
            raise ValueError("at most one Laurent variable is allowed")
        self.specs = specs
        self.index = {s.name: i for i, s in enumerate(specs)}

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Ring) and self.specs == other.specs

    def __hash__(self) -> int:
        return hash(self.specs)

    def __repr__(self) -> str:
        parts = ", ".join(
            f"{s.name}[{s.min_exponent},{s.trunc_order})" for s in self.specs
        )
        return f"Ring({parts})"

    @property
    def nvars(self) -> int:
        return len(self.specs)

    def spec(self, name: str) -> VarSpec:
        return self.specs[self.index[name]]

    def zero(self) -> "Series":
        return Series(self, {})

    def const(self, c: Scalar) -> "Series":
        c = Fraction(c)
        if not c:
            return self.zero()
        exps = tuple(0 for _ in self.specs)
        self._check_window(exps)
        return Series(self, {exps: c})

    def one(self) -> "Series":
        return self.const(1)

    def var(self, name: str, power: int = 1) -> "Series":
        exps = [0] * self.nvars
        exps[self.index[name]] = power
        exps = tuple(exps)
        self._check_window(exps)
        return Series(self, {exps: Fraction(1)})

    def monomial(self, coeff: Scalar, **powers: int) -> "Series":
        exps = [0] * self.nvars
        for name, p in powers.items():
            exps[self.index[name]] = p
        exps = tuple(exps)
        self._check_window(exps)
        c = Fraction(coeff)
        return Series(self, {exps: c}) if c else self.zero()

    def _check_window(self, exps: tuple) -> None:
        for e, s in zip(exps, self.specs):
            if not (s.min_exponent <= e < s.trunc_order):
                raise WindowError(
                    f"exponent {e} of {s.name!r} outside window "
                    f"[{s.min_exponent}, {s.trunc_order})"
                )

    def series(self, terms: Mapping[tuple, Scalar]) -> "Series":
        out = {}
        for exps, c in terms.items():
            c = Fraction(c)
            if not c:
                continue
            exps = tuple(exps)
            self._check_window(exps)
            out[exps] = out.get(exps, Fraction(0)) + c
        return Series(self, {e: c for e, c in out.items() if c})


class Series:
    """A sparse truncated Laurent series; treat instances as immutable."""

    __slots__ = ("ring", "coeffs")

    def __init__(self, ring: Ring, coeffs: dict):
        self.ring = ring
        self.coeffs = coeffs

    # -- basic queries ----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.coeffs

    def constant_term(self) -> Fraction:
        return self.coeffs.get(tuple(0 for _ in self.ring.specs), Fraction(0))

    def coefficient(self, **powers: int) -> Fraction:
        """Coefficient of a single fully specified monomial."""
        exps = [0] * self.ring.nvars
        for name, p in powers.items():
            exps[self.ring.index[name]] = p
        exps = tuple(exps)
        self.ring._check_window(exps)
        return self.coeffs.get(exps, Fraction(0))

    def extract(self, **powers: int) -> "Series":
        """Fix the exponents of some variables; return a series in the rest.

        Raises :class:`WindowError` when a requested exponent lies outside the
        ring's window, so a caller can never silently read a truncated-away
        coefficient as zero.
        """
        ring = self.ring
        fixed = {}
        for name, p in powers.items():
            i = ring.index[name]
            s = ring.specs[i]
            if not (s.min_exponent <= p < s.trunc_order):
                raise WindowError(
                    f"exponent {p} of {name!r} outside window "
                    f"[{s.min_exponent}, {s.trunc_order})"
                )
            fixed[i] = p
        keep = [i for i in range(ring.nvars) if i not in fixed]
        sub = Ring([ring.specs[i] for i in keep])
        out: dict = {}
        for exps, c in self.coeffs.items():
            if all(exps[i] == p for i, p in fixed.items()):
                key = tuple(exps[i] for i in keep)
                out[key] = out.get(key, Fraction(0)) + c
        return Series(sub, {e: c for e, c in out.items() if c})

    def terms(self):
        return self.coeffs.items()

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = self.ring.const(other)
        if not isinstance(other, Series):
            return NotImplemented
        return self.ring == other.ring and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash((self.ring, frozenset(self.coeffs.items())))

    def __repr__(self) -> str:
        if not self.coeffs:
            return "0"
        names = [s.name for s in self.ring.specs]
        bits = []
        for exps in sorted(self.coeffs):
            mono = "*".join(
                f"{n}^{e}" if e != 1 else n for n, e in zip(names, exps) if e
            )
            c = self.coeffs[exps]
            bits.append(f"{c}" + (f"*{mono}" if mono else ""))
        text = " + ".join(bits)
        return text if len(text) < 400 else text[:400] + " ..."

    # -- ring operations --------------------------------------------------

    def _coerce(self, other) -> "Series":
        if isinstance(other, (int, Fraction)):
            return self.ring.const(other)
        if isinstance(other, Series):
            if other.ring != self.ring:
                raise RingMismatch(f"{self.ring} vs {other.ring}")
            return other
        raise TypeError(f"cannot combine Series with {type(other).__name__}")

    def __add__(self, other) -> "Series":
        other = self._coerce(other)
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            v = out.get(e, Fraction(0)) + c
            if v:
                out[e] = v
            else:
                out.pop(e, None)
        return Series(self.ring, out)

    __radd__ = __add__

    def __neg__(self) -> "Series":
        return Series(self.ring, {e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other) -> "Series":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Series":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Series":
        if isinstance(other, (int, Fraction)):
            c = Fraction(other)
            if not c:
                return self.ring.zero()
            return Series(self.ring, {e: v * c for e, v in self.coeffs.items()})
        other = self._coerce(other)
        specs = self.ring.specs
        out: dict = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                exps = tuple(a + b for a, b in zip(e1, e2))
                drop = False
                for e, s in zip(exps, specs):
                    if e >= s.trunc_order:
                        drop = True
                        break
                if drop:
                    continue
                for e, s in zip(exps, specs):
                    if e < s.min_exponent:
                        raise FloorUnderflow(
                            f"exponent {e} of {s.name!r} below floor "
                            f"{s.min_exponent} in product"
                        )
                v = out.get(exps, Fraction(0)) + c1 * c2
                if v:
                    out[exps] = v
                else:
                    del out[exps]
        return Series(self.ring, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Series":
        if not isinstance(n, int):
            raise TypeError("use pow_fraction for non-integer exponents")
        if n < 0:
            return self.inverse() ** (-n)
        result = self.ring.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            base_needed = n >> 1
            if base_needed:
                base = base * base
            n >>= 1
        return result

    # -- transcendental operations ----------------------------------------

    def _iteration_bound(self) -> int:
        return 2 * sum(s.trunc_order - s.min_exponent for s in self.ring.specs) + 4

    def exp(self) -> "Series":
        """exp of a series with zero constant term."""
        if self.constant_term():
            raise SeriesError("exp requires zero constant term")
        result = self.ring.one()
        term = self.ring.one()
        for k in range(1, self._iteration_bound() + 1):
            term = term * self * Fraction(1, k)
            if term.is_zero():
                return result
            result = result + term
        raise SeriesError("exp did not terminate within the truncation window")

    def log(self) -> "Series":
        """log of a series with constant term one."""
        if self.constant_term() != 1:
            raise SeriesError("log requires constant term 1")
        u = self - 1
        result = self.ring.zero()
        term = self.ring.one()
        for k in range(1, self._iteration_bound() + 1):
            term = term * u
            if term.is_zero():
                return result
            result = result + term * Fraction((-1) ** (k + 1), k)
        raise SeriesError("log did not terminate within the truncation window")

    def pow_fraction(self, e: Scalar) -> "Series":
        """Raise to an exact rational power via exp(e * log)."""
        e = Fraction(e)
        if e.denominator == 1:
            return self ** int(e)
        return (self.log() * e).exp()

    def inverse(self) -> "Series":
        """Multiplicative inverse of ``c * monomial * (1 + nilpotent)``.

        Factors out the componentwise-minimal exponent vector; the remaining
        series must have a nonzero constant term.
        """
        if self.is_zero():
            raise SeriesError("inverse of zero")
        ring = self.ring
        mins = [min(e[i] for e in self.coeffs) for i in range(ring.nvars)]
        shifted = {
            tuple(a - m for a, m in zip(e, mins)): c for e, c in self.coeffs.items()
        }
        c0 = shifted.get(tuple(0 for _ in ring.specs), Fraction(0))
        if not c0:
            raise SeriesError("series is not invertible (no unit monomial factor)")
        # geometric series for (1 + n)^-1 where n = shifted/c0 - 1
        big = Ring(
            [
                VarSpec(s.name, min(s.min_exponent, 0), max(s.trunc_order, 1))
                for s in ring.specs
            ]
        )
        n = Series(big, {e: c / c0 for e, c in shifted.items() if any(e)})
        inv = big.one()
        term = big.one()
        for k in range(1, self._iteration_bound() + 1):
            term = term * n
            if term.is_zero():
                break
            inv = inv + term * Fraction((-1) ** k)
        else:
            raise SeriesError("inverse did not terminate (non-nilpotent tail)")
        out: dict = {}
        for e, c in inv.coeffs.items():
            exps = tuple(a - m for a, m in zip(e, mins))
            drop = False
            for x, s in zip(exps, ring.specs):
                if x >= s.trunc_order:
                    drop = True
                    break
            if drop:
                continue
            for x, s in zip(exps, ring.specs):
                if x < s.min_exponent:
                    raise FloorUnderflow(
                        f"inverse exponent {x} of {s.name!r} below floor"
                    )
            out[exps] = c / c0
        return Series(ring, out)

    # -- calculus ----------------------------------------------------------

    def derivative(self, name: str) -> "Series":
        i = self.ring.index[name]
        floor = self.ring.specs[i].min_exponent
        out: dict = {}
        for e, c in self.coeffs.items():
            if e[i] == 0:
                continue
            exps = e[:i] + (e[i] - 1,) + e[i + 1 :]
            if exps[i] < floor:
                raise FloorUnderflow(f"derivative pushed {name!r} below floor")
            out[exps] = c * e[i]
        return Series(self.ring, out)

    def x_d_dx(self, name: str) -> "Series":
        """The Euler operator x d/dx in the named variable."""
        i = self.ring.index[name]
        out = {e: c * e[i] for e, c in self.coeffs.items() if e[i]}
        return Series(self.ring, out)

    def mul_var(self, name: str, power: int = 1) -> "Series":
        """Multiply by a pure variable power, with window enforcement."""
        i = self.ring.index[name]
        s = self.ring.specs[i]
        out: dict = {}
        for e, c in self.coeffs.items():
            x = e[i] + power
            if x >= s.trunc_order:
                continue
            if x < s.min_exponent:
                raise FloorUnderflow(f"shift pushed {name!r} below floor")
            out[e[:i] + (x,) + e[i + 1 :]] = c
        return Series(self.ring, out)

    # -- substitution -------------------------------------------------------

    def substitute(self, assignment: Mapping[str, Union["Series", int]]) -> "Series":
        """Substitute series (or a sign +/-1) for some of the variables.

        All :class:`Series` values must share one target ring; variables that
        are not assigned must exist (same name) in the target ring.  Negative
        exponents of an assigned variable require the assigned series to be
        invertible.
        """
        ring = self.ring
        signs = {n: v for n, v in assignment.items() if isinstance(v, int)}
        subs = {n: v for n, v in assignment.items() if isinstance(v, Series)}
        if any(v not in (1, -1) for v in signs.values()):
            raise SeriesError("integer assignments must be +1 or -1")
        cur = self
        if signs:
            out: dict = {}
            idxs = [(ring.index[n], v) for n, v in signs.items()]
            for e, c in cur.coeffs.items():
                s = 1
                for i, v in idxs:
                    if v == -1 and e[i] % 2:
                        s = -s
                out[e] = c * s
            cur = Series(ring, out)
        if not subs:
            return cur
        target = next(iter(subs.values())).ring
        for n, v in subs.items():
            if v.ring != target:
                raise RingMismatch("assigned series live in different rings")
        sub_idx = {ring.index[n]: v for n, v in subs.items()}
        keep_idx = [i for i in range(ring.nvars) if i not in sub_idx]
        for i in keep_idx:
            if ring.specs[i].name not in target.index:
                raise SeriesError(
                    f"variable {ring.specs[i].name!r} missing from target ring"
                )
        pow_cache: dict = {}

        def powered(i: int, k: int) -> Series:
            key = (i, k)
            if key not in pow_cache:
                base = sub_idx[i]
                pow_cache[key] = base.inverse() ** (-k) if k < 0 else base ** k
            return pow_cache[key]

        total = target.zero()
        for e, c in cur.coeffs.items():
            piece = target.monomial(
                c, **{ring.specs[i].name: e[i] for i in keep_idx}
            )
            for i in sub_idx:
                if e[i]:
                    piece = piece * powered(i, e[i])
            total = total + piece
        return total

    # -- exact division -----------------------------------------------------

    def divide_exact(self, den: "Series") -> "Series":
        """Exact long division; raises :class:`NotDivisible` on any remainder.

        Uses the lexicographically minimal term of the denominator as the lead
        term; lex order is compatible with exponent addition, so the remainder
        strictly increases and the loop terminates inside the finite window.
        """
        den = self._coerce(den)
        if den.is_zero():
            raise NotDivisible("division by zero series")
        ring = self.ring
        d0 = min(den.coeffs)
        dc = den.coeffs[d0]
        rem = dict(self.coeffs)
        quot: dict = {}
        while rem:
            r0 = min(rem)
            q = tuple(a - b for a, b in zip(r0, d0))
            for x, s in zip(q, ring.specs):
                if x < s.min_exponent or x >= s.trunc_order:
                    raise NotDivisible(
                        f"remainder term {r0} not reducible by lead term {d0}"
                    )
            qc = rem[r0] / dc
            quot[q] = quot.get(q, Fraction(0)) + qc
            for e, c in den.coeffs.items():
                exps = tuple(a + b for a, b in zip(q, e))
                if any(x >= s.trunc_order for x, s in zip(exps, ring.specs)):
                    continue
                v = rem.get(exps, Fraction(0)) - qc * c
                if v:
                    rem[exps] = v
                else:
                    rem.pop(exps, None)
        return Series(ring, {e: c for e, c in quot.items() if c})


def embed(series: Series, target: Ring, rename: Mapping[str, str] | None = None) -> Series:
    """Copy a series into a larger ring, matching variables by name.

    Exponents at or above the target truncation are dropped (exact
    truncation); exponents below the target floor raise.
    """
    rename = rename or {}
    src = series.ring
    cols = []
    for s in src.specs:
        name = rename.get(s.name, s.name)
        cols.append(target.index[name])
    out: dict = {}
    for e, c in series.coeffs.items():
        exps = [0] * target.nvars
        for i, x in zip(cols, e):
            exps[i] += x
        drop = False
        for x, s in zip(exps, target.specs):
            if x >= s.trunc_order:
                drop = True
                break
            if x < s.min_exponent:
                raise FloorUnderflow(
                    f"embed: exponent {x} of {s.name!r} below floor"
                )
        if drop:
            continue
        key = tuple(exps)
        v = out.get(key, Fraction(0)) + c
        if v:
            out[key] = v
        else:
            del out[key]
    return Series(target, out)
