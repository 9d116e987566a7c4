"""Exact sparse multivariate polynomials over the rationals.

A :class:`Scalar` is a map from monomials to :class:`fractions.Fraction`
coefficients.  A monomial is a tuple of ``(symbol, power)`` pairs sorted by
symbol name, so ``x**2*y`` is ``(("x", 2), ("y", 1))`` and the constant
monomial is ``()``.  Scalars are immutable; every operation returns a new
value in canonical form (no zero coefficients are ever stored).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping

Monomial = tuple  # tuple[tuple[str, int], ...]

SYMBOL_KINDS = frozenset(
    {"coordinate", "connection-coefficient", "curvature", "jet", "auxiliary", "constant"}
)


class NonlinearError(ValueError):
    """Raised when a linear expression was required."""


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    out = []
    i = j = 0
    while i < len(m1) and j < len(m2):
        a, b = m1[i], m2[j]
        if a[0] == b[0]:
            out.append((a[0], a[1] + b[1]))
            i += 1
            j += 1
        elif a[0] < b[0]:
            out.append(a)
            i += 1
        else:
            out.append(b)
            j += 1
    out.extend(m1[i:])
    out.extend(m2[j:])
    return tuple(out)


def _mono_degree(m: Monomial) -> int:
    return sum(p for _, p in m)


def _sort_key(m: Monomial):
    # graded lexicographic: total degree first, then symbol/power sequence
    return (_mono_degree(m), m)


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    raise TypeError(f"expected a rational number, got {type(value).__name__}")


class Scalar:
    """Exact polynomial with rational coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Fraction] | None = None):
        clean = {}
        if terms:
            for mono, coeff in terms.items():
                if coeff:
                    clean[mono] = coeff if isinstance(coeff, Fraction) else Fraction(coeff)
        self._terms = clean
        self._hash = None

    # construction -----------------------------------------------------
    @classmethod
    def const(cls, value) -> "Scalar":
        return cls({(): _as_fraction(value)})

    @classmethod
    def symbol(cls, name: str) -> "Scalar":
        return cls({((name, 1),): Fraction(1)})

    @classmethod
    def coerce(cls, value) -> "Scalar":
        if isinstance(value, Scalar):
            return value
        return cls.const(value)

    # inspection -------------------------------------------------------
    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_constant(self) -> bool:
        return all(m == () for m in self._terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return self._terms.get((), Fraction(0))

    def constant_term(self) -> Fraction:
        return self._terms.get((), Fraction(0))

    def symbols(self) -> frozenset:
        return frozenset(name for mono in self._terms for name, _ in mono)

    def degree(self) -> int:
        return max((_mono_degree(m) for m in self._terms), default=0)

    def sorted_terms(self) -> list:
        return sorted(self._terms.items(), key=lambda kv: _sort_key(kv[0]))

    # arithmetic -------------------------------------------------------
    def __add__(self, other) -> "Scalar":
        try:
            other = Scalar.coerce(other)
        except TypeError:
            return NotImplemented
        out = dict(self._terms)
        for mono, coeff in other._terms.items():
            out[mono] = out.get(mono, 0) + coeff
        return Scalar(out)

    __radd__ = __add__

    def __neg__(self) -> "Scalar":
        return Scalar({m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "Scalar":
        try:
            other = Scalar.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Scalar":
        return Scalar.coerce(other) - self

    def __mul__(self, other) -> "Scalar":
        if isinstance(other, (int, Fraction)):
            if not other:
                return Scalar()
            return Scalar({m: c * other for m, c in self._terms.items()})
        if not isinstance(other, Scalar):
            return NotImplemented
        out: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Scalar(out)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Scalar":
        if isinstance(other, Scalar):
            other = other.constant_value()
        other = _as_fraction(other)
        return Scalar({m: c / other for m, c in self._terms.items()})

    def __pow__(self, n: int) -> "Scalar":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = Scalar.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Scalar.const(other)
        if not isinstance(other, Scalar):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # calculus and substitution ---------------------------------------
    def diff(self, name: str) -> "Scalar":
        out: dict = {}
        for mono, coeff in self._terms.items():
            for k, (sym, power) in enumerate(mono):
                if sym == name:
                    rest = mono[:k] + ((sym, power - 1),) + mono[k + 1:] if power > 1 else mono[:k] + mono[k + 1:]
                    out[rest] = out.get(rest, 0) + coeff * power
                    break
        return Scalar(out)

    def subs(self, assignment: Mapping[str, "Scalar"]) -> "Scalar":
        """Simultaneous substitution of symbols by Scalars (or rationals)."""
        if not assignment:
            return self
        keys = set(assignment)
        for name, value in assignment.items():
            value = Scalar.coerce(value)
            if value.symbols() & keys:
                raise ValueError(
                    f"cyclic substitution: value for {name!r} contains substituted symbols "
                    f"{sorted(value.symbols() & keys)}"
                )
        cache: dict = {}

        def power(name, p):
            key = (name, p)
            if key not in cache:
                cache[key] = Scalar.coerce(assignment[name]) ** p
            return cache[key]

        total: dict = {}
        for mono, coeff in self._terms.items():
            kept = tuple((s, p) for s, p in mono if s not in keys)
            term = Scalar({kept: coeff})
            for s, p in mono:
                if s in keys:
                    term = term * power(s, p)
            for m, c in term._terms.items():
                total[m] = total.get(m, 0) + c
        return Scalar(total)

    def evaluate(self, values: Mapping[str, object]) -> Fraction:
        """Exact value at a rational point; every symbol must be assigned."""
        total = Fraction(0)
        for mono, coeff in self._terms.items():
            term = coeff
            for s, p in mono:
                try:
                    v = values[s]
                except KeyError:
                    raise KeyError(f"no value for symbol {s!r}") from None
                term *= _as_fraction(v) ** p
            total += term
        return total

    def linear_form(self, variables: Iterable[str]) -> tuple[dict, "Scalar"]:
        """Split into ``sum coeff[v] * v + rest`` where ``rest`` is free of ``variables``.

        Raises :class:`NonlinearError` if any monomial has total degree > 1
        in the variables.
        """
        variables = set(variables)
        coeffs: dict = {}
        rest: dict = {}
        for mono, c in self._terms.items():
            hits = [(s, p) for s, p in mono if s in variables]
            if not hits:
                rest[mono] = c
                continue
            if len(hits) > 1 or hits[0][1] > 1:
                raise NonlinearError(f"term {_format_term(mono, c)} is nonlinear in the variables")
            var = hits[0][0]
            others = tuple((s, p) for s, p in mono if s != var)
            bucket = coeffs.setdefault(var, {})
            bucket[others] = bucket.get(others, 0) + c
        return {v: Scalar(t) for v, t in coeffs.items()}, Scalar(rest)

    def primitive(self) -> "Scalar":
        """Scale so that coefficients are coprime integers and the leading term is positive."""
        if not self._terms:
            return self
        from math import gcd

        lcm = 1
        for c in self._terms.values():
            lcm = lcm * c.denominator // gcd(lcm, c.denominator)
        ints = {m: c * lcm for m, c in self._terms.items()}
        g = 0
        for c in ints.values():
            g = gcd(g, int(c))
        lead = max(ints, key=_sort_key)
        sign = 1 if ints[lead] > 0 else -1
        return Scalar({m: c * sign / g for m, c in ints.items()})

    # printing ---------------------------------------------------------
    def __str__(self) -> str:
        if not self._terms:
            return "0"
        items = sorted(self._terms.items(), key=lambda kv: _sort_key(kv[0]), reverse=True)
        parts = []
        for k, (mono, c) in enumerate(items):
            text = _format_term(mono, abs(c))
            if k == 0:
                parts.append(("-" if c < 0 else "") + text)
            else:
                parts.append((" - " if c < 0 else " + ") + text)
        return "".join(parts)

    def __repr__(self) -> str:
        return f"Scalar({str(self)!r})"


def _format_term(mono: Monomial, coeff: Fraction) -> str:
    factors = [f"{s}^{p}" if p > 1 else s for s, p in mono]
    if not factors:
        return _format_rational(coeff)
    if coeff == 1:
        return "*".join(factors)
    return "*".join([_format_rational(coeff)] + factors)


def _format_rational(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def symbols(*names: str) -> tuple[Scalar, ...]:
    """Convenience: ``x, y = symbols("x", "y")``."""
    return tuple(Scalar.symbol(n) for n in names)


ZERO = Scalar()
ONE = Scalar.const(1)


@dataclass
class SymbolTable:
    """Declared symbols and their kinds."""

    entries: dict = field(default_factory=dict)

    def declare(self, name: str, kind: str) -> None:
        if kind not in SYMBOL_KINDS:
            raise ValueError(f"unknown symbol kind {kind!r} for {name!r}")
        previous = self.entries.get(name)
        if previous is not None and previous != kind:
            raise ValueError(f"symbol {name!r} already declared as {previous!r}")
        self.entries[name] = kind

    def declare_many(self, names: Iterable[str], kind: str) -> None:
        for n in names:
            self.declare(n, kind)

    def kind(self, name: str) -> str:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def names(self, kind: str | None = None) -> list[str]:
        return sorted(n for n, k in self.entries.items() if kind is None or k == kind)

    def check(self, scalar: Scalar) -> None:
        missing = scalar.symbols() - set(self.entries)
        if missing:
            raise KeyError(f"undeclared symbols: {sorted(missing)}")
