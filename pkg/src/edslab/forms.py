"""Graded exterior forms over an abstract coframe.

Generators are referred to by integer ids (their position in a
:class:`CoframeContext`).  A :class:`Form` is a homogeneous element of the
exterior algebra: a map from strictly increasing id tuples to non-zero
:class:`~edslab.scalar.Scalar` coefficients.  Forms do not carry their
context; operations that need one (``d``, printing by name) take it
explicitly.
"""

from __future__ import annotations

import re
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .scalar import Scalar, SymbolTable


class MissingTableEntry(KeyError):
    """The structure or scalar-derivative table has no entry for an item."""

    def __str__(self):
        return str(self.args[0]) if self.args else "missing table entry"


def _sort_with_sign(idx: Sequence[int]):
    """Sort ``idx`` and return ``(sign, sorted_tuple)``; sign 0 on repeats."""
    items = list(idx)
    if len(set(items)) != len(items):
        return 0, ()
    sign = 1
    # insertion sort counting transpositions
    for i in range(1, len(items)):
        j = i
        while j > 0 and items[j - 1] > items[j]:
            items[j - 1], items[j] = items[j], items[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(items)


class Form:
    """Homogeneous exterior form of a fixed degree."""

    __slots__ = ("degree", "_terms")

    def __init__(self, degree: int, terms: Mapping[tuple, object] | None = None):
        self.degree = degree
        clean: dict = {}
        if terms:
            for idx, coeff in terms.items():
                idx = tuple(idx)
                if len(idx) != degree:
                    raise ValueError(f"index tuple {idx} does not have length {degree}")
                sign, key = _sort_with_sign(idx)
                if not sign:
                    continue
                coeff = Scalar.coerce(coeff)
                if sign < 0:
                    coeff = -coeff
                if key in clean:
                    clean[key] = clean[key] + coeff
                else:
                    clean[key] = coeff
        self._terms = {k: v for k, v in clean.items() if v}

    # construction -----------------------------------------------------
    @classmethod
    def zero(cls, degree: int) -> "Form":
        return cls(degree)

    @classmethod
    def scalar(cls, s) -> "Form":
        return cls(0, {(): Scalar.coerce(s)})

    @classmethod
    def generator(cls, index: int, coeff=1) -> "Form":
        return cls(1, {(index,): coeff})

    @classmethod
    def basis(cls, indices: Sequence[int], coeff=1) -> "Form":
        return cls(len(indices), {tuple(indices): coeff})

    # inspection -------------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items())

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def coefficient(self, indices: Sequence[int]) -> Scalar:
        sign, key = _sort_with_sign(indices)
        if not sign:
            return Scalar()
        c = self._terms.get(key, Scalar())
        return c if sign > 0 else -c

    def generators_used(self) -> frozenset:
        return frozenset(i for idx in self._terms for i in idx)

    def symbols(self) -> frozenset:
        out = set()
        for c in self._terms.values():
            out |= c.symbols()
        return frozenset(out)

    # algebra ----------------------------------------------------------
    def _check_same_degree(self, other: "Form"):
        if self.degree != other.degree:
            raise ValueError(f"cannot add forms of degree {self.degree} and {other.degree}")

    def __add__(self, other: "Form") -> "Form":
        if not isinstance(other, Form):
            return NotImplemented
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        self._check_same_degree(other)
        out = dict(self._terms)
        for k, v in other._terms.items():
            out[k] = out[k] + v if k in out else v
        return Form(self.degree, out)

    def __neg__(self) -> "Form":
        return Form(self.degree, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other: "Form") -> "Form":
        if not isinstance(other, Form):
            return NotImplemented
        return self + (-other)

    def __mul__(self, s) -> "Form":
        if isinstance(s, Form):
            return wedge(self, s)
        try:
            s = Scalar.coerce(s)
        except TypeError:
            return NotImplemented
        if not s:
            return Form(self.degree)
        return Form(self.degree, {k: v * s for k, v in self._terms.items()})

    def __rmul__(self, s) -> "Form":
        return self.__mul__(s)

    def __xor__(self, other: "Form") -> "Form":
        return wedge(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Form):
            return NotImplemented
        if self.is_zero() and other.is_zero():
            return True
        return self.degree == other.degree and self._terms == other._terms

    def __hash__(self):
        return hash((self.degree, frozenset(self._terms.items())))

    # contraction and evaluation --------------------------------------
    def interior(self, vector: Sequence) -> "Form":
        """Contraction with a vector given by its components on the generators."""
        if self.degree == 0:
            return Form(-1)
        out: dict = {}
        for idx, c in self._terms.items():
            for pos, g in enumerate(idx):
                comp = vector[g]
                if not comp:
                    continue
                rest = idx[:pos] + idx[pos + 1:]
                term = c * Scalar.coerce(comp)
                if pos % 2:
                    term = -term
                out[rest] = out[rest] + term if rest in out else term
        return Form(self.degree - 1, out)

    def evaluate(self, *vectors: Sequence) -> Scalar:
        """``alpha(v1, ..., vk)`` for k = degree."""
        if len(vectors) != self.degree:
            raise ValueError(f"a {self.degree}-form needs {self.degree} vectors, got {len(vectors)}")
        f = self
        for v in vectors:
            f = f.interior(v)
        return f._terms.get((), Scalar())

    # reductions and substitutions ------------------------------------
    def drop(self, indices: Iterable[int]) -> "Form":
        """Remove every term that involves one of ``indices`` (work modulo them)."""
        banned = set(indices)
        return Form(self.degree, {k: v for k, v in self._terms.items() if not banned & set(k)})

    def keep_only(self, indices: Iterable[int]) -> "Form":
        allowed = set(indices)
        return Form(self.degree, {k: v for k, v in self._terms.items() if set(k) <= allowed})

    def subs(self, assignment: Mapping[str, object]) -> "Form":
        if not assignment:
            return self
        return Form(self.degree, {k: v.subs(assignment) for k, v in self._terms.items()})

    def map_coefficients(self, fn) -> "Form":
        return Form(self.degree, {k: fn(v) for k, v in self._terms.items()})

    def change_generators(self, images: Mapping[int, "Form"]) -> "Form":
        """Replace generator ``i`` by the 1-form ``images[i]`` (others fixed)."""
        out = Form(self.degree)
        cache = {}
        for idx, c in self._terms.items():
            term = Form.scalar(c)
            for g in idx:
                if g not in cache:
                    cache[g] = images.get(g, Form.generator(g))
                term = wedge(term, cache[g])
            out = out + term
        return out

    # printing ---------------------------------------------------------
    def to_string(self, names: Sequence[str] | None = None) -> str:
        if not self._terms:
            return "0"
        parts = []
        for k, (idx, c) in enumerate(sorted(self._terms.items())):
            basis = "^".join(names[i] if names else f"g{i}" for i in idx)
            neg, text = _coefficient_text(c)
            if basis:
                text = basis if text == "1" else f"{text}*{basis}"
            if k == 0:
                parts.append(("-" if neg else "") + text)
            else:
                parts.append((" - " if neg else " + ") + text)
        return "".join(parts)

    def __str__(self):
        return self.to_string()

    def __repr__(self):
        return f"Form({self.degree}, {self.to_string()!r})"


def _coefficient_text(c: Scalar):
    terms = c.sorted_terms()
    if len(terms) == 1:
        mono, q = terms[0]
        neg = q < 0
        text = str(Scalar({mono: abs(q)}))
        return neg, text
    return False, f"({c})"


def wedge(lhs: Form, rhs: Form) -> Form:
    """Exterior product.  Overflowing degrees simply give zero terms."""
    if lhs.is_zero() or rhs.is_zero():
        return Form(lhs.degree + rhs.degree)
    out: dict = {}
    for i1, c1 in lhs._terms.items():
        s1 = set(i1)
        for i2, c2 in rhs._terms.items():
            if s1.intersection(i2):
                continue
            sign, key = _sort_with_sign(i1 + i2)
            prod = c1 * c2
            if sign < 0:
                prod = -prod
            out[key] = out[key] + prod if key in out else prod
    return Form(lhs.degree + rhs.degree, out)


def wedge_all(forms: Iterable[Form]) -> Form:
    result = Form.scalar(1)
    for f in forms:
        result = wedge(result, f)
    return result


# Riemann tensor symbols ----------------------------------------------

_RIEMANN = re.compile(r"^R(\d)(\d)(\d)(\d)$")


class RiemannIndex:
    """Canonical index quadruple for an orthonormal-frame curvature component.

    ``RiemannIndex.canonical(a, b, c, d)`` returns ``(sign, RiemannIndex)``
    with ``a<b``, ``c<d`` and ``(a, b) <= (c, d)``; the sign is 0 when the
    component vanishes by antisymmetry.
    """

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b, c, d):
        self.a, self.b, self.c, self.d = a, b, c, d

    @classmethod
    def canonical(cls, a, b, c, d):
        if a == b or c == d:
            return 0, None
        sign = 1
        if a > b:
            a, b, sign = b, a, -sign
        if c > d:
            c, d, sign = d, c, -sign
        if (a, b) > (c, d):
            a, b, c, d = c, d, a, b
        return sign, cls(a, b, c, d)

    @property
    def name(self) -> str:
        return f"R{self.a}{self.b}{self.c}{self.d}"

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d)

    def __eq__(self, other):
        return isinstance(other, RiemannIndex) and self.as_tuple() == other.as_tuple()

    def __hash__(self):
        return hash(self.as_tuple())

    def __repr__(self):
        return self.name


def bianchi_rules(n: int = 4) -> dict:
    """First-Bianchi substitutions eliminating ``R{a}{d}{b}{c}`` for ``a<b<c<d``.

    ``R_abcd + R_acdb + R_adbc = 0`` with ``R_acdb = -R_acbd`` gives
    ``R_adbc = R_acbd - R_abcd``.
    """
    rules = {}
    for a, b, c, d in combinations(range(1, n + 1), 4):
        rules[f"R{a}{d}{b}{c}"] = Scalar.symbol(f"R{a}{c}{b}{d}") - Scalar.symbol(f"R{a}{b}{c}{d}")
    return rules


def riemann(a, b, c, d, bianchi: bool = False) -> Scalar:
    """Scalar for ``R_abcd`` in canonical form."""
    sign, idx = RiemannIndex.canonical(a, b, c, d)
    if not sign:
        return Scalar()
    s = Scalar.symbol(idx.name) * sign
    if bianchi:
        s = s.subs({k: v for k, v in bianchi_rules(max(a, b, c, d, 4)).items() if k in s.symbols()})
    return s


def riemann_symbols(n: int = 4, bianchi: bool = False) -> list[str]:
    names = set()
    for a, b, c, d in _all_quads(n):
        sign, idx = RiemannIndex.canonical(a, b, c, d)
        if sign:
            names.add(idx.name)
    if bianchi:
        names -= set(bianchi_rules(n))
    return sorted(names)


def _all_quads(n):
    r = range(1, n + 1)
    return ((a, b, c, d) for a in r for b in r for c in r for d in r)


# Coframe context -----------------------------------------------------


class CoframeContext:
    """Ordered generators plus the tables that define ``d``.

    ``structure[i]`` is the 2-form ``d(generator i)``; ``scalar_d[name]``
    is the 1-form ``d(symbol)``.  ``aliases`` maps extra names to
    ``(index, sign)`` so that e.g. ``w21`` reads as ``-w12``.
    ``relations`` are substitutions applied to every coefficient that ``d``
    produces (used for the first Bianchi identity).
    """

    def __init__(self, generators: Sequence[str], aliases: Mapping[str, tuple] | None = None):
        if len(set(generators)) != len(generators):
            raise ValueError("generator names must be unique")
        self.generators = list(generators)
        self.index = {n: i for i, n in enumerate(self.generators)}
        self.aliases = dict(aliases or {})
        self.structure: dict = {}
        self.scalar_d: dict = {}
        self.constants: set = set()
        self.relations: dict = {}
        self.symbols = SymbolTable()

    @property
    def dim(self) -> int:
        return len(self.generators)

    def with_tables(self, structure: Mapping, scalar_d: Mapping | None = None,
                    constants: Iterable[str] = (), relations: Mapping | None = None) -> "CoframeContext":
        for key, form in structure.items():
            i = self.index[key] if isinstance(key, str) else key
            if form.degree != 2 and not form.is_zero():
                raise ValueError(f"d({self.generators[i]}) must be a 2-form")
            self.structure[i] = Form(2, form.terms)
        for name, form in (scalar_d or {}).items():
            self.scalar_d[name] = Form(1, form.terms)
        self.constants |= set(constants)
        if relations:
            self.relations.update(relations)
        return self

    def enable_bianchi(self, n: int = 4) -> "CoframeContext":
        self.relations.update(bianchi_rules(n))
        return self

    @property
    def bianchi(self) -> bool:
        return bool(set(bianchi_rules(4)) & set(self.relations))

    def resolve(self, name: str) -> tuple:
        """``(index, sign)`` for a generator name or alias."""
        if name in self.index:
            return self.index[name], 1
        if name in self.aliases:
            return self.aliases[name]
        raise KeyError(f"unknown generator {name!r}")

    def gen(self, name: str) -> Form:
        i, sign = self.resolve(name)
        return Form.generator(i, sign)

    def name_of(self, index: int) -> str:
        return self.generators[index]

    def reduce(self, s: Scalar) -> Scalar:
        if not self.relations:
            return s
        hit = {k: v for k, v in self.relations.items() if k in s.symbols()}
        return s.subs(hit) if hit else s

    def reduce_form(self, f: Form) -> Form:
        if not self.relations:
            return f
        return f.map_coefficients(self.reduce)

    def fmt(self, f: Form) -> str:
        return f.to_string(self.generators)

    def d_scalar(self, s: Scalar) -> Form:
        out = Form(1)
        for name in sorted(s.symbols()):
            if name in self.constants:
                continue
            if name not in self.scalar_d:
                raise MissingTableEntry(f"no scalar derivative for symbol {name!r}")
            out = out + self.scalar_d[name] * s.diff(name)
        return out

    def d_generator(self, i: int) -> Form:
        if i not in self.structure:
            raise MissingTableEntry(f"no structure equation for generator {self.generators[i]!r}")
        return self.structure[i]


def exterior_derivative(f: Form, ctx: CoframeContext) -> Form:
    """``d f`` using the context's structure and scalar-derivative tables."""
    out = Form(f.degree + 1)
    for idx, c in f.items():
        basis = [Form.generator(g) for g in idx]
        if not c.is_constant():
            out = out + wedge(ctx.d_scalar(c), wedge_all(basis))
        for j, g in enumerate(idx):
            dg = ctx.d_generator(g)
            if dg.is_zero():
                continue
            piece = wedge_all(basis[:j] + [dg] + basis[j + 1:]) * c
            out = out - piece if j % 2 else out + piece
    return ctx.reduce_form(out)


def substitute(f: Form, assignment: Mapping[str, object]) -> Form:
    """Simultaneous symbol substitution in every coefficient."""
    return f.subs({k: Scalar.coerce(v) for k, v in assignment.items()})
