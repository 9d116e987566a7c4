"""Line-oriented text formats for exterior systems and numeric fields.

A system file::

    [generators]
    w1 w2 w12
    w21 = -w12
    [symbols]
    curvature: K
    [structure]
    d w1 = -w12^w2
    d w2 = w12^w1
    d w12 = K*w1^w2
    [ideal]
    w1^d(w2)
    [independence]
    w1^w2

Expressions use identifiers, ``^`` and ``*`` (both wedge), ``d(ident)``,
literals ``p/q``, ``+``, ``-`` and parentheses.  Optional sections are
``[derivatives]`` (``d K = ...``) and ``[relations]`` (``R1423 = ...``).
``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .eds import ExteriorSystem
from .forms import CoframeContext, Form, exterior_derivative, wedge
from .scalar import SYMBOL_KINDS, Scalar

SYSTEM_SECTIONS = ("generators", "symbols", "structure", "derivatives", "relations", "ideal", "independence")
REQUIRED_SECTIONS = ("generators", "structure", "independence")
FIELD_SECTIONS = ("coordinates", "metric", "coframe", "fields", "domain")


class DSLError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class UndeclaredIdentifierError(DSLError):
    def __init__(self, name: str, line=None, column=None):
        self.name = name
        super().__init__(f"undeclared identifier {name!r}", line, column)


# sections ----------------------------------------------------------------

@dataclass
class _Line:
    number: int
    text: str
    offset: int  # column of text[0], 1-based


def split_sections(text: str, allowed) -> dict:
    sections: dict = {}
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0]
        stripped = body.strip()
        if not stripped:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_]+)\s*\]", stripped)
        if m:
            name = m.group(1)
            if name not in allowed:
                raise DSLError(f"unknown section [{name}]", n, body.index("[") + 1)
            if name in sections:
                raise DSLError(f"duplicate section [{name}]", n, body.index("[") + 1)
            sections[name] = []
            current = name
            continue
        if current is None:
            raise DSLError("content before the first section header", n, 1)
        sections[current].append(_Line(n, stripped, len(body) - len(body.lstrip()) + 1))
    return sections


# expressions ---------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*^()]))")


@dataclass
class _Token:
    kind: str
    value: str
    column: int


def tokenize(line: _Line) -> list:
    out, pos, text = [], 0, line.text
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise DSLError(f"unexpected character {text[col]!r}", line.number, line.offset + col)
        kind = m.lastgroup
        out.append(_Token(kind, m.group(kind), line.offset + m.start(kind)))
        pos = m.end()
    return out


class _Parser:
    """Recursive descent: expr := term (+|- term)*; term := unary ((*|^) unary)*; power := atom (^ INT)*."""

    def __init__(self, line: _Line, resolve):
        self.line = line
        self.tokens = tokenize(line)
        self.pos = 0
        self.resolve = resolve

    def error(self, message, token=None):
        token = token or (self.tokens[self.pos] if self.pos < len(self.tokens) else None)
        col = token.column if token else self.line.offset + len(self.line.text)
        return DSLError(message, self.line.number, col)

    def peek(self, value=None):
        if self.pos >= len(self.tokens):
            return None
        t = self.tokens[self.pos]
        return t if value is None or t.value == value else None

    def expect(self, value):
        t = self.peek(value)
        if t is None:
            raise self.error(f"expected {value!r}")
        self.pos += 1
        return t

    def parse(self) -> Form:
        if not self.tokens:
            raise self.error("empty expression")
        f = self.expr()
        if self.pos != len(self.tokens):
            raise self.error(f"unexpected {self.tokens[self.pos].value!r}")
        return f

    def expr(self) -> Form:
        f = self.term()
        while self.peek("+") or self.peek("-"):
            op = self.tokens[self.pos]
            self.pos += 1
            g = self.term()
            f = self.combine(f, g, op)
        return f

    def combine(self, f, g, op):
        if f.is_zero() and not f.degree == g.degree:
            f = Form(g.degree)
        if g.is_zero() and not f.degree == g.degree:
            g = Form(f.degree)
        if f.degree != g.degree:
            raise self.error(f"cannot add forms of degree {f.degree} and {g.degree}", op)
        return f + g if op.value == "+" else f - g

    def term(self) -> Form:
        f = self.unary()
        while self.peek("*") or self.peek("^"):
            self.pos += 1
            f = wedge(f, self.unary())
        return f

    def power(self) -> Form:
        # x^n with an integer literal n is a power, which is also its wedge power
        f = self.atom()
        while (self.peek("^") and self.pos + 1 < len(self.tokens)
               and re.fullmatch(r"\d+", self.tokens[self.pos + 1].value)):
            n = int(self.tokens[self.pos + 1].value)
            self.pos += 2
            out = Form.scalar(Scalar.const(1))
            for _ in range(n):
                out = wedge(out, f)
            f = out
        return f

    def unary(self) -> Form:
        if self.peek("-"):
            self.pos += 1
            return -self.unary()
        if self.peek("+"):
            self.pos += 1
            return self.unary()
        return self.power()

    def atom(self) -> Form:
        t = self.peek()
        if t is None:
            raise self.error("unexpected end of expression")
        self.pos += 1
        if t.kind == "num":
            num, _, den = t.value.partition("/")
            if den and int(den) == 0:
                raise self.error("zero denominator", t)
            return Form.scalar(Scalar.const(Fraction(int(num), int(den or 1))))
        if t.value == "(":
            f = self.expr()
            self.expect(")")
            return f
        if t.kind == "ident":
            if t.value == "d" and self.peek("("):
                self.pos += 1
                name = self.peek()
                if name is None or name.kind != "ident":
                    raise self.error("expected an identifier inside d(...)")
                self.pos += 1
                self.expect(")")
                return self.resolve(name, derivative=True, line=self.line)
            return self.resolve(t, derivative=False, line=self.line)
        raise self.error(f"unexpected {t.value!r}", t)


def _as_scalar(f: Form, line: _Line) -> Scalar:
    if f.is_zero():
        return Scalar()
    if f.degree != 0:
        raise DSLError(f"expected a scalar, got a {f.degree}-form", line.number, line.offset)
    return f.coefficient(())


# system files ----------------------------------------------------------------

def _split_assignment(line: _Line, lhs_pattern: str) -> tuple:
    m = re.fullmatch(lhs_pattern + r"\s*=\s*(.*)", line.text)
    if not m:
        raise DSLError("malformed equation", line.number, line.offset)
    rhs_start = m.start(m.lastindex)
    rhs = _Line(line.number, m.group(m.lastindex), line.offset + rhs_start)
    return m.group(1), rhs


def parse_context(text: str) -> tuple:
    """``(ctx, sections)`` with the generators, symbols and tables filled in."""
    sections = split_sections(text, SYSTEM_SECTIONS)
    for name in REQUIRED_SECTIONS:
        if name not in sections:
            raise DSLError(f"missing section [{name}]")

    names, alias_lines = [], []
    for line in sections["generators"]:
        if "=" in line.text:
            alias_lines.append(line)
        else:
            names.extend(line.text.split())
    for n in names:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", n) or n == "d":
            raise DSLError(f"bad generator name {n!r}", sections["generators"][0].number)
    if len(set(names)) != len(names):
        raise DSLError("duplicate generator name")
    ctx = CoframeContext(names)
    for line in alias_lines:
        m = re.fullmatch(r"([A-Za-z_]\w*)\s*=\s*(-?)\s*([A-Za-z_]\w*)", line.text)
        if not m:
            raise DSLError("alias must read 'name = target' or 'name = -target'", line.number, line.offset)
        if m.group(3) not in ctx.index:
            raise UndeclaredIdentifierError(m.group(3), line.number, line.offset + m.start(3))
        if m.group(1) in ctx.index or m.group(1) in ctx.aliases:
            raise DSLError(f"alias {m.group(1)!r} clashes with an existing name", line.number, line.offset)
        ctx.aliases[m.group(1)] = (ctx.index[m.group(3)], -1 if m.group(2) else 1)

    for line in sections.get("symbols", []):
        kind, sep, rest = line.text.partition(":")
        kind = kind.strip()
        if not sep or kind not in SYMBOL_KINDS:
            raise DSLError(f"symbol lines read 'kind: names' with kind in {sorted(SYMBOL_KINDS)}",
                           line.number, line.offset)
        for n in rest.split():
            if n in ctx.index or n in ctx.aliases:
                raise DSLError(f"symbol {n!r} clashes with a generator", line.number, line.offset)
            try:
                ctx.symbols.declare(n, kind)
            except ValueError as exc:
                raise DSLError(str(exc), line.number, line.offset) from None
            if kind == "constant":
                ctx.constants.add(n)

    def resolve(token, derivative, line):
        name = token.value
        if name in ctx.index or name in ctx.aliases:
            if not derivative:
                return ctx.gen(name)
            i, sign = ctx.resolve(name)
            if i not in ctx.structure:
                raise DSLError(f"d({name}) used before its structure equation", line.number, token.column)
            return exterior_derivative(ctx.gen(name), ctx)
        if name in ctx.symbols or name in relations:
            if derivative:
                return ctx.d_scalar(Scalar.symbol(name))
            return Form.scalar(Scalar.symbol(name))
        raise UndeclaredIdentifierError(name, line.number, token.column)

    relations = {}
    for line in sections.get("relations", []):
        lhs, rhs = _split_assignment(line, r"([A-Za-z_]\w*)")
        if lhs in ctx.index or lhs in ctx.aliases:
            raise DSLError(f"relation target {lhs!r} is a generator", line.number, line.offset)
        relations[lhs] = _as_scalar(_Parser(rhs, resolve).parse(), rhs)
    ctx.relations.update(relations)

    structure = {}
    for line in sections["structure"]:
        lhs, rhs = _split_assignment(line, r"d\s+([A-Za-z_]\w*)")
        if lhs not in ctx.index:
            if lhs in ctx.aliases:
                raise DSLError(f"structure equation must use the generator, not alias {lhs!r}",
                               line.number, line.offset)
            raise UndeclaredIdentifierError(lhs, line.number, line.offset)
        if lhs in structure:
            raise DSLError(f"second structure equation for {lhs!r}", line.number, line.offset)
        f = _Parser(rhs, resolve).parse()
        if not f.is_zero() and f.degree != 2:
            raise DSLError(f"d {lhs} must be a 2-form", line.number, line.offset)
        structure[lhs] = f
    missing = [n for n in names if n not in structure]
    if missing:
        raise DSLError(f"no structure equation for {missing}")
    ctx.with_tables(structure)

    derivs = {}
    for line in sections.get("derivatives", []):
        lhs, rhs = _split_assignment(line, r"d\s+([A-Za-z_]\w*)")
        if lhs not in ctx.symbols:
            raise UndeclaredIdentifierError(lhs, line.number, line.offset)
        if lhs in derivs:
            raise DSLError(f"second derivative entry for {lhs!r}", line.number, line.offset)
        f = _Parser(rhs, resolve).parse()
        if not f.is_zero() and f.degree != 1:
            raise DSLError(f"d {lhs} must be a 1-form", line.number, line.offset)
        derivs[lhs] = f
    ctx.with_tables({}, derivs)
    return ctx, sections, resolve


def parse_form(text: str, ctx: CoframeContext) -> Form:
    """Parse one expression against an existing context."""
    line = _Line(1, text.strip(), 1)

    def resolve(token, derivative, line):
        name = token.value
        if name in ctx.index or name in ctx.aliases:
            g = ctx.gen(name)
            return exterior_derivative(g, ctx) if derivative else g
        if name in ctx.symbols or name in ctx.relations:
            s = Scalar.symbol(name)
            return ctx.d_scalar(s) if derivative else Form.scalar(s)
        raise UndeclaredIdentifierError(name, line.number, token.column)

    return _Parser(line, resolve).parse()


def parse_system(text: str) -> ExteriorSystem:
    ctx, sections, resolve = parse_context(text)
    ideal = []
    for line in sections.get("ideal", []):
        f = _Parser(line, resolve).parse()
        if not f.is_zero():
            ideal.append(f)
    lines = sections["independence"]
    if len(lines) != 1:
        raise DSLError("[independence] takes exactly one line")
    omega = _Parser(lines[0], resolve).parse()
    try:
        return ExteriorSystem(ctx, ideal, omega)
    except ValueError as exc:
        raise DSLError(str(exc), lines[0].number, lines[0].offset) from None


def print_system(sys: ExteriorSystem) -> str:
    """Canonical text; ``parse_system(print_system(s))`` prints identically."""
    ctx = sys.ctx
    out = ["[generators]", " ".join(ctx.generators)]
    for alias, (i, sign) in sorted(ctx.aliases.items()):
        out.append(f"{alias} = {'-' if sign < 0 else ''}{ctx.generators[i]}")
    kinds = sorted({ctx.symbols.kind(n) for n in ctx.symbols.names()})
    if kinds:
        out.append("[symbols]")
        for kind in kinds:
            out.append(f"{kind}: " + " ".join(ctx.symbols.names(kind)))
    out.append("[structure]")
    for i, name in enumerate(ctx.generators):
        out.append(f"d {name} = {ctx.fmt(ctx.structure.get(i, Form(2)))}")
    if ctx.scalar_d:
        out.append("[derivatives]")
        for name in sorted(ctx.scalar_d):
            out.append(f"d {name} = {ctx.fmt(ctx.scalar_d[name])}")
    if ctx.relations:
        out.append("[relations]")
        for name in sorted(ctx.relations):
            out.append(f"{name} = {ctx.relations[name]}")
    out.append("[ideal]")
    out.extend(ctx.fmt(g) for g in sys.generators)
    out.append("[independence]")
    out.append(ctx.fmt(sys.independence))
    return "\n".join(out) + "\n"


def canonical(text: str) -> str:
    return print_system(parse_system(text))


# field files ----------------------------------------------------------------

@dataclass
class FieldFile:
    coords: tuple
    metric: object = None
    coframe: object = None
    fields: dict = field(default_factory=dict)
    box: tuple | None = None


def parse_fields(text: str) -> FieldFile:
    from .numeric.fields import ExprField, MetricField, NumericCoframe, parse_expression

    sections = split_sections(text, FIELD_SECTIONS)
    coords = []
    for line in sections.get("coordinates", []):
        coords.extend(line.text.split())
    coords = tuple(coords)
    if len(set(coords)) != len(coords):
        raise DSLError("duplicate coordinate name")
    n = len(coords)

    def expr(text, line):
        try:
            return parse_expression(text, coords)
        except ValueError as exc:
            raise DSLError(str(exc), line.number, line.offset) from None

    out = FieldFile(coords)
    if "metric" in sections:
        lower = {}
        for line in sections["metric"]:
            m = re.fullmatch(r"g(\d)(\d)\s*=\s*(.+)", line.text)
            if not m:
                raise DSLError("metric lines read 'gij = expr' with i >= j", line.number, line.offset)
            i, j = int(m.group(1)) - 1, int(m.group(2)) - 1
            if not (0 <= j <= i < n):
                raise DSLError("metric entries are given on the lower triangle, 1-based", line.number, line.offset)
            if (i, j) in lower:
                raise DSLError(f"duplicate metric entry g{i + 1}{j + 1}", line.number, line.offset)
            lower[(i, j)] = expr(m.group(3), line)
        out.metric = MetricField.from_lower(coords, lower)
    if "coframe" in sections:
        rows = {}
        for line in sections["coframe"]:
            m = re.fullmatch(r"e(\d+)\s*=\s*(.+)", line.text)
            if not m:
                raise DSLError("coframe lines read 'eK = c1, c2, ...'", line.number, line.offset)
            entries = [s.strip() for s in m.group(2).split(",")]
            if len(entries) != n:
                raise DSLError(f"coframe row needs {n} entries", line.number, line.offset)
            rows[int(m.group(1))] = [ExprField(expr(s, line), coords) for s in entries]
        if sorted(rows) != list(range(1, n + 1)):
            raise DSLError(f"coframe needs rows e1..e{n}")
        out.coframe = NumericCoframe(coords, [rows[k] for k in range(1, n + 1)])
    for line in sections.get("fields", []):
        name, rhs = _split_assignment(line, r"([A-Za-z_]\w*)")
        if name in out.fields:
            raise DSLError(f"duplicate field {name!r}", line.number, line.offset)
        out.fields[name] = ExprField(expr(rhs.text, rhs), coords)
    for line in sections.get("domain", []):
        m = re.fullmatch(r"box\s*=\s*(\S+)\s+(\S+)", line.text)
        if not m:
            raise DSLError("domain line reads 'box = lo hi'", line.number, line.offset)
        lo, hi = float(Fraction(m.group(1))), float(Fraction(m.group(2)))
        if not lo < hi:
            raise DSLError("empty domain box", line.number, line.offset)
        out.box = (lo, hi)
    return out
