"""Integral elements, polar spaces and Cartan's test.

An :class:`ExteriorSystem` is an ideal given by generator forms on a
:class:`~edslab.forms.CoframeContext`, with a decomposable independence
form.  Integral elements transverse to the independence form are written
in the normal form ``v_a = d/d(base_a) + sum lambda * d/d(fiber)``
(:class:`IntegralElementChart`).  Vectors are lists of components on the
generators of the context.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Sequence

from .forms import CoframeContext, Form, exterior_derivative
from .linalg import (
    as_fraction_matrix,
    generic_rank,
    random_invertible,
    rank,
    rref,
)
from .scalar import NonlinearError, Scalar


class ChartMismatchError(ValueError):
    """Chart and system do not fit together."""


class InconsistentSystemError(ValueError):
    """The integral-element equations have no solution."""


class FlagError(ValueError):
    """Flag vectors do not lie in an integral element."""


class ExteriorSystem:
    """Differential ideal with independence condition."""

    def __init__(self, ctx: CoframeContext, generators: Sequence[Form], independence: Form):
        if independence.is_zero():
            raise ValueError("independence form must be nonzero")
        if len(independence.terms) != 1:
            raise ValueError("independence form must be a single decomposable monomial")
        self.ctx = ctx
        self.generators = list(generators)
        self.independence = independence
        self._closure = None

    @property
    def p(self) -> int:
        return self.independence.degree

    @property
    def base(self) -> tuple:
        return next(iter(self.independence.terms))

    def closure(self) -> list[Form]:
        """Generators followed by their exterior derivatives (nonzero ones)."""
        if self._closure is None:
            extra = [exterior_derivative(g, self.ctx) for g in self.generators]
            self._closure = self.generators + [f for f in extra if not f.is_zero()]
        return self._closure


def default_lambda_name(ctx: CoframeContext, base: int, fiber: int) -> str:
    return f"l{ctx.generators[base]}_{ctx.generators[fiber]}"


class IntegralElementChart:
    """Normal-form basis of Omega-transverse p-planes."""

    def __init__(self, sys: ExteriorSystem,
                 lambda_name: Callable[[int, int], object] | None = None):
        self.sys = sys
        ctx = sys.ctx
        self.base = list(sys.base)
        self.fiber = [i for i in range(ctx.dim) if i not in self.base]
        self.p = len(self.base)
        namer = lambda_name or (lambda b, f: default_lambda_name(ctx, b, f))
        self.lam: dict = {}
        for b in self.base:
            for f in self.fiber:
                val = namer(b, f)
                self.lam[(b, f)] = Scalar.coerce(Scalar.symbol(val) if isinstance(val, str) else val)
        names = set()
        for v in self.lam.values():
            names |= v.symbols()
        self.variables = sorted(names)

    def vector(self, a: int, point: dict | None = None) -> list:
        """Basis vector ``v_a`` (a = 0..p-1), optionally evaluated at a point."""
        ctx = self.sys.ctx
        v = [Scalar()] * ctx.dim
        v[self.base[a]] = Scalar.const(1)
        for f in self.fiber:
            val = self.lam[(self.base[a], f)]
            v[f] = val.subs(point) if point else val
        return v

    def vectors(self, point: dict | None = None) -> list:
        return [self.vector(a, point) for a in range(self.p)]


def _normalise(eq: Scalar) -> Scalar:
    return eq.primitive()


def integral_element_equations(sys: ExteriorSystem, chart: IntegralElementChart) -> list[Scalar]:
    """All ``phi(v_I) = 0`` for closure elements of degree <= p."""
    if chart.sys is not sys and chart.sys.ctx is not sys.ctx:
        raise ChartMismatchError("chart was built for a different system")
    if chart.p != sys.p:
        raise ChartMismatchError(f"chart dimension {chart.p} != independence degree {sys.p}")
    vs = chart.vectors()
    seen = {}
    for phi in sys.closure():
        k = phi.degree
        if k > sys.p:
            continue
        for subset in combinations(range(sys.p), k):
            val = phi.evaluate(*[vs[i] for i in subset])
            if val:
                eq = _normalise(val)
                seen.setdefault(eq, None)
    return list(seen)


def linear_system(equations: Sequence[Scalar], variables: Sequence[str]):
    """Coefficient rows and constant column of linear equations."""
    rows, consts = [], []
    for eq in equations:
        coeffs, rest = eq.linear_form(variables)
        rows.append([coeffs.get(v, Scalar()) for v in variables])
        consts.append(rest)
    return rows, consts


def solution_codimension(equations: Sequence[Scalar], variables: Sequence[str] | None = None,
                         seed: int = 0, trials: int = 3) -> int:
    """Rank of a linear system in the chart variables (generic in other symbols)."""
    equations = list(equations)
    if not equations:
        return 0
    if variables is None:
        names = set()
        for e in equations:
            names |= e.symbols()
        variables = sorted(n for n in names if n.startswith("l"))
    rows, consts = linear_system(equations, variables)
    r = generic_rank(rows, seed=seed, trials=trials)
    aug = [row + [-c] for row, c in zip(rows, consts)]
    if generic_rank(aug, seed=seed, trials=trials) > r:
        raise InconsistentSystemError("integral-element equations are inconsistent")
    return r


def integral_point(equations: Sequence[Scalar], variables: Sequence[str],
                   rng: random.Random | None = None) -> dict:
    """Solve constant-coefficient linear equations.

    Free variables get random rationals when ``rng`` is given and stay
    symbolic otherwise; pivot variables are expressed through them.
    """
    variables = list(variables)
    if not equations:
        return {} if rng is None else {v: _free_value(v, rng) for v in variables}
    rows, consts = linear_system(equations, variables)
    for row in rows:
        for x in row:
            if not x.is_constant():
                raise NonlinearError("integral_point needs constant coefficients")
    mat = [[x.constant_value() for x in row] for row in rows]
    n = len(variables)
    # eliminate on [A | I] to carry the symbolic right-hand side along
    aug = [mat[i] + [Fraction(int(i == j)) for j in range(len(rows))] for i in range(len(rows))]
    reduced, pivots = rref(aug, n)
    free = [c for c in range(n) if c not in pivots]
    values = {variables[c]: _free_value(variables[c], rng) for c in free}
    # symbolic free variables stay out of the returned substitution
    point = dict(values) if rng is not None else {}
    for row, p in zip(reduced, pivots):
        rhs = Scalar()
        for j, coeff in enumerate(row[n:]):
            if coeff:
                rhs = rhs - consts[j] * coeff
        for c in free:
            if row[c]:
                rhs = rhs - Scalar.coerce(values[variables[c]]) * row[c]
        point[variables[p]] = rhs
    return {k: Scalar.coerce(v) for k, v in point.items()}


def _free_value(name, rng):
    if rng is None:
        return Scalar.symbol(name)
    from .linalg import random_rational

    return Scalar.const(random_rational(rng))


def _minor(rows, cols) -> Fraction:
    from .linalg import determinant

    return determinant([[row[c] for c in cols] for row in rows])


PLUCKER_COLUMNS = {"A": (0, 1, 2), "B": (0, 1, 3), "C": (1, 2, 3), "D": (0, 2, 3)}


@dataclass
class FlagChart:
    """Flag vectors ``e_i = sum_a e[i][a] v_a`` inside an integral element."""

    e: list

    @classmethod
    def generic(cls, p: int, rng: random.Random) -> "FlagChart":
        return cls(random_invertible(p, rng))

    @classmethod
    def identity(cls, p: int) -> "FlagChart":
        return cls([[Fraction(int(i == j)) for j in range(p)] for i in range(p)])

    @classmethod
    def from_minors(cls, A, B, C, D) -> "FlagChart":
        """A 4-dimensional flag whose ``E_3`` has the given 3x3 minors.

        The normal covector of ``E_3`` in the ``v`` basis is
        ``(-C, D, -B, A)``; a kernel basis is rescaled to hit the minors
        exactly.  All-zero minors give a degenerate (zero) ``E_3``.
        """
        target = {k: Fraction(v) for k, v in zip("ABCD", (A, B, C, D))}
        normal = [-target["C"], target["D"], -target["B"], target["A"]]
        if not any(normal):
            zero = [Fraction(0)] * 4
            return cls([zero, zero, zero, [Fraction(int(j == 0)) for j in range(4)]])
        from .linalg import nullspace

        basis = nullspace([normal], 4)
        chart = cls(basis + [[Fraction(0)] * 4])
        got = chart.minors()
        key = next(k for k in "ABCD" if target[k])
        scale = target[key] / got[key]
        basis[0] = [x * scale for x in basis[0]]
        j = next(j for j in range(4) if normal[j])
        e4 = [Fraction(int(i == j)) for i in range(4)]
        return cls(basis + [e4])

    @property
    def p(self) -> int:
        return len(self.e[0])

    def minors(self) -> dict:
        rows = [list(map(Fraction, r)) for r in self.e[:3]]
        return {k: _minor(rows, cols) for k, cols in PLUCKER_COLUMNS.items()}

    def vectors(self, chart: IntegralElementChart, point: dict) -> list:
        vs = chart.vectors(point)
        out = []
        for row in self.e:
            vec = [Scalar()] * len(vs[0])
            for a, coeff in enumerate(row):
                if coeff:
                    vec = [x + y * coeff for x, y in zip(vec, vs[a])]
            out.append(vec)
        return out


@dataclass
class PolarMatrix:
    """Polar equations of ``E_k``: rows are covectors on the generators."""

    k: int
    rows: list
    fiber: list
    base: list
    rank: int
    annihilators: list = field(default_factory=list)

    def fiber_part(self):
        return [[row[f] for f in self.fiber] for row in self.rows]

    def omega_part(self):
        return [[row[b] for b in self.base] for row in self.rows]


def polar_covectors(sys: ExteriorSystem, vectors: Sequence) -> list:
    """``phi(., e_I)`` for every closure element of degree <= k+1."""
    k = len(vectors)
    out = []
    for phi in sys.closure():
        j = phi.degree
        if j < 1 or j > k + 1:
            continue
        for subset in combinations(range(k), j - 1):
            f = _contract(phi, [vectors[i] for i in subset])
            if f:
                out.append(f)
    return out


def _contract(phi: Form, vectors) -> Form:
    # phi(w, e_1, ..., e_m) = (-1)^m phi(e_1, ..., e_m, w)
    f = phi
    for v in vectors:
        f = f.interior(v)
    return -f if len(vectors) % 2 else f


def _covector_row(form: Form, dim: int) -> list:
    row = [Scalar()] * dim
    for (i,), c in form.terms.items():
        row[i] = c
    return row


def _require_constant(rows):
    out = []
    for row in rows:
        vals = []
        for x in row:
            if not x.is_constant():
                raise FlagError(f"polar entry {x} is not numeric; supply a numeric point")
            vals.append(x.constant_value())
        out.append(vals)
    return out


def _check_integral(sys, vectors):
    for phi in sys.closure():
        if phi.degree > len(vectors) or phi.degree == 0:
            continue
        for subset in combinations(range(len(vectors)), phi.degree):
            val = phi.evaluate(*[vectors[i] for i in subset])
            if val:
                raise FlagError(f"flag is not integral: a closure element gives {val}")


def polar_space(sys: ExteriorSystem, chart: IntegralElementChart, flag: FlagChart,
                point: dict, k: int) -> PolarMatrix:
    """Polar matrix of ``E_k`` (first k flag vectors) at a numeric integral point."""
    vectors = flag.vectors(chart, point)
    _check_integral(sys, vectors)
    covs = polar_covectors(sys, vectors[:k])
    dim = sys.ctx.dim
    rows = _require_constant([_covector_row(f, dim) for f in covs])
    r = rank(rows)
    ann = []
    if rows:
        # covectors vanish on E, so they are determined by their fiber part,
        # which reads directly as a combination of the pi-forms
        fiber_rows = [[row[f] for f in chart.fiber] for row in rows]
        reduced, _ = rref(as_fraction_matrix(fiber_rows))
        ann = [Form(1, {(chart.fiber[i],): x for i, x in enumerate(row) if x}) for row in reduced]
    return PolarMatrix(k, rows, list(chart.fiber), list(chart.base), r, ann)


def cartan_characters(sys: ExteriorSystem, chart: IntegralElementChart, flag: FlagChart,
                      point: dict) -> tuple:
    """``(c_0, ..., c_p)`` with ``c_p = dim - p``."""
    cs = [polar_space(sys, chart, flag, point, k).rank for k in range(sys.p)]
    cs.append(sys.ctx.dim - sys.p)
    return tuple(cs)


@dataclass
class CartanVerdict:
    passes: bool
    sum_ck: int
    codim: int
    characters: tuple

    @property
    def certificate(self) -> tuple:
        return (self.sum_ck, self.codim)


def cartan_test(sys: ExteriorSystem, chart: IntegralElementChart, flag: FlagChart,
                point: dict | None = None, seed: int = 0, trials: int = 3) -> CartanVerdict:
    equations = integral_element_equations(sys, chart)
    codim = solution_codimension(equations, chart.variables, seed=seed, trials=trials)
    if point is None:
        point = integral_point(equations, chart.variables, random.Random(seed))
    cs = cartan_characters(sys, chart, flag, point)
    total = sum(cs[:-1])
    return CartanVerdict(total == codim, total, codim, cs)


def symbolic_polar_matrix(sys: ExteriorSystem, chart: IntegralElementChart, point: dict,
                          names: dict | None = None) -> list:
    """Fiber part of the ``E_{p-1}`` polar matrix as linear forms in the Plücker minors.

    Entries are alternating multilinear in the base components of the
    first p-1 flag vectors, so each is a combination of the
    ``(p-1)x(p-1)`` minors; coefficients are read off at coordinate flags.
    Only nonzero columns are kept.  ``names`` maps minor column tuples to
    symbol names (default: A, B, C, D for p = 4).
    """
    p = sys.p
    names = names or {cols: key for key, cols in PLUCKER_COLUMNS.items()}
    dim = sys.ctx.dim
    vs = chart.vectors(point)
    table = {}
    for cols, name in names.items():
        vectors = [vs[c] for c in cols]
        covs = polar_covectors_at_k(sys, vectors)
        table[name] = [_covector_row(f, dim) for f in covs]
    n_rows = max(len(t) for t in table.values())
    matrix = []
    for r in range(n_rows):
        row = []
        for f in chart.fiber:
            entry = Scalar()
            for name, rows in table.items():
                if r < len(rows) and rows[r][f]:
                    entry = entry + Scalar.symbol(name) * rows[r][f]
            row.append(entry)
        matrix.append(row)
    keep = [j for j in range(len(chart.fiber)) if any(row[j] for row in matrix)]
    return [[row[j] for j in keep] for row in matrix], [chart.fiber[j] for j in keep]


def polar_covectors_at_k(sys, vectors):
    """Covectors from closure elements of degree exactly ``len(vectors)+1``."""
    k = len(vectors)
    out = []
    for phi in sys.closure():
        if phi.degree != k + 1:
            continue
        out.append(_contract(phi, vectors))
    return out


def brute_force_character(sys: ExteriorSystem, vectors: Sequence, rng: random.Random,
                          samples: int | None = None) -> int:
    """Independent route to ``c_k``: evaluate forms on sampled extension vectors.

    The polar space is ``{w : phi(e_I, w) = 0}``; its codimension is the
    rank of the matrix of values ``phi(e_I, w_s)`` over a spanning sample
    of vectors ``w_s`` (random rational vectors, more than the dimension).
    """
    from .linalg import random_rational

    dim = sys.ctx.dim
    k = len(vectors)
    samples = samples or dim + 3
    ws = [[Scalar.const(random_rational(rng)) for _ in range(dim)] for _ in range(samples)]
    rows = []
    for phi in sys.closure():
        j = phi.degree
        if j < 1 or j > k + 1:
            continue
        for subset in combinations(range(k), j - 1):
            args = [vectors[i] for i in subset]
            rows.append([phi.evaluate(w, *args) for w in ws])
    if not rows:
        return 0
    return rank(_require_constant(rows))
