"""Closed-form scalar fields, metrics and coframes on R^n.

Expressions are sympy trees over declared coordinates; derivatives are
symbolic and evaluation goes through ``math`` so that domain errors (square
root of a negative number, say) surface as :class:`DomainError`.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations, permutations, product
from typing import Mapping, Sequence

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

ALLOWED_FUNCTIONS = {"exp": sp.exp, "sin": sp.sin, "cos": sp.cos, "sqrt": sp.sqrt}
_TRANSFORMS = standard_transformations + (convert_xor,)


class DomainError(ValueError):
    """Evaluation left the domain of an elementary function."""


class DegenerateMetricError(ValueError):
    """The metric is (numerically) singular at a sample point."""


def coordinate_symbols(names: Sequence[str]):
    return tuple(sp.Symbol(n, real=True) for n in names)


def parse_expression(text: str, coords: Sequence[str]) -> sp.Expr:
    """Parse ``text`` with only the coordinates and ``exp/sin/cos/sqrt`` in scope.

    ``^`` means power.  Decimal literals are read as exact rationals.
    """
    syms = dict(zip(coords, coordinate_symbols(coords)))
    local = dict(ALLOWED_FUNCTIONS)
    local.update(syms)
    try:
        expr = parse_expr(text, local_dict=local, global_dict={"Integer": sp.Integer, "Float": sp.Float,
                                                               "Rational": sp.Rational, "Symbol": sp.Symbol},
                          transformations=_TRANSFORMS)
    except (SyntaxError, TypeError, sp.SympifyError) as exc:
        raise ValueError(f"cannot parse expression {text!r}: {exc}") from None
    unknown = {s.name for s in expr.free_symbols} - set(coords)
    if unknown:
        raise ValueError(f"undeclared identifier(s) {sorted(unknown)} in {text!r}")
    for f in expr.atoms(sp.Function):
        if type(f) not in (sp.exp, sp.sin, sp.cos) and not isinstance(f, sp.Pow):
            raise ValueError(f"unsupported function {f.func} in {text!r}")
    return sp.nsimplify(expr, rational=True) if expr.has(sp.Float) else expr


class ExprField:
    """A scalar field given in closed form."""

    def __init__(self, expr, coords: Sequence[str]):
        self.coords = tuple(coords)
        self.symbols = coordinate_symbols(self.coords)
        if isinstance(expr, str):
            expr = parse_expression(expr, self.coords)
        self.expr = sp.sympify(expr)

    @classmethod
    def constant(cls, value, coords):
        return cls(sp.Rational(value) if not isinstance(value, sp.Basic) else value, coords)

    def _wrap(self, expr):
        return ExprField(expr, self.coords)

    def _other(self, other):
        return other.expr if isinstance(other, ExprField) else sp.sympify(other)

    def __add__(self, other):
        return self._wrap(self.expr + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.expr - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.expr)

    def __mul__(self, other):
        return self._wrap(self.expr * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.expr / self._other(other))

    def __neg__(self):
        return self._wrap(-self.expr)

    def __pow__(self, k):
        return self._wrap(self.expr ** k)

    def diff(self, i: int) -> "ExprField":
        return self._wrap(sp.diff(self.expr, self.symbols[i]))

    def gradient(self) -> list:
        return [self.diff(i) for i in range(len(self.coords))]

    def hessian(self) -> list:
        return [[self.diff(i).diff(j) for j in range(len(self.coords))] for i in range(len(self.coords))]

    @cached_property
    def _fn(self):
        return sp.lambdify(self.symbols, self.expr, modules="math")

    def __call__(self, point) -> float:
        try:
            value = self._fn(*[float(x) for x in point])
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise DomainError(f"{self.expr} undefined at {tuple(point)}: {exc}") from None
        if isinstance(value, complex):
            raise DomainError(f"{self.expr} is complex at {tuple(point)}")
        return float(value)

    def fd_derivative(self, i: int, point, h: float = 1e-5) -> float:
        p = np.array(point, dtype=float)
        e = np.zeros_like(p)
        e[i] = h
        return (self(p + e) - self(p - e)) / (2 * h)

    def __repr__(self):
        return f"ExprField({self.expr})"


class MetricField:
    """Symmetric matrix of ExprFields."""

    def __init__(self, coords: Sequence[str], components, signature: str = "Riemannian"):
        self.coords = tuple(coords)
        n = len(self.coords)
        comps = [[c if isinstance(c, ExprField) else ExprField(c, coords) for c in row] for row in components]
        if len(comps) != n or any(len(r) != n for r in comps):
            raise ValueError("metric must be n x n")
        for i, j in combinations(range(n), 2):
            if sp.simplify(comps[i][j].expr - comps[j][i].expr) != 0:
                raise ValueError(f"metric not symmetric in ({i}, {j})")
        self.components = comps
        self.signature = signature

    @classmethod
    def flat(cls, coords):
        n = len(coords)
        return cls(coords, [[int(i == j) for j in range(n)] for i in range(n)])

    @classmethod
    def from_lower(cls, coords, lower: Mapping[tuple, object], signature="Riemannian"):
        n = len(coords)
        rows = [[lower.get((max(i, j), min(i, j)), 0) for j in range(n)] for i in range(n)]
        return cls(coords, rows, signature)

    @property
    def dim(self):
        return len(self.coords)

    @property
    def matrix(self) -> sp.Matrix:
        return sp.Matrix([[c.expr for c in row] for row in self.components])

    def at(self, point, tol: float = 1e-12) -> np.ndarray:
        g = np.array([[c(point) for c in row] for row in self.components])
        if abs(np.linalg.det(g)) <= tol:
            raise DegenerateMetricError(f"metric degenerate at {tuple(point)}")
        return g

    @cached_property
    def _christoffel_exprs(self):
        g = self.matrix
        ginv = g.inv()
        x = coordinate_symbols(self.coords)
        n = self.dim
        dg = [[[sp.diff(g[i, j], x[k]) for k in range(n)] for j in range(n)] for i in range(n)]
        out = [[[sp.S(0)] * n for _ in range(n)] for _ in range(n)]
        for a, b, c in product(range(n), repeat=3):
            out[a][b][c] = sum(ginv[a, d] * (dg[d][b][c] + dg[d][c][b] - dg[b][c][d]) for d in range(n)) / 2
        return out

    @cached_property
    def christoffel(self) -> list:
        """``Gamma^a_bc`` as ExprFields."""
        n = self.dim
        return [[[ExprField(self._christoffel_exprs[a][b][c], self.coords) for c in range(n)]
                 for b in range(n)] for a in range(n)]

    @cached_property
    def riemann_lower(self) -> dict:
        """``R_abcd`` (all indices down, coordinate basis) for a<b, c<d as ExprFields.

        Convention: ``R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb``.
        """
        n = self.dim
        G = self._christoffel_exprs
        x = coordinate_symbols(self.coords)
        g = self.matrix
        up = {}
        for a, b in product(range(n), repeat=2):
            for c, d in combinations(range(n), 2):
                expr = sp.diff(G[a][d][b], x[c]) - sp.diff(G[a][c][b], x[d])
                expr += sum(G[a][c][e] * G[e][d][b] - G[a][d][e] * G[e][c][b] for e in range(n))
                up[(a, b, c, d)] = expr
        out = {}
        for a, b in combinations(range(n), 2):
            for c, d in combinations(range(n), 2):
                out[(a, b, c, d)] = ExprField(sum(g[a, e] * up[(e, b, c, d)] for e in range(n)), self.coords)
        return out


class NumericCoframe:
    """``eps^a = sum_mu E[a][mu] dx^mu`` with ExprField entries."""

    def __init__(self, coords: Sequence[str], rows):
        self.coords = tuple(coords)
        self.rows = [[c if isinstance(c, ExprField) else ExprField(c, coords) for c in row] for row in rows]
        n = len(self.coords)
        if len(self.rows) != n or any(len(r) != n for r in self.rows):
            raise ValueError("coframe must be n x n")

    @property
    def dim(self):
        return len(self.coords)

    def at(self, point) -> np.ndarray:
        return np.array([[c(point) for c in row] for row in self.rows])

    def form(self, a: int) -> "SymForm":
        return SymForm.one_form([c.expr for c in self.rows[a]], self.coords)

    def orthonormality_residual(self, metric: MetricField, point) -> float:
        E = self.at(point)
        g = metric.at(point)
        eta = np.eye(self.dim)
        if metric.signature == "Lorentzian":
            eta[0, 0] = -1
        return float(np.max(np.abs(E.T @ eta @ E - g)))

    def rotated(self, a: int, b: int, angle) -> "NumericCoframe":
        """Mix ``eps^a`` and ``eps^b`` by a point-dependent angle (expression or ExprField)."""
        phi = angle.expr if isinstance(angle, ExprField) else parse_expression(str(angle), self.coords)
        c, s = sp.cos(phi), sp.sin(phi)
        rows = [[x.expr for x in row] for row in self.rows]
        ra, rb = rows[a], rows[b]
        rows[a] = [c * u + s * v for u, v in zip(ra, rb)]
        rows[b] = [-s * u + c * v for u, v in zip(ra, rb)]
        return NumericCoframe(self.coords, rows)


class SymForm:
    """Coordinate differential form with sympy coefficients: ``{increasing index tuple: expr}``."""

    def __init__(self, degree: int, terms: Mapping[tuple, sp.Expr], coords: Sequence[str]):
        self.degree = degree
        self.coords = tuple(coords)
        self.terms = {k: v for k, v in terms.items() if v != 0}

    @classmethod
    def one_form(cls, comps, coords):
        return cls(1, {(i,): sp.sympify(c) for i, c in enumerate(comps)}, coords)

    @classmethod
    def exact(cls, f: ExprField):
        return cls.one_form([g.expr for g in f.gradient()], f.coords)

    def wedge(self, other: "SymForm") -> "SymForm":
        out = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                idx = k1 + k2
                if len(set(idx)) < len(idx):
                    continue
                sign = _perm_sign(idx)
                key = tuple(sorted(idx))
                out[key] = out.get(key, 0) + sign * v1 * v2
        return SymForm(self.degree + other.degree, out, self.coords)

    __xor__ = wedge

    def d(self) -> "SymForm":
        x = coordinate_symbols(self.coords)
        out = {}
        for k, v in self.terms.items():
            for i in range(len(x)):
                if i in k:
                    continue
                idx = (i,) + k
                key = tuple(sorted(idx))
                out[key] = out.get(key, 0) + _perm_sign(idx) * sp.diff(v, x[i])
        return SymForm(self.degree + 1, out, self.coords)

    def coefficient(self, idx) -> ExprField:
        return ExprField(self.terms.get(tuple(idx), sp.S(0)), self.coords)

    def top(self) -> ExprField:
        return self.coefficient(tuple(range(len(self.coords))))

    def at(self, point) -> dict:
        return {k: ExprField(v, self.coords)(point) for k, v in self.terms.items()}


def _perm_sign(seq) -> int:
    sign = 1
    s = list(seq)
    for i in range(len(s)):
        for j in range(i + 1, len(s)):
            if s[i] > s[j]:
                sign = -sign
    return sign


def levi_civita(n: int) -> np.ndarray:
    eps = np.zeros((n,) * n)
    for p in permutations(range(n)):
        eps[p] = _perm_sign(p)
    return eps


@dataclass
class SampleSet:
    points: np.ndarray
    box: tuple
    tol: float = 1e-12

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        lo, hi = self.box
        if np.any(self.points < lo - 1e-15) or np.any(self.points > hi + 1e-15):
            raise ValueError("sample point outside the declared domain box")

    @classmethod
    def grid(cls, dim: int, n: int, box=(-1.0, 1.0), tol=1e-12):
        axis = np.linspace(box[0], box[1], n)
        pts = np.array(list(product(axis, repeat=dim)))
        return cls(pts, tuple(box), tol)

    @classmethod
    def random(cls, dim: int, count: int, seed: int = 0, box=(-1.0, 1.0), tol=1e-12):
        rng = random.Random(f"samples:{seed}")
        pts = np.array([[rng.uniform(*box) for _ in range(dim)] for _ in range(count)])
        return cls(pts, tuple(box), tol)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)
