"""Exact linear algebra over the rationals and randomized generic rank.

Matrices are lists of rows of :class:`fractions.Fraction`.  Symbolic
matrices (entries are :class:`~edslab.scalar.Scalar`) are ranked by
substituting independent random rationals ``p/q`` with ``p, q`` in
``[1, 10**6]`` and eliminating exactly.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Iterable, Sequence

from .scalar import Scalar


class RankInstabilityError(RuntimeError):
    """Independent randomized trials disagreed."""

    def __init__(self, message, transcripts=None):
        super().__init__(message)
        self.transcripts = transcripts or []


def as_fraction_matrix(rows) -> list[list[Fraction]]:
    return [[x if isinstance(x, Fraction) else Fraction(x) for x in row] for row in rows]


def rref(rows: Sequence[Sequence[Fraction]], ncols: int | None = None):
    """Reduced row echelon form.  Returns ``(matrix, pivot_columns)``."""
    if not rows:
        return [], []
    ncols = len(rows[0]) if ncols is None else ncols
    m, pivots = _rref_all_rows(as_fraction_matrix(rows), ncols)
    return m[:len(pivots)], pivots


def rank(rows) -> int:
    rows = [r for r in rows if any(r)]
    if not rows:
        return 0
    return len(rref(as_fraction_matrix(rows))[1])


def nullspace(rows, ncols: int) -> list[list[Fraction]]:
    """Basis of ``{x : rows @ x = 0}`` (one vector per free column)."""
    rows = [r for r in as_fraction_matrix(rows) if any(r)]
    reduced, pivots = rref(rows, ncols) if rows else ([], [])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, p in zip(reduced, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis


def solve(rows, rhs, ncols: int):
    """One solution of ``rows @ x = rhs`` (free variables zero) or ``None``."""
    aug = [list(r) + [b] for r, b in zip(as_fraction_matrix(rows), rhs)]
    reduced, pivots = rref(aug, ncols + 1)
    if ncols in pivots:
        return None
    x = [Fraction(0)] * ncols
    for row, p in zip(reduced, pivots):
        x[p] = row[ncols]
    return x


def random_rational(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(1, 10**6), rng.randint(1, 10**6))


def random_point(names: Iterable[str], rng: random.Random) -> dict:
    return {n: random_rational(rng) for n in sorted(names)}


def evaluate_matrix(rows, point) -> list[list[Fraction]]:
    return [[Scalar.coerce(x).evaluate(point) for x in row] for row in rows]


def matrix_symbols(rows) -> set:
    out = set()
    for row in rows:
        for x in row:
            if isinstance(x, Scalar):
                out |= x.symbols()
    return out


def generic_rank(rows, seed: int = 0, trials: int = 3, fixed=None) -> int:
    """Rank of a Scalar matrix at random rational points; trials must agree."""
    rows = [list(r) for r in rows]
    names = matrix_symbols(rows) - set(fixed or {})
    if not names:
        return rank(evaluate_matrix(rows, dict(fixed or {})))
    results = []
    for t in range(trials):
        rng = random.Random(f"{seed}:{t}")
        point = random_point(names, rng)
        point.update(fixed or {})
        results.append((t, rank(evaluate_matrix(rows, point))))
    ranks = {r for _, r in results}
    if len(ranks) != 1:
        raise RankInstabilityError(f"randomized rank trials disagree: {results}", results)
    return ranks.pop()


def determinant(rows) -> Fraction:
    m = as_fraction_matrix(rows)
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if m[i][c]), None)
        if p is None:
            return Fraction(0)
        if p != c:
            m[c], m[p] = m[p], m[c]
            det = -det
        det *= m[c][c]
        for i in range(c + 1, n):
            if m[i][c]:
                f = m[i][c] / m[c][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    return det


def symbolic_determinant(rows) -> Scalar:
    """Laplace expansion for small Scalar matrices."""
    n = len(rows)
    if n == 0:
        return Scalar.const(1)
    if n == 1:
        return Scalar.coerce(rows[0][0])
    total = Scalar()
    for j in range(n):
        entry = Scalar.coerce(rows[0][j])
        if not entry:
            continue
        minor = [row[:j] + row[j + 1:] for row in rows[1:]]
        term = entry * symbolic_determinant(minor)
        total = total - term if j % 2 else total + term
    return total


def random_invertible(n: int, rng: random.Random) -> list[list[Fraction]]:
    while True:
        m = [[random_rational(rng) for _ in range(n)] for _ in range(n)]
        if determinant(m):
            return m


def solve_scalar_rhs(rows, rhs, ncols: int):
    """Solve ``rows @ x = rhs`` for a constant matrix and Scalar right-hand side.

    Free variables are set to zero.  Returns ``None`` when inconsistent.
    """
    m = len(rows)
    mat = as_fraction_matrix(rows)
    aug = [mat[i] + [Fraction(int(i == j)) for j in range(m)] for i in range(m)]
    full, pivots = _rref_all_rows(aug, ncols)
    x = [Scalar()] * ncols
    for i, row in enumerate(full):
        combo = Scalar()
        for j, coeff in enumerate(row[ncols:]):
            if coeff:
                combo = combo + Scalar.coerce(rhs[j]) * coeff
        if i < len(pivots):
            x[pivots[i]] = combo
        elif combo:
            return None
    return x


def _rref_all_rows(rows, ncols):
    # like rref on the first ncols columns but keeps every row
    m = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        pivot = next((i for i in range(r, len(m)) if m[i][c]), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots
