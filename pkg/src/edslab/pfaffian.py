"""Linear Pfaffian systems: torsion, absorption, tableau, characters.

A :class:`PfaffianPresentation` splits a coframe into ideal forms
``theta``, independence forms ``omega`` and fiber forms ``pi``.  The
structure equations are read modulo ``theta`` as

    d theta^a = sum A^a_{eps i} pi^eps ^ omega^i + sum_{i<j} c^a_{ij} omega^i ^ omega^j.

Shifts ``pi~^eps = pi^eps + sum_i p^eps_i omega^i`` change ``c`` by a
linear map of ``p``; absorption chooses ``p`` so that the remaining
torsion sits in a fixed complement of that map's image.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Mapping, Sequence

from .forms import CoframeContext, Form, exterior_derivative, wedge
from .linalg import (
    RankInstabilityError,
    evaluate_matrix,
    generic_rank,
    matrix_symbols,
    nullspace,
    random_invertible,
    random_point,
    rank,
    solve_scalar_rhs,
)
from .scalar import Scalar


class NonlinearPfaffianError(ValueError):
    """``d theta`` has a ``pi ^ pi`` term, so the system is not linear."""


class NonGenericPointError(ValueError):
    """A genericity assumption fails at the requested point."""


class PfaffianPresentation:
    """Coframe partition plus ``d theta mod theta``."""

    def __init__(self, ctx: CoframeContext, theta: Sequence[int], omega: Sequence[int],
                 pi: Sequence[int], structure: Mapping[int, Form] | None = None):
        self.ctx = ctx
        self.theta = list(theta)
        self.omega = list(omega)
        self.pi = list(pi)
        all_ids = self.theta + self.omega + self.pi
        if sorted(all_ids) != list(range(ctx.dim)):
            raise ValueError("theta, omega and pi must partition the coframe")
        if structure is None:
            structure = {t: exterior_derivative(Form.generator(t), ctx) for t in self.theta}
        self.structure = {t: structure[t].drop(self.theta) for t in self.theta}
        self._check_linear()

    def _check_linear(self):
        pis = set(self.pi)
        for t, f in self.structure.items():
            for idx, c in f.terms.items():
                if len(pis.intersection(idx)) > 1:
                    names = "^".join(self.ctx.generators[i] for i in idx)
                    raise NonlinearPfaffianError(
                        f"d{self.ctx.generators[t]} contains {c}*{names}; system is not linear")

    def names(self, ids):
        return [self.ctx.generators[i] for i in ids]


@dataclass
class TorsionTensor:
    """``A[(a, eps, i)]`` and ``c[(a, i, j)]`` (i<j) by position in theta/pi/omega."""

    A: dict
    c: dict
    n_theta: int
    n_pi: int
    n_omega: int

    def c_value(self, a, i, j) -> Scalar:
        if i == j:
            return Scalar()
        if i < j:
            return self.c.get((a, i, j), Scalar())
        return -self.c.get((a, j, i), Scalar())

    def is_constant_A(self) -> bool:
        return all(v.is_constant() for v in self.A.values())

    def shift_matrix(self):
        """Rows indexed by ``(a, i<j)``, columns by ``(eps, k)``: the map ``p -> delta c``."""
        rows_idx = [(a, i, j) for a in range(self.n_theta) for i, j in combinations(range(self.n_omega), 2)]
        cols_idx = [(e, k) for e in range(self.n_pi) for k in range(self.n_omega)]
        col_pos = {c: n for n, c in enumerate(cols_idx)}
        rows = [[Scalar()] * len(cols_idx) for _ in rows_idx]
        for r, (a, i, j) in enumerate(rows_idx):
            for e in range(self.n_pi):
                Aj = self.A.get((a, e, j))
                Ai = self.A.get((a, e, i))
                # -sum_{k,l} A_{e l} p_{e k} w^k ^ w^l, coefficient of w^i ^ w^j
                if Aj:
                    rows[r][col_pos[(e, i)]] = rows[r][col_pos[(e, i)]] - Aj
                if Ai:
                    rows[r][col_pos[(e, j)]] = rows[r][col_pos[(e, j)]] + Ai
        return rows, rows_idx, cols_idx

    def c_vector(self, rows_idx):
        return [self.c.get(key, Scalar()) for key in rows_idx]


def extract_torsion(sys: PfaffianPresentation) -> TorsionTensor:
    pos_pi = {g: n for n, g in enumerate(sys.pi)}
    pos_om = {g: n for n, g in enumerate(sys.omega)}
    A, c = {}, {}
    for a, t in enumerate(sys.theta):
        for idx, coeff in sys.structure[t].terms.items():
            g1, g2 = idx
            if g1 in pos_pi and g2 in pos_om:
                A[(a, pos_pi[g1], pos_om[g2])] = coeff
            elif g2 in pos_pi and g1 in pos_om:
                A[(a, pos_pi[g2], pos_om[g1])] = -coeff
            elif g1 in pos_om and g2 in pos_om:
                i, j = pos_om[g1], pos_om[g2]
                c[(a, i, j) if i < j else (a, j, i)] = coeff if i < j else -coeff
            else:
                names = "^".join(sys.ctx.generators[g] for g in idx)
                raise NonlinearPfaffianError(f"unexpected term {coeff}*{names} in d{sys.ctx.generators[t]}")
    return TorsionTensor(A, c, len(sys.theta), len(sys.pi), len(sys.omega))


def reconstruct(sys: PfaffianPresentation, tensor: TorsionTensor) -> dict:
    """Rebuild ``d theta mod theta`` from ``(A, c)``."""
    out = {}
    for a, t in enumerate(sys.theta):
        f = Form(2)
        for (b, e, i), coeff in tensor.A.items():
            if b == a:
                f = f + wedge(Form.generator(sys.pi[e]), Form.generator(sys.omega[i])) * coeff
        for (b, i, j), coeff in tensor.c.items():
            if b == a:
                f = f + wedge(Form.generator(sys.omega[i]), Form.generator(sys.omega[j])) * coeff
        out[t] = f
    return out


@dataclass
class AbsorptionSolution:
    """Shift coefficients ``p[(eps, i)]`` and the remaining torsion ``residual[(a, i, j)]``."""

    p: dict
    residual: dict
    complement: list = field(default_factory=list)

    def residual_rows(self) -> set:
        return {a for (a, _, _), v in self.residual.items() if v}


def apply_shift(tensor: TorsionTensor, p: Mapping) -> dict:
    """Torsion after ``pi -> pi + p omega``; returns the new ``c`` map."""
    rows, rows_idx, cols_idx = tensor.shift_matrix()
    pv = [Scalar.coerce(p.get(c, Scalar())) for c in cols_idx]
    out = {}
    for r, key in enumerate(rows_idx):
        val = tensor.c.get(key, Scalar())
        for coeff, x in zip(rows[r], pv):
            if coeff and x:
                val = val + coeff * x
        if val:
            out[key] = val
    return out


def absorb_torsion(sys: PfaffianPresentation, tensor: TorsionTensor,
                   prefer: Sequence[tuple] | None = None) -> AbsorptionSolution:
    """Least-residual absorption for constant ``A``.

    Complement coordinates are picked greedily in ``prefer`` order (default:
    natural order of ``(a, i, j)``); free shift parameters are set to zero.
    """
    if not tensor.is_constant_A():
        raise ValueError("absorption needs constant coefficients A")
    rows, rows_idx, cols_idx = tensor.shift_matrix()
    L = [[x.constant_value() for x in row] for row in rows]
    order = list(prefer) if prefer else []
    order += [k for k in rows_idx if k not in order]
    position = {k: n for n, k in enumerate(rows_idx)}
    basis = [list(col) for col in zip(*L)] if L and L[0] else []
    current = rank(basis) if basis else 0
    complement = []
    for key in order:
        unit = [Fraction(int(n == position[key])) for n in range(len(rows_idx))]
        trial = rank(basis + [unit])
        if trial > current:
            basis.append(unit)
            complement.append(key)
            current = trial
    # unknowns: all shifts, then the residual components on the complement
    system = [row + [Fraction(-int(position[k] == r)) for k in complement] for r, row in enumerate(L)]
    rhs = [-v for v in tensor.c_vector(rows_idx)]
    x = solve_scalar_rhs(system, rhs, len(cols_idx) + len(complement))
    p = {c: v for c, v in zip(cols_idx, x) if v}
    residual = {k: v for k, v in zip(complement, x[len(cols_idx):]) if v}
    return AbsorptionSolution(p, residual, complement)


def in_shift_image(tensor: TorsionTensor, difference: Mapping) -> bool:
    """Is ``difference`` (a ``c``-map) absorbable by some shift?"""
    rows, rows_idx, cols_idx = tensor.shift_matrix()
    L = [[x.constant_value() for x in row] for row in rows]
    rhs = [Scalar.coerce(difference.get(k, Scalar())) for k in rows_idx]
    return solve_scalar_rhs(L, rhs, len(cols_idx)) is not None


def homogeneous_shifts(tensor: TorsionTensor) -> list[dict]:
    """Basis of shifts that leave the torsion unchanged."""
    rows, rows_idx, cols_idx = tensor.shift_matrix()
    L = [[x.constant_value() for x in row] for row in rows]
    return [{c: v for c, v in zip(cols_idx, vec) if v} for vec in nullspace(L, len(cols_idx))]


# tableau -------------------------------------------------------------


@dataclass
class Tableau:
    """Matrix of fiber-form combinations with linear side relations.

    ``entries[a][i]`` maps basis names to Scalar coefficients; each relation
    is such a map that must vanish.  Relation coefficients may be symbolic
    (treated as generic).
    """

    basis: list
    entries: list
    relations: list = field(default_factory=list)
    row_names: list = field(default_factory=list)

    @property
    def shape(self):
        return len(self.entries), len(self.entries[0]) if self.entries else 0

    def without_relations(self) -> "Tableau":
        return Tableau(self.basis, self.entries, [], self.row_names)

    def vector(self, combo: Mapping) -> list:
        return [Scalar.coerce(combo.get(b, Scalar())) for b in self.basis]

    def symbols(self) -> set:
        rows = [self.vector(e) for row in self.entries for e in row]
        rows += [self.vector(r) for r in self.relations]
        return matrix_symbols(rows)

    @classmethod
    def from_torsion(cls, sys: PfaffianPresentation, tensor: TorsionTensor) -> "Tableau":
        basis = sys.names(sys.pi)
        entries = []
        for a in range(tensor.n_theta):
            row = []
            for i in range(tensor.n_omega):
                row.append({basis[e]: tensor.A[(a, e, i)] for e in range(tensor.n_pi) if (a, e, i) in tensor.A})
            entries.append(row)
        return cls(basis, entries, [], sys.names(sys.theta))


@dataclass
class CharacterVector:
    s: tuple
    r1: int | None = None

    @property
    def total(self) -> int:
        return sum(self.s)

    @property
    def weighted(self) -> int:
        return sum((k + 1) * s for k, s in enumerate(self.s))

    @property
    def dimA1(self):
        return self.r1


def _quotient_rank(vectors, relations):
    return rank(vectors + relations) - rank(relations)


def characters_for_sigma(tab: Tableau, sigma, point: Mapping) -> tuple:
    """Reduced characters for one change of independence basis and one point."""
    n_rows, n_cols = tab.shape
    rel = [[x.evaluate(point) for x in tab.vector(r)] for r in tab.relations]
    num = [[[x.evaluate(point) for x in tab.vector(tab.entries[a][i])] for i in range(n_cols)]
           for a in range(n_rows)]
    cols = []
    for j in range(n_cols):
        col = []
        for a in range(n_rows):
            v = [Fraction(0)] * len(tab.basis)
            for i in range(n_cols):
                s = sigma[i][j]
                if s:
                    v = [x + s * y for x, y in zip(v, num[a][i])]
            col.append(v)
        cols.append(col)
    out, seen, prev = [], [], 0
    for j in range(n_cols):
        seen = seen + cols[j]
        r = _quotient_rank(seen, rel)
        out.append(r - prev)
        prev = r
    return tuple(out)


def reduced_characters(tab: Tableau, seed: int = 0, trials: int = 3, sigma=None) -> CharacterVector:
    """``s'_k`` from incremental column ranks of ``pi . sigma``.

    Each trial draws a random invertible ``sigma`` (unless one is given) and
    random values for the symbols in the tableau; all trials must agree.
    """
    names = tab.symbols()
    results = []
    for t in range(trials):
        rng = random.Random(f"chars:{seed}:{t}")
        point = random_point(names, rng)
        sig = sigma if sigma is not None else random_invertible(tab.shape[1], rng)
        results.append(characters_for_sigma(tab, sig, point))
    if len(set(results)) != 1:
        raise RankInstabilityError(f"character trials disagree: {results}", results)
    return CharacterVector(results[0])


def prolongation_equations(tab: Tableau):
    """Homogeneous linear system for shifts ``P[eps][j]`` preserving the tableau.

    Unknown ``(eps, j)`` is the ``omega^j`` coefficient of the shift of basis
    form ``eps``.  Equations: symmetry of ``sum_eps A^a_{eps i} P_{eps j}`` in
    ``(i, j)`` for each row ``a``, and every relation applied to each
    ``P[.][j]``.
    """
    n_rows, n_cols = tab.shape
    nb = len(tab.basis)
    unknowns = [(e, j) for e in range(nb) for j in range(n_cols)]
    pos = {u: n for n, u in enumerate(unknowns)}
    rows = []
    for a in range(n_rows):
        coeffs = [tab.vector(tab.entries[a][i]) for i in range(n_cols)]
        for i, j in combinations(range(n_cols), 2):
            row = [Scalar()] * len(unknowns)
            for e in range(nb):
                if coeffs[i][e]:
                    row[pos[(e, j)]] = row[pos[(e, j)]] + coeffs[i][e]
                if coeffs[j][e]:
                    row[pos[(e, i)]] = row[pos[(e, i)]] - coeffs[j][e]
            if any(row):
                rows.append(row)
    for rel in tab.relations:
        vec = tab.vector(rel)
        for j in range(n_cols):
            row = [Scalar()] * len(unknowns)
            for e in range(nb):
                if vec[e]:
                    row[pos[(e, j)]] = vec[e]
            rows.append(row)
    return rows, unknowns


def degree_of_indeterminacy(tab: Tableau, seed: int = 0, trials: int = 3,
                            basis_subset: Sequence[str] | None = None) -> int:
    """Dimension of the space of admissible shifts (generic in symbols).

    With ``basis_subset`` only the shifts of those forms are unknowns (the
    others are held at zero), which gives block contributions when the
    equations decouple.
    """
    rows, unknowns = prolongation_equations(tab)
    if basis_subset is not None:
        keep = [n for n, (e, _) in enumerate(unknowns) if tab.basis[e] in set(basis_subset)]
        rows = [[row[n] for n in keep] for row in rows]
        rows = [r for r in rows if any(r)]
        n_unknowns = len(keep)
    else:
        n_unknowns = len(unknowns)
    if not rows:
        return n_unknowns
    return n_unknowns - generic_rank(rows, seed=seed, trials=trials)


def prolongation_nullspace(tab: Tableau, point: Mapping, basis_subset: Sequence[str] | None = None):
    """Exact nullspace basis at a numeric point, with the unknown labels."""
    rows, unknowns = prolongation_equations(tab)
    keep = list(range(len(unknowns)))
    if basis_subset is not None:
        keep = [n for n, (e, _) in enumerate(unknowns) if tab.basis[e] in set(basis_subset)]
    num = evaluate_matrix([[row[n] for n in keep] for row in rows], point)
    return nullspace(num, len(keep)), [unknowns[n] for n in keep]


@dataclass
class InvolutivityVerdict:
    involutive: bool
    torsion_free: bool
    weighted_sum: int
    r1: int
    characters: tuple

    @property
    def certificate(self) -> tuple:
        return (self.weighted_sum, self.r1)


def involutivity_verdict(residual_zero: bool, chars: CharacterVector, r1: int) -> InvolutivityVerdict:
    """Involutive iff the essential torsion vanishes and ``sum k s'_k = r1``."""
    w = chars.weighted
    return InvolutivityVerdict(bool(residual_zero) and w == r1, bool(residual_zero), w, r1, chars.s)


def change_tableau_basis(tab: Tableau, basis: Sequence[str], images: Mapping[str, Mapping]) -> Tableau:
    """Rewrite a tableau whose old basis forms are ``images[old]`` (combos of ``basis``)."""

    def convert(combo):
        out = {}
        for old, coeff in combo.items():
            for new, c in images[old].items():
                out[new] = Scalar.coerce(out.get(new, Scalar())) + Scalar.coerce(c) * coeff
        return {k: v for k, v in out.items() if v}

    entries = [[convert(e) for e in row] for row in tab.entries]
    relations = [convert(r) for r in tab.relations]
    return Tableau(list(basis), entries, relations, list(tab.row_names))
