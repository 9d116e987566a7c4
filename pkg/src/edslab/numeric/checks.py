"""Residual checks for diagonalising coframes and orthogonal coordinate systems."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations
from math import factorial

import numpy as np
import sympy as sp

from ..blockdiag import GammaField
from .fields import (
    DegenerateMetricError,
    ExprField,
    MetricField,
    NumericCoframe,
    SampleSet,
    SymForm,
    _perm_sign,
    levi_civita,
)


class DependentGradientsError(ValueError):
    pass


class UmbilicError(ValueError):
    pass


class OrthonormalityError(ValueError):
    pass


# Frobenius-type residuals ----------------------------------------------

DEP_PAIRS = [(0, 1, 0), (0, 1, 1), (2, 3, 2), (2, 3, 3)]


@dataclass
class ResidualRecord:
    per_form: list
    worst_point: tuple | None = None

    @property
    def max(self) -> float:
        return max(self.per_form) if self.per_form else 0.0


def _check_metric(metric: MetricField | None, point):
    if metric is not None:
        metric.at(point)


def dep_forms(coframe: NumericCoframe) -> list[ExprField]:
    """Top coefficients of ``eps^a ^ eps^b ^ d eps^c`` for the two blocks."""
    eps = [coframe.form(a) for a in range(4)]
    return [(eps[a] ^ eps[b] ^ eps[c].d()).top() for a, b, c in DEP_PAIRS]


def dep_residual(metric: MetricField, coframe: NumericCoframe, samples: SampleSet) -> ResidualRecord:
    if coframe.dim != 4:
        raise ValueError("dep_residual needs a 4-dimensional coframe")
    forms = dep_forms(coframe)
    worst, where = [0.0] * 4, None
    for p in samples:
        _check_metric(metric, p)
        for k, f in enumerate(forms):
            v = abs(f(p))
            if v > worst[k]:
                worst[k] = v
                where = tuple(p)
    return ResidualRecord(worst, where)


def diag3_residual(metric: MetricField, coframe: NumericCoframe, samples: SampleSet) -> ResidualRecord:
    if coframe.dim != 3:
        raise ValueError("diag3_residual needs a 3-dimensional coframe")
    forms = [(coframe.form(i) ^ coframe.form(i).d()).top() for i in range(3)]
    worst, where = [0.0] * 3, None
    for p in samples:
        _check_metric(metric, p)
        for k, f in enumerate(forms):
            v = abs(f(p))
            if v > worst[k]:
                worst[k] = v
                where = tuple(p)
    return ResidualRecord(worst, where)


# Hodge star ------------------------------------------------------------


def hodge_star(form: dict, metric: MetricField, point) -> dict:
    """``*alpha`` for a k-form given as ``{increasing index tuple: value}``.

    Orientation ``dx^1 ^ ... ^ dx^n`` and volume factor ``sqrt|det g|``.
    """
    g = metric.at(point)
    n = metric.dim
    ginv = np.linalg.inv(g)
    vol = np.sqrt(abs(np.linalg.det(g)))
    degrees = {len(k) for k in form}
    if len(degrees) > 1:
        raise ValueError("mixed-degree form")
    k = degrees.pop() if degrees else 0
    # raise all indices of the full antisymmetric component array
    full = np.zeros((n,) * k) if k else np.array(0.0)
    for idx, v in form.items():
        for perm in permutations(range(k)):
            full[tuple(idx[i] for i in perm)] = _perm_sign(perm) * v
    raised = full
    for axis in range(k):
        raised = np.moveaxis(np.tensordot(ginv, raised, axes=([1], [axis])), 0, axis)
    eps = levi_civita(n)
    out = {}
    for rest in combinations(range(n), n - k):
        total = 0.0
        for idx in permutations(range(n), k) if k else [()]:
            if set(idx) & set(rest):
                continue
            total += raised[idx] * eps[idx + rest]
        val = vol * total / factorial(k)
        if val != 0.0:
            out[rest] = val
    return out


def symbolic_hodge_one_form_of_two_form(two: SymForm, metric: MetricField) -> SymForm:
    """``*`` of a 2-form in three dimensions, symbolically."""
    if metric.dim != 3:
        raise ValueError("three dimensions only")
    g = metric.matrix
    ginv = g.inv()
    vol = sp.sqrt(sp.Abs(g.det())) if metric.signature != "Riemannian" else sp.sqrt(g.det())
    comp = {}
    for i, j in combinations(range(3), 2):
        comp[(i, j)] = two.terms.get((i, j), 0)
        comp[(j, i)] = -comp[(i, j)]
    comp.update({(i, i): 0 for i in range(3)})
    up = {(a, b): sum(ginv[a, c] * ginv[b, d] * comp[(c, d)] for c in range(3) for d in range(3))
          for a in range(3) for b in range(3)}
    out = []
    for m in range(3):
        total = 0
        for a, b in permutations(range(3), 2):
            if m in (a, b):
                continue
            total += up[(a, b)] * _perm_sign((a, b, m))
        out.append(vol * total / 2)
    return SymForm.one_form(out, two.coords)


# orthogonal families in three dimensions ----------------------------------


def _covariant_hessian(f: ExprField, metric: MetricField, point) -> np.ndarray:
    n = metric.dim
    H = np.array([[h(point) for h in row] for row in f.hessian()])
    grad = np.array([df(point) for df in f.gradient()])
    G = metric.christoffel
    for a in range(n):
        for b in range(n):
            H[a, b] -= sum(G[c][a][b](point) * grad[c] for c in range(n))
    return H


def _eps_up(metric, point):
    g = metric.at(point)
    return levi_civita(metric.dim) / np.sqrt(abs(np.linalg.det(g)))


@dataclass
class TriorthoRecord:
    orthogonality: float
    surface_forming: float
    simplified: float
    reduced: float


def triortho_at(f: ExprField, g: ExprField, point, metric: MetricField | None = None,
                omega_form: ExprField | None = None) -> TriorthoRecord:
    metric = metric or MetricField.flat(f.coords)
    gm = metric.at(point)
    ginv = np.linalg.inv(gm)
    df = np.array([d(point) for d in f.gradient()])
    dg = np.array([d(point) for d in g.gradient()])
    if np.linalg.norm(np.cross(df, dg)) < 1e-12:
        raise DependentGradientsError(f"dependent gradients at {tuple(point)}")
    Hf = _covariant_hessian(f, metric, point)
    Hg = _covariant_hessian(g, metric, point)
    eps = _eps_up(metric, point)
    up_f, up_g = ginv @ df, ginv @ dg
    bracket = Hf @ up_g - Hg @ up_f  # (grad^d g)(nabla_d nabla_a f) - (grad^d f)(nabla_d nabla_a g)
    simplified = float(np.einsum("abc,b,c,a->", eps, df, dg, bracket))
    reduced = float(np.einsum("abc,b,c,a->", eps, df, dg, Hf @ up_g))
    orth = float(df @ ginv @ dg)
    sf = omega_form(point) / np.sqrt(abs(np.linalg.det(gm))) if omega_form is not None else float("nan")
    return TriorthoRecord(orth, sf, simplified, reduced)


def surface_forming_form(f: ExprField, g: ExprField, metric: MetricField | None = None) -> ExprField:
    """Top coefficient of ``omega ^ d omega`` with ``omega = *(df ^ dg)``."""
    metric = metric or MetricField.flat(f.coords)
    omega = symbolic_hodge_one_form_of_two_form(SymForm.exact(f) ^ SymForm.exact(g), metric)
    return (omega ^ omega.d()).top()


def triply_orthogonal_residuals(f: ExprField, g: ExprField, samples: SampleSet,
                                metric: MetricField | None = None) -> TriorthoRecord:
    """Maximum absolute value of each quantity over the samples."""
    top = surface_forming_form(f, g, metric)
    recs = [triortho_at(f, g, p, metric, top) for p in samples]
    return TriorthoRecord(*(max(abs(getattr(r, k)) for r in recs)
                            for k in ("orthogonality", "surface_forming", "simplified", "reduced")))


# lines of curvature --------------------------------------------------------


@dataclass
class CurvatureLine:
    direction: np.ndarray
    residual: float
    umbilic: bool
    eigenvalues: tuple


def _tangent_basis(normal: np.ndarray, gm: np.ndarray) -> np.ndarray:
    """Orthonormal (w.r.t. ``gm``) basis of the vectors annihilated by the covector ``normal``."""
    n = len(normal)
    N = np.linalg.inv(gm) @ normal
    N = N / np.sqrt(N @ gm @ N)
    vecs = []
    candidates = list(np.eye(n))
    while len(vecs) < n - 1:
        best = None
        for i, c in enumerate(candidates):
            v = c - (N @ gm @ c) * N
            for u in vecs:
                v = v - (u @ gm @ v) * u
            nv = np.sqrt(abs(v @ gm @ v))
            if best is None or nv > best[0] + 1e-14:
                best = (nv, i, v)
        nv, i, v = best
        candidates.pop(i)
        vecs.append(v / nv)
    return np.array(vecs)


def curvature_line_residual(f: ExprField, point, X, metric: MetricField | None = None) -> float:
    """``|eps^{abc} (nabla_b f) X_c X^d (nabla_d nabla_a f)|`` for a direction ``X`` (upper index)."""
    metric = metric or MetricField.flat(f.coords)
    gm = metric.at(point)
    df = np.array([d(point) for d in f.gradient()])
    H = _covariant_hessian(f, metric, point)
    X = np.asarray(X, dtype=float)
    Xlow = gm @ X
    return float(abs(np.einsum("abc,b,c,a->", _eps_up(metric, point), df, Xlow, H @ X)))


def line_of_curvature(f: ExprField, point, metric: MetricField | None = None,
                      umbilic_tol: float = 1e-9) -> CurvatureLine:
    """Principal direction of the level set of ``f`` with the larger principal curvature."""
    metric = metric or MetricField.flat(f.coords)
    gm = metric.at(point)
    df = np.array([d(point) for d in f.gradient()])
    norm = np.sqrt(df @ np.linalg.inv(gm) @ df)
    if norm < 1e-12:
        raise ValueError(f"gradient vanishes at {tuple(point)}")
    E = _tangent_basis(df, gm)
    H = _covariant_hessian(f, metric, point)
    S = E @ H @ E.T / norm
    vals, vecs = np.linalg.eigh(S)
    umbilic = abs(vals[1] - vals[0]) <= umbilic_tol * (1 + np.max(np.abs(vals)))
    X = E.T @ vecs[:, 1]
    X = _fix_sign(X)
    return CurvatureLine(X, curvature_line_residual(f, point, X, metric), bool(umbilic), tuple(vals))


def _fix_sign(X, tol=1e-12):
    for c in X:
        if abs(c) > tol:
            return X if c > 0 else -X
    return X


@dataclass
class DarbouxRecord:
    residual: float
    umbilic_degenerate: bool
    per_point: list = field(default_factory=list)


def darboux_residual(f: ExprField, samples: SampleSet, h: float = 1e-4,
                     metric: MetricField | None = None, gap_tol: float = 1e-6) -> DarbouxRecord:
    """``|eps^{abc} (d_a X_b) X_c|`` for the principal-direction field, by central differences."""
    metric = metric or MetricField.flat(f.coords)
    n = len(f.coords)
    per_point = []
    degenerate = False
    for p in samples:
        base = line_of_curvature(f, p, metric)
        if base.umbilic:
            degenerate = True
            per_point.append(0.0)
            continue
        X0 = base.direction
        dX = np.zeros((n, n))  # dX[a, b] = d_a X_b
        for a in range(n):
            step = np.zeros(n)
            step[a] = h
            pair = []
            for q in (p + step, p - step):
                line = line_of_curvature(f, q, metric)
                vals = line.eigenvalues
                if abs(vals[1] - vals[0]) <= gap_tol * (1 + max(abs(v) for v in vals)):
                    raise UmbilicError(f"eigenvalue crossing near {tuple(p)}")
                Xq = line.direction
                if Xq @ X0 < 0:
                    Xq = -Xq
                pair.append(metric.at(q) @ Xq)
            dX[a] = (pair[0] - pair[1]) / (2 * h)
        Xlow = metric.at(p) @ X0
        per_point.append(float(abs(np.einsum("abc,ab,c->", _eps_up(metric, p), dX, Xlow))))
    return DarbouxRecord(max(per_point) if per_point else 0.0, degenerate, per_point)


# biorthogonal families in four dimensions -----------------------------------


@dataclass
class BiorthoRecord:
    vector_norm: float
    complement: tuple
    contraction_f: float
    contraction_g: float
    raw_complement: tuple = ()


def _biortho_vector(f, g, metric, point):
    gm = metric.at(point)
    ginv = np.linalg.inv(gm)
    df = np.array([d(point) for d in f.gradient()])
    dg = np.array([d(point) for d in g.gradient()])
    Hf = _covariant_hessian(f, metric, point)
    Hg = _covariant_hessian(g, metric, point)
    V = Hg @ (ginv @ df) - Hf @ (ginv @ dg)  # (grad_j f)(nabla^j nabla_i g) - (grad_j g)(nabla^j nabla_i f)
    W = np.einsum("ijkl,j,k,l->i", _eps_up(metric, point), df, dg, V)
    return gm, ginv, df, dg, V, W


def complement_frame(df, dg, gm):
    """Two ``gm``-orthonormal vectors orthogonal to ``grad f``, ``grad g``.

    Gram-Schmidt from the coordinate vectors, taking the one with the largest
    rejection first.
    """
    ginv = np.linalg.inv(gm)
    span = []
    for cov in (df, dg):
        v = ginv @ cov
        for u in span:
            v = v - (u @ gm @ v) * u
        nv = np.sqrt(abs(v @ gm @ v))
        if nv < 1e-12:
            raise DependentGradientsError("gradients are dependent")
        span.append(v / nv)
    raw, out = [], []
    candidates = list(np.eye(len(df)))
    while len(out) < 2:
        best = None
        for i, c in enumerate(candidates):
            v = c.copy()
            for u in span + out:
                v = v - (u @ gm @ v) * u
            nv = np.sqrt(abs(v @ gm @ v))
            if best is None or nv > best[0] + 1e-14:
                best = (nv, i, v)
        nv, i, v = best
        candidates.pop(i)
        raw.append(v)
        out.append(v / nv)
    return out, raw


def biortho_at(f: ExprField, g: ExprField, point, metric: MetricField | None = None) -> BiorthoRecord:
    metric = metric or MetricField.flat(f.coords)
    gm, ginv, df, dg, V, W = _biortho_vector(f, g, metric, point)
    Y, raw = complement_frame(df, dg, gm)
    return BiorthoRecord(float(np.sqrt(abs(W @ gm @ W))),
                         tuple(float(abs(y @ V)) for y in Y),
                         float(abs(W @ df)), float(abs(W @ dg)),
                         tuple(float(r @ V) for r in raw))


def biortho_residuals(f: ExprField, g: ExprField, samples: SampleSet,
                      metric: MetricField | None = None) -> BiorthoRecord:
    recs = [biortho_at(f, g, p, metric) for p in samples]
    return BiorthoRecord(max(r.vector_norm for r in recs),
                         tuple(max(r.complement[k] for r in recs) for k in range(2)),
                         max(r.contraction_f for r in recs), max(r.contraction_g for r in recs),
                         tuple(max(abs(r.raw_complement[k]) for r in recs) for k in range(2)))


# connection and curvature ----------------------------------------------------


def connection_and_curvature(metric: MetricField, coframe: NumericCoframe, point,
                             tol: float = 1e-8) -> GammaField:
    """Orthonormal-frame connection coefficients and ``R1234`` at a point.

    ``d eps^a = -Gamma^a_b ^ eps^b`` with ``Gamma^a_b = sum_c gamma[(a, b, c)] eps^c``,
    solved as the unique solution antisymmetric in ``(a, b)``; ``R1234`` is
    the coordinate Riemann tensor contracted with the dual frame.
    """
    n = coframe.dim
    res = coframe.orthonormality_residual(metric, point)
    if res > tol:
        raise OrthonormalityError(f"coframe not orthonormal at {tuple(point)}: residual {res:.3g}")
    E = coframe.at(point)
    e = np.linalg.inv(E)  # columns are the dual frame vectors
    C = np.zeros((n, n, n))
    for a in range(n):
        dform = coframe.form(a).d()
        F = np.zeros((n, n))
        for (mu, nu), val in dform.at(point).items():
            F[mu, nu], F[nu, mu] = val, -val
        C[a] = e.T @ F @ e  # C[a, b, c] = d eps^a (e_b, e_c)
    # unknowns gamma[a, b, c] for a < b; equation C[a, b, c] = gamma[a,b,c] - gamma[a,c,b] (b < c)
    pairs = list(combinations(range(n), 2))
    unknowns = [(a, b, c) for a, b in pairs for c in range(n)]
    pos = {u: i for i, u in enumerate(unknowns)}

    def coeff(a, b, c):
        if a == b:
            return None, 0
        return (pos[(a, b, c)], 1) if a < b else (pos[(b, a, c)], -1)

    rows, rhs = [], []
    for a in range(n):
        for b, c in pairs:
            row = np.zeros(len(unknowns))
            for (i, s), sign in ((coeff(a, b, c), 1), (coeff(a, c, b), -1)):
                if i is not None:
                    row[i] += sign * s
            rows.append(row)
            rhs.append(C[a, b, c])
    sol = np.linalg.solve(np.array(rows), np.array(rhs))
    gamma = {}
    for (a, b, c), v in zip(unknowns, sol):
        gamma[(a + 1, b + 1, c + 1)] = float(v)
        gamma[(b + 1, a + 1, c + 1)] = -float(v)
    R = 0.0
    if n == 4:
        Rl = metric.riemann_lower
        vals = {k: v(point) for k, v in Rl.items()}

        def Rc(a, b, c, d):
            s = 1
            if a > b:
                a, b, s = b, a, -s
            if c > d:
                c, d, s = d, c, -s
            if a == b or c == d:
                return 0.0
            return s * vals[(a, b, c, d)]

        idx = range(n)
        R = sum(Rc(a, b, c, d) * e[a, 0] * e[b, 1] * e[c, 2] * e[d, 3]
                for a in idx for b in idx for c in idx for d in idx
                if a != b and c != d)
    return GammaField(gamma, float(R))
