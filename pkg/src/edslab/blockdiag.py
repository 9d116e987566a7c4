"""The block-diagonalisation pipeline for Riemannian 4-metrics.

Everything specific to the orthonormal frame bundle of a 4-manifold lives
here: the canonical coframe and its structure equations, the 4-form system
whose integral manifolds are block-diagonalising coframes, its first
prolongation, the essential torsion ``T``, the restriction to ``{T = 0}``
and the resulting tableau, plus the curvature and Newman-Penrose
constraints that come out of it.

Naming: ``w1..w4`` are the tautological forms, ``w{a}{b}`` (a<b) the
connection forms, ``R{a}{b}{c}{d}`` curvature components,
``R{abcd}_{e}`` their first jets and ``l{c}_{a}{b}`` the integral-element
coordinates lambda_c^a_b.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

from .eds import (
    ExteriorSystem,
    FlagChart,
    IntegralElementChart,
    cartan_test,
    integral_element_equations,
    integral_point,
)
from .forms import CoframeContext, Form, exterior_derivative, riemann, riemann_symbols, wedge
from .linalg import random_point, rank, solve, solve_scalar_rhs, symbolic_determinant
from .pfaffian import (
    AbsorptionSolution,
    InvolutivityVerdict,
    PfaffianPresentation,
    TorsionTensor,
    absorb_torsion,
    NonGenericPointError,
    Tableau,
    apply_shift,
    change_tableau_basis,
    degree_of_indeterminacy,
    extract_torsion,
    involutivity_verdict,
    prolongation_equations,
    reduced_characters,
)
from .scalar import Scalar

N = 4
PAIRS = [(a, b) for a in range(1, N + 1) for b in range(a + 1, N + 1)]
FRAME_GENERATORS = [f"w{a}" for a in range(1, N + 1)] + [f"w{a}{b}" for a, b in PAIRS]


def _aliases(names):
    index = {n: i for i, n in enumerate(names)}
    out = {}
    for a, b in PAIRS:
        out[f"w{b}{a}"] = (index[f"w{a}{b}"], -1)
    return out


def jet_name(symbol: str, e: int) -> str:
    return f"{symbol}_{e}"


def frame_bundle_context(bianchi: bool = True) -> CoframeContext:
    """Canonical coframe of the orthonormal frame bundle.

    ``dw^a = -sum_b w^a_b ^ w^b`` and
    ``dw^a_b = -sum_c w^a_c ^ w^c_b + sum_{c<d} R_abcd w^c ^ w^d``.
    Curvature components get first-jet symbols plus the equivariance terms
    of a tensor on the frame bundle; jets themselves have no derivative.
    """
    ctx = CoframeContext(FRAME_GENERATORS, _aliases(FRAME_GENERATORS))
    w = {a: ctx.gen(f"w{a}") for a in range(1, N + 1)}

    def conn(a, b):
        return Form(1) if a == b else ctx.gen(f"w{a}{b}")

    structure = {}
    for a in range(1, N + 1):
        f = Form(2)
        for b in range(1, N + 1):
            f = f - wedge(conn(a, b), w[b])
        structure[f"w{a}"] = f
    for a, b in PAIRS:
        f = Form(2)
        for c in range(1, N + 1):
            f = f - wedge(conn(a, c), conn(c, b))
        for c, d in PAIRS:
            f = f + wedge(w[c], w[d]) * riemann(a, b, c, d)
        structure[f"w{a}{b}"] = f
    ctx.with_tables(structure)
    if bianchi:
        ctx.enable_bianchi(N)
    ctx.with_tables({}, curvature_derivatives(ctx, w, conn, bianchi))
    _declare(ctx, bianchi)
    return ctx


def curvature_derivatives(ctx, w, conn, bianchi):
    table = {}
    for name in riemann_symbols(N, bianchi):
        a, b, c, d = (int(ch) for ch in name[1:])
        f = Form(1)
        for e in range(1, N + 1):
            f = f + w[e] * Scalar.symbol(jet_name(name, e))
        for g in range(1, N + 1):
            f = f + conn(g, a) * riemann(g, b, c, d, bianchi)
            f = f + conn(g, b) * riemann(a, g, c, d, bianchi)
            f = f + conn(g, c) * riemann(a, b, g, d, bianchi)
            f = f + conn(g, d) * riemann(a, b, c, g, bianchi)
        table[name] = ctx.reduce_form(f)
    return table


def _declare(ctx, bianchi):
    for name in riemann_symbols(N, bianchi):
        ctx.symbols.declare(name, "curvature")
        for e in range(1, N + 1):
            ctx.symbols.declare(jet_name(name, e), "jet")


# the 4-form system ---------------------------------------------------

THETA_PAIRS = [(1, 2, 1), (1, 2, 2), (3, 4, 3), (3, 4, 4)]


def build_theta_system(ctx: CoframeContext | None = None) -> ExteriorSystem:
    """``Theta^1..4 = w^a ^ w^b ^ d w^c`` for the two blocks."""
    ctx = ctx or frame_bundle_context()
    gens = []
    for a, b, c in THETA_PAIRS:
        wa, wb, wc = ctx.gen(f"w{a}"), ctx.gen(f"w{b}"), ctx.gen(f"w{c}")
        gens.append(wedge(wedge(wa, wb), exterior_derivative(wc, ctx)))
    omega = wedge(wedge(ctx.gen("w1"), ctx.gen("w2")), wedge(ctx.gen("w3"), ctx.gen("w4")))
    return ExteriorSystem(ctx, gens, omega)


def expected_theta(ctx: CoframeContext) -> list[Form]:
    """Right-hand sides of the Theta definitions, typed in by hand."""
    g = ctx.gen

    def w4(*names):
        f = g(names[0])
        for n in names[1:]:
            f = wedge(f, g(n))
        return f

    return [
        w4("w1", "w2", "w3", "w13") + w4("w1", "w2", "w4", "w14"),
        w4("w1", "w2", "w3", "w23") + w4("w1", "w2", "w4", "w24"),
        -w4("w1", "w3", "w4", "w13") - w4("w2", "w3", "w4", "w23"),
        -w4("w1", "w3", "w4", "w14") - w4("w2", "w3", "w4", "w24"),
    ]


def lambda_symbol(c: int, a: int, b: int, identify: bool = False) -> Scalar:
    """``lambda_c^a_b`` with the antisymmetry convention in (a, b).

    With ``identify`` the four symmetry conditions of integral elements are
    applied, keeping one representative of each identified pair.
    """
    if a == b:
        return Scalar()
    sign = 1
    if a > b:
        a, b, sign = b, a, -1
    name = f"l{c}_{a}{b}"
    if identify:
        name = LAMBDA_IDENTIFICATIONS.get(name, name)
    return Scalar.symbol(name) * sign


# l2_13 = l1_23, l2_14 = l1_24, l4_13 = l3_14, l4_23 = l3_24
LAMBDA_IDENTIFICATIONS = {"l2_13": "l1_23", "l2_14": "l1_24", "l4_13": "l3_14", "l4_23": "l3_24"}
LAMBDA_NAMES = [f"l{c}_{a}{b}" for a, b in PAIRS for c in range(1, N + 1)]
PROLONGED_LAMBDAS = [n for n in LAMBDA_NAMES if n not in LAMBDA_IDENTIFICATIONS]


def theta_chart(sys: ExteriorSystem) -> IntegralElementChart:
    ctx = sys.ctx

    def namer(base, fiber):
        c = int(ctx.generators[base][1:])
        ab = ctx.generators[fiber][1:]
        return f"l{c}_{ab}"

    return IntegralElementChart(sys, namer)


def expected_lambda_conditions() -> list[Scalar]:
    out = []
    for lhs, rhs in LAMBDA_IDENTIFICATIONS.items():
        out.append((Scalar.symbol(rhs) - Scalar.symbol(lhs)).primitive())
    return out


def theta_cartan_test(seed: int = 0, trials: int = 3, flag: FlagChart | None = None):
    sys = build_theta_system()
    chart = theta_chart(sys)
    flag = flag or FlagChart.from_minors(1, 0, 1, 0)
    eqs = integral_element_equations(sys, chart)
    point = integral_point(eqs, chart.variables, random.Random(seed))
    return cartan_test(sys, chart, flag, point, seed=seed, trials=trials)


def alpha_matrix() -> list:
    """The 4x4 polar matrix of the Theta system in the minors A, B, C, D, typed by hand."""
    A, B, C, D = (Scalar.symbol(x) for x in "ABCD")
    z = Scalar()
    return [[-A, -B, z, z], [z, z, -A, -B], [D, z, C, z], [z, D, z, C]]


# linearisation -------------------------------------------------------


def linearisation_matrix(y0, xi, ginv=None) -> list:
    """``P^alpha xi_alpha`` for gradients ``y0[beta][gamma] = d y^beta / d x^gamma``."""
    n = len(xi)
    if ginv is None:
        ginv = [[Scalar.const(int(i == j)) for j in range(n)] for i in range(n)]
    u = []
    for beta in range(4):
        s = Scalar()
        for alpha in range(n):
            for gamma in range(n):
                s = s + Scalar.coerce(y0[beta][gamma]) * Scalar.coerce(ginv[alpha][gamma]) * Scalar.coerce(xi[alpha])
        u.append(s)
    z = Scalar()
    u1, u2, u3, u4 = u
    return [[u3, z, u1, z], [u4, z, z, u1], [z, u3, u2, z], [z, u4, z, u2]]


def linearisation_symbol(y0, xi, ginv=None) -> Scalar:
    return symbolic_determinant(linearisation_matrix(y0, xi, ginv))


# prolongation --------------------------------------------------------

THETA_NAMES = [f"th{a}{b}" for a, b in PAIRS]
FIBER_NAMES = [f"d{n}" for n in PROLONGED_LAMBDAS]
PROLONGED_GENERATORS = [f"w{a}" for a in range(1, N + 1)] + THETA_NAMES + FIBER_NAMES


def lam(c: int, a: int, b: int) -> Scalar:
    """``lambda_c^a_b`` on the space of integral elements (symmetries applied)."""
    return lambda_symbol(c, a, b, identify=True)


def printed_T(a: int, b: int, c: int, d: int) -> Scalar:
    """``T^a_bcd`` typed in from its defining formula."""
    out = riemann(a, b, c, d, True)
    for e in range(1, N + 1):
        out = out + lam(e, a, b) * (lam(c, e, d) - lam(d, e, c))
        out = out - lam(c, a, e) * lam(d, e, b) + lam(d, a, e) * lam(c, e, b)
    return out


def printed_essential_T() -> Scalar:
    """``T(x, g, lambda)`` written out in terms of ``R1234`` and the lambdas."""
    l = lam
    return (riemann(1, 2, 3, 4, True)
            + l(1, 2, 3) * (l(2, 2, 4) - l(1, 1, 4))
            + l(1, 2, 4) * (l(1, 1, 3) - l(2, 2, 3))
            + l(3, 4, 1) * (l(4, 4, 2) - l(3, 3, 2))
            + l(3, 4, 2) * (l(3, 3, 1) - l(4, 4, 1)))


@lru_cache(maxsize=None)
def _prolonged_context() -> CoframeContext:
    ctx = CoframeContext(PROLONGED_GENERATORS)
    w = {a: ctx.gen(f"w{a}") for a in range(1, N + 1)}

    def theta(a, b):
        if a == b:
            return Form(1)
        return ctx.gen(f"th{a}{b}") if a < b else -ctx.gen(f"th{b}{a}")

    def conn(a, b):
        f = theta(a, b)
        for c in range(1, N + 1):
            f = f + w[c] * lam(c, a, b)
        return f

    ctx.enable_bianchi(N)
    structure = {}
    dw = {}
    for a in range(1, N + 1):
        f = Form(2)
        for b in range(1, N + 1):
            f = f - wedge(conn(a, b), w[b])
        structure[f"w{a}"] = dw[a] = ctx.reduce_form(f)
    scalar_d = {n: ctx.gen(f"d{n}") for n in PROLONGED_LAMBDAS}
    for a, b in PAIRS:
        f = Form(2)
        for c in range(1, N + 1):
            f = f - wedge(conn(a, c), conn(c, b))
        for c, d in PAIRS:
            f = f + wedge(w[c], w[d]) * riemann(a, b, c, d, True)
        for c in range(1, N + 1):
            lc = lam(c, a, b)
            for n in lc.symbols():
                f = f - wedge(scalar_d[n], w[c]) * lc.diff(n)
            f = f - dw[c] * lc
        structure[f"th{a}{b}"] = ctx.reduce_form(f)
    for n in FIBER_NAMES:
        structure[n] = Form(2)
    ctx.with_tables(structure, scalar_d)
    ctx.with_tables({}, curvature_derivatives(ctx, w, conn, True))
    _declare(ctx, True)
    for n in PROLONGED_LAMBDAS:
        ctx.symbols.declare(n, "connection-coefficient")
    return ctx


def prolonged_context() -> CoframeContext:
    """Coframe ``(w^a, theta^a_b, d lambda)`` of the 30-dimensional space of integral elements."""
    return _prolonged_context()


def theta_index(a: int, b: int) -> int:
    return THETA_NAMES.index(f"th{a}{b}")


@dataclass
class ProlongedSystem:
    presentation: PfaffianPresentation
    tensor: TorsionTensor
    absorption: AbsorptionSolution

    @property
    def ctx(self):
        return self.presentation.ctx

    def residual_forms(self) -> dict:
        """Remaining torsion per theta row as 2-forms in the w's."""
        out = {}
        pres = self.presentation
        for (a, i, j), v in self.absorption.residual.items():
            f = wedge(Form.generator(pres.omega[i]), Form.generator(pres.omega[j])) * v
            name = THETA_NAMES[a]
            out[name] = out.get(name, Form(2)) + f
        return out

    def absorbed_structure(self) -> dict:
        """``d theta mod theta`` rewritten with absorbed fiber forms (named ``P<dl>``)."""
        pres, t = self.presentation, self.tensor
        out = {}
        for a, th in enumerate(pres.theta):
            f = Form(2)
            for (b, e, i), coeff in t.A.items():
                if b == a:
                    f = f + wedge(Form.generator(pres.pi[e]), Form.generator(pres.omega[i])) * coeff
            for (b, i, j), v in self.absorption.residual.items():
                if b == a:
                    f = f + wedge(Form.generator(pres.omega[i]), Form.generator(pres.omega[j])) * v
            out[THETA_NAMES[a]] = f
        return out


def prolonged_presentation() -> PfaffianPresentation:
    ctx = prolonged_context()
    ids = lambda names: [ctx.index[n] for n in names]
    return PfaffianPresentation(ctx, ids(THETA_NAMES), ids([f"w{a}" for a in range(1, N + 1)]), ids(FIBER_NAMES))


def golden_absorption() -> dict:
    """The explicit absorbing shifts: lambda name -> {w index (1-based): coefficient}."""
    T = printed_T
    return {
        "l1_12": {2: T(1, 2, 1, 2), 3: T(1, 2, 1, 3), 4: T(1, 2, 1, 4)},
        "l2_12": {3: T(1, 2, 2, 3), 4: T(1, 2, 2, 4)},
        "l3_12": {4: T(1, 2, 3, 4)},
        "l4_12": {},
        "l1_13": {2: T(1, 3, 1, 2), 3: T(1, 3, 1, 3), 4: T(1, 3, 1, 4)},
        "l1_23": {4: T(1, 3, 2, 4)},
        "l3_13": {2: -T(1, 3, 2, 3), 4: T(1, 3, 3, 4)},
        "l3_14": {},
        "l1_14": {2: T(1, 4, 1, 2), 3: T(1, 4, 1, 3), 4: T(1, 4, 1, 4)},
        "l1_24": {3: T(1, 4, 2, 3)},
        "l4_14": {2: -T(1, 4, 2, 4), 3: -T(1, 4, 3, 4)},
        "l2_23": {1: -T(2, 3, 1, 2), 3: T(2, 3, 2, 3), 4: T(2, 3, 2, 4)},
        "l3_23": {1: -T(2, 3, 1, 3), 4: T(2, 3, 3, 4)},
        "l3_24": {1: T(1, 3, 2, 4) + T(2, 3, 4, 1)},
        "l2_24": {1: -T(2, 4, 1, 2), 3: T(2, 4, 2, 3), 4: T(2, 4, 2, 4)},
        "l4_24": {1: -T(2, 4, 1, 4), 3: -T(2, 4, 3, 4)},
        "l1_34": {2: T(3, 4, 1, 2), 3: T(3, 4, 1, 3), 4: T(3, 4, 1, 4)},
        "l2_34": {3: T(3, 4, 2, 3), 4: T(3, 4, 2, 4)},
        "l3_34": {4: T(3, 4, 3, 4)},
        "l4_34": {},
    }


def golden_shift_map() -> dict:
    """Golden shifts keyed like :class:`AbsorptionSolution.p`."""
    out = {}
    for name, row in golden_absorption().items():
        e = PROLONGED_LAMBDAS.index(name)
        for k, v in row.items():
            if v:
                out[(e, k - 1)] = v
    return out


@lru_cache(maxsize=None)
def prolong() -> ProlongedSystem:
    """Prolonged system with the explicit absorption applied."""
    pres = prolonged_presentation()
    tensor = extract_torsion(pres)
    p = golden_shift_map()
    residual = apply_shift(tensor, p)
    return ProlongedSystem(pres, tensor, AbsorptionSolution(p, residual, sorted(residual)))


def generic_absorption(system: ProlongedSystem | None = None) -> AbsorptionSolution:
    """Absorption from the generic solver, with the residual steered to ``theta^2_4``, ``w1^w3``."""
    system = system or prolong()
    return absorb_torsion(system.presentation, system.tensor, prefer=[(theta_index(2, 4), 0, 2)])


ESSENTIAL_COMBINATION = [(1, 3), (1, 4), (2, 3), (2, 4)]


def essential_torsion_scalar(system: ProlongedSystem | None = None) -> Scalar:
    """``T`` from ``sum w^a ^ w^b ^ d theta^a_b = -2 T vol`` over the mixed pairs, mod theta."""
    system = system or prolong()
    ctx = system.ctx
    total = Form(4)
    for a, b in ESSENTIAL_COMBINATION:
        dth = exterior_derivative(ctx.gen(f"th{a}{b}"), ctx).drop(system.presentation.theta)
        total = total + wedge(wedge(ctx.gen(f"w{a}"), ctx.gen(f"w{b}")), dth)
    vol = tuple(ctx.index[f"w{a}"] for a in range(1, N + 1))
    extra = [k for k in total.terms if k != vol]
    if extra:
        raise ValueError("combination is not a multiple of the volume form")
    return total.coefficient(vol) * Fraction(-1, 2)


def torsion_functional(c_map: dict) -> Scalar:
    """The same combination evaluated on a torsion map ``c[(row, i, j)]``."""
    # w^a ^ w^b ^ (c_ij w^i ^ w^j) picks the complementary pair with a sign
    out = Scalar()
    for a, b in ESSENTIAL_COMBINATION:
        i, j = [k for k in range(N) if k not in (a - 1, b - 1)]
        sign = _perm_sign([a - 1, b - 1, i, j])
        out = out + c_map.get((theta_index(a, b), i, j), Scalar()) * sign
    return out * Fraction(-1, 2)


def _perm_sign(perm):
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


# y/z coordinates -----------------------------------------------------

Y_NAMES = [f"y{i}" for i in range(1, 9)]
Z_NAMES = [f"z{i}" for i in range(1, 5)]


def _s(name):
    return Scalar.symbol(name)


def yz_forward() -> dict:
    """``y``/``z`` in terms of the lambdas."""
    h = Fraction(1, 2)
    l = lam
    return {
        "y1": l(1, 2, 3), "y2": (l(2, 2, 4) - l(1, 1, 4)) * h,
        "y3": l(1, 2, 4), "y4": (l(2, 2, 3) - l(1, 1, 3)) * h,
        "y5": l(3, 4, 1), "y6": (l(4, 4, 2) - l(3, 3, 2)) * h,
        "y7": l(3, 4, 2), "y8": (l(4, 4, 1) - l(3, 3, 1)) * h,
        "z1": (l(2, 2, 4) + l(1, 1, 4)) * h, "z2": (l(2, 2, 3) + l(1, 1, 3)) * h,
        "z3": (l(4, 4, 2) + l(3, 3, 2)) * h, "z4": (l(4, 4, 1) + l(3, 3, 1)) * h,
    }


def yz_inverse() -> dict:
    """The twelve transformed lambdas in terms of ``y``/``z``."""
    y = {i: _s(f"y{i}") for i in range(1, 9)}
    z = {i: _s(f"z{i}") for i in range(1, 5)}
    return {
        "l1_23": y[1], "l1_24": y[3], "l3_14": -y[5], "l3_24": -y[7],
        "l2_24": z[1] + y[2], "l1_14": z[1] - y[2],
        "l2_23": z[2] + y[4], "l1_13": z[2] - y[4],
        "l4_24": -(z[3] + y[6]), "l3_23": y[6] - z[3],
        "l4_14": -(z[4] + y[8]), "l3_13": y[8] - z[4],
    }


def yz_transform(expr: Scalar) -> Scalar:
    """Rewrite a polynomial in the lambdas in ``y``/``z`` coordinates; other symbols pass through."""
    return expr.subs(yz_inverse())


def yz_untransform(expr: Scalar) -> Scalar:
    return expr.subs(yz_forward())


def q_form(X, Y) -> Scalar:
    """Polarised split-signature form with ``q(X, X) = 2(y1 y2 - y3 y4 + y5 y6 - y7 y8)``."""
    X = [Scalar.coerce(x) for x in X]
    Y = [Scalar.coerce(x) for x in Y]
    return (X[0] * Y[1] + X[1] * Y[0] - X[2] * Y[3] - X[3] * Y[2]
            + X[4] * Y[5] + X[5] * Y[4] - X[6] * Y[7] - X[7] * Y[6])


def constraint_T() -> Scalar:
    """``R1234 + 2(y1 y2 - y3 y4 + y5 y6 - y7 y8)``, typed in."""
    X = [_s(n) for n in Y_NAMES]
    return riemann(1, 2, 3, 4, True) + q_form(X, X)


def locus_assignment() -> dict:
    """Solve ``T = 0`` for ``R1234``: the points of the constraint locus."""
    X = [_s(n) for n in Y_NAMES]
    return {"R1234": -q_form(X, X)}


# the fiber basis on the locus ------------------------------------------

MU_NAMES = [f"mu{i}" for i in range(1, 5)]
NU_NAMES = [f"nu{i}" for i in range(1, 5)]
RHO_NAMES = [f"rho{i}" for i in range(1, 5)]
PI_NAMES = [f"pi{i}" for i in range(1, 9)]
NEW_BASIS = MU_NAMES + NU_NAMES + RHO_NAMES + PI_NAMES


def fiber_images() -> dict:
    """Each absorbed ``d lambda`` form as a combination of ``mu, nu, rho, pi``."""
    out = {}
    for c in range(1, N + 1):
        out[f"l{c}_12"] = {f"mu{c}": 1}
        out[f"l{c}_34"] = {f"nu{c}": 1}
    out.update({
        "l1_23": {"pi1": 1}, "l1_24": {"pi3": 1}, "l3_14": {"pi5": -1}, "l3_24": {"pi7": -1},
        "l2_24": {"rho1": 1, "pi2": 1}, "l1_14": {"rho1": 1, "pi2": -1},
        "l2_23": {"rho2": 1, "pi4": 1}, "l1_13": {"rho2": 1, "pi4": -1},
        "l4_24": {"rho3": -1, "pi6": -1}, "l3_23": {"rho3": -1, "pi6": 1},
        "l4_14": {"rho4": -1, "pi8": -1}, "l3_13": {"rho4": -1, "pi8": 1},
    })
    return {f"d{k}": {n: Scalar.const(v) for n, v in row.items()} for k, row in out.items()}


def relation_combo(y=None) -> dict:
    """``y1 pi2 + y2 pi1 - y3 pi4 - y4 pi3 + y5 pi6 + y6 pi5 - y7 pi8 - y8 pi7``."""
    y = y or [_s(n) for n in Y_NAMES]
    y = [Scalar.coerce(v) for v in y]
    return {
        "pi2": y[0], "pi1": y[1], "pi4": -y[2], "pi3": -y[3],
        "pi6": y[4], "pi5": y[5], "pi8": -y[6], "pi7": -y[7],
    }


def printed_tableau_entries(consistent: bool = True) -> list:
    """The tableau in the ``mu, nu, rho, pi`` basis, typed in.

    With ``consistent=False`` the ``pi5``/``pi7`` entries carry a plus sign;
    ``consistent=True`` uses the signs that follow from the definitions of
    ``pi5`` and ``pi7``.
    """
    s = -1 if consistent else 1

    def c(**kw):
        return {k: Scalar.const(v) for k, v in kw.items()}

    rows = [
        [c(mu1=1), c(mu2=1), c(mu3=1), c(mu4=1)],
        [c(rho2=1, pi4=-1), c(pi1=1), c(rho4=-1, pi8=1), c(pi5=s)],
        [c(rho1=1, pi2=-1), c(pi3=1), c(pi5=s), c(rho4=-1, pi8=-1)],
        [c(pi1=1), c(rho2=1, pi4=1), c(rho3=-1, pi6=1), c(pi7=s)],
        [c(pi3=1), c(rho1=1, pi2=1), c(pi7=s), c(rho3=-1, pi6=-1)],
        [c(nu1=1), c(nu2=1), c(nu3=1), c(nu4=1)],
    ]
    # the tableau matrix carries an overall minus sign
    return [[{k: -v for k, v in e.items()} for e in row] for row in rows]


@dataclass
class ConstraintLocus:
    T: Scalar
    dT: Form
    Phi: list
    Psi: list


@dataclass
class RestrictedSystem:
    """The prolonged system pulled back to ``{T = 0}``.

    Stands in for a presentation on the 29-dimensional locus: the tableau is
    carried in the ``mu, nu, rho, pi`` basis with the linear relation coming
    from ``i*(dT) = 0``, and the torsion is the absorbed residual evaluated on
    the locus.
    """

    tableau: Tableau
    locus: ConstraintLocus
    torsion: dict

    @property
    def torsion_free(self) -> bool:
        return all(not v for v in self.torsion.values())


def prolonged_tableau(system: ProlongedSystem | None = None) -> Tableau:
    """Tableau of the absorbed prolonged system, in the ``d lambda`` basis."""
    system = system or prolong()
    return Tableau.from_torsion(system.presentation, system.tensor)


def locus_tableau(with_relation: bool = True, system: ProlongedSystem | None = None) -> Tableau:
    tab = change_tableau_basis(prolonged_tableau(system), NEW_BASIS, fiber_images())
    if with_relation:
        tab.relations = [relation_combo()]
    return tab


def dT_form(system: ProlongedSystem | None = None) -> Form:
    """``dT mod theta`` on the prolonged space, in the ``d lambda, w`` coframe."""
    system = system or prolong()
    ctx = system.ctx
    return ctx.d_scalar(printed_essential_T()).drop(system.presentation.theta)


def printed_phi(a: int) -> Scalar:
    """``Phi_a``: first jet of ``R1234`` plus the lambda-times-curvature terms."""
    out = Scalar.symbol(jet_name("R1234", a))
    for b in range(1, N + 1):
        out = out + lam(a, b, 1) * riemann(b, 2, 3, 4, True)
        out = out + lam(a, b, 2) * riemann(1, b, 3, 4, True)
        out = out + lam(a, b, 3) * riemann(1, 2, b, 4, True)
        out = out + lam(a, b, 4) * riemann(1, 2, 3, b, True)
    return out


def restrict_to_S(system: ProlongedSystem | None = None) -> RestrictedSystem:
    """Pull back to the constraint locus and rewrite in ``y``/``z`` and the new fiber basis.

    ``Psi_a`` are the ``w``-coefficients of ``i*(dT)/2`` once ``d lambda`` is
    replaced by the absorbed forms, i.e. ``d lambda = P - shift``.
    """
    system = system or prolong()
    ctx = system.ctx
    dT = dT_form(system)
    omega_ids = system.presentation.omega
    Phi = [dT.coefficient((i,)) for i in omega_ids]
    # d lambda -> absorbed form minus its shift: collect the w terms
    shift_terms = [Scalar() for _ in omega_ids]
    for (e, k), v in system.absorption.p.items():
        coeff = dT.coefficient((system.presentation.pi[e],))
        if coeff:
            shift_terms[k] = shift_terms[k] - coeff * v
    to_S = lambda s: yz_transform(s).subs(locus_assignment())
    Psi = [to_S((Phi[k] + shift_terms[k]) * Fraction(1, 2)) for k in range(N)]
    torsion = {k: to_S(v) for k, v in system.absorption.residual.items()}
    locus = ConstraintLocus(yz_transform(printed_essential_T()), dT, Phi, Psi)
    return RestrictedSystem(locus_tableau(True, system), locus, torsion)


# admissible shifts of the pi/rho block ----------------------------------

FAMILY_PARAMETERS = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota",
                     "kappa", "lambda", "mu", "nu", "xi", "o", "pi", "rho", "sigma", "tau",
                     "upsilon", "phi", "chi", "psi", "omega", "Omega"]


def printed_shift_family(corrected: bool = True, consistent: bool = True) -> dict:
    """The 25-parameter family of shifts of ``pi^1..8, rho^1..4`` (w1..w4 coefficients).

    The family is written for the tableau with ``pi5``/``pi7`` entering with a
    plus sign; ``consistent`` flips the ``pi5``/``pi7`` shifts so that it
    applies to the tableau derived from the definitions.  With
    ``corrected=False`` three slots take a variant that fails the symmetry
    equations: the ``(tau + alpha)`` term of the ``rho^2`` shift without its
    ``w^2``, and ``-(phi + mu)``, ``-(delta - Omega)`` in the ``w^4`` slots of
    the ``rho^3``/``rho^4`` shifts instead of ``-(mu - psi)``, ``-(iota - Omega)``.
    """
    p = {n: Scalar.symbol(n) for n in FAMILY_PARAMETERS}
    h = Fraction(1, 2)
    al, be, ga, de, ep, ze, et, th, io, ka, la, mu, nu, xi, o, pi, rh, si, ta, up, ph, ch, ps, om, OM = (
        p[n] for n in FAMILY_PARAMETERS)
    z = Scalar()
    family = {
        "pi1": [al, be, ga, de],
        "pi3": [ep, ze, de, et],
        "pi5": [th, de, io, ka],
        "pi7": [de, la, mu, nu],
        "pi2": [xi, o, (la - th) * h, (pi - rh) * h],
        "pi4": [si, ta, (up - ph) * h, (la - th) * h],
        "pi6": [(ga - et) * h, (up - pi) * h, ch, ps],
        "pi8": [(ph - rh) * h, (ga - et) * h, om, OM],
        "rho1": [ze - xi, o + ep, (la + th) * h, (pi + rh) * h],
        "rho2": [be - si, (ta + al) if corrected else z, (up + ph) * h, (la + th) * h],
        "rho3": [-(ga + et) * h, -(up + pi) * h, -(ch + nu), -(mu - ps) if corrected else -(ph + mu)],
        "rho4": [-(ph + rh) * h, -(ga + et) * h, -(om + ka), -(io - OM) if corrected else -(de - OM)],
    }
    if consistent:
        for k in ("pi5", "pi7"):
            family[k] = [-v for v in family[k]]
    return family


def printed_Y_vectors() -> list:
    """``Y_1..Y_4``: the w^i coefficients of the pi shifts, typed in."""
    p = {n: Scalar.symbol(n) for n in FAMILY_PARAMETERS}
    h = Fraction(1, 2)
    g = lambda n: p[n]
    return [
        [g("alpha"), g("xi"), g("epsilon"), g("sigma"), g("theta"), (g("gamma") - g("eta")) * h, g("delta"),
         (g("phi") - g("rho")) * h],
        [g("beta"), g("o"), g("zeta"), g("tau"), g("delta"), (g("phi") - g("rho")) * h, g("lambda"),
         (g("gamma") - g("eta")) * h],
        [g("gamma"), (g("lambda") - g("theta")) * h, g("delta"), (g("upsilon") - g("phi")) * h, g("iota"),
         g("chi"), g("mu"), g("omega")],
        [g("delta"), (g("pi") - g("rho")) * h, g("eta"), (g("lambda") - g("theta")) * h, g("kappa"), g("psi"),
         g("nu"), g("Omega")],
    ]


def family_Y_vectors(family: dict) -> list:
    return [[family[f"pi{a}"][i] for a in range(1, 9)] for i in range(N)]


def family_vectors(family: dict, tab: Tableau) -> list:
    """One unknown-vector (ordered as in the prolongation equations) per parameter."""
    _, unknowns = prolongation_equations(tab)
    out = []
    for name in FAMILY_PARAMETERS:
        vec = []
        for e, j in unknowns:
            combo = family.get(tab.basis[e])
            vec.append(combo[j].diff(name) if combo else Scalar())
        out.append(vec)
    return out


class NonGenericYError(NonGenericPointError):
    pass


def solve_Y_equations(y, psi, family: dict | None = None):
    """Solve ``q(X, Y_i) = -Psi_i`` for four family parameters at numeric ``y``.

    Parameters are picked in family order, one per equation, keeping the first
    one that raises the rank.  Returns ``(solved, free)`` where ``solved`` maps
    each chosen parameter to an affine Scalar in the remaining ones.
    """
    y = [Fraction(v) for v in y]
    if any(v == 0 for v in y):
        raise NonGenericYError("indeterminate at non-generic point: some y^i vanish")
    family = family or printed_shift_family()
    Ys = family_Y_vectors(family)
    eqs = [q_form(y, Ys[i]) + Scalar.coerce(psi[i]) for i in range(N)]
    rows = [[e.diff(n).constant_value() if e.diff(n) else Fraction(0) for n in FAMILY_PARAMETERS] for e in eqs]
    chosen = []
    for i, row in enumerate(rows):
        for k, n in enumerate(FAMILY_PARAMETERS):
            if n in chosen or not row[k]:
                continue
            cols = [FAMILY_PARAMETERS.index(c) for c in chosen] + [k]
            sub = [[r[c] for c in cols] for r in rows[:i + 1]]
            if rank(sub) == len(cols):
                chosen.append(n)
                break
    if len(chosen) != N:
        raise NonGenericYError("Y equations are degenerate at this point")
    free = [n for n in FAMILY_PARAMETERS if n not in chosen]
    # chosen unknowns on the left, everything else to the right
    mat = [[row[FAMILY_PARAMETERS.index(c)] for c in chosen] for row in rows]
    rhs = []
    for e in eqs:
        r = e
        for c in chosen:
            r = r - Scalar.symbol(c) * e.diff(c)
        rhs.append(-r)
    sol = solve_scalar_rhs(mat, rhs, N)
    return dict(zip(chosen, sol)), free


def lindep_form(system: ProlongedSystem | None = None) -> dict:
    """``i*(dT)/2`` in the ``mu, nu, rho, pi`` basis plus ``w`` coefficients ``Psi``.

    Returns a map from basis names (and ``w1..w4``) to Scalars in ``y``/``z``.
    """
    system = system or prolong()
    restricted = restrict_to_S(system)
    dT = restricted.locus.dT
    images = fiber_images()
    out = {}
    to_S = lambda s: yz_transform(s).subs(locus_assignment())
    for e, g in enumerate(system.presentation.pi):
        coeff = dT.coefficient((g,))
        if not coeff:
            continue
        for new, c in images[system.ctx.generators[g]].items():
            out[new] = out.get(new, Scalar()) + coeff * c
    out = {k: to_S(v * Fraction(1, 2)) for k, v in out.items()}
    for a in range(N):
        out[f"w{a + 1}"] = restricted.locus.Psi[a]
    return {k: v for k, v in out.items() if v}


def family_shift(family: dict, values: dict) -> dict:
    """Evaluate a shift family: basis name -> list of w coefficients."""
    return {k: [Scalar.coerce(v).subs(values) for v in row] for k, row in family.items()}


def random_locus_point(seed: int = 0) -> dict:
    """Random rational values for every symbol appearing on the locus (``y`` nonzero)."""
    restricted = restrict_to_S()
    names = set()
    for v in restricted.locus.Psi:
        names |= v.symbols()
    names |= set(Y_NAMES)
    rng = random.Random(f"locus:{seed}")
    return random_point(sorted(names), rng)


@dataclass
class PsiAbsorption:
    solved: dict
    free: list
    shift: dict
    residual: list


def absorb_psi(point: dict, free_values: dict | None = None) -> PsiAbsorption:
    """Absorb the ``Psi`` terms of the relation by a shift from the 25-parameter family.

    ``free_values`` fixes the 21 remaining parameters (default zero).  The
    returned ``residual`` lists the w-coefficients of the shifted relation and
    must vanish.
    """
    lind = lindep_form()
    y = [point[n] for n in Y_NAMES]
    psi = [lind[f"w{a}"].evaluate(point) for a in range(1, N + 1)]
    family = printed_shift_family()
    solved, free = solve_Y_equations(y, psi, family)
    values = {n: Scalar.const(Fraction((free_values or {}).get(n, 0))) for n in free}
    solved_values = {k: v.subs(values) for k, v in solved.items()}
    values.update(solved_values)
    shift = family_shift(family, values)
    rel = relation_combo(y)
    residual = []
    for i in range(N):
        r = Scalar.const(psi[i])
        for name, coeff in rel.items():
            r = r + coeff * shift[name][i]
        residual.append(r)
    return PsiAbsorption({k: v for k, v in solved_values.items()}, free, shift, residual)


def family_dimension_after_Y(y, family: dict | None = None) -> int:
    """Parameters left once the homogeneous ``q(X, Y_i) = 0`` are imposed."""
    family = family or printed_shift_family()
    Ys = family_Y_vectors(family)
    rows = []
    for i in range(N):
        e = q_form(y, Ys[i])
        rows.append([e.diff(n).constant_value() if e.diff(n) else Fraction(0) for n in FAMILY_PARAMETERS])
    return len(FAMILY_PARAMETERS) - rank(rows)


# the report ----------------------------------------------------------


@dataclass
class BlockdiagReport:
    characters: tuple
    r1: int
    blocks: dict
    verdict: InvolutivityVerdict
    relation_registered: bool

    @property
    def sum_characters(self) -> int:
        return sum(self.characters)


def full_report(seed: int = 0, trials: int = 3, with_relation: bool = True) -> BlockdiagReport:
    """Characters, degree of indeterminacy and the involutivity verdict on the locus."""
    restricted = restrict_to_S()
    tab = restricted.tableau if with_relation else restricted.tableau.without_relations()
    chars = reduced_characters(tab, seed=seed, trials=trials)
    blocks = {
        "pi_rho": degree_of_indeterminacy(tab, seed, trials, PI_NAMES + RHO_NAMES),
        "mu": degree_of_indeterminacy(tab, seed, trials, MU_NAMES),
        "nu": degree_of_indeterminacy(tab, seed, trials, NU_NAMES),
    }
    r1 = degree_of_indeterminacy(tab, seed, trials)
    chars.r1 = r1
    verdict = involutivity_verdict(restricted.torsion_free, chars, r1)
    return BlockdiagReport(chars.s, r1, blocks, verdict, with_relation)


def off_locus_verdict(seed: int = 0, trials: int = 3) -> InvolutivityVerdict:
    """Verdict on the prolonged space at a random point where ``T != 0``."""
    system = prolong()
    rng = random.Random(f"offlocus:{seed}")
    names = set()
    for v in system.absorption.residual.values():
        names |= v.symbols()
    point = random_point(sorted(names), rng)
    residual_zero = all(v.evaluate(point) == 0 for v in system.absorption.residual.values())
    tab = locus_tableau(True, system)
    chars = reduced_characters(tab, seed=seed, trials=trials)
    r1 = degree_of_indeterminacy(tab, seed, trials)
    return involutivity_verdict(residual_zero, chars, r1)


# block rotations -------------------------------------------------------


def rotation_images(ctx: CoframeContext, c1, s1, c2, s2) -> dict:
    """Generator images for constant rotations of the (w1, w2) and (w3, w4) blocks.

    The connection forms transform by ``g^{-1} w g`` with ``g`` the block
    rotation, which is again block-diagonal.
    """
    c1, s1, c2, s2 = (Fraction(x) for x in (c1, s1, c2, s2))
    if c1 * c1 + s1 * s1 != 1 or c2 * c2 + s2 * s2 != 1:
        raise ValueError("rotation entries must satisfy c^2 + s^2 = 1")
    Rm = [[c1, -s1, 0, 0], [s1, c1, 0, 0], [0, 0, c2, -s2], [0, 0, s2, c2]]
    w = {a: ctx.gen(f"w{a}") for a in range(1, N + 1)}

    def conn(a, b):
        return Form(1) if a == b else ctx.gen(f"w{a}{b}")

    images = {}
    for a in range(1, N + 1):
        f = Form(1)
        for b in range(1, N + 1):
            if Rm[b - 1][a - 1]:
                f = f + w[b] * Rm[b - 1][a - 1]
        images[ctx.index[f"w{a}"]] = f
    for a, b in PAIRS:
        f = Form(1)
        for c in range(1, N + 1):
            for d in range(1, N + 1):
                coeff = Rm[c - 1][a - 1] * Rm[d - 1][b - 1]
                if coeff:
                    f = f + conn(c, d) * coeff
        images[ctx.index[f"w{a}{b}"]] = f
    return images


def rotated_theta_in_ideal(c1=Fraction(3, 5), s1=Fraction(4, 5), c2=Fraction(4, 5), s2=Fraction(-3, 5)) -> list:
    """For each Theta^i, is its rotated image a combination of the Theta's?

    The Theta's involve only connection forms ``w^a_b`` with one index in each
    block, and the block rotation mixes them only among themselves, so the
    check is an exact linear-algebra membership test.
    """
    ctx = frame_bundle_context()
    sys = build_theta_system(ctx)
    images = rotation_images(ctx, c1, s1, c2, s2)
    originals = sys.generators
    keys = sorted({k for f in originals for k in f.terms})
    out = []
    for g in originals:
        rotated = g.change_generators(images)
        extra = set(rotated.terms) - set(keys)
        if extra:
            out.append(False)
            continue
        cols = [[f.coefficient(k).constant_value() for k in keys] for f in originals]
        target = [rotated.coefficient(k).constant_value() for k in keys]
        A = [[cols[j][r] for j in range(len(cols))] for r in range(len(keys))]
        out.append(solve(A, target, len(cols)) is not None)
    return out


# curvature condition and Newman-Penrose layer ---------------------------


@dataclass
class GammaField:
    """Connection coefficients ``gamma[(a, b, c)]`` for ``w^a_b = sum_c gamma w^c`` and ``R1234``."""

    gamma: dict
    R1234: float

    def __call__(self, c, a, b):
        """``Gamma_c^a_b`` in the lambda index order."""
        if a == b:
            return 0.0
        if a > b:
            return -self.gamma.get((b, a, c), 0.0)
        return self.gamma.get((a, b, c), 0.0)

    def antisymmetry_defect(self) -> float:
        return max((abs(self.gamma.get((a, b, c), 0.0) + self.gamma.get((b, a, c), 0.0))
                    for a in range(1, N + 1) for b in range(1, N + 1) for c in range(1, N + 1)
                    if (a, b, c) in self.gamma and (b, a, c) in self.gamma), default=0.0)


def curvature_condition_residual(g: GammaField) -> float:
    """``R1234`` plus the quadratic connection terms of the constraint, at a point."""
    G = g
    return (g.R1234
            + G(1, 2, 3) * (G(2, 2, 4) - G(1, 1, 4))
            + G(1, 2, 4) * (G(1, 1, 3) - G(2, 2, 3))
            + G(3, 4, 1) * (G(4, 4, 2) - G(3, 3, 2))
            + G(3, 4, 2) * (G(3, 3, 1) - G(4, 4, 1)))


NP_NAMES = ["rho", "rho_p", "tau", "tau_p", "kappa", "kappa_p", "sigma", "sigma_p", "Psi2", "Phi11", "Lambda"]

# (p, q) spin/boost weights
GHP_WEIGHTS = {
    "kappa": (3, 1), "sigma": (3, -1), "kappa_p": (-3, -1), "sigma_p": (-3, 1), "Psi2": (0, 0),
    "rho": (1, 1), "rho_p": (-1, -1), "tau": (1, -1), "tau_p": (-1, 1),
}


@dataclass
class NPScalars:
    rho: complex = 0j
    rho_p: complex = 0j
    tau: complex = 0j
    tau_p: complex = 0j
    kappa: complex = 0j
    kappa_p: complex = 0j
    sigma: complex = 0j
    sigma_p: complex = 0j
    Psi2: complex = 0j
    Phi11: complex = 0j
    Lambda: complex = 0j

    def rescaled(self, lam: complex) -> "NPScalars":
        """Apply a spin/boost ``lam``: a quantity of weight (p, q) gains ``lam^p conj(lam)^q``."""
        out = dict(vars(self))
        for name, (p, q) in GHP_WEIGHTS.items():
            out[name] = out[name] * lam ** p * lam.conjugate() ** q
        return NPScalars(**out)


@dataclass
class NPConstraintRecord:
    reality: tuple
    constraint: float
    K: complex
    K_star: complex

    @property
    def im_K(self) -> float:
        return self.K.imag

    @property
    def im_K_star(self) -> float:
        return self.K_star.imag


def np_constraint(np_: NPScalars) -> NPConstraintRecord:
    reality = (np_.rho.imag, np_.rho_p.imag,
               np_.tau - np_.tau_p.conjugate(), np_.tau_p - np_.tau.conjugate())
    constraint = (np_.Psi2 + np_.kappa * np_.kappa_p - np_.sigma * np_.sigma_p).imag
    K = np_.sigma * np_.sigma_p - np_.Psi2 - np_.rho * np_.rho_p + np_.Phi11 + np_.Lambda
    # Sachs star: sigma -> -kappa, sigma' -> kappa', Psi2 -> Psi2, rho/rho' terms real here
    K_star = -np_.kappa * np_.kappa_p - np_.Psi2
    return NPConstraintRecord(reality, constraint, K, K_star)
