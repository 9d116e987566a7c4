import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edslab import blockdiag as bd
from edslab import cli
from edslab.dsl import canonical, parse_system, print_system
from edslab.eds import FlagChart, brute_force_character, integral_element_equations, integral_point, polar_space
from edslab.forms import Form, exterior_derivative, riemann, wedge
from edslab.linalg import rank
from edslab.numeric import checks as nc
from edslab.numeric.fields import ExprField, MetricField
from edslab.pfaffian import apply_shift, homogeneous_shifts
from edslab.scalar import Scalar

CTX = bd.frame_bundle_context()
SYMS = ["R1212", "R1234", "R1324", "R2434"]
small = st.fractions(min_value=-5, max_value=5, max_denominator=4)


@st.composite
def scalars(draw, max_terms=3):
    out = Scalar.const(draw(small))
    for _ in range(draw(st.integers(0, max_terms))):
        term = Scalar.const(draw(small))
        for name in draw(st.lists(st.sampled_from(SYMS), max_size=2)):
            term = term * Scalar.symbol(name)
        out = out + term
    return out


@st.composite
def forms(draw, degree):
    f = Form(degree)
    for _ in range(draw(st.integers(0, 3))):
        idx = draw(st.lists(st.integers(0, CTX.dim - 1), min_size=degree, max_size=degree, unique=True))
        f = f + Form.basis(sorted(idx), draw(scalars()))
    return f


# exterior algebra


@given(st.integers(0, 3), st.integers(0, 3), st.data())
def test_wedge_graded_commutative(p, q, data):
    f, g = data.draw(forms(p)), data.draw(forms(q))
    assert wedge(f, g) == wedge(g, f) * (-1) ** (p * q)


@settings(max_examples=40)
@given(st.integers(0, 2), st.integers(0, 2), st.data())
def test_leibniz(p, q, data):
    f, g = data.draw(forms(p)), data.draw(forms(q))
    d = lambda x: exterior_derivative(x, CTX)
    assert d(wedge(f, g)) == wedge(d(f), g) + wedge(f, d(g)) * (-1) ** p


@settings(max_examples=30)
@given(st.lists(st.tuples(st.integers(0, 3), small), max_size=4))
def test_d_squared_vanishes_on_tautological_forms(terms):
    f = Form(1)
    for i, c in terms:
        f = f + Form.generator(i, c)
    assert not exterior_derivative(exterior_derivative(f, CTX), CTX)


def test_d_squared_of_connection_is_differential_bianchi():
    # first jets of R are free, so dd w12 is the second Bianchi identity, not zero
    dd = exterior_derivative(exterior_derivative(CTX.gen("w12"), CTX), CTX)
    w = [CTX.index[f"w{a}"] for a in range(1, 5)]
    expect = Scalar.symbol("R1234_1") - Scalar.symbol("R1214_3") + Scalar.symbol("R1213_4")
    assert dd.coefficient((w[0], w[2], w[3])) == expect
    assert dd.generators_used() <= set(w)


@given(scalars(), scalars(), scalars(), st.dictionaries(st.sampled_from(SYMS), small, min_size=4, max_size=4))
def test_scalar_exact_ring(a, b, c, values):
    assert (a + b) * c == a * c + b * c
    assert (a * b).evaluate(values) == a.evaluate(values) * b.evaluate(values)
    assert (a - a).is_zero


@given(st.permutations([1, 2, 3, 4]))
def test_riemann_symmetries(p):
    a, b, c, d = p
    R = riemann(a, b, c, d)
    assert R == -riemann(b, a, c, d) == -riemann(a, b, d, c) == riemann(c, d, a, b)
    cyc = riemann(a, b, c, d, True) + riemann(a, c, d, b, True) + riemann(a, d, b, c, True)
    assert cyc.is_zero


# Cartan characters

THETA = bd.build_theta_system()
CHART = bd.theta_chart(THETA)
EQS = integral_element_equations(THETA, CHART)


@settings(max_examples=8)
@given(st.integers(0, 10 ** 6))
def test_polar_spaces_nest(seed):
    rng = random.Random(seed)
    point = integral_point(EQS, CHART.variables, rng)
    flag = FlagChart.generic(4, rng)
    prev = []
    for k in range(4):
        pm = polar_space(THETA, CHART, flag, point, k)
        assert rank(prev + pm.rows) == pm.rank
        assert pm.rank >= rank(prev)
        prev = pm.rows
        vectors = flag.vectors(CHART, point)[:k]
        assert brute_force_character(THETA, vectors, rng) == pm.rank


# y/z coordinates


@given(st.lists(small, min_size=12, max_size=12))
def test_yz_bijection(vals):
    lam = dict(zip(sorted(bd.yz_inverse()), vals))
    yz = {n: e.evaluate(lam) for n, e in bd.yz_forward().items()}
    back = {n: e.evaluate(yz) for n, e in bd.yz_inverse().items()}
    assert back == lam


# numeric fields

poly_terms = st.lists(st.tuples(st.integers(-3, 3), st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)),
                      min_size=1, max_size=4)


def poly(terms):
    return " + ".join(f"({c})*x^{i}*y^{j}*z^{k}" for c, i, j, k in terms)


@settings(max_examples=25)
@given(poly_terms, st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_fd_matches_symbolic(terms, p):
    f = ExprField(poly(terms) + " + sin(x*y)", ("x", "y", "z"))
    for i in range(3):
        exact = f.diff(i)(p)
        assert f.fd_derivative(i, p, h=1e-5) == pytest.approx(exact, abs=1e-7 * (1 + abs(exact)))


@settings(max_examples=25)
@given(st.lists(st.floats(0.5, 3), min_size=4, max_size=4), st.integers(1, 3),
       st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_hodge_twice(diag, k, comps):
    from itertools import combinations

    coords = ("a", "b", "c", "d")
    m = MetricField(coords, [[diag[i] if i == j else 0 for j in range(4)] for i in range(4)])
    form = {idx: v for idx, v in zip(combinations(range(4), k), comps)}
    twice = nc.hodge_star(nc.hodge_star(form, m, [0] * 4), m, [0] * 4)
    sign = (-1) ** (k * (4 - k))
    for idx, v in form.items():
        assert twice.get(idx, 0.0) == pytest.approx(sign * v, abs=1e-10)


@settings(max_examples=5)
@given(st.fractions(min_value=-3, max_value=3, max_denominator=5))
def test_dep_invariant_under_block_rotation(angle):
    from pathlib import Path

    import edslab
    from edslab.dsl import parse_fields
    from edslab.numeric.fields import SampleSet

    ff = parse_fields((Path(edslab.__file__).parent / "data" / "curved_blockdiag.fields").read_text())
    rotated = ff.coframe.rotated(0, 1, str(angle) + "*x")
    assert nc.dep_residual(ff.metric, rotated, SampleSet.random(4, 4)).max < 1e-12


@settings(max_examples=25)
@given(poly_terms, poly_terms, st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_biortho_contractions(tf, tg, p):
    coords = ("x", "y", "z", "w")
    f = ExprField(poly(tf) + " + w^2", coords)
    g = ExprField(poly(tg) + " + x*w", coords)
    *_, df, dg, V, W = nc._biortho_vector(f, g, MetricField.flat(coords), np.array(p))
    scale = 1 + np.linalg.norm(W) * (np.linalg.norm(df) + np.linalg.norm(dg))
    assert abs(W @ df) < 1e-10 * scale and abs(W @ dg) < 1e-10 * scale


# DSL round trips

NAMES = ["a", "b", "c", "e"]


@st.composite
def systems(draw):
    lines = ["[generators]", " ".join(NAMES), "[symbols]", "coordinate: x y", "[structure]"]
    for n in NAMES:
        terms = []
        for _ in range(draw(st.integers(0, 3))):
            i, j = draw(st.lists(st.sampled_from(NAMES), min_size=2, max_size=2, unique=True))
            coeff = draw(st.sampled_from(["1", "-2", "3/4", "x", "x^2*y", "(x + 1)"]))
            terms.append(f"{coeff}*{i}^{j}")
        lines.append(f"d {n} = " + (" + ".join(terms) if terms else "0"))
    lines.append("[ideal]")
    for _ in range(draw(st.integers(0, 2))):
        lines.append(draw(st.sampled_from(NAMES)) + " + " + draw(st.sampled_from(["x", "2"])) + "*" + draw(st.sampled_from(NAMES)))
    lines += ["[independence]", "c^e"]
    return "\n".join(lines) + "\n"


@settings(max_examples=100)
@given(systems())
def test_dsl_round_trip(text):
    printed = print_system(parse_system(text))
    assert print_system(parse_system(printed)) == printed
    assert canonical(printed) == printed


# command runs


@settings(max_examples=3)
@given(st.integers(0, 1000))
def test_reports_deterministic(seed):
    a = cli.to_json(cli.run("characters", {"seed": seed})[0])
    b = cli.to_json(cli.run("characters", {"seed": seed})[0])
    assert a == b


@settings(max_examples=5)
@given(st.floats(1e-12, 1e-4))
def test_failing_tolerance_exit_code(tol):
    _, code = cli.run("dep-check", {"tol": tol, "grid": 2, "fields": "curved_rotated.fields"})
    assert code == 1


# absorption

SYSTEM = bd.prolong()
SHIFTS = homogeneous_shifts(SYSTEM.tensor)


@settings(max_examples=10)
@given(st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=3), min_size=len(SHIFTS),
                max_size=len(SHIFTS)))
def test_torsion_class_survives_homogeneous_shifts(coeffs):
    p = dict(SYSTEM.absorption.p)
    for c, s in zip(coeffs, SHIFTS):
        for k, v in s.items():
            p[k] = p.get(k, Scalar()) + Scalar.coerce(v) * c
    residual = apply_shift(SYSTEM.tensor, p)
    assert bd.torsion_functional(residual) == bd.printed_essential_T()
