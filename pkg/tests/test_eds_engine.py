import random
from fractions import Fraction

import pytest

from edslab.blockdiag import (build_theta_system, expected_lambda_conditions, frame_bundle_context, theta_cartan_test,
                              theta_chart)
from edslab.eds import (ChartMismatchError, ExteriorSystem, FlagChart, FlagError, InconsistentSystemError,
                        IntegralElementChart, brute_force_character, cartan_characters, cartan_test,
                        integral_element_equations, integral_point, polar_space, solution_codimension,
                        symbolic_polar_matrix)
from edslab.forms import CoframeContext, Form, exterior_derivative, wedge, wedge_all
from edslab.linalg import rank, symbolic_determinant
from edslab.scalar import Scalar


@pytest.fixture(scope="module")
def theta():
    sys_ = build_theta_system()
    chart = theta_chart(sys_)
    eqs = integral_element_equations(sys_, chart)
    point = integral_point(eqs, chart.variables, random.Random(0))
    return sys_, chart, eqs, point


def flat_context(n):
    names = [f"e{i}" for i in range(1, n + 1)]
    return CoframeContext(names).with_tables({nm: Form(2) for nm in names})


def test_lambda_conditions(theta):
    _, _, eqs, _ = theta
    assert set(eqs) == set(expected_lambda_conditions())
    assert len(eqs) == 4


def test_codimension(theta):
    sys_, chart, eqs, _ = theta
    assert solution_codimension(eqs, chart.variables) == 4
    assert solution_codimension(eqs + eqs[:1], chart.variables) == 4
    assert solution_codimension([]) == 0


def test_zero_ideal_gives_no_equations():
    ctx = flat_context(4)
    sys_ = ExteriorSystem(ctx, [], wedge_all([ctx.gen("e1"), ctx.gen("e2")]))
    assert integral_element_equations(sys_, IntegralElementChart(sys_)) == []


def test_full_rank_two_forms_are_inconsistent():
    ctx = flat_context(4)
    e = [ctx.gen(f"e{i}") for i in range(1, 5)]
    gens = [wedge(e[0], e[2]), wedge(e[0], e[3]), wedge(e[1], e[2]), wedge(e[1], e[3])]
    sys_ = ExteriorSystem(ctx, gens, wedge_all(e))
    chart = IntegralElementChart(sys_)
    eqs = integral_element_equations(sys_, chart)
    # brute force: the only transverse 4-plane is the whole space, where each 2-form is 1 on some pair
    vs = chart.vectors()
    values = {(g, i, j): g.evaluate(vs[i], vs[j]) for g in gens for i in range(4) for j in range(i + 1, 4)}
    assert any(v == 1 for v in values.values())
    with pytest.raises(InconsistentSystemError):
        solution_codimension(eqs, chart.variables)


def test_chart_mismatch():
    a = build_theta_system()
    ctx = flat_context(4)
    b = ExteriorSystem(ctx, [], wedge(ctx.gen("e1"), ctx.gen("e2")))
    with pytest.raises(ChartMismatchError):
        integral_element_equations(a, IntegralElementChart(b))


def test_polar_rank_at_minor_flag(theta):
    sys_, chart, _, point = theta
    pm = polar_space(sys_, chart, FlagChart.from_minors(1, 0, 1, 0), point, 3)
    assert pm.rank == 3
    names = sorted(sys_.ctx.name_of(i) for f in pm.annihilators for (i,) in f.terms)
    assert names == ["w13", "w23", "w24"]


def test_flag_outside_integral_element(theta):
    sys_, chart, _, _ = theta
    bad = {v: Scalar.const(Fraction(k + 2, 3)) for k, v in enumerate(chart.variables)}
    with pytest.raises(FlagError):
        polar_space(sys_, chart, FlagChart.identity(4), bad, 3)


def test_degenerate_flag_rank_zero(theta):
    sys_, chart, _, point = theta
    rows, _ = symbolic_polar_matrix(sys_, chart, point)
    zero = [[x.evaluate({"A": 0, "B": 0, "C": 0, "D": 0}) for x in row] for row in rows]
    assert rank(zero) == 0


def test_alpha_determinant_vanishes(theta):
    sys_, chart, _, point = theta
    rows, cols = symbolic_polar_matrix(sys_, chart, point)
    assert len(rows) == len(cols) == 4
    assert symbolic_determinant(rows).is_zero()


def test_characters_minor_flag_and_generic(theta):
    sys_, chart, _, point = theta
    assert cartan_characters(sys_, chart, FlagChart.from_minors(1, 0, 1, 0), point) == (0, 0, 0, 3, 6)
    generic = FlagChart.generic(4, random.Random(11))
    assert cartan_characters(sys_, chart, generic, point) == (0, 0, 0, 3, 6)


def test_c3_at_other_flag_equals_alpha_rank(theta):
    sys_, chart, _, point = theta
    flag = FlagChart.from_minors(0, 1, 0, 1)
    c = cartan_characters(sys_, chart, flag, point)
    rows, _ = symbolic_polar_matrix(sys_, chart, point)
    alpha = [[x.evaluate({"A": 0, "B": 1, "C": 0, "D": 1}) for x in row] for row in rows]
    assert c[3] == rank(alpha)


def test_brute_force_characters_agree(theta):
    sys_, chart, _, point = theta
    flag = FlagChart.generic(4, random.Random(5))
    vectors = flag.vectors(chart, point)
    cs = cartan_characters(sys_, chart, flag, point)
    for k in range(4):
        assert brute_force_character(sys_, vectors[:k], random.Random(k)) == cs[k]


def test_cartan_test_fails_for_theta_system():
    v = theta_cartan_test()
    assert not v.passes and v.certificate == (3, 4)


def test_zero_ideal_passes():
    ctx = flat_context(4)
    sys_ = ExteriorSystem(ctx, [], wedge(ctx.gen("e1"), ctx.gen("e2")))
    chart = IntegralElementChart(sys_)
    v = cartan_test(sys_, chart, FlagChart.identity(2))
    assert v.passes and v.characters == (0, 0, 2)


def test_frobenius_system_passes():
    # theta = dz - p dx - q dy with the contact-type structure d theta = 0 mod theta
    ctx = CoframeContext(["t", "x", "y"]).with_tables({"t": Form(2), "x": Form(2), "y": Form(2)})
    sys_ = ExteriorSystem(ctx, [ctx.gen("t")], wedge(ctx.gen("x"), ctx.gen("y")))
    chart = IntegralElementChart(sys_)
    v = cartan_test(sys_, chart, FlagChart.identity(2))
    # direct enumeration: H(E_0) and H(E_1) are both cut out by theta alone
    assert v.characters == (1, 1, 1)
    assert v.passes and v.certificate == (2, 2)
