"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import random
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

import edslab
from edslab import blockdiag as bd
from edslab import cli
from edslab.dsl import canonical, parse_fields
from edslab.eds import (FlagChart, cartan_characters, integral_element_equations, integral_point,
                        solution_codimension, symbolic_polar_matrix)
from edslab.linalg import rank, symbolic_determinant
from edslab.numeric import checks as nc
from edslab.numeric.fields import ExprField, MetricField, SampleSet
from edslab.pfaffian import prolongation_equations
from edslab.scalar import Scalar

from oracles import exterior as ox
from oracles import geometry as geo

DATA = Path(edslab.__file__).parent / "data"
DEMOS = Path(__file__).resolve().parents[1] / "demos"


@pytest.fixture
def verdict(capsys, request):
    lines = []

    def record(ok, detail=""):
        lines.append((bool(ok), detail))
        return ok

    yield record
    ok = bool(lines) and all(o for o, _ in lines)
    detail = "; ".join(d for _, d in lines if d)
    with capsys.disabled():
        print(f"\n{request.node.name}: {'PASS' if ok else 'FAIL'} {detail}")


def test_criterion_01_theta_expansion(verdict):
    ctx = bd.frame_bundle_context()
    built = bd.build_theta_system(ctx).generators
    typed = bd.expected_theta(ctx)
    same = built == typed
    names = [ctx.name_of(i) for i in range(ctx.dim)]
    oracle = [ox.clean(f) for f in ox.theta_forms()]
    mine = [ox.clean(ox.from_library(f, names)) for f in built]
    verdict(same and mine == oracle, f"{len(built)} forms, typed and oracle agree")
    assert same and mine == oracle


def test_criterion_02_integral_element_conditions(verdict):
    sys_ = bd.build_theta_system()
    chart = bd.theta_chart(sys_)
    eqs = integral_element_equations(sys_, chart)
    expected = bd.expected_lambda_conditions()
    same = set(eqs) == set(expected) and len(eqs) == 4
    codim = solution_codimension(eqs, chart.variables)
    verdict(same and codim == 4, f"codimension {codim}")
    assert same and codim == 4


def test_criterion_03_polar_analysis(verdict):
    sys_ = bd.build_theta_system()
    chart = bd.theta_chart(sys_)
    eqs = integral_element_equations(sys_, chart)
    point = integral_point(eqs, chart.variables, random.Random(0))
    cs = cartan_characters(sys_, chart, FlagChart.from_minors(1, 0, 1, 0), point)
    alpha, _ = symbolic_polar_matrix(sys_, chart, point)
    det_zero = symbolic_determinant(alpha) == Scalar() and symbolic_determinant(bd.alpha_matrix()) == Scalar()
    test = bd.theta_cartan_test()
    ok = cs[:4] == (0, 0, 0, 3) and det_zero and not test.passes and test.certificate == (3, 4)
    verdict(ok, f"c = {cs[:4]}, certificate {test.certificate}")
    assert ok


def test_criterion_04_linearisation(verdict):
    y0 = [[Scalar.symbol(f"a{b}{g}") for g in range(4)] for b in range(4)]
    xi = [Scalar.symbol(f"xi{k}") for k in range(4)]
    symbolic = bd.linearisation_symbol(y0, xi) == Scalar()
    rng = random.Random(4)
    y_num = [[Fraction(rng.randint(-9, 9), rng.randint(1, 9)) for _ in range(4)] for _ in range(4)]
    numeric = all(bd.linearisation_symbol(y_num, [Fraction(rng.randint(-50, 50), rng.randint(1, 20))
                                                 for _ in range(4)]) == Scalar() for _ in range(100))
    verdict(symbolic and numeric, "det identically zero, 100 random xi")
    assert symbolic and numeric


def test_criterion_05_torsion(verdict):
    system = bd.prolong()
    matches = all(v == bd.printed_T(int(bd.THETA_NAMES[a][2]), int(bd.THETA_NAMES[a][3]), i + 1, j + 1)
                  for (a, i, j), v in system.tensor.c.items())
    residual = system.absorption.residual
    only = residual == {(bd.theta_index(2, 4), 0, 2): bd.printed_essential_T() * 2}
    T = bd.yz_transform(bd.printed_essential_T())
    yz = T == bd.constraint_T() and all(not T.diff(z) for z in bd.Z_NAMES)
    verdict(matches and only and yz, "residual 2T w1^w3 in dth24 only")
    assert matches and only and yz


def test_criterion_06_characters_on_locus(verdict):
    reports = [bd.full_report(seed=s) for s in range(3)]
    ok = all(r.characters == (6, 6, 5, 2) and r.r1 == 41 and r.blocks == {"pi_rho": 21, "mu": 10, "nu": 10}
             and r.verdict.involutive and r.verdict.weighted_sum == 41 for r in reports)
    c = reports[0].characters
    terms = [k * s for k, s in enumerate(c, 1)]
    verdict(ok and terms == [6, 12, 15, 8], f"s' = {c}, certificate {'+'.join(map(str, terms))} = 41")
    assert ok and terms == [6, 12, 15, 8]


def test_criterion_07_relation_and_family(verdict):
    restricted = bd.restrict_to_S()
    lind = bd.lindep_form()
    pi_part = {k: v for k, v in lind.items() if not k.startswith("w")}
    phi_ok = all(restricted.locus.Phi[a] == bd.printed_phi(a + 1) for a in range(4))
    tab = bd.locus_tableau(with_relation=False)
    rows, _ = prolongation_equations(tab)
    vecs = bd.family_vectors(bd.printed_shift_family(), tab)
    solves = all(not sum((Scalar.coerce(r) * v for r, v in zip(row, vec)), Scalar()) for vec in vecs for row in rows)
    raw = rank([[v.constant_value() if v else Fraction(0) for v in vec] for vec in vecs])
    point = bd.random_locus_point(0)
    after = bd.family_dimension_after_Y([point[n] for n in bd.Y_NAMES])
    ok = pi_part == bd.relation_combo() and phi_ok and solves and raw == 25 and after == 21
    verdict(ok, f"family {raw} -> {after}")
    assert ok


def test_criterion_08_block_diagonal_metric(verdict):
    ff = parse_fields((DATA / "curved_blockdiag.fields").read_text())
    grid = SampleSet.grid(4, 5, ff.box)
    natural = nc.dep_residual(ff.metric, ff.coframe, grid).max
    rotated = nc.dep_residual(ff.metric, ff.coframe.rotated(0, 2, "t/2"), grid).max
    ok = natural < 1e-12 and rotated > 1e-3
    verdict(ok, f"natural {natural:.3g}, rotated {rotated:.3g}")
    assert ok


def test_criterion_09_curvature_condition(verdict):
    ff = parse_fields((DATA / "curved_blockdiag.fields").read_text())
    worst = max(abs(bd.curvature_condition_residual(nc.connection_and_curvature(ff.metric, ff.coframe, p)))
                for p in SampleSet.random(4, 50, seed=0, box=ff.box))
    verdict(worst < 1e-6, f"max residual {worst:.3g} over 50 samples")
    assert worst < 1e-6


def _random_poly(rng, coords):
    terms = []
    for _ in range(4):
        powers = "*".join(f"{c}^{rng.randint(0, 2)}" for c in coords)
        terms.append(f"({rng.randint(-3, 3)}/{rng.randint(1, 3)})*{powers}")
    return " + ".join(terms) + f" + {coords[rng.randint(0, 3)]}"


def test_criterion_10_orthogonal_systems(verdict):
    rng = random.Random(10)
    X4 = ("x1", "x2", "x3", "x4")
    flat4 = MetricField.flat(X4)
    worst_contraction = 0.0
    for _ in range(100):
        f, g = ExprField(_random_poly(rng, X4), X4), ExprField(_random_poly(rng, X4), X4)
        p = np.array([rng.uniform(-1, 1) for _ in range(4)])
        *_, df, dg, V, W = nc._biortho_vector(f, g, flat4, p)
        worst_contraction = max(worst_contraction, abs(W @ df), abs(W @ dg))
    ff = parse_fields((DATA / "flat4.fields").read_text())
    coord_pair = nc.biortho_residuals(ff.fields["f"], ff.fields["g"], SampleSet.grid(4, 3))
    XYZ = ("x", "y", "z")
    sphere = ExprField("x^2 + y^2 + z^2", XYZ)
    umbilic = 0.0
    for p in SampleSet.random(3, 20, seed=1, box=(0.2, 1.0)):
        n = np.array([d(p) for d in sphere.gradient()])
        for _ in range(3):
            X = np.cross(n, [rng.uniform(-1, 1) for _ in range(3)])
            umbilic = max(umbilic, nc.curvature_line_residual(sphere, p, X / np.linalg.norm(X)))
    ellipsoid = ExprField("x^2 + y^2/4 + z^2/9", XYZ)
    ell = max(nc.line_of_curvature(ellipsoid, p).residual for p in SampleSet.random(3, 20, seed=2, box=(0.2, 1.0)))
    cyl = parse_fields((DATA / "cylinders.fields").read_text())
    darboux = nc.darboux_residual(cyl.fields["f"], SampleSet.random(3, 20, box=cyl.box)).residual
    ok = (worst_contraction < 1e-10 and coord_pair.complement == (0.0, 0.0) and umbilic < 1e-12
          and ell < 1e-8 and darboux < 1e-6)
    verdict(ok, f"contraction {worst_contraction:.3g}, umbilic {umbilic:.3g}, ellipsoid {ell:.3g}, "
                f"darboux {darboux:.3g}")
    assert ok


def test_criterion_11_newman_penrose(verdict):
    rng = random.Random(11)
    worst = 0.0
    for _ in range(1000):
        v = {n: (rng.uniform(-1, 1), rng.uniform(-1, 1)) for n in bd.NP_NAMES}
        rec = bd.np_constraint(bd.NPScalars(**{n: complex(*x) for n, x in v.items()}))
        worst = max(worst, abs(rec.constraint - geo.np_constraint_parts(v)))
    exact = True
    for _ in range(50):
        tau = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        vals = dict(rho=complex(rng.uniform(-1, 1), 0), rho_p=complex(rng.uniform(-1, 1), 0),
                    tau=tau, tau_p=tau.conjugate())
        rec = bd.np_constraint(bd.NPScalars(**vals))
        exact &= all(r == 0 for r in rec.reality)
    report, _ = cli.run("np-check", {})
    triple = report["results"]["imaginary_parts"][0]
    reported = set(triple) == {"im_K", "im_K_star", "im_Psi2"}
    ok = worst < 1e-14 and exact and reported
    verdict(ok, f"max oracle gap {worst:.3g} over 1000 sets")
    assert ok


def test_criterion_12_tooling(verdict, tmp_path):
    corpus = sorted(DATA.glob("*.eds")) + sorted(DEMOS.glob("*.eds"))
    round_trip = all(canonical(canonical(p.read_text())) == canonical(p.read_text()) for p in corpus)
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.json"
        cli.main(["blockdiag-full", "--seed", "5", "--out", str(path)])
        outs.append(path.read_bytes())
    ok = bool(corpus) and round_trip and outs[0] == outs[1]
    verdict(ok, f"{len(corpus)} system files, reports byte-identical")
    assert ok
