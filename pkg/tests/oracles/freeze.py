"""Regenerate ``frozen.json`` from the oracles alone (no package imports).

Run from the tests directory: ``python -m oracles.freeze``.
"""

import json
import random
from fractions import Fraction
from pathlib import Path

import numpy as np
import sympy as sp

from . import exterior as ex
from . import geometry as geo

HERE = Path(__file__).parent

CURVED = {
    "A": "2 + t*y/2 + x**2*z/4", "B": "(t + z)/4", "C": "2 + x*y/3",
    "D": "3 + t*x/2", "E": "(y - x)/4", "F": "2 + z**2*t/3",
}
CURVED_POINTS = [[0.1, -0.3, 0.5, 0.2], [-0.7, 0.4, 0.9, -0.5], [0.6, 0.6, -0.2, 0.8]]
ELLIPSOID_POINT = [0.3, 0.5, 0.7]
BIORTHO_F = "x1*x2 + x3**2 - x4"
BIORTHO_G = "x1 + x2*x4 + x3*x1**2"
BIORTHO_POINTS = [[0.2, -0.4, 0.7, 0.1], [0.5, 0.3, -0.6, 0.9]]


def curved_metric():
    t, x, y, z = coords = sp.symbols("t x y z", real=True)
    v = {k: sp.sympify(s, locals=dict(zip("txyz", coords))) for k, s in CURVED.items()}
    g = sp.zeros(4)
    g[0, 0], g[0, 1], g[1, 0], g[1, 1] = v["A"], v["B"], v["B"], v["C"]
    g[2, 2], g[2, 3], g[3, 2], g[3, 3] = v["D"], v["E"], v["E"], v["F"]
    E = sp.zeros(4)
    E[0, 0], E[0, 1], E[1, 1] = sp.sqrt(v["A"]), v["B"] / sp.sqrt(v["A"]), sp.sqrt(v["C"] - v["B"] ** 2 / v["A"])
    E[2, 2], E[2, 3], E[3, 3] = sp.sqrt(v["D"]), v["E"] / sp.sqrt(v["D"]), sp.sqrt(v["F"] - v["E"] ** 2 / v["D"])
    return g, E, list(coords)


def sphere_product():
    a, b, c, d = coords = sp.symbols("a b c d", real=True)
    g = sp.diag(1, sp.sin(a) ** 2, 4, 4 * sp.sin(c) ** 2)
    E = sp.diag(1, sp.sin(a), 2, 2 * sp.sin(c))
    return g, E, list(coords)


def theta_values():
    rng = random.Random("theta-oracle")
    lam = {}
    base = ["w1", "w2", "w3", "w4"]
    fiber = ex.ORDER[4:]
    vecs = []
    for b in base:
        v = [sp.Integer(int(n == b)) for n in ex.ORDER]
        for f in fiber:
            q = sp.Rational(rng.randint(1, 50), rng.randint(1, 50))
            lam[f"{b}:{f}"] = str(q)
            v[ex.ORDER.index(f)] = q
        vecs.append(v)
    vals = [str(ex.evaluate(th, vecs, ex.ORDER)) for th in ex.theta_forms()]
    return lam, vals


def main():
    out = {}
    g, E, coords = curved_metric()
    rows = []
    for p in CURVED_POINTS:
        gamma, R = geo.frame_connection_and_R1234(g, E, coords, p)
        rows.append({"point": p, "R1234": R, "residual": geo.curvature_condition(gamma, R)})
    out["curved"] = rows
    g, E, coords = sphere_product()
    gamma, R = geo.frame_connection_and_R1234(g, E, coords, [0.7, 0.2, 1.1, -0.4])
    out["sphere_product"] = {"point": [0.7, 0.2, 1.1, -0.4], "R1234": R,
                             "residual": geo.curvature_condition(gamma, R)}

    s = ex.frame_structure()
    ddw1 = ex.d_constant_coefficients(s["w1"], s, ex.ORDER)
    out["ddw1_unreduced"] = {"*".join(k): str(v) for k, v in sorted(ddw1.items())}
    lam, vals = theta_values()
    out["theta_values"] = {"lambda": lam, "values": vals}

    p = np.array(ELLIPSOID_POINT)
    grad = np.array([2 * p[0], 2 * p[1] / 4, 2 * p[2] / 9])
    hess = np.diag([2.0, 2 / 4, 2 / 9])
    dirs = geo.principal_directions(grad, hess)
    out["ellipsoid"] = {"point": ELLIPSOID_POINT,
                        "eigenvalues": [lam_ for lam_, _ in dirs],
                        "residuals": [geo.curvature_line_residual(grad, hess, X) for _, X in dirs],
                        "mixed_residual": geo.curvature_line_residual(
                            grad, hess, (dirs[0][1] + dirs[1][1]) / np.sqrt(2))}

    xs = sp.symbols("x1 x2 x3 x4", real=True)
    f = sp.sympify(BIORTHO_F, locals={str(x): x for x in xs})
    gg = sp.sympify(BIORTHO_G, locals={str(x): x for x in xs})
    brows = []
    for pt in BIORTHO_POINTS:
        at = dict(zip(xs, pt))
        num = lambda e: float(e.subs(at))
        df = np.array([num(sp.diff(f, x)) for x in xs])
        dg = np.array([num(sp.diff(gg, x)) for x in xs])
        Hf = np.array([[num(sp.diff(f, a, b)) for b in xs] for a in xs])
        Hg = np.array([[num(sp.diff(gg, a, b)) for b in xs] for a in xs])
        W, V = geo.biortho_vector(df, dg, Hf, Hg)
        brows.append({"point": pt, "W": W.tolist(), "V": V.tolist()})
    out["biortho"] = {"f": BIORTHO_F, "g": BIORTHO_G, "rows": brows}

    rng = random.Random("np-oracle")
    names = ["rho", "rho_p", "tau", "tau_p", "kappa", "kappa_p", "sigma", "sigma_p", "Psi2", "Phi11", "Lambda"]
    nrows = []
    for _ in range(5):
        v = {n: (rng.uniform(-1, 1), rng.uniform(-1, 1)) for n in names}
        nrows.append({"scalars": v, "constraint": geo.np_constraint_parts(v),
                      "reality": list(geo.np_reality_parts(v))})
    out["np"] = nrows

    text = json.dumps(out, indent=1, sort_keys=True) + "\n"
    (HERE / "frozen.json").write_text(text)


if __name__ == "__main__":
    main()
