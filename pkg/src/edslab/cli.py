"""Command-line entry points and machine-readable reports.

Every command prints one report (JSON or text) to stdout or ``--out``
and exits 0 when all of its checks pass, 1 when a check fails and 2 on
bad flags or unreadable inputs.  Wall time goes to stderr so that the
report bytes depend only on the inputs and the seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import random
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import blockdiag as bd
from .dsl import DSLError, parse_fields, parse_system
from .eds import FlagChart, IntegralElementChart, cartan_test, integral_element_equations, integral_point
from .scalar import Scalar

DEFAULTS = {
    "cartan-test": {"system": "blockdiag.eds"},
    "dep-check": {"fields": "curved_blockdiag.fields", "grid": 5, "tol": 1e-12},
    "diag3-check": {"fields": "spherical3.fields", "grid": 9, "tol": 1e-12},
    "triortho-check": {"fields": "flat3.fields", "grid": 5, "tol": 1e-10},
    "biortho-check": {"fields": "flat4.fields", "grid": 3, "tol": 1e-10},
    "darboux-check": {"fields": "cylinders.fields", "grid": 20, "tol": 1e-6},
    "np-check": {"fields": "np_zero.fields", "grid": 1, "tol": 1e-14},
    "curvcond-check": {"fields": "curved_blockdiag.fields", "grid": 50, "tol": 1e-6},
}
SYMBOLIC_COMMANDS = ("cartan-test", "prolong", "characters", "indeterminacy", "involutive", "blockdiag-full")
COMMANDS = SYMBOLIC_COMMANDS + ("dep-check", "diag3-check", "triortho-check", "biortho-check",
                                "darboux-check", "np-check", "curvcond-check")


class InputError(Exception):
    pass


# serialisation ----------------------------------------------------------------

def _plain(x):
    if isinstance(x, bool) or x is None or isinstance(x, (str, int)) and not isinstance(x, np.integer):
        return x
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)
    if isinstance(x, Scalar):
        return str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _float_text(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        return json.dumps(str(v))
    return "%.17g" % v


def to_json(obj, indent: int = 0) -> str:
    """Key-sorted JSON with floats at 17 significant digits."""
    obj = _plain(obj)
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        body = ",\n".join(f"{inner}{json.dumps(k)}: {to_json(obj[k], indent + 1)}" for k in sorted(obj))
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + to_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, float):
        return _float_text(obj)
    return json.dumps(obj)


def to_text(obj) -> str:
    lines = []

    def walk(prefix, x):
        if isinstance(x, dict):
            for k in sorted(x):
                walk(f"{prefix}.{k}" if prefix else k, x[k])
        elif isinstance(x, list) and any(isinstance(v, (dict, list)) for v in x):
            for i, v in enumerate(x):
                walk(f"{prefix}[{i}]", v)
        else:
            lines.append(f"{prefix}: {to_json(x)}")

    walk("", _plain(obj))
    return "\n".join(lines) + "\n"


# reports ------------------------------------------------------------------------

class Report:
    def __init__(self, command, seed, digest):
        self.command, self.seed, self.digest = command, seed, digest
        self.results: dict = {}
        self.checks: dict = {}
        self.error = None

    def check(self, name, value, tol=None, passed=None):
        if passed is None:
            passed = bool(value <= tol)
        self.checks[name] = {"value": value, "pass": bool(passed)}
        if tol is not None:
            self.checks[name]["tol"] = tol

    @property
    def passed(self) -> bool:
        return self.error is None and all(c["pass"] for c in self.checks.values())

    def as_dict(self) -> dict:
        out = {"command": self.command, "inputs_digest": self.digest, "seed": self.seed,
               "results": self.results, "checks": self.checks, "passed": self.passed}
        if self.error is not None:
            out["error"] = self.error
        return out


def locate(name: str) -> Path:
    """A path as given, or else a file shipped with the package."""
    p = Path(name)
    if p.exists():
        return p
    shipped = resources.files("edslab") / "data" / name
    if shipped.is_file():
        return Path(str(shipped))
    raise InputError(f"no such file: {name}")


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def inputs_digest(command: str, options: dict, texts: dict) -> str:
    h = hashlib.sha256()
    h.update(to_json({"command": command, "options": options}).encode())
    for key in sorted(texts):
        h.update(key.encode() + b"\0" + texts[key].encode() + b"\0")
    return h.hexdigest()


def _samples(ff, n_dim, count, seed, grid=False):
    from .numeric.fields import SampleSet

    box = ff.box or (-1.0, 1.0)
    if grid:
        return SampleSet.grid(n_dim, count, box)
    return SampleSet.random(n_dim, count, seed, box)


def _need(ff, *names):
    missing = [n for n in names if n not in ff.fields]
    if missing:
        raise InputError(f"field file lacks {missing}")
    return [ff.fields[n] for n in names]


# commands -------------------------------------------------------------------------

def cmd_cartan_test(rep, opts, inputs):
    sys_ = parse_system(inputs["system"])
    chart = IntegralElementChart(sys_)
    flag = FlagChart.from_minors(1, 0, 1, 0) if sys_.p == 4 else FlagChart.identity(sys_.p)
    eqs = integral_element_equations(sys_, chart)
    point = integral_point(eqs, chart.variables, random.Random(opts["seed"]))
    v = cartan_test(sys_, chart, flag, point, seed=opts["seed"], trials=opts["trials"])
    rep.results.update({"characters": list(v.characters),
                        "certificate": {"sum_ck": v.sum_ck, "codim": v.codim},
                        "equations": [str(e) for e in eqs],
                        "verdict": "passes" if v.passes else "fails"})
    rep.check("cartan_test", v.passes, passed=v.passes)


def cmd_prolong(rep, opts, inputs):
    system = bd.prolong()
    pres = system.presentation
    residual = {}
    for (a, i, j), c in sorted(system.absorption.residual.items()):
        if c:
            th, wi, wj = pres.names([pres.theta[a], pres.omega[i], pres.omega[j]])
            residual[f"d{th}[{wi}^{wj}]"] = str(c)
    T = bd.essential_torsion_scalar(system)
    rep.results.update({"residual_torsion": residual, "essential_torsion": str(T),
                        "essential_torsion_yz": str(bd.yz_transform(T))})
    th24 = bd.theta_index(2, 4)
    rows = {a for (a, _, _), c in system.absorption.residual.items() if c}
    rep.check("residual_in_one_row", pres.names([pres.theta[a] for a in sorted(rows)]), passed=rows <= {th24})
    rep.check("torsion_matches_constraint", True, passed=bd.yz_transform(T) == bd.constraint_T())


def _restricted_tableau():
    return bd.restrict_to_S()


def cmd_characters(rep, opts, inputs):
    from .pfaffian import reduced_characters

    restricted = _restricted_tableau()
    chars = reduced_characters(restricted.tableau, seed=opts["seed"], trials=opts["trials"])
    rep.results.update({"characters": list(chars.s), "weighted_sum": chars.weighted,
                        "trials": opts["trials"]})
    rep.check("trials_agree", True, passed=True)


def cmd_indeterminacy(rep, opts, inputs):
    report = bd.full_report(opts["seed"], opts["trials"])
    rep.results.update({"r1": report.r1, "blocks": report.blocks})
    total = sum(report.blocks.values())
    rep.check("blocks_sum_to_r1", total, passed=total == report.r1)


def cmd_involutive(rep, opts, inputs):
    report = bd.full_report(opts["seed"], opts["trials"])
    v = report.verdict
    rep.results.update({"verdict": "involutive" if v.involutive else "not involutive",
                        "certificate": {"weighted_sum": v.weighted_sum, "r1": v.r1},
                        "characters": list(v.characters)})
    rep.check("involutive", v.involutive, passed=v.involutive)


def cmd_blockdiag_full(rep, opts, inputs):
    system = bd.prolong()
    T = bd.essential_torsion_scalar(system)
    report = bd.full_report(opts["seed"], opts["trials"])
    v = report.verdict
    rep.results.update({
        "essential_torsion": str(T),
        "characters": list(report.characters),
        "r1": report.r1,
        "blocks": report.blocks,
        "certificate": {"weighted_sum": v.weighted_sum, "r1": v.r1},
        "verdict": "involutive" if v.involutive else "not involutive",
        "family_dimension_after_Y": bd.family_dimension_after_Y(
            [bd.random_locus_point(opts["seed"])[n] for n in bd.Y_NAMES]),
    })
    rep.check("torsion_free_on_locus", v.torsion_free, passed=v.torsion_free)
    rep.check("involutive", v.involutive, passed=v.involutive)


def _frobenius(rep, opts, inputs, dim, fn):
    ff = parse_fields(inputs["fields"])
    if ff.metric is None or ff.coframe is None or len(ff.coords) != dim:
        raise InputError(f"needs a {dim}-dimensional metric and coframe")
    rec = fn(ff.metric, ff.coframe, _samples(ff, dim, opts["grid"], opts["seed"], grid=True))
    rep.results.update({"per_form": rec.per_form, "worst_point": rec.worst_point,
                        "points": opts["grid"] ** dim})
    rep.check("max_residual", rec.max, opts["tol"])


def cmd_dep_check(rep, opts, inputs):
    from .numeric.checks import dep_residual

    _frobenius(rep, opts, inputs, 4, dep_residual)


def cmd_diag3_check(rep, opts, inputs):
    from .numeric.checks import diag3_residual

    _frobenius(rep, opts, inputs, 3, diag3_residual)


def cmd_triortho_check(rep, opts, inputs):
    from .numeric.checks import triply_orthogonal_residuals

    ff = parse_fields(inputs["fields"])
    f, g = _need(ff, "f", "g")
    rec = triply_orthogonal_residuals(f, g, _samples(ff, 3, opts["grid"], opts["seed"], grid=True), ff.metric)
    rep.results.update({"reduced": rec.reduced})
    for name in ("orthogonality", "surface_forming", "simplified"):
        rep.check(name, getattr(rec, name), opts["tol"])


def cmd_biortho_check(rep, opts, inputs):
    from .numeric.checks import biortho_residuals

    ff = parse_fields(inputs["fields"])
    f, g = _need(ff, "f", "g")
    rec = biortho_residuals(f, g, _samples(ff, 4, opts["grid"], opts["seed"], grid=True), ff.metric)
    rep.results.update({"vector_norm": rec.vector_norm, "raw_complement": list(rec.raw_complement)})
    rep.check("contraction_f", rec.contraction_f, opts["tol"])
    rep.check("contraction_g", rec.contraction_g, opts["tol"])
    rep.check("complement", max(rec.complement), opts["tol"])


def cmd_darboux_check(rep, opts, inputs):
    from .numeric.checks import darboux_residual

    ff = parse_fields(inputs["fields"])
    (f,) = _need(ff, "f")
    rec = darboux_residual(f, _samples(ff, len(ff.coords), opts["grid"], opts["seed"]), metric=ff.metric)
    rep.results.update({"umbilic_degenerate": rec.umbilic_degenerate, "points": opts["grid"]})
    rep.check("darboux_residual", rec.residual, opts["tol"])


def cmd_np_check(rep, opts, inputs):
    ff = parse_fields(inputs["fields"])
    unknown = {n.rsplit("_", 1)[0] for n in ff.fields} - set(bd.NP_NAMES)
    bad = [n for n in ff.fields if not n.endswith(("_re", "_im"))]
    if unknown or bad:
        raise InputError(f"NP fields are named <scalar>_re / <scalar>_im with scalar in {bd.NP_NAMES}")
    if ff.coords:
        points = list(_samples(ff, len(ff.coords), opts["grid"], opts["seed"]))
    else:
        points = [()]
    worst = {"reality": 0.0, "constraint": 0.0}
    triples = []
    for p in points:
        vals = {}
        for name in bd.NP_NAMES:
            re_ = ff.fields[f"{name}_re"](p) if f"{name}_re" in ff.fields else 0.0
            im_ = ff.fields[f"{name}_im"](p) if f"{name}_im" in ff.fields else 0.0
            vals[name] = complex(re_, im_)
        rec = bd.np_constraint(bd.NPScalars(**vals))
        worst["reality"] = max(worst["reality"], max(abs(r) for r in rec.reality))
        worst["constraint"] = max(worst["constraint"], abs(rec.constraint))
        triples.append({"im_K": rec.im_K, "im_K_star": rec.im_K_star, "im_Psi2": vals["Psi2"].imag})
    rep.results.update({"imaginary_parts": triples})
    rep.check("reality", worst["reality"], opts["tol"])
    rep.check("constraint", worst["constraint"], opts["tol"])


def cmd_curvcond_check(rep, opts, inputs):
    from .numeric.checks import connection_and_curvature

    ff = parse_fields(inputs["fields"])
    if ff.metric is None or ff.coframe is None or len(ff.coords) != 4:
        raise InputError("needs a 4-dimensional metric and coframe")
    worst, defect = 0.0, 0.0
    for p in _samples(ff, 4, opts["grid"], opts["seed"]):
        g = connection_and_curvature(ff.metric, ff.coframe, p)
        worst = max(worst, abs(bd.curvature_condition_residual(g)))
        defect = max(defect, g.antisymmetry_defect())
    rep.results.update({"points": opts["grid"], "connection_antisymmetry_defect": defect})
    rep.check("curvature_condition", worst, opts["tol"])


HANDLERS = {
    "cartan-test": cmd_cartan_test, "prolong": cmd_prolong, "characters": cmd_characters,
    "indeterminacy": cmd_indeterminacy, "involutive": cmd_involutive, "blockdiag-full": cmd_blockdiag_full,
    "dep-check": cmd_dep_check, "diag3-check": cmd_diag3_check, "triortho-check": cmd_triortho_check,
    "biortho-check": cmd_biortho_check, "darboux-check": cmd_darboux_check, "np-check": cmd_np_check,
    "curvcond-check": cmd_curvcond_check,
}


# driver ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edslab", description="Exterior differential systems laboratory.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--system", metavar="FILE")
    p.add_argument("--fields", metavar="FILE")
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.add_argument("--trials", type=int, default=3, metavar="K")
    p.add_argument("--grid", type=int, metavar="N", help="grid points per axis, or sample count")
    p.add_argument("--tol", type=float, metavar="X")
    p.add_argument("--report", choices=("json", "text"), default="json")
    p.add_argument("--out", metavar="FILE")
    return p


def run(command: str, flags: dict) -> tuple:
    """Execute one command.  Returns ``(report_dict, exit_code)``."""
    defaults = DEFAULTS.get(command, {})
    opts = {"seed": flags.get("seed", 0), "trials": flags.get("trials", 3),
            "grid": flags.get("grid") or defaults.get("grid"),
            "tol": flags.get("tol") if flags.get("tol") is not None else defaults.get("tol")}
    if opts["trials"] < 1 or (opts["grid"] is not None and opts["grid"] < 1):
        raise InputError("--trials and --grid must be positive")
    inputs = {}
    for key in ("system", "fields"):
        name = flags.get(key) or defaults.get(key)
        if name:
            inputs[key] = _read(locate(name))
    digest = inputs_digest(command, opts, inputs)
    rep = Report(command, opts["seed"], digest)
    code = 0
    try:
        HANDLERS[command](rep, opts, inputs)
    except (DSLError, InputError) as exc:
        rep.error, code = str(exc), 2
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        rep.error, code = f"{type(exc).__name__}: {exc}", 1
    if code == 0 and not rep.passed:
        code = 1
    return rep.as_dict(), code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        report, code = run(args.command, vars(args))
    except InputError as exc:
        parser.print_usage(sys.stderr)
        print(f"edslab: error: {exc}", file=sys.stderr)
        return 2
    text = to_json(report) + "\n" if args.report == "json" else to_text(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"wall time: {time.perf_counter() - start:.3f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
