"""Command-line front end: sml <command> [flags].

Every command emits one report: JSON (schema "sml/1") or CSV with fixed
columns per command.  Exit codes: 0 pass, 1 a verification failed, 2 usage
error, 3 refusal (the input does not meet a hypothesis).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Optional, Sequence

from . import algebra as alg
from . import cocycle as cc
from . import multiplicity as mu
from . import rankone as ro
from . import specoracle as so
from .mset import MSet, parse_mset

SCHEMA = "sml/1"

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_REFUSAL = 0, 1, 2, 3

CSV_COLUMNS = {
    "realize": ["summands", "perm", "units", "support", "annotation", "verified"],
    "orbits": ["length", "count"],
    "simulate": ["stage", "m", "lo", "hi", "prediction", "pass"],
    "weak-limit": ["stage", "m", "lo", "hi", "prediction", "pass"],
    "cocycle-verify": ["stage", "m", "lo", "hi", "value_re", "value_im", "radius", "prediction_re", "prediction_im",
                       "distance", "pass"],
    "multiplicity": ["operation", "result"],
    "plan": ["route", "parameters", "caveats"],
    "oracle": ["operation", "mset", "census"],
}

logger = logging.getLogger("sml")

_GLOBAL_KEYS = ("func", "command", "format", "output", "timestamps", "verbose")


class UsageError(Exception):
    pass


class Refusal(Exception):
    def __init__(self, message: str, inputs: Optional[dict] = None):
        super().__init__(message)
        self.inputs = inputs or {}


@dataclass
class Report:
    command: str
    records: list = field(default_factory=list)
    inputs: dict = field(default_factory=dict)
    exit_code: int = EXIT_PASS
    rows: Optional[list] = None

    def finalize(self) -> "Report":
        if self.exit_code == EXIT_PASS and any(r.get("pass") is False for r in self.records):
            self.exit_code = EXIT_FAIL
        return self

    def to_json(self, timestamps: bool = False) -> dict:
        rec = {"schema": SCHEMA, "command": self.command, "inputs": self.inputs,
               "exit_code": self.exit_code, "records": self.records}
        if timestamps:
            rec["generated_at"] = datetime.now(timezone.utc).isoformat()
        return rec


def emit(report: Report, fmt: str = "json", timestamps: bool = False) -> bytes:
    if fmt == "json":
        return (json.dumps(report.to_json(timestamps), indent=2, sort_keys=True) + "\n").encode()
    if fmt != "csv":
        raise UsageError(f"unknown format {fmt!r}")
    cols = CSV_COLUMNS[report.command]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in report.rows if report.rows is not None else report.records:
        w.writerow([_cell(row.get(c, "")) for c in cols])
    return buf.getvalue().encode()


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    return "" if v is None else str(v)


# ------------------------------------------------------------------ parsing

_LEVEL_RE = re.compile(r"^(\d+):(.+)$")


def parse_levelset(text: str, con: ro.TowerConstruction) -> ro.LevelSet:
    """``stage:levels`` with levels a comma list of ints and inclusive ranges a-b, or ``all``."""
    m = _LEVEL_RE.match(text.strip())
    if not m:
        raise UsageError(f"level set {text!r} is not of the form stage:levels")
    n = int(m.group(1))
    body = m.group(2).strip()
    if body == "all":
        return ro.LevelSet.full(con, n)
    levels: list[int] = []
    for tok in body.split(","):
        tok = tok.strip()
        if "-" in tok:
            a, b = tok.split("-", 1)
            levels.extend(range(int(a), int(b) + 1))
        elif tok:
            levels.append(int(tok))
    A = ro.LevelSet(n, levels)
    try:
        A.check(con)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return A


def parse_group(text: Optional[str], n: int) -> Optional[mu.PermGroupSpec]:
    """``trivial``, ``S<k>``, ``A<k>``, ``C<k>`` (on the first k points) or JSON generators."""
    if text is None:
        return None
    t = text.strip()
    if t == "trivial":
        return mu.PermGroupSpec.trivial(n)
    m = re.match(r"^([SAC])(\d+)$", t)
    if m:
        k = int(m.group(2))
        if k > n:
            raise UsageError(f"{t} does not fit in degree {n}")
        return {"S": mu.PermGroupSpec.symmetric, "A": mu.PermGroupSpec.alternating,
                "C": mu.PermGroupSpec.cyclic}[m.group(1)](n, k)
    try:
        gens = json.loads(t)
    except json.JSONDecodeError:
        raise UsageError(f"cannot parse group {text!r}") from None
    return mu.PermGroupSpec(n, tuple(tuple(g) for g in gens))


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a rational number: {text!r}") from None


# ----------------------------------------------------------------- commands

def cmd_realize(a) -> Report:
    E = parse_mset(a.set)
    rep = Report("realize", inputs={"set": str(E), "lcm_closed": a.lcm_closed, "truncate": a.truncate})
    try:
        if a.lcm_closed:
            R = alg.realize_lcm_closed(E, verify=a.verify)
        else:
            R = alg.realize_finite(E, verify=a.verify, truncate=a.truncate)
    except alg.RealizationRefused as exc:
        raise Refusal(str(exc), rep.inputs) from None
    rec = R.to_json()
    if a.verify:
        rec["verified"] = True
    rep.records.append(rec)
    return rep


def cmd_orbits(a) -> Report:
    if a.spec:
        G, v, H = alg.deserialize(_load_json(a.spec))
    elif a.set:
        G, v, H = alg.realize_finite(parse_mset(a.set))
    else:
        raise UsageError("orbits needs --spec or --set")
    if a.support is not None:
        H = alg.SupportSubgroup(G, frozenset(_ints(a.support)))
    L = alg.multiplicity_set_L(G, v, H)
    rep = Report("orbits", inputs={"group": alg.serialize(G, v, H)})
    census: dict[int, int] = {}
    if H.order() <= a.max_elements:
        seen = set()
        for g in G.elements(H.support):
            if g == G.zero() or g in seen:
                continue
            orb = alg.orbit(v, g)
            seen.update(orb)
            census[len(orb)] = census.get(len(orb), 0) + 1
        rep.rows = [{"length": k, "count": census[k]} for k in sorted(census)]
    rep.records.append({"L": L.to_json(), "subgroup_order": H.order(),
                        "orbit_census": {str(k): census[k] for k in sorted(census)} if census else None})
    if rep.rows is None:
        rep.rows = []
    return rep


def _construction(path: str) -> tuple[dict, ro.TowerConstruction]:
    rec = _load_json(path)
    try:
        return rec, ro.construction_from_json(rec)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"bad construction spec {path}: {exc}") from None


def cmd_simulate(a) -> Report:
    _, con = _construction(a.spec)
    rep = Report("simulate", inputs={"spec": con.to_json(), "stages": a.stages})
    mc = ro.classify_measure(con, a.stages)
    rep.records.append({
        "heights": ro.heights(con, a.stages),
        "widths": [ro._qstr(con.width(n)) for n in range(1, a.stages + 1)],
        "measure": mc.verdict, "partial_sum": ro._qstr(mc.partial_sum), "horizon": mc.horizon,
    })
    rows = []
    if a.m:
        if not a.A:
            raise UsageError("--m needs --A")
        A = parse_levelset(a.A, con)
        B = parse_levelset(a.B, con) if a.B else A
        for m in _ints(a.m):
            try:
                bd = ro.correlation(con, A, B, m, a.N)
            except ro.InsufficientStage as exc:
                raise Refusal(str(exc), rep.inputs) from None
            rec = {"stage": bd.stage_used, "m": m, "lo": ro._qstr(bd.lo), "hi": ro._qstr(bd.hi),
                   "prediction": "", "pass": ""}
            rows.append(rec)
            rep.records.append({"correlation": bd.to_json(), "m": m})
    rep.rows = rows
    return rep


def _weak_rows(records) -> list:
    rows = []
    for r in records:
        pred = r.get("predicted")
        if isinstance(pred, list):
            pred = pred[0] if pred[0] == pred[1] else f"{pred[0]}..{pred[1]}"
        rows.append({"stage": r.get("stage"), "m": r.get("m", ""), "lo": r.get("lo", ""), "hi": r.get("hi", ""),
                     "prediction": pred if pred is not None else "", "pass": r.get("pass")})
    return rows


def cmd_weak_limit(a) -> Report:
    _, con = _construction(a.spec)
    A = parse_levelset(a.A, con) if a.A else ro.LevelSet.full(con, 3)
    B = parse_levelset(a.B, con) if a.B else A
    tol = _fraction(a.tol)
    rep = Report("weak-limit", inputs={"spec": con.to_json(), "case": a.case, "p": a.p, "tol": ro._qstr(tol),
                                       "A": A.to_json(), "B": B.to_json(), "min_height": a.min_height})
    try:
        res = ro.weak_limit_check(con, a.case, a.p, A, B, tol=tol, min_height=a.min_height,
                                  max_tests=a.max_tests)
    except ro.HypothesisMismatch as exc:
        raise Refusal(str(exc), rep.inputs) from None
    rep.records = res.records
    if not res.passed and all(r.get("pass") is not False for r in res.records):
        rep.exit_code = EXIT_FAIL
    rep.rows = _weak_rows(res.records)
    return rep


def _cocycle(path: str) -> cc.ProductCocycle:
    rec = _load_json(path)
    try:
        return cc.cocycle_from_json(rec)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"bad cocycle spec {path}: {exc}") from None


def _chi(text: Optional[str]):
    return None if text is None else _ints(text)


def cmd_cocycle_verify(a) -> Report:
    c = _cocycle(a.spec)
    con = c.construction
    A = parse_levelset(a.A, con) if a.A else ro.LevelSet.full(con, 3)
    B = parse_levelset(a.B, con) if a.B else A
    tol = _fraction(a.tol)
    inputs = {"spec": cc.cocycle_to_json(c), "mode": a.mode, "A": A.to_json(), "B": B.to_json(),
              "tol": ro._qstr(tol), "chi": a.chi, "k": a.k, "d1": a.d1, "d2": a.d2}
    rep = Report("cocycle-verify", inputs=inputs)
    try:
        if a.m is not None:
            tc = cc.twisted_correlation(c, _chi(a.chi) or [0], A, B, a.m, a.N, d1=a.d1, d2=a.d2)
            rep.records.append({"claim": "twisted", "m": a.m, "stage": tc.stage_used,
                                "value": cc.number_json(tc.value), "radius": ro._qstr(tc.radius)})
        else:
            shifts = [_ints(s) for s in a.shift] if a.shift else None
            fp = (_ints(a.fiber_pair[0]), _ints(a.fiber_pair[1])) if a.fiber_pair else None
            res = cc.verify_weak_limit_cocycle(
                c, a.mode, A=A, B=B, k=_chi(a.k), shifts=shifts, chi=_chi(a.chi), fiber_pair=fp,
                d1=a.d1, d2=a.d2, tol=tol, min_height=a.min_height, max_tests=a.max_tests)
            rep.records = res.records
            if not res.passed and all(r.get("pass") is not False for r in res.records):
                rep.exit_code = EXIT_FAIL
    except (ro.HypothesisMismatch, ro.InsufficientStage) as exc:
        raise Refusal(str(exc), rep.inputs) from None
    rows = []
    for r in rep.records:
        val = r.get("value", {})
        pred = r.get("predicted")
        skew = not isinstance(pred, dict)
        rows.append({"stage": r.get("stage"), "m": r.get("m", ""), "lo": r.get("lo", ""), "hi": r.get("hi", ""),
                     "value_re": val.get("re", ""), "value_im": val.get("im", ""), "radius": r.get("radius", ""),
                     "prediction_re": pred if skew else pred.get("re", ""),
                     "prediction_im": "" if skew else pred.get("im", ""),
                     "distance": r.get("distance", ""), "pass": r.get("pass", "")})
    rep.rows = rows
    return rep


def cmd_multiplicity(a) -> Report:
    op = a.op
    rep = Report("multiplicity", inputs={k: v for k, v in sorted(vars(a).items())
                                         if v is not None and k not in _GLOBAL_KEYS})
    if op == "diamond":
        if not a.set:
            raise UsageError("diamond needs --set (repeatable)")
        res = MSet()
        for s in a.set:
            res = mu.diamond(res, parse_mset(s))
        out = res.to_json()
    elif op == "scale":
        out = mu.scale(a.n, parse_mset(a.set[0])).to_json()
    elif op == "factor":
        g, E = mu.factor_scale(parse_mset(a.set[0]))
        out = {"n": g, "E": E.to_json()}
    elif op == "closure":
        out = mu.semigroup_closure(_ints(a.gens), a.semigroup, a.bound).to_json()
    elif op == "double-coset":
        G = parse_group(a.group or "trivial", a.n)
        out = {"count": mu.double_coset_count(G, a.n, a.k),
               "enumeration": mu.double_coset_count_enum(G, a.n, a.k),
               "burnside": mu.double_coset_count_burnside(G, a.n, a.k), "group_order": G.order}
    elif op == "power":
        out = mu.power_multiplicities(a.n, parse_group(a.group, a.n)).to_json()
    elif op == "poisson":
        params = {}
        if a.p is not None:
            params["p"] = a.p
        if a.m is not None:
            params.update(m=a.m, k=a.k, generators=json.loads(a.generators) if a.generators else None)
        out = {"mset": mu.poisson_sets(a.kind, params, a.terms).to_json(),
               "terms": [str(t) for t in mu.poisson_terms(a.kind, params, a.terms)]}
    else:
        raise UsageError(f"unknown multiplicity op {op!r}")
    rep.records.append({"operation": op, "result": out})
    return rep


def cmd_plan(a) -> Report:
    E = parse_mset(a.set)
    rep = Report("plan", inputs={"set": str(E)})
    rep.records.append(mu.plan(E).to_json())
    return rep


def cmd_oracle(a) -> Report:
    op = a.op
    if op == "invariant-power":
        r = so.invariant_power_mset(so.FormalSpectrum.simple(a.symbols), a.n, parse_group(a.group or "trivial", a.n))
    elif op == "tensor-sym":
        r = so.tensor_vs_sym(so.FormalSpectrum.simple(a.symbols), a.n)
    elif op == "cartesian":
        r = so.cartesian_mset(a.n, parse_group(a.group, a.n))
    elif op == "exp":
        r = so.exp_mset(a.p, a.N, a.variant)
    elif op == "gn-rep":
        r = so.gn_rep_check(a.n, a.m, seed=a.seed)
    elif op == "strong-disjoint":
        ma = _ints(a.mult_a) if a.mult_a else []
        mb = _ints(a.mult_b) if a.mult_b else []
        r = so.strong_disjoint_product(so.FormalSpectrum(tuple(f"a{i}" for i in range(len(ma))), tuple(ma)),
                                       so.FormalSpectrum(tuple(f"b{i}" for i in range(len(mb))), tuple(mb)))
    else:
        raise UsageError(f"unknown oracle op {op!r}")
    rep = Report("oracle", inputs={"op": op})
    rep.records.append(r.to_json())
    return rep


# ------------------------------------------------------------------- parser

def _global_flags(p: argparse.ArgumentParser, default) -> None:
    p.add_argument("--format", choices=("json", "csv"), default=default("json"))
    p.add_argument("--output", "-o", default=default(None), help="write the report here instead of stdout")
    p.add_argument("--timestamps", action="store_true", default=default(False),
                   help="add a generation time to JSON reports")
    p.add_argument("--verbose", "-v", action="store_true", default=default(False))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sml", description="Spectral multiplicity laboratory")
    _global_flags(p, lambda v: v)
    # the same flags after the command; SUPPRESS keeps them from clobbering earlier values
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, lambda v: argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name: str, **kw) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], **kw)

    s = add("realize", help="finite abelian realization of a multiplicity set")
    s.add_argument("--set", required=True)
    s.add_argument("--verify", action="store_true")
    s.add_argument("--truncate", type=int)
    s.add_argument("--lcm-closed", action="store_true", help="use the lcm-closed construction")
    s.set_defaults(func=cmd_realize)

    s = add("orbits", help="orbit census and the set L(G, v, H)")
    s.add_argument("--spec", help="serialized group JSON")
    s.add_argument("--set", help="realize this set first")
    s.add_argument("--support", help="comma list of slots spanning H")
    s.add_argument("--max-elements", type=int, default=200_000)
    s.set_defaults(func=cmd_orbits)

    s = add("simulate", help="heights, widths, measure class and correlation bounds")
    s.add_argument("--spec", required=True)
    s.add_argument("--stages", type=int, default=6)
    s.add_argument("--A")
    s.add_argument("--B")
    s.add_argument("--m", help="comma list of times")
    s.add_argument("--N", type=int, help="evaluation stage (default: automatic)")
    s.set_defaults(func=cmd_simulate)

    s = add("weak-limit", help="check a weak limit of U^(p h_n) along designated stages")
    s.add_argument("--spec", required=True)
    s.add_argument("--case", required=True, choices=ro.CASES)
    s.add_argument("--p", type=int, default=1)
    s.add_argument("--tol", default="1/50")
    s.add_argument("--A")
    s.add_argument("--B")
    s.add_argument("--min-height", type=int, default=0)
    s.add_argument("--max-tests", type=int, default=3)
    s.set_defaults(func=cmd_weak_limit)

    s = add("cocycle-verify", help="twisted correlations and cocycle limit checks")
    s.add_argument("--spec", required=True, help="construction with a labels section")
    s.add_argument("--mode", choices=cc.MODES, default="fiber-shift")
    s.add_argument("--k", help="fiber element, comma list")
    s.add_argument("--shift", action="append", help="fiber-shift value (repeatable)")
    s.add_argument("--chi", help="character, comma list")
    s.add_argument("--fiber-pair", nargs=2, metavar=("G", "G2"), help="skew matrix element fibers")
    s.add_argument("--d1", type=int, default=0)
    s.add_argument("--d2", type=int, default=0)
    s.add_argument("--A")
    s.add_argument("--B")
    s.add_argument("--tol", default="1/20")
    s.add_argument("--min-height", type=int, default=0)
    s.add_argument("--max-tests", type=int, default=3)
    s.add_argument("--m", type=int, help="single twisted correlation at this time")
    s.add_argument("--N", type=int)
    s.set_defaults(func=cmd_cocycle_verify)

    s = add("multiplicity", help="set calculus, double cosets, Poisson families")
    s.add_argument("--op", required=True,
                   choices=("diamond", "scale", "factor", "closure", "double-coset", "power", "poisson"))
    s.add_argument("--set", action="append")
    s.add_argument("--n", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--group")
    s.add_argument("--gens")
    s.add_argument("--semigroup", choices=("add", "mul"), default="mul")
    s.add_argument("--bound", type=int)
    s.add_argument("--kind", choices=("example82", "exp_p", "A"))
    s.add_argument("--p", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--generators")
    s.add_argument("--terms", type=int, default=5)
    s.set_defaults(func=cmd_multiplicity)

    s = add("plan", help="choose a realization route for a set")
    s.add_argument("--set", required=True)
    s.set_defaults(func=cmd_plan)

    s = add("oracle", help="formal-spectrum counting identities")
    s.add_argument("--op", required=True,
                   choices=("invariant-power", "tensor-sym", "cartesian", "exp", "gn-rep", "strong-disjoint"))
    s.add_argument("--symbols", type=int, default=6)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--group")
    s.add_argument("--p", type=int, default=2)
    s.add_argument("--N", type=int, default=3)
    s.add_argument("--variant", choices=("copies", "sym2"), default="copies")
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mult-a")
    s.add_argument("--mult-b")
    s.set_defaults(func=cmd_oracle)
    return p


def parse_and_dispatch(argv: Sequence[str]) -> tuple[Report, argparse.Namespace]:
    parser = build_parser()
    args = parser.parse_args(list(argv))
    if args.verbose:
        logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(name)s: %(message)s")
    try:
        rep = args.func(args)
    except Refusal as exc:
        rep = Report(args.command, records=[{"refusal": str(exc)}], inputs=exc.inputs,
                     exit_code=EXIT_REFUSAL, rows=[])
    except (UsageError, ValueError, so.OracleError) as exc:
        rep = Report(args.command, records=[{"error": str(exc)}], exit_code=EXIT_USAGE, rows=[])
    return rep.finalize(), args


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        rep, args = parse_and_dispatch(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if rep.command in CSV_COLUMNS and args.format == "csv" and rep.rows is None:
        rep.rows = rep.records
    data = emit(rep, args.format, args.timestamps)
    if args.output:
        try:
            with open(args.output, "wb") as fh:
                fh.write(data)
        except OSError as exc:
            print(f"sml: cannot write {args.output}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        sys.stdout.buffer.write(data)
    if rep.exit_code == EXIT_USAGE:
        print(f"sml: {rep.records[0].get('error')}", file=sys.stderr)
    return rep.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
