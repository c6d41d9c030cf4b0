"""Command line front end.

    massey-flow validate SPEC
    massey-flow spectral-flow SPEC --max-order 3
    massey-flow oracle SPEC --compare
    massey-flow massey SPEC --order 2 --input-class all
    massey-flow fixture NAME --out model.json

SPEC is a path to a "massey-flow/v1" document or ``fixture:NAME``.
Exit codes: 0 success, 1 validation failure, 2 obstruction, 3 numerical
stability gate failure.
"""
import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .dgla import (
    build_massey_system,
    compare_with_page,
    compatible_delta,
    hybrid_compatible_delta,
    massey_product,
    module_jet,
    series_jet,
)
from .errors import (
    AxiomViolation,
    MatchingAmbiguity,
    NotFlat,
    NotInDomain,
    Obstructed,
    ParseError,
    Unresolved,
)
from .graded import DEFAULT_TOL
from .jets import build_page, page_tower, validate_flat_jet
from .models import ProblemSpec, build_fixture, fixture_builders
from .oracle import T_coefficients, compare_Vn_Hn, stability_gate, track_branches, vanishing_flag
from .signature import local_spectral_flow, track_D_branches

REPORT_SCHEMA = "massey-flow-report/v1"
EXIT_OK, EXIT_INVALID, EXIT_OBSTRUCTED, EXIT_UNSTABLE = 0, 1, 2, 3
SIG_DIGITS = 12


def _num(x):
    """Round to SIG_DIGITS significant digits so reports are stable text."""
    x = float(x)
    if not np.isfinite(x):
        return str(x)
    return float(f"{x:.{SIG_DIGITS}g}")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_num(obj.real), _num(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _verdict(invariant, residual, tol, passed=None):
    passed = residual <= tol if passed is None else passed
    return {"invariant": invariant, "residual": residual, "tol": tol, "passed": bool(passed)}


class Report:
    def __init__(self, command, spec, flags):
        self.doc = {
            "schema": REPORT_SCHEMA,
            "command": command,
            "input": {"name": spec.name, "digest": spec.digest(), "dims": list(spec.dims)},
            "flags": flags,
            "verdicts": [],
        }
        self.lines = []
        self.t0 = time.perf_counter()

    def add(self, key, value):
        self.doc[key] = value

    def verdict(self, *args, **kw):
        v = _verdict(*args, **kw)
        self.doc["verdicts"].append(v)
        return v

    def line(self, text=""):
        self.lines.append(text)

    def table(self, header, rows):
        cells = [[str(h) for h in header]] + [[_fmt(c) for c in r] for r in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
        for k, r in enumerate(cells):
            self.lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)))
            if k == 0:
                self.lines.append("  ".join("-" * w for w in widths))

    def structured(self, timing=False):
        doc = dict(self.doc)
        if timing:
            doc["timing_seconds"] = time.perf_counter() - self.t0
        return _clean(doc)


def _fmt(c):
    if isinstance(c, float):
        return f"{c:.6g}"
    if isinstance(c, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in c) + "]"
    return str(c)


def load_spec(path):
    if path.startswith("fixture:"):
        return build_fixture(path.split(":", 1)[1])
    try:
        return ProblemSpec.load(path)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------- commands

def cmd_validate(spec, args, rep):
    rows, ok = [], True
    for name, defect, passed, detail in spec.validate(args.tol):
        rep.verdict(name, defect, args.tol, passed)
        rows.append((name, defect, "ok" if passed else "FAIL", detail))
        if detail:
            rep.doc["verdicts"][-1]["detail"] = detail
        ok &= passed
    rep.table(["check", "defect", "status", "detail"], rows)
    rep.add("valid", ok)
    return EXIT_OK if ok else EXIT_INVALID


def _max_order(spec, args):
    return min(args.max_order, spec.jet.order)


def _branch_table(family, max_n):
    flag = vanishing_flag(family, max_n)
    out = []
    for a in range(family.size):
        ders = [float(flag.derivatives[n, a]) for n in range(max_n + 1)]
        vanish = next((n for n in range(max_n + 1) if abs(ders[n]) > flag.zero_tol[n]), None)
        out.append({"branch": a, "derivatives": ders, "leading_order": vanish})
    return flag, out


def cmd_spectral_flow(spec, args, rep):
    N = _max_order(spec, args)
    tol = args.tol
    jet, metric = spec.jet, spec.metric
    validate_flat_jet(jet)
    tower = page_tower(jet, N, tol, metric, stop_early=False)
    rep.add("pages", [{"n": p.n, "dims": list(p.Gn_dims), "square_residual": p.square_residual} for p in tower])
    code = EXIT_OK
    try:
        sf = local_spectral_flow(jet, spec.star, metric, N, tol, spec.pairing, strict=args.strict)
    except Unresolved as exc:
        sf = local_spectral_flow(jet, spec.star, metric, N, tol, spec.pairing, strict=False)
        rep.add("error", _err(exc))
        code = EXIT_OBSTRUCTED
    rep.add("spectral_flow", sf.as_dict())
    for r in sf.rows:
        if spec.star is not None:
            rep.verdict(f"sig Q_{r.n} = sig B_{r.n}(D)", abs(r.sig_Q - r.sig_BD), 0, r.sig_Q == r.sig_BD)
    rep.line(f"mode: {sf.mode}   convention: {sf.convention}")
    rep.table(["n", "dims G_n", "count", "sig Q", "sig B(D)", "null Q", "null B(D)"],
              [(r.n, list(tower[r.n - 1].Gn_dims), r.count, r.sig_Q, r.sig_BD, r.nullity_Q, r.nullity_BD)
               for r in sf.rows])
    rep.line(f"local spectral flow: {sf.spectral_flow}" + ("" if sf.complete else
             f"  (incomplete: even classes survive past order {N}: {sf.residual_even_dims})"))
    if args.branches:
        try:
            fam = (track_D_branches(jet, spec.star, metric, args.radius, args.samples, args.fit_degree, N)
                   if spec.star is not None else
                   track_branches(jet, metric, args.radius, args.samples, args.fit_degree, N))
            _, table = _branch_table(fam, N)
            rep.add("branches", table)
            rep.line()
            rep.table(["branch", "lambda^(n)(0), n = 0.." + str(N), "leading order"],
                      [(b["branch"], b["derivatives"], b["leading_order"]) for b in table])
        except MatchingAmbiguity as exc:
            rep.add("error", _err(exc))
            code = EXIT_UNSTABLE
    return code


def cmd_oracle(spec, args, rep):
    N = _max_order(spec, args)
    jet, metric = spec.jet, spec.metric
    validate_flat_jet(jet)
    try:
        fam = track_branches(jet, metric, args.radius, args.samples, args.fit_degree, N)
    except MatchingAmbiguity as exc:
        rep.add("error", f"{_err(exc)}; suggested radius {max(map(abs, exc.interval)) / 4:.3e}")
        return EXIT_UNSTABLE
    flag, table = _branch_table(fam, N)
    rep.add("oracle", {"radius": fam.radius, "samples": int(len(fam.ts)), "fit_degree": fam.fit_degree,
                       "flag_sizes": flag.sizes(), "borderline": [list(b) for b in flag.borderline]})
    rep.add("branches", table)
    rep.line(f"radius {fam.radius:.3e}, {len(fam.ts)} samples, fit degree {fam.fit_degree}; "
             f"|A_n| = {flag.sizes()}")
    rep.table(["branch", "lambda^(n)(0), n = 0.." + str(N), "leading order"],
              [(b["branch"], b["derivatives"], b["leading_order"]) for b in table])
    code = EXIT_OK
    if args.compare:
        comps = []
        for n in range(1, N + 1):
            c = compare_Vn_Hn(jet, metric, fam, n, args.compare_tol, flag=flag, rank_tol=args.tol)
            comps.append(c.as_dict())
            rep.verdict(f"angle(V_{n}, H_{n})", c.max_angle, args.compare_tol, c.dim_V == c.dim_H and c.max_angle <= args.compare_tol)
            rep.verdict(f"eigenvalues B_{n} vs oracle", c.eig_defect, args.compare_tol)
            if not c.passed:
                code = EXIT_INVALID
        rep.add("comparisons", comps)
        rep.line()
        rep.table(["n", "dim V", "dim H", "max angle", "eig defect", "status"],
                  [(c["n"], c["dim_V"], c["dim_H"], c["max_angle"], c["eig_defect"], "ok" if c["passed"] else "FAIL")
                   for c in comps])
        gate = stability_gate(T_coefficients(jet, metric), N, args.radius, args.samples, args.fit_degree, args.compare_tol)
        rep.verdict("stability gate (half radius refit)", gate.max_relative_change, gate.tol, gate.passed)
        rep.line(f"stability gate: {gate.max_relative_change:.3e} ({'ok' if gate.passed else 'FAIL'})")
        if not gate.passed:
            code = EXIT_UNSTABLE
    return code


def _massey_inputs(spec, args, page):
    if args.input_class in (None, "all"):
        return [(f"rep:{j}", page.reps.basis[:, j]) for j in range(page.reps.dim)]
    lab = args.input_class
    if lab.startswith("rep:"):
        j = int(lab[4:])
        return [(lab, page.reps.basis[:, j])]
    return [(lab, spec.basis_vector(lab))]


def cmd_massey(spec, args, rep):
    if spec.dgla is None:
        raise ParseError("the massey command needs a spec with a dgla")
    L = spec.dgla
    if spec.meta.get("massey_inputs"):
        labels = spec.meta["massey_inputs"]
        xs = [spec.algebra_vector(lab) for lab in labels]
        rep.add("inputs", labels)
        try:
            M = build_massey_system(L, xs, args.tol)
        except Obstructed as exc:
            rep.add("obstruction", {"multi_index": list(exc.multi_index), "class_norm": exc.class_norm,
                                    "representative": _sparse(exc.representative, spec.algebra_labels)})
            rep.line(f"obstructed at I = {exc.multi_index}: class norm {exc.class_norm:.6g}")
            rep.line("representative: " + " + ".join(f"({c[0]:.4g}{c[1]:+.4g}j) {k}"
                                                     for k, c in _sparse(exc.representative, spec.algebra_labels).items()))
            return EXIT_OBSTRUCTED
        P = massey_product(M, args.tol)
        rep.add("product", {"degree": P.degree, "class_norm": P.class_norm,
                            "cocycle": _sparse(P.cocycle, spec.algebra_labels)})
        rep.line(f"Massey product of degree {P.degree}, class norm {P.class_norm:.6g}")
        return EXIT_OK
    if spec.flat_series is None:
        raise ParseError("the massey command needs a flat series")
    n = args.order
    s = spec.flat_series
    hybrid = spec.module is not None
    jet = module_jet(spec.module, s, max(n, s.order)) if hybrid else series_jet(L, s, max(n, s.order))
    metric = spec.metric if hybrid else None
    page = build_page(jet, n, args.tol, metric)
    labels = spec.labels if hybrid or spec.labels else None
    rows, results, code = [], [], EXIT_OK
    for lab, u in _massey_inputs(spec, args, page):
        try:
            cd = (hybrid_compatible_delta(spec.module, s, u, n, args.tol, metric) if hybrid
                  else compatible_delta(L, s, u, n, args.tol, metric))
        except NotInDomain as exc:
            results.append({"input": lab, "error": str(exc)})
            rows.append((lab, "-", "-", "-", "not in Z_n"))
            code = EXIT_OBSTRUCTED
            continue
        diff = compare_with_page(jet, cd, args.tol, metric, page)
        mc = page.class_of(cd.delta)
        jc = page.class_of(page.delta(u))
        entry = {"input": lab, "massey_class": mc, "jet_class": jc, "difference": diff,
                 "massey_residual": cd.massey_residual}
        if n == 1:
            a1 = s.a(1)
            br = spec.module.rho(a1) @ u if hybrid else L.bracket(a1, u)
            bdiff = float(np.linalg.norm(page.class_of(br) - jc)) / max(1.0, float(np.linalg.norm(jc)))
            entry["bracket_class"] = page.class_of(br)
            entry["bracket_difference"] = bdiff
            rep.verdict(f"delta_1 = class of a_1 acting on {lab}", bdiff, 1e-8)
        rep.verdict(f"Massey delta_{n}({lab}) = jet delta_{n}", diff, 1e-8)
        results.append(entry)
        rows.append((lab, float(np.linalg.norm(mc)), float(np.linalg.norm(jc)), diff, "ok" if diff <= 1e-8 else "FAIL"))
        if diff > 1e-8:
            code = EXIT_INVALID
    rep.add("order", n)
    rep.add("hybrid", hybrid)
    rep.add("page_dims", list(page.Gn_dims))
    rep.add("classes", results)
    rep.line(f"order {n}, page dims {list(page.Gn_dims)}, {'module (hybrid)' if hybrid else 'algebra'} products")
    rep.table(["input", "|Massey class|", "|jet class|", "difference", "status"], rows)
    return code


def _err(exc):
    return f"{type(exc).__name__}: {exc}"


def _sparse(v, labels, tol=1e-12):
    v = np.asarray(v)
    return {(labels[i] if labels else str(i)): [_num(v[i].real), _num(v[i].imag)]
            for i in np.flatnonzero(np.abs(v) > tol)}


def cmd_fixture(args):
    spec = build_fixture(args.name)
    text = spec.to_json() + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser():
    p = argparse.ArgumentParser(prog="massey-flow", description="Spectral flow and Massey product computations.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("spec", help="path to a massey-flow/v1 document or fixture:NAME")
        sp.add_argument("--tol", type=float, default=DEFAULT_TOL, help="rank tolerance (relative)")
        sp.add_argument("--seed", type=int, default=0, help="recorded in the report")
        sp.add_argument("--out", help="write the structured report here")
        sp.add_argument("--format", choices=["text", "json"], default="text")
        sp.add_argument("--timing", action="store_true", help="add wall time to the structured report")

    v = sub.add_parser("validate", help="run structural validators")
    common(v)
    helps = {"spectral-flow": "page counts, form signatures and the local spectral flow",
             "oracle": "track eigenvalue branches of T(t) and compare with the pages"}
    for name in ("spectral-flow", "oracle"):
        sp = sub.add_parser(name, help=helps[name])
        common(sp)
        sp.add_argument("--max-order", type=int, default=3)
        sp.add_argument("--radius", type=float, default=None)
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--fit-degree", type=int, default=None)
        if name == "oracle":
            sp.add_argument("--compare", action="store_true", help="compare branches with H_n and B_n")
            sp.add_argument("--compare-tol", type=float, default=1e-5)
        else:
            sp.add_argument("--strict", action="store_true", help="exit 2 when the flow is unresolved")
            sp.add_argument("--branches", action="store_true", help="add the oracle branch table")
    m = sub.add_parser("massey", help="Massey products and compatible page differentials")
    common(m)
    m.add_argument("--order", type=int, default=1, help="page differential order n")
    m.add_argument("--input-class", default="all", help="basis label, rep:K, or all")
    f = sub.add_parser("fixture", help="write a shipped fixture as JSON")
    f.add_argument("name", choices=sorted(fixture_builders()))
    f.add_argument("--out")
    return p


COMMANDS = {"validate": cmd_validate, "spectral-flow": cmd_spectral_flow, "oracle": cmd_oracle, "massey": cmd_massey}


def _flags(args):
    skip = {"command", "spec", "out", "format", "timing"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "fixture":
        return cmd_fixture(args)
    try:
        spec = load_spec(args.spec)
    except (ParseError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    rep = Report(args.command, spec, _flags(args))
    try:
        code = COMMANDS[args.command](spec, args, rep)
    except (NotFlat, AxiomViolation, ParseError) as exc:
        rep.add("error", _err(exc))
        rep.line(f"error: {_err(exc)}")
        code = EXIT_INVALID
    except (Obstructed, NotInDomain) as exc:
        rep.add("error", _err(exc))
        rep.line(f"error: {_err(exc)}")
        code = EXIT_OBSTRUCTED
    except MatchingAmbiguity as exc:
        rep.add("error", _err(exc))
        rep.line(f"error: {_err(exc)}")
        code = EXIT_UNSTABLE
    rep.add("exit_code", code)
    doc = rep.structured(args.timing)
    text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    if args.format == "json":
        sys.stdout.write(text)
    else:
        print(f"{args.command}: {spec.name} {list(spec.dims)}")
        for ln in rep.lines:
            print(ln)
        print(f"exit {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
