"""Command-line driver: load operads, run the constructions, emit
dimension/homology tables and verification reports."""
from __future__ import annotations

import argparse
import json
import random
import sys

from .chain import ChainComplex, ChainMap, is_quasi_iso, tensor_many
from .trees import enumerate_trees
from .operads import (
    Operad, builtin_operad, check_operad_axioms, dualize, extend_cooperad,
    free_operad, symseq_from_degrees, trivial_operad, truncate,
)
from .barcobar import bar, cobar, w_construction, w_resolution, theta
from .fields import Field
from .koszul import koszul_dual, verify_kk


class CliError(Exception):
    """Input problem: bad file, bad flag, failed axiom. Exit code 2."""


def parse_field(s: str) -> Field:
    if s == "q":
        return Field(0)
    if s.startswith("f") and s[1:].isdigit():
        try:
            return Field(int(s[1:]))
        except ValueError as e:
            raise CliError(str(e))
    raise CliError(f"unknown field {s!r} (expected q or f<p>)")


def _field_from_spec(blob, fallback: Field) -> Field:
    fs = blob.get("field")
    if fs is None:
        return fallback
    if fs == "Q":
        return Field(0)
    if isinstance(fs, dict) and "p" in fs:
        return Field(int(fs["p"]))
    raise CliError(f"bad field entry {fs!r} in operad spec")


def _sparse_to_images(triples, src_labels, tgt_labels, field):
    """Triples [row, col, val] -> per-source-label image dicts."""
    out = {l: {} for l in src_labels}
    for row, col, val in triples:
        if not (0 <= col < len(src_labels) and 0 <= row < len(tgt_labels)):
            raise CliError(f"matrix entry [{row},{col}] out of range")
        out[src_labels[col]][tgt_labels[row]] = field.of(val)
    return out


def load_operad_spec(path: str, field: Field | None = None) -> Operad:
    """Build an operad from a JSON description and validate its axioms.

    Format: {"field": "Q"|{"p":2}, "max_arity": N,
             "terms": {n: {"basis": [{"name","degree"}], "d": [[r,c,v]]}},
             "sigma": {n: {i: [[r,c,v]]}},
             "circ": [{"m","n","i","matrix": [[r,c,v]]}]}.
    Matrix triples index the basis lists in file order; a circ source
    index is a*len(term(n))+b for the pair (a-th of term(m), b-th of
    term(n)). Arity 1 is the unit and may be omitted.
    """
    try:
        with open(path) as fh:
            blob = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot read operad spec {path}: {e}")
    field = _field_from_spec(blob, field or Field(0))
    N = int(blob.get("max_arity", 0))
    if N < 1:
        raise CliError("operad spec needs max_arity >= 1")

    terms = {1: ChainComplex(field, {0: ["u"]}, {})}
    names = {1: ["u"]}
    for key, tdata in blob.get("terms", {}).items():
        n = int(key)
        if n == 1:
            continue
        labels, degs = [], {}
        for b in tdata["basis"]:
            labels.append(b["name"])
            degs[b["name"]] = int(b["degree"])
        imgs = _sparse_to_images(tdata.get("d", []), labels, labels, field)

        def rule(d, lab, imgs=imgs):
            return list(imgs[lab].items())

        basis = {}
        for l in labels:
            basis.setdefault(degs[l], []).append(l)
        try:
            terms[n] = ChainComplex.from_rule(field, basis, rule)
        except ValueError as e:
            raise CliError(f"term {n}: {e}")
        names[n] = labels

    adjacents = {}
    for key, sdata in blob.get("sigma", {}).items():
        n = int(key)
        if n not in terms:
            raise CliError(f"sigma given for missing arity {n}")
        for ik, triples in sdata.items():
            i = int(ik[2:]) if ik.startswith("s_") else int(ik)
            if not 1 <= i < n:
                raise CliError(f"sigma index {i} out of range for arity {n}")
            imgs = _sparse_to_images(triples, names[n], names[n], field)
            try:
                adjacents[(n, i)] = ChainMap.from_rule(
                    terms[n], terms[n],
                    lambda d, lab, imgs=imgs: list(imgs[lab].items()))
            except ValueError as e:
                raise CliError(f"sigma ({n},{i}): {e}")

    circ_imgs = {}
    for c in blob.get("circ", []):
        m, n, i = int(c["m"]), int(c["n"]), int(c["i"])
        if m not in terms or n not in terms or m + n - 1 not in terms:
            raise CliError(f"circ ({m},{n},{i}) references a missing arity")
        pairs = [(a, b) for a in names[m] for b in names[n]]
        circ_imgs[(m, i, n)] = _sparse_to_images(
            c["matrix"], pairs, names[m + n - 1], field)

    def circ_builder(p, m, i, n):
        src = tensor_many(field, [p.term(m), p.term(n)])
        if n == 1:
            return ChainMap.from_rule(src, p.term(m),
                                      lambda d, t: [(t[0], 1)])
        if m == 1:
            return ChainMap.from_rule(src, p.term(n),
                                      lambda d, t: [(t[1], 1)])
        imgs = circ_imgs.get((m, i, n))
        if imgs is None:
            return ChainMap.zero(src, p.term(m + n - 1))
        try:
            return ChainMap.from_rule(
                src, p.term(m + n - 1),
                lambda d, lab, imgs=imgs: list(imgs[lab].items()))
        except ValueError as e:
            raise CliError(f"circ ({m},{n},{i}): {e}")

    try:
        p = Operad(field, N, terms, adjacents, circ_builder, name=path)
        fails = check_operad_axioms(p)
    except (ValueError, CliError) as e:
        raise CliError(f"operad spec {path} rejected: {e}")
    if fails:
        raise CliError(f"operad spec {path} fails axioms: {', '.join(fails)}")
    return p


def load_symseq_spec(path: str, field: Field, N: int):
    """Generator file for the trivial/free selectors: degrees per arity,
    {"gens": {n: [degrees]}, "max_arity": N?}."""
    try:
        with open(path) as fh:
            blob = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot read generator spec {path}: {e}")
    field = _field_from_spec(blob, field)
    N = int(blob.get("max_arity", N))
    gens = {int(k): [int(d) for d in v]
            for k, v in blob.get("gens", {}).items()}
    if any(n < 2 for n in gens):
        raise CliError("generators must sit in arity >= 2")
    return symseq_from_degrees(field, N, gens)


def select_operad(sel: str, field: Field, N: int) -> Operad:
    if sel in ("com", "ass"):
        return builtin_operad(sel, field, N)
    if sel.startswith("trivial:"):
        return trivial_operad(load_symseq_spec(sel[8:], field, N))
    if sel.startswith("free:"):
        return free_operad(load_symseq_spec(sel[5:], field, N), N)
    if sel.startswith("file:"):
        return load_operad_spec(sel[5:], field)
    raise CliError(f"unknown operad selector {sel!r}")


# -- reports --------------------------------------------------------------

def table_of(c: ChainComplex, homology: bool) -> dict:
    return c.homology_table() if homology else c.dims()


def emit(report: dict, out: str) -> str:
    if out == "json":
        return json.dumps(report, sort_keys=True)
    lines = ["arity\tdegree\tdim"]
    for n in sorted(report["tables"], key=int):
        for d in sorted(report["tables"][n], key=int):
            lines.append(f"{n}\t{d}\t{report['tables'][n][d]}")
    return "\n".join(lines)


def _str_keys(tab: dict) -> dict:
    return {str(k): v for k, v in tab.items()}


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="opdual",
        description="bar/cobar/W/Koszul constructions for operads of "
                    "chain complexes, with duality checks")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(sp, operad=True):
        sp.add_argument("--max-arity", type=int, default=3, metavar="N")
        sp.add_argument("--field", default="q",
                        help="q for the rationals, f<p> for a prime field")
        sp.add_argument("--out", choices=("json", "tsv"), default="json")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--verbose", action="store_true",
                        help="include differential matrices in json output")
        if operad:
            sp.add_argument("--operad", default="com",
                            help="com | ass | trivial:<file> | free:<file> "
                                 "| file:<path>")
            sp.add_argument("--truncate", type=int, default=0, metavar="K",
                            help="replace the operad by its arity <= K part")
            sp.add_argument("--homology", action="store_true")

    common(sub.add_parser("trees", help="tree census"), operad=False)
    for v, h in (("bar", "bar construction tables"),
                 ("cobar", "cobar of the dual cooperad"),
                 ("w", "cubical resolution tables"),
                 ("koszul", "dual of the bar construction"),
                 ("kk", "double-dual comparison report")):
        common(sub.add_parser(v, help=h))
    cp = sub.add_parser("check", help="run a verification and report")
    cp.add_argument("target", choices=("axioms", "theta", "w", "kk"))
    common(cp)

    args = ap.parse_args(argv)
    field = parse_field(args.field)
    N = args.max_arity
    if N < 1:
        raise CliError("--max-arity must be >= 1")

    report = {"command": args.verb, "field": repr(field).lower(),
              "max_arity": N, "tables": {}, "checks": []}

    if args.verb == "trees":
        for n in range(1, N + 1):
            report["tables"][str(n)] = {"0": len(enumerate_trees(n))}
        print(emit(report, args.out))
        return 0

    p = select_operad(args.operad, field, N)
    if args.truncate:
        p = truncate(p, args.truncate, "<=")

    def fill_tables(term_of):
        for n in range(1, N + 1):
            c = term_of(n)
            report["tables"][str(n)] = _str_keys(table_of(c, args.homology))
            if args.verbose and args.out == "json":
                report["tables"][str(n)]["d"] = _matrix_triples(c)

    if args.verb == "bar":
        fill_tables(bar(p, N).term)
    elif args.verb == "cobar":
        fill_tables(cobar(extend_cooperad(dualize(p, N)), N).term)
    elif args.verb == "w":
        fill_tables(w_construction(p, N).term)
    elif args.verb == "koszul":
        fill_tables(koszul_dual(p, N).term)
    elif args.verb == "kk":
        rep = verify_kk(p, N)
        blob = rep.to_dict()
        report["tables"] = blob["dims"]["kk"]
        for name, ok in sorted(blob["checks"].items()):
            report["checks"].append({"name": name, "pass": ok,
                                     "witness": blob["dims"]["p"]})
    elif args.verb == "check":
        _run_check(args, p, N, report)

    print(emit(report, args.out))
    return 0 if all(c["pass"] for c in report["checks"]) else 1


def _matrix_triples(c: ChainComplex) -> dict:
    out = {}
    for k in c.degrees():
        m = c.d_matrix(k)
        trips = [[r, col, str(v)] for (r, col), v in sorted(m.data.items())]
        if trips:
            out[str(k)] = trips
    return out


def _run_check(args, p: Operad, N: int, report: dict) -> None:
    rng = random.Random(args.seed)
    if args.target == "axioms":
        fails = check_operad_axioms(p)
        report["checks"].append({"name": "operad axioms",
                                 "pass": not fails,
                                 "witness": fails or "all identities hold"})
        return
    if args.target == "w":
        wp, etas, zetas = w_resolution(p, N)
        for n in range(1, N + 1):
            retr = zetas[n].then(etas[n]) == ChainMap.identity(p.term(n))
            qi = is_quasi_iso(etas[n])
            report["tables"][str(n)] = _str_keys(wp.term(n).dims())
            report["checks"].append(
                {"name": f"resolution retract arity {n}",
                 "pass": retr and qi,
                 "witness": f"section exact: {retr}, cone acyclic: {qi}"})
        return
    if args.target == "theta":
        wp, cb, th = theta(p, N)
        for n in range(1, N + 1):
            ok = th[n].is_iso()
            wd = wp.term(n).dims()
            cd = cb.term(n).dims()
            report["tables"][str(n)] = _str_keys(cd)
            report["checks"].append(
                {"name": f"comparison iso arity {n}", "pass": ok,
                 "witness": f"dims {_str_keys(wd)} vs {_str_keys(cd)}"})
        # seeded spot-check of equivariance
        for _ in range(3):
            n = rng.randint(2, N) if N >= 2 else 1
            vals = list(range(1, n + 1))
            rng.shuffle(vals)
            sigma = dict(zip(range(1, n + 1), vals))
            ok = wp.act(n, sigma).then(th[n]) == th[n].then(cb.act(n, sigma))
            report["checks"].append(
                {"name": f"equivariance sample arity {n}", "pass": ok,
                 "witness": f"permutation {vals}"})
        return
    rep = verify_kk(p, N)
    blob = rep.to_dict()
    report["tables"] = blob["dims"]["kk"]
    for name, ok in sorted(blob["checks"].items()):
        report["checks"].append({"name": name, "pass": ok,
                                 "witness": blob["dims"]["p"]})


def main(argv=None) -> int:
    try:
        return run(argv)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
