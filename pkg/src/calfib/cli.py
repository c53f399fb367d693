"""Command-line front end.

Every command writes line-delimited JSON records (or CSV) to stdout or
``--out`` and a short human summary to stderr.  Exit codes: 0 all checks pass,
1 a residual check failed, 2 usage error, 3 numerical failure.
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import math
import os
import sys
import time

import numpy as np

from . import fibration as fib
from . import g2
from . import minimal_orbit as mo
from .core import GeometryError, to_real
from .models import make_fubini_study, make_kn
from .report import ResidualReport, to_csv, to_jsonl
from .suites import build_model, verify

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

MODELS = ("flat", "eguchi-hanson", "calabi", "fubini-study", "kn")


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise UsageError(f"expected comma-separated reals, got {text!r}") from None


def thread_count():
    try:
        return max(1, int(os.environ.get("CALFIB_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fun, items):
    """map over items with up to CALFIB_THREADS workers; results keep input order."""
    workers = thread_count()
    if workers == 1:
        return [fun(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fun, items))


# ---------------------------------------------------------------------------
# commands; each returns (records, report or None)


def cmd_verify(args):
    if args.model not in MODELS:
        raise UsageError(f"unknown model {args.model!r}")
    rep = verify(args.model, n=args.n, l=args.l, seed=args.seed, samples=args.samples or 20)
    return rep.records(), rep


def _level(args, model):
    if args.level is None:
        raise UsageError("--level is required")
    c = _floats(args.level)
    if c.size != model.n:
        raise UsageError(f"--level needs {model.n} components")
    return c


def cmd_fiber(args):
    model = build_model(args.model, args.n, args.l)
    start = _floats(args.start) if args.start else None
    c = fib.alpha(model, start) if start is not None and args.level is None else _level(args, model)
    count = args.samples or 20

    def one(i):
        rng = np.random.default_rng([args.seed, i])
        try:
            if i == 0 and start is not None:
                fp = fib.project_to_fiber(model, c, start)
            else:
                fp = fib.sample_fiber(model, c, 1, rng)[0]
        except GeometryError as exc:
            return {"index": i, "error": str(exc)}
        rec = {"index": i, "coords": fp.x, "alpha": fp.alpha, "classification": fp.classification}
        if fp.frame is not None:
            rec["lagrangian"], rec["special"] = fib.slag_residual(model, fp)
        return rec

    records = ordered_map(one, range(count))
    if all("error" in r for r in records):
        raise GeometryError("all Newton starts failed")
    rep = ResidualReport(meta={"model": model.name, "seed": args.seed})
    ok = [r for r in records if "lagrangian" in r]
    if ok:
        tol = args.tol or 1e-7
        rep.add("fiber lagrangian", "omega vanishes on regular fibers", max(r["lagrangian"] for r in ok), tol)
        rep.add("fiber special", "Im phi vanishes on regular fibers", max(r["special"] for r in ok), tol)
    return records, rep


def cmd_flow(args):
    model = build_model(args.model, args.n, args.l)
    rng = np.random.default_rng(args.seed)
    if args.start:
        x0 = _floats(args.start)
    else:
        x0 = fib.sample_fiber(model, _level(args, model), 1, rng)[0].x
    steps = args.samples or 21
    params = np.linspace(-args.length / 2, args.length / 2, steps)
    tr = fib.trace_eta_flow(model, x0, params)
    records = [{"t": t, "coords": p, "eta": e, "alpha": a} for t, p, e, a in zip(tr.params, tr.points, tr.eta, tr.alpha)]
    rep = ResidualReport(meta={"model": model.name, "seed": args.seed})
    rep.add("flow drift", "eta-flow stays on its fiber", tr.drift, args.tol or 1e-6)
    rep.add("flow unit rate", "eta advances at unit rate", tr.rate_defect, args.tol or 1e-6)
    closure = max(fib.orbit_trace(model, x0, e) for e in np.eye(model.action.k, dtype=int))
    rep.add("orbit closure", "torus orbits in fibers close after 2 pi", closure, args.tol or 1e-6)
    return records, rep


def cmd_cone(args):
    model = build_model(args.model, args.n, args.l)
    if args.start:
        m = _floats(args.start)
    else:
        m = to_real(np.concatenate([np.zeros(2), np.ones(model.n - 2)]))
    res = fib.cone_sheet_count(model, m, radius=args.radius, seed=args.seed)
    records = [{"point": m, "count": res.count, "solutions": res.solutions, "representatives": np.array(res.terminating)}]
    return records, None


def _base_from(args):
    if args.base:
        name = args.base.lower()
        if not (name.startswith("cp") and name[2:].isdigit()):
            raise UsageError("--base must look like cp1, cp2, ...")
        return make_fubini_study(int(name[2:]))
    return make_fubini_study(args.n - 1)


def cmd_minimal_orbit(args):
    base = _base_from(args)
    orbit = mo.find_minimal_orbit(base, seed=args.seed)
    zeros, hits = mo.sigma_zero_set(base, seed=args.seed)
    clif = base.clifford_point()
    kn = make_kn(base, l=args.l)
    rep = ResidualReport(meta={"model": "fubini-study", "m": base.m, "seed": args.seed})
    rep.add("volume argmax", "the maximal orbit is the Clifford torus", float(np.max(np.abs(orbit.b - clif))), 1e-4)
    rep.add("sigma zero", "sigma vanishes on the Clifford torus", float(np.max(np.abs(zeros[0] - clif))) if zeros else math.inf, 1e-4)
    rep.add("sigma zero clusters", "the sigma-moment zero set is one orbit", abs(len(zeros) - 1), 0)
    for lam in (0.0, 1.0, -2.0):
        r = mo.build_L_lambda(mo.LLambdaSpec(orbit, lam), kn)
        rep.add(f"L_lambda slag (lambda={lam:g})", "L_lambda is special Lagrangian", max(r.lagrangian, r.special), 1e-7)
    records = [{"b": orbit.b, "volume": orbit.volume, "gradient_norm": orbit.gradient_norm, "sigma_zeros": np.array(zeros), "newton_hits": hits}]
    return records + rep.records(), rep


def cmd_g2(args):
    rng = np.random.default_rng(args.seed)
    trials = args.trials
    rep = ResidualReport(meta={"model": "g2", "seed": args.seed})
    what = args.part
    if what in ("table", "all"):
        nd, ad = g2.table_defects(rng, 1000)
        rep.add("norm multiplicative", "|xy| = |x||y|", nd, 1e-12)
        rep.add("alternative", "x(xy) = (xx)y", ad, 1e-12)
    if what in ("package", "all"):
        hk = prop = 0.0
        ranks = set()
        for _ in range(trials):
            P = g2.reduction_package(*g2.random_orthonormal_pair(rng))
            hk, prop = max(hk, P.report["hyperkahler"]), max(prop, P.report["proportionality"])
            ranks.add(P.report["rank"])
        rep.add("hyperkahler package", "J_i quaternionic on W", hk, 1e-10)
        rep.add("omega proportional to omega_3", "omega|_W = c omega_3", prop, 1e-10)
        rep.add("span rank", "span(eta_1, eta_2) = span(omega_1, omega_2)", float(ranks != {2}), 0)
    if what in ("so3", "all"):
        A = g2.so3_fields()
        pts = rng.normal(size=(20, 7))
        rep.add("so3 bracket identity", "d(i_X1 i_X2 phi) = i_X3 phi", g2.so3_bracket_identity(*A, pts), 1e-6)
        rep.add("so3 triple", "phi(X1, X2, X3) = 0", max(abs(g2.triple_phi(*A, x)) for x in rng.normal(size=(1000, 7))), 1e-12)
    return rep.records(), rep


COMMANDS = {
    "verify": cmd_verify,
    "fiber": cmd_fiber,
    "flow": cmd_flow,
    "cone": cmd_cone,
    "minimal-orbit": cmd_minimal_orbit,
    "g2": cmd_g2,
}


# ---------------------------------------------------------------------------
# argument handling


def build_parser():
    p = argparse.ArgumentParser(prog="calfib", description="Special Lagrangian fibrations from torus actions.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("part", nargs="?", default="all", help="g2 only: table, package, so3 or all")
    p.add_argument("--config", help="flat key = value file mirroring the flags")
    p.add_argument("--model", default="flat")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--l", type=float, default=1.0)
    p.add_argument("--level", help="comma-separated fiber level c")
    p.add_argument("--start", help="comma-separated real coordinates of a start point")
    p.add_argument("--base", help="Fubini-Study base, e.g. cp2")
    p.add_argument("--samples", type=int)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--length", type=float, default=10.0)
    p.add_argument("--radius", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, help="replace every residual tolerance")
    p.add_argument("--out")
    p.add_argument("--format", choices=("records", "csv"), default="records")
    return p


def read_config(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            values = read_config(args.config)
        except OSError as exc:
            raise UsageError(str(exc)) from None
        known = {a.dest: a for a in parser._actions}
        defaults = {}
        for key, val in values.items():
            if key not in known or key in ("config", "help", "command"):
                raise UsageError(f"unknown config key {key!r}")
            action = known[key]
            try:
                defaults[key] = action.type(val) if action.type else val
            except ValueError:
                raise UsageError(f"bad value for {key!r}: {val!r}") from None
            if action.choices and defaults[key] not in action.choices:
                raise UsageError(f"bad value for {key!r}: {val!r}")
        parser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    t0 = time.perf_counter()
    try:
        args = parse_args(argv)
        records, rep = COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_USAGE if exc.code else EXIT_OK
    except (UsageError, ValueError, TypeError) as exc:
        print(f"calfib: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GeometryError as exc:
        print(f"calfib: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if rep is not None and args.tol is not None:
        rep.override_tol(args.tol)
        if args.command in ("verify", "g2"):
            records = rep.records()
        elif args.command == "minimal-orbit":
            records = records[:1] + rep.records()
    text = to_csv(records) if args.format == "csv" else to_jsonl(records)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if rep is not None:
        print(rep.summary(), file=sys.stderr)
    print(f"wall time {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    if rep is not None and not rep.passed:
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
