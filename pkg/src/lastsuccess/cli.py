"""Command-line entry point: ``lastsuccess <subcommand> ...``.

Exit status is 0 on success, 2 for invalid input and 3 when a numerical
routine cannot meet its tolerance.  Every table starts with a comment line
naming the quantity and the tolerance used.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager

import numpy as np

from . import bernstein, discrete, logseries, mixture, value
from .exceptions import NumericalError
from .priors import GameState, parse_prior
from .profiles import parse_profile

DIGITS = 6


def _fmt(v) -> str:
    if v is None:
        return "inf"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.{DIGITS}f}"


def _json_num(v):
    if v is None:
        return None
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    return round(float(v), DIGITS)


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="\n") as fh:
            yield fh


def _emit_table(args, quantity: str, tol, header, rows, extra=None):
    with _output(getattr(args, "output", None)) as out:
        if getattr(args, "out", "csv") == "json":
            doc = {"quantity": quantity, "tol": tol,
                   "columns": list(header),
                   "rows": [[_json_num(v) for v in r] for r in rows]}
            if extra:
                doc.update(extra)
            out.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        else:
            out.write(f"# quantity={quantity} tol={tol}\n")
            if extra:
                for key in sorted(extra):
                    out.write(f"# {key}={extra[key]}\n")
            out.write(",".join(header) + "\n")
            for r in rows:
                out.write(",".join(_fmt(v) for v in r) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_discrete(args):
    prof = parse_profile(args.profile)
    n = args.n
    if n < 1:
        raise ValueError("--n must be >= 1")
    col = discrete.s1_column(prof, n)
    mode = discrete.discrete_mode(prof, n)
    rows = [(k, float(v)) for k, v in enumerate(col, start=1)]
    best = discrete.optimal_index_set(prof, n)
    extra = {"mode": mode, "optimal_set_first": best.indices[0],
             "optimal_probability": _fmt(float(best.probability)),
             "optimal_probability_exact": str(best.probability)}
    _emit_table(args, "s1(k,n)", "exact", ("k", "s1"), rows, extra)


def _svg(points, path):
    w, h = 400, 300
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    ymax = max(ys) or 1.0
    pts = " ".join(f"{20 + (w - 40) * xv:.2f},{h - 20 - (h - 40) * yv / ymax:.2f}"
                   for xv, yv in zip(xs, ys))
    with open(path, "w", newline="\n") as fh:
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">\n')
        fh.write(f'<polyline fill="none" stroke="black" points="{pts}"/>\n</svg>\n')


def cmd_bernstein(args):
    prof = parse_profile(args.profile)
    if args.points < 2:
        raise ValueError("--grid must be >= 2")
    z = np.linspace(0.0, 1.0, args.points)
    s1 = bernstein.bernstein_S1(prof, args.k, args.n, z)
    s0 = bernstein.bernstein_S0(prof, args.k, args.n, z)
    mode = bernstein.optimal_z(prof, args.k, args.n) if args.k < args.n else bernstein.Mode(0.0, 0.0)
    rows = list(zip(z, s1, s0))
    _emit_table(args, "S1(k,n;z) S0(k,n;z)", 1e-12, ("z", "S1", "S0"), rows,
                {"mode_z": _fmt(mode.z), "mode_value": _fmt(mode.value)})
    if args.svg:
        _svg(list(zip(z, s1)), args.svg)


def cmd_cutoffs(args):
    prior = parse_prior(args.prior)
    prof = parse_profile(args.profile)
    q = prior.q if args.q is None else args.q
    if not 0.0 < q <= 1.0:
        raise ValueError("--q must lie in (0, 1]")
    table = mixture.cutoff_table(prior, prof, args.kmax, q)
    rows = [(r.k, r.alpha, r.beta, r.a, r.b) for r in table.rows]
    flagged = [r.k for r in table.rows if r.alpha is None]
    _emit_table(args, "alpha_k beta_k a_k b_k", mixture.ROOT_XTOL, ("k", "alpha", "beta", "a", "b"),
                rows, {"prior": table.prior, "profile": table.profile, "q": q,
                       "no_alpha_root": ";".join(map(str, flagged)) or "none"})


def cmd_montest(args):
    prior = parse_prior(args.prior)
    prof = parse_profile(args.profile)
    v = mixture.monotone_case_test(prior, prof, args.kmax)
    doc = {"quantity": "monotone case", "tol": 1e-10, "monotone": v.monotone,
           "witness": v.witness, "beta_below_alpha": list(v.beta_below_alpha),
           "alpha": [_json_num(a) for a in v.alphas], "beta": [_json_num(b) for b in v.betas]}
    if v.monotone:
        doc["interlacing"] = mixture.interlacing_check(prior, prof, args.kmax)
    with _output(args.output) as out:
        out.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def cmd_logseries_roots(args):
    from .priors import logseries as ls_prior
    from .profiles import records

    prior, prof = ls_prior(1.0), records()
    rows = []
    for k in range(1, args.kmax + 1):
        rows.append((k, mixture.root_alpha(prior, prof, k), mixture.root_beta(prior, prof, k),
                     logseries.rho_balance(k)))
    _emit_table(args, "alpha_k beta_k rho_k", 1e-10, ("k", "alpha", "beta", "rho"), rows)


def hyp_selftest():
    """Identity lattice for the hypergeometric routines; returns (name, error, tol) rows."""
    from scipy.special import hyp2f1 as ref

    out = []
    lattice = [(a, b, c) for a in (0.5, 1.0, 2.0, 3.5) for b in (1.0, 1.5, 3.0) for c in (2.0, 4.5, 6.0)]
    xs = (0.1, 0.4, 0.6, 0.8, 0.9)
    err = max(abs(logseries.hyp2f1_direct(a, b, c, x) / logseries.hyp2f1_transformed(a, b, c, x) - 1)
              for a, b, c in lattice for x in xs)
    out.append(("transformation", err, 1e-11))
    err = max(abs(logseries.F(a, b, c, x) / ref(a, b, c, x) - 1) for a, b, c in lattice for x in xs)
    out.append(("reference", err, 1e-12))
    err = max(abs(logseries.F(1, 1, 2, x) * x / -math.log1p(-x) - 1) for x in np.linspace(0.01, 0.99, 50))
    out.append(("F(1,1,2;x)=L/x", err, 1e-12))
    h = 1e-4
    err = 0.0
    for k in (1, 2, 5):
        for x in (0.2, 0.5, 0.8):
            f = lambda u: logseries.F(k, k, k + 1, u)
            fd = (8 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12 * h)
            exact = k * k / (k + 1) * logseries.F(k + 1, k + 1, k + 2, x)
            err = max(err, abs(fd / exact - 1))
    out.append(("differentiation", err, 1e-9))
    err = max(abs(logseries.P_euler(k, x) / logseries.P_hyp(k, x) - 1)
              for k in (1, 2, 5, 20, 50) for x in (0.05, 0.5, 0.9, 0.99))
    out.append(("euler_vs_series_P", err, 1e-9))
    err = max(abs(logseries.Q_param_series(k, x) / logseries.Q_hyp(k, x) - 1)
              for k in (1, 2, 5, 20, 50) for x in (0.05, 0.5, 0.9, 0.99))
    out.append(("euler_vs_series_Q", err, 1e-9))
    return out


def cmd_hyp_selftest(args):
    rows = hyp_selftest()
    failed = [name for name, err, tol in rows if not err <= tol]
    with _output(args.output) as out:
        out.write("# quantity=hypergeometric identities tol=per-row\n")
        out.write("check,error,tol,pass\n")
        for name, err, tol in rows:
            out.write(f"{name},{err:.3e},{tol:.0e},{'true' if err <= tol else 'false'}\n")
    if failed:
        tol = next(t for name, _, t in rows if name == failed[0])
        raise NumericalError(f"identity checks failed: {', '.join(failed)}", tol)


def cmd_value(args):
    grid = value.solve_value_grid(args.q, args.kmax, args.step, x_max=args.xmax,
                                  keep=max(args.kout, value.EXACT_K))
    x = grid.x_grid
    idx = np.unique(np.concatenate([np.searchsorted(x, np.arange(0.0, x[-1], args.dx)), [x.size - 1]]))
    rows = [(k, x[i], grid.values[k][i]) for k in range(0, args.kout + 1) for i in idx]
    extra = {"K_max": grid.K_max, "step": args.step,
             "gamma": ";".join(f"{k}:{_fmt(grid.gamma[k])}" for k in range(1, args.kout + 1)),
             "richardson": f"{grid.diagnostics.get('richardson', float('nan')):.2e}",
             "exact_region": f"{grid.diagnostics.get('exact_region', float('nan')):.2e}"}
    _emit_table(args, "V_k(x)", value.EXACT_TOL, ("k", "x", "V"), rows, extra)


def cmd_table1(args):
    rows = value.table1(step=args.step, K_max=args.kmax, with_delta=args.delta)
    header = ("k", "alpha", "beta", "gamma", "rho")
    data = [(r.k, r.alpha, r.beta, r.gamma, r.rho) for r in rows]
    if args.delta:
        header = header + ("delta",)
        data = [d + (r.delta,) for d, r in zip(data, rows)]
    _emit_table(args, "critical points (log-series prior, records)", "alpha,beta 1e-10; gamma grid step; rho 1e-10",
                header, data)


def cmd_simulate(args):
    from . import simulate

    prior = parse_prior(args.prior)
    if args.q is not None:
        prior = prior.with_q(args.q)
    prof = parse_profile(args.profile)
    state = GameState(args.t, args.k)
    strategies = []
    for spec in args.strategy:
        if spec.strip() == "myopic":
            table = mixture.cutoff_table(prior, prof, args.myopic_kmax)
            strategies.append(simulate.Myopic(table))
        else:
            strategies.append(simulate.parse_strategy(spec))
    if args.paths < 1:
        raise ValueError("--paths must be >= 1")
    res = simulate.estimate_many(strategies, prior, prof, state, args.paths, args.seed, crn=args.crn)
    docs = [{"strategy": spec, "trials": r.trials, "wins": r.wins, "estimate": r.estimate,
             "std_error": r.std_error, "seed": r.seed, "quantity": "winning probability",
             "tol": "3 std_error"} for spec, r in zip(args.strategy, res)]
    with _output(args.output) as out:
        out.write(json.dumps(docs[0] if len(docs) == 1 else docs, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------


def _unit(s):
    v = float(s)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{s} is not in [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lastsuccess", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=True):
        sp.add_argument("--output", "-o", default=None, help="output file (default: stdout)")
        if fmt:
            sp.add_argument("--out", choices=("csv", "json"), default="csv",
                            help="output format (default: csv)")

    sp = sub.add_parser("discrete", help="s1(k, n) column, its mode and the optimal index set")
    sp.add_argument("--profile", required=True, help="records | karamata:<theta> | explicit:<p1,...>")
    sp.add_argument("--n", type=int, required=True, help="number of trials")
    common(sp)
    sp.set_defaults(func=cmd_discrete)

    sp = sub.add_parser("bernstein", help="S1(k, n; z) and S0(k, n; z) on a z-grid")
    sp.add_argument("--profile", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, default=0, help="trials already observed (default 0)")
    sp.add_argument("--grid", "--points", dest="points", type=int, default=201, help="z-grid size (default 201)")
    sp.add_argument("--svg", default=None, help="also write a polyline SVG of S1")
    common(sp)
    sp.set_defaults(func=cmd_bernstein)

    sp = sub.add_parser("cutoffs", help="roots alpha_k, beta_k and cutoffs a_k, b_k")
    sp.add_argument("--prior", required=True,
                    help="geometric:<q> | logseries:<q> | negbin:<nu>,<q> | weights:<w1,...>:<q>")
    sp.add_argument("--profile", required=True)
    sp.add_argument("--q", type=float, default=None, help="scale for the cutoffs (default: prior's q)")
    sp.add_argument("--kmax", type=int, default=10, help="largest k (default 10)")
    common(sp)
    sp.set_defaults(func=cmd_cutoffs)

    sp = sub.add_parser("montest", help="monotone-case verdict with witness")
    sp.add_argument("--prior", required=True)
    sp.add_argument("--profile", required=True)
    sp.add_argument("--kmax", type=int, default=10, help="largest k (default 10)")
    common(sp, fmt=False)
    sp.set_defaults(func=cmd_montest)

    sp = sub.add_parser("logseries-roots", help="alpha_k, beta_k, rho_k for the log-series prior")
    sp.add_argument("--kmax", type=int, default=10, help="largest k (default 10)")
    common(sp)
    sp.set_defaults(func=cmd_logseries_roots)

    sp = sub.add_parser("hyp-selftest", help="hypergeometric identity lattice")
    common(sp, fmt=False)
    sp.set_defaults(func=cmd_hyp_selftest)

    sp = sub.add_parser("value", help="value functions V_k(x) and stopping frontiers")
    sp.add_argument("--q", type=float, default=1.0, help="prior scale (default 1)")
    sp.add_argument("--kmax", type=int, default=value.DEFAULT_K, help="index truncation K_max (default 400)")
    sp.add_argument("--step", type=float, default=value.DEFAULT_STEP, help="grid step (default 1e-4)")
    sp.add_argument("--xmax", type=float, default=None, help="grid end (default min(q, 1-1e-6))")
    sp.add_argument("--kout", type=int, default=10, help="emit V_0..V_kout (default 10)")
    sp.add_argument("--dx", type=float, default=0.01, help="x-spacing of emitted rows (default 0.01)")
    common(sp)
    sp.set_defaults(func=cmd_value)

    sp = sub.add_parser("table1", help="critical points for k in {1..5, 10}")
    sp.add_argument("--step", type=float, default=value.DEFAULT_STEP, help="grid step (default 1e-4)")
    sp.add_argument("--kmax", type=int, default=value.DEFAULT_K, help="K_max (default 400)")
    sp.add_argument("--delta", action="store_true", help="append the informed-bound crossing column")
    common(sp)
    sp.set_defaults(func=cmd_table1)

    sp = sub.add_parser("simulate", help="Monte Carlo winning probability")
    sp.add_argument("--strategy", action="append", required=True,
                    help="bygone | next | z:<f> | trap:<a,b;c,d> | cutoffs:<file.csv> | myopic "
                         "| informed:<option>; repeat for several")
    sp.add_argument("--prior", required=True)
    sp.add_argument("--profile", required=True)
    sp.add_argument("--q", type=float, default=None, help="override the prior's q")
    sp.add_argument("--t", type=_unit, default=0.0, help="state time (default 0)")
    sp.add_argument("--k", type=int, default=0, help="state trial count (default 0)")
    sp.add_argument("--paths", type=int, default=100_000, help="number of paths (default 1e5)")
    sp.add_argument("--seed", type=int, default=0, help="seed (default 0)")
    sp.add_argument("--crn", action="store_true", help="common random numbers across strategies")
    sp.add_argument("--myopic-kmax", type=int, default=50, help="cutoffs computed for myopic (default 50)")
    common(sp, fmt=False)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except NumericalError as exc:
        tol = f" (tolerance {exc.tolerance})" if exc.tolerance is not None else ""
        print(f"numerical failure: {exc}{tol}", file=sys.stderr)
        return 3
    except (ValueError, IndexError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
