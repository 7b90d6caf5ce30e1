"""Command-line entry point.

Data (CSV or JSON) goes to ``--out`` or stdout; summaries such as ``rho=...``
and rendered formulas go to stderr. Exit codes: 0 success, 1 invalid input,
2 comparison flags raised.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds, builders, simulate as mc, spectral
from .model import exact_trajectory, initial_distribution, load_model, save_model, validate_model

EXIT_OK, EXIT_INVALID, EXIT_FLAGGED = 0, 1, 2


class CliError(Exception):
    pass


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _emit(args, header, rows) -> None:
    if args.format == "json":
        text = json.dumps([dict(zip(header, row)) for row in rows], indent=1) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[_num(v) if not isinstance(v, str) else v for v in row] for row in rows])
        text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _mono_f(name):
    if name is None:
        return None
    return builders.MONO_FUNCTIONS[name]


def _spec(args) -> builders.ProblemSpec:
    mono = _mono_f(getattr(args, "mono_f", None) or ("identity" if args.problem == "mono" else None))
    if args.problem != "mono" and getattr(args, "mono_f", None):
        raise CliError("--mono-f only applies to --problem mono")
    return builders.ProblemSpec(args.problem, args.algo, args.n, mono)


def _load(args):
    try:
        model = load_model(args.model)
    except FileNotFoundError:
        raise CliError(f"model file not found: {args.model}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed model JSON in {args.model}: {exc}") from None
    problems = validate_model(model)
    if problems:
        raise CliError(f"invalid model {args.model}: " + "; ".join(problems))
    return model


def cmd_model_build(args) -> int:
    if args.problem == "leadingones":
        raise CliError(
            "LeadingOnes has no exact level model; use 'simulate --problem leadingones' "
            "or 'bound rate-analytic --problem leadingones'"
        )
    model = builders.build_model(_spec(args))
    if args.out:
        save_model(model, args.out)
    else:
        sys.stdout.write(json.dumps(model.to_dict(), indent=1) + "\n")
    return EXIT_OK


def cmd_model_validate(args) -> int:
    _load(args)
    _note("model ok")
    return EXIT_OK


def cmd_exact_trajectory(args) -> int:
    model = _load(args)
    traj = exact_trajectory(model, initial_distribution(model, args.init), args.t_max)
    _emit(args, ["t", "e_exact"], list(enumerate(traj)))
    return EXIT_OK


def _closed_form(model, p0, method):
    if method == "power-factors":
        return spectral.triangular_closed_form(model, p0)
    if method == "auto":
        R = model.R
        diagonal = np.count_nonzero(R - np.diag(np.diag(R))) == 0
        if spectral.is_upper_triangular(R) and not diagonal:
            return spectral.triangular_closed_form(model, p0)
    return spectral.diagonalizable_closed_form(model, p0, method)


def _term_rows(expr):
    return [(t.c, t.lam, t.degree, t.shift) for t in expr.terms]


def cmd_exact_closed_form(args) -> int:
    model = _load(args)
    expr = _closed_form(model, initial_distribution(model, args.init), args.method)
    _emit(args, ["c", "lambda", "binom_degree", "shift"], _term_rows(expr))
    _note("e[t] = " + expr.pruned().render())
    return EXIT_OK


def _bound_rows(bound, t_max):
    return [(t, float(bound(t))) for t in range(t_max + 1)]


def cmd_bound_rate(args) -> int:
    model = _load(args)
    b = bounds.rate_bound(model, initial_distribution(model, args.init), allow_trivial=args.allow_trivial)
    _emit(args, ["t", "bound"], _bound_rows(b, args.t_max))
    _note(f"rho={_num(b.rate)} base={_num(b.base)} provenance={b.provenance}")
    return EXIT_OK


def cmd_bound_auxiliary(args) -> int:
    model = _load(args)
    aux = bounds.build_bidiagonal_auxiliary(model, args.choice)
    b = bounds.auxiliary_rate_bound(
        model, aux, initial_distribution(model, args.init), allow_trivial=args.allow_trivial
    )
    _emit(args, ["t", "bound"], _bound_rows(b, args.t_max))
    _note(f"rho={_num(b.rate)} base={_num(b.base)} provenance={b.provenance}")
    return EXIT_OK


def cmd_bound_power_factor(args) -> int:
    model = _load(args)
    aux = bounds.build_bidiagonal_auxiliary(model, args.choice)
    expr = bounds.power_factor_bound(model, aux, initial_distribution(model, args.init), args.epsilon)
    _emit(args, ["t", "bound"], _bound_rows(expr, args.t_max))
    _note("terms (c,lambda,binom_degree,shift):")
    for row in _term_rows(expr.pruned()):
        _note(",".join(_num(v) for v in row))
    return EXIT_OK


def cmd_bound_rate_analytic(args) -> int:
    spec = builders.ProblemSpec(args.problem, args.algo, args.n)
    b = bounds.analytic_rate_bound(spec, args.base)
    _emit(args, ["t", "bound"], _bound_rows(b, args.t_max))
    _note(f"rho={_num(b.rate)} base={_num(b.base)} provenance={b.provenance}")
    return EXIT_OK


def _parse_sim_init(text: str):
    if text == "all-zeros":
        return "all_zeros", None
    if text == "uniform":
        return "uniform_random", None
    if text.startswith("bits:"):
        return "fixed_bitstring", text[5:]
    raise CliError(f"unknown --init {text!r}; use all-zeros, uniform or bits:<01-string>")


def cmd_simulate(args) -> int:
    init, bits = _parse_sim_init(args.init)
    cfg = mc.SimConfig(_spec(args), args.runs, args.t_max, args.seed, init, bits)
    emp = mc.simulate(cfg)
    rows = [(t, m, s) for t, (m, s) in enumerate(zip(emp.mean_error, emp.std_error))]
    _emit(args, ["t", "e_mc", "stderr"], rows)
    return EXIT_OK


def _read_csv(path):
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except FileNotFoundError:
        raise CliError(f"file not found: {path}") from None


def cmd_compare(args) -> int:
    ref_rows = _read_csv(args.reference)
    emp_rows = _read_csv(args.empirical)
    if not ref_rows or not emp_rows:
        raise CliError("empty CSV input")
    ref_col = next((c for c in ("e_exact", "bound", "e_mc") if c in ref_rows[0]), None)
    if ref_col is None or not {"t", "e_mc", "stderr"} <= set(emp_rows[0]):
        raise CliError("reference needs t and e_exact/bound columns; empirical needs t,e_mc,stderr")
    ref = {int(row["t"]): float(row[ref_col]) for row in ref_rows}
    n_emp = max(int(row["t"]) for row in emp_rows) + 1
    mean = np.full(n_emp, np.nan)
    se = np.full(n_emp, np.nan)
    for row in emp_rows:
        mean[int(row["t"])] = float(row["e_mc"])
        se[int(row["t"])] = float(row["stderr"])
    ts = sorted(t for t in ref if t < n_emp and not np.isnan(mean[t]))
    emp = mc.EmpiricalTrajectory(mean, se, runs=0)
    report = mc.compare(lambda t: ref[t], emp, ts, args.mode)
    rows = [(t, mean[t], ref[t], se[t], int(t in {f.t for f in report.flags})) for t in ts]
    _emit(args, ["t", "e_mc", "reference", "stderr", "flagged"], rows)
    _note(f"mode={report.mode} flagged={len(report.flags)} max_abs_z={_num(report.max_abs_z)}")
    return EXIT_OK if report.ok else EXIT_FLAGGED


def table1_expressions() -> dict[str, spectral.ClosedFormError]:
    """Relative error ``e^[t] / f_opt`` of OBSE on Mono, ``n = 4``, from the all-zeros string."""
    out = {}
    for label, name in (("|x|", "identity"), ("|x|^2", "square"), ("ln(|x|+1)", "log")):
        model = builders.build_mono_obse(4, builders.MONO_FUNCTIONS[name])
        p0 = initial_distribution(model, "worst")
        expr = spectral.triangular_closed_form(model, p0)
        out[label] = expr.scaled(1.0 / model.levels.f_opt).pruned(1e-9)
    return out


def cmd_report_table1(args) -> int:
    rows = []
    for label, expr in table1_expressions().items():
        rows.extend((label, *row) for row in _term_rows(expr))
        _note(f"{label}: e[t]/f_opt = {expr.render(5)}")
    _emit(args, ["function", "c", "lambda", "binom_degree", "shift"], rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    horizon = argparse.ArgumentParser(add_help=False)
    horizon.add_argument("--t-max", type=int, default=100)
    with_model = argparse.ArgumentParser(add_help=False)
    with_model.add_argument("--model", required=True, help="model JSON file")
    with_init = argparse.ArgumentParser(add_help=False)
    with_init.add_argument("--init", default="worst", help="worst | uniform | level:k")
    problem = argparse.ArgumentParser(add_help=False)
    problem.add_argument("--problem", required=True, choices=builders.PROBLEMS)
    problem.add_argument("--algo", required=True, choices=builders.ALGORITHMS)
    problem.add_argument("--n", required=True, type=int)
    problem.add_argument("--mono-f", choices=sorted(builders.MONO_FUNCTIONS))

    parser = argparse.ArgumentParser(prog="ea-error-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    model = sub.add_parser("model").add_subparsers(dest="action", required=True)
    model.add_parser("build", parents=[common, problem]).set_defaults(func=cmd_model_build)
    model.add_parser("validate", parents=[with_model]).set_defaults(func=cmd_model_validate)

    exact = sub.add_parser("exact").add_subparsers(dest="action", required=True)
    exact.add_parser("trajectory", parents=[common, horizon, with_model, with_init]).set_defaults(
        func=cmd_exact_trajectory
    )
    cf = exact.add_parser("closed-form", parents=[common, with_model, with_init])
    cf.add_argument("--method", default="auto", choices=("auto", "diagonal", "symmetric", "power-factors"))
    cf.set_defaults(func=cmd_exact_closed_form)

    bound = sub.add_parser("bound").add_subparsers(dest="action", required=True)
    rate = bound.add_parser("rate", parents=[common, horizon, with_model, with_init])
    rate.add_argument("--allow-trivial", action="store_true", help="fall back to max_i e(i) when drift vanishes")
    rate.set_defaults(func=cmd_bound_rate)
    aux = bound.add_parser("auxiliary", parents=[common, horizon, with_model, with_init])
    aux.add_argument("--choice", default="maximal", choices=("maximal", "paper-bwse"))
    aux.add_argument("--allow-trivial", action="store_true", help="fall back to max_i e(i) when drift vanishes")
    aux.set_defaults(func=cmd_bound_auxiliary)
    pf = bound.add_parser("power-factor", parents=[common, horizon, with_model, with_init])
    pf.add_argument("--choice", default="maximal", choices=("maximal", "paper-bwse"))
    pf.add_argument("--epsilon", type=float, default=None, help="tie-breaking step for repeated diagonals")
    pf.set_defaults(func=cmd_bound_power_factor)
    ra = bound.add_parser("rate-analytic", parents=[common, horizon])
    ra.add_argument("--problem", required=True, choices=("leadingones", "onemax"))
    ra.add_argument("--algo", required=True, choices=("bwse",))
    ra.add_argument("--n", required=True, type=int)
    ra.add_argument("--base", type=float, default=None, help="initial error (default: n)")
    ra.set_defaults(func=cmd_bound_rate_analytic)

    sim = sub.add_parser("simulate", parents=[common, horizon, problem])
    sim.add_argument("--runs", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--init", default="all-zeros", help="all-zeros | uniform | bits:<01-string>")
    sim.set_defaults(func=cmd_simulate)

    cmp_ = sub.add_parser("compare", parents=[common])
    cmp_.add_argument("--reference", required=True)
    cmp_.add_argument("--empirical", required=True)
    cmp_.add_argument("--mode", choices=("exact", "bound"), default="exact")
    cmp_.set_defaults(func=cmd_compare)

    report = sub.add_parser("report").add_subparsers(dest="action", required=True)
    report.add_parser("table1", parents=[common]).set_defaults(func=cmd_report_table1)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
