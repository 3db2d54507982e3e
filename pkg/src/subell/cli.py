"""Command-line front end: solve, certify, compare.

Every flag can also be supplied through an environment variable with the
``SUBELL_`` prefix (e.g. ``SUBELL_VARIANT=ellipsoid``); explicit flags win.
Traces are CSV with a fixed column order and 17-significant-digit decimals,
so equal runs produce equal files; summaries are plain key: value text.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

from . import certificates as certs
from .oracles import ProblemFormatError, load_problem
from .solver import (
    VARIANT_ELLIPSOID,
    VARIANTS,
    Schedule,
    StrategyConfig,
    delta_from_target,
    reconstruct_state,
    run,
    sliding_gap,
)

TRACE_COLUMNS = ("k", "variant", "productive", "f_value", "sliding_gap",
                 "cert_gap", "R_k", "avrad", "Gamma_k", "wall_time_us")
CERT_COLUMNS = ("k", "pathway", "Gamma_lambda", "S_lambda", "gap", "residual",
                "rho", "gap_bound")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _env_default(name: str, fallback=None):
    return os.environ.get("SUBELL_" + name.upper(), fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subell",
        description="Cutting-plane solvers with accuracy certificates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_variant=True):
        p.add_argument("--problem", default=_env_default("problem"),
                       help="path to a problem JSON file")
        if with_variant:
            p.add_argument("--variant", default=_env_default("variant", "subgrad-ellipsoid"),
                           choices=VARIANTS)
        p.add_argument("--iters", type=int,
                       default=int(_env_default("iters", 100)))
        p.add_argument("--schedule", default=_env_default("schedule", "decay"),
                       help="step schedule: 'decay' or 'const:K'")
        p.add_argument("--epsilon", type=float,
                       default=(lambda v: float(v) if v is not None else None)(
                           _env_default("epsilon")),
                       help="target residual; sets the termination gap eps*r/(eps+V)")
        p.add_argument("--delta", type=float,
                       default=(lambda v: float(v) if v is not None else None)(
                           _env_default("delta")),
                       help="explicit termination gap (overrides --epsilon)")
        p.add_argument("--out", default=_env_default("out"),
                       help="output CSV path (summary goes next to it)")
        p.add_argument("--seed", type=int, default=int(_env_default("seed", 0)),
                       help="seed recorded in output headers")

    ps = sub.add_parser("solve", help="run one variant, write trace and summary")
    common(ps)
    ps.set_defaults(func=cmd_solve)

    pc = sub.add_parser("certify", help="run and emit certificates at checkpoints")
    common(pc)
    pc.add_argument("--cadence", default=_env_default("cadence", "pow2"),
                    help="'pow2' or an integer stride between checkpoints")
    pc.set_defaults(func=cmd_certify)

    pm = sub.add_parser("compare", help="run several variants side by side")
    common(pm, with_variant=False)
    pm.add_argument("--variants", default=_env_default("variants", ",".join(VARIANTS)),
                    help="comma-separated variant list")
    pm.set_defaults(func=cmd_compare)
    return parser


def _load(args):
    if not args.problem:
        raise ProblemFormatError("no problem file given (--problem or SUBELL_PROBLEM)")
    return load_problem(args.problem)


def _delta_term(args, problem) -> tuple[float, str]:
    if args.delta is not None:
        return args.delta, f"delta_term: {_fmt(float(args.delta))} (explicit)"
    if args.epsilon is not None:
        d = delta_from_target(args.epsilon, problem.inner_radius,
                              problem.variation_bound)
        return d, (f"epsilon_target: {_fmt(float(args.epsilon))}\n"
                   f"delta_term: {_fmt(d)} (= eps*r/(eps+V))")
    return 0.0, "delta_term: 0 (early termination disabled)"


def _config(args, problem) -> tuple[StrategyConfig, str]:
    delta, note = _delta_term(args, problem)
    schedule = Schedule.parse(args.schedule)
    return StrategyConfig.for_variant(args.variant, problem.dim,
                                      schedule=schedule, delta_term=delta), note


def _write_csv(path, columns, rows, seed) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# seed={seed}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _trace_csv_rows(rows):
    for r in rows:
        yield (r.k, r.variant, r.productive, r.f_value, r.sliding_gap,
               r.cert_gap, r.R_k, r.avrad, r.Gamma_k, r.wall_time_us)


def _summary(problem, args, result, extra="") -> str:
    last = result.rows[-1] if result.rows else None
    lines = [
        f"problem: {args.problem}",
        f"variant: {getattr(args, 'variant', 'n/a')}",
        f"seed: {args.seed}",
        f"iterations: {result.iterations} (requested {args.iters})",
        f"termination: {result.termination}",
    ]
    if extra:
        lines.append(extra)
    if last is not None:
        lines.append(f"final_f: {_fmt(last.f_value)}")
        lines.append(f"final_sliding_gap: {_fmt(last.sliding_gap)}")
        lines.append(f"final_R_k: {_fmt(last.R_k)}")
        lines.append(f"final_avrad: {_fmt(last.avrad)}")
        lines.append(f"final_Gamma_k: {_fmt(last.Gamma_k)}")
    return "\n".join(lines) + "\n"


def cmd_solve(args) -> int:
    problem = _load(args)
    config, note = _config(args, problem)
    result = run(problem, config, args.iters)
    summary = _summary(problem, args, result, extra=note)
    if args.out:
        _write_csv(args.out, TRACE_COLUMNS, _trace_csv_rows(result.rows), args.seed)
        with open(args.out + ".summary.txt", "w", encoding="utf-8") as fh:
            fh.write(summary)
    sys.stdout.write(summary)
    return 0


def _checkpoints(cadence: str, total: int) -> list[int]:
    if total < 1:
        return []
    if cadence == "pow2":
        ks, k = [], 1
        while k < total:
            ks.append(k)
            k *= 2
        ks.append(total)
        return ks
    stride = int(cadence)
    if stride < 1:
        raise ValueError("cadence stride must be positive")
    ks = list(range(stride, total, stride))
    ks.append(total)
    return ks


def cmd_certify(args) -> int:
    problem = _load(args)
    config, note = _config(args, problem)
    result = run(problem, config, args.iters)
    records = result.records
    terminal = result.termination in ("gap-threshold", "zero-subgradient")

    cert_rows = []
    cert_dump = []
    rows = list(result.rows)
    for k in _checkpoints(args.cadence, len(records)):
        at_end = k == len(records)
        rho = bound = None
        if at_end and terminal:
            pathway = "terminal"
            cert = certs.certify_from_preliminary(records, terminal=True)
        elif config.variant == VARIANT_ELLIPSOID:
            pathway = "min-width"
            state_k = reconstruct_state(problem, records, k, result.state)
            report = certs.certify_standard_ellipsoid(
                records[:k], state_k, problem.feasible.diameter,
                problem.inner_radius)
            cert, rho, bound = report.certificate, report.rho, report.gap_bound
        else:
            pathway = "preliminary"
            cert = certs.certify_from_preliminary(records[:k])
        used = records if (at_end and terminal) else records[:k]
        g = certs.gap(cert, used, problem.x0, problem.R) \
            if cert.gamma_weighted > 0 else None
        res = certs.residual(cert, used, problem.x0, problem.R) \
            if cert.is_certificate else None
        cert_rows.append((k, pathway, cert.gamma_weighted, cert.productive_weight,
                          g, res, rho, bound))
        cert_dump.append({"k": k, "pathway": pathway, "gap": g, "residual": res,
                          "weights": cert.weights.tolist()})
        if k < len(rows) and g is not None:
            rows[k] = replace(rows[k], cert_gap=g)

    result.rows = rows
    summary = _summary(problem, args, result, extra=note)
    summary += f"certificates: {len(cert_rows)} checkpoints (cadence {args.cadence})\n"
    if cert_rows:
        summary += f"final_cert_gap: {_fmt(cert_rows[-1][4])}\n"
        summary += f"final_cert_residual: {_fmt(cert_rows[-1][5])}\n"
    if args.out:
        _write_csv(args.out, TRACE_COLUMNS, _trace_csv_rows(rows), args.seed)
        _write_csv(args.out + ".certs.csv", CERT_COLUMNS, cert_rows, args.seed)
        import json
        with open(args.out + ".certs.json", "w", encoding="utf-8") as fh:
            json.dump({"seed": args.seed, "checkpoints": cert_dump}, fh, indent=1)
            fh.write("\n")
    sys.stdout.write(summary)
    return 0


def cmd_compare(args) -> int:
    problem = _load(args)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in VARIANTS:
            raise ProblemFormatError(f"unknown variant {v!r}")
    schedule = Schedule.parse(args.schedule)
    delta, _ = _delta_term(args, problem)

    results = {}
    for v in variants:
        config = StrategyConfig.for_variant(v, problem.dim, schedule=schedule,
                                            delta_term=delta)
        results[v] = run(problem, config, args.iters)

    depth = max(len(r.rows) for r in results.values())
    columns = ["k"]
    for v in variants:
        columns += [f"{v}_f", f"{v}_sliding_gap", f"{v}_avrad", f"{v}_R_k"]
    wide = []
    for k in range(depth):
        row = [k]
        for v in variants:
            rows = results[v].rows
            if k < len(rows):
                r = rows[k]
                row += [r.f_value, r.sliding_gap, r.avrad, r.R_k]
            else:
                row += [None, None, None, None]
        wide.append(tuple(row))

    report = _regime_report(problem, variants, results)
    if args.out:
        _write_csv(args.out, tuple(columns), wide, args.seed)
        with open(args.out + ".report.txt", "w", encoding="utf-8") as fh:
            fh.write(report)
    sys.stdout.write(report)
    return 0


def _regime_report(problem, variants, results) -> str:
    """Informational: where the measured volume decay of an ellipsoid-family
    run overtakes the 1/sqrt(k) pace of the subgradient-family proxy."""
    n, R = problem.dim, problem.R
    lo, hi = n * n * math.log(2 * n), 3 * n * n * math.log(2 * n)
    lines = [f"dimension: {n}",
             f"expected crossover window: [{lo:.1f}, {hi:.1f}] iterations"]
    ell = next((v for v in variants if v.startswith("ellipsoid")), None)
    if ell is None:
        lines.append("crossover: n/a (no ellipsoid-family variant in the comparison)")
    else:
        # last iteration at which the 1/sqrt(k) pace still beats the measured
        # volume decay; the crossover is the point after which the ellipsoid
        # curve stays below for good
        behind = [row.k for row in results[ell].rows
                  if row.k >= 1 and row.avrad >= R / math.sqrt(row.k)]
        if not behind:
            lines.append("crossover: k <= 1 (volume decay ahead from the start)")
        elif behind[-1] + 1 >= len(results[ell].rows):
            lines.append(f"crossover: not reached within {len(results[ell].rows)} iterations")
        else:
            crossover = behind[-1] + 1
            inside = lo <= crossover <= hi
            lines.append(f"crossover: k = {crossover} "
                         f"({'inside' if inside else 'outside'} the window; informational)")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ProblemFormatError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
