"""Command-line front end.

Two commands: ``fit`` runs single-dataset inference on a two-column CSV,
``study`` runs the coverage simulation and renders the prior grid.  Every
run is reproducible from (flags, seed); the env var SANDWICHPOST_SEED is
the fallback when --seed is omitted.

Exit codes: 0 success, 2 input/usage error, 3 singular design,
4 replicate failure inside a study.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from importlib.metadata import version as _dist_version

import numpy as np

from .bayes import (
    ImproperUniform,
    InverseWishartPrior,
    JeffreysPrior,
    NormalPrior,
    PointMassPrior,
    PriorSpec,
    posterior_interval,
    run_gibbs,
)
from .errors import ReplicateFailure, SingularDesign
from .models import LinearRegression, RegressionObs
from .sandwich import sandwich_cov, wald_interval
from .stochastics import rng_stream
from .study import (
    ChainConfig,
    DgpConfig,
    StudyCell,
    informative_prior,
    run_cell,
    run_study,
)

SLOPE = 1


class _UsageError(Exception):
    """Bad flags or unreadable input; mapped to exit code 2."""


def _package_version() -> str:
    try:
        return _dist_version("sandwichpost")
    except Exception:
        return "unknown"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sandwichpost",
        description="Misspecification-robust sandwich intervals, "
        "their Bayesian counterpart, and a coverage study.",
    )
    parser.add_argument("command_pos", nargs="?", choices=["fit", "study"], metavar="command",
                        help="fit: single-dataset inference; study: coverage simulation")
    parser.add_argument("--command", choices=["fit", "study"], dest="command_flag",
                        help="alternative to the positional command")
    parser.add_argument("--n", type=int, nargs="+", default=None,
                        help="sample size(s) for the study (default: 10 500)")
    parser.add_argument("--reps", type=int, default=2000, help="replicates per cell")
    parser.add_argument("--level", type=float, default=0.95, help="interval level in (0,1)")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (fallback: SANDWICHPOST_SEED, then 0)")
    parser.add_argument("--gibbs-iters", type=int, default=5500, help="Gibbs iterations")
    parser.add_argument("--burn-in", type=int, default=500, help="Gibbs burn-in")
    parser.add_argument("--prior-beta", choices=["uniform", "informative", "custom"],
                        default=None,
                        help="coefficient prior; informative = N((1,1), n (X'X)^-1), worth "
                        "one observation (study: omit to run the full grid)")
    parser.add_argument("--prior-beta-file", default=None,
                        help="JSON file {\"mean\": [...], \"cov\": [[...]]} for --prior-beta custom")
    parser.add_argument("--prior-b", choices=["jeffreys", "plugin", "inverse-wishart"],
                        default=None, help="score-covariance prior (study: omit to run the full grid)")
    parser.add_argument("--prior-b-file", default=None,
                        help="JSON file {\"dof\": ..., \"scale\": [[...]]} for --prior-b inverse-wishart")
    parser.add_argument("--input", default=None, help="input CSV with header y,x (fit only)")
    parser.add_argument("--output-format", choices=["markdown", "csv", "json"],
                        default="markdown", help="stdout rendering")
    parser.add_argument("--output", default=None,
                        help="base path; study writes <base>.json and <base>.csv")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker processes for the study (results are thread-count invariant)")
    return parser


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SANDWICHPOST_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise _UsageError(f"SANDWICHPOST_SEED is not an integer: {env!r}")
    return 0


def _resolve_command(args) -> str:
    if args.command_pos and args.command_flag and args.command_pos != args.command_flag:
        raise _UsageError(
            f"conflicting commands: positional {args.command_pos!r} "
            f"vs --command {args.command_flag!r}"
        )
    command = args.command_pos or args.command_flag
    if command is None:
        raise _UsageError("no command given; use 'fit' or 'study' (or --command)")
    return command


def _validate_config(args) -> None:
    if not 0.0 < args.level < 1.0:
        raise _UsageError(f"--level must lie in (0, 1), got {args.level}")
    if args.gibbs_iters <= args.burn_in or args.burn_in < 0:
        raise _UsageError(
            f"need --gibbs-iters > --burn-in >= 0, got {args.gibbs_iters}, {args.burn_in}"
        )
    if args.reps < 1:
        raise _UsageError(f"--reps must be >= 1, got {args.reps}")
    if args.threads < 1:
        raise _UsageError(f"--threads must be >= 1, got {args.threads}")
    if args.n is not None and any(n < 1 for n in args.n):
        raise _UsageError(f"--n values must be >= 1, got {args.n}")


def read_dataset(path: str) -> list[RegressionObs]:
    """Parse a CSV with header ``y,x`` into regression observations."""
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise _UsageError(f"cannot open {path}: {exc}")
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise _UsageError(f"{path}: empty file")
        if [h.strip() for h in header] != ["y", "x"]:
            raise _UsageError(f"{path}: line 1: expected header 'y,x', got {','.join(header)!r}")
        data = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # tolerate a trailing blank line
            if len(row) != 2:
                raise _UsageError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            try:
                yval, xval = float(row[0]), float(row[1])
            except ValueError:
                raise _UsageError(f"{path}: line {lineno}: non-numeric value in {row!r}")
            data.append(RegressionObs(y=yval, x=np.array([1.0, xval])))
    if not data:
        raise _UsageError(f"{path}: no data rows")
    return data


def _load_json(path, what):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise _UsageError(f"cannot read {what} from {path}: {exc}")


def _beta_prior_from_args(args, data):
    kind = args.prior_beta or "uniform"
    if kind == "uniform":
        return ImproperUniform(), "uniform"
    if kind == "informative":
        return informative_prior(data), "informative"
    if args.prior_beta_file is None:
        raise _UsageError("--prior-beta custom requires --prior-beta-file")
    raw = _load_json(args.prior_beta_file, "coefficient prior")
    return NormalPrior(mean=np.array(raw["mean"], dtype=float),
                       cov=np.array(raw["cov"], dtype=float)), "custom"


def _b_prior_from_args(args, fit):
    kind = args.prior_b or "jeffreys"
    if kind == "jeffreys":
        return JeffreysPrior(), "jeffreys"
    if kind == "plugin":
        return PointMassPrior(fit.B_hat), "plugin"
    if args.prior_b_file is None:
        raise _UsageError("--prior-b inverse-wishart requires --prior-b-file")
    raw = _load_json(args.prior_b_file, "B prior")
    return InverseWishartPrior(dof=float(raw["dof"]),
                               scale=np.array(raw["scale"], dtype=float)), "inverse-wishart"


def _fmt_matrix(m) -> str:
    rows = ["[" + ", ".join(f"{v:.10g}" for v in row) + "]" for row in np.asarray(m)]
    return "[" + "; ".join(rows) + "]"


def cmd_fit(args) -> int:
    seed = _resolve_seed(args)
    if args.input is None:
        raise _UsageError("fit requires --input")
    data = read_dataset(args.input)
    model = LinearRegression(dim=2)
    try:
        fit = sandwich_cov(model, data)
        beta_prior, beta_kind = _beta_prior_from_args(args, data)
        # Residuals at rounding level make the sandwich likelihood degenerate
        # (B_hat ~ 0), so report point intervals instead of sampling.
        X = np.stack([o.x for o in data])
        y = np.array([o.y for o in data])
        resid = y - X @ fit.theta_hat
        scale = 1.0 + float(np.max(np.abs(y)))
        degenerate = float(resid @ resid) <= len(data) * (1e-12 * scale) ** 2
        if degenerate:
            b_kind = args.prior_b or "jeffreys"
            bayes = (float(fit.theta_hat[SLOPE]), float(fit.theta_hat[SLOPE]))
        else:
            b_prior, b_kind = _b_prior_from_args(args, fit)
            prior = PriorSpec(theta_prior=beta_prior, b_prior=b_prior)
            chain = run_gibbs(
                rng_stream(seed, (0,)),
                model,
                data,
                prior,
                n_iter=args.gibbs_iters,
                n_burn=args.burn_in,
            )
            bayes = posterior_interval(chain, SLOPE, args.level)
    except SingularDesign as exc:
        print(f"error: singular design: {exc}", file=sys.stderr)
        return 3

    wald = wald_interval(fit, SLOPE, args.level)

    report = {
        "n": fit.n,
        "theta_hat": [float(v) for v in fit.theta_hat],
        "A": np.asarray(fit.A).tolist(),
        "B_hat": np.asarray(fit.B_hat).tolist(),
        "C_hat": np.asarray(fit.C_hat).tolist(),
        "level": args.level,
        "wald_interval_slope": [wald[0], wald[1]],
        "bayes_interval_slope": [bayes[0], bayes[1]],
        "prior_beta": beta_kind,
        "prior_b": b_kind,
        "seed": seed,
        "gibbs_iters": args.gibbs_iters,
        "burn_in": args.burn_in,
    }
    if args.output_format == "json":
        print(json.dumps(report, indent=2))
    elif args.output_format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        for key, value in report.items():
            writer.writerow([key, json.dumps(value)])
        sys.stdout.write(buf.getvalue())
    else:
        print(f"# Sandwich fit (n={fit.n}, seed={seed})")
        print()
        print(f"theta_hat: ({fit.theta_hat[0]:.6g}, {fit.theta_hat[1]:.6g})")
        print(f"A: {_fmt_matrix(fit.A)}")
        print(f"B_hat: {_fmt_matrix(fit.B_hat)}")
        print(f"C_hat: {_fmt_matrix(fit.C_hat)}")
        print()
        print(f"plug-in Wald {args.level:g} interval for the slope: "
              f"({wald[0]:.6g}, {wald[1]:.6g})")
        print(f"posterior ({beta_kind} x {b_kind}) {args.level:g} interval for the slope: "
              f"({bayes[0]:.6g}, {bayes[1]:.6g})")
        if degenerate:
            print()
            print("warning: zero residuals; sandwich variance is degenerate and "
                  "the intervals collapse to a point")
    return 0


def _cells_payload(cells: list[StudyCell]) -> list[dict]:
    return [
        {
            "n": cell.n,
            "prior_beta": cell.theta_prior_kind,
            "prior_b": cell.b_prior_kind,
            "coverage": cell.coverage,
            "mean_width": cell.mean_width,
            "mc_se": cell.mc_se_coverage,
            "reps": cell.n_reps,
        }
        for cell in cells
    ]


def _study_json(args, seed, cells) -> str:
    payload = {
        "config": {
            "command": "study",
            "n": sorted({cell.n for cell in cells}),
            "reps": args.reps,
            "level": args.level,
            "seed": seed,
            "gibbs_iters": args.gibbs_iters,
            "burn_in": args.burn_in,
            "prior_beta": args.prior_beta,
            "prior_b": args.prior_b,
            "threads": args.threads,
        },
        "cells": _cells_payload(cells),
        "version": _package_version(),
    }
    return json.dumps(payload, indent=2)


def _study_csv(cells) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "prior_beta", "prior_b", "coverage", "mean_width", "mc_se", "reps"])
    for cell in _cells_payload(cells):
        writer.writerow([cell["n"], cell["prior_beta"], cell["prior_b"],
                         repr(cell["coverage"]), repr(cell["mean_width"]),
                         repr(cell["mc_se"]), cell["reps"]])
    return buf.getvalue()


def _study_markdown(args, seed, cells) -> str:
    by_key = {(c.n, c.theta_prior_kind, c.b_prior_kind): c for c in cells}
    lines = [f"# Coverage study (reps={args.reps}, level={args.level:g}, seed={seed})", ""]
    for n in sorted({cell.n for cell in cells}):
        lines.append(f"## n = {n}")
        lines.append("")
        lines.append("| pi(B) \\ pi(beta) | informative | uniform |")
        lines.append("|---|---|---|")
        for b_kind, b_label in (("jeffreys", "Jeffreys"), ("plugin", "plug-in")):
            row = [f"| {b_label} "]
            for theta_kind in ("informative", "uniform"):
                cell = by_key.get((n, theta_kind, b_kind))
                row.append(
                    f"| {cell.coverage:.4f} ({cell.mean_width:.3f}) " if cell else "| - "
                )
            lines.append("".join(row) + "|")
        lines.append("")
        wald = by_key.get((n, "wald", "plugin"))
        if wald is not None:
            lines.append(f"plug-in Wald row: {wald.coverage:.4f} ({wald.mean_width:.3f})")
        ses = ", ".join(
            f"{c.theta_prior_kind}x{c.b_prior_kind}={c.mc_se_coverage:.4f}"
            for c in cells
            if c.n == n
        )
        lines.append(f"MC standard errors of coverage: {ses}")
        lines.append("")
    return "\n".join(lines)


def _single_cell_markdown(args, seed, cell: StudyCell) -> str:
    return "\n".join(
        [
            f"# Coverage cell (reps={cell.n_reps}, level={args.level:g}, seed={seed})",
            "",
            f"n={cell.n}, priors {cell.theta_prior_kind} x {cell.b_prior_kind}: "
            f"coverage {cell.coverage:.4f} (width {cell.mean_width:.3f}, "
            f"mc se {cell.mc_se_coverage:.4f})",
            "",
        ]
    )


def cmd_study(args) -> int:
    seed = _resolve_seed(args)
    n_values = args.n if args.n else [10, 500]
    chain = ChainConfig(n_iter=args.gibbs_iters, n_burn=args.burn_in)
    single = args.prior_beta is not None and args.prior_b is not None
    try:
        if single:
            if args.prior_beta == "custom" or args.prior_b == "inverse-wishart":
                raise _UsageError(
                    "study cells support uniform/informative and jeffreys/plugin priors"
                )
            cells = [
                run_cell(
                    seed,
                    DgpConfig(n=n),
                    args.prior_beta,
                    args.prior_b,
                    n_reps=args.reps,
                    level=args.level,
                    chain=chain,
                    threads=args.threads,
                )
                for n in n_values
            ]
        else:
            cells = run_study(
                seed,
                n_values,
                n_reps=args.reps,
                level=args.level,
                chain=chain,
                threads=args.threads,
            )
    except ReplicateFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except SingularDesign as exc:
        print(f"error: singular design: {exc}", file=sys.stderr)
        return 3

    if args.output_format == "json":
        print(_study_json(args, seed, cells))
    elif args.output_format == "csv":
        sys.stdout.write(_study_csv(cells))
    else:
        if single:
            for cell in cells:
                sys.stdout.write(_single_cell_markdown(args, seed, cell))
        else:
            print(_study_markdown(args, seed, cells))
    if args.output:
        base, ext = os.path.splitext(args.output)
        output_base = base if ext.lower() in (".json", ".csv") else args.output
        with open(output_base + ".json", "w", encoding="utf-8") as handle:
            handle.write(_study_json(args, seed, cells) + "\n")
        with open(output_base + ".csv", "w", encoding="utf-8") as handle:
            handle.write(_study_csv(cells))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        command = _resolve_command(args)
        _validate_config(args)
        if command == "fit":
            return cmd_fit(args)
        return cmd_study(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
