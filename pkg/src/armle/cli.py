"""Command-line front door.

Subcommands: simulate, filter, estimate, test, lan, experiment,
validate-kernel.  Tabular output is UTF-8 CSV with a header row and `.`
decimals; structured output is JSON with full double-precision round-trip
numbers and no NaN (non-finite results are an error instead).

Exit codes: 0 success, 2 usage, 3 data or format error, 4 numeric
degeneracy (unstable parameters, singular Gram, filter breakdown).  The
outcome of a hypothesis test never affects the exit code.  Every run echoes
its fully resolved configuration to stderr; set ARMLE_QUIET=1 to suppress
the echo and progress lines.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .ar import simulate_series
from .exceptions import (
    DimensionMismatch,
    NotPositiveDefinite,
    RootSolverNoConverge,
    SingularGram,
    TooShort,
    Unstable,
)
from .experiments import ExperimentConfig, run_experiment
from .filtering import pacf_and_variances
from .inference import lan_decomposition, lr_test, mle
from .noise import kernel_from_json, validate_kernel
from .state import filter_observations, log_likelihood

_DEGENERATE = (NotPositiveDefinite, SingularGram, Unstable, RootSolverNoConverge)
_DATA = (DimensionMismatch, TooShort)


class _CliError(Exception):
    """Error with an explicit exit code, reported as a one-line message."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _quiet() -> bool:
    return os.environ.get("ARMLE_QUIET", "").strip().lower() in ("1", "true", "yes")


def _note(text: str) -> None:
    if not _quiet():
        print(text, file=sys.stderr)


def _echo_config(obj: dict) -> None:
    _note("config: " + json.dumps(obj, sort_keys=True))


def _vector_arg(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated reals, got {text!r}"
        ) from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def _kernel_arg(text: str):
    try:
        return kernel_from_json(text)
    except (json.JSONDecodeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"bad kernel JSON: {exc}") from None


def _alpha_arg(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a real, got {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return value


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    try:
        return open(path, "w", encoding="utf-8", newline=""), True
    except OSError as exc:
        raise _CliError(3, f"cannot open {path!r} for writing: {exc}") from exc


def _emit_json(obj: dict, out: str) -> None:
    try:
        text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)
    except ValueError as exc:
        raise _CliError(4, f"refusing to emit non-finite numbers: {exc}") from exc
    fh, close = _open_out(out)
    try:
        fh.write(text + "\n")
    finally:
        if close:
            fh.close()


def _read_series(path: str) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "x" not in reader.fieldnames:
                raise _CliError(3, f"{path!r}: input CSV must have a column named 'x'")
            values = []
            for line, row in enumerate(reader, start=2):
                cell = row.get("x")
                if cell is None or cell == "":
                    raise _CliError(3, f"{path!r}:{line}: missing value in column 'x'")
                try:
                    values.append(float(cell))
                except ValueError:
                    raise _CliError(
                        3, f"{path!r}:{line}: cannot parse {cell!r} as a real"
                    ) from None
    except OSError as exc:
        raise _CliError(3, f"cannot read {path!r}: {exc}") from exc
    if not values:
        raise _CliError(3, f"{path!r}: no data rows")
    return np.array(values)


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    if args.p is not None and args.p != len(args.theta):
        raise _CliError(2, f"--p {args.p} does not match --theta of length {len(args.theta)}")
    _echo_config(
        {
            "command": "simulate",
            "theta": list(args.theta),
            "kernel": args.kernel.to_json_dict(),
            "n": args.n,
            "seed": args.seed,
            "out": args.out,
        }
    )
    x = simulate_series(args.theta, args.kernel, args.n, args.seed)
    fh, close = _open_out(args.out)
    try:
        fh.write("t,x\n")
        for t, value in enumerate(x, start=1):
            fh.write(f"{t},{float(value)!r}\n")
    finally:
        if close:
            fh.close()
    return 0


def _cmd_filter(args) -> int:
    _echo_config(
        {
            "command": "filter",
            "kernel": args.kernel.to_json_dict(),
            "n": args.n,
            "out": args.out,
        }
    )
    beta, sigma2 = pacf_and_variances(args.kernel, args.n)
    fh, close = _open_out(args.out)
    try:
        fh.write("n,beta,sigma2\n")
        for m in range(args.n):
            fh.write(f"{m + 1},{float(beta[m])!r},{float(sigma2[m])!r}\n")
    finally:
        if close:
            fh.close()
    return 0


def _cmd_estimate(args) -> int:
    _echo_config(
        {
            "command": "estimate",
            "in": args.input,
            "p": args.p,
            "kernel": args.kernel.to_json_dict(),
            "out": args.out,
        }
    )
    x = _read_series(args.input)
    path = filter_observations(x, args.kernel, args.p)
    result = mle(path)
    out = {
        "theta_hat": [float(v) for v in result.theta_hat],
        "stderr": [float(v) for v in result.stderr],
        "gram_over_n": [[float(v) for v in row] for row in result.gram_over_n],
        "cond": float(result.cond),
        "n": result.n,
        "p": result.p,
        "log_likelihood": float(log_likelihood(path, result.theta_hat)),
    }
    _emit_json(out, args.out)
    return 0


def _cmd_test(args) -> int:
    if args.p is not None and args.p != len(args.theta0):
        raise _CliError(
            2, f"--p {args.p} does not match --theta0 of length {len(args.theta0)}"
        )
    _echo_config(
        {
            "command": "test",
            "in": args.input,
            "kernel": args.kernel.to_json_dict(),
            "theta0": list(args.theta0),
            "alpha": args.alpha,
            "out": args.out,
        }
    )
    x = _read_series(args.input)
    path = filter_observations(x, args.kernel, len(args.theta0))
    result = lr_test(path, args.theta0, args.alpha)
    out = {
        "statistic": float(result.statistic),
        "critical": float(result.critical),
        "alpha": float(result.alpha),
        "pvalue": float(result.pvalue),
        "reject": bool(result.reject),
        "theta_hat": [float(v) for v in result.theta_hat],
        "theta0": [float(v) for v in result.theta0],
        "n": path.n,
        "p": path.p,
    }
    _emit_json(out, args.out)
    return 0


def _cmd_lan(args) -> int:
    if len(args.u) != len(args.theta0):
        raise _CliError(
            2,
            f"--u has length {len(args.u)} but --theta0 has length {len(args.theta0)}",
        )
    _echo_config(
        {
            "command": "lan",
            "in": args.input,
            "kernel": args.kernel.to_json_dict(),
            "theta0": list(args.theta0),
            "u": list(args.u),
            "out": args.out,
        }
    )
    x = _read_series(args.input)
    path = filter_observations(x, args.kernel, len(args.theta0))
    score_term, info_term, remainder = lan_decomposition(path, args.theta0, args.u)
    out = {
        "score_term": float(score_term),
        "info_term": float(info_term),
        "remainder": float(remainder),
        "delta_loglik": float(score_term + info_term + remainder),
        "theta0": list(args.theta0),
        "u": list(args.u),
        "n": path.n,
        "p": path.p,
    }
    _emit_json(out, args.out)
    return 0


def _cmd_experiment(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise _CliError(3, f"cannot read {args.config!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _CliError(3, f"{args.config!r}: bad JSON: {exc}") from exc
    try:
        cfg = ExperimentConfig.from_json_dict(obj)
        cfg.validate()
    except _DEGENERATE as exc:
        raise _CliError(4, f"{args.config!r}: {exc}") from exc
    except (ValueError, TypeError) as exc:
        raise _CliError(3, f"{args.config!r}: {exc}") from exc
    _echo_config(
        {
            "command": "experiment",
            "config": cfg.to_json_dict(),
            "out_dir": args.out_dir,
            "jobs": args.jobs,
        }
    )
    progress = None if _quiet() else lambda line: print(line, file=sys.stderr)
    report = run_experiment(cfg, jobs=args.jobs, progress=progress)
    report.write(args.out_dir)
    _emit_json(report.to_json_dict(), "-")
    return 0


def _cmd_validate_kernel(args) -> int:
    _echo_config(
        {
            "command": "validate-kernel",
            "kernel": args.kernel.to_json_dict(),
            "horizon": args.horizon,
            "out": args.out,
        }
    )
    report = validate_kernel(args.kernel, args.horizon)
    _emit_json(report.to_json_dict(), args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="armle",
        description=(
            "Exact Gaussian likelihood tools for AR(p) processes with "
            "stationary dependent noise."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    kernel_help = 'noise kernel as JSON, e.g. \'{"family": "ar1", "params": {"a": 0.5}}\''

    sim = sub.add_parser("simulate", help="simulate an AR(p) series")
    sim.add_argument("--theta", type=_vector_arg, required=True,
                     help="AR coefficients, comma-separated")
    sim.add_argument("--p", type=_positive_int, default=None,
                     help="order check; must equal the length of --theta")
    sim.add_argument("--kernel", type=_kernel_arg, required=True, help=kernel_help)
    sim.add_argument("--n", type=_positive_int, required=True,
                     help="sample size (runtime grows as n^2; n <= 20000 recommended)")
    sim.add_argument("--seed", type=_nonneg_int, default=0, help="RNG seed")
    sim.add_argument("--out", default="-", help="output CSV path, - for stdout")
    sim.set_defaults(func=_cmd_simulate)

    flt = sub.add_parser("filter", help="dump PACF and innovation variances")
    flt.add_argument("--kernel", type=_kernel_arg, required=True, help=kernel_help)
    flt.add_argument("--n", type=_positive_int, required=True, help="horizon")
    flt.add_argument("--out", default="-", help="output CSV path, - for stdout")
    flt.set_defaults(func=_cmd_filter)

    est = sub.add_parser("estimate", help="maximum-likelihood estimate from a series")
    est.add_argument("--in", dest="input", required=True, help="input CSV with column x")
    est.add_argument("--p", type=_positive_int, required=True, help="AR order")
    est.add_argument("--kernel", type=_kernel_arg, required=True, help=kernel_help)
    est.add_argument("--out", default="-", help="output JSON path, - for stdout")
    est.set_defaults(func=_cmd_estimate)

    tst = sub.add_parser("test", help="likelihood-ratio test of theta = theta0")
    tst.add_argument("--in", dest="input", required=True, help="input CSV with column x")
    tst.add_argument("--p", type=_positive_int, default=None,
                     help="order check; must equal the length of --theta0")
    tst.add_argument("--kernel", type=_kernel_arg, required=True, help=kernel_help)
    tst.add_argument("--theta0", type=_vector_arg, required=True,
                     help="null hypothesis coefficients, comma-separated")
    tst.add_argument("--alpha", type=_alpha_arg, default=0.05, help="test level")
    tst.add_argument("--out", default="-", help="output JSON path, - for stdout")
    tst.set_defaults(func=_cmd_test)

    lan = sub.add_parser("lan", help="local likelihood expansion around theta0")
    lan.add_argument("--in", dest="input", required=True, help="input CSV with column x")
    lan.add_argument("--kernel", type=_kernel_arg, required=True, help=kernel_help)
    lan.add_argument("--theta0", type=_vector_arg, required=True,
                     help="expansion point, comma-separated")
    lan.add_argument("--u", type=_vector_arg, required=True,
                     help="local direction, comma-separated")
    lan.add_argument("--out", default="-", help="output JSON path, - for stdout")
    lan.set_defaults(func=_cmd_lan)

    exp = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    exp.add_argument("--config", required=True, help="experiment config JSON file")
    exp.add_argument("--out-dir", required=True,
                     help="directory for report.json, raw.csv, curves.csv")
    exp.add_argument("--jobs", type=_positive_int, default=1,
                     help="worker processes; results independent of job count")
    exp.set_defaults(func=_cmd_experiment)

    vk = sub.add_parser("validate-kernel", help="check a kernel's positive definiteness")
    vk.add_argument("--kernel", type=_kernel_arg, required=True, help=kernel_help)
    vk.add_argument("--horizon", type=_positive_int, default=512,
                    help="number of lags to check")
    vk.add_argument("--out", default="-", help="output JSON path, - for stdout")
    vk.set_defaults(func=_cmd_validate_kernel)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"armle: error: {exc}", file=sys.stderr)
        return exc.code
    except _DEGENERATE as exc:
        print(f"armle: numeric degeneracy: {exc}", file=sys.stderr)
        return 4
    except _DATA as exc:
        print(f"armle: data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"armle: i/o error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"armle: data error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())
