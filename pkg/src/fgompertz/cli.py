"""Command-line entry point (``fgompertz``).

Exit codes: 0 success, 1 runtime or estimation failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import hurst as hmod
from .diffusion import sigma2_1, sigma2_2, sigma2_3, sigma4_from_variations
from .errors import FgdError, InvalidParameter, SpecError
from .fbm import GridSpec, sample_fbm_circulant, sample_fbm_cholesky
from .gompertz import GompertzParams, read_path_csv, solve_explicit, write_path_csv
from .harness import ExperimentSpec, preset, run_experiment
from .theory import SeriesPolicy, variance_table
from .variation import normalized_variation

log = logging.getLogger("fgompertz")

OUTPUT_DIR_ENV = "FGOMPERTZ_OUTPUT_DIR"
VARIANCE_COLUMNS = ("H", "sigma_sq", "sigma_star_first", "sigma12", "limit_var_h1", "lambda2_affine", "note")


class UsageError(Exception):
    pass


@dataclass
class EstimatorReport:
    estimator: str
    value: float
    n: int
    horizon: float
    hurst_est: float | None = None
    squared: bool = False
    out_of_range: bool = False
    inputs: dict = field(default_factory=dict)


def _out_path(arg: str | None, default_name: str) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / default_name


def _cmd_simulate_fbm(args) -> int:
    grid = GridSpec(args.horizon, args.points)
    if args.method == "circulant":
        path = sample_fbm_circulant(args.hurst, grid, args.seed)
    else:
        path = sample_fbm_cholesky(args.hurst, grid, args.seed)
    out = _out_path(args.out, "fbm.csv")
    write_path_csv(path, out)
    print(out)
    return 0


def _cmd_simulate_gompertz(args) -> int:
    params = GompertzParams(args.x0, args.alpha, args.beta, args.sigma, args.hurst, args.horizon)
    fbm = sample_fbm_circulant(params.hurst, GridSpec(params.horizon, args.points), args.seed)
    path = solve_explicit(params, fbm)
    out = _out_path(args.out, "gompertz.csv")
    write_path_csv(path, out)
    print(out)
    return 0


def _load_values(src: str) -> tuple[np.ndarray, float]:
    if not Path(src).is_file():
        raise UsageError(f"input file not found: {src}")
    t, x = read_path_csv(src)
    if t[0] != 0.0:
        raise InvalidParameter("time column must start at 0")
    step = np.diff(t)
    if not np.allclose(step, step[0], rtol=1e-9, atol=0.0) or step[0] <= 0:
        raise InvalidParameter("time column must be a uniform increasing grid")
    return x, float(t[-1])


def _restrict(x: np.ndarray, n: int) -> np.ndarray:
    N = x.size - 1
    if n < 1 or N % n:
        raise InvalidParameter(f"{n} does not divide the file's {N} increments")
    return x[:: N // n]


def _schedule(args, N: int) -> hmod.RatioSchedule:
    try:
        r = tuple(int(v) for v in args.schedule.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --schedule {args.schedule!r}") from exc
    if args.convention == "div":
        return hmod.RatioSchedule(r, N, "div")
    return hmod.RatioSchedule(r, N // max(r), "mult")


def _hurst(method: str, x: np.ndarray, args) -> float:
    N = x.size - 1
    if method == "h1":
        if N % 2:
            raise InvalidParameter("h1 needs an even number of increments")
        return hmod.h1(x[::2], x)
    if method == "h2":
        c = hmod.integer_root(N, 3)
        if c**3 != N:
            raise InvalidParameter(f"h2 needs a cube number of increments, got {N}")
        return hmod.h2(x, c)
    if method == "h3":
        sch = _schedule(args, N)
        return hmod.h3([_restrict(x, nj) for nj in sch.sizes], sch)
    if method == "h4":
        return hmod.h4(x)
    raise UsageError(f"unknown Hurst estimator {method!r}")


def _cmd_estimate(args) -> int:
    x, T = _load_values(args.input)
    N = x.size - 1
    est = args.estimator
    if est.startswith("h"):
        h = _hurst(est, x, args)
        report = EstimatorReport(est, h, N, T, out_of_range=hmod.out_of_range(h))
    else:
        spec = args.hurst_est or ("h3" if est == "s4" else None)
        if spec is None:
            raise UsageError(f"{est} needs --hurst-est (a number, h1 or h3)")
        if spec in ("h1", "h3"):
            h_est = _hurst(spec, x, args)
        else:
            try:
                h_est = float(spec)
            except ValueError as exc:
                raise UsageError(f"--hurst-est must be a number, h1 or h3; got {spec!r}") from exc
        if est == "s4":
            sch = _schedule(args, N)
            v = [normalized_variation(_restrict(x, nj), 2) for nj in sch.sizes]
            value = sigma4_from_variations(v, sch.sizes, h_est)
            report = EstimatorReport(est, value, N, T, h_est, False, inputs={"hurst_source": spec, "sizes": list(sch.sizes)})
        else:
            f = {"s1": sigma2_1, "s2": sigma2_2, "s3": sigma2_3}[est]
            value = f(x, h_est, T)
            report = EstimatorReport(est, value, N, T, h_est, True, inputs={"hurst_source": spec})
    print(json.dumps(asdict(report)))
    return 0


def _cmd_experiment(args) -> int:
    if bool(args.spec) == bool(args.preset):
        raise UsageError("give exactly one of --spec or --preset")
    overrides = {} if args.replicates is None else {"replicates": args.replicates}
    if args.spec:
        try:
            data = json.loads(Path(args.spec).read_text())
        except FileNotFoundError as exc:
            raise UsageError(f"spec file not found: {args.spec}") from exc
        except json.JSONDecodeError as exc:
            raise SpecError("<root>", f"invalid JSON: {exc}") from exc
        if isinstance(data, dict):
            data = {**data, **overrides}
        spec = ExperimentSpec.from_dict(data)
    else:
        spec = preset(args.preset, **overrides)
    out = _out_path(args.out, "experiment")
    out.mkdir(parents=True, exist_ok=True)
    threads = args.threads or os.cpu_count() or 1
    table = run_experiment(spec, workers=threads)
    table.write_csv(out / "summary.csv")
    table.write_json(out / "summary.json")
    fails = sum(r.fail_count for r in table.rows)
    if fails:
        log.warning("%d estimator evaluations failed; see fail_count", fails)
    print(out / "summary.csv")
    return 0


def _parse_grid(text: str) -> list[float]:
    try:
        if ":" in text:
            a, b, c = (float(v) for v in text.split(":"))
            if c <= 0 or b < a:
                raise ValueError
            count = int(math.floor((b - a) / c + 1e-9)) + 1
            return [round(a + i * c, 12) for i in range(count)]
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad --h-grid {text!r}; use 'start:stop:step' or a comma list") from exc


def _cmd_variance_table(args) -> int:
    rows = variance_table(_parse_grid(args.h_grid), SeriesPolicy(tol=args.tol))
    out = _out_path(args.out, "variance_table.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(VARIANCE_COLUMNS)
        for row in rows:
            diverges = row["sigma_star_first"] is None
            cells = ["" if row[c] is None else f"{row[c]:.17g}" for c in VARIANCE_COLUMNS[:-1]]
            w.writerow(cells + ["divergent" if diverges else ""])
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fgompertz", description="Fractional Gompertz diffusion toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    d = GompertzParams()

    s = sub.add_parser("simulate-fbm", help="sample an fBm path to CSV")
    s.add_argument("--hurst", type=float, required=True)
    s.add_argument("--points", type=int, default=1024)
    s.add_argument("--horizon", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--method", choices=("circulant", "cholesky"), default="circulant")
    s.add_argument("--out")
    s.set_defaults(func=_cmd_simulate_fbm)

    s = sub.add_parser("simulate-gompertz", help="sample an fGd path to CSV")
    s.add_argument("--x0", type=float, default=d.x0)
    s.add_argument("--alpha", type=float, default=d.alpha)
    s.add_argument("--beta", type=float, default=d.beta)
    s.add_argument("--sigma", type=float, default=d.sigma)
    s.add_argument("--hurst", type=float, default=d.hurst)
    s.add_argument("--points", type=int, default=1024)
    s.add_argument("--horizon", type=float, default=d.horizon)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_simulate_gompertz)

    s = sub.add_parser("estimate", help="estimate H or sigma from a path CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--estimator", required=True, choices=("h1", "h2", "h3", "h4", "s1", "s2", "s3", "s4"))
    s.add_argument("--hurst-est")
    s.add_argument("--schedule", default="1,2,4,8")
    s.add_argument("--convention", choices=("mult", "div"), default="div")
    s.set_defaults(func=_cmd_estimate)

    s = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    s.add_argument("--spec")
    s.add_argument("--preset", choices=("fig1", "fig2", "fig3", "fig4"))
    s.add_argument("--replicates", type=int)
    s.add_argument("--out")
    s.add_argument("--threads", type=int)
    s.set_defaults(func=_cmd_experiment)

    s = sub.add_parser("variance-table", help="tabulate asymptotic variances over H")
    s.add_argument("--h-grid", default="0.55:0.95:0.05")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_variance_table)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidParameter) as exc:
        print(f"fgompertz {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (FgdError, ArithmeticError, OSError) as exc:
        print(f"fgompertz {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
