"""Deterministic Monte Carlo experiments over (H, sigma, n) grids.

Each (cell, replicate) pair draws its fBm from a Philox key derived by
:func:`split_seed`, builds one fGd path per grid group and evaluates every
requested estimator on restrictions of that path.  Results are merged by key,
so the table does not depend on evaluation order or worker count.

Estimator ids
-------------
``h1`` .. ``h4``
    Hurst estimators (``h2``/``h4`` treat n as an observation budget).
``s{i}_h{j}`` (i = 1..3, j = 1..4)
    sigma^2 estimator i fed with Hurst estimate j from the same path.
``s{i}_true``
    sigma^2 estimator i fed with the true H.
``s4``
    sigma estimator from the ``h3`` regression intercept.

Errors for sigma estimators are reported on the sigma scale,
(sigma_hat - sigma)/sigma; the standardized statistic uses sigma^2.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import stats

from .diffusion import sigma2_1, sigma2_2, sigma2_3, sigma4
from .errors import FgdError, InvalidParameter, SpecError, TooFewSamples
from .fbm import GridSpec, sample_fbm_circulant
from .gompertz import GompertzParams, solve_explicit, subsample
from .hurst import RatioSchedule, hurst_from_path, integer_root, out_of_range, required_grids
from .theory import limit_var_h1, limit_var_h3, sigma_sq

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentSpec",
    "SummaryRow",
    "SummaryTable",
    "PRESETS",
    "preset",
    "split_seed",
    "run_experiment",
    "replicate_estimates",
    "summarize",
    "NormalityDiagnostic",
    "normality_diagnostic",
    "ResidualScan",
    "increment_residual_scan",
    "TABLE_COLUMNS",
]

HURST_IDS = ("h1", "h2", "h3", "h4")
TABLE_COLUMNS = (
    "estimator", "H", "sigma", "n", "mean_abs_err", "se_abs", "mean_rel_err",
    "se_rel", "std_stat_var", "var_ratio", "oor_count", "fail_count",
)


def _valid_estimator(name: str) -> bool:
    if name in HURST_IDS or name == "s4":
        return True
    head, _, tail = name.partition("_")
    return head in ("s1", "s2", "s3") and (tail in HURST_IDS or tail == "true")


def split_seed(base: int, cell: int, replicate: int, stream: int = 0) -> int:
    """Injective map to a 128-bit Philox key.

    Layout: base in bits 0-63, cell in 64-87, replicate in 88-111, stream in 112-127.
    """
    for name, value, bits in (("base", base, 64), ("cell", cell, 24), ("replicate", replicate, 24), ("stream", stream, 16)):
        if not 0 <= value < (1 << bits):
            raise InvalidParameter(f"{name}={value} does not fit in {bits} bits")
    return base | (cell << 64) | (replicate << 88) | (stream << 112)


@dataclass(frozen=True)
class ExperimentSpec:
    hurst: tuple[float, ...] = (0.75,)
    sigma: tuple[float, ...] = (1.5,)
    n: tuple[int, ...] = (1024,)
    estimators: tuple[str, ...] = HURST_IDS
    replicates: int = 300
    seed: int = 0
    x0: float = 3.0
    alpha: float = 0.5
    beta: float = 2.0
    horizon: float = 1.0
    schedule: tuple[int, ...] = (1, 2, 4, 8)
    convention: str = "div"
    oversample: int = 1
    max_fine: int = 1 << 16

    def __post_init__(self):
        for name in ("hurst", "sigma", "n", "estimators", "schedule"):
            value = getattr(self, name)
            if isinstance(value, (str, bytes)) or not isinstance(value, Iterable):
                value = (value,)
            value = tuple(value)
            if not value:
                raise SpecError(name, "must be a non-empty list")
            object.__setattr__(self, name, value)
        for h in self.hurst:
            if not isinstance(h, (int, float)) or not 0.5 < h < 1:
                raise SpecError("hurst", f"each value must lie in (1/2, 1), got {h!r}")
        for s in self.sigma:
            if not isinstance(s, (int, float)) or s < 0:
                raise SpecError("sigma", f"each value must be a nonnegative number, got {s!r}")
        for e in self.estimators:
            if not isinstance(e, str) or not _valid_estimator(e):
                raise SpecError("estimators", f"unknown estimator id {e!r}")
        if not isinstance(self.replicates, int) or self.replicates < 1:
            raise SpecError("replicates", f"must be a positive integer, got {self.replicates!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise SpecError("seed", f"must be an integer in [0, 2**64), got {self.seed!r}")
        if self.convention not in ("div", "mult"):
            raise SpecError("convention", f"must be 'div' or 'mult', got {self.convention!r}")
        if not isinstance(self.oversample, int) or self.oversample < 1:
            raise SpecError("oversample", f"must be a positive integer, got {self.oversample!r}")
        try:
            GompertzParams(self.x0, self.alpha, self.beta, 1.0, 0.75, self.horizon)
        except InvalidParameter as exc:
            raise SpecError("x0/alpha/beta/horizon", str(exc)) from exc
        for n in self.n:
            if not isinstance(n, int) or n < 2:
                raise SpecError("n", f"each value must be an integer >= 2, got {n!r}")
            for e in self.estimators:
                try:
                    _requirements(e, n, self)
                except InvalidParameter as exc:
                    raise SpecError("n", f"n={n} incompatible with {e}: {exc}") from exc
                if e in ("h2",) or e.endswith("_h2"):
                    if integer_root(n, 3) < 4:
                        raise SpecError("n", f"h2 needs a budget of at least 64, got {n}")
                if e in ("h4",) or e.endswith("_h4"):
                    if integer_root(n, 4) ** 4 < 8:
                        raise SpecError("n", f"h4 needs a budget of at least 16, got {n}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        if not isinstance(data, dict):
            raise SpecError("<root>", "spec must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SpecError(unknown[0], "unknown field")
        return cls(**data)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    def ratio_schedule(self, n: int) -> RatioSchedule:
        return RatioSchedule(self.schedule, n, self.convention)

    def cells(self) -> list[tuple[float, float, int]]:
        return list(itertools.product(self.hurst, self.sigma, self.n))


def _requirements(estimator: str, n: int, spec: ExperimentSpec) -> tuple[int, ...]:
    if estimator == "s4":
        return spec.ratio_schedule(n).sizes
    head, _, tail = estimator.partition("_")
    method = estimator if estimator in HURST_IDS else tail
    grids = () if method == "true" else required_grids(method, n, spec.ratio_schedule(n) if method == "h3" else None)
    return tuple(grids) if estimator in HURST_IDS else (n,) + tuple(grids)


def _group_grids(sets: dict[str, tuple[int, ...]], cap: int) -> tuple[list[int], dict[str, int]]:
    """Greedy grouping of requirement sets under a cap on the common fine grid."""
    lcms = {k: math.lcm(*v) for k, v in sets.items()}
    groups: list[int] = []
    owner: dict[str, int] = {}
    for key in sorted(sets, key=lambda k: (-lcms[k], k)):
        for g, fine in enumerate(groups):
            joined = math.lcm(fine, lcms[key])
            if joined <= max(cap, fine):
                groups[g] = joined
                owner[key] = g
                break
        else:
            owner[key] = len(groups)
            groups.append(lcms[key])
    return groups, owner


def replicate_estimates(spec: ExperimentSpec, cell: int, replicate: int) -> dict[str, Any]:
    """Estimates for one (cell, replicate): value per estimator, or an error code string."""
    H, sigma, n = spec.cells()[cell]
    params = GompertzParams(spec.x0, spec.alpha, spec.beta, sigma, H, spec.horizon)
    sets = {e: _requirements(e, n, spec) for e in spec.estimators}
    groups, owner = _group_grids(sets, spec.max_fine)

    paths: dict[int, Any] = {}
    hcache: dict[tuple[int, str], Any] = {}
    sch = spec.ratio_schedule(n) if any(e == "s4" or e.endswith("h3") for e in spec.estimators) else None
    out: dict[str, Any] = {}

    def path_of(g):
        if g not in paths:
            grid = GridSpec(spec.horizon, groups[g] * spec.oversample)
            try:
                fbm = sample_fbm_circulant(H, grid, split_seed(spec.seed, cell, replicate, g))
                paths[g] = solve_explicit(params, fbm)
            except FgdError as exc:
                paths[g] = exc
        if isinstance(paths[g], FgdError):
            raise paths[g]
        return paths[g]

    def hurst(g, method):
        key = (g, method)
        if key not in hcache:
            try:
                hcache[key] = hurst_from_path(path_of(g), method, n, sch)
            except FgdError as exc:
                hcache[key] = exc
        if isinstance(hcache[key], FgdError):
            raise hcache[key]
        return hcache[key]

    for e in spec.estimators:
        g = owner[e]
        try:
            if e in HURST_IDS:
                out[e] = hurst(g, e)
            elif e == "s4":
                h = hurst(g, "h3")
                x = path_of(g)
                out[e] = sigma4([subsample(x, nj) for nj in sch.sizes], sch, h)
            else:
                head, _, tail = e.partition("_")
                h = H if tail == "true" else hurst(g, tail)
                f = {"s1": sigma2_1, "s2": sigma2_2, "s3": sigma2_3}[head]
                out[e] = f(subsample(path_of(g), n), h, spec.horizon)
        except FgdError as exc:
            out[e] = exc.code
    return out


def _task(args):
    spec, cell, rep = args
    return (cell, rep), replicate_estimates(spec, cell, rep)


@dataclass(frozen=True)
class SummaryRow:
    estimator: str
    H: float
    sigma: float
    n: int
    mean_abs_err: float
    se_abs: float
    mean_rel_err: float
    se_rel: float
    std_stat_var: float
    var_ratio: float
    oor_count: int
    fail_count: int


@dataclass
class SummaryTable:
    rows: list[SummaryRow]
    spec: ExperimentSpec | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def row(self, estimator: str, H: float | None = None, sigma: float | None = None, n: int | None = None) -> SummaryRow:
        hits = [
            r for r in self.rows
            if r.estimator == estimator
            and (H is None or r.H == H)
            and (sigma is None or r.sigma == sigma)
            and (n is None or r.n == n)
        ]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {(estimator, H, sigma, n)}")
        return hits[0]

    def to_records(self) -> list[dict]:
        return [asdict(r) for r in self.rows]

    def write_csv(self, dest) -> None:
        with open(dest, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TABLE_COLUMNS)
            for r in self.rows:
                writer.writerow([_fmt(getattr(r, c)) for c in TABLE_COLUMNS])

    def write_json(self, dest) -> None:
        with open(dest, "w") as fh:
            json.dump(
                {"spec": self.spec.to_dict() if self.spec else None,
                 "rows": [{k: _json_num(v) for k, v in rec.items()} for rec in self.to_records()]},
                fh, indent=2,
            )


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.17g}"
    return str(v)


def _json_num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if x.size == 0:
        return math.nan, math.nan
    mean = math.fsum(x.tolist()) / x.size
    if x.size < 2:
        return mean, math.nan
    var = math.fsum(((x - mean) ** 2).tolist()) / (x.size - 1)
    return mean, math.sqrt(var / x.size)


def _sample_var(x: np.ndarray) -> float:
    if x.size < 2:
        return math.nan
    mean = math.fsum(x.tolist()) / x.size
    return math.fsum(((x - mean) ** 2).tolist()) / (x.size - 1)


def _standardization(estimator: str, H: float, sigma: float, n: int, spec: ExperimentSpec):
    """(rate, centre, scale-map, target variance) of the standardized statistic."""
    T = spec.horizon
    if estimator == "h1":
        return 2 * math.log(2) * math.sqrt(n), H, None, limit_var_h1(H)
    if estimator == "h2":
        c = integer_root(n, 3)
        return 2 * math.sqrt(c) * math.log(c / T), H, None, math.nan
    if estimator == "h3":
        var, base = limit_var_h3(spec.ratio_schedule(n), H)
        return math.sqrt(base), H, None, var
    if estimator in ("h4", "s4"):
        return math.nan, math.nan, None, math.nan
    target = sigma**4 * sigma_sq(H) if estimator == "s2_true" else math.nan
    return math.sqrt(n), sigma**2, "sq", target


def summarize(spec: ExperimentSpec, raw: dict) -> SummaryTable:
    rows = []
    for cell, (H, sigma, n) in enumerate(spec.cells()):
        for e in spec.estimators:
            vals = [raw[(cell, r)][e] for r in range(spec.replicates)]
            ok = np.array([v for v in vals if not isinstance(v, str)], dtype=float)
            fails = len(vals) - ok.size
            is_hurst = e in HURST_IDS
            truth = H if is_hurst else sigma
            est = ok if (is_hurst or e == "s4") else np.sqrt(ok)
            err = est - truth
            mae, se_abs = _mean_se(np.abs(err))
            if truth != 0:
                mre, se_rel = _mean_se(err / truth)
            else:
                mre, se_rel = math.nan, math.nan
            rate, centre, mode, target = _standardization(e, H, sigma, n, spec)
            if math.isnan(rate):
                svar = math.nan
            else:
                svar = _sample_var(rate * (ok - centre))
            ratio = svar / target if target and not math.isnan(target) else math.nan
            oor = int(sum(out_of_range(v) for v in ok.tolist())) if is_hurst else 0
            rows.append(SummaryRow(e, float(H), float(sigma), int(n), mae, se_abs, mre, se_rel, svar, ratio, oor, fails))
    return SummaryTable(rows, spec, raw)


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> SummaryTable:
    tasks = [(spec, c, r) for c in range(len(spec.cells())) for r in range(spec.replicates)]
    log.info("running %d replicate tasks with %d worker(s)", len(tasks), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        results = dict(map(_task, tasks))
    return summarize(spec, results)


PRESETS: dict[str, dict] = {
    # Absolute error of the Hurst estimators against H, common budget n = 2^10.
    "fig1": dict(hurst=[0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95], n=[1024],
                 estimators=list(HURST_IDS)),
    # Absolute error against the sample size at H = 0.75.
    "fig2": dict(hurst=[0.75], n=[256, 512, 1024, 2048, 4096], estimators=list(HURST_IDS)),
    # Relative error of sigma estimators against sigma, n = 2^10.
    "fig3": dict(hurst=[0.75], sigma=[0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0], n=[1024],
                 estimators=[f"s{i}_h{j}" for i in (1, 2, 3) for j in (1, 2, 3)] + ["s4"]),
    # Relative error against n at sigma = 1.
    "fig4": dict(hurst=[0.75], sigma=[1.0], n=[256, 512, 1024, 2048, 4096],
                 estimators=[f"s{i}_h{j}" for i in (1, 2, 3) for j in (1, 2, 3)] + ["s4"]),
}


def preset(name: str, **overrides) -> ExperimentSpec:
    if name not in PRESETS:
        raise SpecError("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentSpec.from_dict({**PRESETS[name], **overrides})


@dataclass(frozen=True)
class NormalityDiagnostic:
    count: int
    variance: float
    target_variance: float
    ratio: float
    ks_distance: float


def normality_diagnostic(estimates: Sequence[float], center: float, rate: float, target_variance: float) -> NormalityDiagnostic:
    """Compare rate * (estimates - center) with N(0, target_variance)."""
    x = np.asarray(estimates, dtype=float)
    if x.size < 30:
        raise TooFewSamples(f"need at least 30 estimates, got {x.size}")
    if not rate > 0:
        raise InvalidParameter(f"rate must be positive, got {rate!r}")
    z = rate * (x - center)
    var = _sample_var(z)
    ratio = var / target_variance if target_variance > 0 else math.nan
    ks = stats.kstest(z, "norm", args=(0.0, math.sqrt(target_variance))).statistic if target_variance > 0 else math.nan
    return NormalityDiagnostic(int(x.size), var, float(target_variance), ratio, float(ks))


@dataclass(frozen=True)
class ResidualScan:
    points: tuple[int, ...]
    max_residuals: tuple[float, ...]
    slope: float
    slope_se: float
    ok: bool
    message: str = ""


def increment_residual_scan(params: GompertzParams, seed: int, m_grid: Sequence[int]) -> ResidualScan:
    """Decay of max_k |Delta2 X_k - sigma X_{k-1} Delta2 B_k| under grid refinement.

    One fBm path is drawn on the finest grid; coarser grids are restrictions of
    it.  The slope of log(max residual) against log(step) is fitted by least
    squares.
    """
    m_grid = sorted(int(m) for m in m_grid)
    finest = m_grid[-1]
    if any(finest % m for m in m_grid):
        raise InvalidParameter(f"grid sizes {m_grid} are not nested")
    fbm = sample_fbm_circulant(params.hurst, GridSpec(params.horizon, finest), seed)
    x = solve_explicit(params, fbm)
    res = []
    for m in m_grid:
        xv = subsample(x, m).values
        bv = subsample(fbm, m).values
        d2x = xv[2:] - 2 * xv[1:-1] + xv[:-2]
        d2b = bv[2:] - 2 * bv[1:-1] + bv[:-2]
        res.append(float(np.max(np.abs(d2x - params.sigma * xv[:-2] * d2b))))
    if len(m_grid) < 3:
        return ResidualScan(tuple(m_grid), tuple(res), math.nan, math.nan, False,
                            "slope fit needs at least 3 grid sizes")
    logd = np.log(params.horizon / np.asarray(m_grid, dtype=float))
    fit = stats.linregress(logd, np.log(res))
    return ResidualScan(tuple(m_grid), tuple(res), float(fit.slope), float(fit.stderr), True)
