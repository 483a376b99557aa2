"""Fractional Gompertz diffusion paths.

The process solves

    dX = (alpha X - beta X ln X) dt + sigma X dB^H,   X_0 = x0 > 0,

and is built from a given fBm path through the exact pathwise solution

    X_t = exp{ e^{-beta t} ln x0 + (alpha/beta)(1 - e^{-beta t})
               + sigma * int_0^t e^{-beta (t-s)} dB^H_s }.

The stochastic convolution is evaluated with the integration-by-parts
identity  int_0^t e^{-beta(t-s)} dB_s = B_t - beta int_0^t e^{-beta(t-s)} B_s ds,
the Lebesgue integral by the composite trapezoid rule on the fBm grid.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import (
    ExponentOverflow,
    GridMismatch,
    InvalidParameter,
    NonpositiveState,
    NotADivisor,
)
from .fbm import FbmPath, GridSpec, check_hurst

__all__ = [
    "GompertzParams",
    "ProcessPath",
    "volterra_integral",
    "volterra_path",
    "deterministic_curve",
    "solve_explicit",
    "euler_path",
    "subsample",
    "write_path_csv",
    "read_path_csv",
]

_LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class GompertzParams:
    x0: float = 3.0
    alpha: float = 0.5
    beta: float = 2.0
    sigma: float = 1.5
    hurst: float = 0.75
    horizon: float = 1.0

    def __post_init__(self):
        if not self.x0 > 0:
            raise InvalidParameter(f"x0 must be positive, got {self.x0!r}")
        if self.beta == 0:
            raise InvalidParameter("beta must be nonzero")
        if not self.sigma >= 0:
            raise InvalidParameter(f"sigma must be nonnegative, got {self.sigma!r}")
        if not self.horizon > 0:
            raise InvalidParameter(f"horizon must be positive, got {self.horizon!r}")
        check_hurst(self.hurst)


@dataclass(frozen=True, eq=False)
class ProcessPath:
    grid: GridSpec
    params: GompertzParams
    values: np.ndarray
    fbm: FbmPath | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.points + 1,):
            raise InvalidParameter(
                f"expected {self.grid.points + 1} values, got shape {values.shape}"
            )
        if not np.all(values > 0):
            raise InvalidParameter("process path must be strictly positive")
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times


def volterra_path(beta: float, fbm: FbmPath) -> np.ndarray:
    """int_0^{t_k} e^{-beta (t_k - s)} dB^H_s at every grid node.

    The trapezoid sum J_k = int_0^{t_k} e^{-beta(t_k-s)} B_s ds obeys
    J_k = e^{-beta d} J_{k-1} + d/2 (e^{-beta d} B_{k-1} + B_k), which stays
    finite for any beta T (no e^{beta s} factors are formed).
    """
    b = fbm.values
    d = fbm.grid.step
    if beta == 0:
        return b.copy()
    decay = math.exp(-beta * d)
    seg = 0.5 * d * (decay * b[:-1] + b[1:])
    conv = np.empty_like(b)
    conv[0] = 0.0
    conv[1:] = lfilter([1.0], [1.0, -decay], seg)
    return b - beta * conv


def volterra_integral(beta: float, fbm: FbmPath, k: int) -> float:
    k = int(k)
    if not 0 <= k <= fbm.grid.points:
        raise InvalidParameter(f"node index {k} outside 0..{fbm.grid.points}")
    if k == 0:
        return 0.0
    return float(volterra_path(beta, fbm)[k])


def deterministic_curve(params: GompertzParams, times: np.ndarray) -> np.ndarray:
    """exp{e^{-beta t} ln x0 + (alpha/beta)(1 - e^{-beta t})}, the sigma = 0 solution."""
    e = np.exp(-params.beta * np.asarray(times, dtype=float))
    return np.exp(e * math.log(params.x0) + params.alpha / params.beta * (1.0 - e))


def _check_compatible(params: GompertzParams, fbm: FbmPath) -> None:
    if fbm.hurst != params.hurst:
        raise GridMismatch(f"fBm has H={fbm.hurst}, parameters have H={params.hurst}")
    if not math.isclose(fbm.grid.horizon, params.horizon, rel_tol=1e-12):
        raise GridMismatch(
            f"fBm horizon {fbm.grid.horizon} differs from parameter horizon {params.horizon}"
        )


def solve_explicit(params: GompertzParams, fbm: FbmPath) -> ProcessPath:
    _check_compatible(params, fbm)
    t = fbm.grid.times
    e = np.exp(-params.beta * t)
    exponent = e * math.log(params.x0) + params.alpha / params.beta * (1.0 - e)
    if params.sigma != 0:
        exponent = exponent + params.sigma * volterra_path(params.beta, fbm)
    if np.max(exponent) > _LOG_MAX:
        raise ExponentOverflow(
            f"log-state reaches {np.max(exponent):.4g}; exp() overflows double precision"
        )
    values = np.exp(exponent)
    values[0] = params.x0
    if not np.all(values > 0):
        # Underflow to zero; the log-state is too negative to represent.
        raise ExponentOverflow(f"log-state reaches {np.min(exponent):.4g}; exp() underflows")
    return ProcessPath(fbm.grid, params, values, fbm)


def euler_path(params: GompertzParams, fbm: FbmPath) -> ProcessPath:
    """Explicit Euler scheme for the SDE driven by the increments of ``fbm``.

    Only a cross-check for :func:`solve_explicit`; it is biased and may leave
    the positive half-line on coarse grids.
    """
    _check_compatible(params, fbm)
    d = fbm.grid.step
    db = np.diff(fbm.values).tolist()
    a, b, s = params.alpha, params.beta, params.sigma
    x = params.x0
    out = [x]
    for k, inc in enumerate(db, start=1):
        x = x + (a * x - b * x * math.log(x)) * d + s * x * inc
        if not x > 0:
            raise NonpositiveState(f"Euler state {x:.4g} at node {k}; refine the grid")
        out.append(x)
    return ProcessPath(fbm.grid, params, np.array(out), fbm)


def subsample(path, n: int):
    """Keep every (m/n)-th node of an fBm or process path."""
    m = path.grid.points
    n = int(n)
    if n < 1 or m % n:
        raise NotADivisor(f"{n} does not divide the path's {m} increments")
    if n == m:
        return path
    step = m // n
    grid = GridSpec(path.grid.horizon, n)
    values = path.values[::step].copy()
    if isinstance(path, ProcessPath):
        fbm = subsample(path.fbm, n) if path.fbm is not None else None
        return ProcessPath(grid, path.params, values, fbm)
    return dataclasses.replace(path, grid=grid, values=values)


def write_path_csv(path, dest) -> None:
    """Write ``t,value`` rows with 17 significant digits."""
    t = path.grid.times
    with open(dest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "value"])
        for ti, xi in zip(t.tolist(), np.asarray(path.values).tolist()):
            writer.writerow([f"{ti:.17g}", f"{xi:.17g}"])


def read_path_csv(src) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(t, values)`` from a ``t,value`` CSV file."""
    src = Path(src)
    with open(src, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "value"]:
            raise InvalidParameter(f"{src}: expected header 't,value', got {header}")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if len(rows) < 2:
        raise InvalidParameter(f"{src}: need at least two rows")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]
