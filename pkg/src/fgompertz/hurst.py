"""Hurst-index estimators for discretely observed fGd paths.

``h1`` -- log-ratio of second-order normalized variations at n and 2n points.
``h2`` -- coarse second differences against local fine-grid variations W_{n,k}
          on n^3 points.
``h3`` -- weighted log-regression of V^(2)_{n_j}/(n_j - 1) over several grids.
``h4`` -- affine inversion of the increment ratio statistic on n^4 points.

None of the estimators clips its value to (0, 1); use :func:`out_of_range`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateSchedule,
    GridMismatch,
    InvalidParameter,
    PathTooShort,
    ZeroVariation,
)
from .gompertz import subsample
from .variation import _values, delta, normalized_variation, ratio_statistic, w_statistic

__all__ = [
    "RatioSchedule",
    "RegressionWeights",
    "weights",
    "integer_root",
    "out_of_range",
    "h1_from_variations",
    "h1",
    "h2",
    "h3_from_variations",
    "h3",
    "h4_from_ratio",
    "h4",
    "hurst_from_path",
    "required_grids",
    "LAMBDA2_INTERCEPT",
    "LAMBDA2_SLOPE",
]

# Affine approximation Lambda_2(H) ~ 0.5174 + 0.1468 H of the ratio statistic's mean.
LAMBDA2_INTERCEPT = 0.5174
LAMBDA2_SLOPE = 0.1468


@dataclass(frozen=True)
class RegressionWeights:
    y: np.ndarray
    z: np.ndarray


def _weights_from_logs(logs: np.ndarray) -> RegressionWeights:
    y = logs - math.fsum(logs.tolist()) / logs.size
    # Second centring pass: keeps sum(z) ~ eps / |y| when the ratios are close together.
    y = y - math.fsum(y.tolist()) / y.size
    ss = math.fsum((y * y).tolist())
    if ss == 0.0:
        raise DegenerateSchedule("all ratios are equal; regression weights undefined")
    return RegressionWeights(y, y / ss)


def weights(r: Sequence[int]) -> RegressionWeights:
    """y_i = ln r_i - mean(ln r),  z_i = y_i / sum(y^2)."""
    r = np.asarray(r, dtype=float)
    if r.size < 2 or np.any(r <= 0):
        raise InvalidParameter(f"need at least two positive ratios, got {r.tolist()}")
    return _weights_from_logs(np.log(r))


@dataclass(frozen=True)
class RatioSchedule:
    """Grid sizes for ``h3``/``s4``.

    ``convention="mult"``: n_j = r_j * n.  ``convention="div"``: n_j = n / r_j,
    with n the largest sample size.
    """

    r: tuple[int, ...] = (1, 2, 4, 8)
    n: int = 1024
    convention: str = "div"

    def __post_init__(self):
        r = tuple(int(v) for v in self.r)
        if len(r) < 2:
            raise InvalidParameter("schedule needs at least two ratios")
        if any(v < 1 for v in r):
            raise InvalidParameter(f"ratios must be positive integers, got {r}")
        if self.convention not in ("mult", "div"):
            raise InvalidParameter(f"convention must be 'mult' or 'div', got {self.convention!r}")
        if self.n < 1:
            raise InvalidParameter(f"base size must be positive, got {self.n}")
        if self.convention == "div" and any(self.n % v for v in r):
            raise InvalidParameter(f"every ratio in {r} must divide n={self.n}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "n", int(self.n))

    @property
    def sizes(self) -> tuple[int, ...]:
        if self.convention == "mult":
            return tuple(v * self.n for v in self.r)
        return tuple(self.n // v for v in self.r)

    def weights(self) -> RegressionWeights:
        # Centring ln n_j removes ln n, so for "mult" this equals weights(r);
        # for "div" the regressor is -ln r_j.
        return _weights_from_logs(np.log(np.asarray(self.sizes, dtype=float)))

    def as_multiplicative(self) -> "RatioSchedule":
        """Equivalent schedule n_j = k_j * n' with integer k_j."""
        if self.convention == "mult":
            return self
        top = max(self.r)
        return RatioSchedule(tuple(top // v for v in self.r), self.n // top, "mult")

    def with_n(self, n: int) -> "RatioSchedule":
        return RatioSchedule(self.r, n, self.convention)


def integer_root(N: int, p: int) -> int:
    """Largest integer n with n**p <= N."""
    N = int(N)
    if N < 1:
        raise InvalidParameter(f"budget must be positive, got {N}")
    n = int(round(N ** (1.0 / p)))
    while n**p > N:
        n -= 1
    while (n + 1) ** p <= N:
        n += 1
    return n


def out_of_range(h: float) -> bool:
    return not (0.0 < h < 1.0)


def h1_from_variations(v_n: float, v_2n: float) -> float:
    if v_n <= 0 or v_2n <= 0:
        raise ZeroVariation("second-order variation vanishes")
    return 0.5 - math.log(v_2n / v_n) / (2.0 * math.log(2.0))


def h1(coarse, fine) -> float:
    """Estimator from restrictions of one path to n and 2n increments."""
    xc, xf = _values(coarse), _values(fine)
    if xf.size - 1 != 2 * (xc.size - 1):
        raise GridMismatch("fine path must have twice the increments of the coarse one")
    return h1_from_variations(normalized_variation(xc, 2), normalized_variation(xf, 2))


def h2(fine_path, n: int) -> float:
    """Estimator on a path with n^3 increments (k_n = n^2).

    The coarse sum runs over k = 2..n-1 with prefactor 2/(n-1): Delta^(2) X(t_n)
    would need a node beyond the horizon.
    """
    x = _values(fine_path)
    n = int(n)
    if n < 4:
        raise PathTooShort(f"h2 needs n >= 4, got {n}")
    kn = n * n
    if x.size - 1 != n * kn:
        raise GridMismatch(f"h2 with n={n} needs {n * kn} increments, got {x.size - 1}")
    coarse = delta(x[::kn], 2)  # coarse[k-1] = Delta^(2) X(t_k), k = 1..n-1
    terms = []
    for k in range(2, n):
        w = w_statistic(x, n, k - 1)
        if w == 0.0:
            raise ZeroVariation(f"W_(n,{k - 1}) vanishes")
        terms.append(coarse[k - 1] ** 2 / w)
    s = 2.0 / (n - 1) * math.fsum(terms)
    if s <= 0:
        raise ZeroVariation("coarse second differences vanish")
    return 0.5 + math.log(s) / (2.0 * math.log(kn))


def h3_from_variations(variations: Sequence[float], sizes: Sequence[int], w: RegressionWeights | None = None) -> float:
    v = np.asarray(variations, dtype=float)
    nj = np.asarray(sizes, dtype=float)
    if v.shape != nj.shape:
        raise GridMismatch("one variation per grid size required")
    if np.any(v <= 0):
        raise ZeroVariation("second-order variation vanishes")
    if w is None:
        w = _weights_from_logs(np.log(nj))
    return -0.5 * math.fsum((w.z * np.log(v / (nj - 1.0))).tolist())


def h3(paths: Sequence, schedule: RatioSchedule) -> float:
    """Regression estimator; ``paths[j]`` must have ``schedule.sizes[j]`` increments."""
    sizes = schedule.sizes
    if len(paths) != len(sizes):
        raise GridMismatch(f"expected {len(sizes)} paths, got {len(paths)}")
    v = []
    for p, nj in zip(paths, sizes):
        x = _values(p)
        if x.size - 1 != nj:
            raise GridMismatch(f"path has {x.size - 1} increments, schedule expects {nj}")
        v.append(normalized_variation(x, 2))
    return h3_from_variations(v, sizes, schedule.weights())


def h4_from_ratio(R: float) -> float:
    return (R - LAMBDA2_INTERCEPT) / LAMBDA2_SLOPE


def h4(path) -> float:
    x = _values(path)
    if x.size - 1 < 8:
        raise PathTooShort(f"h4 needs at least 8 increments, got {x.size - 1}")
    return h4_from_ratio(ratio_statistic(x))


def required_grids(method: str, n: int, schedule: RatioSchedule | None = None) -> tuple[int, ...]:
    """Grid sizes (increments) an estimator consumes at sample size / budget ``n``.

    ``h1``: n and 2n.  ``h2``: budget n -> c^3 with c = floor(n^{1/3}).
    ``h3``: the schedule's sizes at base n.  ``h4``: budget n -> c^4.
    """
    if method == "h1":
        return (n, 2 * n)
    if method == "h2":
        return (integer_root(n, 3) ** 3,)
    if method == "h3":
        return (schedule or RatioSchedule()).with_n(n).sizes
    if method == "h4":
        return (integer_root(n, 4) ** 4,)
    raise InvalidParameter(f"unknown Hurst estimator {method!r}")


def hurst_from_path(path, method: str, n: int, schedule: RatioSchedule | None = None) -> float:
    """Evaluate ``method`` on restrictions of ``path`` at sample size / budget ``n``."""
    if method == "h1":
        return h1(subsample(path, n), subsample(path, 2 * n))
    if method == "h2":
        c = integer_root(n, 3)
        return h2(subsample(path, c**3), c)
    if method == "h3":
        sch = (schedule or RatioSchedule()).with_n(n)
        return h3([subsample(path, nj) for nj in sch.sizes], sch)
    if method == "h4":
        return h4(subsample(path, integer_root(n, 4) ** 4))
    raise InvalidParameter(f"unknown Hurst estimator {method!r}")
