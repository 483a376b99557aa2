"""Increments and variation statistics of sampled paths.

Functions accept either a path object (anything with ``.values``) or a plain
array of node values.  Sums are accumulated with :func:`math.fsum`.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import IndexOutOfRange, InvalidHurst, InvalidParameter, PathTooShort
from .fbm import check_hurst

__all__ = [
    "delta",
    "normalized_variation",
    "w_statistic",
    "second_diff_pairs",
    "ratio_statistic",
    "fbm_normalized_variation",
    "sup_deviation",
]


def _values(path) -> np.ndarray:
    return np.asarray(getattr(path, "values", path), dtype=float)


def _fsum(x: np.ndarray) -> float:
    return math.fsum(x.tolist())


def delta(path, order: int) -> np.ndarray:
    """First (X_k - X_{k-1}, k=1..m) or second (X_{k+1} - 2X_k + X_{k-1}, k=1..m-1) differences."""
    x = _values(path)
    if order not in (1, 2):
        raise InvalidParameter(f"order must be 1 or 2, got {order!r}")
    if x.size < order + 1:
        raise PathTooShort(f"order-{order} increments need {order + 1} nodes, got {x.size}")
    if order == 1:
        return x[1:] - x[:-1]
    return x[2:] - 2.0 * x[1:-1] + x[:-2]


def normalized_variation(path, order: int) -> float:
    """V^(i) = sum_k (Delta^(i) X_k / X_{k-1})^2."""
    x = _values(path)
    d = delta(x, order)
    return _fsum((d / x[: d.size]) ** 2)


def w_statistic(fine_path, n: int, k: int) -> float:
    """W_{n,k}: squared second differences of the fine path around coarse node t_k.

    The fine path has m_n = n * k_n increments; the sum runs over
    j = -k_n+1 .. k_n-1 at fine indices j + k k_n.
    """
    x = _values(fine_path)
    m = x.size - 1
    n = int(n)
    if n < 2 or m % n:
        raise InvalidParameter(f"fine grid of {m} increments is not a multiple of n={n}")
    if not 1 <= k <= n - 1:
        raise IndexOutOfRange(f"k={k} outside 1..{n - 1}")
    kn = m // n
    centre = np.arange(k * kn - kn + 1, k * kn + kn)
    d2 = x[centre + 1] - 2.0 * x[centre] + x[centre - 1]
    return _fsum(d2 * d2)


def second_diff_pairs(path) -> tuple[np.ndarray, np.ndarray]:
    d2 = delta(path, 2)
    return d2[:-1], d2[1:]


def ratio_statistic(path) -> float:
    """Mean of |a + b| / (|a| + |b|) over consecutive second differences (a, b).

    A path on N increments has N-1 second differences and N-2 pairs.  Pairs
    with |a| + |b| = 0 contribute 1.
    """
    x = _values(path)
    if x.size < 4:
        raise PathTooShort(f"ratio statistic needs at least 4 nodes, got {x.size}")
    a, b = second_diff_pairs(x)
    den = np.abs(a) + np.abs(b)
    zero = den == 0
    psi = np.ones_like(den)
    psi[~zero] = np.abs(a[~zero] + b[~zero]) / den[~zero]
    return _fsum(psi) / psi.size


def _fbm_scale(path, H):
    if H is None:
        H = getattr(path, "hurst", None)
    if H is None:
        raise InvalidParameter("Hurst index required for a bare array")
    H = check_hurst(H)
    if H == 0.5:
        raise InvalidHurst("normalized fBm variation is defined for H != 1/2")
    grid = getattr(path, "grid", None)
    return H, grid


def fbm_normalized_variation(fbm, order: int, H: float | None = None, horizon: float | None = None) -> float:
    """(n^{2H-1} / c_i) * sum_k (T^{-H} Delta^(i) B(t_k))^2, c_1 = 1, c_2 = 4 - 2^{2H}.

    The sum covers every available increment (n for order 1, n-1 for order 2).
    """
    H, grid = _fbm_scale(fbm, H)
    T = horizon if horizon is not None else (grid.horizon if grid is not None else 1.0)
    x = _values(fbm)
    n = x.size - 1
    c = 1.0 if order == 1 else 4.0 - 2.0 ** (2 * H)
    d = delta(x, order) * T ** (-H)
    return n ** (2 * H - 1) / c * _fsum(d * d)


def sup_deviation(fbm, H: float | None = None, horizon: float | None = None) -> float:
    """max_k |Vhat_k - k T / n| with the partial second-order variation

        Vhat_k = n^{2H-1} / (T^{2H-1} (4 - 2^{2H})) * sum_{i=1}^{k} (Delta^(2) B(t_i))^2,

    over k = 1..n-1 (the sup over t in [0, T] restricted to computable nodes).
    """
    H, grid = _fbm_scale(fbm, H)
    T = horizon if horizon is not None else (grid.horizon if grid is not None else 1.0)
    x = _values(fbm)
    n = x.size - 1
    if n < 4:
        raise PathTooShort(f"sup deviation needs n >= 4, got {n}")
    d2 = delta(x, 2)
    # Plain cumulative sum: the statistic only matters at the O(n^{-1/2}) scale.
    partial = np.cumsum(d2 * d2)
    scale = n ** (2 * H - 1) / (T ** (2 * H - 1) * (4.0 - 2.0 ** (2 * H)))
    k = np.arange(1, n)
    return float(np.max(np.abs(scale * partial - k * T / n)))
