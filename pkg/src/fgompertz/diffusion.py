"""Diffusion-coefficient estimators.

``sigma2_1``, ``sigma2_2`` and ``sigma2_3`` estimate sigma^2 from a path on n
increments given a Hurst estimate; ``sigma4`` estimates sigma (not squared)
from the ``h3`` regression intercept.  The Hurst estimate is always an
explicit argument so any (sigma_i, H_j) pairing can be formed.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import GridMismatch, InvalidHurst, InvalidParameter, ZeroVariation
from .hurst import RatioSchedule
from .variation import _fsum, _values, delta, normalized_variation

__all__ = ["sigma2_1", "sigma2_2", "sigma2_3", "sigma4", "sigma4_from_variations"]


def _check_h(h: float) -> float:
    h = float(h)
    if not 0.0 < h < 1.0:
        raise InvalidHurst(f"Hurst estimate must lie in (0, 1), got {h!r}")
    return h


def _check_T(T: float) -> float:
    if not T > 0:
        raise InvalidParameter(f"horizon must be positive, got {T!r}")
    return float(T)


def sigma2_1(path, h_est: float, T: float) -> float:
    """n^{2H-1} T^{-2H} V^(1)_{n,T}."""
    h, T = _check_h(h_est), _check_T(T)
    x = _values(path)
    n = x.size - 1
    return n ** (2 * h - 1) * T ** (-2 * h) * normalized_variation(x, 1)


def sigma2_2(path, h_est: float, T: float) -> float:
    """n^{2H-1} T^{-2H} V^(2)_{n,T} / (4 - 2^{2H})."""
    h, T = _check_h(h_est), _check_T(T)
    x = _values(path)
    n = x.size - 1
    return n ** (2 * h - 1) * T ** (-2 * h) * normalized_variation(x, 2) / (4.0 - 2.0 ** (2 * h))


def sigma2_3(path, h_est: float, T: float) -> float:
    """sum (Delta X_k)^2 / ((T/n)^{2H} sum X_{k-1}^2)."""
    h, T = _check_h(h_est), _check_T(T)
    x = _values(path)
    n = x.size - 1
    d = delta(x, 1)
    return _fsum(d * d) / ((T / n) ** (2 * h) * _fsum(x[:-1] ** 2))


def sigma4_from_variations(variations: Sequence[float], sizes: Sequence[int], h3_est: float) -> float:
    """exp(B) / (4 - 2^{2H}) with B = mean(ln(V_i/(n_i-1)))/2 + H mean(ln n_i)."""
    h = _check_h(h3_est)
    v = np.asarray(variations, dtype=float)
    ni = np.asarray(sizes, dtype=float)
    if v.shape != ni.shape or v.size < 1:
        raise GridMismatch("one variation per grid size required")
    if np.any(v <= 0):
        raise ZeroVariation("second-order variation vanishes")
    b = 0.5 * float(np.mean(np.log(v / (ni - 1.0)))) + h * float(np.mean(np.log(ni)))
    return math.exp(b) / (4.0 - 2.0 ** (2 * h))


def sigma4(paths: Sequence, schedule: RatioSchedule, h3_est: float) -> float:
    sizes = schedule.sizes
    if len(paths) != len(sizes):
        raise GridMismatch(f"expected {len(sizes)} paths, got {len(paths)}")
    v = []
    for p, nj in zip(paths, sizes):
        x = _values(p)
        if x.size - 1 != nj:
            raise GridMismatch(f"path has {x.size - 1} increments, schedule expects {nj}")
        v.append(normalized_variation(x, 2))
    return sigma4_from_variations(v, sizes, h3_est)
