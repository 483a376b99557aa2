"""Fractional Brownian motion on uniform grids.

Two exact generators are provided:

* :func:`sample_fbm_circulant` -- circulant embedding of the fractional
  Gaussian noise covariance (Wood-Chan / Davies-Harte), O(m log m).
* :func:`sample_fbm_cholesky` -- dense lower-triangular factorization of the
  fBm covariance, O(m^3); kept as an oracle for the circulant generator.

Random numbers come from numpy's counter-based ``Philox`` bit generator keyed
directly by the integer seed (``Philox(key=seed)``), with Gaussian variates
drawn by ``Generator.standard_normal`` (ziggurat).  Outputs are therefore a
deterministic function of ``(H, grid, seed)`` for a given numpy version.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    FactorizationFailed,
    InvalidHurst,
    InvalidParameter,
    NegativeEigenvalue,
    OracleTooLarge,
)

__all__ = [
    "GridSpec",
    "FbmPath",
    "check_hurst",
    "make_rng",
    "fgn_autocovariance",
    "circulant_eigenvalues",
    "sample_fbm_circulant",
    "sample_fbm_cholesky",
    "fbm_covariance",
    "CHOLESKY_CAP",
    "EIGEN_TOL",
]

CHOLESKY_CAP = 1024
# Relative clamp threshold for negative circulant eigenvalues (times gamma(0) = 1).
EIGEN_TOL = 1e-9
MAX_SEED = 2**128


def check_hurst(H: float) -> float:
    H = float(H)
    if not (0.0 < H < 1.0):
        raise InvalidHurst(f"Hurst index must lie in (0, 1), got {H!r}")
    return H


def make_rng(seed: int) -> np.random.Generator:
    """Philox generator keyed by ``seed`` (0 <= seed < 2**128)."""
    seed = int(seed)
    if not (0 <= seed < MAX_SEED):
        raise InvalidParameter(f"seed must lie in [0, 2**128), got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid t_k = k T / m, k = 0..m."""

    horizon: float
    points: int

    def __post_init__(self):
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise InvalidParameter(f"horizon must be positive, got {self.horizon!r}")
        if int(self.points) != self.points or self.points < 1:
            raise InvalidParameter(f"points must be a positive integer, got {self.points!r}")
        object.__setattr__(self, "points", int(self.points))
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def step(self) -> float:
        return self.horizon / self.points

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.points + 1) * (self.horizon / self.points)


@dataclass(frozen=True, eq=False)
class FbmPath:
    grid: GridSpec
    hurst: float
    values: np.ndarray

    def __post_init__(self):
        check_hurst(self.hurst)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.points + 1,):
            raise InvalidParameter(
                f"expected {self.grid.points + 1} values, got shape {values.shape}"
            )
        if values[0] != 0.0:
            raise InvalidParameter("fBm path must start at 0")
        if not np.all(np.isfinite(values)):
            raise InvalidParameter("fBm path contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times


def fgn_autocovariance(H: float, lag) -> np.ndarray | float:
    """Autocovariance of unit-step fractional Gaussian noise.

    gamma(k) = (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2
    """
    H = check_hurst(H)
    k = np.abs(np.asarray(lag, dtype=float))
    a = 2.0 * H
    out = 0.5 * (np.abs(k + 1.0) ** a - 2.0 * k**a + np.abs(k - 1.0) ** a)
    return float(out) if out.ndim == 0 else out


def circulant_eigenvalues(H: float, m: int) -> np.ndarray:
    """Eigenvalues of the minimal (size 2m) circulant embedding of the fGn covariance.

    Eigenvalues in [-EIGEN_TOL, 0) are clamped to zero; anything more negative
    raises :class:`NegativeEigenvalue`.
    """
    H = check_hurst(H)
    m = int(m)
    if m < 1:
        raise InvalidParameter(f"m must be >= 1, got {m}")
    gamma = fgn_autocovariance(H, np.arange(m + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    spectrum = np.fft.fft(row)
    if np.max(np.abs(spectrum.imag)) >= EIGEN_TOL * gamma[0]:
        raise NegativeEigenvalue("circulant spectrum is not real; embedding is not symmetric")
    lam = spectrum.real
    if lam.min() < -EIGEN_TOL * gamma[0]:
        raise NegativeEigenvalue(
            f"circulant embedding has eigenvalue {lam.min():.3e} for H={H}, m={m}"
        )
    return np.where(lam < 0.0, 0.0, lam)


def _scale_unit_path(unit_noise: np.ndarray, H: float, grid: GridSpec) -> np.ndarray:
    m = grid.points
    unit = np.empty(m + 1)
    unit[0] = 0.0
    np.cumsum(unit_noise, out=unit[1:])
    # Path on [0, 1] first, then the horizon factor, so values_T == T^H * values_1 bitwise.
    unit *= float(m) ** (-H)
    return unit * grid.horizon**H


def sample_fbm_circulant(H: float, grid: GridSpec, seed: int, paired: bool = False):
    """Exact fBm sample on ``grid`` by circulant embedding.

    One FFT produces two independent fGn sequences (real and imaginary parts).
    The real part is the returned path; with ``paired=True`` the path built from
    the imaginary part is returned as well, as ``(path, twin)``.
    """
    H = check_hurst(H)
    m = grid.points
    lam = circulant_eigenvalues(H, m)
    rng = make_rng(seed)
    size = 2 * m
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    w = np.fft.fft(np.sqrt(lam / size) * z)
    path = FbmPath(grid, H, _scale_unit_path(w.real[:m], H, grid))
    if not paired:
        return path
    return path, FbmPath(grid, H, _scale_unit_path(w.imag[:m], H, grid))


def fbm_covariance(H: float, times: np.ndarray) -> np.ndarray:
    """E[B_s B_t] = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2 on the given times."""
    a = 2.0 * check_hurst(H)
    t = np.asarray(times, dtype=float)
    s, u = t[:, None], t[None, :]
    return 0.5 * (np.abs(s) ** a + np.abs(u) ** a - np.abs(s - u) ** a)


def sample_fbm_cholesky(H: float, grid: GridSpec, seed: int, cap: int = CHOLESKY_CAP) -> FbmPath:
    H = check_hurst(H)
    m = grid.points
    if m > cap:
        raise OracleTooLarge(f"Cholesky oracle limited to m <= {cap}, got {m}")
    cov = fbm_covariance(H, grid.times[1:])
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailed(f"fBm covariance not positive definite (H={H}, m={m})") from exc
    z = make_rng(seed).standard_normal(m)
    values = np.empty(m + 1)
    values[0] = 0.0
    values[1:] = L @ z
    return FbmPath(grid, H, values)
