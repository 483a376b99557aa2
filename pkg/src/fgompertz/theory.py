"""Limit variances and correlation functions for fBm variation statistics.

Every correlation here is a finite combination  scale * sum_i c_i |s r + h_i|^{2H}
of shifted powers.  Sums of squares over lags are evaluated directly until the
terms drop below ``SeriesPolicy.tol``; the remainder is added in closed form
from the large-lag expansion

    |s r + h|^a = s^a r^a sum_k binom(a, k) (h/s)^k r^{-k},

whose squared terms sum to Hurwitz zeta values.  The tail makes the
slowly-convergent series (e.g. sigma_*^2 near H = 3/4) stable under changes
of the truncation point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import binom, zeta

from .errors import InvalidHurst, InvalidParameter
from .fbm import check_hurst, fgn_autocovariance, make_rng
from .hurst import LAMBDA2_INTERCEPT, LAMBDA2_SLOPE, RatioSchedule, weights

__all__ = [
    "SeriesPolicy",
    "rho_first",
    "rho_second",
    "rho_tilde",
    "rho_bc",
    "sigma_sq",
    "sigma_star_first",
    "sigma12",
    "limit_var_h1",
    "hermite_coef",
    "rho2",
    "sigma2_l",
    "limit_var_h3",
    "lambda2_affine",
    "lambda2_mc",
    "variance_table",
]


@dataclass(frozen=True)
class SeriesPolicy:
    tol: float = 1e-12
    max_terms: int = 10**7

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidParameter(f"tolerance must be positive, got {self.tol!r}")
        if self.max_terms < 1:
            raise InvalidParameter(f"max_terms must be positive, got {self.max_terms!r}")


DEFAULT_POLICY = SeriesPolicy()
# Direct summation never runs past this many lags; the closed-form tail covers the rest.
_DIRECT_CAP = 1 << 16
_EXPANSION_ORDER = 24


@dataclass(frozen=True)
class _ShiftedPowers:
    """r -> scale * sum_i coeffs[i] * |step * r + shifts[i]|^exponent on integer r."""

    coeffs: tuple[int, ...]
    shifts: tuple[int, ...]
    exponent: float
    scale: float = 1.0
    step: int = 1

    @property
    def reach(self) -> float:
        return max(abs(h) for h in self.shifts) / self.step

    def reflected(self) -> "_ShiftedPowers":
        return _ShiftedPowers(self.coeffs, tuple(-h for h in self.shifts), self.exponent, self.scale, self.step)

    def direct(self, r: np.ndarray) -> np.ndarray:
        x = self.step * np.asarray(r, dtype=float)
        out = np.zeros_like(x)
        for c, h in zip(self.coeffs, self.shifts):
            out += c * np.abs(x + h) ** self.exponent
        return self.scale * out

    def expansion(self, order: int = _EXPANSION_ORDER) -> np.ndarray:
        """e_k with value(r) = sum_k e_k r^{a-k} for r > reach."""
        a = self.exponent
        e = np.empty(order + 1)
        for k in range(order + 1):
            moment = sum(c * h**k for c, h in zip(self.coeffs, self.shifts))  # exact int
            e[k] = self.scale * self.step ** (a - k) * binom(a, k) * float(moment) if moment else 0.0
        return e

    def expanded(self, r: np.ndarray, e: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        powers = self.exponent - np.arange(e.size)
        nz = np.nonzero(e)[0]
        out = np.zeros_like(r)
        for k in nz:
            out += e[k] * r ** powers[k]
        return out

    def __call__(self, r):
        """Direct form near the shifts, large-lag expansion beyond 4 * reach (avoids cancellation)."""
        r = np.asarray(r, dtype=float)
        out = self.direct(r)
        cut = 4.0 * max(self.reach, 1.0)
        hi, lo = r > cut, r < -cut
        if np.any(hi):
            out[hi] = self.expanded(r[hi], self.expansion())
        if np.any(lo):
            g = self.reflected()
            out[lo] = g.expanded(-r[lo], g.expansion())
        return out

    def square_tail(self, start: int, e: np.ndarray) -> float:
        """sum_{r >= start} value(r)^2 from the expansion (start > reach)."""
        a = self.exponent
        nz = np.nonzero(e)[0]
        if nz.size == 0:
            return 0.0
        if 2 * nz[0] - 2 * a <= 1:
            raise ArithmeticError("sum of squares diverges")
        total = []
        for k in nz:
            for l in nz:
                total.append(e[k] * e[l] * float(zeta(k + l - 2 * a, start)))
        return math.fsum(total)


def _sum_squares(f: _ShiftedPowers, start: int, policy: SeriesPolicy) -> float:
    """sum_{r >= start} f(r)^2."""
    e = f.expansion()
    switch = max(start, int(math.ceil(32 * f.reach)) + 1)
    limit = start + min(policy.max_terms, _DIRECT_CAP)
    parts = []
    r = start
    chunk = 64
    while True:
        hi = min(r + chunk, limit)
        idx = np.arange(r, hi)
        vals = np.where(idx < switch, f.direct(idx), f.expanded(np.maximum(idx, 1), e))
        sq = vals * vals
        parts.append(math.fsum(sq.tolist()))
        r = hi
        last = float(sq[-1]) if sq.size else 0.0
        if r >= switch and (last < policy.tol or r >= limit):
            break
        if r >= limit:
            # max_terms reached before the expansion is valid; finish directly.
            idx = np.arange(r, switch)
            if idx.size:
                parts.append(math.fsum((f.direct(idx) ** 2).tolist()))
            r = max(r, switch)
            break
        chunk = min(2 * chunk, 1 << 14)
    parts.append(f.square_tail(r, e))
    return math.fsum(parts)


def _sum_squares_two_sided(f: _ShiftedPowers, policy: SeriesPolicy) -> float:
    return _sum_squares(f, 0, policy) + _sum_squares(f.reflected(), 1, policy)


def _c2(H: float) -> float:
    return 4.0 - 2.0 ** (2 * H)


def _first_diff_corr(H: float) -> _ShiftedPowers:
    return _ShiftedPowers((1, -2, 1), (1, 0, -1), 2 * H, 0.5)


def _second_diff_corr(H: float) -> _ShiftedPowers:
    return _ShiftedPowers((-6, -1, -1, 4, 4), (0, -2, 2, -1, 1), 2 * H, 1.0 / (2.0 * _c2(H)))


def _cross_scale_corr(H: float) -> _ShiftedPowers:
    return _ShiftedPowers(
        (-1, 2, 1, -4, 1, 2, -1), (-2, -1, 0, 1, 2, 3, 4), 2 * H, 1.0 / (2.0 * _c2(H) * 2.0**H)
    )


def _bc_terms(b: int, c: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    coeffs = (-1, 2, -1, 2, -4, 2, -1, 2, -1)
    shifts = (0, -b, -2 * b, c, c - b, c - 2 * b, 2 * c, 2 * c - b, 2 * c - 2 * b)
    return coeffs, shifts


def rho_first(j, H: float):
    """Correlation of unit-step first differences of fBm at lag j."""
    return fgn_autocovariance(H, j)


def rho_second(j, H: float):
    """Correlation of unit-step second differences of fBm at lag j."""
    H = check_hurst(H)
    out = _second_diff_corr(H)(np.atleast_1d(j)).reshape(np.shape(j))
    return float(out) if out.ndim == 0 else out


def rho_tilde(j, H: float):
    """Correlation between second differences with steps 2 and 1 (lag index j)."""
    H = check_hurst(H)
    out = _cross_scale_corr(H)(np.atleast_1d(j)).reshape(np.shape(j))
    return float(out) if out.ndim == 0 else out


def rho_bc(x, b: int, c: int, H: float):
    """Correlation between second differences of steps b (at 0) and c (at x)."""
    H = check_hurst(H)
    coeffs, shifts = _bc_terms(int(b), int(c))
    f = _ShiftedPowers(coeffs, shifts, 2 * H, (b * c) ** (-H) / (2.0 * _c2(H)))
    out = f(np.atleast_1d(x)).reshape(np.shape(x))
    return float(out) if out.ndim == 0 else out


def sigma_sq(H: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """2 (1 + 2 sum_{j>=1} rho_H(j)^2)."""
    H = check_hurst(H)
    return 2.0 * (1.0 + 2.0 * _sum_squares(_second_diff_corr(H), 1, policy))


def sigma_star_first(H: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """2 (1 + 2 sum_{j>=1} rhohat_H(j)^2); finite only for H < 3/4."""
    H = check_hurst(H)
    if H >= 0.75:
        raise InvalidHurst(f"first-difference variance series diverges for H >= 3/4 (H={H})")
    return 2.0 * (1.0 + 2.0 * _sum_squares(_first_diff_corr(H), 1, policy))


def sigma12(H: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """sum_{j in Z} rhotilde_H(j)^2."""
    H = check_hurst(H)
    return _sum_squares_two_sided(_cross_scale_corr(H), policy)


def limit_var_h1(H: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Asymptotic variance of 2 ln2 sqrt(n) (h1 - H): 1.5 sigma^2(H) - 2 sigma_12(H)."""
    return 1.5 * sigma_sq(H, policy) - 2.0 * sigma12(H, policy)


def hermite_coef(p: int, q: int = 2) -> Fraction:
    """c_{2p,q} = prod_{i<p} (q - 2i) / (2p)!, exactly."""
    num = 1
    for i in range(p):
        num *= q - 2 * i
    return Fraction(num, math.factorial(2 * p))


@lru_cache(maxsize=4096)
def _rho2(ki: int, kj: int, H: float, policy: SeriesPolicy) -> float:
    coeffs, shifts = _bc_terms(ki, kj)
    scale = (ki * kj) ** (-H) / (2.0 * _c2(H))
    total = []
    for p in range(1, 11):
        c = hermite_coef(p)
        if c == 0:
            continue
        if p != 1:
            raise AssertionError("only the p = 1 Hermite term is implemented")
        # (2p)! c^2 multiplies sum_s sum_r rho_{ki,kj}^{2p}(ki r + kj s); p = 1 only.
        weight = float(c * c * math.factorial(2 * p))
        for s in range(ki):
            f = _ShiftedPowers(coeffs, tuple(h + kj * s for h in shifts), 2 * H, scale, ki)
            total.append(weight * _sum_squares_two_sided(f, policy))
    return math.fsum(total) / math.sqrt(ki * kj)


def rho2(ki: int, kj: int, H: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Limit covariance of sqrt(n_i)(Vhat_{n_i} - 1) and sqrt(n_j)(Vhat_{n_j} - 1), n_i = k_i n."""
    H = check_hurst(H)
    ki, kj = int(ki), int(kj)
    if ki < 1 or kj < 1:
        raise InvalidParameter(f"scale factors must be positive, got {(ki, kj)}")
    return _rho2(ki, kj, H, policy)


def sigma2_l(k: Sequence[int], d: Sequence[float], H: float, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """sum_i sum_j d_i d_j rho_2(k_i, k_j)."""
    k = [int(v) for v in k]
    d = [float(v) for v in d]
    if len(k) != len(d):
        raise InvalidParameter("k and d must have equal length")
    return math.fsum(d[i] * d[j] * rho2(k[i], k[j], H, policy) for i in range(len(k)) for j in range(len(k)))


def limit_var_h3(schedule: RatioSchedule, H: float, policy: SeriesPolicy = DEFAULT_POLICY) -> tuple[float, int]:
    """Asymptotic variance of sqrt(n')(h3 - H) and the base size n' it refers to.

    A divisive schedule is first rewritten as n_j = k_j n' with integer k_j.
    """
    mult = schedule.as_multiplicative()
    k = np.asarray(mult.r, dtype=float)
    z = weights(mult.r).z
    return sigma2_l(mult.r, 0.5 * z / np.sqrt(k), H, policy), mult.n


def lambda2_affine(H: float) -> float:
    return LAMBDA2_INTERCEPT + LAMBDA2_SLOPE * H


def lambda2_mc(H: float, replicates: int, seed: int, corr: float | None = None, batch: int = 1 << 20) -> float:
    """Monte Carlo mean of |Z1 + Z2| / (|Z1| + |Z2|) for standard normals with
    correlation rho_H(1) (or ``corr`` if given)."""
    replicates = int(replicates)
    if replicates < 1:
        raise InvalidParameter("replicates must be >= 1")
    rho = rho_second(1, H) if corr is None else float(corr)
    if not -1.0 <= rho <= 1.0:
        raise InvalidParameter(f"correlation must lie in [-1, 1], got {rho}")
    rng = make_rng(seed)
    comp = math.sqrt(max(0.0, 1.0 - rho * rho))
    parts = []
    left = replicates
    while left:
        m = min(left, batch)
        z1 = rng.standard_normal(m)
        z2 = rho * z1 + comp * rng.standard_normal(m)
        den = np.abs(z1) + np.abs(z2)
        psi = np.where(den > 0, np.abs(z1 + z2) / np.where(den > 0, den, 1.0), 1.0)
        parts.append(math.fsum(psi.tolist()))
        left -= m
    return math.fsum(parts) / replicates


def variance_table(h_grid: Sequence[float], policy: SeriesPolicy = DEFAULT_POLICY) -> list[dict]:
    """One row per H; ``sigma_star_first`` is None where its series diverges."""
    rows = []
    for H in h_grid:
        s2 = sigma_sq(H, policy)
        s12 = sigma12(H, policy)
        try:
            sstar = sigma_star_first(H, policy)
        except InvalidHurst:
            sstar = None
        rows.append(
            {
                "H": float(H),
                "sigma_sq": s2,
                "sigma_star_first": sstar,
                "sigma12": s12,
                "limit_var_h1": 1.5 * s2 - 2.0 * s12,
                "lambda2_affine": lambda2_affine(H),
            }
        )
    return rows
