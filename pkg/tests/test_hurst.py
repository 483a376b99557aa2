import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fgompertz.errors import DegenerateSchedule, GridMismatch, InvalidParameter, PathTooShort, ZeroVariation
from fgompertz.fbm import GridSpec, sample_fbm_circulant
from fgompertz.gompertz import GompertzParams, solve_explicit, subsample
from fgompertz.hurst import (
    RatioSchedule,
    h1,
    h1_from_variations,
    h2,
    h3,
    h3_from_variations,
    h4,
    h4_from_ratio,
    hurst_from_path,
    integer_root,
    out_of_range,
    required_grids,
    weights,
)

LN2 = math.log(2.0)


def process(m, seed=5, H=0.75, sigma=1.5):
    p = GompertzParams(sigma=sigma, hurst=H)
    return solve_explicit(p, sample_fbm_circulant(H, GridSpec(1.0, m), seed))


def h2_brute(x, n):
    """Independent loop implementation of the truncated second estimator."""
    kn = n * n
    s = 0.0
    for k in range(2, n):
        a = x[(k + 1) * kn] - 2 * x[k * kn] + x[(k - 1) * kn]
        w = 0.0
        for j in range(-kn + 1, kn):
            i = j + (k - 1) * kn
            w += (x[i + 1] - 2 * x[i] + x[i - 1]) ** 2
        s += a * a / w
    s *= 2.0 / (n - 1)
    return 0.5 + math.log(s) / (2 * math.log(kn))


class TestWeights:
    def test_two_point(self):
        w = weights((1, 2))
        np.testing.assert_allclose(w.y, [-LN2 / 2, LN2 / 2], rtol=1e-15)
        np.testing.assert_allclose(w.z, [-1 / LN2, 1 / LN2], rtol=1e-15)

    @given(st.lists(st.integers(1, 64), min_size=2, max_size=8).filter(lambda r: len(set(r)) > 1))
    def test_identities(self, r):
        w = weights(r)
        assert abs(math.fsum(w.y)) < 1e-12
        assert abs(math.fsum(w.z)) < 1e-12
        assert abs(math.fsum(w.z * w.y) - 1.0) < 1e-12

    def test_degenerate(self):
        with pytest.raises(DegenerateSchedule):
            weights((3, 3))


class TestRatioSchedule:
    def test_sizes(self):
        assert RatioSchedule((1, 2, 4, 8), 1024, "div").sizes == (1024, 512, 256, 128)
        assert RatioSchedule((1, 2, 4, 8), 128, "mult").sizes == (128, 256, 512, 1024)

    def test_divisive_equals_multiplicative_equivalent(self):
        div = RatioSchedule((1, 2, 4, 8), 1024, "div")
        mult = div.as_multiplicative()
        assert sorted(mult.sizes) == sorted(div.sizes)
        v = np.array([3.0, 1.7, 0.9, 0.55])
        by_size = dict(zip(div.sizes, v))
        a = h3_from_variations(v, div.sizes, div.weights())
        b = h3_from_variations([by_size[s] for s in mult.sizes], mult.sizes, mult.weights())
        assert a == pytest.approx(b, abs=1e-13)

    @pytest.mark.parametrize(
        "kwargs", [dict(r=(1,)), dict(r=(0, 2)), dict(convention="x"), dict(r=(1, 3), n=1024)]
    )
    def test_validation(self, kwargs):
        with pytest.raises(InvalidParameter):
            RatioSchedule(**kwargs)


class TestH1:
    @given(st.floats(0.01, 0.99), st.floats(1e-6, 1e6))
    def test_ideal_scaling(self, H, v):
        assert h1_from_variations(v, 2 ** (1 - 2 * H) * v) == pytest.approx(H, abs=1e-12)

    def test_equal_variations(self):
        assert h1_from_variations(2.0, 2.0) == 0.5

    def test_zero_variation(self):
        x = process(64, sigma=0.0)
        with pytest.raises(ZeroVariation):
            h1_from_variations(0.0, 1.0)
        h1(subsample(x, 32), x)  # a smooth curve still has nonzero second differences

    def test_grid_mismatch(self):
        x = process(64)
        with pytest.raises(GridMismatch):
            h1(subsample(x, 16), x)


class TestH2:
    def test_inversion(self):
        n, H = 10, 0.8
        kn = n * n
        assert 0.5 + math.log(kn ** (2 * H - 1)) / (2 * math.log(kn)) == pytest.approx(H, abs=1e-15)

    @pytest.mark.parametrize("n", [4, 5, 7])
    def test_matches_brute_force(self, n):
        x = process(n**3, seed=n)
        assert h2(x, n) == pytest.approx(h2_brute(x.values, n), abs=1e-12)

    def test_preconditions(self):
        with pytest.raises(PathTooShort):
            h2(process(27), 3)
        with pytest.raises(GridMismatch):
            h2(process(128), 4)


class TestH3:
    @given(st.floats(0.01, 0.99), st.floats(1e-3, 1e3), st.sampled_from(["div", "mult"]))
    def test_exact_power_law(self, H, c, conv):
        sch = RatioSchedule((1, 2, 4, 8), 1024 if conv == "div" else 128, conv)
        nj = np.array(sch.sizes, dtype=float)
        v = c * nj ** (-2 * H) * (nj - 1)
        assert h3_from_variations(v, sch.sizes, sch.weights()) == pytest.approx(H, abs=1e-12)

    @given(st.floats(0.1, 10), st.floats(0.1, 10), st.integers(4, 4096))
    def test_two_scale_reduction(self, vn, v2n, n):
        sch = RatioSchedule((1, 2), n, "mult")
        reduced = -math.log((v2n / (2 * n - 1)) * ((n - 1) / vn)) / (2 * LN2)
        assert h3_from_variations([vn, v2n], sch.sizes, sch.weights()) == pytest.approx(reduced, abs=1e-12)

    def test_halved_normalized_variation_gives_half(self):
        n = 100
        vn = 2.0
        v2n = vn / (n - 1) / 2 * (2 * n - 1)
        assert h3_from_variations([vn, v2n], (n, 2 * n)) == pytest.approx(0.5, abs=1e-12)

    def test_grid_checks(self):
        x = process(64)
        sch = RatioSchedule((1, 2), 64, "div")
        with pytest.raises(GridMismatch):
            h3([x], sch)
        with pytest.raises(GridMismatch):
            h3([x, x], sch)
        with pytest.raises(ZeroVariation):
            h3_from_variations([0.0, 1.0], (4, 8))


class TestH4:
    def test_examples(self):
        assert h4_from_ratio(0.5174) == 0.0
        assert h4_from_ratio(0.6642) == pytest.approx(1.0, abs=1e-12)

    def test_short(self):
        with pytest.raises(PathTooShort):
            h4(process(4))

    def test_out_of_range_flag(self):
        assert out_of_range(h4_from_ratio(1.0)) and out_of_range(h4_from_ratio(0.4))
        assert not out_of_range(0.75)


class TestScaleInvariance:
    @pytest.mark.parametrize("method, n", [("h1", 64), ("h2", 343), ("h3", 128), ("h4", 256)])
    @pytest.mark.parametrize("c", [1e-3, 0.37, 12.5, 4e4])
    def test_all_estimators(self, method, n, c):
        m = max(required_grids(method, n, RatioSchedule()))
        x = process(m, seed=23)
        scaled = type(x)(x.grid, x.params, c * x.values)
        a = hurst_from_path(x, method, n)
        b = hurst_from_path(scaled, method, n)
        assert a == pytest.approx(b, abs=1e-12)


class TestBudgets:
    @given(st.integers(1, 10**7), st.integers(2, 5))
    def test_integer_root(self, N, p):
        r = integer_root(N, p)
        assert r**p <= N < (r + 1) ** p

    def test_required_grids(self):
        assert required_grids("h1", 1024) == (1024, 2048)
        assert required_grids("h2", 4096) == (4096,)
        assert required_grids("h2", 1024) == (1000,)
        assert required_grids("h4", 2401) == (2401,)
        assert required_grids("h3", 1024) == (1024, 512, 256, 128)
        with pytest.raises(InvalidParameter):
            required_grids("h9", 10)


@pytest.mark.slow
class TestMonteCarlo:
    """Mean absolute error at the default parameters, 300 replicates."""

    @pytest.mark.parametrize("method, n, tol", [("h1", 1024, 0.05), ("h2", 4096, 0.08), ("h3", 1024, 0.05), ("h4", 2401, 0.12)])
    def test_mean_error(self, method, n, tol):
        errs = []
        for seed in range(300):
            x = process(max(required_grids(method, n, RatioSchedule())), seed=10_000 + seed)
            errs.append(hurst_from_path(x, method, n) - 0.75)
        assert abs(np.mean(errs)) <= tol
        assert np.mean(np.abs(errs)) <= tol
