import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fgompertz.errors import ExponentOverflow, GridMismatch, InvalidParameter, NonpositiveState, NotADivisor
from fgompertz.fbm import FbmPath, GridSpec, sample_fbm_circulant
from fgompertz.gompertz import (
    GompertzParams,
    ProcessPath,
    deterministic_curve,
    euler_path,
    read_path_csv,
    solve_explicit,
    subsample,
    volterra_integral,
    volterra_path,
    write_path_csv,
)


def riemann_stieltjes(beta, fbm, k):
    """Left-point sum of e^{-beta(t_k - s_j)} over the fBm increments up to node k."""
    t = fbm.grid.times
    inc = np.diff(fbm.values)[:k]
    return math.fsum((np.exp(-beta * (t[k] - t[:k])) * inc).tolist())


def fbm(H=0.75, m=1024, seed=11, T=1.0):
    return sample_fbm_circulant(H, GridSpec(T, m), seed)


class TestParams:
    def test_defaults(self):
        p = GompertzParams()
        assert (p.x0, p.alpha, p.beta, p.sigma, p.hurst, p.horizon) == (3.0, 0.5, 2.0, 1.5, 0.75, 1.0)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(x0=0), dict(x0=-1), dict(beta=0), dict(sigma=-0.1), dict(horizon=0), dict(hurst=1.0)],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(InvalidParameter):
            GompertzParams(**kwargs)

    def test_sigma_zero_allowed(self):
        assert GompertzParams(sigma=0).sigma == 0


class TestVolterra:
    def test_zero_at_origin(self):
        assert volterra_integral(2.0, fbm(), 0) == 0.0

    def test_beta_zero_returns_path(self):
        b = fbm()
        np.testing.assert_array_equal(volterra_path(0.0, b), b.values)

    def test_index_range(self):
        with pytest.raises(InvalidParameter):
            volterra_integral(2.0, fbm(m=8), 9)

    def test_recursion_matches_direct_trapezoid(self):
        b = fbm(m=64)
        t, v = b.grid.times, b.values
        for k in (1, 17, 64):
            integrand = np.exp(-2.0 * (t[k] - t[: k + 1])) * v[: k + 1]
            trap = np.trapezoid(integrand, t[: k + 1]) if hasattr(np, "trapezoid") else np.trapz(integrand, t[: k + 1])
            assert volterra_integral(2.0, b, k) == pytest.approx(v[k] - 2.0 * trap, abs=1e-13)

    def test_agrees_with_riemann_stieltjes(self):
        b = fbm(m=2**14)
        for k in (2**12, 2**13, 2**14):
            assert abs(volterra_integral(2.0, b, k) - riemann_stieltjes(2.0, b, k)) < 1e-2

    def test_discrepancy_shrinks_with_refinement(self):
        fine = fbm(m=2**14, seed=3)
        ms = [2**j for j in range(10, 15)]
        gaps = []
        for m in ms:
            b = subsample(fine, m)
            gaps.append(abs(volterra_integral(2.0, b, m) - riemann_stieltjes(2.0, b, m)))
        slope = np.polyfit(np.log(1.0 / np.array(ms)), np.log(gaps), 1)[0]
        assert slope >= 0.75 - 0.1

    def test_large_beta_stays_finite(self):
        assert np.all(np.isfinite(volterra_path(500.0, fbm(T=10.0))))


class TestSolveExplicit:
    def test_starts_at_x0_and_positive(self, default_path):
        assert default_path.values[0] == 3.0
        assert np.all(default_path.values > 0)

    def test_sigma_zero_is_deterministic_curve(self):
        p = GompertzParams(sigma=0.0)
        b = fbm()
        t = b.grid.times
        closed = np.exp(np.exp(-2 * t) * math.log(3) + 0.25 * (1 - np.exp(-2 * t)))
        np.testing.assert_allclose(solve_explicit(p, b).values, closed, rtol=1e-12)
        np.testing.assert_allclose(deterministic_curve(p, t), closed, rtol=1e-12)

    def test_long_horizon_limit(self):
        p = GompertzParams(sigma=0.0, horizon=20.0)
        x = solve_explicit(p, fbm(T=20.0))
        assert x.values[-1] == pytest.approx(math.exp(0.25), rel=1e-12)
        assert math.exp(0.25) == pytest.approx(1.284025, abs=1e-6)

    @pytest.mark.parametrize("beta", [0.5, 2.0, -1.0])
    def test_fixed_point(self, beta):
        p = GompertzParams(x0=math.exp(0.5 / beta), beta=beta, sigma=0.0)
        np.testing.assert_allclose(solve_explicit(p, fbm(m=32)).values, p.x0, rtol=1e-14)

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatch):
            solve_explicit(GompertzParams(hurst=0.7), fbm(H=0.75))
        with pytest.raises(GridMismatch):
            solve_explicit(GompertzParams(), fbm(T=2.0))

    def test_overflow_raised(self):
        p = GompertzParams(alpha=2000.0, beta=1.0, sigma=0.0)
        with pytest.raises(ExponentOverflow):
            solve_explicit(p, fbm(m=16))

    @given(st.floats(0.51, 0.99), st.floats(0.0, 5.0), st.integers(0, 2**32))
    @settings(max_examples=25, deadline=None)
    def test_positivity(self, H, sigma, seed):
        p = GompertzParams(sigma=sigma, hurst=H)
        x = solve_explicit(p, fbm(H=H, m=128, seed=seed))
        assert np.all(x.values > 0) and x.values[0] == p.x0

    def test_process_path_rejects_nonpositive(self):
        with pytest.raises(InvalidParameter):
            ProcessPath(GridSpec(1.0, 1), GompertzParams(), np.array([3.0, 0.0]))


class TestEuler:
    def test_one_step_without_drift(self):
        p = GompertzParams(x0=1.0, alpha=0.0, sigma=0.0)
        assert euler_path(p, fbm(m=1)).values[1] == 1.0

    def test_deterministic_ode(self):
        p = GompertzParams(sigma=0.0)
        b = fbm(m=2**16)
        assert euler_path(p, b).values[-1] == pytest.approx(solve_explicit(p, b).values[-1], rel=1e-3)

    @pytest.mark.slow
    def test_pathwise_agreement(self):
        p = GompertzParams()
        b = fbm(m=2**16, seed=2024)
        assert euler_path(p, b).values[-1] == pytest.approx(solve_explicit(p, b).values[-1], rel=5e-2)

    def test_nonpositive_state(self):
        p = GompertzParams(sigma=50.0, hurst=0.55)
        with pytest.raises(NonpositiveState):
            for seed in range(50):
                euler_path(p, fbm(H=0.55, m=4, seed=seed))


class TestSubsample:
    def test_identity(self, default_path):
        assert subsample(default_path, 1024) is default_path

    def test_index_arithmetic(self):
        b = fbm(m=8)
        np.testing.assert_array_equal(subsample(b, 2).values, b.values[[0, 4, 8]])
        assert subsample(b, 2).grid == GridSpec(1.0, 2)

    def test_composition(self):
        b = fbm(m=8)
        np.testing.assert_array_equal(subsample(subsample(b, 4), 2).values, subsample(b, 2).values)

    def test_process_carries_fbm(self, default_path):
        s = subsample(default_path, 256)
        assert isinstance(s, ProcessPath) and s.fbm.grid.points == 256
        np.testing.assert_array_equal(s.fbm.values, default_path.fbm.values[::4])

    def test_not_a_divisor(self):
        with pytest.raises(NotADivisor):
            subsample(fbm(m=8), 3)


class TestCsv:
    def test_round_trip_is_exact(self, tmp_path, default_path):
        dest = tmp_path / "x.csv"
        write_path_csv(default_path, dest)
        t, v = read_path_csv(dest)
        np.testing.assert_array_equal(v, default_path.values)
        np.testing.assert_array_equal(t, default_path.times)
        assert dest.read_text().splitlines()[0] == "t,value"

    def test_bad_header(self, tmp_path):
        dest = tmp_path / "bad.csv"
        dest.write_text("time,x\n0,1\n1,2\n")
        with pytest.raises(InvalidParameter):
            read_path_csv(dest)
