import numpy as np
import pytest

from fgompertz.fbm import GridSpec, sample_fbm_circulant
from fgompertz.gompertz import GompertzParams, solve_explicit


def increment_matrix(sampler, H, m, seeds, horizon=1.0):
    grid = GridSpec(horizon, m)
    return np.array([np.diff(sampler(H, grid, s).values) for s in seeds])


def within_se(sample, target, k):
    """|mean(sample) - target| <= k standard errors (elementwise over axis 0)."""
    sample = np.asarray(sample, dtype=float)
    se = sample.std(axis=0, ddof=1) / np.sqrt(sample.shape[0])
    return np.abs(sample.mean(axis=0) - target) <= k * se + 1e-15


@pytest.fixture
def default_path():
    params = GompertzParams()
    fbm = sample_fbm_circulant(params.hurst, GridSpec(1.0, 1024), 7)
    return solve_explicit(params, fbm)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})")
