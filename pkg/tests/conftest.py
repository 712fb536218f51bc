import numpy as np
import pytest

from vlcjtod.optimizer import OptimizerConfig
from vlcjtod.signal import SystemParams, lighting_constraints


@pytest.fixture
def params():
    return SystemParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fast_cfg():
    return OptimizerConfig(n_restarts=3)


def random_feasible(rng, n_leds, k, lc, fill=0.8):
    """Random (P, b) strictly inside the lighting-feasible set."""
    b = np.empty(n_leds)
    for idx, total in lc.groups(n_leds):
        b[idx] = rng.dirichlet(np.ones(idx.size) * 2.0) * total
    p = rng.standard_normal((n_leds, k))
    p *= (fill * rng.uniform(0.3, 1.0, n_leds) * b / (lc.delta * np.abs(p).sum(axis=1)))[:, None]
    return p, b


def central_diff(f, x, eps=1e-6):
    g = np.zeros_like(x, dtype=float)
    for i in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        g[i] = (f(xp) - f(xm)) / (2 * eps)
    return g


def rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


@pytest.fixture
def colored_lc(params):
    return lighting_constraints(params, n_t=2)


# ----------------------------------------------------------------------------
# acceptance report: one PASS/FAIL line per criterion in the terminal summary
# ----------------------------------------------------------------------------

ACCEPTANCE = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
