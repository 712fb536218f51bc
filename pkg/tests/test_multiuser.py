import numpy as np
import pytest

from conftest import central_diff, random_feasible, rel_err
from vlcjtod.baselines import zf_downlink_design
from vlcjtod.channel import case_channel
from vlcjtod.mse import (
    LITERAL,
    PER_USER,
    MultiUserDesign,
    mse_downlink_full,
    mse_downlink_reduced,
    mse_uplink_full,
    mse_uplink_reduced,
    wiener_equalizer_downlink,
    wiener_equalizer_uplink,
)
from vlcjtod.multiuser import (
    DualityError,
    downlink_objective,
    duality_map,
    equal_split_offset,
    grad_downlink,
    grad_uplink,
    jtod_downlink,
    jtod_uplink,
    shot_duality_gap,
)
from vlcjtod.optimizer import OptimizerConfig
from vlcjtod.signal import InfeasibleError, SystemParams, check_feasible, lighting_constraints

DL4 = SystemParams(sigma2=0.01, varsigma2=0.5)


@pytest.fixture
def white(params):
    return lighting_constraints(params, colored=False)


def _uplink_point(rng, k, total=30.0, delta=3.0):
    b = rng.dirichlet(np.ones(k) * 2) * total
    p = b / delta * rng.uniform(0.2, 0.9, k) * rng.choice([-1, 1], k)
    return p, b


class TestDownlinkGradient:
    def test_finite_differences(self, rng, white):
        h = case_channel("downlink4")
        q = SystemParams(sigma2=0.3, varsigma2=0.5)
        for _ in range(5):
            p, b = random_feasible(rng, 4, 4, white)
            f = lambda pp, bb: mse_downlink_reduced(pp, bb, h, q).sum()  # noqa: E731
            gp, gb = grad_downlink(p, b, h, q)
            assert rel_err(gp, central_diff(lambda x: f(x, b), p)) < 1e-5
            assert rel_err(gb, central_diff(lambda x: f(p, x), b)) < 1e-5

    def test_objective_identity(self, rng, params, white):
        h = case_channel("downlink4")
        for _ in range(20):
            p, b = random_feasible(rng, 4, 4, white)
            total = mse_downlink_reduced(p, b, h, params).sum()
            assert downlink_objective(p, b, h, params) == pytest.approx(4 * params.r - total, abs=1e-9)


class TestUplinkGradient:
    @pytest.mark.parametrize("mode", [PER_USER, LITERAL])
    def test_finite_differences(self, rng, mode):
        h = case_channel("downlink4")
        q = SystemParams(sigma2=0.3, varsigma2=0.5)
        for _ in range(5):
            p, b = _uplink_point(rng, 4)
            f = lambda pp, bb: mse_uplink_reduced(pp, bb, h, q, mode).sum()  # noqa: E731
            gp, gb = grad_uplink(p, b, h, q, mode)
            assert rel_err(gp, central_diff(lambda x: f(x, b), p)) < 1e-5
            assert rel_err(gb, central_diff(lambda x: f(p, x), b)) < 1e-5

    def test_unknown_mode(self, params):
        with pytest.raises(ValueError):
            grad_uplink(np.ones(2), np.ones(2), np.eye(2), params, "x")


class TestJtodDownlink:
    def test_symmetric_channel(self, params, white):
        d = jtod_downlink(np.eye(3), params, white, OptimizerConfig(n_restarts=3))
        np.testing.assert_allclose(d.b, 10.0, atol=1e-6)
        np.testing.assert_allclose(np.diag(d.p), d.p[0, 0], atol=1e-6)
        np.testing.assert_allclose(d.per_user_mse, d.per_user_mse[0], atol=1e-6)

    def test_beats_scaled_zf(self):
        lc = lighting_constraints(DL4, colored=False)
        h = case_channel("downlink4")
        d = jtod_downlink(h, DL4, lc, OptimizerConfig(n_restarts=3))
        zf = zf_downlink_design(h, DL4, lc)
        assert d.sum_mse < mse_downlink_reduced(zf.p, zf.b, h, DL4).sum() - 1e-3
        assert d.sum_mse < zf.sum_mse
        assert check_feasible(d.p, d.b, lc)[0]
        np.testing.assert_allclose(d.g, wiener_equalizer_downlink(h, d.p, d.b, DL4), atol=1e-14)
        np.testing.assert_allclose(d.per_user_mse, mse_downlink_reduced(d.p, d.b, h, DL4), rtol=1e-9)

    def test_colored_constraints_collapse_to_white(self, params):
        d = jtod_downlink(np.eye(3), params, lighting_constraints(params, n_t=1), OptimizerConfig(n_restarts=2))
        assert d.b.sum() == pytest.approx(30.0)

    def test_infeasible(self, params, white):
        bad = type(white)(delta=3.0, beta=1.0, p_total=0.0, colored=False)
        with pytest.raises(InfeasibleError):
            jtod_downlink(np.eye(2), params, bad, OptimizerConfig(n_restarts=1))


class TestJtodUplink:
    def test_single_user_grid(self, params, white):
        # K = 1, h = e_1: b = 30 and the only choice is |p| <= 10
        h = np.array([[1.0], [0.0]])
        d = jtod_uplink(h, params, white, OptimizerConfig(n_restarts=2))
        grid = np.arange(0, 10 + 1e-9, 1e-3)
        vals = [mse_uplink_reduced(np.array([p]), np.array([30.0]), h, params)[0] for p in grid]
        assert d.sum_mse == pytest.approx(min(vals), abs=1e-6)
        assert abs(d.p[0]) == pytest.approx(grid[int(np.argmin(vals))], abs=1e-3)

    def test_symmetric(self, params, white):
        d = jtod_uplink(np.eye(3), params, white, OptimizerConfig(n_restarts=3))
        np.testing.assert_allclose(d.b, 10.0, atol=1e-6)
        np.testing.assert_allclose(np.abs(d.p), abs(d.p[0]), atol=1e-6)
        assert (np.abs(d.p) * 3 <= d.b + 1e-9).all()

    @pytest.mark.parametrize("mode", [PER_USER, LITERAL])
    def test_downlink4(self, params, white, mode):
        h = case_channel("downlink4")
        d = jtod_uplink(h, params, white, OptimizerConfig(n_restarts=2), mode=mode)
        assert d.info["mode"] == mode
        np.testing.assert_allclose(d.per_user_mse, mse_uplink_full(d.g, d.p, d.b, h, params, mode), rtol=1e-12)
        np.testing.assert_allclose(d.g, wiener_equalizer_uplink(h, d.p, d.b, params, mode), atol=1e-14)
        trace = [run[0] for run in d.info["runs"]]
        assert d.sum_mse == pytest.approx(min(trace))


def _ul_design(p, b, h, params):
    g = wiener_equalizer_uplink(h, p, b, params)
    return MultiUserDesign(p=p, b=b, g=g, per_user_mse=mse_uplink_full(g, p, b, h, params), link="uplink")


class TestDuality:
    def test_single_user(self, params):
        g, p = np.array([[0.6], [0.8]]), np.array([2.0])
        alpha, p_dl, g_dl = duality_map(g, p, np.array([[1.0], [0.5]]), params)
        assert alpha[0] ** 2 == pytest.approx(p[0] ** 2 / (g[:, 0] @ g[:, 0]), rel=1e-14)
        np.testing.assert_allclose(p_dl[:, 0], alpha[0] * g[:, 0], rtol=1e-14)
        assert g_dl[0] == pytest.approx(p[0] / alpha[0], rel=1e-14)

    def test_orthogonal_equal_power(self, params):
        h = np.eye(3)
        p, b = np.full(3, 2.0), np.full(3, 10.0)
        alpha, _, _ = duality_map(wiener_equalizer_uplink(h, p, b, params), p, h, params)
        np.testing.assert_allclose(alpha, alpha[0], rtol=1e-12)

    def test_thermal_only_parity(self, rng):
        q = SystemParams(varsigma2=0.0, sigma2=0.05)
        for i in range(20):
            h = case_channel("downlink4") if i % 2 else rng.uniform(0, 1, (4, 4)) + np.eye(4)
            p, b = _uplink_point(rng, 4)
            ul = _ul_design(p, b, h, q)
            _, p_dl, g_dl = duality_map(ul.g, ul.p, h, q)
            dl = mse_downlink_full(p_dl, equal_split_offset(b, 4), h, g_dl, q)
            np.testing.assert_allclose(dl, ul.per_user_mse, atol=1e-8)
            _, _, gap = shot_duality_gap(ul, h, equal_split_offset(b, 4), q)
            assert not gap.any()

    def test_orthogonal_shot_gap_vanishes(self, params):
        h = np.eye(3)
        p, b = np.array([1.0, 2.0, 2.5]), np.full(3, 10.0)
        ul = _ul_design(p, b, h, params)
        dl, ulsh, gap = shot_duality_gap(ul, h, equal_split_offset(b, 3), params)
        np.testing.assert_allclose(gap, 0.0, atol=1e-12)
        assert (dl > 0).all()

    def test_downlink4_gap(self, rng, params):
        h = case_channel("downlink4")
        p, b = _uplink_point(rng, 4)
        ul = _ul_design(p, b, h, params)
        _, _, gap = shot_duality_gap(ul, h, equal_split_offset(b, 4), params)
        assert np.abs(gap).max() > 1e-3

    def test_power_parity(self, rng):
        b = rng.uniform(0, 10, 4)
        assert equal_split_offset(b, 4).sum() == pytest.approx(b.sum(), rel=1e-15)

    def test_weights_positive_with_thermal_noise(self, rng, params):
        # C has non-positive off-diagonals and column sums sigma2 ||g_j||^2 > 0 (an M-matrix)
        for _ in range(50):
            h = rng.uniform(0, 1, (3, 3))
            alpha, _, _ = duality_map(rng.standard_normal((3, 3)), rng.uniform(0.1, 3, 3), h, params)
            assert (alpha > 0).all()

    def test_no_thermal_noise_rejected(self, params):
        g = np.array([[1.0, 0.2], [0.3, 1.0]])
        with pytest.raises(DualityError):
            duality_map(g, np.array([3.0, 3.0]), np.eye(2) + 0.5, params.with_(sigma2=0.0))
