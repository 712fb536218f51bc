import csv

import numpy as np
import pytest
from scipy import stats

from vlcjtod.baselines import svd_design, zf_design, zf_downlink_design
from vlcjtod.channel import case_channel
from vlcjtod.mse import P2PDesign, mse_p2p_full, mse_p2p_reduced
from vlcjtod.montecarlo import (
    CSV_COLUMNS,
    Scenario,
    SimSpec,
    analytic_sum_mse,
    append_results_csv,
    empirical_shot_covariance,
    monotonicity_flags,
    receiver_noise,
    result_row,
    simulate_ser,
    slice_pam,
    sweep,
)
from vlcjtod.multiuser import jtod_downlink
from vlcjtod.optimizer import OptimizerConfig, jtod_p2p
from vlcjtod.signal import InfeasibleError, SystemParams, lighting_constraints

FAST = OptimizerConfig(n_restarts=3)


def _p2p_design(scheme, params, h):
    lc = lighting_constraints(params, n_t=2)
    if scheme == "jtod":
        return jtod_p2p(h, params, lc, FAST)
    return {"zf": zf_design, "svd": svd_design}[scheme](h, params, lc)


class TestSlicer:
    def test_levels_and_ties(self, params):
        const = params.constellation
        np.testing.assert_array_equal(slice_pam(np.array([-9, -3, -2, -1.5, 0, 0.5, 2, 3, 9.0]), const),
                                      [0, 0, 0, 1, 1, 2, 2, 3, 3])

    def test_round_trip(self, params):
        const = params.constellation
        np.testing.assert_array_equal(slice_pam(const.points, const), np.arange(4))


class TestSimulate:
    def test_noiseless_is_error_free(self):
        q = SystemParams(sigma2=0.0, varsigma2=0.0)
        for case, fn in [("case1", zf_design), ("case5", svd_design), ("case3", zf_design)]:
            h = case_channel(case).overall
            d = fn(h, q, lighting_constraints(q, n_t=2))
            res = simulate_ser(SimSpec(d, h, q, 5000, seed=1))
            assert res.n_errors == 0 and res.ser == 0.0

    def test_deterministic_and_chunk_independent(self, params, colored_lc):
        h = case_channel("case5").overall
        d = zf_design(h, params.with_(sigma2=0.1), colored_lc)
        spec = SimSpec(d, h, params.with_(sigma2=0.1), 45_000, seed=9)
        a, b = simulate_ser(spec), simulate_ser(spec)
        assert (a.n_errors, a.ser, a.ci_low) == (b.n_errors, b.ser, b.ci_low)
        spec.workers = 3
        assert simulate_ser(spec).n_errors == a.n_errors
        assert simulate_ser(SimSpec(d, h, params.with_(sigma2=0.1), 45_000, seed=10)).n_errors != a.n_errors

    def test_negative_intensity_is_error(self, params):
        d = P2PDesign(p=np.eye(6) * 5, b=np.ones(6), g=np.eye(6), mse=0.0)
        with pytest.raises(InfeasibleError):
            simulate_ser(SimSpec(d, np.eye(6), params, 100, seed=0))

    def test_invalid_spec(self, params):
        d = zf_design(np.eye(6), params, lighting_constraints(params, n_t=2))
        with pytest.raises(ValueError):
            SimSpec(d, np.eye(6), params, 0, seed=0)
        with pytest.raises(ValueError):
            SimSpec(d, np.eye(6), params, 10, seed=0, scenario="mesh")

    def test_thermal_only_noise_variance(self):
        q = SystemParams(sigma2=0.37, varsigma2=0.0)
        hx = np.full((200_000, 2), 4.0)
        noise = receiver_noise(np.random.default_rng(5), hx, q)
        twin = np.random.default_rng(5)
        twin.standard_normal(hx.shape)
        np.testing.assert_array_equal(noise, np.sqrt(0.37) * twin.standard_normal(hx.shape))
        assert noise.var() == pytest.approx(0.37, rel=0.01)

    def test_shot_noise_variance(self):
        q = SystemParams(sigma2=0.2, varsigma2=2.0)
        hx = np.full(400_000, 3.0)
        assert receiver_noise(np.random.default_rng(1), hx, q).var() == pytest.approx(0.2 + 3 * 0.4, rel=0.01)

    def test_ci_coverage(self):
        # scalar link, unit gain, G = 1/p: SER = 1.5 Q(p / sigma) for 4-PAM
        q = SystemParams(sigma2=1 / 2.475**2, varsigma2=0.0, p_total=3.0, b_bar=(1.0, 0.0, 0.0))
        d = P2PDesign(p=np.ones((1, 1)), b=np.array([3.0]), g=np.ones((1, 1)), mse=0.0)
        truth = 1.5 * stats.norm.sf(1 / np.sqrt(q.sigma2))
        covered = 0
        for seed in range(100):
            res = simulate_ser(SimSpec(d, np.ones((1, 1)), q, 3000, seed=seed))
            covered += res.ci_low <= truth <= res.ci_high
        assert covered >= 90

    def test_case1_overlapping(self, params):
        h = case_channel("case1").overall
        res = {s: simulate_ser(SimSpec(_p2p_design(s, params, h), h, params, 100_000, seed=2024)) for s in
               ("jtod", "zf", "svd")}
        assert max(r.ci_low for r in res.values()) <= min(r.ci_high for r in res.values())

    def test_case5_separated(self, params):
        h = case_channel("case5").overall
        res = {s: simulate_ser(SimSpec(_p2p_design(s, params, h), h, params, 100_000, seed=2024)) for s in
               ("jtod", "zf", "svd")}
        assert res["jtod"].ci_high < res["zf"].ci_low
        assert res["jtod"].ci_high < res["svd"].ci_low

    def test_multiuser_scenarios(self, params):
        q = SystemParams(sigma2=0.01, varsigma2=0.5)
        lc = lighting_constraints(q, colored=False)
        h = case_channel("downlink4")
        zf = zf_downlink_design(h, q.with_(sigma2=0.0, varsigma2=0.0), lc)
        res = simulate_ser(SimSpec(zf, h, q.with_(sigma2=0.0, varsigma2=0.0), 2000, seed=0, scenario="downlink"))
        assert res.n_errors == 0
        d = jtod_downlink(h, q, lc, FAST)
        row = result_row(SimSpec(d, h, q, 1000, seed=0, scenario=Scenario.DOWNLINK), None)
        assert np.isnan(row["ser"])
        assert analytic_sum_mse(d, h, q, "downlink") == pytest.approx(d.sum_mse, rel=1e-12)


class TestMseAgreement:
    def test_p2p_monte_carlo(self, params):
        # mean squared soft-decision error matches the analytic MSE
        q = params.with_(sigma2=0.3)
        h = case_channel("case5").overall
        d = jtod_p2p(h, q, lighting_constraints(q, n_t=2), FAST)
        rng = np.random.default_rng(3)
        s = rng.choice(q.constellation.points, size=(100_000, 6))
        hx = (s @ d.p.T + d.b) @ h.T
        y = hx + receiver_noise(rng, hx, q)
        err = (((y - h @ d.b) @ d.g.T - s) ** 2).sum(axis=1).mean()
        assert err == pytest.approx(mse_p2p_full(d.g, d.p, d.b, h, q), rel=0.02)
        assert mse_p2p_full(d.g, d.p, d.b, h, q) == pytest.approx(mse_p2p_reduced(d.p, d.b, h, q), rel=1e-9)


class TestShotCovariance:
    def test_case1_optimum(self, params, colored_lc):
        d = jtod_p2p(case_channel("case1"), params, colored_lc, FAST)
        est = empirical_shot_covariance(d.p, d.b, np.eye(6), 100_000, seed=4)
        assert np.abs(np.diag(est) / 5.0 - 1).max() < 0.02
        assert not (est - np.diag(np.diag(est))).any()

    def test_zero_precoder_exact(self, rng):
        h = case_channel("case5").overall
        b = rng.uniform(0, 10, 6)
        np.testing.assert_array_equal(empirical_shot_covariance(np.zeros((6, 6)), b, h, 17, seed=0), np.diag(h @ b))

    def test_antithetic_exact(self, rng, colored_lc):
        from conftest import random_feasible
        h = case_channel("case5").overall
        p, b = random_feasible(rng, 6, 6, colored_lc)
        est = empirical_shot_covariance(p, b, h, 1000, seed=3, antithetic=True)
        np.testing.assert_allclose(est, np.diag(h @ b), atol=1e-12)


def _case_design_fn(h):
    return lambda scheme, params, value: _p2p_design(scheme, params, h)


class TestSweep:
    def test_sigma2_case1(self, params):
        h = case_channel("case1").overall
        rows = sweep(_case_design_fn(h), h, params, "sigma2", [0.001, 0.01, 0.1], ["jtod"], 100_000, seed=7,
                     case="case1")
        ser = [r["ser"] for r in rows]
        # at sigma2 <= 0.01 the true SER is about 1e-11 and no errors occur
        assert ser[0] <= ser[1] < ser[2]
        assert rows[2]["ci_low"] > rows[1]["ci_high"]
        assert monotonicity_flags(rows, "sigma2") == {"jtod": True}

    def test_p_total_case5(self, params):
        h = case_channel("case5").overall
        rows = sweep(_case_design_fn(h), h, params, "p_total", [15, 20, 30], ["jtod", "zf", "svd"], 20_000,
                     seed=7, case="case5")
        assert all(monotonicity_flags(rows, "p_total").values())
        for scheme in ("zf", "svd"):
            ser = [r["ser"] for r in rows if r["scheme"] == scheme]
            assert ser[0] > ser[-1]

    def test_varsigma2_downlink_gap_grows_with_noise(self):
        q = SystemParams(sigma2=0.01, varsigma2=0.5)
        lc = lighting_constraints(q, colored=False)
        h = case_channel("downlink4")

        def design(scheme, params, value):
            if scheme == "zf":
                return zf_downlink_design(h, params, lc)
            return jtod_downlink(h, params, lc, FAST)

        rows = sweep(design, h, q, "varsigma2", [0.0, 0.5, 1.0], ["jtod", "zf"], 5_000, seed=1,
                     scenario=Scenario.DOWNLINK, case="downlink4")
        gap = [z["sum_mse_analytic"] - j["sum_mse_analytic"] for j, z in zip(rows[0::2], rows[1::2])]
        assert 0 < gap[0] < gap[1] < gap[2]

    def test_failed_point_continues(self, params):
        h = case_channel("case2").overall
        rows = sweep(_case_design_fn(h), h, params, "sigma2", [0.01], ["zf", "jtod"], 1000, seed=0)
        assert rows[0]["status"].startswith("failed") and np.isnan(rows[0]["ser"])
        assert rows[1]["status"] == "ok"

    def test_bad_axis(self, params):
        with pytest.raises(ValueError):
            sweep(None, np.eye(6), params, "beta", [1.0], ["zf"], 10, 0)
        with pytest.raises(ValueError):
            sweep(None, np.eye(6), params, "sigma2", [], ["zf"], 10, 0)

    def test_monotonicity_flags_use_intervals(self):
        rows = [dict(scheme="a", status="ok", value=v, ci_low=lo, ci_high=hi) for v, lo, hi in
                [(1, 0.1, 0.2), (2, 0.15, 0.25), (3, 0.01, 0.05)]]
        assert monotonicity_flags(rows, "sigma2") == {"a": False}
        assert monotonicity_flags(rows, "p_total") == {"a": True}


class TestCsv:
    def test_append(self, tmp_path, params):
        h = case_channel("case1").overall
        d = zf_design(h, params, lighting_constraints(params, n_t=2))
        spec = SimSpec(d, h, params, 500, seed=3, case="case1", scheme="zf")
        row = result_row(spec, simulate_ser(spec))
        f = tmp_path / "results.csv"
        append_results_csv(f, [row])
        append_results_csv(f, [row])
        with open(f) as fh:
            data = list(csv.DictReader(fh))
        assert list(data[0]) == CSV_COLUMNS and len(data) == 2
        assert float(data[0]["sum_mse_analytic"]) == row["sum_mse_analytic"]
        assert float(data[1]["sigma2"]) == 0.01 and data[1]["scheme"] == "zf"
        assert "np.float64" not in f.read_text()
