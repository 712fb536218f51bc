import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_feasible
from vlcjtod.signal import (
    InfeasibleError,
    LightingConstraints,
    SystemParams,
    check_feasible,
    color_summation_matrix,
    lighting_constraints,
    pam_points,
    project_capped_simplex,
    project_joint,
    project_l1_ball,
    project_l1_cone,
    project_offset,
    project_precoder,
)

cp = pytest.importorskip("cvxpy")

TIGHT = dict(solver="CLARABEL", tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)


class TestPam:
    def test_four_pam(self):
        c = pam_points(4, 3)
        np.testing.assert_array_equal(c.points, [-3, -1, 1, 3])
        assert c.r == pytest.approx(5.0, abs=1e-12)

    def test_binary(self):
        c = pam_points(2, 1)
        np.testing.assert_array_equal(c.points, [-1, 1])
        assert c.r == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("m, d", [(2, 0.5), (4, 3), (8, 2), (16, 1.3)])
    def test_variance_matches_points(self, m, d):
        c = pam_points(m, d)
        assert c.r == pytest.approx(np.mean(c.points**2), abs=1e-12)
        np.testing.assert_allclose(c.points, -c.points[::-1], atol=1e-15)
        np.testing.assert_allclose(np.diff(c.points), c.spacing, atol=1e-12)

    @pytest.mark.parametrize("m, d", [(3, 1), (1, 1), (0, 1), (4, 0), (4, -1)])
    def test_invalid(self, m, d):
        with pytest.raises(ValueError):
            pam_points(m, d)

    def test_default_params(self):
        p = SystemParams()
        assert (p.r, p.amp_bound, p.shot) == (pytest.approx(5.0), 3.0, pytest.approx(0.01))


class TestColorSummation:
    def test_two_leds(self):
        expected = [[1, 1, 0, 0, 0, 0], [0, 0, 1, 1, 0, 0], [0, 0, 0, 0, 1, 1]]
        np.testing.assert_array_equal(color_summation_matrix(2), expected)

    def test_one_led(self):
        np.testing.assert_array_equal(color_summation_matrix(1), np.eye(3))

    @pytest.mark.parametrize("n_t", [1, 2, 5, 25])
    def test_row_counts_and_columns(self, n_t):
        pi = color_summation_matrix(n_t)
        np.testing.assert_array_equal(pi @ np.ones(3 * n_t), n_t)
        np.testing.assert_array_equal(pi.sum(axis=0), 1)


class TestLightingConstraints:
    @pytest.mark.parametrize("b_bar", [(0.5, 0.5, 0.5), (-0.1, 0.6, 0.5)])
    def test_bad_color_ratio(self, b_bar):
        with pytest.raises(ValueError):
            LightingConstraints(delta=3, beta=1, p_total=30, b_bar=b_bar)

    @pytest.mark.parametrize("beta", [0.0, 1.1])
    def test_bad_beta(self, beta):
        with pytest.raises(ValueError):
            LightingConstraints(delta=3, beta=beta, p_total=30)


class TestCheckFeasible:
    def test_case1_exact(self, colored_lc):
        ok, _ = check_feasible(5 / 3 * np.eye(6), 5 * np.ones(6), colored_lc)
        assert ok

    def test_case1_rounded_fails(self, colored_lc):
        ok, rep = check_feasible(1.67 * np.eye(6), 5 * np.ones(6), colored_lc)
        assert not ok and rep["rows"] == list(range(6))

    def test_zero_precoder(self, colored_lc):
        assert check_feasible(np.zeros((6, 6)), [7, 3, 10, 0, 1, 9], colored_lc)[0]

    def test_case2_printed_optimum(self, colored_lc):
        p = np.zeros((6, 6))
        p[[0, 2, 4], [0, 2, 4]] = 10 / 3
        assert check_feasible(p, [10, 0, 10, 0, 10, 0], colored_lc)[0]

    def test_group_violation_reported(self, colored_lc):
        ok, rep = check_feasible(np.zeros((6, 6)), [6, 3, 5, 5, 5, 5], colored_lc)
        assert not ok and rep["groups"] == [0]

    def test_white(self, params):
        lc = lighting_constraints(params, colored=False)
        assert check_feasible(np.zeros((4, 4)), [30, 0, 0, 0], lc)[0]
        assert not check_feasible(np.zeros((4, 4)), [10, 0, 0, 0], lc)[0]


def _l1_ball_oracle(v, radius):
    x = cp.Variable(v.size)
    cp.Problem(cp.Minimize(cp.sum_squares(x - v)), [cp.norm1(x) <= radius]).solve(**TIGHT)
    return x.value


class TestProjectPrecoder:
    def test_feasible_unchanged(self, colored_lc, rng):
        p, b = random_feasible(rng, 6, 6, colored_lc)
        np.testing.assert_array_equal(project_precoder(p, b, 3.0), p)

    def test_single_coordinate(self):
        np.testing.assert_allclose(project_l1_ball(np.array([2.0, 0, 0]), 1.0), [1, 0, 0])

    def test_two_equal(self):
        np.testing.assert_allclose(project_l1_ball(np.array([1.0, 1.0]), 1.0), [0.5, 0.5], atol=1e-15)

    def test_two_d_grid_oracle(self, rng):
        # brute force over a fine grid on the boundary of the 2-D l1 ball
        theta = np.linspace(0, 1, 400_001)
        for _ in range(5):
            v = rng.uniform(-2, 2, 2)
            if np.abs(v).sum() <= 1:
                continue
            pts = []
            for sx, sy in itertools.product([-1, 1], repeat=2):
                pts.append(np.column_stack([sx * theta, sy * (1 - theta)]))
            pts = np.concatenate(pts)
            best = pts[np.argmin(((pts - v) ** 2).sum(axis=1))]
            np.testing.assert_allclose(project_l1_ball(v, 1.0), best, atol=1e-5)

    def test_matches_convex_solver(self, rng):
        for _ in range(10):
            v = rng.standard_normal(7) * 3
            radius = rng.uniform(0.1, 2)
            np.testing.assert_allclose(project_l1_ball(v, radius), _l1_ball_oracle(v, radius), atol=1e-6)

    def test_negative_offset_rejected(self):
        with pytest.raises(ValueError):
            project_precoder(np.eye(2), [1, -1], 3.0)


class TestProjectOffset:
    def _single_group(self, total):
        return LightingConstraints(delta=1.0, beta=1.0, p_total=total, colored=False)

    def test_already_feasible(self):
        lc = self._single_group(10)
        np.testing.assert_allclose(project_offset(np.array([6.0, 4.0]), np.zeros((2, 1)), lc), [6, 4])

    def test_boundary_point(self):
        lc = self._single_group(10)
        np.testing.assert_allclose(project_offset(np.array([10.0, 0.0]), np.zeros((2, 1)), lc), [10, 0])

    def test_lower_bounds_grid_oracle(self):
        lc = self._single_group(10)
        out = project_offset(np.zeros(2), np.array([[5.0], [3.0]]), lc)
        # the segment x1 + x2 = 10 with x1 >= 5, x2 >= 3, scanned at 1e-4
        x1 = np.arange(5.0, 7.0 + 1e-9, 1e-4)
        best = x1[np.argmin(x1**2 + (10 - x1) ** 2)]
        np.testing.assert_allclose(out, [best, 10 - best], atol=1e-4)
        # (6, 4) has squared norm 52 while (5, 5) has 50
        np.testing.assert_allclose(out, [5, 5], atol=1e-12)

    def test_infeasible_names_group(self, colored_lc):
        p = np.zeros((6, 6))
        p[2, 0] = p[3, 1] = 2.0  # green rows need 12 > 10
        with pytest.raises(InfeasibleError, match="color group 1"):
            project_offset(np.full(6, 5.0), p, colored_lc)

    def test_matches_convex_solver(self, rng, colored_lc):
        for _ in range(10):
            p = rng.standard_normal((6, 6)) * 0.2
            b = rng.standard_normal(6) * 4
            lower = np.abs(p).sum(axis=1) * 3
            x = cp.Variable(6)
            cons = [x >= lower, color_summation_matrix(2) @ x == 10 * np.ones(3)]
            cp.Problem(cp.Minimize(cp.sum_squares(x - b)), cons).solve(**TIGHT)
            np.testing.assert_allclose(project_offset(b, p, colored_lc), x.value, atol=1e-6)

    def test_capped_simplex_all_below(self):
        np.testing.assert_allclose(project_capped_simplex(np.array([-5.0, -5.0]), [0, 0], 4.0), [2, 2])


def _joint_oracle(p, b, lc):
    n, k = p.shape
    pv, bv = cp.Variable((n, k)), cp.Variable(n)
    cons = [lc.delta * cp.sum(cp.abs(pv), axis=1) <= bv]
    for idx, total in lc.groups(n):
        cons.append(cp.sum(bv[idx]) == total)
    cp.Problem(cp.Minimize(cp.sum_squares(pv - p) + cp.sum_squares(bv - b)), cons).solve(**TIGHT)
    return pv.value, bv.value


class TestProjectJoint:
    def test_cone_inside(self):
        y, s = project_l1_cone(np.array([1.0, -1.0]), 3.0, 1.0)
        np.testing.assert_array_equal(y, [1, -1])
        assert s == 3.0

    def test_cone_apex(self):
        y, s = project_l1_cone(np.array([0.1, 0.1]), -10.0, 1.0)
        assert s == 0.0 and not y.any()

    def test_cone_matches_solver(self, rng):
        for _ in range(10):
            x, t, delta = rng.standard_normal(5) * 2, rng.standard_normal() * 2, rng.uniform(0.5, 3)
            yv, sv = cp.Variable(5), cp.Variable()
            cp.Problem(cp.Minimize(cp.sum_squares(yv - x) + cp.square(sv - t)),
                       [delta * cp.norm1(yv) <= sv]).solve(**TIGHT)
            y, s = project_l1_cone(x, t, delta)
            np.testing.assert_allclose(y, yv.value, atol=1e-6)
            assert s == pytest.approx(sv.value, abs=1e-6)

    @pytest.mark.parametrize("colored", [True, False])
    def test_matches_solver(self, rng, params, colored):
        lc = lighting_constraints(params, colored=colored, n_t=2)
        for _ in range(8):
            p = rng.standard_normal((6, 6)) * 2
            b = rng.standard_normal(6) * 5
            po, bo = project_joint(p, b, lc)
            pr, br = _joint_oracle(p, b, lc)
            assert check_feasible(po, bo, lc)[0]
            np.testing.assert_allclose(po, pr, atol=1e-5)
            np.testing.assert_allclose(bo, br, atol=1e-5)

    def test_idempotent_on_feasible(self, rng, colored_lc):
        p, b = random_feasible(rng, 6, 6, colored_lc)
        po, bo = project_joint(p, b, colored_lc)
        np.testing.assert_allclose(po, p, atol=1e-12)
        np.testing.assert_allclose(bo, b, atol=1e-12)

    def test_variational_inequality(self, rng, colored_lc):
        for _ in range(20):
            p = rng.standard_normal((6, 6)) * 2
            b = rng.standard_normal(6) * 5
            po, bo = project_joint(p, b, colored_lc)
            for _ in range(20):
                py, by = random_feasible(rng, 6, 6, colored_lc, fill=rng.uniform(0, 1))
                inner = np.sum((p - po) * (py - po)) + (b - bo) @ (by - bo)
                assert inner <= 1e-9


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-10, 10), min_size=6, max_size=6),
    st.lists(st.floats(-20, 20), min_size=6, max_size=6),
    st.floats(0.1, 1.0),
)
def test_projection_chain_feasible(pflat, b, beta):
    lc = lighting_constraints(SystemParams(beta=beta), n_t=2)
    p = np.array(pflat).reshape(6, 1)
    p1, b1 = project_joint(p, np.array(b), lc)
    assert check_feasible(p1, b1, lc)[0]
    # sequential P-then-b order also lands in the feasible set when P is first shrunk to zero-ish
    p2 = project_precoder(np.zeros_like(p), np.maximum(b1, 0), lc.delta)
    b2 = project_offset(b1, p2, lc)
    assert check_feasible(p2, b2, lc)[0]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(0.01, 4), st.integers(0, 2**32 - 1))
def test_l1_projection_variational(v, radius, seed):
    v = np.array(v)
    w = project_l1_ball(v, radius)
    assert np.abs(w).sum() <= radius * (1 + 1e-12) + 1e-12
    # <v - w, y - w> <= 0 for points y of the ball, including its vertices
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((200, 4))
    y *= (radius * rng.uniform(0, 1, 200) / np.abs(y).sum(axis=1))[:, None]
    y = np.vstack([y, radius * np.eye(4), -radius * np.eye(4)])
    assert ((y - w) @ (v - w)).max() <= 1e-9


class TestNonNegativityChain:
    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_exhaustive(self, rng, params, k):
        lc = lighting_constraints(params, n_t=2)
        pts = params.constellation.points
        s_all = np.array(list(itertools.product(pts, repeat=k)))
        for _ in range(5):
            p, b = project_joint(rng.standard_normal((6, k)) * 3, rng.standard_normal(6) * 5, lc)
            x = s_all @ p.T + b
            assert x.min() >= -1e-9

    def test_random_subset_k6(self, rng, params):
        lc = lighting_constraints(params, n_t=2)
        s = rng.choice(params.constellation.points, size=(20_000, 6))
        for _ in range(5):
            p, b = project_joint(rng.standard_normal((6, 6)) * 3, rng.standard_normal(6) * 5, lc)
            assert (s @ p.T + b).min() >= -1e-9
