import numpy as np
import pytest

from greedycond import greedy, rates
from greedycond.exceptions import DomainError
from greedycond.jointmodel import (
    brownian_restriction_model, eigen_truncation_model, invertible_map_model,
)
from greedycond.kernelcore import Grid, brownian_min
from greedycond.transferop import transfer_for_model


def greedy_run(model, n, gamma=1.0, seed=0):
    rule = greedy.SelectionRule(gamma, None if gamma == 1.0 else seed)
    return greedy.run(greedy.init(model.k_yy, model.grid_y, rule), n)


def synthetic(c, alpha, n_max=60):
    ns = tuple(range(1, n_max + 1))
    return rates.DecayCurve(ns, tuple(c * n ** -alpha for n in ns))


class TestFit:
    @pytest.mark.parametrize("c, alpha", [(1.0, 1.0), (3.0, 2.0), (0.2, 0.5)])
    def test_exact_power_law(self, c, alpha):
        fit = rates.fit_power_law(synthetic(c, alpha), (5, 40))
        assert fit.alpha_hat == pytest.approx(alpha, abs=1e-12)
        assert fit.c_hat == pytest.approx(c, rel=1e-12)
        assert fit.residual <= 1e-12

    def test_zero_in_window_names_n(self):
        vals = [n ** -1.0 for n in range(1, 21)]
        vals[11] = 0.0
        curve = rates.DecayCurve(tuple(range(1, 21)), tuple(vals))
        with pytest.raises(DomainError, match="n = 12"):
            rates.fit_power_law(curve, (5, 15))

    @pytest.mark.parametrize("window", [(0, 10), (10, 5), (10, 100)])
    def test_bad_windows(self, window):
        with pytest.raises(DomainError):
            rates.fit_power_law(synthetic(1, 1), window)

    def test_curve_validation(self):
        with pytest.raises(DomainError):
            rates.DecayCurve((1, 1), (1.0, 1.0))
        with pytest.raises(DomainError):
            rates.DecayCurve((1, 2), (1.0, -1.0))

    def test_brownian_greedy_rate(self):
        m = brownian_restriction_model(0.0)
        state = greedy_run(m, 100)
        fit = rates.fit_power_law(rates.decay_curve(m, state), (10, 100))
        assert fit.alpha_hat >= 0.8


class TestDecayCurve:
    def test_y_curve_is_greedy_trace(self, bm_model, bm_greedy):
        curve = rates.decay_curve(bm_model, bm_greedy, "Y_residual")
        assert curve.values[0] == 1.0
        np.testing.assert_array_equal(curve.values, bm_greedy.sup_trace())
        assert curve.ns == tuple(range(101))

    def test_x_curve_starts_at_projection_norm(self, bm_model, bm_greedy):
        # n = 0: sup diag of the projected kernel: 2 s^2 on [0, 1/2], s beyond
        curve = rates.decay_curve(bm_model, bm_greedy, "X_given_Yn_residual")
        assert curve.values[0] == pytest.approx(1.0, abs=1e-12)

    def test_saturation(self):
        m = brownian_restriction_model(0.0, Grid.uniform(0, 1, 41), Grid.uniform(0.5, 1, 21))
        state = greedy_run(m, 21)
        assert state.n == 21
        for target in rates.TARGETS:
            assert rates.decay_curve(m, state, target).values[-1] <= 1e-8

    def test_unknown_target(self, bm_model, bm_greedy):
        with pytest.raises(DomainError):
            rates.decay_curve(bm_model, bm_greedy, "nope")


class TestTransferBound:
    @pytest.mark.parametrize("sigma2", [0.0, 0.1, 0.5])
    def test_brownian(self, sigma2):
        m = brownian_restriction_model(sigma2)
        rep = rates.check_transfer_bound(m, transfer_for_model(m), greedy_run(m, 60))
        assert rep["pass"]
        assert rep["constants"]["norm_M"] == pytest.approx(1 + sigma2 / (0.5 + sigma2))

    def test_identity_is_tight(self):
        g = Grid.uniform(0.5, 1.0, 41)
        m = invertible_map_model(brownian_min(0.5, 1.0), g, np.eye(41))
        rep = rates.check_transfer_bound(m, transfer_for_model(m), greedy_run(m, 30))
        assert rep["pass"]
        assert all(r["tight"] for r in rep["per_n"])

    def test_eigen_all_kept(self):
        m = eigen_truncation_model([1.0, 0.5, 0.25, 0.125], [0, 1, 2, 3])
        state = greedy_run(m, 4)
        rep = rates.check_transfer_bound(m, transfer_for_model(m), state)
        assert rep["pass"]
        assert rep["per_n"][-1]["lhs"] <= 1e-8

    def test_lhs_monotone(self, bm_model, bm_greedy):
        lhs = rates.decay_curve(bm_model, bm_greedy, "X_given_Yn_residual").values
        assert np.all(np.diff(lhs) <= 1e-12)


class TestRateBound:
    @pytest.mark.parametrize("gamma", [1.0, 0.5])
    def test_brownian(self, gamma):
        m = brownian_restriction_model(0.0)
        state = greedy_run(m, 50, gamma, seed=3)
        rep = rates.check_rate_bound(m, transfer_for_model(m), state, (10, 50))
        assert rep["pass"]
        assert rep["empirical"]
        assert [r["n"] for r in rep["per_n"]] == list(range(10, 51))

    def test_noisy(self):
        m = brownian_restriction_model(0.5)
        state = greedy_run(m, 50, 0.5, seed=7)
        assert rates.check_rate_bound(m, transfer_for_model(m), state)["pass"]

    def test_synthetic_baseline_constants(self, bm_model, bm_greedy):
        rep = rates.check_rate_bound(bm_model, transfer_for_model(bm_model), bm_greedy,
                                       (10, 50), baseline=synthetic(0.5, 1.0))
        c = rep["constants"]
        assert c["alpha_hat"] == pytest.approx(1.0, abs=1e-12)
        assert c["c_hat"] == pytest.approx(0.5, rel=1e-12)
        row = rep["per_n"][0]
        assert row["rhs"] == pytest.approx(2.0 ** 6 * 0.5 / 10, rel=1e-12)

    def test_uniform_selection(self):
        g = Grid.uniform(0.5, 1.0, 101)
        idx = rates.uniform_selection(g, 4)
        np.testing.assert_allclose(g.points[idx], [0.625, 0.75, 0.875, 1.0])
        with pytest.raises(DomainError):
            rates.uniform_selection(Grid.uniform(0, 1, 5), 6)

    def test_short_run(self, bm_model):
        state = greedy_run(bm_model, 5)
        with pytest.raises(DomainError):
            rates.check_rate_bound(bm_model, transfer_for_model(bm_model), state, (10, 20))
