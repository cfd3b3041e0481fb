import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greedycond.exceptions import DomainError, NumericalError
from greedycond.kernelcore import (
    Grid, assemble_gram, brownian_min, derivative, eval_kernel, factorize_psd,
    gaussian_rbf, h1_inner_product, is_psd, kernel_from_spec, shifted_min, tabulated,
)


class TestGrid:
    def test_uniform_default_resolution(self):
        assert len(Grid.uniform(0.0, 1.0)) == 201
        assert len(Grid.uniform(0.5, 1.0)) == 101

    @pytest.mark.parametrize("pts", [[0.0], [0.0, 0.0], [0.2, 0.1]])
    def test_rejects_bad_points(self, pts):
        with pytest.raises(DomainError):
            Grid(pts, 0.0, 1.0)

    def test_rejects_points_outside_bounds(self):
        with pytest.raises(DomainError):
            Grid([0.0, 1.5], 0.0, 1.0)

    def test_index_set_allows_single_point(self):
        g = Grid.index_set([3])
        assert len(g) == 1 and g.discrete

    def test_immutable(self):
        g = Grid.uniform(0, 1, 5)
        with pytest.raises(ValueError):
            g.points[0] = 3.0


class TestEvalKernel:
    def test_brownian(self):
        assert eval_kernel(brownian_min(), 0.25, 0.5) == 0.25

    def test_shifted_min(self):
        assert eval_kernel(shifted_min(1.0, 0.5, 1.0), 0.5, 0.5) == 1.5

    @pytest.mark.parametrize("k", [brownian_min(), shifted_min(1.0, 0.5, 1.0),
                                   gaussian_rbf(0.3)])
    def test_diagonal_at_lower_nonnegative(self, k):
        v = eval_kernel(k, k.lower, k.lower)
        assert np.isfinite(v) and v >= 0

    def test_out_of_domain(self):
        with pytest.raises(DomainError):
            eval_kernel(brownian_min(0.0, 1.0), 0.5, 1.5)
        with pytest.raises(DomainError):
            eval_kernel(shifted_min(1.0, 0.5, 1.0), 0.25, 0.75)

    def test_shifted_min_precondition(self):
        with pytest.raises(DomainError):
            shifted_min(0.5, -0.5, 1.0)

    @given(s=st.floats(0, 1), t=st.floats(0, 1))
    def test_symmetric_exactly(self, s, t):
        for k in (brownian_min(), shifted_min(0.7, 0.0, 1.0), gaussian_rbf(0.2)):
            assert eval_kernel(k, s, t) == eval_kernel(k, t, s)

    def test_spec_round_trip(self):
        k = shifted_min(1.0, 0.5, 1.0)
        k2 = kernel_from_spec(k.to_spec())
        assert eval_kernel(k2, 0.6, 0.7) == eval_kernel(k, 0.6, 0.7)

    def test_tabulated_lookup(self):
        g = Grid.uniform(0, 1, 5)
        k = tabulated(brownian_min().matrix(g), g)
        assert eval_kernel(k, 0.25, 0.75) == 0.25
        with pytest.raises(DomainError):
            eval_kernel(k, 0.3, 0.75)


class TestGram:
    def test_brownian_two_point(self):
        G = assemble_gram(brownian_min(), Grid([0.5, 1.0], 0, 1))
        np.testing.assert_array_equal(G.values, [[0.5, 0.5], [0.5, 1.0]])
        assert G.jitter == 0.0

    def test_rbf_unit_diagonal(self):
        G = assemble_gram(gaussian_rbf(1.0), Grid.uniform(0, 1, 30))
        np.testing.assert_array_equal(np.diag(G.values), 1.0)

    def test_shifted_min_entries(self):
        g = Grid([0.5, 0.75, 1.0], 0.5, 1.0)
        G = assemble_gram(shifted_min(1.0, 0.5, 1.0), g)
        expected = [[1 + min(s, t) for t in g.points] for s in g.points]
        np.testing.assert_array_equal(G.values, expected)
        assert G.values[0, 2] == 1.5

    def test_jitter_escalates_on_singular(self):
        # duplicated information: k(0, 0) = 0 makes the min Gram singular
        G = assemble_gram(brownian_min(), Grid.uniform(0, 1, 11))
        assert G.jitter > 0
        assert np.allclose(G.chol @ G.chol.T, G.values + G.jitter * np.eye(11))

    def test_indefinite_raises_with_eigenvalue(self):
        with pytest.raises(NumericalError, match="smallest eigenvalue"):
            factorize_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))

    @pytest.mark.parametrize("k", [brownian_min(), shifted_min(0.3, 0.0, 1.0),
                                   gaussian_rbf(0.1), gaussian_rbf(1.0)])
    @pytest.mark.parametrize("n", [2, 17, 200])
    def test_psd_up_to_200_points(self, k, n):
        assert is_psd(k.matrix(Grid.uniform(0, 1, n)))


class TestH1InnerProduct:
    a, b, c = 0.5, 1.0, 1.0

    def setup_method(self):
        self.q = Grid.uniform(self.a, self.b)
        self.k = shifted_min(self.c, self.a, self.b)

    def translate(self, s):
        return self.k(s, self.q.points)

    def test_reproducing_at_075(self):
        f = self.translate(0.75)
        h = self.q.points[1] - self.q.points[0]
        val = h1_inner_product(self.k, f, None, f, None, self.q)
        # trapezoid of the squared central-difference derivative loses h/4 at the kink
        assert val == pytest.approx(1.75, abs=h / 4 + 1e-12)

    def test_constant(self):
        one = np.ones(len(self.q))
        assert h1_inner_product(self.k, one, None, one, None, self.q) == pytest.approx(1 / 1.5)

    def test_zero(self):
        z = np.zeros(len(self.q))
        f = self.translate(0.6)
        assert h1_inner_product(self.k, z, None, f, None, self.q) == 0.0

    def test_reproducing_on_test_grid(self):
        test = np.linspace(self.a, self.b, 21)
        h = self.q.points[1] - self.q.points[0]
        for s in test:
            for t in test:
                val = h1_inner_product(self.k, self.translate(s), None,
                                       self.translate(t), None, self.q)
                tol = h / 4 + 1e-12 if s == t and self.a < s < self.b else 1e-12
                assert abs(val - (1 + min(s, t))) <= tol

    def test_error_shrinks_with_h(self):
        errs = []
        for n in (51, 101, 201, 401):
            q = Grid.uniform(self.a, self.b, n)
            f = self.k(0.75, q.points)
            errs.append(abs(h1_inner_product(self.k, f, None, f, None, q) - 1.75))
        assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))

    def test_smooth_functions_second_order(self):
        # f = sin, g = cos: exact value from the closed-form integral
        a, b, c2 = self.a, self.b, self.c ** 2
        exact = np.sin(a) * np.cos(a) / (c2 + a) - (np.cos(2 * a) - np.cos(2 * b)) / 4
        errs = []
        for n in (101, 201):
            q = Grid.uniform(a, b, n)
            p = q.points
            val = h1_inner_product(self.k, np.sin(p), np.cos(p), np.cos(p), -np.sin(p), q)
            errs.append(abs(val - exact))
        assert errs[1] < errs[0] / 3.5

    def test_domain_error(self):
        q = Grid.uniform(-1.0, 1.0, 11)
        with pytest.raises(DomainError):
            h1_inner_product(brownian_min(0.0, 1.0), np.ones(11), None, np.ones(11), None, q)

    def test_derivative_one_sided_at_ends(self):
        g = Grid.uniform(0, 1, 5)
        d = derivative(g.points ** 2, g)
        assert d[0] == pytest.approx(0.0625 / 0.25)
        assert d[2] == pytest.approx(1.0)
