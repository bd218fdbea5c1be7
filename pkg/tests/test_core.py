import numpy as np
import pytest

from greymatch import (
    DomainError,
    GREY_FORM,
    ModelSpec,
    ParameterSet,
    PolynomialUnivariate,
    PowerUnivariate,
    QuadraticMultivariate,
    REDUCED_FORM,
    TimeSeries,
    evaluate_basis,
    grey_to_reduced,
    lotka_volterra_spec,
    polynomial_spec,
    reduced_to_grey,
    verhulst_spec,
)
from greymatch.core import basis_jacobian


class TestTimeSeries:
    def test_basic_shape(self):
        ts = TimeSeries([0.0, 1.0, 2.0], [[1.0], [2.0], [3.0]])
        assert ts.n == 3 and ts.d == 1
        assert np.allclose(ts.spacings(), [1.0, 1.0])

    def test_one_dimensional_values_promoted(self):
        ts = TimeSeries([0, 1, 2], [1, 2, 3])
        assert ts.values.shape == (3, 1)

    def test_rejects_nonincreasing_times(self):
        with pytest.raises(ValueError):
            TimeSeries([0, 1, 1], [1, 2, 3])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            TimeSeries([0, 1, 2], [1, np.nan, 3])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            TimeSeries([0, 1], [1, 2, 3])

    def test_values_read_only(self):
        ts = TimeSeries([0, 1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            ts.values[0, 0] = 99.0


class TestBases:
    def test_polynomial_direct(self):
        assert np.allclose(evaluate_basis(PolynomialUnivariate(3), [2.0]), [4.0, 8.0])

    def test_quadratic_direct(self):
        assert np.allclose(evaluate_basis(QuadraticMultivariate(2), [1.0, 3.0]),
                           [1.0, 3.0, 9.0])

    def test_power_scalar(self):
        # independent oracle: exp/log composition
        import math
        expected = math.exp(0.63 * math.log(1001.65))
        got = evaluate_basis(PowerUnivariate(0.63), [1001.65])
        assert got.shape == (1,)
        assert abs(got[0] - expected) < 1e-9 * expected

    def test_power_domain_error(self):
        with pytest.raises(DomainError):
            evaluate_basis(PowerUnivariate(0.5), [-1.0])
        with pytest.raises(DomainError):
            evaluate_basis(PowerUnivariate(0.5), [0.0])
        # integer exponents accept any sign
        assert np.allclose(evaluate_basis(PowerUnivariate(2.0), [-3.0]), [9.0])

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_quadratic_size_and_order(self, d):
        basis = QuadraticMultivariate(d)
        assert basis.size == d * (d + 1) // 2
        y = np.arange(1.0, d + 1.0)
        values = evaluate_basis(basis, y)
        expected = [y[i] * y[j] for i in range(d) for j in range(i, d)]
        assert np.allclose(values, expected)

    def test_empty_basis(self):
        assert evaluate_basis(None, [1.0]).size == 0

    @pytest.mark.parametrize("basis,point", [
        (PolynomialUnivariate(4), [0.7]),
        (PowerUnivariate(0.63), [2.1]),
        (QuadraticMultivariate(3), [0.4, -1.2, 2.0]),
    ])
    def test_jacobian_matches_finite_differences(self, basis, point):
        y = np.asarray(point, dtype=float)
        jac = basis_jacobian(basis, y)
        eps = 1e-7
        for j in range(y.size):
            bumped = y.copy()
            bumped[j] += eps
            col = (evaluate_basis(basis, bumped) - evaluate_basis(basis, y)) / eps
            assert np.allclose(jac[:, j], col, atol=1e-5)


class TestModelSpec:
    def test_dimension_consistency(self):
        with pytest.raises(ValueError):
            ModelSpec(2, PolynomialUnivariate(2))

    def test_regressor_count(self):
        assert verhulst_spec().n_regressors == 2
        assert polynomial_spec(3, include_constant=True).n_regressors == 4
        assert ModelSpec(1, None, include_constant=True).n_regressors == 2

    def test_lv_spec_masks(self):
        spec = lotka_volterra_spec()
        assert np.array_equal(spec.linear_mask(), np.eye(2, dtype=bool))
        assert np.array_equal(spec.nonlinear_mask(),
                              [[False, True, False], [False, True, False]])

    def test_mask_shape_validation(self):
        with pytest.raises(ValueError):
            ModelSpec(2, QuadraticMultivariate(2), theta_L_mask=[[True, False]])


class TestFormConversions:
    def test_verhulst_initial_state(self):
        spec = verhulst_spec()
        grey = ParameterSet([[1.2]], [[-0.5]], [0.4], beta=[0.0], form=GREY_FORM)
        reduced = grey_to_reduced(grey, spec)
        assert reduced.form == REDUCED_FORM
        # implied state start: eta_x = a eta + b eta^2 = 0.48 - 0.08
        assert np.allclose(reduced.initial_state(), [0.4])

    def test_linear_case(self):
        spec = ModelSpec(1, None)
        grey = ParameterSet([[0.7]], np.zeros((1, 0)), [2.0], form=GREY_FORM)
        reduced = grey_to_reduced(grey, spec)
        assert np.allclose(reduced.initial_state(), [1.4])

    def test_constant_only_to_grey(self):
        spec = ModelSpec(1, None, include_constant=True)
        reduced = ParameterSet([[0.0]], np.zeros((1, 0)), [3.0], form=REDUCED_FORM)
        grey = reduced_to_grey(reduced, spec)
        assert np.allclose(grey.beta, [3.0])

    def test_verhulst_reconstruction_beta(self):
        spec = verhulst_spec()
        reduced = ParameterSet([[1.2]], [[-0.5]], [0.4], form=REDUCED_FORM)
        grey = reduced_to_grey(reduced, spec)
        # beta = eta - a eta - b eta^2 = 0.4 - 0.48 + 0.08
        assert abs(grey.beta[0]) < 1e-15

    def test_grey_reduced_round_trip_random(self):
        rng = np.random.default_rng(7)
        spec = polynomial_spec(4, include_constant=True)
        for _ in range(50):
            grey = ParameterSet(rng.normal(size=(1, 1)), rng.normal(size=(1, 3)),
                                rng.uniform(0.2, 2.0, size=1),
                                beta=rng.normal(size=1), form=GREY_FORM)
            back = reduced_to_grey(grey_to_reduced(grey, spec), spec)
            assert np.allclose(back.theta_L, grey.theta_L, rtol=1e-12)
            assert np.allclose(back.theta_N, grey.theta_N, rtol=1e-12)
            assert np.allclose(back.eta, grey.eta, rtol=1e-12)
            assert np.allclose(back.beta, grey.beta, rtol=1e-12, atol=1e-12)

    def test_reduced_round_trip_random_quadratic(self):
        rng = np.random.default_rng(8)
        d = 3
        spec = ModelSpec(d, QuadraticMultivariate(d))
        p = spec.p
        for _ in range(50):
            reduced = ParameterSet(rng.normal(size=(d, d)), rng.normal(size=(d, p)),
                                   rng.normal(size=d), form=REDUCED_FORM)
            back = grey_to_reduced(reduced_to_grey(reduced, spec), spec)
            assert np.allclose(back.eta, reduced.eta, rtol=1e-12)
            assert np.allclose(back.initial_state(), reduced.initial_state(),
                               rtol=1e-12, atol=1e-12)

    def test_form_checks(self):
        spec = verhulst_spec()
        reduced = ParameterSet([[1.0]], [[1.0]], [1.0], form=REDUCED_FORM)
        with pytest.raises(ValueError):
            grey_to_reduced(reduced, spec)
        grey = ParameterSet([[1.0]], [[1.0]], [1.0], form=GREY_FORM)
        with pytest.raises(ValueError):
            reduced_to_grey(grey, spec)
