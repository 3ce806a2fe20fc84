import math

import numpy as np
import pytest

from shrinkage_priors.exceptions import InputError, QuadratureError
from shrinkage_priors.quadrature import QuadratureConfig, log_integrate, log_integrate_halfline


class TestConfig:
    def test_defaults(self):
        cfg = QuadratureConfig()
        assert cfg.relative_tolerance == 1e-10
        assert cfg.max_refinements == 30

    @pytest.mark.parametrize("tol", [0.0, -1e-8, 1e-3])
    def test_bad_tolerance(self, tol):
        with pytest.raises(ValueError):
            QuadratureConfig(relative_tolerance=tol)

    def test_bad_refinements(self):
        with pytest.raises(ValueError):
            QuadratureConfig(max_refinements=4)


class TestLine:
    def test_gaussian(self):
        out = log_integrate(lambda s: -0.5 * s * s)
        assert out == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-12)

    def test_gamma_in_log_variable(self):
        # int_0^inf t^(k-1) e^-t dt = Gamma(k), with t = e^s
        for k in (0.3, 1.0, 4.5):
            out = log_integrate(lambda s, k=k: k * s - np.exp(s))
            assert out == pytest.approx(math.lgamma(k), abs=1e-10)

    def test_rows_share_grid(self):
        scales = np.array([0.5, 1.0, 3.0])
        out = log_integrate(lambda s: -0.5 * (s[None, :] / scales[:, None]) ** 2)
        np.testing.assert_allclose(out, np.log(scales * math.sqrt(2 * math.pi)), atol=1e-12)

    def test_far_window(self):
        out = log_integrate(lambda s: -0.5 * (s - 400.0) ** 2)
        assert out == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-12)

    def test_huge_magnitudes_stay_finite(self):
        out = log_integrate(lambda s: 800.0 - 0.5 * s * s)
        assert out == pytest.approx(800.0 + 0.5 * math.log(2 * math.pi), rel=1e-14)

    def test_nan_is_input_error(self):
        with pytest.raises(InputError):
            log_integrate(lambda s: np.where(s > 0, np.nan, -s * s))

    def test_nonconvergence_reports_estimates(self):
        cfg = QuadratureConfig(relative_tolerance=1e-12, max_refinements=5)
        with pytest.raises(QuadratureError) as info:
            log_integrate(lambda s: -np.abs(s - 0.123), cfg)
        assert info.value.estimates is not None
        assert len(info.value.estimates) == 2


class TestHalfLine:
    def test_exponential_tail(self):
        out = log_integrate_halfline(lambda s: -s, 0.0, 1)
        assert out == pytest.approx(0.0, abs=1e-11)

    def test_split_adds_up(self):
        f = lambda s: -0.5 * s * s
        upper = log_integrate_halfline(f, 0.7, 1)
        lower = log_integrate_halfline(f, 0.7, -1)
        total = np.exp(upper) + np.exp(lower)
        assert total == pytest.approx(math.sqrt(2 * math.pi), rel=1e-11)

    def test_bad_side(self):
        with pytest.raises(ValueError):
            log_integrate_halfline(lambda s: -s * s, 0.0, 0)
