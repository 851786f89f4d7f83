import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpdeconv import (DimensionError, FilterSpec, KernelSpec, ParameterError,
                      UnsupportedOperationError, discretize_filter,
                      eval_filter, eval_kernel, filter_from_dict,
                      filter_transfer, kernel_from_dict, kernel_psd)
from helpers import numeric_ft

ALL_KERNELS = [
    KernelSpec.se(1.0, 1.0),
    KernelSpec.se(0.7, rate=10.0),
    KernelSpec.sinc(1.0, 2.0),
    KernelSpec.sinc(1.4, 0.5),
    KernelSpec.sm(1.0, rate=50.0, frequency=1.0),
    KernelSpec.sm(0.5, 0.3, frequency=2.5),
]


class TestEvalKernel:
    def test_se_at_zero(self):
        assert eval_kernel(KernelSpec.se(1.0, 1.0), 0.0) == 1.0

    def test_se_rate_parameterization(self):
        # rate gamma = 10 corresponds to lengthscale sqrt(0.05)
        spec = KernelSpec.se(1.0, rate=10.0)
        assert spec.lengthscale == pytest.approx(math.sqrt(0.05))
        assert eval_kernel(spec, 0.1) == pytest.approx(math.exp(-0.1), abs=1e-12)

    def test_sinc_zero_of_sine(self):
        assert eval_kernel(KernelSpec.sinc(1.0, 2.0), 0.5) == pytest.approx(0.0, abs=1e-15)

    def test_sinc_exact_peak(self):
        spec = KernelSpec.sinc(1.7, 2.0)
        assert eval_kernel(spec, 0.0) == spec.sigma**2

    def test_sinc_series_branch_is_smooth(self):
        spec = KernelSpec.sinc(1.0, 2.0)
        # series branch agrees with the true value and is continuous at the cutoff
        for t in (0.0, 1e-10, 1e-9, 1e-8):
            assert eval_kernel(spec, t) == pytest.approx(1.0, abs=1e-13)
        cutoff = 1e-6 / (np.pi * spec.width)
        below = eval_kernel(spec, cutoff * (1 - 1e-9))
        above = eval_kernel(spec, cutoff * (1 + 1e-9))
        assert abs(below - above) < 1e-14

    def test_sm_at_zero(self):
        assert eval_kernel(KernelSpec.sm(1.0, rate=50.0, frequency=1.0), 0.0) == 1.0

    def test_2d_se_euclidean(self):
        spec = KernelSpec.se(1.0, 1.0, dim=2)
        assert eval_kernel(spec, np.array([3.0, 4.0])) == pytest.approx(np.exp(-12.5))

    def test_2d_requires_se(self):
        with pytest.raises(DimensionError):
            KernelSpec(kind="sinc", sigma=1.0, width=1.0, dim=2)

    def test_invalid_parameters(self):
        with pytest.raises(ParameterError):
            KernelSpec.se(-1.0, 1.0)
        with pytest.raises(ParameterError):
            KernelSpec.se(1.0, 0.0)
        with pytest.raises(ParameterError):
            KernelSpec.sm(1.0, 1.0, frequency=-0.5)
        with pytest.raises(ParameterError):
            KernelSpec.se(1.0, lengthscale=1.0, rate=2.0)

    @given(st.floats(-50.0, 50.0))
    @settings(max_examples=200, deadline=None)
    def test_evenness_property(self, lag):
        for spec in ALL_KERNELS:
            assert abs(eval_kernel(spec, lag) - eval_kernel(spec, -lag)) < 1e-12

    def test_peak_dominates(self):
        rng = np.random.default_rng(0)
        lags = rng.uniform(-20, 20, size=1000)
        for spec in ALL_KERNELS:
            vals = eval_kernel(spec, lags)
            assert np.all(np.abs(vals) <= spec.sigma**2 + 1e-12)


class TestEvalFilter:
    def test_triangular_values(self):
        spec = FilterSpec.triangular(1.0, 2.0)
        assert eval_filter(spec, 0.0) == 1.0
        assert eval_filter(spec, 1.0) == 0.0
        assert eval_filter(spec, 0.5) == 0.5

    def test_discrete_filter_rejected(self):
        with pytest.raises(UnsupportedOperationError):
            eval_filter(FilterSpec.dirac(), 0.0)

    def test_discrete_locations_must_increase(self):
        with pytest.raises(ParameterError):
            FilterSpec.discrete([1.0, 1.0], [0.5, 0.5])

    def test_negative_weights_allowed(self):
        spec = FilterSpec.discrete([-0.5, 1.5], [0.0, 1.0])
        assert spec.weights[0] == -0.5


class TestTransforms:
    def test_se_psd_at_zero(self):
        assert kernel_psd(KernelSpec.se(1.0, 1.0), 0.0) == pytest.approx(
            math.sqrt(2 * math.pi), abs=1e-12)

    def test_sinc_psd_rectangle(self):
        spec = KernelSpec.sinc(1.0, 2.0)
        assert kernel_psd(spec, 1.5) == 0.0
        assert kernel_psd(spec, 0.0) == pytest.approx(0.5)

    def test_psd_nonnegative_on_grid(self):
        xi = np.linspace(-8.0, 8.0, 1024)
        for spec in ALL_KERNELS:
            assert np.all(kernel_psd(spec, xi) >= 0.0)

    def test_triangular_transfer_dc_is_area(self):
        spec = FilterSpec.triangular(1.0, 2.0)
        assert filter_transfer(spec, 0.0) == pytest.approx(1.0)
        # quadrature of the triangle itself
        t = np.linspace(-1, 1, 100001)
        area = np.trapezoid(eval_filter(spec, t), t)
        assert abs(filter_transfer(spec, 0.0).real - area) < 1e-8

    def test_dirac_transfer_is_flat(self):
        spec = FilterSpec.dirac()
        for xi in (0.0, 0.3, 11.0):
            assert filter_transfer(spec, xi) == pytest.approx(1.0 + 0.0j)

    def test_two_tap_transfer(self):
        spec = FilterSpec.discrete([0.5, 0.5], [-0.5, 0.5])
        got = filter_transfer(spec, 1.0)
        # brute-force complex sum
        want = 0.5 * np.exp(-2j * np.pi * -0.5) + 0.5 * np.exp(-2j * np.pi * 0.5)
        assert got == pytest.approx(want, abs=1e-12)
        assert got.real == pytest.approx(-1.0, abs=1e-12)

    def test_kernel_psd_matches_fft_oracle(self):
        cases = [
            (KernelSpec.se(1.0, 1.0), 30.0, 0.01, False, 1.2),
            (KernelSpec.sm(1.0, 0.1, frequency=1.0), 30.0, 0.005, False, 4.0),
        ]
        for spec, half, step, taper, band in cases:
            xi, transform = numeric_ft(lambda t: eval_kernel(spec, t), half, step, taper)
            mask = (np.abs(xi) < band)
            ref = kernel_psd(spec, xi[mask])
            scale = ref.max()
            keep = ref > 1e-6 * scale
            rel = np.abs(transform.real[mask][keep] - ref[keep]) / ref[keep]
            assert rel.max() < 1e-4

    def test_sinc_psd_matches_tapered_fft_away_from_edges(self):
        spec = KernelSpec.sinc(1.0, 2.0)
        xi, transform = numeric_ft(lambda t: eval_kernel(spec, t), 512.0, 0.05, taper=True)
        # the taper smooths the rectangle edge over a few bins; stay clear
        edge = spec.width / 2.0
        mask = (np.abs(xi) < 3.0) & (np.abs(np.abs(xi) - edge) > 0.02)
        err = np.abs(transform.real[mask] - kernel_psd(spec, xi[mask]))
        assert err.max() < 1e-4 * kernel_psd(spec, 0.0)

    def test_filter_transfer_matches_fft_oracle(self):
        cases = [
            (FilterSpec.triangular(1.3, 2.0), 16.0, 0.001),
            (FilterSpec.se(1.0, 0.5), 16.0, 0.001),
        ]
        for spec, half, step in cases:
            xi, transform = numeric_ft(lambda t: eval_filter(spec, t), half, step)
            mask = np.abs(xi) < 4.0
            ref = filter_transfer(spec, xi[mask]).real
            err = np.abs(transform.real[mask] - ref)
            assert err.max() < 1e-4 * np.abs(ref).max()


class TestDiscretize:
    def test_triangular_example(self):
        taps = discretize_filter(FilterSpec.triangular(1.0, 2.0), 5, (-1.0, 1.0))
        np.testing.assert_allclose(taps.locations, [-0.8, -0.4, 0.0, 0.4, 0.8], atol=1e-15)
        np.testing.assert_allclose(taps.weights, [0.08, 0.24, 0.4, 0.24, 0.08], atol=1e-15)

    def test_triangle_area_convergence_rate(self):
        # |sum w - area| = O(1/m^2); the apex cell drives the error
        spec = FilterSpec.triangular(1.0, 2.0)
        area = 1.0
        errors = []
        for m in (5, 50, 500):
            taps = discretize_filter(spec, m, (-1.0, 1.0))
            errors.append(abs(float(np.sum(taps.weights)) - area))
        assert errors[0] == pytest.approx(1 / 25, abs=1e-12)
        assert errors[1] <= errors[0] / 50
        assert errors[2] <= errors[1] / 50

    def test_se_weights_converge_to_gaussian_integral(self):
        spec = FilterSpec.se(1.0, 0.7)
        taps = discretize_filter(spec, 4001, None)
        want = math.sqrt(2 * math.pi * 0.7**2)
        assert float(np.sum(taps.weights)) == pytest.approx(want, rel=1e-10)

    def test_single_node(self):
        taps = discretize_filter(FilterSpec.se(1.0, 1.0), 1, (-0.01, 0.01))
        assert taps.weights[0] == pytest.approx(0.02, rel=1e-4)

    def test_zero_span_rejected(self):
        with pytest.raises(ParameterError):
            discretize_filter(FilterSpec.se(1.0, 1.0), 5, (1.0, 1.0))


class TestSerialization:
    @pytest.mark.parametrize("spec", ALL_KERNELS)
    def test_kernel_round_trip(self, spec):
        back = kernel_from_dict(spec.to_dict())
        assert back == spec

    def test_filter_round_trips(self):
        filters = [
            FilterSpec.se(1.0, 0.5),
            FilterSpec.sinc(1.0, 2.0),
            FilterSpec.triangular(2.0, 1.0),
            FilterSpec.discrete([0.2, 0.8], [-1.0, 2.0]),
            FilterSpec.discrete_grid(np.arange(9.0).reshape(3, 3), grid_step=1.0),
        ]
        for spec in filters:
            back = filter_from_dict(spec.to_dict())
            assert back.kind == spec.kind and back.dim == spec.dim
            if spec.is_discrete:
                np.testing.assert_array_equal(back.weights, spec.weights)
                np.testing.assert_array_equal(back.locations, spec.locations)
            else:
                assert back.to_dict() == spec.to_dict()

    def test_rate_accepted_at_boundary(self):
        spec = kernel_from_dict({"type": "se", "sigma": 1.0, "rate": 10.0, "dim": 1})
        assert spec.lengthscale == pytest.approx(math.sqrt(0.05))

    def test_unknown_fields_rejected(self):
        with pytest.raises(ParameterError):
            kernel_from_dict({"type": "se", "sigma": 1.0, "lengthscale": 1.0, "zap": 2})
