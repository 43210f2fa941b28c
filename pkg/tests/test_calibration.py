"""
Tests for noise calibration.

Tests:
- Closed-form DP calibration
- Identity workload against the inverted closed form
- Vanishing-noise regime
- Ordering of calibrated scales across bound kinds
- Monotonicity fallback and bracket failure
- Argument validation
"""

import math

import pytest

from pmlbound import calibration
from pmlbound.bounds import BoundKind, PriorClass, exact_pml_bound, simplified_pml_bound
from pmlbound.calibration import min_noise_for_epsilon
from pmlbound.errors import BracketFailure, DimensionMismatch, InvalidParameterError, NonMonotoneBracket
from pmlbound.workload import Workload, make_haar_workload, make_histogram_workload


def identity_inverse(eps: float, alpha: float) -> float:
    """b at which -log(alpha + (1 - alpha) exp(-2/b)) equals eps."""
    return -2.0 / math.log((math.exp(-eps) - alpha) / (1.0 - alpha))


@pytest.fixture
def haar8():
    return make_haar_workload(8)


@pytest.fixture
def uniform8():
    return PriorClass.uniform(8)


class TestDPCalibration:
    """Test the closed-form DP inversion."""

    @pytest.mark.parametrize("eps", [0.1, 0.5, 1.0, 2.2])
    def test_haar_sensitivity_over_eps(self, haar8, eps):
        """Test b_min = 6 / eps exactly."""
        result = min_noise_for_epsilon(haar8, eps, kind=BoundKind.DP)
        assert result.b_min == 6.0 / eps
        assert result.achieved == pytest.approx(eps, rel=1e-15)
        assert result.iterations == 0

    def test_prior_not_accepted(self, haar8, uniform8):
        """Test dp calibration refuses a prior."""
        with pytest.raises(InvalidParameterError):
            min_noise_for_epsilon(haar8, 1.0, prior=uniform8, kind=BoundKind.DP)

    def test_constant_workload(self):
        """Test a workload with zero sensitivity needs no noise."""
        result = min_noise_for_epsilon(Workload([[1.0, 1.0]]), 0.5, kind=BoundKind.DP)
        assert result.b_min == 0.0


class TestPMLCalibration:
    """Test numerical inversion of the context-aware bounds."""

    @pytest.mark.parametrize("eps", [0.3, 1.0, 1.8])
    def test_identity_matches_inverse(self, eps, uniform8):
        """Test the calibrated b on I_8 matches the inverted closed form."""
        result = min_noise_for_epsilon(make_histogram_workload(8), eps, prior=uniform8, kind=BoundKind.EXACT_PML)
        expected = identity_inverse(eps, 1.0 / 8)
        assert result.monotone_verified
        assert expected <= result.b_min * (1 + 1e-12)
        assert result.b_min <= expected * (1 + 1e-6)
        assert result.achieved <= eps
        assert result.achieved == pytest.approx(eps, rel=1e-5)

    def test_near_log_one_over_alpha(self, uniform8):
        """Test a budget just below log(1/alpha) still needs a moderate b."""
        eps = math.log(8) - 1e-4
        result = min_noise_for_epsilon(make_histogram_workload(8), eps, prior=uniform8)
        assert result.b_min == pytest.approx(identity_inverse(eps, 1.0 / 8), rel=2e-6)
        assert 0.17 < result.b_min < 0.19

    @pytest.mark.parametrize("kind", [BoundKind.EXACT_PML, BoundKind.SIMPLIFIED_PML])
    @pytest.mark.parametrize("eps", [math.log(8), 2.5, 10.0])
    def test_vanishing_noise(self, haar8, uniform8, kind, eps):
        """Test budgets at or above log(1/alpha) give b_min = 0."""
        result = min_noise_for_epsilon(haar8, eps, prior=uniform8, kind=kind)
        assert result.b_min == 0.0
        assert result.noise_variance == 0.0

    @pytest.mark.parametrize("eps", [0.3, 0.8, 1.4, 2.0])
    def test_ordering_across_kinds(self, haar8, uniform8, eps):
        """Test b_exact <= b_simplified <= b_dp on the Haar workload."""
        exact = min_noise_for_epsilon(haar8, eps, prior=uniform8, kind=BoundKind.EXACT_PML)
        simplified = min_noise_for_epsilon(haar8, eps, prior=uniform8, kind=BoundKind.SIMPLIFIED_PML)
        dp = min_noise_for_epsilon(haar8, eps, kind=BoundKind.DP)
        assert exact.b_min <= simplified.b_min * (1 + 1e-6)
        assert simplified.b_min <= dp.b_min * (1 + 1e-6)

    def test_bound_met_at_b_min(self, haar8, uniform8):
        """Test the bound at b_min is within budget and just above it slightly lower."""
        eps = 1.2
        result = min_noise_for_epsilon(haar8, eps, prior=uniform8, kind=BoundKind.EXACT_PML)
        assert exact_pml_bound(haar8, result.b_min, uniform8).value <= eps
        assert exact_pml_bound(haar8, result.b_min * (1 - 1e-5), uniform8).value > eps

    def test_decreasing_in_eps(self, haar8, uniform8):
        """Test larger budgets need less noise."""
        scales = [
            min_noise_for_epsilon(haar8, eps, prior=uniform8, kind=BoundKind.SIMPLIFIED_PML).b_min
            for eps in (0.2, 0.6, 1.0, 1.6)
        ]
        assert scales == sorted(scales, reverse=True)

    def test_noise_variance_and_record(self, haar8, uniform8):
        """Test the variance view and the flat record."""
        result = min_noise_for_epsilon(haar8, 1.0, prior=uniform8, kind=BoundKind.SIMPLIFIED_PML)
        assert result.noise_variance == pytest.approx(2 * result.b_min ** 2)
        record = result.to_record()
        assert record['kind'] == 'simplified_pml'
        assert record['epsilon'] == 1.0
        assert record['monotone_verified'] is True
        assert record['noise_variance'] == result.noise_variance


class TestCalibrationFailures:
    """Test fallbacks and argument validation."""

    def test_non_monotone_falls_back_to_scan(self, haar8, uniform8, monkeypatch):
        """Test a failed monotonicity check returns an unverified but feasible b."""
        def reject(bound, lo, hi):
            raise NonMonotoneBracket("forced")

        monkeypatch.setattr(calibration, '_verify_monotone', reject)
        result = min_noise_for_epsilon(haar8, 1.0, prior=uniform8)
        assert result.monotone_verified is False
        assert exact_pml_bound(haar8, result.b_min, uniform8).value <= 1.0

    def test_bracket_failure(self, haar8, uniform8, monkeypatch):
        """Test a bound that never meets the target raises BracketFailure."""
        monkeypatch.setattr(calibration, '_bound_function', lambda *args: (lambda b: 50.0))
        with pytest.raises(BracketFailure):
            min_noise_for_epsilon(haar8, 1.0, prior=uniform8)

    def test_trivial_kind_rejected(self, haar8, uniform8):
        """Test the b-independent trivial bound cannot be calibrated."""
        with pytest.raises(InvalidParameterError):
            min_noise_for_epsilon(haar8, 1.0, prior=uniform8, kind=BoundKind.TRIVIAL)

    def test_prior_required(self, haar8):
        """Test PML kinds need a prior."""
        with pytest.raises(InvalidParameterError):
            min_noise_for_epsilon(haar8, 1.0, kind=BoundKind.EXACT_PML)

    def test_prior_dimension(self, haar8):
        """Test a prior for another k is rejected."""
        with pytest.raises(DimensionMismatch):
            min_noise_for_epsilon(haar8, 1.0, prior=PriorClass.uniform(4))

    @pytest.mark.parametrize("eps", [0.0, -1.0, float('nan')])
    def test_invalid_target(self, haar8, uniform8, eps):
        """Test non-positive budgets are rejected."""
        with pytest.raises(InvalidParameterError):
            min_noise_for_epsilon(haar8, eps, prior=uniform8)

    @pytest.mark.parametrize("tol_rel", [0.0, 0.5])
    def test_invalid_tolerance(self, haar8, uniform8, tol_rel):
        """Test tolerances outside (0, 1e-2] are rejected."""
        with pytest.raises(InvalidParameterError):
            min_noise_for_epsilon(haar8, 1.0, prior=uniform8, tol_rel=tol_rel)

    def test_simplified_close_to_exact_bound_value(self, haar8, uniform8):
        """Test the simplified calibration meets its own bound."""
        result = min_noise_for_epsilon(haar8, 0.9, prior=uniform8, kind=BoundKind.SIMPLIFIED_PML)
        assert simplified_pml_bound(haar8, result.b_min, uniform8).value <= 0.9
