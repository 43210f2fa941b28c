"""
Noise calibration: the smallest Laplace scale b whose bound meets a target budget.

The DP budget inverts in closed form. The context-aware bounds are inverted
numerically: geometric bracketing from the DP scale, a coarse monotonicity
check over the bracket, then bisection. Monotonicity of the bounds in b is
assumed, not proven, so a failed check falls back to a dense scan and the
result says so.
"""

import logging
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .bounds import (
    SUBSET_CAP,
    BoundKind,
    PriorClass,
    dp_epsilon,
    exact_pml_bound,
    simplified_pml_bound,
)
from .errors import BracketFailure, DimensionMismatch, InvalidParameterError, NonMonotoneBracket
from .workload import Workload, sensitivity_l1

logger = logging.getLogger(__name__)

DEFAULT_TOL_REL = 1e-6
DEFAULT_MAX_ITERATIONS = 200

# Budgets within this of log(1/alpha) need no noise at all.
VANISHING_NOISE_TOL = 1e-12

MONOTONE_GRID_POINTS = 16
MONOTONE_SLACK = 1e-12
DENSE_SCAN_POINTS = 1025
MAX_EXPANSION = 2.0 ** 64


class CalibrationResult(BaseModel):
    """Minimal noise scale for a target budget, with solver diagnostics."""

    model_config = ConfigDict(frozen=True)

    b_min: float = Field(ge=0.0)
    achieved: Optional[float] = None
    iterations: int = 0
    bound_kind: BoundKind
    monotone_verified: bool = True
    epsilon_target: float

    @property
    def noise_variance(self) -> float:
        """Per-coordinate variance 2*b^2 of the calibrated Laplace noise."""
        return 2.0 * self.b_min ** 2

    def to_record(self) -> Dict[str, Any]:
        return {
            'kind': self.bound_kind.value,
            'epsilon': self.epsilon_target,
            'b_min': self.b_min,
            'achieved_nats': self.achieved,
            'iterations': self.iterations,
            'monotone_verified': self.monotone_verified,
            'noise_variance': self.noise_variance,
        }


def _bound_function(
    workload: Workload,
    prior: PriorClass,
    kind: BoundKind,
    subset_cap: int
) -> Callable[[float], float]:
    if kind == BoundKind.EXACT_PML:
        return lambda b: exact_pml_bound(workload, b, prior, subset_cap=subset_cap).value
    return lambda b: simplified_pml_bound(workload, b, prior).value


def _bracket(bound: Callable[[float], float], eps_target: float, initial: float) -> Tuple[float, float, int]:
    """
    Find lo < hi with bound(lo) > eps_target >= bound(hi) by doubling/halving.

    Raises:
        BracketFailure: If the search moves more than 2^64 away from ``initial``
    """
    steps = 0
    hi = initial
    if bound(hi) > eps_target:
        lo = hi
        while True:
            hi *= 2.0
            steps += 1
            if hi > initial * MAX_EXPANSION:
                raise BracketFailure(f"no b up to {hi:.3g} meets eps={eps_target}")
            if bound(hi) <= eps_target:
                break
            lo = hi
    else:
        lo = hi / 2.0
        steps += 1
        while bound(lo) <= eps_target:
            hi = lo
            lo /= 2.0
            steps += 1
            if lo < initial / MAX_EXPANSION:
                raise BracketFailure(f"bound stays below eps={eps_target} down to b={lo:.3g}")
    logger.debug(f"Bracket for eps={eps_target}: [{lo:.6g}, {hi:.6g}] after {steps} steps")
    return lo, hi, steps


def _verify_monotone(bound: Callable[[float], float], lo: float, hi: float):
    """Raise NonMonotoneBracket if the bound increases in b anywhere on a coarse grid."""
    grid = np.geomspace(lo, hi, MONOTONE_GRID_POINTS)
    values = np.array([bound(b) for b in grid])
    increases = np.diff(values)
    worst = int(np.argmax(increases))
    if increases[worst] > MONOTONE_SLACK:
        raise NonMonotoneBracket(
            f"bound rises by {increases[worst]:.3g} between b={grid[worst]:.6g} and b={grid[worst + 1]:.6g}"
        )


def _dense_scan(bound: Callable[[float], float], eps_target: float, lo: float, hi: float) -> float:
    """Smallest grid point in [lo, hi] whose bound meets the target."""
    grid = np.geomspace(lo, hi, DENSE_SCAN_POINTS)
    for b in grid:
        if bound(b) <= eps_target:
            return float(b)
    return float(hi)


def min_noise_for_epsilon(
    workload: Workload,
    eps_target: float,
    prior: Optional[PriorClass] = None,
    kind: BoundKind = BoundKind.EXACT_PML,
    tol_rel: float = DEFAULT_TOL_REL,
    subset_cap: int = SUBSET_CAP,
    max_iterations: int = DEFAULT_MAX_ITERATIONS
) -> CalibrationResult:
    """
    Minimal Laplace scale such that the chosen bound is at most ``eps_target``.

    Args:
        workload: The query workload
        eps_target: Target budget in nats (> 0)
        prior: Prior family; required for the PML kinds, must be None for dp
        kind: exact_pml, simplified_pml or dp
        tol_rel: Relative bracket width at which bisection stops, in (0, 1e-2]
        subset_cap: Passed to the exact bound
        max_iterations: Cap on bisection steps

    Returns:
        CalibrationResult; b_min = 0 when no noise is needed

    Raises:
        BracketFailure: If no bracket is found within 2^64 of the DP scale
    """
    kind = BoundKind(kind)
    if not (np.isfinite(eps_target) and eps_target > 0):
        raise InvalidParameterError(f"eps_target must be positive, got {eps_target}")
    if not (0 < tol_rel <= 1e-2):
        raise InvalidParameterError(f"tol_rel must lie in (0, 1e-2], got {tol_rel}")
    if kind == BoundKind.TRIVIAL:
        raise InvalidParameterError("the trivial bound does not depend on b and cannot be calibrated")

    sensitivity = sensitivity_l1(workload).value

    if kind == BoundKind.DP:
        if prior is not None:
            raise InvalidParameterError("dp calibration takes no prior")
        if sensitivity == 0:
            return CalibrationResult(b_min=0.0, bound_kind=kind, epsilon_target=eps_target)
        b_min = sensitivity / eps_target
        return CalibrationResult(
            b_min=b_min,
            achieved=dp_epsilon(workload, b_min).value,
            bound_kind=kind,
            epsilon_target=eps_target,
        )

    if prior is None:
        raise InvalidParameterError(f"{kind.value} calibration needs a prior")
    if prior.k != workload.k:
        raise DimensionMismatch(f"prior has k={prior.k} but workload has k={workload.k}")

    ceiling = float(-np.log(prior.alpha))
    if eps_target >= ceiling - VANISHING_NOISE_TOL or sensitivity == 0:
        logger.info(f"eps={eps_target} reaches log(1/alpha)={ceiling:.6g} or workload is constant; no noise needed")
        return CalibrationResult(b_min=0.0, bound_kind=kind, epsilon_target=eps_target)

    bound = _bound_function(workload, prior, kind, subset_cap)
    lo, hi, steps = _bracket(bound, eps_target, sensitivity / eps_target)

    try:
        _verify_monotone(bound, lo, hi)
    except NonMonotoneBracket as e:
        logger.warning(f"{e.detail}; falling back to a dense scan over the bracket")
        b_min = _dense_scan(bound, eps_target, lo, hi)
        return CalibrationResult(
            b_min=b_min,
            achieved=bound(b_min),
            iterations=steps + DENSE_SCAN_POINTS,
            bound_kind=kind,
            monotone_verified=False,
            epsilon_target=eps_target,
        )

    iterations = 0
    # half width keeps the returned b_min within tol_rel of the true minimum
    while hi - lo > 0.5 * tol_rel * lo and iterations < max_iterations:
        mid = 0.5 * (lo + hi)
        if bound(mid) > eps_target:
            lo = mid
        else:
            hi = mid
        iterations += 1

    achieved = bound(hi)
    logger.info(f"Calibrated {kind.value} for eps={eps_target}: b_min={hi:.9g} (achieved {achieved:.9g})")
    return CalibrationResult(
        b_min=hi,
        achieved=achieved,
        iterations=steps + iterations,
        bound_kind=kind,
        monotone_verified=True,
        epsilon_target=eps_target,
    )
