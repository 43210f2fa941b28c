"""
Leakage bounds for linear workloads released by the Laplace mechanism.

This module provides:
- The prior family (``PriorClass``) and the ``BoundResult`` record
- The exact context-aware bound, maximised over all 2^m row subsets
- The simplified pairwise bound, the DP budget and the trivial bound
- Witness helpers: subset coefficients, the DP witness subset and the
  extremal prior that attains the exact bound

All values are in nats. Every mixture is evaluated in the log domain with
the largest exponent factored out, so results stay finite for any b > 0.
"""

import logging
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import logsumexp

from .errors import DimensionMismatch, InvalidParameterError, SubsetExplosion
from .workload import Workload, pairwise_column_distances, sensitivity_l1

logger = logging.getLogger(__name__)

SUBSET_CAP = 20

# Subset coefficients held in memory per Gray-code chunk (rows x classes).
_CHUNK_ELEMENTS = 1 << 22

_TIE_RELATIVE = 1e-12


class BoundKind(str, Enum):
    """Which bound a result (or a calibration) refers to."""
    EXACT_PML = "exact_pml"
    SIMPLIFIED_PML = "simplified_pml"
    DP = "dp"
    TRIVIAL = "trivial"


class PriorClass(BaseModel):
    """The prior family in which every class has probability at least ``alpha``."""

    model_config = ConfigDict(frozen=True)

    alpha: float
    k: int = Field(ge=2)

    @model_validator(mode='after')
    def _alpha_in_range(self):
        # alpha = 1/k is legal; allow for the rounding of 1/k itself
        if not (0.0 < self.alpha <= (1.0 / self.k) * (1.0 + 1e-12)):
            raise ValueError(f"alpha must lie in (0, 1/k] = (0, {1.0 / self.k:.6g}], got {self.alpha}")
        return self

    @property
    def excess_weight(self) -> float:
        """1 - k*alpha, the mass left after every class receives alpha."""
        return max(0.0, 1.0 - self.k * self.alpha)

    @classmethod
    def uniform(cls, k: int) -> "PriorClass":
        return cls(alpha=1.0 / k, k=k)


class BoundWitness(BaseModel):
    """Maximiser of a bound: a row subset (as bitmask) with its extreme classes, or a column pair."""

    model_config = ConfigDict(frozen=True)

    subset_mask: Optional[int] = None
    argmin_class: Optional[int] = None
    argmax_class: Optional[int] = None
    pair: Optional[Tuple[int, int]] = None

    def subset(self) -> Tuple[int, ...]:
        return mask_to_subset(self.subset_mask) if self.subset_mask is not None else ()

    def encode(self) -> str:
        """Flat encoding: bitmask integer for subsets, ``j1:j2`` for pairs."""
        if self.subset_mask is not None:
            return str(self.subset_mask)
        if self.pair is not None:
            return f"{self.pair[0]}:{self.pair[1]}"
        return ""


class BoundResult(BaseModel):
    """A leakage bound in nats, with the witness that attains it."""

    model_config = ConfigDict(frozen=True)

    value: float = Field(ge=0.0)
    kind: BoundKind
    witness: BoundWitness = Field(default_factory=BoundWitness)
    alpha: Optional[float] = None
    b: Optional[float] = None

    def to_record(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'value_nats': self.value,
            'alpha': self.alpha,
            'b': self.b,
            'witness': self.witness.encode(),
            'argmin_class': self.witness.argmin_class,
            'argmax_class': self.witness.argmax_class,
        }


def _check_scale(b: float):
    if not (np.isfinite(b) and b > 0):
        raise InvalidParameterError(f"noise scale b must be a positive finite number, got {b}")


def _check_prior(workload: Workload, prior: PriorClass):
    if prior.k != workload.k:
        raise DimensionMismatch(f"prior has k={prior.k} but workload has k={workload.k}")


def _tie_tolerance(value: float) -> float:
    return _TIE_RELATIVE * max(1.0, abs(value))


def subset_to_mask(subset: Iterable[int], m: int) -> int:
    """Encode a row subset as a bitmask (bit l set iff row l is in the subset)."""
    mask = 0
    for l in subset:
        if not 0 <= l < m:
            raise DimensionMismatch(f"row index {l} out of range for m={m}")
        mask |= 1 << l
    return mask


def mask_to_subset(mask: int) -> Tuple[int, ...]:
    """Sorted row indices whose bits are set in ``mask``."""
    return tuple(l for l in range(mask.bit_length()) if mask >> l & 1)


def _coefficients_for_mask(w: np.ndarray, mask: int) -> np.ndarray:
    bits = (mask >> np.arange(w.shape[0])) & 1
    signs = 2.0 * bits - 1.0
    return signs @ w


def subset_coefficients(workload: Workload, subset: Iterable[int]) -> np.ndarray:
    """c_j for every class j: rows in the subset count +w, the rest count -w."""
    mask = subset_to_mask(subset, workload.m)
    return _coefficients_for_mask(workload.entries, mask)


def subset_coefficient(workload: Workload, subset: Iterable[int], j: int) -> float:
    """
    Signed column sum of class ``j`` over a row subset.

    Args:
        workload: The query workload
        subset: Row indices I
        j: Class index

    Returns:
        sum_{l in I} w[l, j] - sum_{l not in I} w[l, j]
    """
    workload.column(j)
    return float(subset_coefficients(workload, subset)[j])


def _log_ratio(coefficients: np.ndarray, b: float, prior: PriorClass) -> np.ndarray:
    """
    Exact bound expression for a batch of subsets.

    ``coefficients`` is (subsets x k). With c_min and c_max per row, the value
    is -log(alpha * sum_j exp(-(c_j - c_min)/b) + (1 - k*alpha) * exp(-(c_max - c_min)/b)).
    """
    c_min = coefficients.min(axis=1, keepdims=True)
    spread = (coefficients.max(axis=1, keepdims=True) - c_min) / b
    terms = np.concatenate([-(coefficients - c_min) / b, -spread], axis=1)
    weights = np.append(np.full(coefficients.shape[1], prior.alpha), prior.excess_weight)
    values = -logsumexp(terms, axis=1, b=weights)
    return np.maximum(values, 0.0)


def evaluate_subset(workload: Workload, b: float, prior: PriorClass, subset: Iterable[int]) -> float:
    """Exact bound expression at a single row subset, computed from scratch."""
    _check_scale(b)
    _check_prior(workload, prior)
    coefficients = subset_coefficients(workload, subset)
    return float(_log_ratio(coefficients[None, :], b, prior)[0])


def _scan_chunk(w: np.ndarray, b: float, prior: PriorClass, start: int, stop: int) -> Tuple[float, int]:
    """
    Best subset among Gray-code positions [start, stop).

    The chunk is anchored by computing c from scratch at its first subset;
    every later subset toggles one row, so c moves by +/-2 * w[row].
    """
    counter = np.arange(start, stop, dtype=np.int64)
    gray = counter ^ (counter >> 1)
    anchor = _coefficients_for_mask(w, int(gray[0]))

    if len(counter) > 1:
        steps = counter[1:]
        flipped_bit = np.rint(np.log2(steps & -steps)).astype(np.int64)
        entering = (gray[1:] >> flipped_bit) & 1
        deltas = np.where(entering == 1, 2.0, -2.0)[:, None] * w[flipped_bit]
        coefficients = np.vstack([anchor, anchor + np.cumsum(deltas, axis=0)])
    else:
        coefficients = anchor[None, :]

    values = _log_ratio(coefficients, b, prior)
    best = float(values.max())
    near_best = values >= best - _tie_tolerance(best)
    return best, int(gray[near_best].min())


def _merge_witness(best: Optional[Tuple[float, int]], candidate: Tuple[float, int]) -> Tuple[float, int]:
    """Keep the larger value; values within tolerance go to the smaller bitmask."""
    if best is None:
        return candidate
    tolerance = _tie_tolerance(max(best[0], candidate[0]))
    if candidate[0] > best[0] + tolerance:
        return candidate
    if best[0] > candidate[0] + tolerance:
        return best
    return max(best[0], candidate[0]), min(best[1], candidate[1])


def exact_pml_bound(
    workload: Workload,
    b: float,
    prior: PriorClass,
    subset_cap: int = SUBSET_CAP
) -> BoundResult:
    """
    Exact worst-case leakage over the prior family, maximised over all row subsets.

    Args:
        workload: The query workload (m <= subset_cap)
        b: Laplace noise scale
        prior: Prior family with minimum class probability alpha
        subset_cap: Largest m for which 2^m subsets are enumerated

    Returns:
        BoundResult of kind exact_pml; the witness holds the maximising subset
        (smallest bitmask on ties) and its argmin/argmax classes

    Raises:
        SubsetExplosion: If m exceeds subset_cap
    """
    _check_scale(b)
    _check_prior(workload, prior)
    if workload.m > subset_cap:
        raise SubsetExplosion(
            f"exact bound enumerates 2^{workload.m} subsets; m={workload.m} exceeds subset_cap={subset_cap}"
        )

    w = workload.entries
    total = 1 << workload.m
    chunk = max(1, min(total, _CHUNK_ELEMENTS // workload.k))

    best = None
    for start in range(0, total, chunk):
        best = _merge_witness(best, _scan_chunk(w, b, prior, start, min(start + chunk, total)))
        logger.debug(f"Subset scan {min(start + chunk, total)}/{total}: best={best[0]:.6g} mask={best[1]}")

    mask = best[1]
    coefficients = _coefficients_for_mask(w, mask)
    value = float(_log_ratio(coefficients[None, :], b, prior)[0])

    # The pairwise bound dominates; never exceed it by rounding alone.
    ceiling = float(_pairwise_values(workload, b, prior).max())
    if ceiling < value <= ceiling + _tie_tolerance(ceiling):
        value = ceiling

    witness = BoundWitness(
        subset_mask=mask,
        argmin_class=int(np.argmin(coefficients)),
        argmax_class=int(np.argmax(coefficients)),
    )
    logger.info(f"Exact PML bound b={b} alpha={prior.alpha}: {value:.6g} nats (subset mask {mask})")
    return BoundResult(value=value, kind=BoundKind.EXACT_PML, witness=witness, alpha=prior.alpha, b=b)


def _pairwise_values(workload: Workload, b: float, prior: PriorClass) -> np.ndarray:
    """k x k table of the pairwise bound expression, indexed by (j1, j2)."""
    delta = pairwise_column_distances(workload) / b
    log_mass = np.log(prior.alpha) + logsumexp(-delta, axis=0)
    terms = np.stack([np.broadcast_to(log_mass[:, None], delta.shape), -delta], axis=2)
    return np.maximum(-logsumexp(terms, axis=2, b=np.array([1.0, prior.excess_weight])), 0.0)


def simplified_pml_bound(workload: Workload, b: float, prior: PriorClass) -> BoundResult:
    """
    Pairwise upper bound on the exact bound, O(k^2 m).

    For every ordered pair (j1, j2) evaluates
    -log(alpha * sum_j exp(-Delta_{j,j1}) + (1 - k*alpha) * exp(-Delta_{j1,j2}))
    with Delta = column l1 distance / b, and returns the maximum. Ties go to
    the lexicographically smallest pair.
    """
    _check_scale(b)
    _check_prior(workload, prior)

    values = _pairwise_values(workload, b, prior)
    j1, j2 = divmod(int(np.argmax(values)), workload.k)
    value = float(values[j1, j2])
    logger.info(f"Simplified PML bound b={b} alpha={prior.alpha}: {value:.6g} nats (pair {j1}:{j2})")
    return BoundResult(
        value=value,
        kind=BoundKind.SIMPLIFIED_PML,
        witness=BoundWitness(pair=(j1, j2)),
        alpha=prior.alpha,
        b=b,
    )


def dp_epsilon(workload: Workload, b: float) -> BoundResult:
    """Context-free DP budget: l1 sensitivity / b, witnessed by the farthest column pair."""
    _check_scale(b)
    sensitivity = sensitivity_l1(workload)
    return BoundResult(
        value=sensitivity.value / b,
        kind=BoundKind.DP,
        witness=BoundWitness(pair=sensitivity.pair),
        b=b,
    )


def trivial_bound(prior: PriorClass) -> BoundResult:
    """log(1/alpha): leakage of releasing a record with no noise at all."""
    return BoundResult(value=float(-np.log(prior.alpha)), kind=BoundKind.TRIVIAL, alpha=prior.alpha)


def dp_witness_subset(workload: Workload, j1: int, j2: int) -> Tuple[int, ...]:
    """
    Rows where class j1 weighs at least as much as class j2.

    For this subset c_{j1} - c_{j2} equals ||w[:, j1] - w[:, j2]||_1, the
    largest value the difference takes over all subsets.
    """
    first, second = workload.column(j1), workload.column(j2)
    return tuple(int(l) for l in np.flatnonzero(first >= second))


def build_extremal_prior(coefficients: Sequence[float], prior: PriorClass) -> np.ndarray:
    """
    Prior in the family that minimises sum_j p_j exp(-c_j / b) for any b.

    Every class gets alpha; the remaining 1 - (k-1)*alpha goes to the class
    with the largest coefficient (smallest index on ties).
    """
    c = np.asarray(coefficients, dtype=float)
    if c.shape != (prior.k,):
        raise DimensionMismatch(f"expected {prior.k} coefficients, got shape {c.shape}")
    p = np.full(prior.k, prior.alpha)
    p[int(np.argmax(c))] = 1.0 - (prior.k - 1) * prior.alpha
    return p


def simplified_tightness_check(
    workload: Workload,
    b: float,
    prior: PriorClass,
    tol: float = 1e-9,
    subset_cap: int = SUBSET_CAP
) -> bool:
    """True when the simplified bound coincides with the exact bound to within ``tol``."""
    exact = exact_pml_bound(workload, b, prior, subset_cap=subset_cap)
    simplified = simplified_pml_bound(workload, b, prior)
    return abs(exact.value - simplified.value) <= tol


def dp_convergence_profile(
    workload: Workload,
    b: float,
    alphas: Iterable[float],
    subset_cap: int = SUBSET_CAP
) -> List[Dict[str, float]]:
    """
    Both context-aware bounds and their distance to the DP budget along an alpha grid.

    As alpha shrinks the bounds approach the DP budget from below.
    """
    dp = dp_epsilon(workload, b).value
    profile = []
    for alpha in alphas:
        prior = PriorClass(alpha=alpha, k=workload.k)
        exact = exact_pml_bound(workload, b, prior, subset_cap=subset_cap).value
        simplified = simplified_pml_bound(workload, b, prior).value
        profile.append({
            'alpha': alpha,
            'exact_pml': exact,
            'simplified_pml': simplified,
            'dp': dp,
            'exact_gap': dp - exact,
            'simplified_gap': dp - simplified,
        })
    return profile
