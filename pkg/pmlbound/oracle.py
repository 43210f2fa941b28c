"""
Exact small-instance leakage oracle.

This module provides:
- Enumeration of histograms of n records over k classes and their
  multinomial weights under an i.i.d. prior
- Exact output densities of the Laplace mechanism, unconditional and with
  the first record pinned to a class, computed in the log domain
- Pointwise leakage of the first record at an output y
- A seeded sampler for the mechanism
- ``certify_bound``: randomised dominance checks plus the attainment
  construction for the exact bound

Records are i.i.d., so leakage about the first record stands for every record.
"""

import logging
from functools import lru_cache
from math import comb
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import gammaln, logsumexp, xlogy

from .bounds import (
    SUBSET_CAP,
    PriorClass,
    build_extremal_prior,
    exact_pml_bound,
    subset_coefficients,
)
from .errors import DimensionMismatch, EnumerationTooLarge, InvalidParameterError
from .workload import RNG_NAME, Workload

logger = logging.getLogger(__name__)

ENUMERATION_CAP = 10 ** 6
DOMINANCE_SLACK = 1e-9

# Upper bound on (trials x states x queries) held in memory per batch.
_BATCH_ELEMENTS = 1 << 22


class HistogramState(BaseModel):
    """Class counts of a dataset: nonnegative integers summing to n."""

    model_config = ConfigDict(frozen=True)

    counts: Tuple[int, ...]

    @model_validator(mode='after')
    def _nonnegative(self):
        if any(c < 0 for c in self.counts):
            raise ValueError(f"histogram counts must be nonnegative, got {self.counts}")
        return self

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def k(self) -> int:
        return len(self.counts)


class ProductPrior(BaseModel):
    """i.i.d. prior: each of the n records falls in class j with probability p[j] >= alpha_floor."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=0)
    p: Tuple[float, ...]
    alpha_floor: float = Field(ge=0.0)

    @model_validator(mode='after')
    def _valid_distribution(self):
        if len(self.p) < 2:
            raise ValueError("prior needs at least 2 classes")
        if abs(sum(self.p) - 1.0) > 1e-12:
            raise ValueError(f"class probabilities must sum to 1, got {sum(self.p)!r}")
        if min(self.p) < self.alpha_floor - 1e-15:
            raise ValueError(f"class probability {min(self.p)} is below the floor {self.alpha_floor}")
        return self

    @property
    def k(self) -> int:
        return len(self.p)

    @property
    def probabilities(self) -> np.ndarray:
        return np.asarray(self.p, dtype=float)

    @classmethod
    def uniform(cls, n: int, k: int) -> "ProductPrior":
        return cls(n=n, p=(1.0 / k,) * k, alpha_floor=1.0 / k)


class CertificationReport(BaseModel):
    """Outcome of checking the exact bound against the oracle."""

    model_config = ConfigDict(frozen=True)

    trials: int
    violations: int
    max_leakage_nats: float
    bound_nats: float
    attainment_gap_nats: float
    seed: int

    def to_record(self) -> Dict[str, Any]:
        return self.model_dump()


def histogram_count(n: int, k: int) -> int:
    """Number of histograms of n records over k classes, C(n+k-1, k-1)."""
    return comb(n + k - 1, k - 1)


@lru_cache(maxsize=64)
def _histogram_array(n: int, k: int) -> np.ndarray:
    """All histograms as a (states x k) array in lexicographic order."""
    if n < 0 or k < 1:
        raise InvalidParameterError(f"need n >= 0 and k >= 1, got n={n}, k={k}")
    count = histogram_count(n, k)
    if count > ENUMERATION_CAP:
        raise EnumerationTooLarge(f"n={n}, k={k} gives {count} histograms; the cap is {ENUMERATION_CAP}")
    if k == 1:
        states = np.array([[n]], dtype=np.int64)
    else:
        states = np.vstack([
            np.column_stack([np.full(histogram_count(n - first, k - 1), first), _histogram_array(n - first, k - 1)])
            for first in range(n + 1)
        ])
    states.setflags(write=False)
    return states


def enumerate_histograms(n: int, k: int) -> List[HistogramState]:
    """
    Every histogram of n records over k classes, exactly once, lexicographically.

    Raises:
        EnumerationTooLarge: If there are more than 10^6 histograms
    """
    if k < 2:
        raise InvalidParameterError(f"need k >= 2, got {k}")
    return [HistogramState(counts=tuple(int(c) for c in row)) for row in _histogram_array(n, k)]


def _log_histogram_weights(states: np.ndarray, probabilities: np.ndarray) -> np.ndarray:
    """
    Multinomial log-probabilities.

    ``probabilities`` is (k,) or (trials x k); the result is (states,) or
    (states x trials).
    """
    n = int(states[0].sum())
    log_coefficient = gammaln(n + 1) - gammaln(states + 1).sum(axis=1)
    if probabilities.ndim == 1:
        return log_coefficient + xlogy(states, probabilities).sum(axis=1)
    log_power = xlogy(states[:, None, :], probabilities[None, :, :]).sum(axis=2)
    return log_coefficient[:, None] + log_power


def histogram_prob(h: Union[HistogramState, Sequence[int]], prior: ProductPrior) -> float:
    """Multinomial probability n!/prod(h_j!) * prod(p_j^h_j) of a histogram."""
    counts = np.asarray(h.counts if isinstance(h, HistogramState) else h, dtype=np.int64)
    if counts.shape != (prior.k,):
        raise DimensionMismatch(f"histogram has {counts.size} classes, prior has {prior.k}")
    if int(counts.sum()) != prior.n:
        raise DimensionMismatch(f"histogram holds {int(counts.sum())} records, prior has n={prior.n}")
    return float(np.exp(_log_histogram_weights(counts[None, :], prior.probabilities)[0]))


def _check_inputs(workload: Workload, b: float, prior: ProductPrior):
    if not (np.isfinite(b) and b > 0):
        raise InvalidParameterError(f"noise scale b must be positive, got {b}")
    if prior.k != workload.k:
        raise DimensionMismatch(f"prior has k={prior.k} but workload has k={workload.k}")


def _as_outputs(y: Any, workload: Workload) -> np.ndarray:
    outputs = np.asarray(y, dtype=float)
    if outputs.shape != (workload.m,):
        raise DimensionMismatch(f"output must have length m={workload.m}, got shape {outputs.shape}")
    return outputs


def _log_mixture(
    outputs: np.ndarray,
    workload: Workload,
    b: float,
    probabilities: np.ndarray,
    n: int,
    pinned_class: Optional[int] = None
) -> np.ndarray:
    """
    Log density of a batch of outputs under the histogram mixture.

    ``outputs`` is (trials x m) and ``probabilities`` is (trials x k). With
    ``pinned_class`` set, one extra record of that class is added to every
    histogram of the remaining n records.
    """
    states = _histogram_array(n, workload.k)
    log_weights = _log_histogram_weights(states, probabilities)
    counts = states.astype(float)
    if pinned_class is not None:
        counts = counts + np.eye(workload.k)[pinned_class]
    means = counts @ workload.entries.T
    distances = np.abs(outputs[:, None, :] - means[None, :, :]).sum(axis=2)
    log_laplace = -workload.m * np.log(2.0 * b) - distances / b
    return logsumexp(log_laplace + log_weights.T, axis=1)


def _batch_leakage(
    outputs: np.ndarray,
    workload: Workload,
    b: float,
    probabilities: np.ndarray,
    n: int
) -> np.ndarray:
    """Pointwise leakage of the first record for a batch of (output, prior) pairs."""
    log_marginal = _log_mixture(outputs, workload, b, probabilities, n)
    log_conditionals = np.column_stack([
        _log_mixture(outputs, workload, b, probabilities, n - 1, pinned_class=r)
        for r in range(workload.k)
    ])
    log_conditionals = np.where(probabilities > 0, log_conditionals, -np.inf)
    return log_conditionals.max(axis=1) - log_marginal


def log_output_density(y: Any, workload: Workload, b: float, prior: ProductPrior) -> float:
    """log f_Y(y) for the mechanism applied to n i.i.d. records."""
    _check_inputs(workload, b, prior)
    outputs = _as_outputs(y, workload)
    return float(_log_mixture(outputs[None, :], workload, b, prior.probabilities[None, :], prior.n)[0])


def output_density(y: Any, workload: Workload, b: float, prior: ProductPrior) -> float:
    """
    Density of the released vector at ``y``.

    Args:
        y: Output vector of length m
        workload: The query workload
        b: Laplace noise scale
        prior: i.i.d. prior over the n records

    Returns:
        sum_x P(x) prod_l (1/2b) exp(-|y_l - (W x)_l| / b)
    """
    return float(np.exp(log_output_density(y, workload, b, prior)))


def log_conditional_density(y: Any, workload: Workload, b: float, prior: ProductPrior, r: int) -> float:
    """log f_{Y | first record in class r}(y)."""
    _check_inputs(workload, b, prior)
    workload.column(r)
    if prior.n < 1:
        raise InvalidParameterError("conditioning on a record needs n >= 1")
    outputs = _as_outputs(y, workload)
    return float(_log_mixture(outputs[None, :], workload, b, prior.probabilities[None, :], prior.n - 1, pinned_class=r)[0])


def conditional_density(y: Any, workload: Workload, b: float, prior: ProductPrior, r: int) -> float:
    """Density of ``y`` given the first record belongs to class ``r``."""
    return float(np.exp(log_conditional_density(y, workload, b, prior, r)))


def pointwise_leakage(y: Any, workload: Workload, b: float, prior: ProductPrior) -> float:
    """
    Leakage about the first record at output ``y``, in nats.

    log max_r f(y | class r) / f(y), over classes with nonzero probability.
    """
    _check_inputs(workload, b, prior)
    if prior.n < 1:
        raise InvalidParameterError("leakage about a record needs n >= 1")
    outputs = _as_outputs(y, workload)
    return float(_batch_leakage(outputs[None, :], workload, b, prior.probabilities[None, :], prior.n)[0])


def extreme_outputs(workload: Workload, n: int, subset: Iterable[int], margin: float) -> np.ndarray:
    """
    A point where every |y_l - (W x)_l| has a fixed sign for all histograms x.

    Rows in ``subset`` sit ``margin`` below n * min_j w[l, j]; the other rows
    sit ``margin`` above n * max_j w[l, j].
    """
    rows = np.zeros(workload.m, dtype=bool)
    for l in subset:
        workload.row(l)
        rows[l] = True
    w = workload.entries
    below = n * w.min(axis=1) - margin
    above = n * w.max(axis=1) + margin
    return np.where(rows, below, above)


def _laplace_noise(rng: np.random.Generator, b: float, shape: Tuple[int, ...]) -> np.ndarray:
    """Inverse-CDF Laplace(0, b) draws: u in (-1/2, 1/2), -b sgn(u) log(1 - 2|u|)."""
    u = rng.random(shape) - 0.5
    magnitude = np.minimum(np.abs(u), np.nextafter(0.5, 0.0))
    return -b * np.sign(u) * np.log1p(-2.0 * magnitude)


def sample_mechanism(
    h: Union[HistogramState, Sequence[int]],
    workload: Workload,
    b: float,
    seed: int,
    size: Optional[int] = None
) -> np.ndarray:
    """
    Release W h + Laplace(0, b) noise, deterministically per seed.

    Returns:
        Vector of length m, or a (size x m) array of independent releases
    """
    if not (np.isfinite(b) and b > 0):
        raise InvalidParameterError(f"noise scale b must be positive, got {b}")
    counts = np.asarray(h.counts if isinstance(h, HistogramState) else h, dtype=float)
    if counts.shape != (workload.k,):
        raise DimensionMismatch(f"histogram has {counts.size} classes, workload has k={workload.k}")
    rng = np.random.default_rng(seed)
    shape = (workload.m,) if size is None else (size, workload.m)
    return workload.entries @ counts + _laplace_noise(rng, b, shape)


def random_priors(rng: np.random.Generator, prior_class: PriorClass, size: int) -> np.ndarray:
    """(size x k) i.i.d. priors drawn inside the family: alpha + (1 - k alpha) * Dirichlet(1)."""
    simplex = rng.dirichlet(np.ones(prior_class.k), size=size)
    return prior_class.alpha + prior_class.excess_weight * simplex


def _sample_histograms(rng: np.random.Generator, probabilities: np.ndarray, n: int) -> np.ndarray:
    """One histogram of n records per row of ``probabilities``."""
    trials, k = probabilities.shape
    cumulative = np.cumsum(probabilities, axis=1)
    draws = rng.random((trials, n))
    classes = np.minimum((draws[:, :, None] >= cumulative[:, None, :]).sum(axis=2), k - 1)
    return (classes[:, :, None] == np.arange(k)).sum(axis=1)


def _region_outputs(rng: np.random.Generator, workload: Workload, n: int, size: int, width: float) -> np.ndarray:
    """Uniform points in boxes of the given width inside the sign-fixed output regions."""
    w = workload.entries
    below_rows = rng.integers(0, 2, size=(size, workload.m)).astype(bool)
    depth = rng.random((size, workload.m)) * width
    below = n * w.min(axis=1) - depth
    above = n * w.max(axis=1) + depth
    return np.where(below_rows, below, above)


def certify_bound(
    workload: Workload,
    b: float,
    prior_class: PriorClass,
    n: int,
    trials: int,
    seed: int,
    subset_cap: int = SUBSET_CAP
) -> CertificationReport:
    """
    Check the exact bound against exact leakage on a small instance.

    Dominance: half the trials draw (prior, y) with y sampled from the
    mechanism, half draw y uniformly from boxes in the sign-fixed regions;
    each leakage must stay below the bound plus 1e-9.

    Attainment: the extremal prior built from the witness subset's
    coefficients, evaluated at that subset's extreme output, should reach
    the bound; the signed gap is reported.

    Args:
        workload: The query workload
        b: Laplace noise scale
        prior_class: Family the random priors are drawn from
        n: Number of records
        trials: Number of (prior, y) samples
        seed: Seed for the PCG64 generator
        subset_cap: Passed to the exact bound

    Returns:
        CertificationReport with violation count, max leakage and attainment gap
    """
    if n < 1:
        raise InvalidParameterError(f"certification needs n >= 1, got {n}")
    if trials < 0:
        raise InvalidParameterError(f"trials must be nonnegative, got {trials}")
    _histogram_array(n, workload.k)

    bound = exact_pml_bound(workload, b, prior_class, subset_cap=subset_cap)
    rng = np.random.default_rng(seed)

    states_per_trial = histogram_count(n, workload.k) * workload.m
    batch = max(1, _BATCH_ELEMENTS // states_per_trial)
    mechanism_trials = trials // 2

    violations = 0
    max_leakage = -np.inf
    for start in range(0, trials, batch):
        size = min(batch, trials - start)
        probabilities = random_priors(rng, prior_class, size)
        from_mechanism = np.arange(start, start + size) < mechanism_trials

        histograms = _sample_histograms(rng, probabilities, n)
        released = histograms @ workload.entries.T + _laplace_noise(rng, b, (size, workload.m))
        boxed = _region_outputs(rng, workload, n, size, width=10.0 * b)
        outputs = np.where(from_mechanism[:, None], released, boxed)

        leakage = _batch_leakage(outputs, workload, b, probabilities, n)
        violations += int(np.count_nonzero(leakage > bound.value + DOMINANCE_SLACK))
        max_leakage = max(max_leakage, float(leakage.max()))

    witness = bound.witness.subset()
    extremal = build_extremal_prior(subset_coefficients(workload, witness), prior_class)
    extremal_prior = ProductPrior(n=n, p=tuple(float(v) for v in extremal), alpha_floor=prior_class.alpha)
    attained = pointwise_leakage(extreme_outputs(workload, n, witness, margin=1.0), workload, b, extremal_prior)
    max_leakage = max(max_leakage, attained)

    report = CertificationReport(
        trials=trials,
        violations=violations,
        max_leakage_nats=max_leakage,
        bound_nats=bound.value,
        attainment_gap_nats=bound.value - attained,
        seed=seed,
    )
    if violations:
        logger.warning(f"Certification found {violations}/{trials} samples above the bound {bound.value:.6g}")
    logger.info(f"Certified b={b} alpha={prior_class.alpha} n={n} ({RNG_NAME} seed {seed}): {report.model_dump()}")
    return report
