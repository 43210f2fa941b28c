"""
Linear query workloads.

This module provides:
- The immutable ``Workload`` matrix (m queries over k data classes)
- Generators for the histogram, range and difference (Haar) families
- Column l1 distances and the l1 sensitivity of a workload

Indexing is 0-based throughout. Matrices are dense and row-major.
"""

import logging
from types import MappingProxyType
from typing import Any, Dict, Mapping, NamedTuple, Optional, Tuple

import numpy as np

from .errors import DimensionMismatch, InvalidParameterError, InvalidWorkloadError

logger = logging.getLogger(__name__)

RNG_NAME = "PCG64"


class Sensitivity(NamedTuple):
    """l1 sensitivity together with the column pair that attains it."""

    value: float
    pair: Tuple[int, int]


class Workload:
    """
    An m x k matrix of finite query weights.

    Rows are queries, columns are data classes. The underlying array is
    read-only; generators attach provenance (family, seed, generator) in
    ``metadata`` so outputs can be reproduced.
    """

    def __init__(self, entries: Any, metadata: Optional[Dict[str, Any]] = None):
        array = np.array(entries, dtype=float, copy=True)
        if array.ndim == 1:
            array = array.reshape(1, -1)
        if array.ndim != 2:
            raise InvalidWorkloadError(f"workload must be a 2-D matrix, got {array.ndim} dimensions")
        m, k = array.shape
        if m < 1:
            raise InvalidWorkloadError("workload needs at least one query row")
        if k < 2:
            raise InvalidWorkloadError(f"workload needs at least 2 classes, got k={k}")
        if not np.all(np.isfinite(array)):
            raise InvalidWorkloadError("workload entries must be finite")
        array.setflags(write=False)
        self._entries = array
        self.metadata: Mapping[str, Any] = MappingProxyType(dict(metadata or {}))

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def m(self) -> int:
        return self._entries.shape[0]

    @property
    def k(self) -> int:
        return self._entries.shape[1]

    def row(self, l: int) -> np.ndarray:
        """Weights of query ``l`` (length k)."""
        self._check_row(l)
        return self._entries[l, :]

    def column(self, j: int) -> np.ndarray:
        """Weights of class ``j`` across all queries (length m)."""
        self._check_column(j)
        return self._entries[:, j]

    def _check_row(self, l: int):
        if not 0 <= l < self.m:
            raise DimensionMismatch(f"row index {l} out of range for m={self.m}")

    def _check_column(self, j: int):
        if not 0 <= j < self.k:
            raise DimensionMismatch(f"column index {j} out of range for k={self.k}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Workload):
            return NotImplemented
        return self._entries.shape == other._entries.shape and bool(np.array_equal(self._entries, other._entries))

    def __hash__(self):
        return hash((self._entries.shape, self._entries.tobytes()))

    def __repr__(self) -> str:
        family = self.metadata.get('family', 'custom')
        return f"Workload(family={family}, m={self.m}, k={self.k})"


def _as_finite_matrix(matrix: Any, name: str) -> np.ndarray:
    array = np.atleast_2d(np.asarray(matrix, dtype=float))
    if array.ndim != 2:
        raise InvalidWorkloadError(f"{name} must be a 2-D matrix")
    if not np.all(np.isfinite(array)):
        raise InvalidWorkloadError(f"{name} has non-finite entries")
    return array


def kron(a: Any, b: Any) -> np.ndarray:
    """
    Kronecker product of two finite matrices.

    Args:
        a: p x q matrix (vectors are treated as single rows)
        b: r x s matrix

    Returns:
        The (p*r) x (q*s) matrix whose block (i, j) is a[i][j] * b
    """
    return np.kron(_as_finite_matrix(a, "A"), _as_finite_matrix(b, "B"))


def make_histogram_workload(k: int) -> Workload:
    """The k x k identity: one counting query per class."""
    if k < 2:
        raise InvalidParameterError(f"histogram workload needs k >= 2, got {k}")
    logger.info(f"Building histogram workload k={k}")
    return Workload(np.eye(k), metadata={'family': 'histogram', 'k': k, 'm': k})


def make_range_workload(k: int, m: int, seed: int) -> Workload:
    """
    Random contiguous range queries.

    For each row a start L is drawn uniformly from {0, ..., k-1} and an end R
    uniformly from {L, ..., k-1}; the row is 1 on columns L..R and 0 elsewhere.

    Args:
        k: Number of classes
        m: Number of queries
        seed: Seed for the PCG64 generator

    Returns:
        m x k 0/1 Workload, identical for identical (k, m, seed)
    """
    if k < 2:
        raise InvalidParameterError(f"range workload needs k >= 2, got {k}")
    if m < 1:
        raise InvalidParameterError(f"range workload needs m >= 1, got {m}")
    if seed < 0:
        raise InvalidParameterError(f"seed must be unsigned, got {seed}")

    rng = np.random.default_rng(seed)
    entries = np.zeros((m, k))
    for l in range(m):
        start = int(rng.integers(0, k))
        end = int(rng.integers(start, k))
        entries[l, start:end + 1] = 1.0

    logger.info(f"Building range workload k={k} m={m} seed={seed}")
    return Workload(entries, metadata={'family': 'range', 'k': k, 'm': m, 'seed': seed, 'rng': RNG_NAME})


def make_haar_workload(k: int) -> Workload:
    """
    Unnormalised Haar (difference query) workload.

    Stacks the all-ones row and, for each depth t = 1..log2(k), the block
    I_{2^(t-1)} (x) [1, -1] (x) 1_{k/2^t}.
    """
    if k < 2 or k & (k - 1):
        raise InvalidParameterError(f"Haar workload needs k to be a power of two >= 2, got {k}")

    h = np.array([[1.0, -1.0]])
    blocks = [np.ones((1, k))]
    depth = k.bit_length() - 1
    for t in range(1, depth + 1):
        coarse = kron(np.eye(2 ** (t - 1)), h)
        blocks.append(kron(coarse, np.ones((1, k // 2 ** t))))

    logger.info(f"Building Haar workload k={k}")
    return Workload(np.vstack(blocks), metadata={'family': 'haar', 'k': k, 'm': k})


def pairwise_column_distances(workload: Workload) -> np.ndarray:
    """k x k matrix of unscaled l1 distances between workload columns."""
    w = workload.entries
    return np.abs(w[:, :, None] - w[:, None, :]).sum(axis=0)


def column_l1_distance(workload: Workload, j1: int, j2: int) -> float:
    """||w[:, j1] - w[:, j2]||_1 (the unscaled numerator of Delta_{j1,j2})."""
    return float(np.abs(workload.column(j1) - workload.column(j2)).sum())


def sensitivity_l1(workload: Workload) -> Sensitivity:
    """
    l1 sensitivity of the workload.

    Returns:
        Sensitivity(value, pair) where pair is the lexicographically smallest
        (j1, j2) with j1 < j2 attaining the maximum column distance
    """
    distances = pairwise_column_distances(workload)
    upper = np.triu(np.ones_like(distances, dtype=bool), k=1)
    masked = np.where(upper, distances, -np.inf)
    flat = int(np.argmax(masked))
    j1, j2 = divmod(flat, workload.k)
    return Sensitivity(float(distances[j1, j2]), (j1, j2))


def parse_workload_spec(spec: str) -> Workload:
    """
    Build a workload from a generator spec.

    Accepts ``histogram:k``, ``range:k[:m[:seed]]`` and ``haar:k``;
    ``identity`` and ``difference`` are aliases of ``histogram`` and ``haar``.
    """
    parts = spec.strip().split(':')
    family = parts[0].lower()
    try:
        numbers = [int(p) for p in parts[1:]]
    except ValueError:
        raise InvalidParameterError(f"workload spec '{spec}' has a non-integer field")
    if not numbers:
        raise InvalidParameterError(f"workload spec '{spec}' is missing k")

    k = numbers[0]
    if family in ('histogram', 'identity', 'haar', 'difference'):
        if len(numbers) > 2 or (len(numbers) == 2 and numbers[1] != k):
            raise InvalidParameterError(f"{family} workloads are square; '{spec}' asks for m != k")
        if family in ('histogram', 'identity'):
            return make_histogram_workload(k)
        return make_haar_workload(k)
    if family == 'range':
        if len(numbers) > 3:
            raise InvalidParameterError(f"range spec '{spec}' has too many fields")
        m = numbers[1] if len(numbers) > 1 else k
        seed = numbers[2] if len(numbers) > 2 else 0
        return make_range_workload(k, m, seed)

    raise InvalidParameterError(f"unknown workload family '{family}' (use histogram, range or haar)")
