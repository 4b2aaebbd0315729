"""Stochastic block models: parameters, sampling and fitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePartition, DimensionMismatch, InvalidEps, ValidationError
from .graph import AdjacencyMatrix, Partition, _frozen
from .seeding import substream


@dataclass(frozen=True, eq=False)
class SbmParams:
    block_sizes: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        sizes = np.asarray(self.block_sizes, dtype=np.int64)
        P = np.asarray(self.P, dtype=float)
        if sizes.ndim != 1 or np.any(sizes <= 0):
            raise ValidationError("block sizes must be positive integers")
        if P.shape != (sizes.size, sizes.size):
            raise DimensionMismatch(f"P has shape {P.shape}, expected {(sizes.size, sizes.size)}")
        if np.any(P < 0) or np.any(P > 1):
            raise ValidationError("edge probabilities must lie in [0, 1]")
        if not np.allclose(P, P.T, rtol=0, atol=1e-12):
            raise ValidationError("P must be symmetric")
        object.__setattr__(self, "block_sizes", _frozen(sizes))
        object.__setattr__(self, "P", _frozen((P + P.T) / 2))

    @property
    def K(self) -> int:
        return int(self.block_sizes.size)

    @property
    def n(self) -> int:
        return int(self.block_sizes.sum())

    def partition(self) -> Partition:
        return Partition.from_blocks(self.block_sizes)


def balanced_sizes(K, n):
    """Sizes of K blocks covering n vertices, differing by at most one."""
    if K < 1 or n < K:
        raise ValidationError(f"cannot split {n} vertices into {K} non-empty blocks")
    base, extra = divmod(n, K)
    return np.array([base + (i < extra) for i in range(K)], dtype=np.int64)


def planted_params(K, n, eps) -> SbmParams:
    """Planted partition with within-block probability 0.5 + eps and
    between-block probability 0.5 - eps."""
    if not 0.0 <= eps <= 0.5:
        raise InvalidEps(f"eps must lie in [0, 0.5], got {eps}")
    P = 2 * eps * np.eye(K) + (0.5 - eps) * np.ones((K, K))
    return SbmParams(balanced_sizes(K, n), P)


def generate(params: SbmParams, seed) -> tuple[AdjacencyMatrix, Partition]:
    """Sample one network; blocks occupy contiguous vertex ranges.

    One uniform draw per vertex pair, consumed row-major over the upper
    triangle.
    """
    rng = substream(seed)
    part = params.partition()
    n = params.n
    iu, ju = np.triu_indices(n, 1)
    lab = part.labels
    prob = params.P[lab[iu], lab[ju]]
    hit = rng.random(iu.size) < prob
    a = np.zeros((n, n), dtype=np.int8)
    a[iu[hit], ju[hit]] = 1
    a += a.T
    return AdjacencyMatrix(a), part


def block_edge_counts(A: AdjacencyMatrix, p: Partition):
    """Observed edge counts and available vertex pairs for each block pair."""
    if p.n != A.n:
        raise DimensionMismatch(f"partition covers {p.n} vertices, graph has {A.n}")
    K = p.K
    onehot = np.zeros((A.n, K))
    onehot[np.arange(A.n), p.labels] = 1.0
    E = onehot.T @ A.entries @ onehot
    sizes = onehot.sum(axis=0)
    N = np.outer(sizes, sizes)
    np.fill_diagonal(E, np.diag(E) / 2)
    np.fill_diagonal(N, sizes * (sizes - 1) / 2)
    return E, N


def fit_from_partition(A: AdjacencyMatrix, p: Partition) -> SbmParams:
    """Block probabilities (E + 1) / (N + 2), Laplace-smoothed."""
    sizes = np.bincount(p.labels, minlength=p.K)
    if np.any(sizes == 0):
        raise DegeneratePartition("partition has an empty block")
    E, N = block_edge_counts(A, p)
    return SbmParams(sizes, (E + 1.0) / (N + 2.0))
