"""Graph representation and modularity statistics.

Dense numpy storage throughout. Arrays held by the types below are marked
read-only so instances can be shared freely between bootstrap workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyGraph, EmptySubset, NotSymmetric, SelfLoop, ValidationError

ROW_SUM_TOL = 1e-10


def _frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AdjacencyMatrix:
    """Symmetric 0/1 adjacency matrix of an undirected simple graph."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"adjacency must be square, got shape {a.shape}")
        if a.size and not np.isin(a, (0, 1)).all():
            raise ValidationError("adjacency entries must be 0 or 1")
        a = a.astype(np.int8)
        if np.any(np.diag(a)):
            raise SelfLoop(f"self-loop at vertex {int(np.flatnonzero(np.diag(a))[0])}")
        if not np.array_equal(a, a.T):
            raise NotSymmetric(float(np.abs(a - a.T).max()))
        object.__setattr__(self, "entries", _frozen(a))

    @classmethod
    def from_edges(cls, n, edges):
        a = np.zeros((n, n), dtype=np.int8)
        for u, v in edges:
            if u == v:
                raise SelfLoop(f"self-loop at vertex {u}")
            a[u, v] = a[v, u] = 1
        return cls(a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def m(self) -> int:
        return int(self.entries.sum()) // 2

    def edges(self):
        u, v = np.nonzero(np.triu(self.entries, 1))
        return list(zip(u.tolist(), v.tolist()))

    def __eq__(self, other):
        if not isinstance(other, AdjacencyMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of vertices to communities labelled ``0 .. K-1``.

    Labels are always canonical: every id below ``K`` is used.
    """

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.ndim != 1:
            raise DimensionMismatch("labels must be a 1-d vector")
        if lab.size:
            if lab.min() < 0:
                raise ValidationError("labels must be non-negative")
            present = np.unique(lab)
            if present.size != lab.max() + 1:
                raise ValidationError("labels must use every id in 0..K-1")
        object.__setattr__(self, "labels", _frozen(lab))

    @classmethod
    def single(cls, n):
        return cls(np.zeros(n, dtype=np.int64))

    @classmethod
    def from_blocks(cls, block_sizes):
        return cls(np.repeat(np.arange(len(block_sizes)), block_sizes))

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def K(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def members(self, c) -> np.ndarray:
        return np.flatnonzero(self.labels == c)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ModularityMatrix:
    """A (possibly generalized) modularity matrix.

    ``two_m`` is always twice the edge count of the *whole* graph, so scores
    computed from a restricted matrix are contributions to the global Q.
    ``members`` records which vertices of the parent graph the rows refer to.
    """

    values: np.ndarray
    two_m: float
    members: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=float)))
        mem = np.arange(self.values.shape[0]) if self.members is None else self.members
        object.__setattr__(self, "members", _frozen(np.asarray(mem, dtype=np.int64)))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def four_m(self) -> float:
        return 2.0 * self.two_m


def degrees(A: AdjacencyMatrix) -> np.ndarray:
    return A.entries.sum(axis=1, dtype=np.int64)


def modularity_matrix(A: AdjacencyMatrix) -> ModularityMatrix:
    k = degrees(A).astype(float)
    two_m = k.sum()
    if two_m == 0:
        raise EmptyGraph("graph has no edges; modularity is undefined")
    return ModularityMatrix(A.entries - np.outer(k, k) / two_m, two_m)


def _check_signs(s, n):
    s = np.asarray(s, dtype=float)
    if s.shape != (n,):
        raise DimensionMismatch(f"sign vector has shape {s.shape}, expected ({n},)")
    if not np.all(np.abs(s) == 1):
        raise ValidationError("sign vector entries must be +1 or -1")
    return s


def bisection_modularity(Bmat: ModularityMatrix, s) -> float:
    """Q = s^T B s / 4m for a two-way split encoded by signs ``s``."""
    s = _check_signs(s, Bmat.n)
    return float(s @ Bmat.values @ s) / Bmat.four_m


def additional_modularity(Bj: ModularityMatrix, s) -> float:
    """Modularity gained by splitting one community along ``s``.

    Same formula as :func:`bisection_modularity`; ``Bj`` should come from
    :func:`generalized_modularity_matrix`.
    """
    return bisection_modularity(Bj, s)


def generalized_modularity_matrix(Bmat: ModularityMatrix, members) -> ModularityMatrix:
    """Restrict ``Bmat`` to ``members`` and subtract each row's in-group sum
    from the diagonal, so that every row of the result sums to zero."""
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise EmptySubset("member set is empty")
    if members.min() < 0 or members.max() >= Bmat.n:
        raise DimensionMismatch("member index out of range")
    sub = Bmat.values[np.ix_(members, members)]
    sub = sub - np.diag(sub.sum(axis=1))
    return ModularityMatrix(sub, Bmat.two_m, Bmat.members[members])


def partition_modularity(A: AdjacencyMatrix, p: Partition) -> float:
    """Newman-Girvan modularity of a multi-way partition."""
    if p.n != A.n:
        raise DimensionMismatch(f"partition covers {p.n} vertices, graph has {A.n}")
    k = degrees(A).astype(float)
    two_m = k.sum()
    if two_m == 0:
        raise EmptyGraph("graph has no edges; modularity is undefined")
    total = 0.0
    for c in range(p.K):
        idx = p.members(c)
        within = A.entries[np.ix_(idx, idx)].sum()
        total += within - k[idx].sum() ** 2 / two_m
    return float(total / two_m)
