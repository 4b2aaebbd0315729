"""Sequential modularity testing.

At stage ``j`` the network has been divided hierarchically into ``j``
communities. The test statistic is the modularity gained by the next split
(``j -> j+1``); its null distribution comes from networks simulated from an
SBM fitted to the current ``j``-community partition, each divided from scratch
in the same way. ``K_hat(alpha)`` is the first stage whose p-value exceeds
``alpha``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import seeding
from ._parallel import pmap
from .errors import EmptyGraph, Indivisible, ValidationError
from .graph import (
    AdjacencyMatrix,
    ModularityMatrix,
    Partition,
    generalized_modularity_matrix,
    modularity_matrix,
    partition_modularity,
)
from .sbm import SbmParams, fit_from_partition, generate
from .spectral import DEFAULT_TOL, ZERO_TOL, bisect, leading_eigenpair, sign_split

DEFAULT_K_MAX = 20
DEFAULT_BOOTSTRAP = 200
TIE_TOL = 1e-12
REFINE_MODES = ("sweep", "greedy", "none")


@dataclass(frozen=True)
class DivisionConfig:
    """Knobs of the divisive algorithm.

    ``refine`` selects the whole-partition refinement run after every split:
    ``"sweep"`` (Kernighan-Lin style passes), ``"greedy"`` (improving moves
    only) or ``"none"`` (plain hierarchical bisection).
    """

    tol: float = DEFAULT_TOL
    max_iter: int | None = None
    refine: str = "sweep"

    def __post_init__(self):
        if self.refine not in REFINE_MODES:
            raise ValidationError(f"refine must be one of {REFINE_MODES}, got {self.refine!r}")


DEFAULT_CONFIG = DivisionConfig()


def refine_partition(A: AdjacencyMatrix, labels, K=None, sweeps=True):
    """Multi-way vertex-move refinement of a partition.

    With ``sweeps`` each pass moves every vertex at most once, always taking
    the best available move even when it lowers Q, and keeps the best state
    seen (Kernighan-Lin style); passes repeat while they improve Q. Without it
    only improving moves are made. Community count is preserved. Returns the
    new label vector.
    """
    labels = np.array(labels, dtype=np.int64)
    if K is None:
        K = int(labels.max()) + 1
    a = A.entries.astype(float)
    k = a.sum(axis=1)
    m = k.sum() / 2.0
    c = 1.0 / (2.0 * m * m)
    n = labels.size
    rows = np.arange(n)
    kc = c * k
    while True:
        lab = labels.copy()
        onehot = np.zeros((n, K))
        onehot[rows, lab] = 1.0
        E = a @ onehot
        Dg = onehot.T @ k
        sizes = np.bincount(lab, minlength=K)
        # gain of moving u to d is G[u, d] + own[u]: G holds the terms that
        # depend on d, own the terms that depend on u's current community
        G = E / m - np.outer(kc, Dg)
        frozen = np.zeros(n, dtype=bool)
        total = 0.0
        best_total = ZERO_TOL
        best = None
        for _ in range(n):
            own = c * k * (Dg[lab] - k) - E[rows, lab] / m
            own[frozen | (sizes[lab] <= 1)] = -np.inf
            g = G + own[:, None]
            g[rows, lab] = -np.inf
            flat = int(np.argmax(g))
            u, d = divmod(flat, K)
            step = g[u, d]
            if not np.isfinite(step) or (not sweeps and step <= ZERO_TOL):
                break
            old = lab[u]
            lab[u] = d
            frozen[u] = sweeps
            E[:, old] -= a[:, u]
            E[:, d] += a[:, u]
            Dg[old] -= k[u]
            Dg[d] += k[u]
            sizes[old] -= 1
            sizes[d] += 1
            G[:, old] = E[:, old] / m - kc * Dg[old]
            G[:, d] = E[:, d] / m - kc * Dg[d]
            total += step
            if total > best_total:
                best_total = total
                best = lab.copy()
        if best is None:
            return labels
        labels = best
        if not sweeps:
            return labels


class Divider:
    """Hierarchical divisive modularity maximisation.

    Each call to :meth:`step` applies the best bisection among all current
    communities, then (unless ``config.refine == "none"``) refines the whole partition by vertex
    moves. When no bare bisection raises Q, each community's eigenvector split
    is tried together with the refinement and the best one is kept if it
    raises Q. Best bisections are cached per community.
    """

    def __init__(self, A: AdjacencyMatrix, start: Partition | None = None, config: DivisionConfig = DEFAULT_CONFIG):
        self.A = A
        self.B: ModularityMatrix = modularity_matrix(A)
        self.labels = np.zeros(A.n, dtype=np.int64) if start is None else np.array(start.labels)
        self.K = int(self.labels.max()) + 1
        self.tol = config.tol
        self.max_iter = config.max_iter
        self.refine = config.refine
        self.Q = partition_modularity(A, Partition(self.labels)) if start is not None else 0.0
        self._cache = {}

    @property
    def partition(self) -> Partition:
        return Partition(self.labels)

    def best_split(self, c):
        if c not in self._cache:
            members = np.flatnonzero(self.labels == c)
            Bj = generalized_modularity_matrix(self.B, members)
            s, score = bisect(Bj, self.tol, self.max_iter)
            self._cache[c] = (members, s, score)
        return self._cache[c]

    def _split(self, labels, members, s):
        labels = labels.copy()
        # the half holding the community's lowest vertex keeps the old label
        labels[members[s != s[0]]] = self.K
        return labels

    def _commit(self, labels, q):
        changed = np.unique(np.concatenate([self.labels[labels != self.labels], labels[labels != self.labels]]))
        for c in changed.tolist():
            self._cache.pop(c, None)
        self._cache.pop(self.K, None)
        self.labels = labels
        self.K += 1
        gain = q - self.Q
        self.Q = q
        return gain

    def _rescue(self):
        best_q, best_labels = self.Q + ZERO_TOL, None
        for c in range(self.K):
            members = np.flatnonzero(self.labels == c)
            if members.size < 2:
                continue
            Bj = generalized_modularity_matrix(self.B, members)
            s = sign_split(leading_eigenpair(Bj.values, self.tol, self.max_iter).eigenvector)
            if np.all(s == s[0]):
                continue
            labels = refine_partition(self.A, self._split(self.labels, members, s), self.K + 1, self.refine == "sweep")
            q = partition_modularity(self.A, Partition(labels))
            if q > best_q:
                best_q, best_labels = q, labels
        return best_q, best_labels

    def step(self) -> float:
        """Split one community; return the modularity gain."""
        scores = [self.best_split(c)[2] for c in range(self.K)]
        c = int(np.argmax(scores))
        members, s, score = self._cache[c]
        if score > ZERO_TOL:
            labels = self._split(self.labels, members, s)
            if self.refine != "none":
                labels = refine_partition(self.A, labels, self.K + 1, self.refine == "sweep")
            return self._commit(labels, partition_modularity(self.A, Partition(labels)))
        if self.refine != "none":
            q, labels = self._rescue()
            if labels is not None:
                return self._commit(labels, q)
        raise Indivisible(f"no community among {self.K} admits a positive-gain split")


def divide_next(A: AdjacencyMatrix, current: Partition, config: DivisionConfig = DEFAULT_CONFIG):
    """Apply the best single bisection to ``current``.

    Returns ``(next_partition, gain)`` where gain is the difference of total
    modularities. Raises :class:`Indivisible` when no split helps.
    """
    if current.n != A.n:
        raise ValidationError(f"partition covers {current.n} vertices, graph has {A.n}")
    d = Divider(A, current, config)
    d.step()
    nxt = d.partition
    return nxt, partition_modularity(A, nxt) - partition_modularity(A, current)


def null_gain(A: AdjacencyMatrix, k: int, config: DivisionConfig = DEFAULT_CONFIG) -> float:
    """Gain of the ``k -> k+1`` split when dividing ``A`` from scratch; 0 if
    the division stalls first."""
    if A.m == 0:
        return 0.0
    d = Divider(A, config=config)
    try:
        for _ in range(k - 1):
            d.step()
        return d.step()
    except Indivisible:
        return 0.0


def _one_null(b, fitted, seed, config):
    A, _ = generate(fitted, seeding.substream(seed, b))
    return null_gain(A, fitted.K, config)


def null_gain_samples(fitted: SbmParams, B_count: int, seed, *, workers=1, config: DivisionConfig = DEFAULT_CONFIG):
    """Bootstrap null distribution of the stage-``fitted.K`` gain.

    Replicate ``b`` draws its network from substream ``(seed, b)``.
    """
    if B_count < 1:
        raise ValidationError("need at least one bootstrap sample")
    fn = functools.partial(_one_null, fitted=fitted, seed=seed, config=config)
    return np.array(pmap(fn, range(B_count), workers), dtype=float)


def p_value(observed: float, null_samples) -> float:
    """Add-one Monte Carlo p-value ``(1 + #{null >= observed}) / (B + 1)``."""
    null = np.asarray(null_samples, dtype=float)
    if null.size == 0:
        raise ValidationError("null sample is empty")
    return (1.0 + np.count_nonzero(null >= observed)) / (null.size + 1.0)


@dataclass(frozen=True, eq=False)
class Stage:
    j: int
    partition: Partition
    observed_gain: float
    null_samples: np.ndarray
    p_value: float
    indivisible: bool = False


@dataclass(frozen=True, eq=False)
class DetectionTrace:
    n: int
    K_max: int
    B_count: int
    stages: tuple
    final_partition: Partition
    alpha_stop: float | None = None

    @property
    def p_values(self) -> list[float]:
        return [st.p_value for st in self.stages]

    def partition_for(self, k: int) -> Partition:
        """Partition with ``k`` communities as produced along the trace."""
        if 1 <= k <= len(self.stages):
            return self.stages[k - 1].partition
        if k == len(self.stages) + 1 and not self.stages[-1].indivisible:
            return self.final_partition
        raise ValidationError(f"trace holds no {k}-community partition")


def detect(
    A: AdjacencyMatrix,
    K_max=DEFAULT_K_MAX,
    B_count=DEFAULT_BOOTSTRAP,
    seed=seeding.DEFAULT_SEED,
    *,
    workers=1,
    alpha_stop=None,
    config: DivisionConfig = DEFAULT_CONFIG,
) -> DetectionTrace:
    """Run the sequential tests for stages ``1 .. K_max``.

    The trace stops early when the observed network becomes indivisible
    (recorded as a stage with p = 1) or, if ``alpha_stop`` is given, after the
    first stage whose p-value exceeds it; ``K_hat`` is unaffected for any
    ``alpha <= alpha_stop``.
    """
    if A.m == 0:
        raise EmptyGraph("graph has no edges; modularity is undefined")
    if K_max < 1:
        raise ValidationError("K_max must be at least 1")
    d = Divider(A, config=config)
    stages = []
    for j in range(1, K_max + 1):
        part = d.partition
        try:
            gain = d.step()
        except Indivisible:
            stages.append(Stage(j, part, 0.0, np.empty(0), 1.0, indivisible=True))
            break
        fitted = fit_from_partition(A, part)
        null = null_gain_samples(
            fitted, B_count, seeding.subseed(seed, seeding.NULL, j), workers=workers, config=config
        )
        p = p_value(gain, null)
        stages.append(Stage(j, part, gain, null, p))
        if alpha_stop is not None and p > alpha_stop:
            break
    return DetectionTrace(A.n, K_max, B_count, tuple(stages), d.partition, alpha_stop)


def _extended(p_values):
    return list(p_values) + [1.0]


def k_hat_from_pvalues(p_values, alpha) -> int:
    for j, p in enumerate(_extended(p_values), start=1):
        if p > alpha:
            return j
    raise AssertionError("unreachable: sentinel p-value is 1")


def k_hat(trace: DetectionTrace, alpha: float) -> int:
    """``min{j >= 1 : p(j) > alpha}`` with a sentinel ``p = 1`` after the
    last computed stage."""
    if not 0.0 <= alpha < 1.0:
        raise ValidationError(f"alpha must lie in [0, 1), got {alpha}")
    return k_hat_from_pvalues(trace.p_values, alpha)


@dataclass(frozen=True)
class Piece:
    lo: float
    hi: float
    value: int

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class AlphaStepFunction:
    pieces: tuple
    breakpoints: tuple
    k_star: int
    longest_interval_length: float

    def __call__(self, alpha: float) -> int:
        for pc in self.pieces:
            if pc.lo <= alpha < pc.hi:
                return pc.value
        raise ValidationError(f"alpha must lie in [0, 1), got {alpha}")


def step_function_from_pvalues(p_values) -> AlphaStepFunction:
    pieces = []
    lo = 0.0
    for j, p in enumerate(_extended(p_values), start=1):
        if p > lo:
            pieces.append(Piece(lo, float(p), j))
            lo = float(p)
    best = pieces[0]
    for pc in pieces[1:]:
        # strict improvement only: on ties the smaller K wins
        if pc.length > best.length + TIE_TOL:
            best = pc
    breakpoints = tuple(sorted({float(p) for p in p_values}))
    return AlphaStepFunction(tuple(pieces), breakpoints, best.value, best.length)


def step_function(trace: DetectionTrace) -> AlphaStepFunction:
    """Exact step function ``alpha -> K_hat(alpha)`` on ``[0, 1)``.

    ``K_hat = j`` on ``[max_{i<j} p(i), p(j))`` whenever that interval is
    non-empty; ``k_star`` is the value on the longest piece.
    """
    return step_function_from_pvalues(trace.p_values)
