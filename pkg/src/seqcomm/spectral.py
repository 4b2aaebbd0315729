"""Leading eigenpairs and eigenvector-sign bisection of modularity matrices."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, TooLarge
from .graph import ModularityMatrix

DEFAULT_TOL = 1e-8
ZERO_TOL = 1e-12
BRUTE_FORCE_LIMIT = 20
MAX_SQUARINGS = 64


@dataclass(frozen=True)
class EigenPair:
    eigenvalue: float
    eigenvector: np.ndarray
    residual: float
    iterations: int


def default_max_iter(n):
    return 10 * n + 1000


def _start_vector(n):
    x = np.ones(n)
    x[0] += 0.5
    return x / np.linalg.norm(x)


def _rayleigh(M, x):
    y = M @ x
    lam = float(x @ y)
    return lam, float(np.linalg.norm(y - lam * x))


def leading_eigenpair(M, tol=DEFAULT_TOL, max_iter=None) -> EigenPair:
    """Eigenpair of the algebraically largest eigenvalue of symmetric ``M``.

    The matrix is shifted by its Gershgorin radius so that the spectrum is
    non-negative and the wanted eigenvalue dominates, then the power method is
    run on the shifted matrix. Powers are built by repeated squaring (each
    squaring doubles the exponent), which keeps the method deterministic while
    handling the small spectral gaps that a large shift produces. If squaring
    saturates before the residual drops below ``tol`` the iteration continues
    with plain matrix-vector products.

    The returned eigenvector is unit length with a non-negative sum (ties
    resolved by the first non-zero entry being positive).
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if max_iter is None:
        max_iter = default_max_iter(n)
    if n == 1:
        return EigenPair(float(M[0, 0]), np.ones(1), 0.0, 0)

    shift = float(np.abs(M).sum(axis=1).max())
    if shift == 0.0:
        return EigenPair(0.0, _start_vector(n), 0.0, 0)
    S = (M + shift * np.eye(n)) / (2.0 * shift)
    x0 = _start_vector(n)

    it = 0
    residual = np.inf
    x = x0
    P = S
    prev = None
    while it < min(max_iter, MAX_SQUARINGS):
        it += 1
        y = P @ x0
        ny = np.linalg.norm(y)
        if ny < 1e-10 * np.abs(P).max():
            # start vector (numerically) orthogonal to the dominant space
            col = int(np.argmax(np.linalg.norm(P, axis=0)))
            y = P[:, col]
            ny = np.linalg.norm(y)
        x = y / ny
        lam, residual = _rayleigh(M, x)
        if residual <= tol:
            break
        if prev is not None and np.linalg.norm(x - prev) < 1e-15:
            break
        prev = x
        P = P @ P
        P /= np.abs(P).max()
    while residual > tol and it < max_iter:
        it += 1
        y = S @ x
        x = y / np.linalg.norm(y)
        lam, residual = _rayleigh(M, x)
    if residual > tol:
        raise NoConvergence(it, residual)
    return EigenPair(lam, _orient(x), residual, it)


def _orient(x):
    total = x.sum()
    if abs(total) > ZERO_TOL:
        sign = np.sign(total)
    else:
        nz = np.flatnonzero(np.abs(x) > ZERO_TOL)
        sign = np.sign(x[nz[0]]) if nz.size else 1.0
    return x * sign


def _score(values, s, four_m):
    return float(s @ values @ s) / four_m


def _greedy(values, s, Bs, diag):
    while True:
        # change in s^T B s when s_i -> -s_i
        delta = 4.0 * (diag - s * Bs)
        i = int(np.argmax(delta))
        if delta[i] <= ZERO_TOL * max(1.0, np.abs(Bs).max()):
            return
        Bs -= 2.0 * s[i] * values[:, i]
        s[i] = -s[i]


def _kl_pass(values, s, Bs, diag):
    """One Kernighan-Lin pass: flip every vertex once, best flip first (even
    when it lowers the score), then roll back to the best prefix. Returns the
    score improvement kept."""
    n = s.size
    free = np.ones(n, dtype=bool)
    order = []
    total = best = 0.0
    best_len = 0
    for _ in range(n):
        delta = np.where(free, 4.0 * (diag - s * Bs), -np.inf)
        i = int(np.argmax(delta))
        total += delta[i]
        Bs -= 2.0 * s[i] * values[:, i]
        s[i] = -s[i]
        free[i] = False
        order.append(i)
        if total > best + ZERO_TOL * max(1.0, abs(best)):
            best, best_len = total, len(order)
    for i in reversed(order[best_len:]):
        Bs -= 2.0 * s[i] * values[:, i]
        s[i] = -s[i]
    return best


def refine(values, s, sweeps=True):
    """Local refinement of a sign vector.

    Greedy single flips (always the flip that increases ``s^T B s`` most)
    until none helps; with ``sweeps``, Kernighan-Lin passes are then
    alternated with further greedy flips while a pass still improves the
    score. The result is never worse than the input and no single flip
    improves it. Returns a new vector.
    """
    s = np.array(s, dtype=float)
    Bs = values @ s
    diag = np.diag(values).copy()
    _greedy(values, s, Bs, diag)
    while sweeps and s.size > 1:
        if _kl_pass(values, s, Bs, diag) <= 0.0:
            break
        _greedy(values, s, Bs, diag)
    return s


def sign_split(u):
    return np.where(u < -ZERO_TOL, -1.0, 1.0)


def bisect(Bj: ModularityMatrix, tol=DEFAULT_TOL, max_iter=None, *, refine_split=True):
    """Best two-way split of the vertices of ``Bj``.

    Returns ``(s, score)`` with ``score = s^T Bj s / 4m``. A community is
    indivisible when the leading eigenvalue is ``<= tol`` or when the best
    split found has non-positive score; then ``s`` is all ones and the score
    is 0.
    """
    n = Bj.n
    ones = np.ones(n)
    if n < 2:
        return ones, 0.0
    pair = leading_eigenpair(Bj.values, tol, max_iter)
    if pair.eigenvalue <= tol:
        return ones, 0.0
    s = sign_split(pair.eigenvector)
    if refine_split:
        s = refine(Bj.values, s)
    score = _score(Bj.values, s, Bj.four_m)
    if score <= ZERO_TOL or np.all(s == s[0]):
        return ones, 0.0
    return s, score


def brute_force_bisect(Bj: ModularityMatrix, four_m=None):
    """Exhaustive maximiser of ``s^T Bj s / 4m`` (test oracle, n <= 20)."""
    n = Bj.n
    if n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"brute force limited to {BRUTE_FORCE_LIMIT} vertices, got {n}")
    if four_m is None:
        four_m = Bj.four_m
    if n == 1:
        return np.ones(1), 0.0
    # s_0 fixed to +1 by global sign symmetry
    tails = np.array(list(itertools.product((1.0, -1.0), repeat=n - 1)))
    S = np.hstack([np.ones((tails.shape[0], 1)), tails])
    scores = np.einsum("ij,jk,ik->i", S, Bj.values, S) / four_m
    best = int(np.argmax(scores))
    return S[best], float(scores[best])
