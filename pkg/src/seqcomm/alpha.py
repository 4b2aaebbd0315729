"""Choosing the significance level from a target tolerance ratio.

The tolerance ratio at level ``alpha`` is the bootstrap estimate of
``P(K_hat < K*) / P(K_hat > K*)``, where ``K*`` is the value occupying the
longest interval of the observed step function ``alpha -> K_hat(alpha)``.
Bootstrap networks are drawn from the SBM fitted to the observed
``K*``-community partition and each is run through the full sequential
detection.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field


from . import seeding
from ._parallel import pmap
from .detect import (
    DEFAULT_BOOTSTRAP,
    DEFAULT_CONFIG,
    DEFAULT_K_MAX,
    DetectionTrace,
    DivisionConfig,
    Divider,
    detect,
    k_hat,
    k_hat_from_pvalues,
    step_function,
)
from .errors import Indivisible, NoFinitePiece, NonConvergence, ValidationError
from .graph import AdjacencyMatrix, Partition
from .sbm import fit_from_partition, generate

DEFAULT_EPS_ALPHA = 0.005
DEFAULT_MAX_ROUNDS = 10
INITIAL_ALPHA = 0.05


def _partition_with(A, k, config=DEFAULT_CONFIG):
    d = Divider(A, config=config)
    try:
        while d.K < k:
            d.step()
    except Indivisible:
        pass
    return d.partition


def _one_trace(b, fitted, seed, K_max, B_count, config):
    A, _ = generate(fitted, seeding.substream(seed, seeding.BOOT_NET, b))
    if A.m == 0:
        return None
    return detect(A, K_max, B_count, seeding.subseed(seed, seeding.BOOT_DETECT, b), config=config)


def bootstrap_traces(
    A: AdjacencyMatrix,
    k_ref: int,
    B_count=DEFAULT_BOOTSTRAP,
    K_max=DEFAULT_K_MAX,
    seed=seeding.DEFAULT_SEED,
    *,
    partition: Partition | None = None,
    workers=1,
    config: DivisionConfig = DEFAULT_CONFIG,
) -> list:
    """Detection traces for ``B_count`` networks simulated from the SBM fitted
    to the ``k_ref``-community partition of ``A``.

    ``partition`` defaults to the partition reached by dividing ``A`` until it
    has ``k_ref`` communities. A simulated network without edges yields a
    trace of ``None`` (read as ``K_hat = 1``).
    """
    if k_ref < 1:
        raise ValidationError("k_ref must be at least 1")
    if partition is None:
        partition = _partition_with(A, k_ref, config)
    fitted = fit_from_partition(A, partition)
    fn = functools.partial(_one_trace, fitted=fitted, seed=seed, K_max=K_max, B_count=B_count, config=config)
    return pmap(fn, range(B_count), workers)


def _p_values(trace):
    if trace is None:
        return [1.0]
    if isinstance(trace, DetectionTrace):
        return trace.p_values
    return list(trace)


def gamma_counts(traces, k_ref: int, alpha: float) -> tuple[int, int, int]:
    """``(underfit, overfit, equal)`` counts of ``K_hat(alpha)`` against
    ``k_ref``. Traces may also be given as plain p-value sequences."""
    under = over = equal = 0
    for tr in traces:
        k = k_hat_from_pvalues(_p_values(tr), alpha)
        if k < k_ref:
            under += 1
        elif k > k_ref:
            over += 1
        else:
            equal += 1
    return under, over, equal


def ratio(under: int, over: int) -> float:
    if over > 0:
        return under / over
    return math.inf if under > 0 else 0.0


def gamma_hat(traces, k_ref: int, alpha: float) -> float:
    if not traces:
        raise ValidationError("no bootstrap traces")
    under, over, _ = gamma_counts(traces, k_ref, alpha)
    return ratio(under, over)


@dataclass(frozen=True)
class GammaPiece:
    lo: float
    hi: float
    under: int
    over: int
    equal: int

    @property
    def gamma(self) -> float:
        return ratio(self.under, self.over)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class GammaCurve:
    """Piecewise-constant ``alpha -> gamma_hat(alpha)`` on ``[0, 1)``."""

    k_ref: int
    pieces: tuple

    def piece_at(self, alpha: float) -> GammaPiece:
        for pc in self.pieces:
            if pc.lo <= alpha < pc.hi:
                return pc
        raise ValidationError(f"alpha must lie in [0, 1), got {alpha}")

    def __call__(self, alpha: float) -> float:
        return self.piece_at(alpha).gamma


def gamma_curve(traces, k_ref: int) -> GammaCurve:
    """Exact tolerance-ratio curve over all alpha at once.

    Each ``K_hat`` is right-continuous and changes only at that trace's
    p-values, so the pooled p-values split ``[0, 1)`` into intervals on which
    every count is constant.
    """
    if not traces:
        raise ValidationError("no bootstrap traces")
    pvals = [_p_values(tr) for tr in traces]
    cuts = sorted({0.0, 1.0} | {float(p) for ps in pvals for p in ps if 0.0 < p < 1.0})
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        pieces.append(GammaPiece(lo, hi, *gamma_counts(pvals, k_ref, lo)))
    return GammaCurve(k_ref, tuple(pieces))


def select_alpha(curve: GammaCurve, target_gamma: float) -> tuple[float, float]:
    """Representative alpha of the piece whose ratio is closest to the target.

    Ties among equally close pieces go to the piece nearest the point where
    the (non-increasing) curve crosses the target: the rightmost of pieces
    above the target, the leftmost of pieces below it, and the rightmost of
    pieces hitting it exactly. Infinite pieces are never chosen while a finite
    one exists.
    """
    if target_gamma < 0:
        raise ValidationError("target gamma must be non-negative")
    finite = [i for i, pc in enumerate(curve.pieces) if math.isfinite(pc.gamma)]
    if not finite:
        raise NoFinitePiece("every piece of the tolerance-ratio curve is infinite")
    dist = {i: abs(curve.pieces[i].gamma - target_gamma) for i in finite}
    best = min(dist.values())
    tied = [i for i in finite if dist[i] <= best + 1e-12]
    exact = [i for i in tied if curve.pieces[i].gamma == target_gamma]
    below = [i for i in tied if curve.pieces[i].gamma < target_gamma]
    if exact:
        i = exact[-1]
    elif below:
        i = below[0]
    else:
        i = tied[-1]
    pc = curve.pieces[i]
    return pc.midpoint, pc.gamma


def least_underfit_alpha(curve: GammaCurve) -> float:
    """Representative alpha of the leftmost piece with the fewest underfits.

    Used when no bootstrap network overfits at any alpha, so the ratio is
    infinite everywhere. Underfit counts only fall as alpha grows; this picks
    the smallest alpha at which they stop falling, the same point the crossing
    rule of :func:`select_alpha` picks when every finite piece is zero.
    """
    fewest = min(pc.under for pc in curve.pieces)
    return next(pc for pc in curve.pieces if pc.under == fewest).midpoint


@dataclass
class ToleranceReport:
    target_gamma: float
    selected_alpha: float
    achieved_gamma: float
    k_star: int
    k_hat_at_alpha: int
    underfit_count: int
    overfit_count: int
    equal_count: int
    iterations: int
    alpha_precision: float
    converged: bool = True
    alpha_history: list = field(default_factory=list)

    @property
    def B_count(self) -> int:
        return self.underfit_count + self.overfit_count + self.equal_count


def calibrate_many(
    A: AdjacencyMatrix,
    target_gammas,
    eps_alpha=DEFAULT_EPS_ALPHA,
    B_count=DEFAULT_BOOTSTRAP,
    K_max=DEFAULT_K_MAX,
    max_rounds=DEFAULT_MAX_ROUNDS,
    seed=seeding.DEFAULT_SEED,
    *,
    workers=1,
    trace: DetectionTrace | None = None,
    config: DivisionConfig = DEFAULT_CONFIG,
) -> list[ToleranceReport]:
    """Calibrate alpha for several targets on one shared set of bootstrap
    rounds.

    Round ``r`` draws a fresh bootstrap set from substream ``(seed, r)`` and
    every still-unconverged target selects its alpha from that set. A target
    converges once two consecutive alphas (starting from 0.05) differ by less
    than ``eps_alpha``. A round whose curve is infinite everywhere falls back
    to :func:`least_underfit_alpha`. Reports for targets that never converge carry
    ``converged=False``.
    """
    if eps_alpha <= 0:
        raise ValidationError("eps_alpha must be positive")
    if max_rounds < 1:
        raise ValidationError("max_rounds must be at least 1")
    targets = [float(g) for g in target_gammas]
    if any(g < 0 for g in targets):
        raise ValidationError("target gamma must be non-negative")
    if trace is None:
        trace = detect(A, K_max, B_count, seed, workers=workers, config=config)
    k_star = step_function(trace).k_star
    part = trace.partition_for(k_star)
    # K_hat beyond k_star + 1 is never needed to classify a bootstrap trace
    boot_kmax = min(K_max, k_star)

    history = {i: [INITIAL_ALPHA] for i in range(len(targets))}
    last = {}
    pending = set(history)
    rounds = 0
    while pending and rounds < max_rounds:
        rounds += 1
        traces = bootstrap_traces(
            A, k_star, B_count, boot_kmax, seeding.subseed(seed, seeding.CAL_ROUND, rounds),
            partition=part, workers=workers, config=config,
        )
        curve = gamma_curve(traces, k_star)
        for i in sorted(pending):
            try:
                alpha, _ = select_alpha(curve, targets[i])
            except NoFinitePiece:
                alpha = least_underfit_alpha(curve)
            history[i].append(alpha)
            last[i] = (curve.piece_at(alpha), rounds)
        pending = {i for i in pending if abs(history[i][-1] - history[i][-2]) >= eps_alpha}

    reports = []
    for i, g in enumerate(targets):
        pc, r = last[i]
        alpha = history[i][-1]
        reports.append(
            ToleranceReport(
                target_gamma=g,
                selected_alpha=alpha,
                achieved_gamma=pc.gamma,
                k_star=k_star,
                k_hat_at_alpha=k_hat(trace, alpha),
                underfit_count=pc.under,
                overfit_count=pc.over,
                equal_count=pc.equal,
                iterations=r,
                alpha_precision=eps_alpha,
                converged=i not in pending,
                alpha_history=history[i],
            )
        )
    return reports


def calibrate(
    A: AdjacencyMatrix,
    target_gamma: float,
    eps_alpha=DEFAULT_EPS_ALPHA,
    B_count=DEFAULT_BOOTSTRAP,
    K_max=DEFAULT_K_MAX,
    max_rounds=DEFAULT_MAX_ROUNDS,
    seed=seeding.DEFAULT_SEED,
    *,
    workers=1,
    trace: DetectionTrace | None = None,
    config: DivisionConfig = DEFAULT_CONFIG,
) -> ToleranceReport:
    """Iterate bootstrap rounds until the selected alpha settles.

    Raises :class:`NonConvergence` (holding the alpha sequence and the last
    report) if ``max_rounds`` is reached first.
    """
    (report,) = calibrate_many(
        A, [target_gamma], eps_alpha, B_count, K_max, max_rounds, seed, workers=workers, trace=trace, config=config
    )
    if not report.converged:
        raise NonConvergence(report.alpha_history, report)
    return report
