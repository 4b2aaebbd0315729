import math

import numpy as np
import pytest

from seqcomm.alpha import (
    GammaCurve,
    GammaPiece,
    bootstrap_traces,
    calibrate,
    calibrate_many,
    gamma_counts,
    gamma_curve,
    gamma_hat,
    least_underfit_alpha,
    ratio,
    select_alpha,
)
from seqcomm.detect import detect, k_hat_from_pvalues
from seqcomm.sbm import generate, planted_params
from seqcomm.errors import NoFinitePiece, NonConvergence, ValidationError

from conftest import barbell


def test_ratio():
    assert ratio(3, 2) == 1.5
    assert ratio(2, 0) == math.inf
    assert ratio(0, 0) == 0.0
    assert ratio(0, 5) == 0.0


def test_gamma_counts_example():
    # K_hat at alpha = 0.05 is 1, 2, 3 and 4 for these traces
    traces = [[0.5], [0.01, 0.5], [0.01, 0.02, 0.5], [0.01, 0.02, 0.03, 0.9]]
    assert gamma_counts(traces, 3, 0.05) == (2, 1, 1)
    assert gamma_hat(traces, 3, 0.05) == 2.0
    # a missing trace (edgeless bootstrap network) reads as K_hat = 1
    assert gamma_counts([None], 2, 0.05) == (1, 0, 0)


def test_gamma_hat_needs_traces():
    with pytest.raises(ValidationError):
        gamma_hat([], 2, 0.05)


def test_gamma_curve_example():
    traces = [[0.2], [0.01, 0.6], [0.01, 0.03, 0.9]]
    curve = gamma_curve(traces, 2)
    assert [(p.lo, p.hi) for p in curve.pieces] == [(0, 0.01), (0.01, 0.03), (0.03, 0.2), (0.2, 0.6), (0.6, 0.9), (0.9, 1)]
    assert [p.gamma for p in curve.pieces] == [math.inf, math.inf, 1.0, 0.0, 0.0, 0.0]
    assert curve(0.02) == math.inf
    assert curve(0.1) == 1.0
    with pytest.raises(ValidationError):
        curve.piece_at(1.0)


def test_gamma_curve_single_trace():
    curve = gamma_curve([[0.1, 0.4, 0.9]], 2)
    assert [p.gamma for p in curve.pieces] == [math.inf, 0.0, 0.0, 0.0]
    assert [(p.under, p.over) for p in curve.pieces] == [(1, 0), (0, 0), (0, 1), (0, 1)]


def _random_traces(rng, count, max_len=6):
    out = []
    for _ in range(count):
        ps = np.round(rng.random(int(rng.integers(1, max_len))) ** 2, 3).tolist()
        out.append(ps)
    return out


def test_curve_matches_pointwise_and_is_non_increasing():
    rng = np.random.default_rng(77)
    for _ in range(200):
        traces = _random_traces(rng, int(rng.integers(1, 30)))
        k_ref = int(rng.integers(1, 5))
        curve = gamma_curve(traces, k_ref)
        finite = [p.gamma for p in curve.pieces if math.isfinite(p.gamma)]
        assert all(a >= b for a, b in zip(finite, finite[1:]))
        # infinite pieces only ever precede finite ones
        inf_idx = [i for i, p in enumerate(curve.pieces) if math.isinf(p.gamma)]
        assert inf_idx == list(range(len(inf_idx)))
        for p in curve.pieces:
            assert p.under + p.over + p.equal == len(traces)
            for a in (p.lo, p.midpoint, np.nextafter(p.hi, 0)):
                assert curve(a) == gamma_hat(traces, k_ref, a)


def _curve(gammas):
    edges = np.linspace(0, 1, len(gammas) + 1)
    pieces = []
    for lo, hi, g in zip(edges[:-1], edges[1:], gammas):
        under, over = (1, 0) if g == math.inf else (int(round(g * 4)), 4)
        if g == 0:
            under, over = 0, 4
        pieces.append(GammaPiece(float(lo), float(hi), under, over, 0))
    return GammaCurve(2, tuple(pieces))


@pytest.mark.parametrize(
    "target, piece",
    [
        (1.0, 2),  # exact match
        (1.5, 2),  # equidistant from 2 and 1: take the first piece at or below the target
        (3.0, 1),  # equidistant from 4 and 2: below wins
        (0.0, 4),  # several exact zeros would go to the rightmost
        (10.0, 0),
        (0.7, 3),
    ],
)
def test_select_alpha_examples(target, piece):
    curve = _curve([4, 2, 1, 0.5, 0])
    alpha, g = select_alpha(curve, target)
    assert alpha == pytest.approx(curve.pieces[piece].midpoint)
    assert g == curve.pieces[piece].gamma


def test_select_alpha_rightmost_exact_zero():
    curve = _curve([2, 1, 0, 0, 0])
    alpha, g = select_alpha(curve, 0.0)
    assert g == 0 and alpha == pytest.approx(curve.pieces[-1].midpoint)


def test_select_alpha_skips_infinite():
    curve = _curve([math.inf, 3])
    assert select_alpha(curve, 100.0)[1] == 3.0
    with pytest.raises(NoFinitePiece):
        select_alpha(_curve([math.inf]), 1.0)
    with pytest.raises(ValidationError):
        select_alpha(curve, -1.0)


def test_least_underfit_alpha():
    pieces = (
        GammaPiece(0.0, 0.1, 5, 0, 0),
        GammaPiece(0.1, 0.3, 2, 0, 3),
        GammaPiece(0.3, 0.6, 2, 0, 3),
        GammaPiece(0.6, 1.0, 2, 0, 3),
    )
    assert least_underfit_alpha(GammaCurve(2, pieces)) == pytest.approx(0.2)
    # agrees with the crossing rule once the underfits vanish
    zeroed = tuple(GammaPiece(p.lo, p.hi, max(p.under - 2, 0), 0, 5 - max(p.under - 2, 0)) for p in pieces)
    assert select_alpha(GammaCurve(2, zeroed), 1.0)[0] == least_underfit_alpha(GammaCurve(2, zeroed))


def test_selected_alpha_monotone_in_target():
    rng = np.random.default_rng(8)
    for _ in range(100):
        curve = gamma_curve(_random_traces(rng, 40), int(rng.integers(2, 4)))
        if not any(math.isfinite(p.gamma) for p in curve.pieces):
            continue
        alphas = [select_alpha(curve, g)[0] for g in (0.25, 0.5, 1.0, 2.0, 4.0)]
        assert all(a >= b for a, b in zip(alphas, alphas[1:]))


def test_bootstrap_traces_barbell():
    traces = bootstrap_traces(barbell(), 2, B_count=10, K_max=3, seed=4)
    assert len(traces) == 10
    again = bootstrap_traces(barbell(), 2, B_count=10, K_max=3, seed=4)
    assert [None if t is None else t.p_values for t in traces] == [None if t is None else t.p_values for t in again]
    with pytest.raises(ValidationError):
        bootstrap_traces(barbell(), 0)


def test_calibrate_barbell_report():
    # bootstrap barbells never overfit, so rounds fall back to the fewest-underfit piece
    (rep,) = calibrate_many(barbell(), [1.0], B_count=40, K_max=4, seed=9, max_rounds=3)
    assert rep.k_star == 2
    assert rep.overfit_count == 0 and rep.achieved_gamma in (0.0, math.inf)
    assert rep.B_count == 40
    assert rep.underfit_count + rep.overfit_count + rep.equal_count == 40
    assert 0 <= rep.selected_alpha < 1
    assert rep.alpha_history[0] == 0.05
    assert len(rep.alpha_history) == rep.iterations + 1


def _small_planted():
    A, _ = generate(planted_params(2, 20, 0.3), 3)
    return A


def test_calibrate_report_invariants():
    rep = calibrate(_small_planted(), 1.0, B_count=15, K_max=4, seed=9, max_rounds=4)
    assert rep.converged
    assert rep.k_star == 2
    assert rep.underfit_count + rep.overfit_count + rep.equal_count == rep.B_count == 15
    assert rep.achieved_gamma == ratio(rep.underfit_count, rep.overfit_count)
    assert abs(rep.alpha_history[-1] - rep.alpha_history[-2]) < rep.alpha_precision
    assert len(rep.alpha_history) == rep.iterations + 1


def test_calibrate_many_shares_rounds():
    A = _small_planted()
    trace = detect(A, 4, 15, 9)
    reps = calibrate_many(A, [0.5, 1.0, 2.0], B_count=15, K_max=4, seed=9, max_rounds=4, trace=trace)
    assert [r.target_gamma for r in reps] == [0.5, 1.0, 2.0]
    alphas = [r.selected_alpha for r in reps]
    assert alphas[0] >= alphas[1] >= alphas[2]
    single = calibrate(A, 1.0, B_count=15, K_max=4, seed=9, max_rounds=4, trace=trace)
    assert single.selected_alpha == reps[1].selected_alpha
    for r in reps:
        assert r.k_hat_at_alpha == k_hat_from_pvalues(trace.p_values, r.selected_alpha)


def test_calibrate_nonconvergence_carries_history():
    with pytest.raises(NonConvergence) as err:
        calibrate(barbell(), 1.0, eps_alpha=1e-15, B_count=20, K_max=3, seed=1, max_rounds=2)
    # unless the very first round lands exactly on 0.05 the history is complete
    assert err.value.alphas[0] == 0.05
    assert len(err.value.alphas) == 3
    assert err.value.report is not None and not err.value.report.converged


def test_calibrate_validates():
    with pytest.raises(ValidationError):
        calibrate(barbell(), 1.0, eps_alpha=0)
    with pytest.raises(ValidationError):
        calibrate(barbell(), -1.0)
    with pytest.raises(ValidationError):
        calibrate(barbell(), 1.0, max_rounds=0)
