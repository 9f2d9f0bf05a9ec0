import math

import numpy as np
import pytest

from dol.classify import (
    VerdictKind,
    classify,
    detect_period,
    pseudo_ordered_scan,
    ratio_trace,
    slow_gap_ok,
)
from dol.fnspace import Segment, in_S, order_relation, Order
from dol.harness import rapid_seed
from dol.integrator import Trajectory, evolve
from dol.model import make_model
from dol.spectrum import build_decomp
from oracles import random_fourier

sin5 = Segment.from_function(lambda t: 0.1 * np.sin(5 * np.pi * t),
                             lambda t: 0.5 * np.pi * np.cos(5 * np.pi * t))


@pytest.fixture(scope="module")
def d2():
    return build_decomp(0, 2, 3)


# -- classify


def test_constant_is_slow_at_one(tanh2):
    v = classify(tanh2, Segment.constant(0.5), 50)
    assert v.kind is VerdictKind.EVENTUALLY_SLOW
    assert v.entry_time == 1.0


def test_zero_converges(tanh2):
    v = classify(tanh2, Segment.zeros(), 20)
    assert v.kind is VerdictKind.CONVERGED_TO_ZERO
    assert v.tail_norm == 0.0


def test_decaying_solution_converges():
    # mu > beta: zero is asymptotically stable, a tiny history decays below 1e-7
    m = make_model(2.0, "tanh:1")
    v = classify(m, Segment.zeros() + sin5 * 1e-9, 50)
    assert v.kind is VerdictKind.CONVERGED_TO_ZERO


def test_sin5_eventually_slow(tanh2):
    v = classify(tanh2, sin5, 200)
    assert v.kind is VerdictKind.EVENTUALLY_SLOW
    assert math.isfinite(v.entry_time) and v.entry_time >= 1
    assert in_S(evolve(tanh2, sin5, v.entry_time).segment_at(v.entry_time))
    assert slow_gap_ok(v)


def test_entry_time_is_first_sample(tanh2):
    phi = random_fourier(np.random.default_rng(8), modes=8, amp=0.05)
    v = classify(tanh2, phi, 60)
    tr = evolve(tanh2, phi, 60)
    t = 1.0
    while t < v.entry_time:
        assert not in_S(tr.segment_at(t))
        t += 0.25
    assert in_S(tr.segment_at(v.entry_time))


def test_not_slow_by_horizon(tanh2, d2):
    phi = rapid_seed(tanh2, d2, 3, 1e-3)
    v = classify(tanh2, phi, 5)
    assert v.kind is VerdictKind.NOT_SLOW_BY_HORIZON
    assert v.min_zero_gap < 1
    assert v.sign_change_profile == [6, 7, 6, 7, 6]
    assert "entry_time" not in v.to_dict()


def test_horizon_too_short(tanh2):
    with pytest.raises(ValueError):
        classify(tanh2, Segment.constant(1.0), 2)


def test_classify_deterministic(tanh2):
    phi = random_fourier(np.random.default_rng(1), modes=8, amp=0.5)
    a = classify(tanh2, phi, 100).to_dict()
    b = classify(tanh2, phi, 100).to_dict()
    assert a == b


def test_slow_gaps(tanh2):
    rng = np.random.default_rng(12)
    for _ in range(20):
        v = classify(tanh2, random_fourier(rng, modes=8, amp=0.5), 100)
        if v.is_slow:
            assert np.all(v.gaps_after(v.entry_time + 1) > 1)


# -- pseudo order


def test_pseudo_order_constant(tanh2):
    tr = evolve(tanh2, Segment.constant(0.5), 20)
    pair = pseudo_ordered_scan(tanh2, tr, 0.25)
    assert pair is not None
    t1, t2 = pair
    assert t1 < t2
    assert order_relation(tr.segment_at(t2), tr.segment_at(t1)) is Order.ORDERED


def test_pseudo_order_zero(tanh2):
    assert pseudo_ordered_scan(tanh2, evolve(tanh2, Segment.zeros(), 10), 0.25) is None


def test_pseudo_order_short_trajectory(tanh2):
    with pytest.raises(ValueError):
        pseudo_ordered_scan(tanh2, evolve(tanh2, Segment.zeros(), 0.3), 0.25)


def test_pseudo_order_implies_slow(tanh2, d2):
    rng = np.random.default_rng(21)
    phis = [random_fourier(rng, modes=8, amp=0.5) for _ in range(15)]
    phis += [rapid_seed(tanh2, d2, k, 1e-2) for k in (1, 2, 3)]
    for phi in phis:
        tr = evolve(tanh2, phi, 100)
        if pseudo_ordered_scan(tanh2, tr, 0.25) is not None:
            assert classify(tanh2, phi, 100, traj=tr).kind in (
                VerdictKind.EVENTUALLY_SLOW, VerdictKind.CONVERGED_TO_ZERO)


# -- ratio trace


def _window_max(tr, lo, hi):
    return max(r for t, r in zip(tr.times, tr.ratios) if lo <= t < hi)


@pytest.mark.parametrize("base", ["zero", "rapid"])
def test_ratio_trace_constant_shift(tanh2, d2, base):
    phi = Segment.zeros() if base == "zero" else rapid_seed(tanh2, d2, 1, 0.5)
    tr = ratio_trace(d2, tanh2, phi, phi.shifted(0.1), 50)
    assert tr.t0 == 0.0
    assert tr.times[0] == 2.0 and tr.times[-1] == 50.0
    assert all(r >= 0 for r in tr.ratios) and not any(tr.flagged)
    assert math.isfinite(tr.max_ratio)
    # no growth after the transient
    assert _window_max(tr, 40, 51) <= 1.01 * _window_max(tr, 30, 40)


def test_ratio_trace_equal_rejected(tanh2, d2):
    with pytest.raises(ValueError):
        ratio_trace(d2, tanh2, sin5, sin5, 20)


def test_ratio_trace_linear_decay(d2):
    lm = make_model(0, "linear:2", allow_unbounded=True)
    c3 = Segment.from_function(lambda t: np.cos(3 * np.pi * t),
                               lambda t: -3 * np.pi * np.sin(3 * np.pi * t))
    h = d2.basis[0] + d2.project_Q(c3) * 0.2
    tr = ratio_trace(d2, lm, Segment.zeros(), h, 14)
    rate = np.polyfit(tr.times, np.log(tr.ratios), 1)[0]
    expect = d2.strip_roots(1)[0].lam.real - d2.leading[0].lam.real
    assert rate == pytest.approx(expect, rel=0.05)


def test_ratio_csv(tanh2, d2):
    tr = ratio_trace(d2, tanh2, Segment.zeros(), Segment.constant(0.1), 6)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,ratio,flagged" and len(lines) == 1 + len(tr.times)


# -- period


def test_period_synthetic():
    w = 2 * np.pi / 3
    tr = Trajectory.from_function(lambda t: np.sin(w * t), lambda t: w * np.cos(w * t), 60)
    assert detect_period(tr, 10) == pytest.approx(3.0, abs=1e-3)


def test_period_slow_orbit(tanh2):
    tr = evolve(tanh2, Segment.constant(0.5), 200)
    p = detect_period(tr, 100)
    assert p is not None and p > 2


def test_period_none_for_zero(tanh2):
    assert detect_period(evolve(tanh2, Segment.zeros(), 30), 10) is None


def test_period_short_tail(tanh2):
    with pytest.raises(ValueError):
        detect_period(evolve(tanh2, Segment.zeros(), 15), 10)
