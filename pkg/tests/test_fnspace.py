import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dol.fnspace import (
    Order,
    Segment,
    SegmentError,
    Slope,
    c1_norm,
    find_zeros,
    in_int_S1,
    in_K,
    in_S,
    order_relation,
    segment_from_csv,
    segment_to_csv,
    sign_changes,
    sup_norm,
)
from dol.integrator import Trajectory

lin = Segment.from_function(lambda t: t + 0.5, lambda t: 1 + 0 * t)
cos3 = Segment.from_function(lambda t: np.cos(3 * np.pi * t), lambda t: -3 * np.pi * np.sin(3 * np.pi * t))
zero = Segment.zeros()
one = Segment.constant(1.0)
square = Segment.from_function(lambda t: t**2, lambda t: 2 * t)


# -- norms


def test_sup_norm_examples():
    assert sup_norm(Segment.constant(2.0)) == 2.0
    s = Segment.from_function(lambda t: np.sin(np.pi * t), n=512)
    assert abs(sup_norm(s) - 1.0) <= 1e-4
    assert sup_norm(zero) == 0.0


def test_c1_norm_examples():
    assert c1_norm(Segment.constant(2.0)) == 2.0
    assert c1_norm(Segment.from_function(lambda t: t, lambda t: 1 + 0 * t)) == 2.0
    assert c1_norm(zero) == 0.0


def test_c1_norm_needs_derivs():
    with pytest.raises(SegmentError):
        c1_norm(Segment(np.zeros(5)))


# -- segment construction


def test_inconsistent_derivs_rejected():
    with pytest.raises(SegmentError):
        Segment.from_function(lambda t: t, lambda t: 5 + 0 * t)


def test_non_finite_rejected():
    v = np.zeros(9)
    v[3] = np.nan
    with pytest.raises(SegmentError):
        Segment(v)


def test_arithmetic_and_call():
    s = lin * 2 - one
    assert np.allclose(s.values, 2 * s.theta)
    assert np.allclose(s.derivs, 2.0)
    assert s(-0.3) == pytest.approx(-0.6, abs=1e-12)
    assert lin.shifted(1.0)(-1.0) == pytest.approx(0.5)
    with pytest.raises(SegmentError):
        lin + Segment.constant(1.0, n=128)


# -- sign changes and S


def test_sign_changes_examples():
    assert sign_changes(lin, 0.0) == 1
    assert sign_changes(cos3, 0.0) == 3
    assert sign_changes(zero) is None


def test_in_S_examples():
    assert in_S(lin)
    assert not in_S(cos3)
    assert not in_S(zero)


def test_dead_band_run_counts_once():
    v = np.array([1.0, 0.5, 0.0, 0.0, 0.0, -0.5, -1.0])
    assert sign_changes(Segment(v), 0.0) == 1
    # end runs inherit the neighbouring sign
    assert sign_changes(Segment(np.array([0.0, 0.0, 1.0, 2.0, 0.0])), 0.0) == 0


def test_in_int_S1_examples():
    assert in_int_S1(lin)
    assert not in_int_S1(square)
    assert in_int_S1(one)


def test_in_int_S1_rejects_touching_zero():
    touch = Segment.from_function(lambda t: (t + 0.5) ** 2, lambda t: 2 * (t + 0.5))
    assert in_S(touch)
    assert not in_int_S1(touch)


def test_in_int_S1_needs_derivs():
    with pytest.raises(SegmentError):
        in_int_S1(Segment(np.ones(5)))


def test_in_K_examples():
    assert in_K(Segment.constant(0.1), +1)
    assert not in_K(lin, +1)
    assert not in_K(zero, -1)
    assert in_K(Segment.constant(-0.1), -1)


def test_order_relation_examples():
    a = cos3.shifted(0.1)
    assert order_relation(a, cos3) is Order.ORDERED
    assert order_relation(cos3 * 2, cos3) is Order.UNORDERED
    assert order_relation(lin, lin) is Order.EQUAL


def test_order_relation_grid_mismatch():
    with pytest.raises(SegmentError):
        order_relation(Segment.constant(1.0, 64), Segment.constant(1.0, 128))


# -- properties

values = arrays(np.float64, st.integers(5, 60),
                elements=st.floats(-10, 10, allow_nan=False, allow_subnormal=False))


@settings(max_examples=200, deadline=None)
@given(values, st.floats(1e-3, 1e3).flatmap(lambda k: st.sampled_from([k, -k])))
def test_sign_changes_scale_invariant(v, k):
    s = Segment(v)
    # eta scaled alongside the samples so the dead band is scale-free
    assert sign_changes(s * k, 1e-9 * abs(k)) == sign_changes(s, 1e-9)


@settings(max_examples=200, deadline=None)
@given(values, values)
def test_order_relation_symmetric(a, b):
    n = min(a.size, b.size)
    sa, sb = Segment(a[:n]), Segment(b[:n])
    assert order_relation(sa, sb) is order_relation(sb, sa)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1.5, 0.5), st.floats(0.1, 3), st.floats(-2, 2))
def test_int_S1_implies_S(tau, a, c):
    s = Segment.from_function(lambda t: a * (t - tau) + c * (t - tau) ** 3,
                              lambda t: a + 3 * c * (t - tau) ** 2)
    if in_int_S1(s):
        assert in_S(s)


# -- zeros on dense output


def _traj(fn, dfn, span=1.0, n=256):
    return Trajectory.from_function(fn, dfn, span, n)


def test_find_zeros_linear():
    tr = _traj(lambda t: t - 0.5, lambda t: 1 + 0 * t)
    z = find_zeros(tr, 0.0, 1.0)
    assert len(z) == 1
    assert z[0].time == pytest.approx(0.5, abs=1e-10)
    assert z[0].slope is Slope.POS


def test_find_zeros_constant():
    assert find_zeros(_traj(lambda t: 1 + 0 * t, lambda t: 0 * t), 0.0, 1.0) == []


def test_find_zeros_sine():
    tr = _traj(lambda t: np.sin(2 * np.pi * t), lambda t: 2 * np.pi * np.cos(2 * np.pi * t))
    z = find_zeros(tr, 0.0, 1.0)
    assert np.allclose([r.time for r in z], [0.0, 0.5, 1.0], atol=1e-8)
    assert [r.slope for r in z] == [Slope.POS, Slope.NEG, Slope.POS]


def test_find_zeros_off_grid_accuracy():
    r = 1 / 3
    tr = _traj(lambda t: np.sin(5 * (t - r)), lambda t: 5 * np.cos(5 * (t - r)), span=2.0, n=64)
    z = [q.time for q in find_zeros(tr, 0.0, 2.0)]
    expect = r + np.pi / 5 * np.arange(4)
    expect = expect[expect <= 2]
    assert np.allclose(z, expect, atol=1e-8)
    assert all(b > a for a, b in zip(z, z[1:]))


def test_find_zeros_out_of_span():
    with pytest.raises(ValueError):
        find_zeros(_traj(lambda t: t, lambda t: 1 + 0 * t), 0.0, 2.0)


# -- serialization


def test_csv_round_trip():
    for s in (lin, Segment(np.linspace(0, 1, 9))):
        back = segment_from_csv(segment_to_csv(s))
        assert np.array_equal(back.values, s.values)
        if s.derivs is not None:
            assert np.array_equal(back.derivs, s.derivs)
    assert segment_to_csv(lin).splitlines()[0] == "theta,value,deriv"
