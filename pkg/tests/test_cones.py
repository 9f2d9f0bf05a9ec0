import numpy as np
import pytest

from dol.cones import (
    ConeC,
    _all_interior,
    _unit_circle,
    check_cone_invariance,
    check_order_preservation,
    estimate_kappa,
    in_cone_C,
    random_directions,
)
from dol.fnspace import Segment, SegmentError, c1_norm, in_int_S1, in_S
from dol.integrator import evolve, variational_evolve
from dol.spectrum import build_decomp, project_L, project_Q
from oracles import random_fourier, random_in_S

cos3 = Segment.from_function(lambda t: np.cos(3 * np.pi * t), lambda t: -3 * np.pi * np.sin(3 * np.pi * t))


@pytest.fixture(scope="module")
def d2():
    return build_decomp(0, 2, 3)


@pytest.fixture(scope="module")
def kappa2(d2):
    return estimate_kappa(d2, 100, seed=0)


# -- cone C


def test_basis_vector_in_cone(d2):
    c = ConeC(d2, 0.01)
    assert in_cone_C(c, d2.basis[0]) and d2.basis[1] in c


def test_pure_Q_not_in_cone(d2):
    q = project_Q(d2, cos3)
    assert c1_norm(q) > 0.1
    assert not in_cone_C(ConeC(d2, 10.0), q)


def test_small_Q_perturbation(d2):
    q = project_Q(d2, cos3)
    q = q * (1 / c1_norm(q))
    v1 = d2.basis[0]
    kappa = 0.3
    # |Pi_Q(v1 + dq)| = d and |Pi_L(v1 + dq)| = |v1| = 1
    assert in_cone_C(ConeC(d2, kappa), v1 + q * (0.9 * kappa))
    assert not in_cone_C(ConeC(d2, kappa), v1 + q * (1.1 * kappa))


def test_cone_validation(d2):
    with pytest.raises(ValueError):
        ConeC(d2, 0.0)
    with pytest.raises(SegmentError):
        in_cone_C(ConeC(d2, 1.0), Segment(np.ones(d2.n + 1)))


@pytest.mark.parametrize("k", [3.0, -0.5, 1e-4])
def test_cone_scale_invariance(d2, k):
    c = ConeC(d2, 0.4)
    rng = np.random.default_rng(9)
    V, D = random_directions(rng, 20)
    for v, dv in zip(V, D):
        s = Segment(v, dv) + d2.basis[1] * rng.uniform(0, 3)
        assert in_cone_C(c, s) == in_cone_C(c, s * k)
        assert in_S(s) == in_S(s * k)
        assert in_int_S1(s) == in_int_S1(s * k)


# -- kappa


def test_kappa_certified(d2, kappa2):
    rng = np.random.default_rng(0)
    QV, QD = random_directions(rng, 100, d2.n)
    PV, PD = _unit_circle(d2, 64)
    assert kappa2 > 0
    assert _all_interior(PV, PD, QV, QD, kappa2)
    assert not _all_interior(PV, PD, QV, QD, 2 * kappa2)
    # kappa -> 0+: the unit circle of L itself is interior
    assert _all_interior(PV, PD, QV, QD, 0.0)


def test_kappa_needs_samples(d2):
    with pytest.raises(ValueError):
        estimate_kappa(d2, 50)


def test_kappa_deterministic(d2, kappa2):
    assert estimate_kappa(d2, 100, seed=0) == kappa2


def test_cone_inside_interior(d2, kappa2):
    """500 random elements of C (kappa_hat / 2) lie in Int S^1."""
    c = ConeC(d2, kappa2 / 2)
    rng = np.random.default_rng(123)
    V, D = random_directions(rng, 500)
    v1, v2 = d2.basis
    for v, dv in zip(V, D):
        a = rng.normal(size=2)
        p = v1 * a[0] + v2 * a[1]
        q = project_Q(d2, Segment(v, dv))
        q = q * (rng.uniform(0, 1) * c.kappa * c1_norm(p) / c1_norm(q))
        psi = p + q
        assert in_cone_C(c, psi)
        assert in_int_S1(psi)


def test_L_minus_zero_in_interior():
    for mu, beta in [(0, 0.1), (0, np.exp(-1)), (0, 2), (1, 5)]:
        d = build_decomp(mu, beta, 1)
        PV, PD = _unit_circle(d, 128)
        for v, dv in zip(PV, PD):
            assert in_int_S1(Segment(v, dv, check=False))


# -- monotonicity


def test_cone_invariance_linear_phi(tanh2):
    rep = check_cone_invariance(tanh2, Segment.from_function(lambda t: t + 0.5, lambda t: 1 + 0 * t), 50, 0.25)
    assert rep.ok
    assert len(rep.times) == len(rep.verdicts) == 201
    assert all(v == "interior" for v, t in zip(rep.verdicts, rep.times) if t >= 3)


def test_cone_invariance_constant_phi(tanh2):
    phi = Segment.constant(0.3)
    rep = check_cone_invariance(tanh2, phi, 50, 0.25)
    assert rep.ok
    # the solution changes sign, so K+ is left while S is kept
    tr = evolve(tanh2, phi, 50)
    assert np.min(tr.x) < 0


def test_cone_invariance_rejects_cos3(tanh2):
    with pytest.raises(ValueError):
        check_cone_invariance(tanh2, cos3, 10)


def test_order_preservation_constant_shift(tanh2):
    for phi in (cos3, random_fourier(np.random.default_rng(4), amp=1.5)):
        rep = check_order_preservation(tanh2, phi, phi.shifted(0.1), 50, 0.25)
        assert rep.ok
        assert set(rep.verdicts) == {"ordered"}


def test_order_preservation_equal(tanh2):
    rep = check_order_preservation(tanh2, cos3, cos3, 20, 0.25)
    assert set(rep.verdicts) == {"equal"}
    assert rep.first_violation is None


def test_order_preservation_unordered(tanh2):
    with pytest.raises(ValueError):
        check_order_preservation(tanh2, Segment.zeros(), cos3, 10)


def test_variational_cone_invariance(tanh2):
    rng = np.random.default_rng(77)
    for _ in range(50):
        phi = random_fourier(rng, amp=rng.uniform(0.1, 2))
        xi = random_in_S(rng)
        base = evolve(tanh2, phi, 10)
        v = variational_evolve(base, xi, 10)
        for t in (1, 3, 10):
            s = v.segment_at(t)
            assert in_S(s), t
            if t >= 3:
                assert in_int_S1(s), t


def test_report_to_dict(tanh2):
    rep = check_cone_invariance(tanh2, Segment.constant(1.0), 4, 1.0)
    out = rep.to_dict()
    assert out["times"] == [0, 1, 2, 3, 4]
    assert out["interior"][:3] == [None, None, None]
