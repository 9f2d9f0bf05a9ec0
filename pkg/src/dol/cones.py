"""The rank-2 cone of functions with at most one sign change, and monotonicity checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fnspace import (
    DEFAULT_N,
    Order,
    Segment,
    SegmentError,
    c1_norm,
    in_int_S1_batch,
    in_S,
    in_S_batch,
    order_relation,
)
from .integrator import evolve
from .model import Model
from .spectrum import SpectralDecomp, project_L, project_Q

__all__ = [
    "ConeC",
    "MonotonicityReport",
    "check_cone_invariance",
    "check_order_preservation",
    "estimate_kappa",
    "in_cone_C",
    "random_directions",
    "sample_times",
]


@dataclass(frozen=True)
class ConeC:
    """``{psi : |Pi_Q psi|_C1 <= kappa * |Pi_L psi|_C1}``."""

    decomp: SpectralDecomp
    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")

    def __contains__(self, s: Segment) -> bool:
        return in_cone_C(self, s)


def in_cone_C(c: ConeC, s: Segment) -> bool:
    if s.derivs is None:
        raise SegmentError("cone membership needs derivative samples")
    q = c1_norm(project_Q(c.decomp, s))
    ell = c1_norm(project_L(c.decomp, s))
    return q <= c.kappa * ell


def random_directions(rng: np.random.Generator, count: int, n: int = DEFAULT_N,
                      modes: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Random trigonometric polynomials on [-1, 0] with unit C^1-norm.

    Returns (values, derivs), one direction per row.
    """
    theta = np.linspace(-1.0, 0.0, n + 1)
    k = np.arange(1, modes + 1) * np.pi
    a = rng.uniform(-1.0, 1.0, (count, modes))
    b = rng.uniform(-1.0, 1.0, (count, modes))
    c0 = rng.uniform(-1.0, 1.0, (count, 1))
    arg = np.outer(k, theta)
    cos, sin = np.cos(arg), np.sin(arg)
    V = c0 + a @ cos + b @ sin
    D = -(a * k) @ sin + (b * k) @ cos
    norm = np.abs(V).max(axis=1) + np.abs(D).max(axis=1)
    return V / norm[:, None], D / norm[:, None]


def _unit_circle(d: SpectralDecomp, count: int) -> tuple[np.ndarray, np.ndarray]:
    v1, v2 = d.basis
    ang = 2 * np.pi * np.arange(count) / count
    V = np.cos(ang)[:, None] * v1.values + np.sin(ang)[:, None] * v2.values
    D = np.cos(ang)[:, None] * v1.derivs + np.sin(ang)[:, None] * v2.derivs
    norm = np.abs(V).max(axis=1) + np.abs(D).max(axis=1)
    return V / norm[:, None], D / norm[:, None]


def _all_interior(PV, PD, QV, QD, kappa) -> bool:
    for pv, pd in zip(PV, PD):
        if not np.all(in_int_S1_batch(pv + kappa * QV, pd + kappa * QD)):
            return False
    return True


def estimate_kappa(d: SpectralDecomp, nsamples: int = 100, seed: int = 0,
                   ncircle: int = 64, iters: int = 40) -> float:
    """Sampling estimate of a ball radius around the unit circle of L inside Int S^1.

    Bisects on ``kappa`` so that ``psi + kappa*q`` is in the interior for all
    ``ncircle`` points ``psi`` of the L unit circle and ``nsamples`` random
    unit directions ``q``. This is evidence, not a proof.
    """
    if nsamples < 100:
        raise ValueError("nsamples must be >= 100")
    rng = np.random.default_rng(seed)
    QV, QD = random_directions(rng, nsamples, d.n)
    PV, PD = _unit_circle(d, ncircle)
    if not np.all(in_int_S1_batch(PV, PD)):
        raise RuntimeError("leading eigenspace sample fell outside the interior")
    lo, hi = 0.0, 1.0
    while _all_interior(PV, PD, QV, QD, hi):
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            return lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _all_interior(PV, PD, QV, QD, mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class MonotonicityReport:
    times: list[float]
    verdicts: list[str]
    interior: list[Optional[bool]] = field(default_factory=list)
    first_violation: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.first_violation is None

    def to_dict(self) -> dict:
        return {"times": self.times, "verdicts": self.verdicts,
                "interior": self.interior, "first_violation": self.first_violation}


def sample_times(T: float, stride: float, start: float = 0.0) -> np.ndarray:
    count = int(np.floor((T - start) / stride + 1e-9)) + 1
    return start + stride * np.arange(count)


def check_cone_invariance(m: Model, phi: Segment, T: float, stride: float = 0.25,
                          interior_after: float = 3.0) -> MonotonicityReport:
    """Follow ``x_t`` from ``phi`` in S and check it stays in S (interior of S^1 for t >= 3)."""
    if not in_S(phi):
        raise ValueError("initial segment is not in S")
    traj = evolve(m, phi, T)
    times = sample_times(T, stride)
    V, D = traj.segments(times)
    ins = in_S_batch(V)
    late = times >= interior_after - 1e-12
    interior = np.full(times.shape, None, dtype=object)
    if late.any():
        interior[late] = in_int_S1_batch(V[late], D[late])
    ok = ins & np.where(late, interior.astype(bool), True)
    verdicts = np.where(late & ok, "interior", np.where(ins, "in_S", "violation"))
    bad = np.flatnonzero(~ok)
    return MonotonicityReport(
        times=[float(t) for t in times],
        verdicts=[str(v) for v in verdicts],
        interior=[None if i is None else bool(i) for i in interior],
        first_violation=float(times[bad[0]]) if bad.size else None,
    )


def check_order_preservation(m: Model, phi: Segment, phit: Segment, T: float,
                             stride: float = 0.25,
                             interior_after: float = 3.0) -> MonotonicityReport:
    """Check that ordered initial data (``phit - phi`` in S) stay ordered under the flow.

    Each sample records the order relation of ``x_t(phit) - x_t(phi)``; for
    ``t >= 3`` the difference must also lie in the interior of S^1. Equal
    initial data give ``equal`` verdicts throughout, which are reported but
    not treated as violations.
    """
    rel0 = order_relation(phit, phi)
    if rel0 is Order.UNORDERED:
        raise ValueError(f"initial data are not ordered (relation: {rel0.value})")
    ta = evolve(m, phi, T)
    tb = evolve(m, phit, T)
    times = sample_times(T, stride)
    Va, Da = ta.segments(times)
    Vb, Db = tb.segments(times)
    diff, ddiff = Vb - Va, Db - Da
    eta = 1e-9 * (1.0 + np.maximum(np.abs(Va).max(axis=1), np.abs(Vb).max(axis=1)))
    equal = np.abs(diff).max(axis=1) <= eta
    ordered = in_S_batch(diff, eta)
    verdicts = np.where(equal, Order.EQUAL.value,
                        np.where(ordered, Order.ORDERED.value, Order.UNORDERED.value))
    late = times >= interior_after - 1e-12
    interior = np.full(times.shape, None, dtype=object)
    if late.any():
        interior[late] = in_int_S1_batch(diff[late], ddiff[late], eta[late])
    if rel0 is Order.EQUAL:
        ok = equal
    else:
        ok = ordered & ~equal & np.where(late, interior.astype(bool), True)
    bad = np.flatnonzero(~ok)
    return MonotonicityReport(
        times=[float(t) for t in times],
        verdicts=[str(v) for v in verdicts],
        interior=[None if i is None else bool(i) for i in interior],
        first_violation=float(times[bad[0]]) if bad.size else None,
    )
