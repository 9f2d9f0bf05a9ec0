"""Finite-horizon oscillation classification and orbit diagnostics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .cones import sample_times
from .fnspace import (
    Order,
    Segment,
    Slope,
    ZeroRecord,
    find_zeros,
    in_S_batch,
    order_relation,
    sign_change_counts,
)
from .integrator import Trajectory, evolve
from .model import Model
from .spectrum import SpectralDecomp

__all__ = [
    "OscillationVerdict",
    "RatioTrace",
    "VerdictKind",
    "classify",
    "detect_period",
    "pseudo_ordered_scan",
    "ratio_trace",
    "slow_gap_ok",
]

ETA_ZERO = 1e-7
TAIL_WINDOW = 5.0


class VerdictKind(str, enum.Enum):
    EVENTUALLY_SLOW = "eventually_slow"
    NOT_SLOW_BY_HORIZON = "not_slow_by_horizon"
    CONVERGED_TO_ZERO = "converged_to_zero"


@dataclass
class OscillationVerdict:
    kind: VerdictKind
    horizon: float
    entry_time: Optional[float] = None
    min_zero_gap: Optional[float] = None
    sign_change_profile: list = field(default_factory=list)
    time: Optional[float] = None
    tail_norm: Optional[float] = None
    zero_records: list[ZeroRecord] = field(default_factory=list)

    @property
    def is_slow(self) -> bool:
        return self.kind is VerdictKind.EVENTUALLY_SLOW

    def gaps_after(self, t: float) -> np.ndarray:
        z = np.array([r.time for r in self.zero_records if r.time >= t])
        return np.diff(z)

    def to_dict(self, with_zeros: bool = True) -> dict:
        out = {"kind": self.kind.value, "horizon": self.horizon}
        if self.kind is VerdictKind.EVENTUALLY_SLOW:
            out["entry_time"] = self.entry_time
        elif self.kind is VerdictKind.CONVERGED_TO_ZERO:
            out["time"] = self.time
            out["tail_norm"] = self.tail_norm
        else:
            out["min_zero_gap"] = self.min_zero_gap
            out["sign_change_profile"] = self.sign_change_profile
        if with_zeros:
            out["zero_records"] = [z.to_dict() for z in self.zero_records]
        return out


def slow_gap_ok(v: OscillationVerdict) -> bool:
    """Consecutive zeros after ``entry_time + 1`` are more than one delay apart."""
    if not v.is_slow:
        return True
    gaps = v.gaps_after(v.entry_time + 1.0)
    return bool(np.all(gaps > 1.0))


def classify(m: Model, phi: Segment, horizon: float, stride: float = 0.25,
             eta_zero: float = ETA_ZERO, traj: Optional[Trajectory] = None) -> OscillationVerdict:
    """Classify the solution from ``phi`` as eventually slowly oscillating or not, by ``horizon``.

    Segments are tested for membership in S at ``t = 1, 1 + stride, ...``;
    the first hit gives ``entry_time``. Without a hit, a tail whose sup-norm
    over the last 5 time units is below ``eta_zero`` counts as converged to
    zero; anything else is ``NotSlowByHorizon`` (rapid oscillation cannot be
    certified on a finite interval).
    """
    if horizon < 3:
        raise ValueError("horizon must be >= 3")
    if traj is None:
        traj = evolve(m, phi, horizon)
    times = sample_times(horizon, stride, start=1.0)
    V, _ = traj.segments(times)
    hits = np.flatnonzero(in_S_batch(V))
    zeros = find_zeros(traj, 0.0, horizon)
    if hits.size:
        return OscillationVerdict(VerdictKind.EVENTUALLY_SLOW, horizon,
                                  entry_time=float(times[hits[0]]), zero_records=zeros)

    _, tail_vals, _ = traj.nodes(max(-1.0, horizon - TAIL_WINDOW), horizon)
    tail = float(np.abs(tail_vals).max())
    if tail < eta_zero:
        below = np.abs(traj.x) >= eta_zero
        last_big = np.flatnonzero(below)
        t_conv = float((last_big[-1] + 1) / traj.n) if last_big.size else 0.0
        return OscillationVerdict(VerdictKind.CONVERGED_TO_ZERO, horizon,
                                  time=min(t_conv, horizon), tail_norm=tail,
                                  zero_records=zeros)

    zt = np.array([z.time for z in zeros if z.time >= 0.0])
    min_gap = float(np.diff(zt).min()) if zt.size > 1 else None
    whole = times[np.abs(times - np.round(times)) < 1e-9]
    Vw, _ = traj.segments(whole)
    profile = [int(c) if c >= 0 else None for c in sign_change_counts(Vw)]
    return OscillationVerdict(VerdictKind.NOT_SLOW_BY_HORIZON, horizon,
                              min_zero_gap=min_gap, sign_change_profile=profile,
                              zero_records=zeros)


def pseudo_ordered_scan(m: Optional[Model], traj: Trajectory,
                        stride: float = 0.25) -> Optional[tuple[float, float]]:
    """First pair ``t1 < t2`` of sampled times with ``x_{t2} - x_{t1}`` in S.

    Pairs are searched in order of increasing ``t2``, then ``t1``; equal
    segments do not count.
    """
    if traj.span < 2 * stride:
        raise ValueError("trajectory too short for the requested stride")
    times = sample_times(traj.span, stride)
    V, _ = traj.segments(times)
    scale = np.abs(V).max(axis=1)
    for j in range(1, times.size):
        diff = V[j][None, :] - V[:j]
        eta = 1e-9 * (1.0 + np.maximum(scale[:j], scale[j]))
        equal = np.abs(diff).max(axis=1) <= eta
        ordered = in_S_batch(diff, eta) & ~equal
        hit = np.flatnonzero(ordered)
        if hit.size:
            return float(times[hit[0]]), float(times[j])
    return None


@dataclass
class RatioTrace:
    times: list[float]
    ratios: list[Optional[float]]
    flagged: list[bool]
    max_ratio: Optional[float]
    t0: float

    def to_dict(self) -> dict:
        return {"t0": self.t0, "times": self.times, "ratios": self.ratios,
                "flagged": self.flagged, "max_ratio": self.max_ratio}

    def to_csv(self) -> str:
        lines = ["t,ratio,flagged"]
        for t, r, f in zip(self.times, self.ratios, self.flagged):
            lines.append(f"{t:.10g},{'' if r is None else repr(r)},{int(f)}")
        return "\n".join(lines) + "\n"


def ratio_trace(d: SpectralDecomp, m: Model, phi: Segment, phit: Segment, T: float,
                stride: float = 0.25, eta: float = 1e-12) -> RatioTrace:
    """``|Pi_Q h_t| / |Pi_L h_t|`` for ``h_t = x_t(phit) - x_t(phi)`` (sup-norms).

    ``t0`` is the first sampled time where ``h_t`` has strict constant sign;
    ratios are reported at unit stride from ``t0 + 2`` to ``T``.
    """
    if order_relation(phit, phi) is not Order.ORDERED:
        raise ValueError("phit - phi must be a nonzero element of S")
    ta = evolve(m, phi, T)
    tb = evolve(m, phit, T)
    scan = sample_times(T, stride)
    Va, _ = ta.segments(scan)
    Vb, _ = tb.segments(scan)
    H = Vb - Va
    strict = np.all(H > 0, axis=1) | np.all(H < 0, axis=1)
    hit = np.flatnonzero(strict)
    if not hit.size:
        raise ValueError("difference never has constant sign within T")
    t0 = float(scan[hit[0]])
    times = np.arange(t0 + 2.0, T + 1e-9, 1.0)
    if times.size == 0:
        raise ValueError(f"no ratio sample in [t0 + 2, T] with t0={t0}")
    Va, _ = ta.segments(times)
    Vb, _ = tb.segments(times)
    H = Vb - Va
    coef = d.coefficients(H)
    B = np.vstack([d.basis[0].values, d.basis[1].values])
    L = coef @ B
    Qn = np.abs(H - L).max(axis=1)
    Ln = np.abs(L).max(axis=1)
    flagged = Ln <= eta
    ratios = [None if f else float(q / l) for q, l, f in zip(Qn, Ln, flagged)]
    valid = [r for r in ratios if r is not None]
    return RatioTrace(times=[float(t) for t in times], ratios=ratios,
                      flagged=[bool(f) for f in flagged],
                      max_ratio=max(valid) if valid else None, t0=t0)


def detect_period(traj: Trajectory, burn: float) -> Optional[float]:
    """Period of the tail after ``burn``, or ``None`` without recurring zero crossings.

    The initial estimate is the mean spacing of upward zero crossings; it is
    refined by minimizing the mean squared difference between the tail and
    its shift.
    """
    if traj.span - burn < 10:
        raise ValueError("need at least 10 time units after burn")
    zeros = find_zeros(traj, burn, traj.span)
    ups = np.array([z.time for z in zeros if z.slope is Slope.POS])
    if ups.size < 2:
        return None
    p0 = float(np.mean(np.diff(ups)))
    window_end = traj.span - 1.1 * p0
    if window_end - burn < p0:
        return p0
    t = np.linspace(burn, window_end, max(200, int((window_end - burn) * traj.n)))
    base = traj.eval(t)
    scale = float(np.mean(base ** 2))
    if scale == 0:
        return None

    def mismatch(lag):
        return float(np.mean((traj.eval(t + lag) - base) ** 2)) / scale

    res = minimize_scalar(mismatch, bounds=(0.9 * p0, 1.1 * p0), method="bounded",
                          options={"xatol": 1e-8})
    if not res.success or not math.isfinite(res.x):
        return p0
    return float(res.x)
