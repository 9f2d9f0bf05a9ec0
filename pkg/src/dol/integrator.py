"""Method-of-steps solver for the semiflow and its linearization.

On every unit interval ``[k, k+1]`` the delayed term is a known function
(the solution on ``[k-1, k]``), so the equation reduces to the linear
non-autonomous ODE ``y' = -mu*y + g(t)``. One classical RK4 step of width
``h = 1/n`` for that ODE is an affine map ``y -> a*y + b_i`` with ``b_i``
depending only on ``g`` at the cell's ends and midpoint. The whole interval
is therefore a first-order linear recurrence, evaluated with
:func:`scipy.signal.lfilter`; this is the same arithmetic as stepping RK4
node by node. Delayed values at cell midpoints come from the cubic Hermite
interpolant of the previous interval.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import lfilter

from .fnspace import DEFAULT_N, Segment, hermite, hermite_deriv, sup_norm
from .model import Model, dissipativity_bound

__all__ = [
    "BlowUpError",
    "DissipativityReport",
    "Trajectory",
    "check_dissipativity",
    "evolve",
    "segment_at",
    "trajectory_to_csv",
    "variational_evolve",
]

_GRID_TOL = 1e-9


class BlowUpError(ArithmeticError):
    def __init__(self, time: float):
        super().__init__(f"solution left the finite range near t={time:.6g}")
        self.time = time


def _history_derivs(seg: Segment) -> tuple[np.ndarray, bool]:
    if seg.derivs is not None:
        return seg.derivs, seg.derivs_surrogate
    # not-a-knot spline: O(h^4) values, O(h^3) slopes for smooth data
    return CubicSpline(seg.theta, seg.values)(seg.theta, 1), True


def _midpoints(v: np.ndarray, d: np.ndarray, h: float) -> np.ndarray:
    return 0.5 * (v[:-1] + v[1:]) + 0.125 * h * (d[:-1] - d[1:])


def _rk4_coefficients(mu: float, h: float, g0, gm, g1):
    """Affine RK4 map for y' = -mu*y + g: y_next = a*y + b."""
    z = mu * h
    a = 1.0 - z + z * z / 2.0 - z ** 3 / 6.0 + z ** 4 / 24.0
    k1 = g0
    k2 = gm - 0.5 * z * k1
    k3 = gm - 0.5 * z * k2
    k4 = g1 - z * k3
    b = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return a, b


def _march(mu: float, y0: float, a: float, b: np.ndarray) -> np.ndarray:
    """Nodes y_1..y_n of y_{i+1} = a*y_i + b_i starting from y0."""
    y, _ = lfilter([1.0], [1.0, -a], b, zi=[a * y0])
    return y


def _piecewise_eval(t, t0: float, h: float, v: np.ndarray, d: np.ndarray, deriv=False):
    n = v.size - 1
    pos = np.clip((t - t0) / h, 0.0, n)
    i = np.minimum(np.floor(pos).astype(int), n - 1)
    s = pos - i
    fn = hermite_deriv if deriv else hermite
    return fn(s, h, v[i], v[i + 1], d[i], d[i + 1])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense record of a solution on ``[-1, span]``.

    ``x``/``dx`` hold values and ODE derivatives at ``t_i = i/n`` for whole
    unit intervals covering ``[0, span]``; ``x[0]`` is ``phi(0)`` and
    ``dx[0]`` the right derivative at 0. ``x_mid`` holds the cell-midpoint
    values used as delayed data by the next interval.
    """

    n: int
    span: float
    history: Segment
    hist_derivs: np.ndarray
    hist_mid: np.ndarray
    x: np.ndarray
    dx: np.ndarray
    x_mid: np.ndarray
    model: Optional[Model] = None
    kind: str = "state"

    t_start = -1.0

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def intervals(self) -> int:
        return (self.x.size - 1) // self.n

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.x.size) / self.n

    @classmethod
    def from_function(cls, fn: Callable, dfn: Callable, span: float,
                      n: int = DEFAULT_N) -> "Trajectory":
        """Wrap a known function of time (for tests and synthetic signals)."""
        k = max(1, math.ceil(span - _GRID_TOL))
        theta = np.linspace(-1.0, 0.0, n + 1)
        t = np.arange(k * n + 1) / n
        hv, hd = fn(theta) * np.ones_like(theta), dfn(theta) * np.ones_like(theta)
        xv, xd = fn(t) * np.ones_like(t), dfn(t) * np.ones_like(t)
        return cls(n=n, span=float(span), history=Segment(hv, hd, check=False),
                   hist_derivs=hd, hist_mid=_midpoints(hv, hd, 1.0 / n),
                   x=xv, dx=xd, x_mid=_midpoints(xv, xd, 1.0 / n), kind="synthetic")

    # -- evaluation -------------------------------------------------------

    def _check_time(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -1.0 - 1e-12) or np.any(t > self.span + 1e-12):
            raise ValueError(f"time outside [-1, {self.span}]")
        return t

    def eval(self, t, deriv: bool = False):
        """Dense output (cubic Hermite) at times in ``[-1, span]``."""
        t = self._check_time(t)
        hv, hd = self.history.values, self.hist_derivs
        past = _piecewise_eval(t, -1.0, self.h, hv, hd, deriv)
        now = _piecewise_eval(t, 0.0, self.h, self.x, self.dx, deriv)
        return np.where(t < 0, past, now)

    def nodes(self, t0: float, t1: float):
        """Times, values and derivatives of stored nodes in ``[t0, t1]``.

        The endpoints are included (interpolated if off-grid). Time 0 appears
        twice, with the history's and the solution's derivative.
        """
        t = np.concatenate((self.history.theta, self.times))
        v = np.concatenate((self.history.values, self.x))
        d = np.concatenate((self.hist_derivs, self.dx))
        keep = (t > t0 + 1e-12) & (t < t1 - 1e-12)
        t, v, d = t[keep], v[keep], d[keep]
        ends = np.array([t0, t1], dtype=float)
        ev = self.eval(ends)
        ed = self.eval(ends, deriv=True)
        return (np.concatenate(([t0], t, [t1])),
                np.concatenate(([ev[0]], v, [ev[1]])),
                np.concatenate(([ed[0]], d, [ed[1]])))

    @cached_property
    def _joined(self):
        # history without its last node, then the solution from t=0
        v = np.concatenate((self.history.values[:-1], self.x))
        d = np.concatenate((self.hist_derivs[:-1], self.dx))
        return v, d

    def _grid_index(self, t: float) -> Optional[int]:
        j = t * self.n
        r = round(j)
        return int(r) if abs(j - r) < _GRID_TOL * max(1.0, self.n) else None

    def segment_at(self, t: float) -> Segment:
        t = float(self._check_time(t))
        if t < -1e-12:
            raise ValueError("segment_at needs t >= 0")
        j = self._grid_index(t)
        if j == 0:
            return self.history
        surrogate = t < 1.0 and (self.history.derivs is None
                                 or self.history.derivs_surrogate)
        if j is not None:
            v, d = self._joined
            return Segment(v[j:j + self.n + 1], d[j:j + self.n + 1], surrogate,
                           check=False)
        tt = t + self.history.theta
        return Segment(self.eval(tt), self.eval(tt, deriv=True), surrogate, check=False)

    def segments(self, times) -> tuple[np.ndarray, np.ndarray]:
        """Values and derivatives of the segments at ``times`` as 2-d arrays."""
        times = np.asarray(times, dtype=float)
        self._check_time(times)
        n = self.n
        idx = np.rint(times * n).astype(int)
        if np.all(np.abs(times * n - idx) < _GRID_TOL * max(1.0, n)):
            v, d = self._joined
            V = np.lib.stride_tricks.sliding_window_view(v, n + 1)[idx]
            D = np.lib.stride_tricks.sliding_window_view(d, n + 1)[idx]
            V, D = V.copy(), D.copy()
            at0 = idx == 0
            V[at0] = self.history.values
            D[at0] = self.hist_derivs
            return V, D
        tt = times[:, None] + self.history.theta[None, :]
        return self.eval(tt), self.eval(tt, deriv=True)


def _evolve_linear_steps(mu: float, h: float, y0: float, g_nodes: np.ndarray,
                         g_mid: np.ndarray):
    a, b = _rk4_coefficients(mu, h, g_nodes[:-1], g_mid, g_nodes[1:])
    return _march(mu, y0, a, b)


def evolve(m: Model, phi: Segment, T: float) -> Trajectory:
    """Solve the delay equation on ``[0, T]`` from the history ``phi``."""
    if T < 0 or not np.isfinite(T):
        raise ValueError(f"T must be finite and >= 0, got {T}")
    n = phi.n
    h = 1.0 / n
    K = max(1, math.ceil(T - _GRID_TOL))
    hv = phi.values
    hd, _ = _history_derivs(phi)
    hist_mid = _midpoints(hv, hd, h)

    x = np.empty(K * n + 1)
    dx = np.empty(K * n + 1)
    xm = np.empty(K * n)
    x[0] = hv[-1]
    prev_v, prev_d, prev_m = hv, hd, hist_mid
    mu = m.mu
    for k in range(K):
        sl = slice(k * n, (k + 1) * n + 1)
        with np.errstate(over="ignore", invalid="ignore"):
            g_nodes = m.f(prev_v)
            g_mid = m.f(prev_m)
            x[k * n + 1:(k + 1) * n + 1] = _evolve_linear_steps(mu, h, x[k * n], g_nodes, g_mid)
            dx[sl] = -mu * x[sl] + g_nodes
        if not np.all(np.isfinite(x[sl])) or not np.all(np.isfinite(dx[sl])):
            bad = np.flatnonzero(~np.isfinite(x[sl]) | ~np.isfinite(dx[sl]))[0]
            raise BlowUpError(k + bad * h)
        xm[k * n:(k + 1) * n] = _midpoints(x[sl], dx[sl], h)
        prev_v, prev_d, prev_m = x[sl], dx[sl], xm[k * n:(k + 1) * n]

    for arr in (x, dx, xm, hd, hist_mid):
        arr.setflags(write=False)
    return Trajectory(n=n, span=float(T), history=phi, hist_derivs=hd, hist_mid=hist_mid,
                      x=x, dx=dx, x_mid=xm, model=m)


def segment_at(traj: Trajectory, t: float) -> Segment:
    return traj.segment_at(t)


def variational_evolve(traj: Trajectory, xi: Segment, T: float) -> Trajectory:
    """Solve the linearized equation along ``traj`` from the direction ``xi``.

    The result realizes ``D_phi F_t xi`` as its segment at ``t``.
    """
    if traj.model is None:
        raise ValueError("variational flow needs a trajectory with a model")
    if T < 0 or T > traj.span + 1e-12:
        raise ValueError(f"T={T} exceeds the base trajectory span {traj.span}")
    if xi.n != traj.n:
        raise ValueError("direction and trajectory grids differ")
    m = traj.model
    n = traj.n
    h = 1.0 / n
    K = max(1, math.ceil(T - _GRID_TOL))
    vh = xi.values
    vd, _ = _history_derivs(xi)
    vm_hist = _midpoints(vh, vd, h)

    v = np.empty(K * n + 1)
    dv = np.empty(K * n + 1)
    vm = np.empty(K * n)
    v[0] = vh[-1]
    prev_v, prev_m = vh, vm_hist
    base_v, base_m = traj.history.values, traj.hist_mid
    for k in range(K):
        if k > 0:
            base_v = traj.x[(k - 1) * n:k * n + 1]
            base_m = traj.x_mid[(k - 1) * n:k * n]
        c_nodes = m.f_prime(base_v)
        c_mid = m.f_prime(base_m)
        g_nodes = c_nodes * prev_v
        g_mid = c_mid * prev_m
        sl = slice(k * n, (k + 1) * n + 1)
        with np.errstate(over="ignore", invalid="ignore"):
            v[k * n + 1:(k + 1) * n + 1] = _evolve_linear_steps(m.mu, h, v[k * n], g_nodes, g_mid)
            dv[sl] = -m.mu * v[sl] + g_nodes
        if not np.all(np.isfinite(v[sl])):
            bad = np.flatnonzero(~np.isfinite(v[sl]))[0]
            raise BlowUpError(k + bad * h)
        vm[k * n:(k + 1) * n] = _midpoints(v[sl], dv[sl], h)
        prev_v, prev_m = v[sl], vm[k * n:(k + 1) * n]

    for arr in (v, dv, vm, vd, vm_hist):
        arr.setflags(write=False)
    return Trajectory(n=n, span=float(T), history=xi, hist_derivs=vd, hist_mid=vm_hist,
                      x=v, dx=dv, x_mid=vm, model=m, kind="variational")


@dataclass(frozen=True)
class DissipativityReport:
    max_tail_norm: float
    bound: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.max_tail_norm <= self.bound + self.tolerance

    def to_dict(self) -> dict:
        return {"max_tail_norm": self.max_tail_norm, "bound": self.bound,
                "tolerance": self.tolerance, "ok": self.ok}


def check_dissipativity(m: Model, phi: Segment, T: float, burn: float,
                        tolerance: float = 0.01) -> DissipativityReport:
    """Largest segment sup-norm over ``t in [burn, T]`` against b(mu, f)."""
    if burn >= T:
        raise ValueError("burn must be < T")
    bound = dissipativity_bound(m)
    traj = evolve(m, phi, T)
    if burn <= 0:
        tail = max(sup_norm(phi), float(np.abs(traj.x[:int(round(T * traj.n)) + 1]).max()))
    else:
        times, vals, _ = traj.nodes(burn - 1.0, T)
        tail = float(np.abs(vals).max())
    return DissipativityReport(max_tail_norm=tail, bound=bound, tolerance=tolerance)


def trajectory_to_csv(traj: Trajectory, stride: float | None = None) -> str:
    """CSV with header ``t,x,dxdt`` on ``[-1, span]`` every ``stride`` time units."""
    step = 1 if stride is None else max(1, int(round(stride * traj.n)))
    t_all = np.concatenate((traj.history.theta[:-1], traj.times))
    v, d = traj._joined
    last = int(math.floor(traj.span * traj.n + _GRID_TOL)) + traj.n
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "dxdt"])
    for i in range(0, last + 1, step):
        w.writerow([f"{t_all[i]:.10g}", repr(float(v[i])), repr(float(d[i]))])
    return buf.getvalue()
