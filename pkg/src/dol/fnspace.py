"""History segments on [-1, 0] and the sign-change predicates built on them.

A :class:`Segment` stores samples of a function on the uniform grid
``theta_i = -1 + i/n`` and, optionally, samples of its derivative. The
predicates (``sign_changes``, ``in_S``, ``in_int_S1``, ...) are grid
surrogates for the corresponding sets of continuous functions: samples with
``|value| <= eta`` form a dead band and are treated as zeros.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "DEFAULT_N",
    "Order",
    "Segment",
    "SegmentError",
    "Slope",
    "ZeroRecord",
    "c1_norm",
    "default_eta",
    "find_zeros",
    "in_K",
    "in_S",
    "in_int_S1",
    "order_relation",
    "segment_from_csv",
    "segment_to_csv",
    "sign_changes",
    "sup_norm",
]

DEFAULT_N = 256


class SegmentError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Segment:
    """A sampled point of C[-1, 0] (or C^1[-1, 0] when ``derivs`` is set).

    ``derivs_surrogate`` marks derivative samples that are not exact, e.g.
    spline estimates for an initial history given by values only.
    """

    values: np.ndarray
    derivs: Optional[np.ndarray] = None
    derivs_surrogate: bool = False
    check: bool = True
    rtol: float = 1e-3

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 3:
            raise SegmentError("values must be a 1-d array with at least 3 samples")
        if not np.all(np.isfinite(v)):
            raise SegmentError("non-finite segment values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.derivs is not None:
            d = np.array(self.derivs, dtype=float)
            if d.shape != v.shape:
                raise SegmentError("derivs must match values in shape")
            if not np.all(np.isfinite(d)):
                raise SegmentError("non-finite segment derivatives")
            d.setflags(write=False)
            object.__setattr__(self, "derivs", d)
            if self.check:
                self._check_consistency()

    def _check_consistency(self):
        # Slope of each cell vs. the trapezoid average of the end derivatives;
        # the mismatch is O(h^2 psi''') which the second difference of
        # derivs over-estimates.
        v, d, n = self.values, self.derivs, self.n
        mismatch = np.abs(np.diff(v) * n - 0.5 * (d[:-1] + d[1:]))
        d2 = np.abs(np.diff(d, 2)).max() if d.size > 2 else 0.0
        tol = self.rtol * (1.0 + np.abs(d).max()) + d2
        if mismatch.max() > tol:
            raise SegmentError(
                f"inconsistent (value, derivative) samples: mismatch "
                f"{mismatch.max():.3g} > {tol:.3g}")

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def theta(self) -> np.ndarray:
        return np.linspace(-1.0, 0.0, self.n + 1)

    @property
    def has_derivs(self) -> bool:
        return self.derivs is not None

    @classmethod
    def from_function(cls, fn: Callable, dfn: Optional[Callable] = None,
                      n: int = DEFAULT_N, **kw) -> "Segment":
        theta = np.linspace(-1.0, 0.0, n + 1)
        values = np.broadcast_to(np.asarray(fn(theta), dtype=float), theta.shape)
        derivs = None
        if dfn is not None:
            derivs = np.broadcast_to(np.asarray(dfn(theta), dtype=float), theta.shape)
        return cls(values, derivs, **kw)

    @classmethod
    def constant(cls, c: float, n: int = DEFAULT_N) -> "Segment":
        return cls(np.full(n + 1, float(c)), np.zeros(n + 1))

    @classmethod
    def zeros(cls, n: int = DEFAULT_N) -> "Segment":
        return cls.constant(0.0, n)

    def _combine(self, other: "Segment", sign: float) -> "Segment":
        if not isinstance(other, Segment):
            return NotImplemented
        if other.n != self.n:
            raise SegmentError(f"grid mismatch: n={self.n} vs n={other.n}")
        d = None
        if self.derivs is not None and other.derivs is not None:
            d = self.derivs + sign * other.derivs
        return Segment(self.values + sign * other.values, d,
                       self.derivs_surrogate or other.derivs_surrogate, check=False)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, k):
        k = float(k)
        d = None if self.derivs is None else k * self.derivs
        return Segment(k * self.values, d, self.derivs_surrogate, check=False)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def shifted(self, c: float) -> "Segment":
        """Return ``self + c`` for a constant ``c``."""
        return Segment(self.values + float(c), self.derivs, self.derivs_surrogate,
                       check=False)

    def __call__(self, theta):
        """Interpolate at ``theta`` (cubic Hermite with derivs, linear otherwise)."""
        theta = np.asarray(theta, dtype=float)
        if np.any((theta < -1 - 1e-12) | (theta > 1e-12)):
            raise SegmentError("theta outside [-1, 0]")
        n = self.n
        pos = np.clip((theta + 1.0) * n, 0.0, n)
        i = np.minimum(np.floor(pos).astype(int), n - 1)
        s = pos - i
        y0, y1 = self.values[i], self.values[i + 1]
        if self.derivs is None:
            return y0 + s * (y1 - y0)
        h = 1.0 / n
        return hermite(s, h, y0, y1, self.derivs[i], self.derivs[i + 1])


def hermite(s, h, y0, y1, d0, d1):
    """Cubic Hermite interpolant on a cell of width ``h`` at local coordinate ``s``."""
    s2 = s * s
    s3 = s2 * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1)


def hermite_deriv(s, h, y0, y1, d0, d1):
    s2 = s * s
    return ((6 * s2 - 6 * s) * y0 / h + (3 * s2 - 4 * s + 1) * d0
            + (-6 * s2 + 6 * s) * y1 / h + (3 * s2 - 2 * s) * d1)


def sup_norm(s: Segment) -> float:
    return float(np.abs(s.values).max())


def c1_norm(s: Segment) -> float:
    """Sup-norm of the values plus sup-norm of the derivatives."""
    if s.derivs is None:
        raise SegmentError("c1_norm needs derivative samples")
    return float(np.abs(s.values).max() + np.abs(s.derivs).max())


def default_eta(values: np.ndarray) -> np.ndarray:
    """Dead band ``1e-9 * (1 + sup-norm)``, row-wise for 2-d input."""
    return 1e-9 * (1.0 + np.abs(values).max(axis=-1))


# ---------------------------------------------------------------------------
# Batched kernels. Rows of a 2-d array are independent segments.


def _eta_rows(V: np.ndarray, eta) -> np.ndarray:
    if eta is None:
        return default_eta(V)
    return np.broadcast_to(np.asarray(eta, dtype=float), V.shape[:1])


def _signs(V, eta):
    S = np.sign(V)
    S[np.abs(V) <= eta[:, None]] = 0.0
    return S


def _count_changes(S):
    """Sign alternations per row after dropping zeros; -1 when all zero."""
    m, k = S.shape
    idx = np.where(S != 0, np.arange(k), 0)
    np.maximum.accumulate(idx, axis=1, out=idx)
    filled = np.take_along_axis(S, idx, axis=1)
    counts = np.count_nonzero(filled[:, :-1] * filled[:, 1:] < 0, axis=1)
    return np.where(np.any(S != 0, axis=1), counts, -1)


def sign_change_counts(V: np.ndarray, eta=None) -> np.ndarray:
    """Batched :func:`sign_changes`; ``-1`` encodes *undefined*."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    return _count_changes(_signs(V, _eta_rows(V, eta)))


def in_S_batch(V: np.ndarray, eta=None) -> np.ndarray:
    c = sign_change_counts(V, eta)
    return (c >= 0) & (c <= 1)


def in_int_S1_batch(V: np.ndarray, D: np.ndarray, eta=None) -> np.ndarray:
    """Batched :func:`in_int_S1` over rows of ``V`` (values) and ``D`` (derivs)."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    eta = _eta_rows(V, eta)
    S = _signs(V, eta)
    counts = _count_changes(S)
    strict = np.all(S == S[:, :1], axis=1) & (S[:, 0] != 0)

    zero = S == 0
    cross = S[:, :-1] * S[:, 1:] < 0
    run_start = zero.copy()
    run_start[:, 1:] &= ~zero[:, :-1]
    n_events = cross.sum(axis=1) + run_start.sum(axis=1)
    single = (counts >= 0) & (counts <= 1) & (n_events == 1)

    rows = np.arange(V.shape[0])
    has_cross = cross.any(axis=1)
    ic = np.argmax(cross, axis=1)
    v0, v1 = V[rows, ic], V[rows, ic + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(has_cross, v0 / (v0 - v1), 0.0)
    d_cross = D[rows, ic] + r * (D[rows, ic + 1] - D[rows, ic])
    iz = np.argmin(np.where(zero, np.abs(V), np.inf), axis=1)
    d_run = D[rows, iz]
    d_event = np.where(has_cross, d_cross, d_run)

    # An interior zero run with no sign change across it is a touching zero,
    # where the derivative vanishes in the continuum limit.
    at_end = zero[:, 0] | zero[:, -1]
    touch = ~has_cross & ~at_end & (counts == 0)
    ok = single & ~touch & (np.abs(d_event) > eta)
    return strict | ok


# ---------------------------------------------------------------------------


def sign_changes(s: Segment, eta: Optional[float] = None) -> Optional[int]:
    """Number of sign alternations of the samples outside the dead band.

    Returns ``None`` when every sample lies in the dead band.
    """
    c = int(sign_change_counts(s.values[None, :], eta)[0])
    return None if c < 0 else c


def in_S(s: Segment, eta: Optional[float] = None) -> bool:
    """Nonzero with at most one sign change."""
    return bool(in_S_batch(s.values[None, :], eta)[0])


def in_int_S1(s: Segment, eta: Optional[float] = None) -> bool:
    """Interior of the one-sign-change set in C^1.

    True when the samples are strictly of one sign, or when there is exactly
    one zero (a crossing or a dead-band run) and the derivative there is
    nonzero.
    """
    if s.derivs is None:
        raise SegmentError("in_int_S1 needs derivative samples")
    return bool(in_int_S1_batch(s.values[None, :], s.derivs[None, :], eta)[0])


def in_K(s: Segment, sign: int = 1) -> bool:
    """Strictly positive (``sign=+1``) or strictly negative (``sign=-1``) samples."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return bool(np.all(sign * s.values > 0))


class Order(str, enum.Enum):
    EQUAL = "equal"
    ORDERED = "ordered"
    UNORDERED = "unordered"


def order_relation(a: Segment, b: Segment, eta: Optional[float] = None) -> Order:
    if a.n != b.n:
        raise SegmentError(f"grid mismatch: n={a.n} vs n={b.n}")
    diff = a.values - b.values
    if eta is None:
        eta = 1e-9 * (1.0 + max(sup_norm(a), sup_norm(b)))
    if np.abs(diff).max() <= eta:
        return Order.EQUAL
    if in_S_batch(diff[None, :], eta)[0]:
        return Order.ORDERED
    return Order.UNORDERED


def order_relation_batch(A: np.ndarray, b: np.ndarray, eta=None) -> np.ndarray:
    """Relation of each row of ``A`` to ``b`` as an array of :class:`Order` values."""
    A = np.atleast_2d(A)
    diff = A - b[None, :]
    if eta is None:
        eta = 1e-9 * (1.0 + np.maximum(np.abs(A).max(axis=1), np.abs(b).max()))
    eta = np.broadcast_to(np.asarray(eta, dtype=float), A.shape[:1])
    equal = np.abs(diff).max(axis=1) <= eta
    ordered = in_S_batch(diff, eta)
    out = np.where(equal, Order.EQUAL.value,
                   np.where(ordered, Order.ORDERED.value, Order.UNORDERED.value))
    return out


# ---------------------------------------------------------------------------
# Zeros of dense trajectories.


class Slope(str, enum.Enum):
    POS = "pos"
    NEG = "neg"
    FLAT = "flat"


@dataclass(frozen=True)
class ZeroRecord:
    time: float
    slope: Slope

    def to_dict(self) -> dict:
        return {"time": self.time, "slope": self.slope.value}


def _slope(d: float, tol: float = 1e-12) -> Slope:
    if d > tol:
        return Slope.POS
    if d < -tol:
        return Slope.NEG
    return Slope.FLAT


def find_zeros(traj, t0: float, t1: float, xtol: float = 1e-10) -> list[ZeroRecord]:
    """Sign crossings of ``traj`` on ``[t0, t1]``.

    Crossings between stored nodes are located by Brent's method on the
    cubic Hermite dense output; zeros at nodes are reported as-is and
    a run of zero nodes (within roundoff) is reported once, at its start.
    """
    lo, hi = traj.t_start, traj.span
    if t0 > t1 or t0 < lo - 1e-12 or t1 > hi + 1e-12:
        raise ValueError(f"[{t0}, {t1}] is outside the trajectory span [{lo}, {hi}]")
    times, vals, ders = traj.nodes(t0, t1)
    out: list[ZeroRecord] = []
    if times.size == 0:
        return out
    # nodes within roundoff of zero count as zeros (e.g. sin(2*pi) ~ -2e-16)
    ztol = 64 * np.finfo(float).eps * max(1.0, float(np.abs(vals).max()))
    exact = np.abs(vals) <= ztol
    starts = np.flatnonzero(exact & ~np.concatenate(([False], exact[:-1])))
    cross = np.flatnonzero(vals[:-1] * vals[1:] < 0)
    events = sorted([(int(i), "node") for i in starts] + [(int(i), "cell") for i in cross])
    for i, kind in events:
        if kind == "node":
            out.append(ZeroRecord(float(times[i]), _slope(float(ders[i]))))
            continue
        y0, y1, d0, d1 = vals[i], vals[i + 1], ders[i], ders[i + 1]
        width = times[i + 1] - times[i]
        g = lambda s: hermite(s, width, y0, y1, d0, d1)  # noqa: E731
        if g(0.0) * g(1.0) < 0:
            s = brentq(g, 0.0, 1.0, xtol=xtol / max(width, 1e-300) * 1e-2)
        else:
            s = y0 / (y0 - y1)
        tz = float(times[i] + s * width)
        slope = hermite_deriv(s, width, y0, y1, d0, d1)
        out.append(ZeroRecord(tz, _slope(float(slope))))
    # Keep the list strictly increasing when a zero sits on a cell boundary.
    dedup: list[ZeroRecord] = []
    for z in out:
        if dedup and z.time <= dedup[-1].time + 0.5 * xtol:
            continue
        dedup.append(z)
    return dedup


# ---------------------------------------------------------------------------
# CSV serialization: rows ``theta,value[,deriv]``.


def segment_to_csv(s: Segment) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if s.derivs is None:
        w.writerow(["theta", "value"])
        for th, v in zip(s.theta, s.values):
            w.writerow([repr(float(th)), repr(float(v))])
    else:
        w.writerow(["theta", "value", "deriv"])
        for th, v, d in zip(s.theta, s.values, s.derivs):
            w.writerow([repr(float(th)), repr(float(v)), repr(float(d))])
    return buf.getvalue()


def segment_from_csv(text: str | Iterable[str]) -> Segment:
    lines = text.splitlines() if isinstance(text, str) else list(text)
    rows = list(csv.reader(lines))
    if not rows:
        raise SegmentError("empty segment CSV")
    header = [c.strip() for c in rows[0]]
    if header[:2] != ["theta", "value"]:
        raise SegmentError(f"unexpected header {header}")
    data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    if data.ndim != 2 or data.shape[0] < 3:
        raise SegmentError("segment CSV needs at least 3 rows")
    n = data.shape[0] - 1
    if not np.allclose(data[:, 0], np.linspace(-1.0, 0.0, n + 1), atol=1e-9):
        raise SegmentError("theta column is not the uniform grid on [-1, 0]")
    derivs = data[:, 2] if data.shape[1] > 2 and header[2:3] == ["deriv"] else None
    return Segment(data[:, 1], derivs)
