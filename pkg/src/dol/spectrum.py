"""Spectrum of the linearization v'(t) = -mu v(t) - beta v(t-1) at zero.

Eigenvalues are the roots of ``Delta(lam) = lam + mu + beta*exp(-lam)``.
Roots are grouped into strips: strip 0 is ``|Im lam| < pi`` and strip
``k >= 1`` is ``2k*pi < |Im lam| < 2k*pi + pi``; each strip carries total
multiplicity two. Only the representative with ``Im lam >= 0`` is returned.

The leading eigenspace L (strip 0) is two-dimensional. The projection onto
L along the complementary spectral subspace Q uses the bilinear pairing of
the delay equation with its adjoint::

    <w, psi> = w(0) psi(0) - beta * int_{-1}^{0} w(theta + 1) psi(theta) dtheta

where ``w`` ranges over the adjoint eigenfunctions ``exp(-lam*s)``,
``s in [0, 1]`` (and ``s*exp(-lam*s)`` for the double root).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson
from scipy.special import lambertw

from .fnspace import DEFAULT_N, Segment, c1_norm

__all__ = [
    "CharRoot",
    "Regime",
    "SpectralDecomp",
    "SpectrumError",
    "build_decomp",
    "char_fn",
    "eigenfunction",
    "leading_basis",
    "project_L",
    "project_Q",
    "regime",
    "roots_in_strip",
]

TOL_B = 1e-9
MAX_COND = 1e8


class SpectrumError(RuntimeError):
    pass


class Regime(str, enum.Enum):
    REAL_PAIR = "real_pair"
    DOUBLE = "double"
    COMPLEX_PAIR = "complex_pair"


def char_fn(lam, mu: float, beta: float):
    return lam + mu + beta * np.exp(-lam)


def char_deriv(lam, beta: float):
    return 1.0 - beta * np.exp(-lam)


@dataclass(frozen=True)
class CharRoot:
    lam: complex
    strip: int
    multiplicity: int
    residual: float

    def to_dict(self) -> dict:
        return {"k": self.strip, "re": self.lam.real, "im": self.lam.imag,
                "multiplicity": self.multiplicity, "residual": self.residual}


def regime(mu: float, beta: float, tol_b: float = TOL_B) -> Regime:
    """Which of the three strip-0 configurations ``beta*e^mu`` vs ``1/e`` selects."""
    if mu < 0 or beta <= 0:
        raise ValueError("need mu >= 0 and beta > 0")
    s = beta * math.exp(mu) - math.exp(-1.0)
    if abs(s) <= tol_b:
        return Regime.DOUBLE
    return Regime.REAL_PAIR if s < 0 else Regime.COMPLEX_PAIR


def _newton(lam0: complex, mu: float, beta: float, tol: float = 1e-12,
            maxiter: int = 100) -> complex:
    lam = complex(lam0)
    for _ in range(maxiter):
        f = char_fn(lam, mu, beta)
        step = f / char_deriv(lam, beta)
        lam -= step
        if abs(step) <= tol * max(1.0, abs(lam)):
            # one more step to polish to full precision
            lam -= char_fn(lam, mu, beta) / char_deriv(lam, beta)
            return lam
    raise SpectrumError(f"Newton did not converge from {lam0} after {maxiter} iterations")


def _in_strip(lam: complex, k: int) -> bool:
    y = abs(lam.imag)
    if k == 0:
        return y < math.pi
    return 2 * k * math.pi < y < 2 * k * math.pi + math.pi


def _scan_strip(mu: float, beta: float, k: int, cells: int = 40, per_edge: int = 8) -> list[complex]:
    """Centres of cells in the strip-k rectangle with a nonzero winding number of Delta."""
    re_lo = -2.0 - math.log((2 * k + 1) * math.pi / beta)
    re_hi = 2.0
    im_lo, im_hi = 2 * k * math.pi, 2 * k * math.pi + math.pi
    xs = np.linspace(re_lo, re_hi, cells + 1)
    ys = np.linspace(im_lo, im_hi, cells + 1)
    s = np.linspace(0.0, 1.0, per_edge, endpoint=False)
    seeds = []
    for i in range(cells):
        for j in range(cells):
            x0, x1, y0, y1 = xs[i], xs[i + 1], ys[j], ys[j + 1]
            path = np.concatenate([
                x0 + (x1 - x0) * s + 1j * y0,
                x1 + 1j * (y0 + (y1 - y0) * s),
                x1 - (x1 - x0) * s + 1j * y1,
                x0 + 1j * (y1 - (y1 - y0) * s),
            ])
            vals = char_fn(np.append(path, path[0]), mu, beta)
            winding = np.sum(np.angle(vals[1:] / vals[:-1])) / (2 * math.pi)
            if round(winding) >= 1:
                seeds.append(complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)))
    return seeds


def _make_root(lam: complex, k: int, mult: int, mu: float, beta: float) -> CharRoot:
    lam = complex(lam)
    if lam.imag < 0:
        lam = lam.conjugate()
    if abs(lam.imag) < 1e-14:
        lam = complex(lam.real, 0.0)
    res = float(abs(char_fn(lam, mu, beta)))
    return CharRoot(lam=lam, strip=k, multiplicity=mult, residual=res)


def roots_in_strip(mu: float, beta: float, k: int) -> list[CharRoot]:
    """Roots in strip ``k`` (non-negative imaginary part representatives).

    Strip 0 gives two real roots ``[u1, u2]`` with ``u2 < u1``, one double
    root, or one complex root, depending on :func:`regime`. Strip ``k >= 1``
    gives the single root of its conjugate pair with positive imaginary part.
    """
    if k < 0:
        raise ValueError("strip index must be >= 0")
    if k == 0:
        reg = regime(mu, beta)
        if reg is Regime.DOUBLE:
            return [_make_root(complex(-mu - 1.0), 0, 2, mu, beta)]
        # lam = -mu + W(-beta e^mu); principal and -1 branches carry strip 0
        a = -beta * math.exp(mu)
        if reg is Regime.REAL_PAIR:
            out = []
            for branch in (0, -1):
                seed = -mu + lambertw(a, branch).real
                out.append(_make_root(_newton(seed, mu, beta), 0, 1, mu, beta))
            return sorted(out, key=lambda r: -r.lam.real)
        seed = -mu + complex(lambertw(a, 0))
        return [_make_root(_newton(seed, mu, beta), 0, 1, mu, beta)]

    y0 = 2 * k * math.pi + math.pi / 2
    seed = complex(-math.log(y0 / beta), y0)
    try:
        lam = _newton(seed, mu, beta)
    except SpectrumError:
        lam = None
    if lam is None or not _in_strip(lam, k):
        lam = None
        for s in _scan_strip(mu, beta, k):
            try:
                cand = _newton(s, mu, beta)
            except SpectrumError:
                continue
            if _in_strip(cand, k):
                lam = cand
                break
        if lam is None:
            raise SpectrumError(f"no root found in strip {k} for mu={mu}, beta={beta}")
    return [_make_root(lam, k, 1, mu, beta)]


# ---------------------------------------------------------------------------
# Leading eigenspace and projections.


def _normalized(values, derivs) -> Segment:
    seg = Segment(values, derivs, check=False)
    return seg * (1.0 / c1_norm(seg))


def _basis_functions(mu: float, beta: float, roots0: list[CharRoot], theta: np.ndarray):
    """(basis values, basis derivs, adjoint samples on s = theta + 1) for strip 0."""
    reg = regime(mu, beta)
    s = theta + 1.0
    if reg is Regime.REAL_PAIR:
        u1, u2 = roots0[0].lam.real, roots0[1].lam.real
        V = [np.exp(u2 * theta), np.exp(u1 * theta)]
        D = [u2 * V[0], u1 * V[1]]
        W = [np.exp(-u2 * s), np.exp(-u1 * s)]
    elif reg is Regime.DOUBLE:
        u = roots0[0].lam.real
        e = np.exp(u * theta)
        V = [e, theta * e]
        D = [u * e, e + u * theta * e]
        es = np.exp(-u * s)
        W = [es, s * es]
    else:
        x, y = roots0[0].lam.real, roots0[0].lam.imag
        e = np.exp(x * theta)
        sn, cs = np.sin(y * theta), np.cos(y * theta)
        V = [e * sn, e * cs]
        D = [e * (x * sn + y * cs), e * (x * cs - y * sn)]
        es = np.exp(-x * s)
        W = [es * np.cos(y * s), -es * np.sin(y * s)]
    return reg, V, D, W


def leading_basis(mu: float, beta: float, n: int = DEFAULT_N) -> tuple[Segment, Segment]:
    """Basis (v1, v2) of L sampled on [-1, 0], each with unit C^1-norm."""
    theta = np.linspace(-1.0, 0.0, n + 1)
    _, V, D, _ = _basis_functions(mu, beta, roots_in_strip(mu, beta, 0), theta)
    return _normalized(V[0], D[0]), _normalized(V[1], D[1])


def eigenfunction(mu: float, beta: float, k: int, n: int = DEFAULT_N) -> Segment:
    """Real part of ``exp(lam_k * theta)`` for the top root of strip ``k``, unit C^1-norm."""
    lam = roots_in_strip(mu, beta, k)[0].lam
    theta = np.linspace(-1.0, 0.0, n + 1)
    z = np.exp(lam * theta)
    return _normalized(z.real, (lam * z).real)


def pairing(adjoint: np.ndarray, values: np.ndarray, beta: float) -> np.ndarray:
    """Bilinear pairing of adjoint samples (rows, on s in [0, 1]) with segment values.

    ``values`` may be 1-d or 2-d (one segment per row); the integral uses
    composite Simpson on the segment grid.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1] - 1
    if values.ndim == 1:
        integral = simpson(adjoint * values[None, :], dx=1.0 / n, axis=-1)
        return adjoint[:, 0] * values[-1] - beta * integral
    prod = adjoint[None, :, :] * values[:, None, :]
    integral = simpson(prod, dx=1.0 / n, axis=-1)
    return adjoint[None, :, 0] * values[:, -1:] - beta * integral


@dataclass(frozen=True, eq=False)
class SpectralDecomp:
    """Strip roots, the leading basis of L, its adjoint and their Gram matrix."""

    mu: float
    beta: float
    regime: Regime
    roots: tuple[CharRoot, ...]
    basis: tuple[Segment, Segment]
    adjoint: np.ndarray
    gram: np.ndarray
    cond: float
    n: int

    @property
    def leading(self) -> list[CharRoot]:
        return [r for r in self.roots if r.strip == 0]

    def strip_roots(self, k: int) -> list[CharRoot]:
        return [r for r in self.roots if r.strip == k]

    @property
    def gap(self) -> tuple[float, float]:
        """(max Re over strips >= 1, min Re over strip 0)."""
        hi = max(r.lam.real for r in self.roots if r.strip >= 1)
        lo = min(r.lam.real for r in self.roots if r.strip == 0)
        return hi, lo

    def coefficients(self, values: np.ndarray) -> np.ndarray:
        """Coordinates of the L-component in the basis (v1, v2); rows for 2-d input."""
        rhs = pairing(self.adjoint, values, self.beta)
        return np.linalg.solve(self.gram, rhs.T).T

    def project_L(self, s: Segment) -> Segment:
        return project_L(self, s)

    def project_Q(self, s: Segment) -> Segment:
        return project_Q(self, s)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "beta": self.beta,
            "regime": self.regime.value,
            "roots": [r.to_dict() for r in self.roots],
            "gram": self.gram.tolist(),
            "cond": self.cond,
        }


def build_decomp(mu: float, beta: float, kmax: int = 3, n: int = DEFAULT_N) -> SpectralDecomp:
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    roots = []
    for k in range(kmax + 1):
        roots.extend(roots_in_strip(mu, beta, k))
    roots0 = [r for r in roots if r.strip == 0]
    theta = np.linspace(-1.0, 0.0, n + 1)
    reg, V, D, W = _basis_functions(mu, beta, roots0, theta)
    basis = (_normalized(V[0], D[0]), _normalized(V[1], D[1]))
    adjoint = np.vstack(W)
    B = np.vstack([basis[0].values, basis[1].values])
    gram = pairing(adjoint, B, beta).T  # gram[i, j] = <w_i, v_j>
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > MAX_COND:
        raise SpectrumError(f"Gram matrix condition number {cond:.3g} exceeds {MAX_COND:g} "
                            "(too close to the double-root regime)")
    d = SpectralDecomp(mu=float(mu), beta=float(beta), regime=reg, roots=tuple(roots),
                       basis=basis, adjoint=adjoint, gram=gram, cond=cond, n=n)
    hi, lo = d.gap
    if not hi < lo:
        raise SpectrumError(f"spectral gap violated: max Re(strips>=1)={hi} >= min Re(strip 0)={lo}")
    return d


def project_L(d: SpectralDecomp, s: Segment) -> Segment:
    """Projection onto L along Q."""
    if s.n != d.n:
        raise ValueError(f"segment grid n={s.n} differs from decomposition grid n={d.n}")
    c = d.coefficients(s.values)
    v1, v2 = d.basis
    return v1 * c[0] + v2 * c[1]


def project_Q(d: SpectralDecomp, s: Segment) -> Segment:
    p = project_L(d, s)
    if s.derivs is None:
        return Segment(s.values - p.values, None, check=False)
    return s - p
