"""Feedback nonlinearities and equation parameters for x'(t) = -mu x(t) + f(x(t-1))."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "FAMILIES",
    "Model",
    "ModelError",
    "dissipativity_bound",
    "make_model",
    "parse_family",
]


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class _Family:
    f: Callable[[float, np.ndarray], np.ndarray]
    f_prime: Callable[[float, np.ndarray], np.ndarray]
    sup: Optional[Callable[[float], float]]
    inf: Optional[Callable[[float], float]]


FAMILIES = {
    "tanh": _Family(
        f=lambda a, x: -a * np.tanh(x),
        f_prime=lambda a, x: -a / np.cosh(x) ** 2,
        sup=lambda a: a,
        inf=lambda a: -a,
    ),
    "wright": _Family(
        f=lambda a, x: a * np.expm1(-x),
        f_prime=lambda a, x: -a * np.exp(-x),
        sup=None,
        inf=lambda a: -a,
    ),
    "atan": _Family(
        f=lambda a, x: -a * np.arctan(x),
        f_prime=lambda a, x: -a / (1.0 + x * x),
        sup=lambda a: a * np.pi / 2,
        inf=lambda a: -a * np.pi / 2,
    ),
    "linear": _Family(
        f=lambda a, x: -a * x,
        f_prime=lambda a, x: -a * np.ones_like(x),
        sup=None,
        inf=None,
    ),
}


@dataclass(frozen=True)
class Model:
    """Parameters of the delay equation with negative feedback.

    ``sup_f`` / ``inf_f`` are ``None`` on the unbounded side. ``beta`` is
    ``-f'(0)``.
    """

    mu: float
    family: str
    alpha: float
    beta: float
    sup_f: Optional[float] = None
    inf_f: Optional[float] = None

    def f(self, x):
        return FAMILIES[self.family].f(self.alpha, np.asarray(x, dtype=float))

    def f_prime(self, x):
        return FAMILIES[self.family].f_prime(self.alpha, np.asarray(x, dtype=float))

    @property
    def bounded(self) -> bool:
        return self.sup_f is not None or self.inf_f is not None

    @property
    def bounded_side(self) -> str:
        if self.sup_f is not None and self.inf_f is not None:
            return "both"
        if self.sup_f is not None:
            return "sup"
        if self.inf_f is not None:
            return "inf"
        return "none"

    @property
    def spec(self) -> str:
        return f"{self.family}:{self.alpha:g}"

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "family": self.family,
            "alpha": self.alpha,
            "beta": self.beta,
            "sup_f": self.sup_f,
            "inf_f": self.inf_f,
        }


def parse_family(text: str) -> tuple[str, float]:
    """Parse ``NAME:ALPHA`` (e.g. ``tanh:2``)."""
    name, sep, arg = text.partition(":")
    name = name.strip().lower()
    if not sep or name not in FAMILIES:
        raise ModelError(f"unknown feedback family {text!r}; expected one of "
                         f"{', '.join(k + ':ALPHA' for k in FAMILIES)}")
    try:
        alpha = float(arg)
    except ValueError as exc:
        raise ModelError(f"bad family parameter in {text!r}") from exc
    return name, alpha


def make_model(mu: float, family, *, allow_unbounded: bool = False,
               scale: float = 1.0, npoints: int = 1001) -> Model:
    """Build and validate a :class:`Model`.

    ``family`` is either a ``"name:alpha"`` string or a ``(name, alpha)`` pair.
    The negative-feedback hypotheses are checked on a grid of ``npoints``
    covering ``[-10*scale, 10*scale]``. The linear family has no finite bound
    and is only accepted with ``allow_unbounded=True``.
    """
    name, alpha = parse_family(family) if isinstance(family, str) else family
    if name not in FAMILIES:
        raise ModelError(f"unknown feedback family {name!r}")
    mu = float(mu)
    alpha = float(alpha)
    if not np.isfinite(mu) or mu < 0:
        raise ModelError(f"mu must be >= 0, got {mu}")
    if not np.isfinite(alpha) or alpha <= 0:
        raise ModelError(f"family parameter must be > 0, got {alpha}")
    fam = FAMILIES[name]
    if fam.sup is None and fam.inf is None and not allow_unbounded:
        raise ModelError(f"family {name!r} is unbounded; pass allow_unbounded=True "
                         "(integrator tests only)")

    grid = np.linspace(-10.0 * scale, 10.0 * scale, npoints)
    fx = fam.f(alpha, grid)
    dfx = fam.f_prime(alpha, grid)
    if abs(float(fam.f(alpha, np.array(0.0)))) > 1e-12:
        raise ModelError("f(0) != 0")
    if not np.all(dfx < 0):
        raise ModelError("f' < 0 violated on the validation grid")
    nz = grid != 0
    if not np.all(np.sign(fx[nz]) == -np.sign(grid[nz])):
        raise ModelError("x f(x) < 0 violated on the validation grid")

    sup_f = fam.sup(alpha) if fam.sup is not None else None
    inf_f = fam.inf(alpha) if fam.inf is not None else None
    if sup_f is not None and np.any(fx > sup_f):
        raise ModelError("declared sup f is exceeded on the validation grid")
    if inf_f is not None and np.any(fx < inf_f):
        raise ModelError("declared inf f is exceeded on the validation grid")

    beta = -float(fam.f_prime(alpha, np.array(0.0)))
    if beta <= 0:
        raise ModelError("beta = -f'(0) must be positive")
    return Model(mu=mu, family=name, alpha=alpha, beta=beta,
                 sup_f=sup_f, inf_f=inf_f)


def dissipativity_bound(m: Model) -> float:
    """Eventual bound b(mu, f) on the sup-norm of segments.

    ``sup f - f(sup f)`` when f is bounded above, ``f(inf f) - inf f`` when
    bounded below; the smaller one when both sides are finite.
    """
    bounds = []
    if m.sup_f is not None:
        bounds.append(m.sup_f - float(m.f(m.sup_f)))
    if m.inf_f is not None:
        bounds.append(float(m.f(m.inf_f)) - m.inf_f)
    if not bounds:
        raise ModelError("dissipativity bound needs a finite sup f or inf f")
    return min(bounds)
