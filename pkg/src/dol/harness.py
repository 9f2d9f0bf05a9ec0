"""Randomized experiment campaigns, initial-data samplers and report files."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .classify import VerdictKind, classify, pseudo_ordered_scan, slow_gap_ok
from .cones import check_cone_invariance, check_order_preservation, estimate_kappa
from .fnspace import DEFAULT_N, Segment, SegmentError, sup_norm
from .integrator import check_dissipativity, evolve, trajectory_to_csv
from .model import Model, make_model
from .spectrum import SpectralDecomp, build_decomp, eigenfunction, roots_in_strip

__all__ = [
    "SCHEMA",
    "ConfigError",
    "PerturbReport",
    "SweepReport",
    "density_sweep",
    "fourier_segment",
    "openness_check",
    "parse_initial",
    "perturbation_experiment",
    "rapid_seed",
    "run_report",
    "sample_initial",
]

SCHEMA = "dol/1"
DENSITY_CAVEAT = ("Finite-horizon evidence only: no finite simulation can confirm or "
                  "falsify density of eventually slowly oscillating initial data.")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Initial data.


def fourier_segment(rng: np.random.Generator, nmodes: int, amp: float,
                    n: int = DEFAULT_N) -> Segment:
    """Random trigonometric polynomial with sup-norm ``amp`` (exact derivatives)."""
    theta = np.linspace(-1.0, 0.0, n + 1)
    k = np.arange(1, nmodes + 1) * np.pi
    a = rng.uniform(-1.0, 1.0, nmodes)
    b = rng.uniform(-1.0, 1.0, nmodes)
    c0 = rng.uniform(-1.0, 1.0)
    arg = np.outer(theta, k)
    v = c0 + np.cos(arg) @ a + np.sin(arg) @ b
    d = -np.sin(arg) @ (a * k) + np.cos(arg) @ (b * k)
    scale = amp / np.abs(v).max()
    return Segment(v * scale, d * scale)


def parse_initial(spec: str, n: int = DEFAULT_N, mu: Optional[float] = None,
                  beta: Optional[float] = None) -> Segment:
    """Build a history from the mini-syntax.

    ``const:C``, ``lin:A,B`` (A*theta + B), ``sin:K,AMP`` (AMP*sin(K*pi*theta)),
    ``fourier:SEED,NMODES,AMP``, ``eig:K`` (strip-K eigenfunction, needs mu
    and beta), or ``csv:PATH`` (rows ``theta,value[,deriv]``).
    """
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    try:
        args = [a.strip() for a in arg.split(",")] if arg else []
        if kind == "const":
            return Segment.constant(float(args[0]), n)
        if kind == "lin":
            A, B = float(args[0]), float(args[1])
            return Segment.from_function(lambda th: A * th + B, lambda th: A + 0 * th, n)
        if kind == "sin":
            K, amp = float(args[0]), float(args[1])
            return Segment.from_function(lambda th: amp * np.sin(K * np.pi * th),
                                         lambda th: amp * K * np.pi * np.cos(K * np.pi * th), n)
        if kind == "fourier":
            seed, modes, amp = int(args[0]), int(args[1]), float(args[2])
            return fourier_segment(np.random.default_rng(seed), modes, amp, n)
        if kind == "eig":
            if mu is None or beta is None:
                raise ConfigError("eig:K needs the model parameters")
            return eigenfunction(mu, beta, int(args[0]), n)
        if kind == "csv":
            from .fnspace import segment_from_csv
            return segment_from_csv(Path(arg).read_text())
    except (IndexError, ValueError) as exc:
        if isinstance(exc, (ConfigError, SegmentError)):
            raise
        raise ConfigError(f"bad initial-condition spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown initial-condition kind in {spec!r}")


def sample_initial(sampler: dict, rng: np.random.Generator, n: int = DEFAULT_N,
                   mu: Optional[float] = None, beta: Optional[float] = None) -> Segment:
    """Draw one history from a sampler spec such as ``{"kind": "fourier", "modes": 8, "amp": 0.5}``.

    ``{"kind": "spec", "phi": ...}`` uses the initial-condition mini-syntax
    (``mu``/``beta`` are needed for ``eig:K``).
    """
    kind = sampler.get("kind", "fourier")
    if kind == "fourier":
        return fourier_segment(rng, int(sampler.get("modes", 8)),
                               float(sampler.get("amp", 0.5)), n)
    if kind == "spec":
        return parse_initial(sampler["phi"], n, mu, beta)
    raise ConfigError(f"unknown sampler kind {kind!r}")


# ---------------------------------------------------------------------------
# Sweeps.


@dataclass
class SampleSummary:
    index: int
    kind: str
    entry_time: Optional[float] = None
    pseudo_ordered: Optional[list[float]] = None
    slow_gap_ok: bool = True
    rerun_kind: Optional[str] = None
    rerun_entry_time: Optional[float] = None


@dataclass
class SweepReport:
    model: dict
    sampler: dict
    seed: int
    count: int
    horizon: float
    samples: list[SampleSummary]
    fraction_slow: float
    fraction_converged: float
    fraction_not_slow: float
    entry_time_histogram: dict
    violations: list[str] = field(default_factory=list)
    rerun_horizon: Optional[float] = None
    rerun_indices: list[int] = field(default_factory=list)
    caveat: str = DENSITY_CAVEAT

    @property
    def counts(self) -> dict:
        out = {k.value: 0 for k in VerdictKind}
        for s in self.samples:
            out[s.kind] += 1
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["counts"] = self.counts
        return {"schema": SCHEMA, "experiment": "density", **d}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "kind", "entry_time", "pseudo_t1", "pseudo_t2",
                    "slow_gap_ok", "rerun_kind", "rerun_entry_time"])
        for s in self.samples:
            p = s.pseudo_ordered or [None, None]
            w.writerow([s.index, s.kind, s.entry_time, p[0], p[1], int(s.slow_gap_ok),
                        s.rerun_kind, s.rerun_entry_time])
        return buf.getvalue()


def _sweep_item(args) -> SampleSummary:
    m, sampler, seed, index, horizon, stride, n, scan = args
    rng = np.random.default_rng([seed, index])
    phi = sample_initial(sampler, rng, n, m.mu, m.beta)
    traj = evolve(m, phi, horizon)
    v = classify(m, phi, horizon, stride, traj=traj)
    pair = pseudo_ordered_scan(m, traj, stride) if scan else None
    return SampleSummary(index=index, kind=v.kind.value, entry_time=v.entry_time,
                         pseudo_ordered=list(pair) if pair else None,
                         slow_gap_ok=slow_gap_ok(v))


def _histogram(entries: Sequence[float]) -> dict:
    if not entries:
        return {"edges": [], "counts": []}
    top = int(math.floor(max(entries))) + 1
    counts, edges = np.histogram(entries, bins=np.arange(0, top + 1))
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def density_sweep(m: Model, sampler: dict, count: int, horizon: float = 200.0,
                  seed: int = 0, stride: float = 0.25, n: int = DEFAULT_N,
                  scan_pseudo_order: bool = True, rerun_horizon: Optional[float] = None,
                  workers: int = 1) -> SweepReport:
    """Classify ``count`` random histories and aggregate the verdicts.

    Each item draws from ``default_rng([seed, index])``, so results do not
    depend on ``workers``. With ``rerun_horizon`` set, samples that are not
    slow by ``horizon`` are classified again at the longer horizon.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    jobs = [(m, sampler, seed, i, horizon, stride, n, scan_pseudo_order) for i in range(count)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            items = list(ex.map(_sweep_item, jobs, chunksize=max(1, count // (4 * workers))))
    else:
        items = [_sweep_item(j) for j in jobs]
    items.sort(key=lambda s: s.index)

    violations = []
    for s in items:
        if not s.slow_gap_ok:
            violations.append(f"sample {s.index}: zero gap <= 1 after entry")
        if s.pseudo_ordered and s.kind == VerdictKind.NOT_SLOW_BY_HORIZON.value:
            violations.append(f"sample {s.index}: pseudo-ordered pair {s.pseudo_ordered} "
                              "but not slow by horizon")

    rerun = [s.index for s in items if s.kind == VerdictKind.NOT_SLOW_BY_HORIZON.value]
    if rerun_horizon is not None and rerun_horizon > horizon:
        for s in items:
            if s.index not in rerun:
                continue
            phi = sample_initial(sampler, np.random.default_rng([seed, s.index]), n,
                                 m.mu, m.beta)
            v = classify(m, phi, rerun_horizon, stride)
            s.rerun_kind = v.kind.value
            s.rerun_entry_time = v.entry_time

    n_slow = sum(s.kind == VerdictKind.EVENTUALLY_SLOW.value for s in items)
    n_conv = sum(s.kind == VerdictKind.CONVERGED_TO_ZERO.value for s in items)
    n_not = count - n_slow - n_conv
    return SweepReport(
        model={"mu": m.mu, "family": m.spec},
        sampler=dict(sampler), seed=seed, count=count, horizon=horizon,
        samples=items,
        fraction_slow=n_slow / count, fraction_converged=n_conv / count,
        fraction_not_slow=n_not / count,
        entry_time_histogram=_histogram([s.entry_time for s in items if s.entry_time is not None]),
        violations=violations,
        rerun_horizon=rerun_horizon if rerun else None,
        rerun_indices=rerun,
    )


# ---------------------------------------------------------------------------
# Perturbations.


@dataclass
class PerturbReport:
    base: str
    epsilons: list[float]
    verdicts: list[dict]
    smallest_slow_epsilon: Optional[float]
    horizon: float

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "experiment": "perturb", **asdict(self)}

    def to_csv(self) -> str:
        lines = ["epsilon,kind,entry_time"]
        for e, v in zip(self.epsilons, self.verdicts):
            et = v.get("entry_time")
            lines.append(f"{e!r},{v['kind']},{'' if et is None else repr(et)}")
        return "\n".join(lines) + "\n"


def perturbation_experiment(m: Model, phi: Segment, epsilons: Sequence[float],
                            horizon: float = 300.0, base: str = "",
                            stride: float = 0.25) -> PerturbReport:
    """Classify ``phi + eps`` (a constant, strictly positive shift) for each ``eps``."""
    eps = [float(e) for e in epsilons]
    if any(e <= 0 for e in eps):
        raise ValueError("epsilons must be > 0")
    if any(b <= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly increasing")
    verdicts = [classify(m, phi.shifted(e), horizon, stride).to_dict(with_zeros=False)
                for e in eps]
    slow = [e for e, v in zip(eps, verdicts) if v["kind"] == VerdictKind.EVENTUALLY_SLOW.value]
    return PerturbReport(base=base, epsilons=eps, verdicts=verdicts,
                         smallest_slow_epsilon=slow[0] if slow else None, horizon=horizon)


def rapid_seed(m: Model, d: Optional[SpectralDecomp], k: int, amp: float) -> Segment:
    """``amp`` times the real part of the strip-k eigenfunction, scaled to unit sup-norm.

    The profile has at least ``2k`` sign changes on [-1, 0].
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = d.n if d is not None else DEFAULT_N
    known = d.strip_roots(k) if d is not None else []
    lam = known[0].lam if known else roots_in_strip(m.mu, m.beta, k)[0].lam
    theta = np.linspace(-1.0, 0.0, n + 1)
    z = np.exp(lam * theta)
    scale = 1.0 / np.abs(z.real).max()
    return Segment(amp * scale * z.real, amp * scale * (lam * z).real, check=False)


def openness_check(m: Model, phi: Segment, entry_time: float, ndirs: int = 20,
                   delta: float = 1e-3, seed: int = 0, extra: float = 20.0,
                   modes: int = 8) -> list[str]:
    """Verdict kinds for ``phi + delta*psi`` over random unit-sup-norm ``psi``.

    The horizon is ``entry_time + extra``.
    """
    rng = np.random.default_rng([seed, 7919])
    horizon = max(3.0, entry_time + extra)
    out = []
    for _ in range(ndirs):
        psi = fourier_segment(rng, modes, 1.0, phi.n)
        out.append(classify(m, phi + psi * delta, horizon).kind.value)
    return out


# ---------------------------------------------------------------------------
# Config-driven runs.


def _model_from(cfg: dict) -> Model:
    try:
        return make_model(float(cfg.get("mu", 0.0)), cfg["model"],
                          allow_unbounded=bool(cfg.get("allow_unbounded", False)))
    except KeyError as exc:
        raise ConfigError("config needs a 'model' entry such as 'tanh:2'") from exc


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def run_report(config, outdir) -> int:
    """Run the experiment described by ``config`` and write its reports into ``outdir``.

    ``config`` is a dict or a path to a JSON file. Returns 0 on success, 2 if
    an invariant violation was detected. Malformed configs raise
    :class:`ConfigError`.
    """
    if not isinstance(config, dict):
        try:
            config = json.loads(Path(config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict) or "experiment" not in config:
        raise ConfigError("config must be a JSON object with an 'experiment' field")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    kind = config["experiment"]
    m = _model_from(config)
    n = int(config.get("n", DEFAULT_N))
    violations: list[str] = []

    if kind in ("density", "sweep"):
        rep = density_sweep(m, config.get("sampler", {"kind": "fourier", "modes": 8, "amp": 0.5}),
                            int(config.get("count", 200)), float(config.get("horizon", 200.0)),
                            int(config.get("seed", 0)), float(config.get("stride", 0.25)), n,
                            bool(config.get("scan_pseudo_order", True)),
                            config.get("rerun_horizon"), int(config.get("workers", 1)))
        violations = rep.violations
        report = rep.to_dict()
        (out / "summary.csv").write_text(rep.to_csv())
    elif kind == "perturb":
        base = config.get("phi", "rapid:1,0.01")
        phi = _initial_from(base, m, n)
        rep = perturbation_experiment(m, phi, config.get("epsilons", [1e-3, 1e-2, 1e-1]),
                                      float(config.get("horizon", 300.0)), base)
        report = rep.to_dict()
        (out / "summary.csv").write_text(rep.to_csv())
    elif kind == "classify":
        phi = _initial_from(config.get("phi", "const:0.5"), m, n)
        horizon = float(config.get("horizon", 200.0))
        traj = evolve(m, phi, horizon)
        v = classify(m, phi, horizon, float(config.get("stride", 0.25)), traj=traj)
        if not slow_gap_ok(v):
            violations.append("zero gap <= 1 after entry time")
        report = {"schema": SCHEMA, "experiment": "classify", **v.to_dict()}
        (out / "trajectory.csv").write_text(trajectory_to_csv(traj, config.get("csv_stride")))
        (out / "summary.csv").write_text(f"kind,entry_time\n{v.kind.value},{v.entry_time}\n")
    elif kind == "dissipativity":
        phi = _initial_from(config.get("phi", "const:5"), m, n)
        rep = check_dissipativity(m, phi, float(config.get("T", 100.0)),
                                  float(config.get("burn", 50.0)),
                                  float(config.get("tolerance", 0.01)))
        if not rep.ok:
            violations.append(f"tail norm {rep.max_tail_norm} exceeds bound "
                              f"{rep.bound} + {rep.tolerance}")
        report = {"schema": SCHEMA, "experiment": "dissipativity", **rep.to_dict()}
        (out / "summary.csv").write_text(
            f"max_tail_norm,bound,tolerance,ok\n{rep.max_tail_norm!r},{rep.bound!r},"
            f"{rep.tolerance!r},{int(rep.ok)}\n")
    elif kind == "monotone":
        phi = _initial_from(config.get("phi", "lin:1,0.5"), m, n)
        T, stride = float(config.get("T", 50.0)), float(config.get("stride", 0.25))
        if "phitilde" in config:
            rep = check_order_preservation(m, phi, _initial_from(config["phitilde"], m, n), T, stride)
        else:
            rep = check_cone_invariance(m, phi, T, stride)
        if not rep.ok:
            violations.append(f"cone/order violation at t={rep.first_violation}")
        report = {"schema": SCHEMA, "experiment": "monotone", **rep.to_dict()}
        (out / "summary.csv").write_text(f"first_violation\n{rep.first_violation}\n")
    elif kind == "kappa":
        d = build_decomp(m.mu, m.beta, int(config.get("kmax", 3)), n)
        k = estimate_kappa(d, int(config.get("nsamples", 100)), int(config.get("seed", 0)))
        report = {"schema": SCHEMA, "experiment": "kappa", "kappa_hat": k,
                  "kappa_safe": k / 2, "decomp": d.to_dict()}
        (out / "summary.csv").write_text(f"kappa_hat\n{k!r}\n")
    else:
        raise ConfigError(f"unknown experiment {kind!r}")

    report["config"] = config
    report["violations"] = violations
    _dump(out / "report.json", report)
    return 2 if violations else 0


def _initial_from(spec: str, m: Model, n: int) -> Segment:
    if spec.startswith("rapid:"):
        k, _, amp = spec[len("rapid:"):].partition(",")
        return rapid_seed(m, None, int(k), float(amp or 0.01))
    return parse_initial(spec, n, m.mu, m.beta)
