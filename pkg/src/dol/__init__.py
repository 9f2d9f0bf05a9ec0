"""Numerical laboratory for the negative-feedback delay equation x'(t) = -mu x(t) + f(x(t-1))."""

__version__ = "0.1.0"

from .classify import (
    OscillationVerdict,
    RatioTrace,
    VerdictKind,
    classify,
    detect_period,
    pseudo_ordered_scan,
    ratio_trace,
)
from .cones import (
    ConeC,
    MonotonicityReport,
    check_cone_invariance,
    check_order_preservation,
    estimate_kappa,
    in_cone_C,
)
from .fnspace import (
    Order,
    Segment,
    ZeroRecord,
    c1_norm,
    find_zeros,
    in_K,
    in_S,
    in_int_S1,
    order_relation,
    sign_changes,
    sup_norm,
)
from .harness import density_sweep, perturbation_experiment, rapid_seed, run_report
from .integrator import Trajectory, check_dissipativity, evolve, segment_at, variational_evolve
from .model import Model, dissipativity_bound, make_model
from .spectrum import (
    CharRoot,
    Regime,
    SpectralDecomp,
    build_decomp,
    leading_basis,
    project_L,
    project_Q,
    regime,
    roots_in_strip,
)
