"""Stability certification for linear continuous-time difference equations.

The package decides whether x(t) = sum_k A_k x(t - r_k) is stable,
produces checkable Lyapunov certificates (P matrices, decay rate,
amplitude), measures robustness margins for parametric and
time-varying-delay perturbations, and cross-validates everything
against direct simulation.
"""

from .errors import (
    DstabError,
    NumericError,
    SearchFailure,
    UsageError,
)
from .lyapunov import (
    Certificate,
    build_M_mu,
    certificate_from_dict,
    mu_from_stein,
    search_certificate,
    solve_stein,
    verify_certificate,
)
from .report import Report, VERSION
from .robust import (
    PerturbationBudget,
    RobustVerdict,
    induced_norm,
    max_delta,
    nominal_certificate,
    verify_robust_multi,
    verify_robust_single,
)
from .simulator import (
    Trajectory,
    VaryingDelayProfile,
    discontinuity_times,
    fit_decay,
    l2_window_norm,
    simulate,
    simulate_varying,
)
from .spectral import (
    SpectralVerdict,
    classify_single_delay,
    scalar_sum_test,
    torus_sup,
)
from .systems import (
    DelaySystem,
    InitialFunction,
    commensurability,
    lift_commensurate,
    load_system,
    parse_system,
    validate,
)
from .timevarying import (
    VaryingCertificate,
    asymptotic_delta_max,
    varying_multi,
    varying_single,
)

__version__ = VERSION

__all__ = [
    "Certificate",
    "DelaySystem",
    "DstabError",
    "InitialFunction",
    "NumericError",
    "PerturbationBudget",
    "Report",
    "RobustVerdict",
    "SearchFailure",
    "SpectralVerdict",
    "Trajectory",
    "UsageError",
    "VaryingCertificate",
    "VaryingDelayProfile",
    "asymptotic_delta_max",
    "build_M_mu",
    "certificate_from_dict",
    "classify_single_delay",
    "commensurability",
    "discontinuity_times",
    "fit_decay",
    "induced_norm",
    "l2_window_norm",
    "lift_commensurate",
    "load_system",
    "max_delta",
    "mu_from_stein",
    "nominal_certificate",
    "parse_system",
    "scalar_sum_test",
    "search_certificate",
    "simulate",
    "simulate_varying",
    "solve_stein",
    "torus_sup",
    "validate",
    "varying_multi",
    "varying_single",
    "verify_certificate",
    "verify_robust_multi",
    "verify_robust_single",
    "__version__",
]
