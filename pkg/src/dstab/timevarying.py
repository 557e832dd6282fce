"""Decay-rate degradation under time-varying delays.

A nominal certificate (P, mu) for constant delays r_{0k} keeps certifying
the perturbed system r_k(t) = r_{0k} + delta_rk(t) at a reduced rate gamma,
provided each perturbation stays within amplitude delta_k and slope
delta_{1k} < 1.  The degradation is controlled by the ratio beta between
the worst eigenvalue of -M_mu and the spread of the P family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DerivativeBoundTooLarge,
    DimensionMismatch,
    NominalNotVerified,
    NumericError,
)
from .lyapunov import (
    Certificate,
    _require_spd,
    search_certificate,
    verify_certificate,
)
from .robust import nominal_certificate
from .systems import DelaySystem


@dataclass(frozen=True)
class VaryingCertificate:
    """Degraded-rate certificate for time-varying delays.

    ``gamma`` is the reported rate and equals ``gamma_max`` (the endpoint
    of the admissible bracket).  ``delta1_caps`` lists the per-delay
    admissible derivative bounds 1 - beta - e^{-2 mu r_{0k}}.
    """

    beta: float
    gamma_max: float
    gamma: float
    delta1_caps: tuple
    alpha: float
    base_certificate: Certificate

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "gamma_max": self.gamma_max,
            "gamma": self.gamma,
            "delta1_caps": list(self.delta1_caps),
            "alpha": self.alpha,
            "base_certificate": self.base_certificate.to_dict(),
        }


def _log_ratio(beta: float, mu: float, r0: float, delta: float,
               delta1: float) -> float:
    arg = beta + math.exp(-2.0 * mu * r0)
    if arg < -1e-12:
        raise NumericError(
            f"beta + e^(-2 mu r0) = {arg} is negative; the degradation "
            "formula does not apply")
    arg = max(arg, 1e-300) / (1.0 - delta1)
    return -math.log(arg) / (2.0 * (r0 + delta))


def varying_single(A, r0: float, delta: float, delta1: float,
                   P=None, mu: float | None = None) -> VaryingCertificate:
    """Single-delay degradation certificate.

    With M_mu = e^{-2 mu r0} P - A^T P A nominally semidefinite,
    beta = l_max(-M_mu)/l_max(P) and the slope bound must satisfy
    delta1 < 1 - beta - e^{-2 mu r0}; then

        gamma_max = -ln((beta + e^{-2 mu r0}) / (1 - delta1)) / (2 (r0 + delta))

    and ||x(t)|| <= sqrt(l_max(P)/l_min(P)) ||phi||_c e^{-gamma t}.

    When P or mu is missing, a nominal certificate is searched first.
    """
    if delta < 0 or delta1 < 0:
        raise DimensionMismatch("perturbation bounds must be nonnegative")
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    system = DelaySystem(matrices=(A,), delays=(float(r0),))
    if P is None:
        base = search_certificate(system) if mu is None \
            else nominal_certificate(system, mu)
        P, mu = base.P_list[0], base.mu
    else:
        if mu is None:
            raise DimensionMismatch("a supplied P needs an explicit mu")
        P = _require_spd(P, "P")
        base = verify_certificate(system, [P], mu)
    if not base.verified:
        raise NominalNotVerified(
            f"nominal margin {base.min_eig_margin:.6e} at mu = {mu}")
    P = np.asarray(base.P_list[0])
    evP = np.linalg.eigvalsh(P)
    beta = -base.min_eig_margin / float(evP[-1])
    cap = 1.0 - beta - math.exp(-2.0 * mu * r0)
    if not delta1 < cap:
        raise DerivativeBoundTooLarge(
            f"delta1 = {delta1} must be strictly below {cap}")
    gamma = _log_ratio(beta, mu, r0, delta, delta1)
    alpha = math.sqrt(float(evP[-1]) / float(evP[0]))
    return VaryingCertificate(beta=beta, gamma_max=gamma, gamma=gamma,
                              delta1_caps=(cap,), alpha=alpha,
                              base_certificate=base)


def asymptotic_delta_max(P, M) -> float:
    """Amplitude budget preserving plain asymptotic stability at mu = 0.

    min{1, l_min(M)/l_max(P)} for a Stein pair A^T P A - P = -M.
    """
    P = _require_spd(P, "P")
    M = _require_spd(M, "M")
    lmin_M = float(np.linalg.eigvalsh(M)[0])
    lmax_P = float(np.linalg.eigvalsh(P)[-1])
    return min(1.0, lmin_M / lmax_P)


def varying_multi(system: DelaySystem, deltas, delta1s,
                  P_list=None, mu: float | None = None) -> VaryingCertificate:
    """Multi-delay degradation certificate.

    beta divides l_max(-M_mu) by max_k (l_max(P_k) - l_min(P_{k+1})) with
    P_{N+1} = 0.  Every slope bound must satisfy
    delta_{1k} < 1 - beta - e^{-2 mu r_{0k}}; the rate is the worst of the
    per-delay degradations and the L2 amplitude is sqrt(alpha_2/alpha_1)
    with alpha_1 = min_k e^{-2 mu (r_{0k}+delta_k)} l_min(P_k) and
    alpha_2 = (r_{0N}+delta_N) max_k l_max(P_k).
    """
    N = system.N
    deltas = [float(d) for d in deltas]
    delta1s = [float(d) for d in delta1s]
    if len(deltas) != N or len(delta1s) != N:
        raise DimensionMismatch(f"need {N} perturbation bounds")
    if any(d < 0 for d in deltas) or any(d < 0 for d in delta1s):
        raise DimensionMismatch("perturbation bounds must be nonnegative")
    if P_list is None:
        base = search_certificate(system) if mu is None \
            else nominal_certificate(system, mu)
        mu = base.mu
    else:
        if mu is None:
            raise DimensionMismatch("a supplied P_list needs an explicit mu")
        base = verify_certificate(system, P_list, mu)
    if not base.verified:
        raise NominalNotVerified(
            f"nominal margin {base.min_eig_margin:.6e} at mu = {mu}")
    Ps = [np.asarray(P) for P in base.P_list]
    lmax = [float(np.linalg.eigvalsh(P)[-1]) for P in Ps]
    lmin = [float(np.linalg.eigvalsh(P)[0]) for P in Ps]
    spread = [lmax[k] - (lmin[k + 1] if k + 1 < N else 0.0) for k in range(N)]
    beta = -base.min_eig_margin / max(spread)
    r0 = list(system.delays)
    caps = []
    for k in range(N):
        cap = 1.0 - beta - math.exp(-2.0 * mu * r0[k])
        caps.append(cap)
        if not delta1s[k] < cap:
            raise DerivativeBoundTooLarge(
                f"delta1 for delay {k + 1} is {delta1s[k]}, must be strictly "
                f"below {cap}")
    gamma = min(_log_ratio(beta, mu, r0[k], deltas[k], delta1s[k])
                for k in range(N))
    alpha1 = min(math.exp(-2.0 * mu * (r0[k] + deltas[k])) * lmin[k]
                 for k in range(N))
    alpha2 = (r0[-1] + deltas[-1]) * max(lmax)
    alpha = math.sqrt(alpha2 / alpha1)
    return VaryingCertificate(beta=beta, gamma_max=gamma, gamma=gamma,
                              delta1_caps=tuple(caps), alpha=alpha,
                              base_certificate=base)
