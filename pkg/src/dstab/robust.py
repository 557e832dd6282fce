"""Stability margins under norm-bounded perturbations of the A_k.

Each coefficient matrix may move by Delta_k with induced 2-norm at most
delta_k.  The certified condition augments the nominal M_mu test with a
scalar penalty (a multiple of the identity) that dominates every cross
term the perturbations can produce, so a passing check certifies the
entire uncertainty ball at the stated rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DstabError, NoNominalCertificate, SearchFailure
from .lyapunov import (
    Certificate,
    _as_P_list,
    _require_spd,
    build_M_mu,
    psd_tolerance,
    search_certificate,
    solve_stein,
    verify_certificate,
)
from .systems import DelaySystem

#: Sentinel returned when the budget ray never exhausts the margin.
DELTA_CAP = 1e12


@dataclass(frozen=True)
class PerturbationBudget:
    """Per-delay induced-norm radii for the coefficient uncertainty."""

    deltas: tuple

    def __post_init__(self):
        if any(d < 0 for d in self.deltas):
            raise DimensionMismatch("perturbation radii must be nonnegative")

    @property
    def N(self) -> int:
        return len(self.deltas)


@dataclass(frozen=True)
class RobustVerdict:
    passed: bool
    margin: float
    tol: float
    amplitude: float


def induced_norm(A) -> float:
    """Euclidean subordinated norm: largest singular value."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.size == 0:
        return 0.0
    return float(np.sqrt(np.linalg.eigvalsh(A.T @ A)[-1]))


def verify_robust_single(A, r: float, delta: float, P, mu: float) -> RobustVerdict:
    """Single-delay ball test at radius delta.

    Passes when l_max(A^T P A - e^{-2 mu r} P) plus the penalty
    l_max(P) (delta + 2 |||A|||) delta stays within the semidefiniteness
    slack; the penalty enters as a multiple of the identity.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    P = _require_spd(P, "P")
    if delta < 0:
        raise DimensionMismatch(f"radius must be nonnegative, got {delta}")
    core = A.T @ P @ A - math.exp(-2.0 * mu * r) * P
    core = 0.5 * (core + core.T)
    evP = np.linalg.eigvalsh(P)
    penalty = float(evP[-1]) * (delta + 2.0 * induced_norm(A)) * delta
    margin = float(np.linalg.eigvalsh(core)[-1]) + penalty
    tol = psd_tolerance(core)
    amplitude = math.sqrt(float(evP[-1]) / float(evP[0]))
    return RobustVerdict(passed=margin <= tol, margin=margin, tol=tol,
                         amplitude=amplitude)


def _q_delta_scalars(matrices, deltas) -> np.ndarray:
    norms = [induced_norm(A) for A in matrices]
    N = len(matrices)
    out = np.empty(N)
    for j in range(N):
        out[j] = sum(norms[j] * deltas[p] + deltas[j] * norms[p]
                     + deltas[p] * deltas[j] for p in range(N))
    return out


def verify_robust_multi(system: DelaySystem, budget: PerturbationBudget,
                        P_list, mu: float) -> RobustVerdict:
    """Multi-delay ball test: -M_mu + l_max(P_1) Q_Delta must stay <= 0.

    Q_Delta is block diagonal with the j-th block a multiple of the
    identity: sum_p (|||A_j||| delta_p + delta_j |||A_p||| +
    delta_p delta_j).
    """
    if budget.N != system.N:
        raise DimensionMismatch(f"budget has {budget.N} radii, system has {system.N}")
    Ps = _as_P_list(P_list, system.n, system.N)
    for k, P in enumerate(Ps):
        Ps[k] = _require_spd(P, f"P_{k + 1}")
    M = build_M_mu(system, Ps, mu)
    lmax_P1 = float(np.linalg.eigvalsh(Ps[0])[-1])
    q = _q_delta_scalars(system.matrices, budget.deltas)
    W = -M.data.copy()
    n = system.n
    for j in range(system.N):
        W[j * n:(j + 1) * n, j * n:(j + 1) * n] += lmax_P1 * q[j] * np.eye(n)
    W = 0.5 * (W + W.T)
    margin = float(np.linalg.eigvalsh(W)[-1])
    tol = psd_tolerance(W)
    cert = verify_certificate(system, Ps, mu)
    return RobustVerdict(passed=margin <= tol, margin=margin, tol=tol,
                         amplitude=cert.alpha_l2)


def nominal_certificate(system: DelaySystem, mu: float, seed: int = 0) -> Certificate:
    """Verified certificate at exactly the requested rate.

    Single delay goes through the scaled Stein route; otherwise the
    feasibility search runs at mu = 0 and the result is re-verified at
    mu.  Raises :class:`NoNominalCertificate` when nothing verifies.
    """
    if system.N == 1:
        A = np.asarray(system.matrices[0], dtype=float)
        scaled = math.exp(mu * system.delays[0]) * A
        if float(np.max(np.abs(np.linalg.eigvals(scaled)))) < 1.0 - 1e-14:
            try:
                P = solve_stein(scaled, np.eye(system.n))
                cert = verify_certificate(system, [P], mu)
                if cert.verified:
                    return cert
            except DstabError:
                pass
        raise NoNominalCertificate(f"no verifiable certificate at rate {mu}")
    try:
        found = search_certificate(system, seed=seed)
    except SearchFailure as exc:
        raise NoNominalCertificate(f"nominal search failed: {exc}") from exc
    cert = verify_certificate(system, found.P_list, mu)
    if not cert.verified:
        raise NoNominalCertificate(
            f"searched certificate verifies at mu = {found.mu} but not at {mu}")
    return cert


def _robust_passes(system: DelaySystem, deltas, P_list, mu: float) -> bool:
    if system.N == 1:
        return verify_robust_single(system.matrices[0], system.delays[0],
                                    deltas[0], P_list[0], mu).passed
    return verify_robust_multi(system, PerturbationBudget(tuple(deltas)),
                               P_list, mu).passed


def max_delta(system: DelaySystem, mu: float, scaling, P_list=None,
              seed: int = 0, research_p: bool = False) -> float:
    """Largest s with the ball delta_k = s scaling_k still certified.

    Bisection to 1e-6 relative accuracy along the given ray.  P is held
    fixed from the nominal certificate unless ``research_p`` asks for a
    re-derived P at each probe (slower, occasionally wider).  A zero ray
    leaves the budget unconstrained and returns the cap sentinel.
    """
    scaling = [float(s) for s in scaling]
    if len(scaling) != system.N:
        raise DimensionMismatch(f"ray has {len(scaling)} entries, system has {system.N}")
    if any(s < 0 for s in scaling):
        raise DimensionMismatch("ray entries must be nonnegative")
    if P_list is None:
        P_list = nominal_certificate(system, mu, seed=seed).P_list
    else:
        cert = verify_certificate(system, P_list, mu)
        if not cert.verified:
            raise NoNominalCertificate(
                f"the supplied P does not verify at rate {mu}")
    if all(s == 0.0 for s in scaling):
        return DELTA_CAP

    def passes(s: float) -> bool:
        deltas = [s * c for c in scaling]
        if _robust_passes(system, deltas, P_list, mu):
            return True
        if research_p:
            fresh = _research_P(system, deltas, mu, seed)
            if fresh is not None:
                return _robust_passes(system, deltas, fresh, mu)
        return False

    if not passes(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while passes(hi):
        lo, hi = hi, 2.0 * hi
        if hi > DELTA_CAP:
            return DELTA_CAP
    while hi - lo > 1e-6 * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _research_P(system: DelaySystem, deltas, mu: float, seed: int):
    """Fresh P candidate for a perturbed probe.

    The coupling through l_max(P_1) makes the robust inequality nonlinear
    in P, so no exact projection exists; re-running the nominal search
    with a shifted seed sometimes lands on a P with more robust slack.
    The caller still gates the result through the exact robust check.
    """
    try:
        found = search_certificate(system, seed=seed + 1)
        cert = verify_certificate(system, found.P_list, mu)
        return cert.P_list if cert.verified else None
    except DstabError:
        return None
