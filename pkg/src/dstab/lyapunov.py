"""Decay-rate certificates from quadratic functionals.

A certificate is a family of symmetric positive definite matrices
P_1..P_N together with a rate mu such that the block matrix M_mu built
from the system is positive semidefinite.  Verification is exact (dense
symmetric eigenvalues at a scale-aware tolerance); the search that
produces candidates is heuristic and never vouches for itself: whatever
it finds must pass verification before it is returned.

Single-delay systems admit a closed route through the Stein equation
A^T P A - P = -M.  Multi-delay feasibility runs alternating projections
between the positive cones of the variables and the image constraint,
followed by bisection on mu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidRatio,
    NotPositiveDefinite,
    OutOfRange,
    SearchFailure,
    SingularSystem,
    SpectralRadiusNotLessThanOne,
)
from .systems import DelaySystem, commensurability, lift_commensurate
from . import spectral

DEFAULT_PSD_MARGIN = 1e-6
DEFAULT_MAX_ITERS = 500
_STALL_WINDOW = 50
_BISECT_ITERS = 40

#: Positive definiteness threshold for P: lambda_min >= this times lambda_max.
P_DEFINITE_RTOL = 1e-10

#: Decay-rate cap: e^{-2 mu r_N} must stay representable.
_MU_CAP_FACTOR = 300.0


def psd_tolerance(W: np.ndarray) -> float:
    """Scale-aware semidefiniteness slack 1e-9 (1 + ||W||_2)."""
    if W.size == 0:
        return 1e-9
    return 1e-9 * (1.0 + float(np.max(np.abs(np.linalg.eigvalsh(W)))))


# ---------------------------------------------------------------------------
# symmetric vectorization
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)


def _sym_pairs(n: int):
    return [(i, j) for i in range(n) for j in range(i, n)]


def svec(S: np.ndarray) -> np.ndarray:
    n = S.shape[0]
    return np.asarray([S[i, j] * (1.0 if i == j else _SQRT2)
                       for i, j in _sym_pairs(n)])


def unsvec(v: np.ndarray, n: int) -> np.ndarray:
    S = np.zeros((n, n))
    for val, (i, j) in zip(v, _sym_pairs(n)):
        if i == j:
            S[i, i] = val
        else:
            S[i, j] = S[j, i] = val / _SQRT2
    return S


# ---------------------------------------------------------------------------
# block matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockMatrix:
    """Dense symmetric matrix with an N x N layout of n x n blocks."""

    data: np.ndarray
    n: int
    N: int

    def block(self, i: int, j: int) -> np.ndarray:
        n = self.n
        return self.data[i * n:(i + 1) * n, j * n:(j + 1) * n].copy()

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.data)[0])


def _as_P_list(P_list, n: int, N: int):
    if len(P_list) != N:
        raise DimensionMismatch(f"need {N} matrices, got {len(P_list)}")
    out = []
    for k, P in enumerate(P_list):
        P = np.asarray(P, dtype=float)
        if P.shape == () and n == 1:
            P = P.reshape(1, 1)
        if P.shape != (n, n):
            raise DimensionMismatch(f"P_{k + 1} has shape {P.shape}, expected {(n, n)}")
        out.append(P)
    return out


def build_M_mu(system: DelaySystem, P_list, mu: float) -> BlockMatrix:
    """Assemble M_mu; its positive semidefiniteness certifies rate mu.

    -M_mu has blocks A_i^T P_1 A_j off the diagonal, diagonal blocks
    A_k^T P_1 A_k + e^{-2 mu r_k} (P_{k+1} - P_k) for k < N, and
    A_N^T P_1 A_N - e^{-2 mu r_N} P_N in the last position.
    """
    if mu < 0:
        raise OutOfRange(f"decay rate must be nonnegative, got {mu}")
    n, N = system.n, system.N
    Ps = _as_P_list(P_list, n, N)
    A = [np.asarray(Ak, dtype=float) for Ak in system.matrices]
    P1 = Ps[0]
    w = np.exp(-2.0 * mu * np.asarray(system.delays))
    neg = np.zeros((N * n, N * n))
    for i in range(N):
        for j in range(N):
            blk = A[i].T @ P1 @ A[j]
            if i == j:
                if i < N - 1:
                    blk = blk + w[i] * (Ps[i + 1] - Ps[i])
                else:
                    blk = blk - w[i] * Ps[i]
            neg[i * n:(i + 1) * n, j * n:(j + 1) * n] = blk
    M = -neg
    M = 0.5 * (M + M.T)
    return BlockMatrix(data=M, n=n, N=N)


# ---------------------------------------------------------------------------
# Stein equation
# ---------------------------------------------------------------------------

def _require_spd(S: np.ndarray, label: str) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim == 0:
        S = S.reshape(1, 1)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatch(f"{label} must be square, got shape {S.shape}")
    scale = float(np.max(np.abs(S))) if S.size else 0.0
    if scale and float(np.max(np.abs(S - S.T))) > 1e-12 * scale:
        raise NotPositiveDefinite(f"{label} is not symmetric")
    ev = np.linalg.eigvalsh(0.5 * (S + S.T))
    if ev[0] < P_DEFINITE_RTOL * max(ev[-1], 0.0) or ev[0] <= 0.0:
        raise NotPositiveDefinite(f"{label} is not positive definite "
                                  f"(eigenvalues in [{ev[0]:.3e}, {ev[-1]:.3e}])")
    return 0.5 * (S + S.T)


def solve_stein(A, M) -> np.ndarray:
    """Unique symmetric P with A^T P A - P = -M, for rho(A) < 1 and M > 0.

    Solved as a dense linear system over the n(n+1)/2 symmetric
    coordinates; the residual is checked against 1e-10 (1 + ||M||_F).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    M = _require_spd(M, "M")
    n = A.shape[0]
    if A.shape != (n, n) or M.shape != (n, n):
        raise DimensionMismatch(f"A {A.shape} and M {M.shape} must share one square size")
    rho = float(np.max(np.abs(np.linalg.eigvals(A)))) if n else 0.0
    if rho >= 1.0:
        raise SpectralRadiusNotLessThanOne(f"rho(A) = {rho} >= 1")
    m = n * (n + 1) // 2
    L = np.empty((m, m))
    for col, (i, j) in enumerate(_sym_pairs(n)):
        E = np.zeros((n, n))
        if i == j:
            E[i, i] = 1.0
        else:
            E[i, j] = E[j, i] = 1.0 / _SQRT2
        L[:, col] = svec(E - A.T @ E @ A)
    try:
        x = np.linalg.solve(L, svec(M))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"Stein system is singular (rho(A) = {rho})") from exc
    P = unsvec(x, n)
    P = 0.5 * (P + P.T)
    residual = float(np.linalg.norm(A.T @ P @ A - P + M, "fro"))
    if residual > 1e-10 * (1.0 + float(np.linalg.norm(M, "fro"))):
        raise SingularSystem(f"Stein residual {residual:.3e} too large "
                             f"(rho(A) = {rho})")
    return P


def mu_from_stein(P, M, r: float) -> float:
    """Largest rate the Stein pair supports: -ln(1 - l_min(M)/l_max(P)) / (2r)."""
    P = _require_spd(P, "P")
    M = _require_spd(M, "M")
    if r <= 0:
        raise OutOfRange(f"delay must be positive, got {r}")
    lmin_M = float(np.linalg.eigvalsh(M)[0])
    lmax_P = float(np.linalg.eigvalsh(P)[-1])
    if lmin_M >= lmax_P:
        raise InvalidRatio(f"lambda_min(M) = {lmin_M} >= lambda_max(P) = {lmax_P}")
    return -math.log(1.0 - lmin_M / lmax_P) / (2.0 * r)


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    """Verified or rejected decay-rate certificate.

    ``min_eig_margin`` is the smallest eigenvalue of M_mu; verification
    demands it exceed -psd_tol.  ``alpha_exp`` is the pointwise amplitude
    (single delay only), ``alpha_l2`` the sliding-window L2 amplitude.
    """

    P_list: tuple
    mu: float
    alpha_exp: float | None
    alpha_l2: float
    kind: str
    verified: bool
    min_eig_margin: float

    @property
    def N(self) -> int:
        return len(self.P_list)

    def to_dict(self) -> dict:
        return {
            "P": [[float(v) for v in P.reshape(-1)] for P in self.P_list],
            "mu": self.mu,
            "alpha_exp": self.alpha_exp,
            "alpha_l2": self.alpha_l2,
            "kind": self.kind,
            "verified": self.verified,
            "min_eig_margin": self.min_eig_margin,
        }


def certificate_from_dict(raw: dict) -> "Certificate":
    try:
        mats = []
        for flat in raw["P"]:
            n = int(round(math.sqrt(len(flat))))
            if n * n != len(flat):
                raise DimensionMismatch(f"P entry of length {len(flat)} is not square")
            mats.append(np.asarray(flat, dtype=float).reshape(n, n))
        return Certificate(P_list=tuple(mats), mu=float(raw["mu"]),
                           alpha_exp=None if raw.get("alpha_exp") is None
                           else float(raw["alpha_exp"]),
                           alpha_l2=float(raw["alpha_l2"]), kind=str(raw["kind"]),
                           verified=bool(raw["verified"]),
                           min_eig_margin=float(raw["min_eig_margin"]))
    except KeyError as exc:
        raise DimensionMismatch(f"certificate misses field {exc}") from exc


def verify_certificate(system: DelaySystem, P_list, mu: float) -> Certificate:
    """Check M_mu >= 0 and fill the amplitude constants.

    alpha_l2^2 = sum_k (r_k - r_{k-1}) l_max(P_k) / (l_min(P_N) e^{-2 mu r_N})
    with r_0 = 0; for a single delay the pointwise amplitude
    sqrt(l_max(P)/l_min(P)) is filled as well.
    """
    n, N = system.n, system.N
    Ps = _as_P_list(P_list, n, N)
    for k, P in enumerate(Ps):
        Ps[k] = _require_spd(P, f"P_{k + 1}")
    M = build_M_mu(system, Ps, mu)
    eigs = np.linalg.eigvalsh(M.data)
    min_eig = float(eigs[0])
    tol = 1e-9 * (1.0 + float(np.max(np.abs(eigs))))
    verified = min_eig >= -tol
    delays = np.asarray(system.delays)
    gaps = np.diff(np.concatenate([[0.0], delays]))
    lmax = [float(np.linalg.eigvalsh(P)[-1]) for P in Ps]
    lminN = float(np.linalg.eigvalsh(Ps[-1])[0])
    alpha_l2 = math.sqrt(float(np.dot(gaps, lmax)) /
                         (lminN * math.exp(-2.0 * mu * float(delays[-1]))))
    if N == 1:
        evP = np.linalg.eigvalsh(Ps[0])
        alpha_exp = math.sqrt(float(evP[-1]) / float(evP[0]))
        kind = "exponential"
    else:
        alpha_exp = None
        kind = "l2_exponential"
    return Certificate(P_list=tuple(Ps), mu=float(mu), alpha_exp=alpha_exp,
                       alpha_l2=alpha_l2, kind=kind, verified=verified,
                       min_eig_margin=min_eig)


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------

def _mu_cap(system: DelaySystem, sup: float) -> float:
    r1, rN = system.delays[0], system.delays[-1]
    cap = _MU_CAP_FACTOR / (2.0 * rN)
    if sup >= 1.0:
        return 1.0 / r1
    return min(-math.log(max(sup, 1e-12)) / r1, cap)


def _search_single(system: DelaySystem, mu_hi: float) -> Certificate | None:
    A = np.asarray(system.matrices[0], dtype=float)
    r = system.delays[0]
    n = system.n

    def attempt(mu: float) -> Certificate | None:
        scaled = math.exp(mu * r) * A
        if float(np.max(np.abs(np.linalg.eigvals(scaled)))) >= 1.0 - 1e-14:
            return None
        try:
            P = solve_stein(scaled, np.eye(n))
        except (SpectralRadiusNotLessThanOne, SingularSystem, NotPositiveDefinite):
            return None
        cert = verify_certificate(system, [P], mu)
        return cert if cert.verified else None

    best = attempt(0.0)
    if best is None:
        return None
    top = attempt(mu_hi)
    if top is not None:
        return top
    lo, hi = 0.0, mu_hi
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        cert = attempt(mid)
        if cert is not None:
            lo, best = mid, cert
        else:
            hi = mid
    return best


class _AffineMap:
    """svec-stacked linear map P_1..P_N -> svec(M_mu) at fixed mu."""

    def __init__(self, system: DelaySystem, mu: float):
        n, N = system.n, system.N
        self.n, self.N = n, N
        self.m = n * (n + 1) // 2
        dim_in = N * self.m
        basis = []
        for k in range(N):
            for idx, (i, j) in enumerate(_sym_pairs(n)):
                E = np.zeros((n, n))
                if i == j:
                    E[i, i] = 1.0
                else:
                    E[i, j] = E[j, i] = 1.0 / _SQRT2
                Ps = [np.zeros((n, n)) for _ in range(N)]
                Ps[k] = E
                basis.append(svec(build_M_mu(system, Ps, mu).data))
        self.L = np.stack(basis, axis=1)
        assert self.L.shape[1] == dim_in

    def split(self, p: np.ndarray):
        return [unsvec(p[k * self.m:(k + 1) * self.m], self.n)
                for k in range(self.N)]

    def stack(self, Ps) -> np.ndarray:
        return np.concatenate([svec(P) for P in Ps])


def _clip_psd(S: np.ndarray, floor: float) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    w = np.maximum(w, floor)
    return V @ np.diag(w) @ V.T


def _ap_search(system: DelaySystem, mu: float, p_start: np.ndarray,
               psd_margin: float, max_iters: int, seed: int):
    """Alternating projections on (P cone) x (M_mu(P) cone preimage).

    Returns (certificate or None, best margin seen, last iterate).
    """
    amap = _AffineMap(system, mu)
    p = p_start.copy()
    best_margin = -math.inf
    since_improve = 0
    restarts = 0
    for _ in range(max_iters):
        Ps = [_clip_psd(P, psd_margin) for P in amap.split(p)]
        # canonical scale: the verification tolerance has an absolute
        # floor, so candidates must never ride the P scale down to where
        # an infeasible margin hides beneath it
        scale = max(float(np.linalg.eigvalsh(P)[-1]) for P in Ps)
        Ps = [P * (float(system.N) / scale) for P in Ps]
        p = amap.stack(Ps)
        M = build_M_mu(system, Ps, mu)
        margin = float(np.linalg.eigvalsh(M.data)[0])
        if margin > best_margin + 1e-12:
            best_margin = margin
            since_improve = 0
        else:
            since_improve += 1
        if margin >= -psd_tolerance(M.data):
            try:
                cert = verify_certificate(system, Ps, mu)
            except NotPositiveDefinite:
                cert = None
            if cert is not None and cert.verified:
                return cert, best_margin, p
        target = _clip_psd(M.data, psd_margin)
        p, *_ = np.linalg.lstsq(amap.L, svec(target), rcond=None)
        if since_improve >= _STALL_WINDOW:
            restarts += 1
            rng = np.random.default_rng([seed, restarts])
            fresh = []
            for _k in range(system.N):
                B = rng.standard_normal((system.n, system.n))
                fresh.append(B @ B.T + np.eye(system.n))
            p = amap.stack(fresh)
            since_improve = 0
    return None, best_margin, p


def search_certificate(system: DelaySystem, psd_margin: float = DEFAULT_PSD_MARGIN,
                       max_iters: int = DEFAULT_MAX_ITERS, seed: int = 0) -> Certificate:
    """Find a verified certificate with the largest bisected decay rate.

    Phase 1 settles feasibility at mu = 0 (exact Stein route for a single
    delay, alternating projections otherwise); phase 2 bisects mu up to a
    cap derived from the torus supremum.  Raises :class:`SearchFailure`
    when no candidate passes verification; the failure carries the best
    margin and, for commensurate systems, the lifted single-delay
    classification as diagnostics.
    """
    verdict = spectral.torus_sup(system)
    mu_hi = _mu_cap(system, verdict.sup_estimate)

    if system.N == 1:
        cert = _search_single(system, mu_hi)
        if cert is not None:
            return cert
        return _fail(system, verdict, None)

    start = [float(system.N - k) * np.eye(system.n) for k in range(system.N)]
    amap0 = _AffineMap(system, 0.0)
    cert0, best0, p_last = _ap_search(system, 0.0, amap0.stack(start),
                                      psd_margin, max_iters, seed)
    if cert0 is None:
        return _fail(system, verdict, best0)
    best_cert = cert0
    lo, hi = 0.0, mu_hi
    p_warm = amap0.stack([np.asarray(P) for P in cert0.P_list])
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        cert_mid, _, _ = _ap_search(system, mid, p_warm, psd_margin,
                                    max_iters, seed)
        if cert_mid is not None:
            lo, best_cert = mid, cert_mid
            p_warm = amap0.stack([np.asarray(P) for P in cert_mid.P_list])
        else:
            hi = mid
    return best_cert


def _fail(system: DelaySystem, verdict, best_margin):
    diagnostics = {
        "torus_sup": verdict.sup_estimate,
        "torus_verdict": verdict.stable_in_delays,
    }
    comm = commensurability(system)
    if comm.commensurate:
        lifted = lift_commensurate(system, comm)
        diagnostics["lifted_classification"] = spectral.classify_single_delay(
            np.asarray(lifted.matrices[0]))
    parts = ["no verifiable certificate found"]
    if best_margin is not None and math.isfinite(best_margin):
        parts.append(f"best margin {best_margin:.3e}")
    if verdict.stable_in_delays == "no":
        parts.append(f"torus supremum {verdict.sup_estimate:.6g} >= 1, "
                     "so no certificate exists at any rate")
    if "lifted_classification" in diagnostics:
        parts.append("lifted single-delay companion is "
                     + diagnostics["lifted_classification"])
    raise SearchFailure("; ".join(parts), best_margin=best_margin,
                        diagnostics=diagnostics)
