"""Delay-independent stability tests.

The system is L2-asymptotically stable for every choice of positive delays
exactly when sup over angle tuples of rho(sum_k e^{j theta_k} A_k) is below
one.  A grid sweep gives a lower bound of that supremum; coordinate-descent
refinement sharpens it.  Because the grid value is only a lower bound, the
"yes" verdict carries a safety margin and the boundary case is reported as
inconclusive rather than decided.

Scalar systems collapse to the absolute coefficient sum, and a single delay
reduces to eigenvalue location plus a defectiveness check on unit-modulus
eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EigenFailure, NotScalar, OutOfRange
from .systems import DelaySystem

#: Safety margin under 1 below which the grid estimate supports a "yes".
STABILITY_MARGIN = 1e-6

DEFAULT_RESOLUTION = 64
DEFAULT_REFINE_ITERS = 30


@dataclass(frozen=True)
class SpectralVerdict:
    """Result of the torus sweep.

    ``sup_estimate`` is a lower bound of the true supremum (the sweep always
    contains the all-zero angle tuple, so it is at least rho(sum A_k)).
    ``stable_in_delays`` is "yes", "no", or "inconclusive".
    """

    sup_estimate: float
    refined: bool
    grid: int
    argmax_angles: tuple
    stable_in_delays: str

    def to_dict(self) -> dict:
        return {
            "sup_estimate": self.sup_estimate,
            "refined": self.refined,
            "grid": self.grid,
            "argmax_angles": list(self.argmax_angles),
            "stable_in_delays": self.stable_in_delays,
        }


def _rho_at(matrices, angles) -> float:
    S = np.zeros(matrices[0].shape, dtype=complex)
    for A, th in zip(matrices, angles):
        S = S + np.exp(1j * th) * A
    try:
        ev = np.linalg.eigvals(S)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def _verdict_for(sup: float) -> str:
    if sup < 1.0 - STABILITY_MARGIN:
        return "yes"
    if sup >= 1.0:
        return "no"
    return "inconclusive"


def torus_sup(system: DelaySystem, resolution: int = DEFAULT_RESOLUTION,
              refine_iters: int = DEFAULT_REFINE_ITERS) -> SpectralVerdict:
    """Sweep rho(sum e^{j theta_k} A_k) over the angle torus.

    The first angle is pinned at zero: multiplying every term by a common
    unimodular factor rescales each eigenvalue by that factor and leaves
    the moduli unchanged, so one angle is redundant.  The remaining N-1
    angles run over a uniform grid of the given resolution, and the best
    point is polished by coordinate descent with step halving.
    """
    if resolution < 8:
        raise OutOfRange(f"resolution must be at least 8, got {resolution}")
    mats = [np.asarray(A, dtype=float) for A in system.matrices]
    N, n = len(mats), mats[0].shape[0]
    free = N - 1
    if free == 0:
        sup = _rho_at(mats, [0.0])
        return SpectralVerdict(sup_estimate=sup, refined=refine_iters > 0,
                               grid=resolution, argmax_angles=(0.0,),
                               stable_in_delays=_verdict_for(sup))

    step = 2.0 * np.pi / resolution
    axes = [np.arange(resolution) * step for _ in range(free)]
    mesh = np.meshgrid(*axes, indexing="ij")
    thetas = np.stack([m.reshape(-1) for m in mesh], axis=1)
    stacked = np.zeros((thetas.shape[0], n, n), dtype=complex)
    stacked += mats[0]
    for k in range(1, N):
        stacked += np.exp(1j * thetas[:, k - 1])[:, None, None] * mats[k]
    try:
        ev = np.linalg.eigvals(stacked)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    rho = np.abs(ev).max(axis=1)
    best = int(np.argmax(rho))  # first occurrence: lexicographically smallest tuple
    sup = float(rho[best])
    angles = thetas[best].copy()

    if refine_iters > 0:
        width = step
        for _ in range(refine_iters):
            for d in range(free):
                for cand in (angles[d] - width, angles[d] + width):
                    trial = angles.copy()
                    trial[d] = cand % (2.0 * np.pi)
                    val = _rho_at(mats, np.concatenate([[0.0], trial]))
                    if val > sup:
                        sup = val
                        angles = trial
            width *= 0.5

    return SpectralVerdict(sup_estimate=sup, refined=refine_iters > 0,
                           grid=resolution,
                           argmax_angles=(0.0, *map(float, angles)),
                           stable_in_delays=_verdict_for(sup))


def scalar_sum_test(system: DelaySystem) -> float:
    """Sum of |a_k| for a scalar system; below one means stable in the delays."""
    if system.n != 1:
        raise NotScalar(f"absolute-sum test needs n = 1, got n = {system.n}")
    return float(sum(abs(float(A[0, 0])) for A in system.matrices))


def classify_single_delay(A, rank_tol: float | None = None) -> str:
    """Classify x(t) = A x(t - r) from the spectrum of A.

    Returns "asymptotically_stable" when rho(A) < 1, "stable" when every
    unit-modulus eigenvalue is semisimple (its geometric multiplicity,
    read off the numerical rank of A - lambda I, matches the cluster
    size), and "unstable" otherwise.

    Computed eigenvalues of a defective cluster scatter like a fractional
    power of roundoff, so cluster membership uses a tolerance far looser
    than ``rank_tol``; a truly marginal matrix near the unit circle may
    land in "stable" rather than "asymptotically_stable", which is the
    conservative call.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    scale = float(np.linalg.norm(A, 2)) if n else 0.0
    if rank_tol is None:
        rank_tol = 1e-8 * max(scale, 1e-300)
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    # defective-cluster scatter ~ (eps * scale)^(1/n)
    ctol = max(rank_tol, 10.0 * n * (2.3e-16 * max(1.0, scale)) ** (1.0 / n))
    moduli = np.abs(ev)
    if np.all(moduli < 1.0 - ctol):
        return "asymptotically_stable"
    if np.any(moduli > 1.0 + ctol):
        return "unstable"
    unit = ev[moduli >= 1.0 - ctol]
    remaining = list(unit)
    while remaining:
        lam = remaining.pop(0)
        cluster = [lam]
        rest = []
        for mu in remaining:
            if abs(mu - lam) <= 10.0 * ctol:
                cluster.append(mu)
            else:
                rest.append(mu)
        remaining = rest
        lam_bar = complex(np.mean(cluster))
        s = np.linalg.svd(A - lam_bar * np.eye(n), compute_uv=False)
        geometric = n - int(np.sum(s > rank_tol))
        if geometric < len(cluster):
            return "unstable"
    return "stable"
