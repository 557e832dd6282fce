"""Grid simulation of delay difference systems.

Solutions of x(t) = sum_k A_k x(t - r_k) are piecewise continuous: jumps
enter at t = 0 and propagate along the delay lattice
{m_1 r_1 + ... + m_N r_N}.  The simulator evaluates the right-hand side
directly on a uniform grid, reading past values by linear interpolation
between grid samples except across recorded discontinuities, where the
sample on the same side of the nearest jump as the lookup point is used.
Solutions are taken right-continuous at jumps.

For commensurate delays with the step dividing the base exactly, every
lookup lands on the grid and the computed trajectory is exact (it is the
block-companion matrix recursion).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CausalityViolation,
    DegenerateFit,
    DimensionMismatch,
    InvalidProfile,
    LatticeExplosion,
    OutOfRange,
    StepTooLarge,
    ValidationError,
)
from .systems import DelaySystem, InitialFunction

#: Enumeration cap for the discontinuity lattice.
LATTICE_CAP = 10 ** 6

#: Two lattice points closer than this are merged.
LATTICE_DEDUPE = 1e-12

#: Lookup offsets within this many grid cells of an exact grid point snap to it.
_SNAP = 1e-9

#: Default step: min(r_1 / 200, 1e-2).  Default horizon: 10 * r_N.
DEFAULT_STEP_DIVISOR = 200
DEFAULT_STEP_CAP = 1e-2
DEFAULT_HORIZON_FACTOR = 10.0


def default_step(system: DelaySystem) -> float:
    return min(system.delays[0] / DEFAULT_STEP_DIVISOR, DEFAULT_STEP_CAP)


def default_horizon(system: DelaySystem) -> float:
    return DEFAULT_HORIZON_FACTOR * system.delays[-1]


def discontinuity_times(delays, T: float, cap: int = LATTICE_CAP) -> np.ndarray:
    """Ascending jump times {sum m_i r_i} within [0, T], starting at 0.

    Best-first expansion of the lattice; values closer than
    :data:`LATTICE_DEDUPE` are merged.  Raises :class:`LatticeExplosion`
    past ``cap`` entries.
    """
    if T < 0:
        raise OutOfRange(f"horizon must be nonnegative, got {T}")
    out = []
    heap = [0.0]
    while heap:
        t = heapq.heappop(heap)
        if out and t <= out[-1] + LATTICE_DEDUPE:
            continue
        out.append(t)
        if len(out) > cap:
            raise LatticeExplosion(
                f"more than {cap} discontinuities in [0, {T}]")
        for r in delays:
            tt = t + r
            if tt <= T + LATTICE_DEDUPE:
                heapq.heappush(heap, tt)
    return np.asarray(out)


@dataclass(frozen=True)
class VaryingDelayProfile:
    """One time-varying delay r(t) = r0 + delta_r(t).

    ``delta`` bounds |delta_r| and ``delta1`` bounds |d delta_r / dt|; both
    must dominate the actual perturbation (checked on the simulation grid,
    and exactly for sinusoid presets where the derivative bound is |a w|).
    """

    r0: float
    delta: float
    delta1: float
    preset: dict | None = None

    def perturbation(self, t):
        ts = np.asarray(t, dtype=float)
        if self.preset is None:
            return np.zeros_like(ts)
        kind = self.preset.get("kind")
        if kind == "sinusoid":
            a = float(self.preset["amplitude"])
            w = float(self.preset["frequency"])
            p = float(self.preset.get("phase", 0.0))
            return a * np.sin(w * ts + p)
        if kind == "constant":
            return np.full_like(ts, float(self.preset["value"]))
        if kind == "table":
            knots = np.asarray(self.preset["times"], dtype=float)
            vals = np.asarray(self.preset["values"], dtype=float)
            return np.interp(ts, knots, vals)
        raise InvalidProfile(f"unknown perturbation kind {kind!r}")

    def delay(self, t):
        return self.r0 + self.perturbation(t)

    def check(self) -> None:
        if not 0.0 <= self.delta1 < 1.0:
            raise InvalidProfile(
                f"derivative bound delta1 = {self.delta1} must lie in [0, 1)")
        if self.delta < 0:
            raise InvalidProfile("perturbation bound delta must be nonnegative")
        if self.preset is None:
            return
        kind = self.preset.get("kind")
        if kind == "sinusoid":
            a = abs(float(self.preset["amplitude"]))
            w = abs(float(self.preset["frequency"]))
            if a > self.delta + 1e-12:
                raise InvalidProfile(f"sinusoid amplitude {a} exceeds bound {self.delta}")
            if a * w > self.delta1 + 1e-12:
                raise InvalidProfile(
                    f"sinusoid slope bound |a w| = {a * w} exceeds delta1 = {self.delta1}")
        elif kind == "constant":
            if abs(float(self.preset["value"])) > self.delta + 1e-12:
                raise InvalidProfile("constant perturbation exceeds its bound")
        elif kind == "table":
            knots = np.asarray(self.preset["times"], dtype=float)
            vals = np.asarray(self.preset["values"], dtype=float)
            if np.any(np.abs(vals) > self.delta + 1e-12):
                raise InvalidProfile("table perturbation exceeds its bound")
            slopes = np.diff(vals) / np.diff(knots)
            if np.any(np.abs(slopes) > self.delta1 + 1e-12):
                raise InvalidProfile("table perturbation slope exceeds delta1")


def profile_from_entry(entry: dict) -> VaryingDelayProfile:
    prof = VaryingDelayProfile(r0=entry["r0"], delta=entry["delta"],
                               delta1=entry["delta1"],
                               preset=entry.get("perturbation"))
    prof.check()
    return prof


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution together with its prologue and jump set."""

    h: float
    times: np.ndarray
    states: np.ndarray
    prologue_times: np.ndarray
    prologue_states: np.ndarray
    discontinuities: np.ndarray
    window: float
    system: DelaySystem = field(repr=False)
    phi: InitialFunction = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


class _History:
    """Past-value lookups over a partially filled grid."""

    def __init__(self, h, X, phi, jumps):
        self.h = h
        self.X = X
        self.phi = phi
        self.jumps = np.asarray([d for d in jumps if d > LATTICE_DEDUPE])

    def many(self, taus: np.ndarray) -> np.ndarray:
        h, X = self.h, self.X
        out = np.empty((taus.size, X.shape[1]))
        neg = taus < -LATTICE_DEDUPE
        if np.any(neg):
            out[neg] = self.phi(taus[neg])
        pos = ~neg
        if not np.any(pos):
            return out
        u = np.maximum(taus[pos], 0.0) / h
        near = np.rint(u)
        snap = np.abs(u - near) <= _SNAP
        rest = ~snap
        idx_out = np.flatnonzero(pos)
        if np.any(snap):
            out[idx_out[snap]] = X[near[snap].astype(int)]
        if np.any(rest):
            j = np.floor(u[rest]).astype(int)
            lam = u[rest] - j
            vals = (1.0 - lam)[:, None] * X[j] + lam[:, None] * X[j + 1]
            if self.jumps.size:
                lo = np.searchsorted(self.jumps, j * h, side="right")
                has = (lo < self.jumps.size)
                has[has] &= self.jumps[lo[has]] < (j[has] + 1) * h - _SNAP * h
                for m in np.flatnonzero(has):
                    tau = u[rest][m] * h
                    cell = self.jumps[(self.jumps > j[m] * h) &
                                      (self.jumps < (j[m] + 1) * h - _SNAP * h)]
                    d = cell[np.argmin(np.abs(cell - tau))]
                    vals[m] = X[j[m] + 1] if tau >= d else X[j[m]]
            out[idx_out[rest]] = vals
        return out

    def one(self, tau: float, side: int = 1) -> np.ndarray:
        """Value at tau; side=-1 asks for the left limit at a jump."""
        if tau < -LATTICE_DEDUPE or (side < 0 and abs(tau) <= LATTICE_DEDUPE):
            return self.phi(min(tau, 0.0))
        u = max(tau, 0.0) / self.h
        near = int(round(u))
        if abs(u - near) <= _SNAP:
            if side < 0 and self._is_jump(near * self.h) and near >= 2:
                return 2.0 * self.X[near - 1] - self.X[near - 2]
            return self.X[near]
        return self.many(np.asarray([tau]))[0]

    def _is_jump(self, t: float) -> bool:
        if not self.jumps.size:
            return abs(t) <= LATTICE_DEDUPE
        i = np.searchsorted(self.jumps, t - _SNAP * self.h)
        return (i < self.jumps.size and
                abs(self.jumps[i] - t) <= _SNAP * self.h) or abs(t) <= LATTICE_DEDUPE


def _grid(T: float, h: float):
    M = int(math.ceil(T / h - 1e-9))
    return np.arange(M + 1) * h, M


def _prologue(phi, h, extent):
    K = int(math.ceil(extent / h - 1e-9))
    pt = -np.arange(K, 0, -1) * h
    return pt, phi(pt)


def simulate(system: DelaySystem, phi: InitialFunction, T: float | None = None,
             h: float | None = None) -> Trajectory:
    """Solve on [0, T] with step h (defaults: 10 r_N and min(r_1/200, 1e-2)).

    Requires h <= r_1 / 10.  The returned trajectory carries the prologue
    (phi sampled on the negative grid) and the discontinuity set on [0, T].
    """
    if T is None:
        T = default_horizon(system)
    if h is None:
        h = default_step(system)
    if phi.n != system.n:
        raise DimensionMismatch(f"initial data has {phi.n} components, system has {system.n}")
    if h <= 0:
        raise OutOfRange(f"step must be positive, got {h}")
    if h > system.delays[0] / 10 + 1e-15:
        raise StepTooLarge(f"step {h} exceeds r_1 / 10 = {system.delays[0] / 10}")
    times, M = _grid(T, h)
    jumps = discontinuity_times(system.delays, float(times[-1]))
    X = np.empty((M + 1, system.n))
    hist = _History(h, X, phi, jumps)
    B = int(math.floor(system.delays[0] / h + 1e-9))
    ATs = [A.T.copy() for A in system.matrices]
    s = 0
    while s <= M:
        b = min(B, M + 1 - s)
        tb = times[s:s + b]
        xb = np.zeros((b, system.n))
        for A_T, r in zip(ATs, system.delays):
            xb += hist.many(tb - r) @ A_T
        X[s:s + b] = xb
        s += b
    pt, pv = _prologue(phi, h, system.delays[-1])
    return Trajectory(h=h, times=times, states=X, prologue_times=pt,
                      prologue_states=pv, discontinuities=jumps,
                      window=system.delays[-1], system=system, phi=phi)


#: Jump branches whose inherited magnitude bound falls below this are
#: dropped; they sit far beneath linear-interpolation error.
JUMP_SCALE_FLOOR = 1e-8


def _varying_jumps(profiles, T: float, matrices=None,
                   cap: int = LATTICE_CAP) -> np.ndarray:
    """Jump times for time-varying delays.

    A jump at d propagates to each root of t - r_k(t) = d; the root is
    unique (and above d) because delta1 < 1 makes t - r_k(t) strictly
    increasing.  Whole generations are solved at once by vectorized
    bisection; g(d) = -r_k(d) < 0 and g(d + r0 + delta + eps) > 0 always
    bracket the root.

    Unlike the fixed-delay case, child times are path dependent, so the
    tree does not collapse onto integer combinations and its breadth can
    grow geometrically.  When ``matrices`` is given, each node carries
    the product of induced norms along its generating path (an upper
    bound on the jump magnitude it can deliver) and branches below
    :data:`JUMP_SCALE_FLOOR` are pruned.
    """
    gains = None
    if matrices is not None:
        gains = [float(np.linalg.norm(np.asarray(A, dtype=float), 2))
                 for A in matrices]
    seen = np.array([0.0])
    frontier = np.array([0.0])
    scales = np.array([1.0])
    while frontier.size:
        children = []
        child_scales = []
        for j, prof in enumerate(profiles):
            lo = frontier.copy()
            hi = frontier + (prof.r0 + prof.delta + 1e-9)
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                below = (mid - prof.delay(mid)) < frontier
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
            children.append(0.5 * (lo + hi))
            child_scales.append(scales * (gains[j] if gains is not None else 1.0))
        cand = np.concatenate(children)
        cscale = np.concatenate(child_scales)
        inside = cand <= T + LATTICE_DEDUPE
        if gains is not None:
            inside &= cscale >= JUMP_SCALE_FLOOR
        cand, cscale = cand[inside], cscale[inside]
        if cand.size:
            order = np.argsort(cand)
            cand, cscale = cand[order], cscale[order]
            starts = np.flatnonzero(
                np.concatenate(([True], np.diff(cand) > LATTICE_DEDUPE)))
            cscale = np.maximum.reduceat(cscale, starts)
            cand = cand[starts]
            idx = np.searchsorted(seen, cand)
            dup = np.zeros(cand.size, dtype=bool)
            prev = idx > 0
            dup[prev] = cand[prev] - seen[idx[prev] - 1] <= LATTICE_DEDUPE
            nxt = idx < seen.size
            dup[nxt] |= seen[idx[nxt]] - cand[nxt] <= LATTICE_DEDUPE
            cand, cscale = cand[~dup], cscale[~dup]
        if cand.size == 0:
            break
        seen = np.sort(np.concatenate([seen, cand]))
        if seen.size > cap:
            raise LatticeExplosion(f"more than {cap} discontinuities in [0, {T}]")
        frontier, scales = cand, cscale
    return seen


def simulate_varying(system: DelaySystem, profiles, phi: InitialFunction,
                     T: float | None = None, h: float | None = None) -> Trajectory:
    """Solve x(t) = sum_k A_k x(t - r_k(t)) with r_k(t) = r0_k + delta_rk(t).

    Profiles must keep every delay positive on the grid
    (:class:`CausalityViolation` otherwise) and within their declared
    bounds (:class:`InvalidProfile`).  Jumps are located by root-finding
    the lattice recursion t - r_k(t) = previous jump.
    """
    profiles = list(profiles)
    if len(profiles) != system.N:
        raise DimensionMismatch(f"need {system.N} delay profiles, got {len(profiles)}")
    for prof in profiles:
        prof.check()
    if T is None:
        T = DEFAULT_HORIZON_FACTOR * max(p.r0 + p.delta for p in profiles)
    if phi.n != system.n:
        raise DimensionMismatch(f"initial data has {phi.n} components, system has {system.n}")
    if h is not None and h <= 0:
        raise OutOfRange(f"step must be positive, got {h}")
    probe_h = h if h is not None else min(p.r0 for p in profiles) / DEFAULT_STEP_DIVISOR
    times, M = _grid(T, probe_h)
    R = np.stack([p.delay(times) for p in profiles], axis=1)
    if np.any(R <= 0):
        k = int(np.argwhere(R <= 0)[0][1])
        raise CausalityViolation(f"delay r_{k + 1}(t) reaches zero on the horizon")
    for k, prof in enumerate(profiles):
        if np.any(np.abs(R[:, k] - prof.r0) > prof.delta + 1e-9 * max(1.0, prof.delta)):
            raise InvalidProfile(f"perturbation of delay {k + 1} leaves its bound")
    r_min = float(R.min())
    if h is None:
        h = min(r_min / DEFAULT_STEP_DIVISOR, DEFAULT_STEP_CAP)
        times, M = _grid(T, h)
        R = np.stack([p.delay(times) for p in profiles], axis=1)
    r1_nominal = min(p.r0 for p in profiles)
    if h > r1_nominal / 10 + 1e-15:
        raise StepTooLarge(f"step {h} exceeds r_1 / 10 = {r1_nominal / 10}")
    if r_min <= h:
        raise StepTooLarge(
            f"smallest delay on the horizon ({r_min}) does not exceed the step {h}")
    extent = float(np.max(R - times[:, None]))  # deepest lookback needed
    extent = max(extent, max(p.r0 + p.delta for p in profiles))
    if phi.kind == "sampled-table" and phi.domain_start > -extent + 1e-9:
        raise ValidationError(
            f"initial table covers [{phi.domain_start}, 0[ but lookups reach -{extent}")
    jumps = _varying_jumps(profiles, float(times[-1]), system.matrices)
    X = np.empty((M + 1, system.n))
    hist = _History(h, X, phi, jumps)
    B = max(1, int(math.floor(r_min / h + 1e-9)))
    ATs = [A.T.copy() for A in system.matrices]
    s = 0
    while s <= M:
        b = min(B, M + 1 - s)
        xb = np.zeros((b, system.n))
        for k, A_T in enumerate(ATs):
            xb += hist.many(times[s:s + b] - R[s:s + b, k]) @ A_T
        X[s:s + b] = xb
        s += b
    pt, pv = _prologue(phi, h, extent)
    return Trajectory(h=h, times=times, states=X, prologue_times=pt,
                      prologue_states=pv, discontinuities=jumps,
                      window=system.delays[-1], system=system, phi=phi)


# ---------------------------------------------------------------------------
# windowed L2 norm
# ---------------------------------------------------------------------------

def _segment_table(traj: Trajectory):
    """Breakpoints and cumulative integral of ||x||^2 over the timeline.

    Jump-containing cells are split so the trapezoid rule never averages
    across a discontinuity; each breakpoint carries separate left and
    right squared-norm values.
    """
    cached = traj._cache.get("l2")
    if cached is not None:
        return cached
    h = traj.h
    D = traj.discontinuities
    u = D / h
    ongrid_idx = np.rint(u[np.abs(u - np.rint(u)) <= _SNAP]).astype(int)
    ongrid_idx = ongrid_idx[(ongrid_idx >= 0) & (ongrid_idx < traj.times.size)]
    offgrid = D[np.abs(u - np.rint(u)) > _SNAP]
    offgrid = offgrid[(offgrid > 0) & (offgrid < traj.times[-1] - _SNAP * h)]

    p2 = np.einsum("ij,ij->i", traj.prologue_states, traj.prologue_states)
    g_r = np.einsum("ij,ij->i", traj.states, traj.states)
    g_l = g_r.copy()
    for i in ongrid_idx:
        if i == 0:
            v = traj.phi(0.0)
        elif i >= 2:
            v = 2.0 * traj.states[i - 1] - traj.states[i - 2]
        else:
            v = traj.states[i - 1]
        g_l[i] = float(v @ v)
    j = np.floor(offgrid / h).astype(int)
    o_r = np.einsum("ij,ij->i", traj.states[j + 1], traj.states[j + 1])
    o_l = np.einsum("ij,ij->i", traj.states[j], traj.states[j])

    knots = np.concatenate([traj.prologue_times, traj.times, offgrid])
    r2 = np.concatenate([p2, g_r, o_r])
    l2 = np.concatenate([p2, g_l, o_l])
    order = np.argsort(knots, kind="stable")
    knots, r2, l2 = knots[order], r2[order], l2[order]
    seg = 0.5 * np.diff(knots) * (r2[:-1] + l2[1:])
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    table = (knots, cum, r2)
    traj._cache["l2"] = table
    return table


def _cum_at(traj: Trajectory, table, x: float) -> float:
    """Integral of ||x||^2 from the first breakpoint up to x.

    At a discontinuity the cumulative value ends with the left limit, so
    differencing two calls gives the right one-sided convention at both
    window endpoints.
    """
    knots, cum, r2 = table
    i = int(np.searchsorted(knots, x + 1e-12, side="right")) - 1
    i = min(max(i, 0), knots.size - 1)
    if abs(x - knots[i]) <= 1e-12 or i == knots.size - 1:
        return float(cum[i])
    hist = _History(traj.h, traj.states, traj.phi, traj.discontinuities)
    v = hist.one(x)  # strict interior of a segment: continuity point
    return float(cum[i] + 0.5 * (x - knots[i]) * (r2[i] + float(v @ v)))


def l2_window_norm(traj: Trajectory, t: float) -> float:
    """sqrt of the integral of ||x||^2 over [t - window, t].

    The window is the largest system delay.  Quadrature is trapezoidal on
    the sample grid, split at recorded discontinuities.
    """
    if t < -1e-12 or t > traj.horizon + 1e-12:
        raise OutOfRange(f"t = {t} outside [0, {traj.horizon}]")
    table = _segment_table(traj)
    a, b = t - traj.window, t
    if a < table[0][0] - 1e-9:
        raise OutOfRange(f"window [{a}, {b}] starts before the stored prologue")
    total = _cum_at(traj, table, b) - _cum_at(traj, table, a)
    return math.sqrt(max(total, 0.0))


# ---------------------------------------------------------------------------
# decay fitting
# ---------------------------------------------------------------------------

def fit_decay(traj: Trajectory, t_start: float = 0.0):
    """Least-squares decay fit of log ||x(t)|| over [t_start, T].

    Fits the local maxima of the norm (the oscillation envelope); monotone
    signals with fewer than three maxima fall back to fitting every sample.
    Returns ``(rate, amplitude)`` with the envelope amplitude * exp(-rate t).
    """
    sel = traj.times >= t_start - 1e-12
    ts = traj.times[sel]
    ns = traj.norms()[sel]
    keep = ns > 1e-300
    ts, ns = ts[keep], ns[keep]
    if ts.size < 3:
        raise DegenerateFit("fewer than three usable samples past t_start")
    interior = np.flatnonzero(
        (ns[1:-1] >= ns[:-2]) & (ns[1:-1] >= ns[2:]) &
        ((ns[1:-1] > ns[:-2]) | (ns[1:-1] > ns[2:]))) + 1
    if interior.size >= 3:
        tf, nf = ts[interior], ns[interior]
    else:
        tf, nf = ts, ns
    slope, intercept = np.polyfit(tf, np.log(nf), 1)
    return float(-slope), float(math.exp(intercept))


# ---------------------------------------------------------------------------
# delimited output
# ---------------------------------------------------------------------------

def write_trajectory_csv(traj: Trajectory, path: str) -> None:
    """CSV with header t,x1,...,xn; prologue rows carry negative t."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(f"x{i + 1}" for i in range(traj.n)) + "\n")
        for block_t, block_x in ((traj.prologue_times, traj.prologue_states),
                                 (traj.times, traj.states)):
            for t, row in zip(block_t, block_x):
                fh.write(format(t, ".17g") + "," +
                         ",".join(format(v, ".17g") for v in row) + "\n")


def write_discontinuities_csv(traj: Trajectory, path: str) -> None:
    """Sidecar CSV with header k,t_k listing the recorded jump times."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("k,t_k\n")
        for k, t in enumerate(traj.discontinuities):
            fh.write(f"{k}," + format(t, ".17g") + "\n")
