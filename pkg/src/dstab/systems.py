"""System descriptions for x(t) = sum_k A_k x(t - r_k).

A :class:`DelaySystem` bundles the coefficient matrices with strictly
increasing positive delays.  Initial data on [-r_N, 0[ is described by
:class:`InitialFunction` presets whose sup-norm is computed analytically
where the preset allows it.  Commensurate delay sets can be reduced to a
common base and lifted to an equivalent single-delay system on a larger
state (block companion form).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptySystem,
    NonIncreasingDelays,
    NonPositiveDelay,
    NotCommensurate,
    ParseError,
    ValidationError,
)

#: Continued-fraction expansions stop once a denominator would exceed this.
#: Delay ratios needing larger denominators are treated as incommensurate;
#: such multipliers carry no physical meaning for user-entered constants.
CF_DENOMINATOR_CAP = 10 ** 6

#: Default commensurability tolerance is this factor times r_N.
COMMENSURABILITY_RTOL = 1e-9

_INITIAL_KINDS = ("constant-vector", "sinusoid-combination", "polynomial", "sampled-table")


@dataclass(frozen=True)
class DelaySystem:
    """Linear difference system with N delayed terms on an n-dimensional state."""

    matrices: tuple
    delays: tuple

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def N(self) -> int:
        return len(self.matrices)

    def to_dict(self) -> dict:
        """Serializable form: row-major matrix entries, plain floats."""
        return {
            "n": self.n,
            "delays": [float(r) for r in self.delays],
            "matrices": [[float(v) for v in A.ravel()] for A in self.matrices],
        }


@dataclass(frozen=True)
class CommensurabilityResult:
    commensurate: bool
    base: float | None = None
    multipliers: tuple | None = None


def _freeze(A: np.ndarray) -> np.ndarray:
    A = np.array(A, dtype=float)
    A.flags.writeable = False
    return A


def validate(raw: dict) -> DelaySystem:
    """Build a :class:`DelaySystem` from a plain dict, checking the contract.

    Parameters
    ----------
    raw : dict
        Keys ``n``, ``delays`` and ``matrices`` (a list of row-major n*n
        float lists, one per delay).  Extra keys are rejected by
        :func:`load_system`; this function ignores anything else.

    Raises
    ------
    EmptySystem, NonPositiveDelay, NonIncreasingDelays, DimensionMismatch
    """
    try:
        n = int(raw["n"])
        delays = [float(r) for r in raw["delays"]]
        mats = raw["matrices"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"system description missing or malformed: {exc}") from exc
    if n < 1:
        raise DimensionMismatch(f"state dimension must be >= 1, got {n}")
    if len(delays) == 0:
        raise EmptySystem("at least one delay term is required")
    if len(mats) != len(delays):
        raise DimensionMismatch(
            f"{len(delays)} delays but {len(mats)} matrices")
    for k, r in enumerate(delays):
        if not (r > 0.0) or not math.isfinite(r):
            raise NonPositiveDelay(f"delay r_{k + 1} = {r} must be positive and finite")
    for k in range(1, len(delays)):
        if not delays[k] > delays[k - 1]:
            raise NonIncreasingDelays(
                f"delays must be strictly increasing, got r_{k} = {delays[k - 1]} "
                f"followed by r_{k + 1} = {delays[k]}")
    matrices = []
    for k, flat in enumerate(mats):
        arr = np.asarray(flat, dtype=float)
        if arr.shape != (n * n,):
            raise DimensionMismatch(
                f"matrix {k + 1} must be a row-major list of {n * n} floats, "
                f"got shape {arr.shape}")
        matrices.append(_freeze(arr.reshape(n, n)))
    return DelaySystem(matrices=tuple(matrices), delays=tuple(delays))


def _rational_from_ratio(x: float, frac_tol: float):
    """Recognize x as an exactly-terminating continued fraction p/q.

    Returns (p, q) when the expansion's fractional remainder drops below
    ``frac_tol`` before the denominator passes :data:`CF_DENOMINATOR_CAP`,
    else None.  Irrational ratios never terminate (their remainders stay
    order-one), so they fall off the denominator cap.
    """
    p_prev, q_prev = 1, 0
    p_cur, q_cur = int(math.floor(x)), 1
    frac = x - math.floor(x)
    if frac <= frac_tol:
        return p_cur, q_cur
    for _ in range(64):
        x = 1.0 / frac
        a = int(math.floor(x))
        p_cur, p_prev = a * p_cur + p_prev, p_cur
        q_cur, q_prev = a * q_cur + q_prev, q_cur
        if q_cur > CF_DENOMINATOR_CAP:
            return None
        frac = x - a
        # accepting here treats the tail as zero; the induced ratio error is
        # at most frac / q_cur**2, well under frac_tol
        if frac <= frac_tol:
            return p_cur, q_cur
    return None


def commensurability(system: DelaySystem, tol: float | None = None) -> CommensurabilityResult:
    """Decide whether all delays are integer multiples of a common base.

    The ratio r_k / r_1 is expanded as a continued fraction; the expansion
    must terminate (remainder at the noise floor set by ``tol``) within
    denominator :data:`CF_DENOMINATOR_CAP`.  The base is the largest value
    of which every delay is an integer multiple, i.e. multipliers are
    coprime.  The returned multipliers satisfy |r_k - m_k * base| <= tol * r_N.

    Parameters
    ----------
    system : DelaySystem
    tol : float, optional
        Relative tolerance; defaults to 1e-9 (scaled internally by r_N).
    """
    if tol is None:
        tol = COMMENSURABILITY_RTOL
    delays = system.delays
    r1, rN = delays[0], delays[-1]
    abs_tol = tol * rN
    rationals = []
    for r in delays:
        got = _rational_from_ratio(r / r1, frac_tol=abs_tol / r1)
        if got is None:
            return CommensurabilityResult(commensurate=False)
        rationals.append(Fraction(*got))
    lcm_q = 1
    for f in rationals:
        lcm_q = lcm_q * f.denominator // math.gcd(lcm_q, f.denominator)
        if lcm_q > CF_DENOMINATOR_CAP:
            return CommensurabilityResult(commensurate=False)
    mult = [int(f.numerator * (lcm_q // f.denominator)) for f in rationals]
    g = 0
    for m in mult:
        g = math.gcd(g, m)
    mult = [m // g for m in mult]
    base = r1 * g / lcm_q
    for r, m in zip(delays, mult):
        if abs(r - m * base) > abs_tol:
            return CommensurabilityResult(commensurate=False)
    return CommensurabilityResult(commensurate=True, base=base, multipliers=tuple(mult))


def lift_commensurate(system: DelaySystem, comm: CommensurabilityResult) -> DelaySystem:
    """Block-companion lifting of a commensurate system to a single delay.

    With r_k = m_k * base and M = m_N, the stacked state
    X(t) = [x(t); x(t - base); ...; x(t - (M-1) base)] satisfies
    X(t) = Ahat X(t - base) where Ahat carries A_k in block column m_k of the
    first block row and identities on the block sub-diagonal.
    """
    if not comm.commensurate:
        raise NotCommensurate("cannot lift: delays share no common base")
    n, M = system.n, comm.multipliers[-1]
    big = np.zeros((n * M, n * M))
    for A, m in zip(system.matrices, comm.multipliers):
        big[0:n, (m - 1) * n:m * n] = A
    for j in range(1, M):
        big[j * n:(j + 1) * n, (j - 1) * n:j * n] = np.eye(n)
    return DelaySystem(matrices=(_freeze(big),), delays=(comm.base,))


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InitialFunction:
    """Initial data phi on [-r_N, 0[.

    ``kind`` is one of ``constant-vector`` (a fixed vector),
    ``sinusoid-combination`` (a_i sin(w_i t + p_i) + b_i per component),
    ``polynomial`` (sum_j c_ij t^j per component) or ``sampled-table``
    (linear interpolation between knots, last segment extrapolated to the
    left limit at 0-).  Formula presets evaluate anywhere on t <= 0; tables
    are pinned to their knots.
    """

    kind: str
    domain_start: float
    params: dict = field(repr=False)

    @property
    def n(self) -> int:
        if self.kind == "constant-vector":
            return len(self.params["value"])
        if self.kind == "sinusoid-combination":
            return len(self.params["amplitude"])
        if self.kind == "polynomial":
            return len(self.params["coefficients"])
        return self.params["values"].shape[1]

    # -- constructors --------------------------------------------------

    @staticmethod
    def constant(value, domain_start: float) -> "InitialFunction":
        v = np.asarray(value, dtype=float).reshape(-1)
        return InitialFunction("constant-vector", float(domain_start), {"value": _freeze(v)})

    @staticmethod
    def sinusoid(amplitude, frequency, phase, offset, domain_start: float) -> "InitialFunction":
        a, w, p, b = (np.asarray(u, dtype=float).reshape(-1)
                      for u in (amplitude, frequency, phase, offset))
        if not (a.shape == w.shape == p.shape == b.shape):
            raise DimensionMismatch("sinusoid parameter lists must share one length")
        return InitialFunction("sinusoid-combination", float(domain_start),
                               {"amplitude": _freeze(a), "frequency": _freeze(w),
                                "phase": _freeze(p), "offset": _freeze(b)})

    @staticmethod
    def polynomial(coefficients, domain_start: float) -> "InitialFunction":
        rows = [np.asarray(c, dtype=float).reshape(-1) for c in coefficients]
        return InitialFunction("polynomial", float(domain_start),
                               {"coefficients": tuple(_freeze(r) for r in rows)})

    @staticmethod
    def table(times, values) -> "InitialFunction":
        t = np.asarray(times, dtype=float).reshape(-1)
        v = np.atleast_2d(np.asarray(values, dtype=float))
        if v.shape[0] != t.shape[0]:
            raise DimensionMismatch("table needs one value row per timestamp")
        if t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValidationError("table timestamps must be strictly increasing (>= 2 knots)")
        if t[-1] > 0.0:
            raise ValidationError("table timestamps must not extend past 0")
        return InitialFunction("sampled-table", float(t[0]),
                               {"times": _freeze(t), "values": _freeze(v)})

    # -- evaluation ----------------------------------------------------

    def __call__(self, t):
        """Evaluate at scalar or 1-d array t (t <= 0); returns (n,) or (m, n)."""
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        ts = np.atleast_1d(t_arr)
        k = self.kind
        if k == "constant-vector":
            out = np.tile(self.params["value"], (ts.size, 1))
        elif k == "sinusoid-combination":
            a, w = self.params["amplitude"], self.params["frequency"]
            p, b = self.params["phase"], self.params["offset"]
            out = a * np.sin(np.outer(ts, w) + p) + b
        elif k == "polynomial":
            cols = [np.polyval(c[::-1], ts) for c in self.params["coefficients"]]
            out = np.stack(cols, axis=1)
        else:
            knots, vals = self.params["times"], self.params["values"]
            out = np.empty((ts.size, vals.shape[1]))
            # clamp the interpolation cell so the last segment extends to 0-
            idx = np.clip(np.searchsorted(knots, ts, side="right") - 1, 0, knots.size - 2)
            t0, t1 = knots[idx], knots[idx + 1]
            lam = (ts - t0) / (t1 - t0)
            out = vals[idx] + lam[:, None] * (vals[idx + 1] - vals[idx])
        return out[0] if scalar else out

    # -- sup norm --------------------------------------------------------

    def _critical_times(self):
        lo, hi = self.domain_start, 0.0
        cand = [lo, hi]
        if self.kind == "sinusoid-combination":
            a, w, p = (self.params[u] for u in ("amplitude", "frequency", "phase"))
            for ai, wi, pi in zip(a, w, p):
                if ai == 0.0 or wi == 0.0:
                    continue
                # component extrema at w t + p = pi/2 + j pi
                j_lo = math.floor((wi * lo + pi - math.pi / 2) / math.pi)
                j_hi = math.ceil((wi * hi + pi - math.pi / 2) / math.pi)
                for j in range(j_lo, j_hi + 1):
                    t = (math.pi / 2 + j * math.pi - pi) / wi
                    if lo <= t <= hi:
                        cand.append(t)
        elif self.kind == "polynomial":
            for c in self.params["coefficients"]:
                if c.size >= 3:
                    dcoef = (c[1:] * np.arange(1, c.size))[::-1]
                    for root in np.roots(dcoef):
                        if abs(root.imag) < 1e-12 and lo <= root.real <= hi:
                            cand.append(float(root.real))
        return cand

    def sup_norm(self) -> float:
        """max of ||phi(t)|| over the domain.

        Exact for constants and tables; for sinusoid and polynomial presets
        the maximum of the squared norm is located from per-component
        critical points plus a dense scan with local golden-section polish.
        """
        if self.kind == "constant-vector":
            return float(np.linalg.norm(self.params["value"]))
        if self.kind == "sampled-table":
            return float(np.max(np.linalg.norm(self.params["values"], axis=1)))
        lo, hi = self.domain_start, 0.0
        grid = np.linspace(lo, hi, 4097)
        vals = np.linalg.norm(self(grid), axis=1)
        best = float(np.max(vals))
        seeds = [float(grid[int(np.argmax(vals))])] + self._critical_times()
        gr = (math.sqrt(5.0) - 1.0) / 2.0
        h = (hi - lo) / 4096.0
        for s in seeds:
            a, b = max(lo, s - h), min(hi, s + h)
            f = lambda t: -float(np.linalg.norm(self(t)))
            c, d = b - gr * (b - a), a + gr * (b - a)
            fc, fd = f(c), f(d)
            for _ in range(60):
                if fc < fd:
                    b, d, fd = d, c, fc
                    c = b - gr * (b - a)
                    fc = f(c)
                else:
                    a, c, fc = c, d, fd
                    d = a + gr * (b - a)
                    fd = f(d)
            best = max(best, -min(fc, fd), float(np.linalg.norm(self(s))))
        return best


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

_TOP_LEVEL_FIELDS = {"n", "delays", "matrices", "initial", "uncertainty", "varying"}


def initial_from_dict(raw: dict, n: int, domain_start: float) -> InitialFunction:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ParseError("'initial' must be an object with a 'kind' field")
    kind = raw["kind"]
    if kind not in _INITIAL_KINDS:
        raise ParseError(f"unknown initial kind {kind!r}; expected one of {_INITIAL_KINDS}")
    try:
        if kind == "constant-vector":
            phi = InitialFunction.constant(raw["value"], domain_start)
        elif kind == "sinusoid-combination":
            phi = InitialFunction.sinusoid(raw["amplitude"], raw["frequency"],
                                           raw["phase"], raw["offset"], domain_start)
        elif kind == "polynomial":
            phi = InitialFunction.polynomial(raw["coefficients"], domain_start)
        else:
            phi = InitialFunction.table(raw["times"], raw["values"])
    except KeyError as exc:
        raise ParseError(f"initial kind {kind!r} is missing field {exc}") from exc
    if phi.n != n:
        raise DimensionMismatch(f"initial data has {phi.n} components, system has {n}")
    if kind == "sampled-table" and phi.params["times"][0] > domain_start + 1e-12:
        raise ValidationError(
            f"table starts at {phi.params['times'][0]}, must cover down to {domain_start}")
    return phi


def parse_system(raw: dict, where: str = "<memory>"):
    """Parse an already-decoded system document.

    Returns ``(system, extras)`` where ``extras`` holds the parsed optional
    sections: ``initial`` (an :class:`InitialFunction` or None),
    ``uncertainty`` (dict or None) and ``varying`` (list of dicts or None).
    Unknown top-level fields are rejected.
    """
    if not isinstance(raw, dict):
        raise ParseError(f"{where}: top level must be an object")
    unknown = set(raw) - _TOP_LEVEL_FIELDS
    if unknown:
        raise ParseError(f"{where}: unknown fields {sorted(unknown)}")
    system = validate(raw)
    extras = {"initial": None, "uncertainty": None, "varying": None}
    if "uncertainty" in raw:
        unc = raw["uncertainty"]
        if not isinstance(unc, dict) or set(unc) - {"deltas"}:
            raise ParseError("'uncertainty' must be an object with field 'deltas'")
        deltas = [float(d) for d in unc.get("deltas", [])]
        if len(deltas) != system.N:
            raise DimensionMismatch(
                f"uncertainty needs {system.N} deltas, got {len(deltas)}")
        if any(d < 0 for d in deltas):
            raise ValidationError("uncertainty deltas must be nonnegative")
        extras["uncertainty"] = {"deltas": deltas}
    if "varying" in raw:
        var = raw["varying"]
        if not isinstance(var, list) or len(var) != system.N:
            raise ParseError(f"'varying' must be a list of {system.N} objects")
        allowed = {"r0", "delta", "delta1", "perturbation"}
        parsed = []
        for k, item in enumerate(var):
            if not isinstance(item, dict) or set(item) - allowed:
                raise ParseError(f"varying[{k}]: fields must be within {sorted(allowed)}")
            try:
                entry = {"r0": float(item["r0"]),
                         "delta": float(item["delta"]),
                         "delta1": float(item["delta1"]),
                         "perturbation": item.get("perturbation")}
            except KeyError as exc:
                raise ParseError(f"varying[{k}] is missing field {exc}") from exc
            if abs(entry["r0"] - system.delays[k]) > 1e-12 * system.delays[-1]:
                raise ValidationError(
                    f"varying[{k}].r0 = {entry['r0']} disagrees with delay {system.delays[k]}")
            parsed.append(entry)
        extras["varying"] = parsed
    if "initial" in raw:
        # a varying section deepens the lookback past r_N
        lookback = system.delays[-1]
        if extras["varying"] is not None:
            lookback = max(e["r0"] + e["delta"] for e in extras["varying"])
        extras["initial"] = initial_from_dict(raw["initial"], system.n, -lookback)
    return system, extras


def load_system(path: str):
    """Read and parse a system JSON file (see :func:`parse_system`)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    return parse_system(raw, where=path)
