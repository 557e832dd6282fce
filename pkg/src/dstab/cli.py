"""Command-line front end.

Subcommands map one-to-one onto the analysis modules: `simulate`,
`spectral`, `certify`, `verify`, `robust`, `varying` and `reproduce`.
Structured results are JSON on stdout (or a file), trajectories are
CSV, and runs that write delimited output also render a figure next to
it unless asked not to.  Diagnostics go to stderr.

Exit codes: 0 analysis completed (even when the verdict is negative),
1 usage error, 2 numeric failure, 3 certificate search failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import cases as cases_mod
from . import robust as robust_mod
from . import simulator
from . import spectral as spectral_mod
from . import timevarying
from .errors import (
    DegenerateFit,
    DstabError,
    NumericError,
    ParseError,
    SearchFailure,
    UsageError,
)
from .lyapunov import certificate_from_dict, search_certificate, verify_certificate
from .report import Report, TOOL_NAME, VERSION, dumps, file_digest, write_text
from .systems import load_system

_ENV_SEED = "DSTAB_SEED"


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    raw = os.environ.get(_ENV_SEED)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{_ENV_SEED} must be an integer, got {raw!r}") from None


def _inputs(args, **flags) -> dict:
    d = {"system": args.system, "sha256": file_digest(args.system)}
    for key, val in flags.items():
        if val is not None:
            d[key] = val
    return d


def _require(extras, section: str, command: str):
    if extras[section] is None:
        raise UsageError(
            f"`{command}` needs a `{section}` section in the system file")
    return extras[section]


def _figure_path(out: str) -> str:
    return os.path.splitext(out)[0] + ".png"


def _load_certificate_file(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    return certificate_from_dict(raw)


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    system, extras = load_system(args.system)
    phi = _require(extras, "initial", "simulate")
    traj = simulator.simulate(system, phi, T=args.horizon, h=args.step)
    norms = traj.norms()
    try:
        rate, amplitude = simulator.fit_decay(traj)
        fit = {"rate": rate, "amplitude": amplitude}
    except DegenerateFit:
        fit = None
    if args.out:
        simulator.write_trajectory_csv(traj, args.out)
        if not args.no_figure:
            from . import plots
            plots.trajectory_figure(traj, _figure_path(args.out),
                                    title=os.path.basename(args.system))
    if args.discontinuities_out:
        simulator.write_discontinuities_csv(traj, args.discontinuities_out)
    rep = Report(
        command="simulate",
        inputs=_inputs(args, horizon=args.horizon, step=args.step),
        verdicts={
            "horizon": float(traj.horizon),
            "step": float(traj.h),
            "samples": int(traj.times.size),
            "discontinuities_within_horizon": int(traj.discontinuities.size),
            "sup_norm": float(np.max(norms)),
            "final_norm": float(norms[-1]),
            "decay_fit": fit,
        },
    )
    write_text(rep.render(), None)
    return 0


def cmd_spectral(args) -> int:
    system, _ = load_system(args.system)
    verdict = spectral_mod.torus_sup(system, resolution=args.grid,
                                     refine_iters=args.refine)
    verdicts = {"spectral": verdict.to_dict()}
    if system.n == 1:
        verdicts["coefficient_abs_sum"] = spectral_mod.scalar_sum_test(system)
    if system.N == 1:
        verdicts["fixed_delay_classification"] = \
            spectral_mod.classify_single_delay(system.matrices[0])
    rep = Report(command="spectral",
                 inputs=_inputs(args, grid=args.grid, refine=args.refine),
                 verdicts=verdicts)
    write_text(rep.render(), args.out)
    if args.out and not args.no_figure:
        from . import plots
        plots.spectral_figure(system, verdict, _figure_path(args.out))
    return 0


def cmd_certify(args) -> int:
    system, _ = load_system(args.system)
    seed = _resolve_seed(args.seed)
    cert = search_certificate(system, psd_margin=args.psd_margin, seed=seed)
    if args.out_cert:
        write_text(dumps(cert.to_dict()), args.out_cert)
    rep = Report(command="certify",
                 inputs=_inputs(args, psd_margin=args.psd_margin),
                 verdicts={"certificate": cert.to_dict()},
                 seed=seed)
    write_text(rep.render(), None)
    return 0


def cmd_verify(args) -> int:
    system, _ = load_system(args.system)
    supplied = _load_certificate_file(args.cert)
    cert = verify_certificate(system, supplied.P_list, supplied.mu)
    rep = Report(command="verify",
                 inputs=_inputs(args, cert=args.cert),
                 verdicts={"certificate": cert.to_dict()})
    write_text(rep.render(), None)
    return 0


def cmd_robust(args) -> int:
    system, extras = load_system(args.system)
    deltas = _require(extras, "uncertainty", "robust")["deltas"]
    seed = _resolve_seed(args.seed)
    if args.cert:
        supplied = _load_certificate_file(args.cert)
        P_list = supplied.P_list
        mu = args.mu if args.mu is not None else supplied.mu
    elif args.mu is not None:
        P_list = robust_mod.nominal_certificate(system, args.mu, seed=seed).P_list
        mu = args.mu
    else:
        found = search_certificate(system, seed=seed)
        P_list, mu = found.P_list, found.mu
    if system.N == 1:
        verdict = robust_mod.verify_robust_single(
            system.matrices[0], system.delays[0], deltas[0], P_list[0], mu)
    else:
        verdict = robust_mod.verify_robust_multi(
            system, robust_mod.PerturbationBudget(tuple(deltas)), P_list, mu)
    verdicts = {
        "mu": mu,
        "deltas": list(deltas),
        "robust": {
            "passed": verdict.passed,
            "margin": verdict.margin,
            "tol": verdict.tol,
            "amplitude": verdict.amplitude,
        },
    }
    if args.max_delta:
        scale = robust_mod.max_delta(system, mu, deltas, P_list=P_list,
                                     seed=seed, research_p=args.research_p)
        verdicts["max_delta"] = {
            "scale": scale,
            "deltas": [scale * d for d in deltas],
            "capped": scale >= robust_mod.DELTA_CAP,
        }
    rep = Report(command="robust", inputs=_inputs(args, cert=args.cert, mu=args.mu),
                 verdicts=verdicts, seed=seed)
    write_text(rep.render(), None)
    return 0


def cmd_varying(args) -> int:
    system, extras = load_system(args.system)
    entries = _require(extras, "varying", "varying")
    if args.cert:
        supplied = _load_certificate_file(args.cert)
        P_list, mu = supplied.P_list, supplied.mu
    else:
        P_list, mu = None, None
    if system.N == 1:
        e = entries[0]
        vc = timevarying.varying_single(
            system.matrices[0], e["r0"], e["delta"], e["delta1"],
            P=None if P_list is None else P_list[0], mu=mu)
    else:
        vc = timevarying.varying_multi(
            system, [e["delta"] for e in entries],
            [e["delta1"] for e in entries], P_list=P_list, mu=mu)
    verdicts = {"varying": vc.to_dict()}
    phi = extras["initial"]
    if phi is not None:
        profiles = [simulator.profile_from_entry(e) for e in entries]
        traj = simulator.simulate_varying(system, profiles, phi,
                                          T=args.horizon, h=args.step)
        phi_sup = phi.sup_norm()
        if system.N == 1:
            ts, values = traj.times, traj.norms()
        else:
            ts = np.linspace(0.0, traj.horizon, 41)
            values = np.array([simulator.l2_window_norm(traj, float(t))
                               for t in ts])
        bound = vc.alpha * phi_sup * np.exp(-vc.gamma * ts)
        excess = float(np.max(values - bound))
        verdicts["envelope"] = {
            "norm": "euclidean" if system.N == 1 else "l2-window",
            "amplitude": vc.alpha * phi_sup,
            "rate": vc.gamma,
            "max_excess": excess,
            "holds": excess <= cases_mod.ENVELOPE_SLACK,
        }
        if args.out:
            simulator.write_trajectory_csv(traj, args.out)
            if not args.no_figure:
                from . import plots
                envelope = None
                if system.N == 1:
                    envelope = (vc.alpha * phi_sup, vc.gamma, "certified envelope")
                plots.trajectory_figure(traj, _figure_path(args.out),
                                        envelope=envelope,
                                        title=os.path.basename(args.system))
    rep = Report(command="varying", inputs=_inputs(args, cert=args.cert),
                 verdicts=verdicts)
    write_text(rep.render(), None)
    return 0


def cmd_reproduce(args) -> int:
    results = ([cases_mod.run_case(args.case)] if args.case
               else cases_mod.run_all())
    lines = []
    header = f"{'case':<30} {'check':<44} {'status':<6} observed"
    lines.append(header)
    lines.append("-" * len(header))
    failures = 0
    checks = 0
    for res in results:
        for c in res.checks:
            checks += 1
            failures += 0 if c.passed else 1
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"{res.name:<30} {c.label:<44} {status:<6} {c.observed}")
    lines.append("-" * len(header))
    lines.append(f"{len(results)} cases, {checks} checks, {failures} failed")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        rep = Report(command="reproduce", inputs={},
                     verdicts={"cases": [r.to_dict() for r in results]})
        write_text(rep.render(), args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="stability certification for linear continuous-time "
                    "difference equations with delays")
    p.add_argument("--version", action="version",
                   version=f"{TOOL_NAME} {VERSION}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    sim = sub.add_parser("simulate", help="integrate and write the trajectory")
    sim.add_argument("--system", required=True, help="system JSON file")
    sim.add_argument("--horizon", type=float, default=None)
    sim.add_argument("--step", type=float, default=None)
    sim.add_argument("--out", default=None, help="trajectory CSV path")
    sim.add_argument("--discontinuities-out", default=None,
                     help="jump-time CSV path")
    sim.add_argument("--no-figure", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    spect = sub.add_parser("spectral", help="delay-independent torus test")
    spect.add_argument("--system", required=True)
    spect.add_argument("--grid", type=int, default=spectral_mod.DEFAULT_RESOLUTION)
    spect.add_argument("--refine", type=int,
                      default=spectral_mod.DEFAULT_REFINE_ITERS)
    spect.add_argument("--out", default=None, help="report JSON path")
    spect.add_argument("--no-figure", action="store_true")
    spect.set_defaults(func=cmd_spectral)

    cert = sub.add_parser("certify", help="search a decay-rate certificate")
    cert.add_argument("--system", required=True)
    cert.add_argument("--seed", type=int, default=None,
                      help=f"search seed (default ${_ENV_SEED} or 0)")
    cert.add_argument("--psd-margin", type=float, default=1e-6)
    cert.add_argument("--out-cert", default=None, help="certificate JSON path")
    cert.set_defaults(func=cmd_certify)

    ver = sub.add_parser("verify", help="re-check a stored certificate")
    ver.add_argument("--system", required=True)
    ver.add_argument("--cert", required=True, help="certificate JSON path")
    ver.set_defaults(func=cmd_verify)

    rob = sub.add_parser("robust", help="certify a perturbation budget")
    rob.add_argument("--system", required=True)
    rob.add_argument("--cert", default=None, help="certificate JSON path")
    rob.add_argument("--mu", type=float, default=None,
                     help="decay rate to certify at")
    rob.add_argument("--max-delta", action="store_true",
                     help="bisect the largest certified budget scale")
    rob.add_argument("--research-p", action="store_true",
                     help="re-derive P at each budget probe")
    rob.add_argument("--seed", type=int, default=None)
    rob.set_defaults(func=cmd_robust)

    var = sub.add_parser("varying", help="degraded rate under swaying delays")
    var.add_argument("--system", required=True)
    var.add_argument("--cert", default=None, help="nominal certificate JSON")
    var.add_argument("--horizon", type=float, default=None)
    var.add_argument("--step", type=float, default=None)
    var.add_argument("--out", default=None, help="trajectory CSV path")
    var.add_argument("--no-figure", action="store_true")
    var.set_defaults(func=cmd_varying)

    rep = sub.add_parser("reproduce", help="run the built-in worked cases")
    rep.add_argument("--case", choices=cases_mod.case_names(), default=None)
    rep.add_argument("--out", default=None, help="results JSON path")
    rep.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; the contract wants 1
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except SearchFailure as exc:
        print(f"search failure: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(f"diagnostics: {exc.diagnostics}", file=sys.stderr)
        return 3
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except DstabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
