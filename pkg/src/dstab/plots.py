"""Figure rendering for CLI outputs.

Figures are written next to the delimited outputs so a run leaves a
self-contained record.  Rendering is headless (Agg) and deterministic;
nothing here is needed by the analysis code paths.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_JUMP_MARK_CAP = 60


def trajectory_figure(traj, path: str, envelope: tuple | None = None,
                      title: str | None = None) -> None:
    """Plot state components and the Euclidean norm of a Trajectory.

    ``envelope`` is an optional (amplitude, rate, label) triple drawn as
    amplitude * exp(-rate * t).  The first few inherited discontinuity
    times are marked; past the cap they only clutter.
    """
    t = traj.times
    X = traj.states
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    for j in range(X.shape[1]):
        ax.plot(t, X[:, j], lw=0.9, alpha=0.8, label=f"x{j + 1}(t)")
    if X.shape[1] > 1:
        ax.plot(t, np.linalg.norm(X, axis=1), lw=1.6, color="black", label="|x(t)|")
    jumps = [d for d in traj.discontinuities if 0.0 < d <= t[-1]]
    for d in jumps[:_JUMP_MARK_CAP]:
        ax.axvline(d, color="gray", lw=0.4, alpha=0.35)
    if envelope is not None:
        amp, rate, label = envelope
        ax.plot(t, amp * np.exp(-rate * t), "r--", lw=1.3, label=label)
        ax.plot(t, -amp * np.exp(-rate * t), "r--", lw=1.3)
    ax.set_xlabel("t")
    ax.set_ylabel("state")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def spectral_figure(system, verdict, path: str, samples: int = 720) -> None:
    """Plot a one-dimensional slice of the torus spectral radius.

    For a single delay the full circle rho(A e^{j theta}) is swept; with
    more delays the slice runs through the verdict's argmax angles along
    the last coordinate.  The unit level is marked since the test is
    sup < 1.
    """
    mats = [np.asarray(A, dtype=complex) for A in system.matrices]
    thetas = np.linspace(0.0, 2.0 * np.pi, samples)
    base = list(verdict.argmax_angles)
    rho = np.empty(samples)
    for i, th in enumerate(thetas):
        angles = base[:]
        angles[-1] = th
        S = sum(A * np.exp(1j * a) for A, a in zip(mats, angles))
        rho[i] = np.max(np.abs(np.linalg.eigvals(S)))
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(thetas, rho, lw=1.2)
    ax.axhline(1.0, color="red", lw=0.8, ls="--")
    ax.axhline(verdict.sup_estimate, color="green", lw=0.8, ls=":",
               label=f"sup estimate {verdict.sup_estimate:.6g}")
    ax.set_xlabel("angle along the last delay (others at argmax)")
    ax.set_ylabel("spectral radius")
    ax.set_title(f"delay-independent test: {verdict.stable_in_delays}")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
