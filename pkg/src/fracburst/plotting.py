"""Report figures rendered with the Agg backend (no display required)."""
from __future__ import annotations

import math

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = ["plot_kernel", "plot_trajectory", "plot_phase", "plot_ensemble"]

# fixed metadata keeps PNG bytes reproducible across runs
_PNG_META = {"Software": None}


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=100, metadata=_PNG_META)


def plot_kernel(report, path, title: str = "") -> None:
    """Radial kernel profile and its fitted bound on linear and log axes."""
    fig = Figure(figsize=(9, 3.6), layout="constrained")
    lin, log = fig.subplots(1, 2)
    positive = report.profile > 0
    for ax in (lin, log):
        ax.plot(report.x[positive], report.profile[positive], label="kernel")
        ax.plot(report.x, report.bound, "--", label=f"fitted {report.form} bound")
        ax.set_xlabel("|x|")
    lin.set_xlim(0, report.x[min(len(report.x) - 1, 4 * max(report.resolved_points, 1))])
    log.set_yscale("log")
    log.set_ylim(max(report.peak * 1e-12, np.min(report.profile[positive])) / 2, report.peak * 2)
    lin.legend()
    lin.set_ylabel("G_t(|x|)")
    fig.suptitle(title or f"kernel profile, max violation {report.max_violation:.3f} of peak")
    _save(fig, path)


def plot_trajectory(traj, path, threshold: float | None = None, title: str = "") -> None:
    """``P(t)`` on a log axis with the crossing time marked."""
    fig = Figure(figsize=(6, 4), layout="constrained")
    ax = fig.subplots()
    vals = np.asarray(traj.values, dtype=float)
    ok = np.isfinite(vals) & (vals > 0)
    ax.semilogy(np.asarray(traj.times)[ok], vals[ok], lw=1.2)
    if threshold is not None:
        ax.axhline(threshold, color="0.5", ls=":", label="threshold")
    if traj.t_star is not None:
        ax.axvline(traj.t_star, color="C3", ls="--", label=f"T* = {traj.t_star:.4g}")
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    ax.set_xlabel("t")
    ax.set_ylabel("P(t)")
    ax.set_title(title or f"verdict: {traj.verdict}")
    _save(fig, path)


def plot_phase(cells, path) -> None:
    """Verdict map per ``alpha`` over ``(beta, gamma)``, with both analytic lines."""
    alphas = sorted({c.alpha for c in cells})
    gammas = sorted({c.gamma for c in cells})
    betas = sorted({c.beta for c in cells})
    code = {"bounded": 0.0, "blowup": 1.0}
    ncol = min(3, len(alphas))
    nrow = math.ceil(len(alphas) / ncol)
    fig = Figure(figsize=(4 * ncol, 3 * nrow), layout="constrained")
    axes = np.atleast_1d(fig.subplots(nrow, ncol, squeeze=False)).ravel()
    gi = {g: i for i, g in enumerate(gammas)}
    bi = {b: i for i, b in enumerate(betas)}
    for ax, alpha in zip(axes, alphas):
        grid = np.full((len(gammas), len(betas)), np.nan)
        lower = None
        for c in cells:
            if c.alpha == alpha:
                grid[gi[c.gamma], bi[c.beta]] = code.get(c.verdict, np.nan)
                lower = c.beta_lower
        ax.pcolormesh(betas, gammas, grid, cmap="coolwarm", vmin=0, vmax=1, shading="nearest")
        upper = [next(c.beta_c for c in cells if c.alpha == alpha and c.gamma == g) for g in gammas]
        ax.axvline(lower, color="k", lw=1.2)
        ax.plot(upper, gammas, "k--", lw=1.0)
        ax.set_title(f"alpha = {alpha:.3g}")
        ax.set_xlabel("beta")
        ax.set_ylabel("gamma")
    for ax in axes[len(alphas):]:
        ax.set_visible(False)
    fig.suptitle("red: blow-up, blue: bounded, blank: rejected; solid beta_lower, dashed beta_c")
    _save(fig, path)


def plot_ensemble(stats, path, title: str = "") -> None:
    """Observable, monitors and blow-up fraction of an ensemble run."""
    fig = Figure(figsize=(9, 6), layout="constrained")
    axes = fig.subplots(2, 2).ravel()
    series = [
        ("P_estimate", stats.P_estimate, True),
        ("vortex monitor", stats.vortex_monitor, True),
        ("noise monitor", stats.noise_monitor, True),
        ("blow-up fraction", stats.blowup_fraction, False),
    ]
    for ax, (name, y, logy) in zip(axes, series):
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(y) & ((y > 0) if logy else True)
        if np.any(ok):
            (ax.semilogy if logy else ax.plot)(stats.times[ok], y[ok])
        ax.set_title(name)
        ax.set_xlabel("t")
    axes[3].set_ylim(-0.05, 1.05)
    fig.suptitle(title or f"ensemble of {int(stats.alive[0])} realizations")
    _save(fig, path)
