"""Figure rendering for the command-line runs.

Every function writes one PNG next to the delimited output and returns its
path.  The Agg backend is forced so runs work headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_profiles",
    "plot_pressure",
    "plot_convergence",
    "plot_slopes",
]

_DPI = 150


def plot_profiles(profile, outdir):
    """Section rigidity along the pipe, both quadrature routes."""
    path = Path(outdir) / "rigidity_profile.png"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(profile.s, profile.G, label="bulk quadrature")
    ax.plot(profile.s, profile.G_energy, "--", label="energy quadrature")
    ax.set_xlabel("arc length fraction")
    ax.set_ylabel("section rigidity")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_pressure(pressure, outdir):
    """Leading pressure, its slope, and the station flux."""
    path = Path(outdir) / "pressure_profile.png"
    fig, axes = plt.subplots(2, 1, figsize=(6.0, 6.0), sharex=True)
    axes[0].plot(pressure.s, pressure.p0)
    axes[0].set_ylabel("leading pressure")
    axes[0].grid(True, alpha=0.3)
    axes[1].plot(pressure.s, pressure.flux, label="station flux")
    axes[1].plot(pressure.s, pressure.dp0, "--", label="pressure slope")
    axes[1].set_xlabel("arc length fraction")
    axes[1].legend()
    axes[1].grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_convergence(sizes, defects, labels, outdir):
    """Defect against mesh size on log-log axes, one line per quantity."""
    path = Path(outdir) / "convergence.png"
    sizes = np.asarray(sizes, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for column, label in zip(np.atleast_2d(defects).T, labels):
        keep = column > 0.0
        if keep.any():
            ax.loglog(sizes[keep], column[keep], "o-", label=label)
    ax.set_xlabel("section mesh size")
    ax.set_ylabel("defect against finest mesh")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_slopes(report, outdir):
    """Perturbation defects against slenderness on log-log axes."""
    path = Path(outdir) / "perturbation_defects.png"
    columns = (
        ("section", "section profile", report.section),
        ("rigidity", "rigidity", report.rigidity),
        ("pressure", "pressure line", report.pressure),
        ("velocity", "axial velocity", report.velocity),
    )
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for key, label, column in columns:
        column = np.asarray(column, dtype=float)
        keep = column > 0.0
        slope = report.slopes.get(key, float("nan"))
        if keep.any():
            tag = label if not np.isfinite(slope) else f"{label} (slope {slope:.2f})"
            ax.loglog(np.asarray(report.h)[keep], column[keep], "o-", label=tag)
    ax.set_xlabel("slenderness")
    ax.set_ylabel("max defect")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
