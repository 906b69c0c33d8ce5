"""Figure rendering for the report path.

Every CLI stage that writes delimited output can also render a PNG next
to it.  All functions take explicit data and a target path; nothing here
touches global state beyond forcing the Agg backend.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 130
_META = {"Software": "transferspec"}


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=_DPI, metadata=_META)
    plt.close(fig)


def plot_trajectory(states: np.ndarray, path: Path, max_points: int = 20000) -> None:
    pts = states[:max_points]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(pts[:, 0], pts[:, 1], lw=0.3, color="tab:blue", alpha=0.8)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"trajectory ({len(pts)} of {len(states)} samples)")
    ax.set_aspect("equal")
    _save(fig, path)


def plot_density(grid, density_values: np.ndarray, path: Path) -> None:
    nx, ny = grid.n_per_dim
    img = density_values.reshape(ny, nx)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    extent = (grid.lo[0], grid.hi[0], grid.lo[1], grid.hi[1])
    pcm = ax.imshow(img, origin="lower", extent=extent, cmap="viridis", aspect="equal")
    fig.colorbar(pcm, ax=ax, label="sojourn density")
    ax.set_xlabel("x (standardized)")
    ax.set_ylabel("y (standardized)")
    _save(fig, path)


def plot_spectrum(
    values: np.ndarray,
    path: Path,
    weights: np.ndarray | None = None,
    lattice: np.ndarray | None = None,
    title: str = "resonances",
) -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    if lattice is not None:
        ax.plot(lattice.real, lattice.imag, "x", ms=9, color="0.5", label="analytic lattice")
    size = 36.0
    if weights is not None and len(weights):
        mag = np.abs(np.asarray(weights))
        floor = mag[mag > 0].min() if np.any(mag > 0) else 1.0
        size = 10 + 40 * (np.log10(np.maximum(mag, floor) / floor) + 1)
    ax.scatter(values.real, values.imag, s=size, marker="+", color="tab:red", label="estimated")
    ax.axvline(0.0, color="k", lw=0.6)
    ax.set_xlabel(r"Re $\lambda$")
    ax.set_ylabel(r"Im $\lambda$")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    _save(fig, path)


def plot_correlation(t, reconstructed, sampled, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(t, sampled, "k-", lw=1.0, label="sample estimate")
    ax.plot(t, reconstructed, "r--", lw=1.2, label="spectral reconstruction")
    ax.axhline(0.0, color="0.7", lw=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel("C(t)")
    ax.legend(loc="best", fontsize=8)
    _save(fig, path)


def plot_psd(omega, reconstructed, sampled, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.semilogy(omega, np.maximum(sampled, 1e-300), "k-", lw=1.0, label="Welch estimate")
    ax.semilogy(omega, np.maximum(reconstructed, 1e-300), "r--", lw=1.2, label="spectral reconstruction")
    ax.set_xlabel(r"$\omega$ (rad/time)")
    ax.set_ylabel(r"S($\omega$)")
    ax.legend(loc="best", fontsize=8)
    _save(fig, path)
