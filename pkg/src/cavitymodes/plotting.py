"""Figure rendering for the report paths (PNG next to each CSV)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finalize(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_series(path, x, y, xlabel, ylabel, logy=False):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(x, y, lw=1.2)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    return _finalize(fig, path)


def save_chi(path, kx, chi):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    positive = np.asarray(chi) > 0
    ax.semilogy(np.asarray(kx)[positive] / np.pi, np.asarray(chi)[positive], lw=1.2)
    ax.set_xlabel(r"$Kx/\pi$")
    ax.set_ylabel(r"$\chi(x)$")
    ax.grid(alpha=0.3, which="both")
    return _finalize(fig, path)


def save_position_density(path, kx, density, potential=None):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(np.asarray(kx) / np.pi, density, lw=1.4, label="atomic density")
    if potential is not None:
        ax2 = ax.twinx()
        ax2.plot(np.asarray(kx) / np.pi, potential, "k--", lw=0.8, alpha=0.6,
                 label="lattice potential")
        ax2.set_yticks([])
    ax.set_xlabel(r"$Kx/\pi$")
    ax.set_ylabel(r"$\rho(x, x)$")
    ax.grid(alpha=0.3)
    return _finalize(fig, path)


def save_photon_distribution(path, n, p_sim, p_fit=None):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.bar(n, p_sim, width=0.7, alpha=0.6, label="simulation")
    if p_fit is not None:
        ax.plot(n, p_fit, "kx", ms=8, mew=1.5, label="mixture fit")
    ax.set_xlabel("photon number n")
    ax.set_ylabel("P(n)")
    ax.legend(frameon=False)
    return _finalize(fig, path)


def save_mode_densities(path, kx, odd, even, residual, potential=None):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    x = np.asarray(kx) / np.pi
    ax.plot(x, odd, "r--", lw=1.3, label="odd mode")
    ax.plot(x, even, "k-.", lw=1.3, label="even mode")
    ax.plot(x, residual, "b-", lw=1.3, label="residual mode")
    if potential is not None:
        scale = max(np.max(odd), np.max(even), np.max(residual))
        pot = np.asarray(potential)
        span = pot.max() - pot.min()
        if span > 0:
            ax.plot(x, (pot - pot.min()) / span * 0.5 * scale, color="0.6", lw=0.8,
                    label="lattice potential (scaled)")
    ax.set_xlabel(r"$Kx/\pi$")
    ax.set_ylabel("mode density")
    ax.legend(frameon=False, fontsize=8)
    return _finalize(fig, path)


def save_weight_series(path, times, epsilon, residual):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(times, epsilon, "r--", lw=1.3, label="ordered mode weight")
    ax.plot(times, residual, "b-", lw=1.3, label="residual weight")
    ax.set_xlabel(r"$\kappa t$")
    ax.set_ylabel("weight")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    return _finalize(fig, path)


def save_sweep(path, ut_values, epsilon, residual):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    x = np.abs(ut_values)
    ax.plot(x, epsilon, "r--o", lw=1.3, ms=4, label="odd or even mode")
    ax.plot(x, residual, "b-s", lw=1.3, ms=4, label="residual mode")
    ax.set_xlabel(r"$|U_t|$  $(\omega_r)$")
    ax.set_ylabel("weight")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    return _finalize(fig, path)
