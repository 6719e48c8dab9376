"""PNG figures for run reports (matplotlib, non-interactive backend)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_profile(path, r, u, fraclap_u, fit_window=None, slope=None, decay=None):
    """Profile on linear axes and its tail on log-log axes with the fit."""
    fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4))
    a.plot(r, u, label="u")
    a.plot(r, fraclap_u, label="(-Δ)^s u", lw=0.8)
    a.set_xlim(0, min(r[-1], 10 * max(r[np.argmax(u < 0.5 * u[0])], r[1])))
    a.set_xlabel("r")
    a.legend()
    pos = (r > 0) & (u > 0)
    b.loglog(r[pos], u[pos], label="u")
    if fit_window is not None and slope is not None and np.isfinite(slope):
        lo, hi = fit_window
        m = pos & (r >= lo) & (r <= hi)
        if np.any(m):
            r0, u0 = r[m][0], u[m][0]
            rr = np.array([lo, hi])
            b.loglog(rr, u0 * (rr / r0) ** slope, "--", label=f"fit slope {slope:.3f}")
            b.axvspan(lo, hi, alpha=0.1)
    if decay is not None:
        b.set_title(f"expected slope {-decay:g}")
    b.set_xlabel("r")
    b.legend()
    return _save(fig, path)


def plot_convergence(path, history):
    h = np.asarray(history, float).reshape(-1, 3)
    fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4))
    F = h[:, 1]
    a.semilogy(h[:, 0], np.maximum(F - F.min(), 1e-300) + 1e-16, label="F - min F")
    a.set_xlabel("iteration")
    a.legend()
    b.semilogy(h[:, 0], np.maximum(h[:, 2], 1e-300), label="residual")
    b.set_xlabel("iteration")
    b.legend()
    return _save(fig, path)


def plot_crosscheck(path, result):
    cases = result["cases"]
    fig, axes = plt.subplots(1, len(cases), figsize=(5 * len(cases), 4), squeeze=False)
    for ax, c in zip(axes[0], cases):
        pairs = sorted(c["levels"][0]["discrepancy"])
        x = np.arange(len(pairs))
        for j, lv in enumerate(c["levels"]):
            ax.bar(x + 0.4 * j - 0.2, [lv["discrepancy"][p] for p in pairs], width=0.4,
                   label=f"level {j}")
        ax.set_yscale("log")
        ax.set_xticks(x)
        ax.set_xticklabels([p.replace("_", "\nvs ") for p in pairs])
        ax.axhline(result["threshold"], color="k", ls="--", lw=0.8)
        ax.set_title(f"{c['name']} (N={c['N']}, s={c['s']:g})")
        ax.legend()
    return _save(fig, path)


def figure_path(out_dir, name):
    return os.path.join(out_dir, name)
