"""Figure rendering for the stats report path.

Everything here draws to files with the Agg backend; the analysis
itself lives in evaluation.py and stays plot-free.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import StatReport

_REAL_COLOR = "#2a7fb8"
_FAKE_COLOR = "#d1495b"


def render_order_distributions(order_values: dict[str, tuple[np.ndarray, np.ndarray]],
                               reports: list[StatReport], path) -> None:
    """Histogram per kinematic order: (fake, real) window-mean stds."""
    n = len(reports)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.0), sharey=False)
    if n == 1:
        axes = [axes]
    for ax, rep in zip(axes, reports):
        fake, real = order_values[rep.name]
        lo = min(real.min(), fake.min())
        hi = max(real.max(), fake.max())
        bins = np.linspace(lo, hi, 40)
        ax.hist(real, bins=bins, density=True, alpha=0.55, color=_REAL_COLOR, label="real")
        ax.hist(fake, bins=bins, density=True, alpha=0.55, color=_FAKE_COLOR, label="fake")
        ax.set_title(f"{rep.name}\nd={rep.cohens_d:.2f}, p={rep.u_pvalue:.1e}", fontsize=9)
        ax.set_xlabel("window-mean std")
        ax.tick_params(labelsize=8)
    axes[0].set_ylabel("density")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_class_psd(freqs: np.ndarray, class_power: dict[str, np.ndarray], path,
                     band: tuple[float, float] = (1.0, 8.0)) -> None:
    """Mean trajectory PSD per class, the analysis band shaded."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for name, power in class_power.items():
        color = _FAKE_COLOR if "jitter" in name or name == "fake" else _REAL_COLOR
        ax.semilogy(freqs, np.maximum(power, 1e-30), label=name, color=color,
                    alpha=0.9 if color == _REAL_COLOR else 0.75)
    ax.axvspan(band[0], band[1], color="gray", alpha=0.15, label=f"{band[0]:g}-{band[1]:g} Hz")
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("power density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_region_effects(reports: list[StatReport], path) -> None:
    """Relative increase of fake over real motion per region."""
    names = [r.name for r in reports]
    delta = [100.0 * (r.mean_a - r.mean_b) / r.mean_b if r.mean_b else np.nan
             for r in reports]
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    ax.bar(names, delta, color=_FAKE_COLOR, alpha=0.8)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_ylabel("fake vs real, % increase in motion std")
    ax.tick_params(axis="x", rotation=20, labelsize=8)
    for i, (r, d) in enumerate(zip(reports, delta)):
        ax.annotate(f"F={r.f_stat:.0f}", (i, d), ha="center",
                    va="bottom" if d >= 0 else "top", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
