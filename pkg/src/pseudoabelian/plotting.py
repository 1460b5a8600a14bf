"""SVG figures for the CLI artifacts.

Figures are written with the Agg backend, a fixed SVG hash salt and no
date metadata, so reruns produce identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_ovals",
    "plot_integral",
    "plot_variation_fit",
    "plot_compensator",
    "plot_uniformity",
    "plot_leading_term",
    "plot_decay",
]

STYLE = {
    "svg.hashsalt": "pseudoabelian",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}


def _figure(width: float = 6.0, height: float = 4.0):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def _save(fig, path) -> None:
    with plt.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_ovals(ovals: list[tuple[float, np.ndarray]], path, *, title: str = "real ovals") -> None:
    """``ovals`` is a list of ``(h, points)`` with points of shape ``(n, 2)``."""
    fig, ax = _figure(5.0, 5.0)
    cmap = plt.get_cmap("viridis")
    for i, (h, pts) in enumerate(ovals):
        p = np.vstack([pts, pts[:1]])
        ax.plot(p[:, 0], p[:, 1], color=cmap(i / max(len(ovals) - 1, 1)), label=f"h={h:.3g}")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    if len(ovals) <= 8:
        ax.legend(fontsize=7)
    _save(fig, path)


def plot_integral(h, values, zeros, path, *, title: str = "I(h)") -> None:
    fig, ax = _figure()
    h = np.asarray(h)
    ax.plot(h, values, ".-", label="I(h)")
    for z in zeros:
        ax.axvline(z, color="C3", lw=0.8, ls="--")
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xscale("log")
    ax.set_yscale("symlog", linthresh=max(1e-12, float(np.min(np.abs(values))) if len(values) else 1.0))
    ax.set_xlabel("h")
    ax.set_ylabel("I")
    ax.set_title(title)
    _save(fig, path)


def plot_variation_fit(w, values, fitted, path, *, title: str = "variation vs w") -> None:
    fig, ax = _figure()
    order = np.argsort(w)
    w = np.asarray(w)[order]
    ax.plot(w, np.real(np.asarray(values)[order]), "o", ms=3, label="Re V")
    ax.plot(w, np.real(np.asarray(fitted)[order]), "-", label="Re fit")
    if np.any(np.abs(np.imag(values)) > 0):
        ax.plot(w, np.imag(np.asarray(values)[order]), "s", ms=3, label="Im V")
        ax.plot(w, np.imag(np.asarray(fitted)[order]), "--", label="Im fit")
    ax.set_xlabel("w = -1/omega")
    ax.set_ylabel("V")
    ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_compensator(h, curves: dict, path, *, title: str = "compensator") -> None:
    """``curves`` maps a label to ``omega`` values on ``h`` (real parts are drawn)."""
    fig, ax = _figure()
    for label, vals in curves.items():
        ax.plot(h, np.real(vals), label=label)
    ax.set_xlabel("h")
    ax.set_ylabel("omega")
    ax.set_title(title)
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_uniformity(eps, alpha, counts, path, *, title: str = "zero counts") -> None:
    eps = np.asarray(eps)
    alpha = np.asarray(alpha)
    grid = np.asarray(counts).reshape(len(eps), len(alpha))
    fig, ax = _figure(5.0, 4.0)
    im = ax.imshow(grid.T, origin="lower", aspect="auto", cmap="viridis",
                   extent=[eps[0], eps[-1], alpha[0], alpha[-1]] if len(eps) > 1 and len(alpha) > 1 else None)
    fig.colorbar(im, ax=ax, label="zeros")
    ax.set_xlabel("eps")
    ax.set_ylabel("alpha")
    ax.set_title(title)
    ax.grid(False)
    _save(fig, path)


def plot_leading_term(h, values, model_values, path, *, title: str = "leading term") -> None:
    fig, ax = _figure()
    ax.loglog(h, np.abs(values), ".", label="|I|")
    ax.loglog(h, np.abs(model_values), "-", label="|fit|")
    ax.set_xlabel("h")
    ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_decay(t, values, path, *, title: str = "decay along a ray") -> None:
    fig, ax = _figure()
    ax.loglog(t, np.abs(values), ".-")
    ax.set_xlabel("t")
    ax.set_ylabel("|F|")
    ax.set_title(title)
    _save(fig, path)
