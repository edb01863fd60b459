"""Figure rendering for the report paths of the CLI.

Every figure is written next to the delimited output file; rendering is
headless (Agg) and deterministic (no timestamps in metadata).
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.special import ndtri

_METHOD_MARKERS = {"aml": "s", "mpl": "o", "rc": "^", "naive": "*"}


def _save(fig, path):
    fig.savefig(path, dpi=150, metadata={})
    plt.close(fig)
    return str(path)


def save_fit_figure(rows, path):
    """Dot-and-whisker plot of estimates with confidence bounds.

    ``rows`` are dicts with keys method, parameter, estimate, ci_lower,
    ci_upper.
    """
    methods = sorted({r["method"] for r in rows})
    params = list(dict.fromkeys(r["parameter"] for r in rows))
    fig, ax = plt.subplots(figsize=(7, 0.6 * len(params) * max(len(methods), 1) + 1.5))
    ypos = 0
    yticks, ylabels = [], []
    for param in params:
        for method in methods:
            match = [r for r in rows if r["method"] == method and r["parameter"] == param]
            if not match:
                continue
            r = match[0]
            ax.errorbar(
                r["estimate"],
                ypos,
                xerr=[[r["estimate"] - r["ci_lower"]], [r["ci_upper"] - r["estimate"]]],
                fmt=_METHOD_MARKERS.get(method, "o"),
                capsize=3,
                label=method,
            )
            yticks.append(ypos)
            ylabels.append(f"{param} ({method})")
            ypos += 1
        ypos += 0.5
    ax.axvline(0.0, color="0.6", lw=0.8, ls=":")
    ax.set_yticks(yticks)
    ax.set_yticklabels(ylabels, fontsize=8)
    ax.set_xlabel("estimate")
    ax.invert_yaxis()
    fig.tight_layout()
    return _save(fig, path)


def _grouped_bars(ax, rows, value_key):
    methods = sorted({r["method"] for r in rows})
    params = list(dict.fromkeys(r["parameter"] for r in rows))
    width = 0.8 / max(len(methods), 1)
    xs = np.arange(len(params))
    for i, method in enumerate(methods):
        vals = []
        for param in params:
            match = [
                r for r in rows if r["method"] == method and r["parameter"] == param
            ]
            vals.append(match[0][value_key] if match else np.nan)
        ax.bar(xs + i * width, vals, width=width, label=method)
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels(params)
    ax.legend(fontsize=8)


def save_mc_figures(rows, stem):
    """Bias, RMSE and coverage bar charts for one Monte Carlo run."""
    written = []
    for key, label in (("bias", "bias"), ("rmse", "RMSE"), ("coverage", "coverage")):
        fig, ax = plt.subplots(figsize=(7, 4))
        _grouped_bars(ax, rows, key)
        ax.set_ylabel(label)
        if key == "bias":
            ax.axhline(0.0, color="0.4", lw=0.8)
        if key == "coverage":
            level = rows[0].get("level")
            if level:
                ax.axhline(level, color="0.4", lw=0.8, ls="--")
        fig.tight_layout()
        written.append(_save(fig, f"{stem}_{key}.png"))
    return written


def save_residual_figures(x_predicted, residuals, lower, upper, stem):
    """Residuals versus predicted covariate, and a normal probability plot
    of the sorted residuals with the simulated envelope."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.scatter(x_predicted, residuals, s=14, edgecolor="k", facecolor="none")
    for yline in (-2.0, 0.0, 2.0):
        ax.axhline(yline, color="0.6", lw=0.8, ls=":" if yline else "-")
    ax.set_xlabel("predicted covariate")
    ax.set_ylabel("standardized weighted residual")
    fig.tight_layout()
    scatter_path = _save(fig, f"{stem}_residuals.png")

    n = len(residuals)
    order = np.sort(np.asarray(residuals))
    quantiles = ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.scatter(quantiles, order, s=14, edgecolor="k", facecolor="none")
    ax.plot(quantiles, lower, color="0.3", lw=0.9)
    ax.plot(quantiles, upper, color="0.3", lw=0.9)
    ax.plot(quantiles, 0.5 * (np.asarray(lower) + np.asarray(upper)),
            color="0.3", lw=0.8, ls="--")
    ax.set_xlabel("normal quantile")
    ax.set_ylabel("ordered residual")
    fig.tight_layout()
    qq_path = _save(fig, f"{stem}_envelope.png")
    return [scatter_path, qq_path]
