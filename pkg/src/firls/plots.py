"""Matplotlib figure rendering for solve traces and benchmarks."""

import matplotlib

matplotlib.use("Agg")

import math

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": "firls"}}


def render_trace_figure(report, path, title=None):
    """Objective (and SNR when available) versus outer iteration."""
    iters = [r.iteration for r in report.records]
    objectives = [r.objective for r in report.records]
    snrs = [r.snr_db for r in report.records]
    have_snr = not all(math.isnan(s) for s in snrs)

    ncols = 2 if have_snr else 1
    fig, axes = plt.subplots(1, ncols, figsize=(5.0 * ncols, 3.6))
    axes = np.atleast_1d(axes)
    axes[0].semilogy(iters, objectives, marker=".", color="tab:blue")
    axes[0].set_xlabel("outer iteration")
    axes[0].set_ylabel("objective")
    axes[0].grid(True, alpha=0.3)
    if have_snr:
        axes[1].plot(iters, snrs, marker=".", color="tab:orange")
        axes[1].set_xlabel("outer iteration")
        axes[1].set_ylabel("SNR (dB)")
        axes[1].grid(True, alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def render_bench_figure(traces, path, title=None):
    """Relative residual versus PCG iteration, one line per method."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for name in sorted(traces):
        trace = np.asarray(traces[name])
        ax.semilogy(np.arange(1, len(trace) + 1), trace, label=name)
    ax.set_xlabel("PCG iteration")
    ax.set_ylabel("relative residual")
    ax.grid(True, alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
