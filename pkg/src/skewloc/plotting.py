"""Optional PNG rendering of the plot-ready CSV tables written by ``verify``.

Only imported when ``--plot`` is given; requires the ``plot`` extra
(matplotlib). Figures are drawn from the CSV files themselves so what is
plotted is exactly what was recorded.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise OSError("--plot needs matplotlib; install with `pip install skewloc[plot]`") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _read(path: Path):
    from .persist import read_table_csv

    return read_table_csv(path)


def _save(fig, path: Path) -> Path:
    # Fixed metadata keeps the PNG bytes reproducible.
    fig.savefig(path, dpi=100, metadata={"Software": None})
    return path


def plot_qq(csv_path: Path, png_path: Path) -> Path:
    plt = _pyplot()
    d = _read(csv_path)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(d["normal_quantile"], d["z_quantile"], ".", ms=2)
    lim = float(np.max(np.abs(d["normal_quantile"]))) * 1.05
    ax.plot([-lim, lim], [-lim, lim], "k--", lw=1)
    ax.set_xlabel("standard normal quantile")
    ax.set_ylabel("z quantile")
    ax.set_title("normalised statistic vs N(0, 1)")
    fig.tight_layout()
    out = _save(fig, png_path)
    plt.close(fig)
    return out


def plot_rate(csv_path: Path, png_path: Path) -> Path:
    plt = _pyplot()
    d = _read(csv_path)
    slope, intercept = np.polyfit(d["log_n"], d["log_rmse"], 1)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(d["n"], d["rmse"], "o-", label="RMSE")
    ax.loglog(d["n"], np.exp(intercept) * d["n"] ** slope, "k--", lw=1, label=f"fit, slope {slope:.3f}")
    ax.loglog(d["n"], d["rmse"][0] * (d["n"] / d["n"][0]) ** -0.25, ":", lw=1, label="slope -1/4")
    ax.set_xlabel("n")
    ax.set_ylabel("RMSE")
    ax.legend()
    fig.tight_layout()
    out = _save(fig, png_path)
    plt.close(fig)
    return out


def plot_consistency(csv_path: Path, png_path: Path) -> Path:
    plt = _pyplot()
    d = _read(csv_path)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(d["n"], d["median_sup_error"], "o-")
    ax.set_xlabel("n")
    ax.set_ylabel("median uniform error")
    fig.tight_layout()
    out = _save(fig, png_path)
    plt.close(fig)
    return out


def plot_sampler(csv_path: Path, png_path: Path) -> Path:
    plt = _pyplot()
    d = _read(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    cases = np.atleast_1d(d["case"])
    ax.bar(range(cases.size), np.atleast_1d(d["ks"]))
    ax.set_xticks(range(cases.size), cases, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("one-step KS distance")
    fig.tight_layout()
    out = _save(fig, png_path)
    plt.close(fig)
    return out


_PLOTS = {
    "clt": [("clt_qq.csv", "clt_qq.png", plot_qq)],
    "rate": [("rate.csv", "rate.png", plot_rate)],
    "consistency": [("consistency.csv", "consistency.png", plot_consistency)],
    "sampler": [("sampler_steps.csv", "sampler_steps.png", plot_sampler)],
}


def render_verify_plots(kind: str, out: Path) -> list[Path]:
    """Render the figures for a ``verify`` run next to its CSV files."""
    return [fn(out / src, out / dst) for src, dst, fn in _PLOTS[kind]]
