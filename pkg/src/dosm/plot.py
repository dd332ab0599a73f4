"""Standalone SVG figures for trace and sweep CSVs."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import TRACE_HEADER, _atomic_write, _data_lines, config_hash_of, read_trace  # noqa: E402

SWEEP_HEADER = "T,mean_final_regret,se,slope_so_far"


def _read_sweep(path):
    lines = _data_lines(Path(path).read_text())
    rows = [ln.split(",") for ln in lines[1:]]
    T = np.array([float(r[0]) for r in rows])
    mean = np.array([float(r[1]) for r in rows])
    se = np.array([float(r[2]) for r in rows])
    return T, mean, se


def _regret_axes(ax, x, ys, labels, xlabel, gids):
    for y, label, gid in zip(ys, labels, gids):
        ax.plot(x, y, marker="o" if len(x) <= 20 else None, ms=3, label=label, gid=gid)
    ax.set_xscale("log")
    # Alpha-regret is often negative, which a pure log axis cannot show.
    ax.set_yscale("symlog", linthresh=1.0)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("alpha-regret")
    ax.grid(True, which="both", alpha=0.3)
    if len(labels) > 1:
        ax.legend(fontsize=7)


# Fixed id salt and real text elements keep the SVG byte-reproducible.
_SVG_RC = {"svg.hashsalt": "dosm", "svg.fonttype": "none"}


def render(csv_path):
    """Render ``csv_path`` (trace or sweep CSV) to SVG text."""
    with matplotlib.rc_context(_SVG_RC):
        return _render(csv_path)


def _render(csv_path):
    lines = _data_lines(Path(csv_path).read_text())
    if not lines:
        raise ValueError(f"{csv_path} has no data")
    header = lines[0]
    if header == TRACE_HEADER:
        cols = read_trace(csv_path)
        rounds, nodes = cols["round"], cols["node"]
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
        node_ids = np.unique(nodes)
        xs = [rounds[nodes == i] for i in node_ids]
        regrets = [cols["alpha_regret"][nodes == i] for i in node_ids]
        labels = [f"node {i}" for i in node_ids]
        _regret_axes(ax1, xs[0], regrets, labels, "round", [f"regret-node{i}" for i in node_ids])
        for i, x in zip(node_ids, xs):
            marker = "o" if len(x) <= 20 else None
            ax2.plot(x, cols["consensus_err"][nodes == i], marker=marker, ms=3, gid=f"consensus-node{i}")
        ax2.set_xlabel("round")
        ax2.set_ylabel("consensus error")
        ax2.grid(True, alpha=0.3)
        fig.suptitle(f"{cols['algo'][0]} (alpha={cols['alpha'][0]:.4g}, seed={cols['seed'][0]})", fontsize=9)
    elif header == SWEEP_HEADER:
        T, mean, se = _read_sweep(csv_path)
        fig, ax1 = plt.subplots(figsize=(5, 3.5))
        _regret_axes(ax1, T, [mean], ["mean final"], "horizon T", ["regret-mean"])
        ax1.fill_between(T, mean - se, mean + se, alpha=0.2)
    else:
        raise ValueError(f"unrecognized CSV header {header!r}")
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    svg = buf.getvalue()
    h = config_hash_of(csv_path)
    if h is not None:
        svg = svg.replace("?>\n", f"?>\n<!-- # config_hash={h} -->\n", 1)
    return svg


def plot_csv(csv_path, out_path):
    _atomic_write(out_path, render(csv_path))
    return out_path
