"""Static SVG line plots of experiment tables (a convenience; the CSV is the record)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed ids and no timestamp so repeated runs give identical files
matplotlib.rcParams["svg.hashsalt"] = "phi3d"
matplotlib.rcParams["svg.fonttype"] = "none"


def _as_float(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return None


def _selected(rows, select):
    return [r for r in rows if all(r.get(k) == v for k, v in select.items())]


def plot_table(table, path: str) -> bool:
    """Draw ``table.plot`` into ``path``; returns False if nothing was plottable."""
    spec = table.plot
    if spec is None:
        return False
    rows = _selected(table.rows, spec.select)
    groups = {}
    for r in rows:
        x, y = _as_float(r.get(spec.x)), _as_float(r.get(spec.y))
        if x is None or y is None or x <= 0:
            continue
        if spec.logy and y <= 0:
            continue
        key = r.get(spec.group) if spec.group else None
        err = _as_float(r.get(spec.yerr)) if spec.yerr else None
        groups.setdefault(key, []).append((x, y, err or 0.0))
    if not groups:
        return False
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for key, pts in groups.items():
        pts.sort()
        xs, ys, es = zip(*pts)
        label = f"{spec.group}={key}" if spec.group else None
        if spec.yerr:
            ax.errorbar(xs, ys, yerr=es, marker="o", ms=3, lw=1, capsize=2, label=label)
        else:
            ax.plot(xs, ys, marker="o", ms=3, lw=1, label=label)
    if spec.logx:
        ax.set_xscale("log", base=2)
    if spec.logy:
        ax.set_yscale("log")
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y)
    if spec.title:
        ax.set_title(spec.title, fontsize=9)
    if spec.group:
        ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return True
