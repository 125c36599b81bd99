"""Learner report: decoded activation bands and their chart.

The report is line-delimited JSON so it can be grepped and post-processed;
``render_bands`` draws the bands against the visitor-stand distance, one
row per coupling grouped by resource, with the learned branches overlaid
as dotted rectangles. Distance decreases to the right, matching how the
interaction unfolds.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .learn import LearnResult  # noqa: E402


def bands_of(w: np.ndarray, d: np.ndarray, times: np.ndarray) -> list[dict]:
    """Contiguous active runs of one coupling as (t, d) spans."""
    w = np.asarray(w, dtype=bool)
    out = []
    start = None
    for t in range(len(w) + 1):
        on = t < len(w) and w[t]
        if on and start is None:
            start = t
        elif not on and start is not None:
            end = t - 1
            out.append({
                "t_start": float(times[start]),
                "t_end": float(times[end]),
                "d_start": float(d[start]),
                "d_end": float(d[end]),
                "ticks": int(end - start + 1),
            })
            start = None
    return out


def build_report(result: LearnResult) -> list[dict]:
    """Flatten a learn result into line-delimited report records."""
    act = result.activations
    records: list[dict] = [{
        "type": "meta",
        "samples": int(len(act.d) + 1),
        "d_min": act.d_min,
        "d_max": act.d_max,
        "delta": result.config.delta,
    }]
    for model in act.models:
        for band in bands_of(act.w[model.association], act.d, act.times):
            records.append({
                "type": "band",
                "resource": model.resource,
                "association": model.association,
                **band,
            })
    for leaf in result.flat.leaves:
        records.append({
            "type": "interval",
            "association": leaf.association,
            "resource": leaf.resource,
            "lower": leaf.interval.lower,
            "upper": leaf.interval.upper,
        })
    for group in result.tree.groups:
        records.append({
            "type": "group",
            "name": group.name,
            "lower": group.interval.lower,
            "upper": group.interval.upper,
            "members": [m.association for m in group.members],
        })
    return records


def write_report(records: list[dict], path: str | Path) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")


def read_report(path: str | Path) -> list[dict]:
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def render_bands(records: list[dict], path: str | Path) -> None:
    """Draw activation bands over decreasing distance and save the figure."""
    bands = [r for r in records if r["type"] == "band"]
    groups = [r for r in records if r["type"] == "group"]
    meta = next((r for r in records if r["type"] == "meta"), {})

    rows: list[tuple[str, str]] = []
    for b in bands:
        key = (b["resource"], b["association"])
        if key not in rows:
            rows.append(key)
    rows.sort()

    fig, ax = plt.subplots(figsize=(9, 0.5 * max(len(rows), 4) + 1.5))
    cmap = plt.get_cmap("tab10")
    resources = sorted({r for r, _a in rows})
    colors = {res: cmap(i % 10) for i, res in enumerate(resources)}

    index = {key: i for i, key in enumerate(rows)}
    for b in bands:
        y = index[(b["resource"], b["association"])]
        lo, hi = sorted((b["d_start"], b["d_end"]))
        ax.barh(y, hi - lo, left=lo, height=0.6,
                color=colors[b["resource"]], edgecolor="none")

    d_lo = meta.get("d_min", min((min(b["d_start"], b["d_end"]) for b in bands), default=0.0))
    d_hi = meta.get("d_max", max((max(b["d_start"], b["d_end"]) for b in bands), default=1.0))
    for g in groups:
        lo = g["lower"] if g["lower"] is not None else d_lo
        hi = g["upper"] if g["upper"] is not None else d_hi
        members = [i for (res, assoc), i in index.items() if assoc in g["members"]]
        if not members:
            continue
        y0, y1 = min(members) - 0.45, max(members) + 0.45
        ax.add_patch(plt.Rectangle((lo, y0), hi - lo, y1 - y0, fill=False,
                                   linestyle=":", linewidth=1.4, edgecolor="black"))
        ax.text(hi, y1 + 0.05, g["name"], ha="right", va="bottom", fontsize=11,
                fontweight="bold")

    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels([f"{assoc}  [{res}]" for res, assoc in rows], fontsize=8)
    ax.set_xlabel("visitor-stand distance d (m)")
    ax.set_xlim(d_hi * 1.02, max(d_lo - 0.1, 0.0))  # decreasing to the right
    ax.set_title("coupling activations over decreasing distance")
    ax.grid(axis="x", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
