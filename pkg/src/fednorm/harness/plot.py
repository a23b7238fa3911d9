"""Offline SVG line plots of a results CSV."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..errors import SchemaError, UnknownMetric
from .runner import COLUMNS, METRIC_COLUMNS


def _parse_point(label):
    if label in ("", "base"):
        return {}
    return dict(part.split("=", 1) for part in label.split(";"))


def read_rows(csv_path):
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != COLUMNS:
            raise SchemaError(f"unexpected CSV header {reader.fieldnames}; expected {COLUMNS}")
        return list(reader)


def group_series(rows, metric, group_by):
    """``{group: (rounds, mean, lo, hi)}`` averaged over seeds at each round."""
    if metric not in METRIC_COLUMNS:
        raise UnknownMetric(f"unknown metric {metric!r}; choose from {METRIC_COLUMNS}")
    keys = set(COLUMNS)
    for r in rows:
        keys.update(_parse_point(r["sweep_point"]))
    if group_by not in keys:
        raise SchemaError(f"no column or sweep axis {group_by!r}; available keys: {sorted(keys)}")

    buckets = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r["round"] == "" or r[metric] == "":
            continue
        axes = _parse_point(r["sweep_point"])
        g = r[group_by] if group_by in r else axes.get(group_by, "")
        buckets[g][int(r["round"])].append(float(r[metric]))
    if not buckets:
        raise SchemaError(f"no rows carry metric {metric!r}")
    series = {}
    for g, by_round in sorted(buckets.items()):
        rounds = np.array(sorted(by_round))
        vals = [np.array(by_round[t]) for t in rounds]
        series[g] = (
            rounds,
            np.array([v.mean() for v in vals]),
            np.array([v.min() for v in vals]),
            np.array([v.max() for v in vals]),
        )
    return series


def emit_plot(csv_path, metric, group_by, out_path, log_scale=None):
    """One seed-averaged line per group with a min/max band, written as SVG."""
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    series = group_series(read_rows(csv_path), metric, group_by)
    if log_scale is None:
        log_scale = all(np.all(s[2] > 0) for s in series.values())
    fig, ax = plt.subplots(figsize=(6, 4))
    for g, (rounds, mean, lo, hi) in series.items():
        (line,) = ax.plot(rounds, mean, label=f"{group_by}={g}")
        ax.fill_between(rounds, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
    if log_scale:
        ax.set_yscale("log")
    ax.set_xlabel("round")
    ax.set_ylabel(metric)
    ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path
