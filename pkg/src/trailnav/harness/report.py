"""Metric tables, per-trial artefacts and figures."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..costmap import CostGrid
from ..errors import EmptyLog
from ..track import RolloutLog
from ..trajopt import write_trace_csv
from .pipeline import RunMetrics, TrialResult

METRIC_FIELDS = ("scenario", "method", "trial", "seed", "success", "progress", "time", "length",
                 "az_rms_mean", "az_max", "failure_reason")
SUCCESS_ONLY = ("time", "length", "az_rms_mean", "az_max")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics_csv(rows: Iterable[RunMetrics], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_FIELDS)
        for m in rows:
            d = m.to_dict()
            w.writerow([_fmt(d[k]) for k in METRIC_FIELDS])


def read_metrics_csv(path: str | Path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            d: dict = {"scenario": row["scenario"], "method": row["method"], "trial": int(row["trial"]),
                       "seed": int(row["seed"]), "success": row["success"] == "True",
                       "progress": float(row["progress"]), "failure_reason": row["failure_reason"] or None}
            for k in SUCCESS_ONLY:
                d[k] = float(row[k]) if row[k] else None
            out.append(d)
    return out


def _mean_std(xs: Sequence[float]) -> dict:
    if not xs:
        return {"mean": None, "std": None, "n": 0}
    a = np.asarray(xs, dtype=float)
    return {"mean": float(a.mean()), "std": float(a.std()), "n": len(xs)}


def aggregate(rows: Iterable[RunMetrics | dict]) -> list[dict]:
    """Mean and population std per (scenario, method).

    ``success`` and ``progress`` average over every trial; the remaining
    metrics only over successful trials and are ``None`` when there are none.
    """
    groups: dict[tuple[str, str], list[dict]] = defaultdict(list)
    for r in rows:
        d = r.to_dict() if isinstance(r, RunMetrics) else r
        groups[(d["scenario"], d["method"])].append(d)
    table = []
    for (scenario, method), ds in sorted(groups.items()):
        ok = [d for d in ds if d["success"]]
        entry = {
            "scenario": scenario,
            "method": method,
            "trials": len(ds),
            "successes": len(ok),
            "success_rate": _mean_std([1.0 if d["success"] else 0.0 for d in ds]),
            "progress": _mean_std([d["progress"] for d in ds]),
        }
        for k in SUCCESS_ONLY:
            entry[k] = _mean_std([d[k] for d in ok])
        table.append(entry)
    return table


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def metrics_document(rows: Sequence[RunMetrics]) -> dict:
    return {"trials": [m.to_dict() for m in rows], "summary": aggregate(rows)}


SUMMARY_FIELDS = ("scenario", "method", "trials", "successes", "success_rate", "progress") + SUCCESS_ONLY


def write_summary_csv(table: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["scenario", "method", "trials", "successes"]
        for k in SUMMARY_FIELDS[4:]:
            head += [f"{k}_mean", f"{k}_std"]
        w.writerow(head)
        for e in table:
            row = [e["scenario"], e["method"], e["trials"], e["successes"]]
            for k in SUMMARY_FIELDS[4:]:
                row += [_fmt(e[k]["mean"]), _fmt(e[k]["std"])]
            w.writerow(row)


def plot_data(log: RolloutLog, grid: CostGrid | None = None) -> dict:
    """Trajectory polyline with per-sample speed, its colour range and the cost raster."""
    if len(log) == 0:
        raise EmptyLog("rollout log has no samples")
    v = log.array("v")
    return {
        "polyline": {"t": log.rows["t"], "x": log.rows["x"], "y": log.rows["y"], "v": log.rows["v"]},
        "speed_range": [float(v.min()), float(v.max())],
        "cost_raster": grid.to_raster() if grid is not None else None,
    }


def export_plot_data(result: TrialResult, out_dir: str | Path, stem: str, figures: bool = True) -> dict[str, Path]:
    """Write the plot-data JSON, the optimiser trace CSV and (optionally) a PNG overlay.

    Raises:
        EmptyLog: the trial produced no rollout samples.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = result.env.geo if result.env is not None else None
    data = plot_data(result.log, grid)
    if result.plans:
        data["planned"] = [{"x": p.traj.points[:, 0].tolist(), "y": p.traj.points[:, 1].tolist(),
                            "v": p.traj.v.tolist()} for p in result.plans[:1]]
    paths = {"plot": out_dir / f"{stem}_plot.json"}
    write_json(data, paths["plot"])
    trace_path = out_dir / f"{stem}_trace.csv"
    write_trace_csv(result.plans[0].opt.trace if result.plans else [], trace_path)
    paths["trace"] = trace_path
    if figures:
        paths["figure"] = out_dir / f"{stem}.png"
        render_overlay(data, paths["figure"], title=stem, bump=result.env.bump_grid if result.env else None)
    return paths


def _imshow_raster(ax, raster: dict, cmap: str, label: str, fig) -> None:
    vals = np.asarray(raster["values"], dtype=float).reshape(raster["rows"], raster["cols"])
    h = 0.5 * raster["resolution"]
    x0, y0 = raster["origin_x"] - h, raster["origin_y"] - h
    ext = (x0, x0 + raster["cols"] * raster["resolution"], y0, y0 + raster["rows"] * raster["resolution"])
    im = ax.imshow(vals, origin="lower", extent=ext, cmap=cmap, vmin=0.0, vmax=1.0, alpha=0.8)
    fig.colorbar(im, ax=ax, fraction=0.03, pad=0.02, label=label)


def render_overlay(data: dict, path: str | Path, title: str = "", bump: CostGrid | None = None) -> None:
    """Trajectory coloured by speed over the cost raster (and the bumpiness raster if given)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.collections import LineCollection

    panels = [("geometric cost", data.get("cost_raster"), "Greys")]
    if bump is not None:
        panels.append(("bumpiness", bump.to_raster(), "YlOrBr"))
    fig, axes = plt.subplots(len(panels), 1, figsize=(7, 3.2 * len(panels)), squeeze=False, layout="constrained")
    poly = data["polyline"]
    xy = np.column_stack([poly["x"], poly["y"]])
    lo, hi = data["speed_range"]
    lc = None
    for ax, (label, raster, cmap) in zip(axes[:, 0], panels):
        if raster is not None:
            _imshow_raster(ax, raster, cmap, label, fig)
        if len(xy) > 1:
            segs = np.stack([xy[:-1], xy[1:]], axis=1)
            lc = LineCollection(segs, cmap="viridis", linewidths=2.5)
            lc.set_array(np.asarray(poly["v"][:-1]))
            lc.set_clim(lo, hi if hi > lo else lo + 1e-9)
            ax.add_collection(lc)
        for p in data.get("planned", []):
            ax.plot(p["x"], p["y"], "--", color="tab:red", lw=1.0)
        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
    if title:
        axes[0, 0].set_title(title)
    if lc is not None:
        fig.colorbar(lc, ax=list(axes[:, 0]), orientation="horizontal", fraction=0.04, pad=0.02, label="speed [m/s]")
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_summary(table: Sequence[dict], path: str | Path, metric: str = "az_max") -> None:
    """Bar chart of one summary metric per method, grouped by scenario."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    scenarios = sorted({e["scenario"] for e in table})
    methods = sorted({e["method"] for e in table})
    width = 0.8 / max(len(methods), 1)
    fig, ax = plt.subplots(figsize=(1.5 + 1.4 * len(scenarios) * max(1, len(methods)) / 3, 3.5))
    lookup = {(e["scenario"], e["method"]): e[metric] for e in table}
    for j, m in enumerate(methods):
        means, errs = [], []
        for s in scenarios:
            st = lookup.get((s, m), {"mean": None, "std": None})
            means.append(st["mean"] if st["mean"] is not None else math.nan)
            errs.append(st["std"] if st["std"] is not None else 0.0)
        ax.bar(np.arange(len(scenarios)) + j * width, means, width, yerr=errs, label=m, capsize=2)
    ax.set_xticks(np.arange(len(scenarios)) + 0.4 - width / 2, scenarios)
    ax.set_ylabel(metric)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
