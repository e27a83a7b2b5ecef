"""Batches of trials and the files they leave behind."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..errors import ConfigInvalid
from .pipeline import METHODS, Environment, RunMetrics, TrialResult, run_trial
from .report import (
    aggregate,
    export_plot_data,
    metrics_document,
    render_summary,
    write_json,
    write_metrics_csv,
    write_summary_csv,
)
from .scenario import ScenarioConfig, load_scenario

log = logging.getLogger(__name__)


def trial_stem(scenario: str, method: str, trial: int) -> str:
    return f"{scenario}_{method}_trial{trial}"


def run_trials(sc: ScenarioConfig, method: str, trials: int, seed: int, out_dir: str | Path | None = None,
               figures: bool = False, env: Environment | None = None) -> list[TrialResult]:
    """``trials`` runs of one method; trial ``i`` uses seed ``seed + i``.

    With ``out_dir`` set, each trial writes its rollout CSV and plot data.
    """
    env = env or Environment.build(sc)
    results = []
    for i in range(trials):
        res = run_trial(sc, method, i, seed + i, env)
        log.info("%s %s trial %d: success=%s progress=%.3f", sc.name, method, i,
                 res.metrics.success, res.metrics.progress)
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            stem = trial_stem(sc.name, method, i)
            res.log.to_csv(out / f"{stem}_rollout.csv")
            if len(res.log):
                export_plot_data(res, out, stem, figures=figures)
        results.append(res)
    return results


def write_tables(rows: Sequence[RunMetrics], out_dir: str | Path, figures: bool = False) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = metrics_document(rows)
    write_metrics_csv(rows, out / "metrics.csv")
    write_json(doc, out / "metrics.json")
    write_summary_csv(doc["summary"], out / "summary.csv")
    if figures and rows:
        render_summary(doc["summary"], out / "summary_az_max.png", "az_max")
    return doc


@dataclass(frozen=True)
class SuiteConfig:
    scenarios: tuple[str, ...]
    methods: tuple[str, ...] = METHODS
    trials: int | None = None
    seed: int | None = None
    out: str = "suite_out"
    figures: bool = True


def load_suite_config(path: str | Path) -> SuiteConfig:
    """Suite file: ``{"scenarios": [...], "methods": [...], "trials", "seed", "out", "figures"}``.

    Scenario entries are builtin names or paths relative to the suite file.
    Missing ``trials``/``seed`` fall back to each scenario's own ``sim`` block.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    allowed = {"scenarios", "methods", "trials", "seed", "out", "figures"}
    if not isinstance(data, dict) or set(data) - allowed:
        raise ConfigInvalid(f"suite keys must be a subset of {sorted(allowed)}")
    scen = data.get("scenarios") or []
    if not scen:
        raise ConfigInvalid("suite needs at least one scenario")
    resolved = []
    for s in scen:
        p = path.parent / s
        resolved.append(str(p) if p.exists() else s)
    methods = tuple(data.get("methods", METHODS))
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigInvalid(f"unknown methods {bad}")
    out = data.get("out", "suite_out")
    out = str(path.parent / out) if not Path(out).is_absolute() else out
    return SuiteConfig(tuple(resolved), methods, data.get("trials"), data.get("seed"), out,
                       bool(data.get("figures", True)))


def run_suite(scenarios: Sequence[ScenarioConfig | str], methods: Sequence[str], trials: int | None = None,
              seed: int | None = None, out_dir: str | Path | None = None, figures: bool = False) -> dict:
    """Every method on every scenario; returns ``{"trials": [...], "summary": [...]}``."""
    if not scenarios:
        raise ConfigInvalid("suite needs at least one scenario")
    rows: list[RunMetrics] = []
    for s in scenarios:
        sc = s if isinstance(s, ScenarioConfig) else load_scenario(s)
        n = sc.sim.trials if trials is None else trials
        base = sc.sim.seed if seed is None else seed
        env = Environment.build(sc)
        for m in methods:
            rows += [r.metrics for r in run_trials(sc, m, n, base, out_dir, figures, env)]
    if out_dir is not None:
        return write_tables(rows, out_dir, figures)
    return metrics_document(rows)


def run_suite_config(cfg: SuiteConfig) -> dict:
    return run_suite(cfg.scenarios, cfg.methods, cfg.trials, cfg.seed, cfg.out, cfg.figures)


__all__ = ["SuiteConfig", "aggregate", "load_suite_config", "run_suite", "run_suite_config", "run_trials",
           "trial_stem", "write_tables"]
