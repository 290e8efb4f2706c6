"""Dataset analogs and the learning-trend / generalization experiments.

Three pooled datasets are built from scripted-expert demonstrations:

* D1: 2x2 tiles at the original anchor
* D2: D1 plus 1x1 tiles at the original anchor
* D3: D2 plus 2x2 tiles at the new anchor

Every dataset is pooled onto whichever anchor the bundle is trained for.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cloud.pooling import PooledDataset, pool_for_task
from .demo import Demonstration, TaskParameters, fmt
from .errors import InvalidArgument
from .models import evaluate_bundle, train_bundle
from .sim import batch_success_rate, scripted_expert

ORIGINAL_ANCHOR = (2.95, 1.5, 2.0)
NEW_ANCHOR = (3.5, 2.0, 2.0)
TILE_2X2 = 0.6096
TILE_1X1 = 0.3048
DEMO_NOISE = 0.0005
DATASETS = ("D1", "D2", "D3")


@dataclass(frozen=True)
class ExperimentConfig:
    original_anchor: tuple[float, float, float] = ORIGINAL_ANCHOR
    new_anchor: tuple[float, float, float] = NEW_ANCHOR
    demos_per_group: int = 5
    heldout_count: int = 2
    noise_sigma: float = DEMO_NOISE
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    checkpoints: tuple[int, ...] = (10, 50, 100)
    epochs: int = 500
    trials: int = 20

    def __post_init__(self) -> None:
        if self.demos_per_group < 1 or self.heldout_count < 1:
            raise InvalidArgument("demo counts must be >= 1")
        if list(self.checkpoints) != sorted(set(self.checkpoints)) or not self.checkpoints:
            raise InvalidArgument("checkpoints must be non-empty and strictly ascending")
        if self.trials < 1:
            raise InvalidArgument("trials must be >= 1")

    def scenario(self, name: str) -> TaskParameters:
        table = {
            "orig-2x2": (TILE_2X2, self.original_anchor),
            "orig-1x1": (TILE_1X1, self.original_anchor),
            "new-2x2": (TILE_2X2, self.new_anchor),
        }
        if name not in table:
            raise InvalidArgument(f"unknown scenario {name!r}")
        w, anchor = table[name]
        return TaskParameters(name, w, w, tuple(float(v) for v in anchor))


GROUP_SEEDS = {"orig-2x2": 1000, "orig-1x1": 2000, "new-2x2": 3000}
HELDOUT_SEED = 9000


def demo_group(config: ExperimentConfig, scenario: str, count: int | None = None,
               base_seed: int | None = None) -> list[Demonstration]:
    params = config.scenario(scenario)
    base = GROUP_SEEDS[scenario] if base_seed is None else base_seed
    n = config.demos_per_group if count is None else count
    return [scripted_expert(params, noise_sigma=config.noise_sigma, seed=base + i,
                            demo_id=f"{scenario}-{i:03d}") for i in range(n)]


def build_datasets(config: ExperimentConfig, target: TaskParameters,
                   groups: dict[str, list[Demonstration]] | None = None) -> dict[str, PooledDataset]:
    """D1/D2/D3 pooled onto ``target``; demos already at the target anchor count as local."""
    groups = groups or {g: demo_group(config, g) for g in GROUP_SEEDS}
    members = {
        "D1": groups["orig-2x2"],
        "D2": groups["orig-2x2"] + groups["orig-1x1"],
        "D3": groups["orig-2x2"] + groups["orig-1x1"] + groups["new-2x2"],
    }
    out = {}
    for name, demos in members.items():
        local = [d for d in demos if d.params.grid_anchor == target.grid_anchor]
        related = [d for d in demos if d.params.grid_anchor != target.grid_anchor]
        pooled = pool_for_task(target, local, related, min_count=1, dataset_id=f"{name}-{target.task_id}")
        out[name] = pooled
    return out


def heldout_demos(config: ExperimentConfig, target: TaskParameters | None = None) -> list[Demonstration]:
    """Fresh demos from every scenario group, pooled onto ``target`` like the training data."""
    target = target or config.scenario("orig-2x2")
    demos = []
    for g, base in GROUP_SEEDS.items():
        demos += demo_group(config, g, config.heldout_count, HELDOUT_SEED + base)
    return list(pool_for_task(target, demos, [], min_count=1, dataset_id="heldout").demos)


# --- learning trend -------------------------------------------------------------------

@dataclass(frozen=True)
class TrendRow:
    dataset: str
    seed: int
    epoch: int
    error: float
    seconds: float


def learning_trend(config: ExperimentConfig, checkpoints: Sequence[int] | None = None) -> list[TrendRow]:
    """Train every dataset for every seed; evaluate held-out error at each checkpoint."""
    checkpoints = tuple(checkpoints or config.checkpoints)
    target = config.scenario("orig-2x2")
    datasets = build_datasets(config, target)
    heldout = heldout_demos(config, target)
    rows = []
    for seed in config.seeds:
        for name in DATASETS:
            run = train_bundle(datasets[name], epochs=max(checkpoints), seed=seed, checkpoints=checkpoints)
            for c in checkpoints:
                err = evaluate_bundle(run.snapshots[c], heldout).mean_error
                rows.append(TrendRow(name, seed, c, err, run.seconds[c]))
    return rows


def ordering_holds(rows: Sequence[TrendRow], seed: int, epoch: int) -> bool:
    err = {r.dataset: r.error for r in rows if r.seed == seed and r.epoch == epoch}
    return err["D3"] <= err["D2"] <= err["D1"]


def ordering_fraction(rows: Sequence[TrendRow], epoch: int) -> float:
    seeds = sorted({r.seed for r in rows})
    return sum(ordering_holds(rows, s, epoch) for s in seeds) / len(seeds)


def learning_summary(rows: Sequence[TrendRow]) -> list[dict]:
    """Per dataset: mean/variance of seconds-to-checkpoint and of held-out error."""
    out = []
    for name in DATASETS:
        sel = [r for r in rows if r.dataset == name]
        if not sel:
            continue
        secs = np.array([r.seconds for r in sel])
        errs = np.array([r.error for r in sel])
        out.append({"dataset": name, "training_time_mean": float(secs.mean()),
                    "training_time_var": float(secs.var()), "error_mean": float(errs.mean()),
                    "error_var": float(errs.var())})
    return out


# --- generalization -------------------------------------------------------------------

@dataclass(frozen=True)
class GeneralizationRow:
    dataset: str
    location: str
    success_rate: float
    dominant_failure: str
    mean_final_offset: float


@dataclass
class GeneralizationResult:
    rows: list[GeneralizationRow]
    reports: dict = field(default_factory=dict)

    def rate(self, dataset: str, location: str) -> float:
        return next(r.success_rate for r in self.rows if r.dataset == dataset and r.location == location)

    def row(self, dataset: str, location: str) -> GeneralizationRow:
        return next(r for r in self.rows if r.dataset == dataset and r.location == location)


def generalization(config: ExperimentConfig, seed: int = 0, datasets: Sequence[str] = ("D1", "D3"),
                   epochs: int | None = None) -> GeneralizationResult:
    """Success rates of bundles trained for each location, evaluated at that location."""
    epochs = epochs or config.epochs
    groups = {g: demo_group(config, g) for g in GROUP_SEEDS}
    rows, reports = [], {}
    for location, scen in (("original", "orig-2x2"), ("new", "new-2x2")):
        target = config.scenario(scen)
        pools = build_datasets(config, target, groups)
        for name in datasets:
            bundle = train_bundle(pools[name], epochs=epochs, seed=seed).bundle
            rep = batch_success_rate(bundle, target, trials=config.trials, seed=seed,
                                     label=f"{name}@{location}")
            reports[(name, location)] = rep
            rows.append(GeneralizationRow(name, location, rep.success_rate, rep.dominant_failure,
                                          rep.mean_final_offset))
    return GeneralizationResult(rows, reports)


# --- output ---------------------------------------------------------------------------

def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> bytes:
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(fmt(r[c]) if isinstance(r[c], float) else str(r[c]) for c in columns))
    return ("\n".join(lines) + "\n").encode("utf-8")


def error_plot_svg(rows: Sequence[TrendRow], width: int = 640, height: int = 400,
                   title: str = "Training error by dataset") -> str:
    """Self-contained SVG line chart: mean held-out error vs epoch, one series per dataset."""
    series = {}
    for name in DATASETS:
        epochs = sorted({r.epoch for r in rows if r.dataset == name})
        if epochs:
            series[name] = [(e, float(np.mean([r.error for r in rows if r.dataset == name and r.epoch == e])))
                            for e in epochs]
    if not series:
        raise InvalidArgument("no rows to plot")
    xs = [e for pts in series.values() for e, _ in pts]
    ys = [v for pts in series.values() for _, v in pts]
    x0, x1 = min(xs), max(xs)
    y1 = max(ys) * 1.05 or 1.0
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (pw * (x - x0) / (x1 - x0) if x1 > x0 else pw / 2)

    def sy(y):
        return top + ph * (1.0 - y / y1)

    colors = {"D1": "#d62728", "D2": "#1f77b4", "D3": "#2ca02c"}
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" '
           f'font-size="15">{title}</text>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
           f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" '
           f'font-size="12">epoch</text>',
           f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
           f'transform="rotate(-90 16 {top + ph / 2:.1f})">mean trajectory error (m)</text>']
    for e in sorted(set(xs)):
        out.append(f'<text x="{sx(e):.1f}" y="{top + ph + 16}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="10">{e}</text>')
    for k in range(5):
        v = y1 * k / 4
        out.append(f'<text x="{left - 6}" y="{sy(v) + 3:.1f}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="10">{v:.3g}</text>')
    for i, (name, pts) in enumerate(series.items()):
        path = " ".join(f"{sx(e):.1f},{sy(v):.1f}" for e, v in pts)
        c = colors.get(name, "black")
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="2" points="{path}"/>')
        out.append(f'<text x="{left + pw - 40}" y="{top + 14 + 14 * i}" font-family="sans-serif" '
                   f'font-size="11" fill="{c}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

