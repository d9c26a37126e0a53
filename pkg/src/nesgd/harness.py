"""Experiment orchestration: runs, baselines, reports, and their artifacts.

The orchestrator is the only writer of output files. Per-generation rows are
flushed as soon as they exist, so an interrupted run leaves behind every
completed generation. Fitness workers never touch the filesystem.

Artifacts of a run directory:
  manifest.json        config hash, tool version, seed, file inventory
  generations.csv      one row per generation (normative column order)
  individuals.csv      per-generation population roster, full-precision floats
  best_individual.json the best-ever individual
  best_weights.nesg    its retrained weights (binary checkpoint)
Baselines add baseline_runs.csv and baseline_summary.csv; reports add
report.svg and report.txt.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, build_dataset, config_hash
from .errors import DataError
from .evolution import Individual, RunResult, run
from .nn import build_model, evaluate_accuracy, sgd_train, write_checkpoint
from .seeding import derive_seed

GENERATION_COLUMNS = (
    "generation",
    "best_raw",
    "median_raw",
    "min_raw",
    "nabla",
    "suppressed_count",
    "best_genome",
    "wall_time_seconds",
)

INDIVIDUAL_COLUMNS = (
    "generation",
    "id",
    "birth_generation",
    "parent_ids",
    "genome",
    "raw_fitness",
    "adjusted_fitness",
)

SUMMARY_COLUMNS = (
    "minimum",
    "lower quartile",
    "median",
    "upper quartile",
    "maximum",
    "standard deviation",
)

RUN_FILES = (
    "manifest.json",
    "generations.csv",
    "individuals.csv",
    "best_individual.json",
    "best_weights.nesg",
)

BASELINE_FILES = ("manifest.json", "baseline_runs.csv", "baseline_summary.csv")


def fmt9(x: float) -> str:
    """Normative serialization for generation CSV floats: 9 significant digits."""
    return format(float(x), ".9g")


def fmt17(x: float) -> str:
    """Lossless float serialization for records that get recomputed exactly."""
    return format(float(x), ".17g")


def write_manifest(out_dir: Path, config: ExperimentConfig, files) -> None:
    manifest = {
        "config_hash": config_hash(config),
        "tool_version": __version__,
        "seed": config.seed,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "files": list(files),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def generation_row(log) -> str:
    return ",".join(
        [
            str(log.generation),
            fmt9(log.best_raw),
            fmt9(log.median_raw),
            fmt9(log.min_raw),
            fmt9(log.nabla),
            str(log.suppressed_count),
            log.best_genome,
            fmt9(log.wall_time_seconds),
        ]
    )


def individual_rows(generation: int, members: "list[Individual]") -> "list[str]":
    rows = []
    for ind in members:
        rows.append(
            ",".join(
                [
                    str(generation),
                    str(ind.id),
                    str(ind.birth_generation),
                    "|".join(str(p) for p in ind.parent_ids),
                    ind.genome.text,
                    fmt17(ind.raw_fitness),
                    fmt17(ind.adjusted_fitness) if ind.adjusted_fitness is not None else "",
                ]
            )
        )
    return rows


def run_experiment(
    config: ExperimentConfig, out_dir=None, parallel: int | None = None
) -> RunResult:
    """Execute a full evolutionary run and write all artifacts.

    Generation rows stream to disk as soon as each generation finishes.
    """
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out, config, RUN_FILES)
    dataset = build_dataset(config)
    degree = config.parallelism if parallel is None else parallel

    with open(out / "generations.csv", "w", encoding="ascii") as gen_fh, open(
        out / "individuals.csv", "w", encoding="ascii"
    ) as ind_fh:
        gen_fh.write(",".join(GENERATION_COLUMNS) + "\n")
        gen_fh.flush()
        ind_fh.write(",".join(INDIVIDUAL_COLUMNS) + "\n")
        ind_fh.flush()

        def on_generation(log, population):
            gen_fh.write(generation_row(log) + "\n")
            gen_fh.flush()
            for row in individual_rows(log.generation, population.members):
                ind_fh.write(row + "\n")
            ind_fh.flush()

        result = run(
            config.evolution,
            dataset,
            config.architecture,
            parallel=degree,
            on_generation=on_generation,
        )

    best = result.best
    with open(out / "best_individual.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "generation": best.birth_generation,
                "id": best.id,
                "genome": best.genome.text,
                "raw_fitness": best.raw_fitness,
                "adjusted_fitness": best.adjusted_fitness,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    write_checkpoint(out / "best_weights.nesg", result.best_snapshot)
    return result


def summary_statistics(values) -> dict:
    """The box-chart statistic set: min, quartiles, median, max, sample stdev.

    Quartiles use linear interpolation between order statistics. The standard
    deviation of a single value is reported as 0.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise DataError("no values to summarize")
    return {
        "minimum": float(arr.min()),
        "lower quartile": float(np.quantile(arr, 0.25)),
        "median": float(np.quantile(arr, 0.5)),
        "upper quartile": float(np.quantile(arr, 0.75)),
        "maximum": float(arr.max()),
        "standard deviation": float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0,
    }


def run_baseline(config: ExperimentConfig, out_dir=None, repeats: int | None = None) -> dict:
    """Train the architecture repeatedly with plain SGD and summarize accuracy.

    Each repeat gets fresh derived seeds for initialization and batch order;
    training uses the from-scratch rate for every block and the same epoch
    budget as a run's initial convergence phase. Returns the summary row.
    """
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = config.baseline_repeats if repeats is None else repeats
    if count < 1:
        raise DataError(f"repeat count must be >= 1, got {count}")
    write_manifest(out, config, BASELINE_FILES)
    dataset = build_dataset(config)

    accuracies = []
    with open(out / "baseline_runs.csv", "w", encoding="ascii") as fh:
        fh.write("run,seed,accuracy\n")
        fh.flush()
        for repeat in range(count):
            model_seed = derive_seed(config.seed, 0, repeat, "baseline_init")
            train_seed = derive_seed(config.seed, 0, repeat, "baseline_train")
            model = build_model(config.architecture, model_seed)
            rates = {b.block_id: config.train.lr_reinit for b in model.partition.blocks}
            train_cfg = replace(config.train, seed=train_seed)
            sgd_train(model, dataset.arrays("train"), train_cfg, rates)
            accuracy = evaluate_accuracy(model, dataset.arrays("validation"))
            accuracies.append(accuracy)
            fh.write(f"{repeat},{model_seed},{fmt17(accuracy)}\n")
            fh.flush()

    summary = summary_statistics(accuracies)
    with open(out / "baseline_summary.csv", "w", encoding="ascii") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        fh.write(",".join(fmt17(summary[c]) for c in SUMMARY_COLUMNS) + "\n")
    return summary


def read_csv_rows(path) -> "tuple[list[str], list[list[str]]]":
    text = Path(path).read_text(encoding="ascii")
    lines = [line for line in text.splitlines() if line]
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def mask_wall_time(csv_text: str) -> str:
    """Comparison form of a generation CSV with the wall-time column removed."""
    lines = [line for line in csv_text.splitlines() if line]
    header = lines[0].split(",")
    if "wall_time_seconds" not in header:
        return "\n".join(lines)
    keep = [i for i, name in enumerate(header) if name != "wall_time_seconds"]
    out = []
    for line in lines:
        cells = line.split(",")
        out.append(",".join(cells[i] for i in keep))
    return "\n".join(out)


def csv_equal_ignoring_wall_time(path_a, path_b) -> bool:
    a = mask_wall_time(Path(path_a).read_text(encoding="ascii"))
    b = mask_wall_time(Path(path_b).read_text(encoding="ascii"))
    return a == b


def _svg_series(points, color, dashed=False):
    fragments = []
    if len(points) > 1:
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        fragments.append(
            f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>'
        )
    for x, y in points:
        fragments.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}"/>')
    return fragments


def render_report_svg(rows, baseline_median: float | None = None) -> str:
    """Deterministic line chart of best/median/min fitness per generation."""
    width, height = 760, 440
    x0, x1 = 70.0, 560.0
    y0, y1 = 30.0, 380.0
    generations = [int(r["generation"]) for r in rows]
    series = [
        ("best", "#1b7837", [float(r["best_raw"]) for r in rows]),
        ("median", "#2166ac", [float(r["median_raw"]) for r in rows]),
        ("min", "#b2182b", [float(r["min_raw"]) for r in rows]),
    ]
    values = [v for _, _, ys in series for v in ys]
    if baseline_median is not None:
        values.append(baseline_median)
    vmin, vmax = min(values), max(values)
    if vmin == vmax:
        vmin, vmax = vmin - 0.05, vmax + 0.05
    pad = 0.05 * (vmax - vmin)
    vmin, vmax = vmin - pad, vmax + pad
    gmin, gmax = min(generations), max(generations)
    span = (gmax - gmin) or 1

    def sx(g):
        return x0 + (g - gmin) / span * (x1 - x0)

    def sy(v):
        return y1 - (v - vmin) / (vmax - vmin) * (y1 - y0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2:.2f}" y="{height - 10}" text-anchor="middle" '
        f'font-family="monospace" font-size="12">generation</text>',
        f'<text x="16" y="{(y0 + y1) / 2:.2f}" text-anchor="middle" font-family="monospace" '
        f'font-size="12" transform="rotate(-90 16 {(y0 + y1) / 2:.2f})">fitness</text>',
    ]
    stride = max(1, len(generations) // 20)
    for g in generations[::stride]:
        x = sx(g)
        parts.append(f'<line x1="{x:.2f}" y1="{y1}" x2="{x:.2f}" y2="{y1 + 5}" stroke="black"/>')
        parts.append(
            f'<text x="{x:.2f}" y="{y1 + 18}" text-anchor="middle" font-family="monospace" '
            f'font-size="10">{g}</text>'
        )
    for k in range(5):
        v = vmin + k * (vmax - vmin) / 4
        y = sy(v)
        parts.append(f'<line x1="{x0 - 5}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8}" y="{y + 3:.2f}" text-anchor="end" font-family="monospace" '
            f'font-size="10">{v:.4f}</text>'
        )
    if baseline_median is not None:
        y = sy(baseline_median)
        parts.extend(
            _svg_series([(x0, y), (x1, y)], "#777777", dashed=True)[:1]
        )
    for name, color, ys in series:
        points = [(sx(g), sy(v)) for g, v in zip(generations, ys)]
        parts.extend(_svg_series(points, color))
    legend = list(series)
    legend_entries = [(name, color) for name, color, _ in legend]
    if baseline_median is not None:
        legend_entries.append(("baseline median", "#777777"))
    for k, (name, color) in enumerate(legend_entries):
        y = y0 + 16 * k
        parts.append(f'<rect x="{x1 + 20}" y="{y:.2f}" width="10" height="10" fill="{color}"/>')
        parts.append(
            f'<text x="{x1 + 36}" y="{y + 9:.2f}" font-family="monospace" font-size="11">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_report_text(rows, baseline_median: float | None = None) -> str:
    best_values = [float(r["best_raw"]) for r in rows]
    best_overall = max(best_values)
    best_generation = int(rows[best_values.index(best_overall)]["generation"])
    lines = [
        f"generations: {len(rows)}",
        f"best accuracy: {fmt9(best_overall)} (generation {best_generation})",
        f"final spread (nabla): {rows[-1]['nabla']}",
        f"suppressions total: {sum(int(r['suppressed_count']) for r in rows)}",
    ]
    if baseline_median is not None:
        lines.append(f"baseline median: {fmt9(baseline_median)}")
    lines.append("")
    header = ("generation", "best_raw", "median_raw", "min_raw", "nabla", "suppressed")
    widths = [11, 12, 12, 12, 12, 10]
    lines.append("".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        cells = (
            r["generation"],
            r["best_raw"],
            r["median_raw"],
            r["min_raw"],
            r["nabla"],
            r["suppressed_count"],
        )
        lines.append("".join(str(c).ljust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines) + "\n"


def write_report(run_dir) -> "tuple[Path, Path]":
    """Render report.svg and report.txt from a run directory's CSV logs."""
    run_dir = Path(run_dir)
    gen_path = run_dir / "generations.csv"
    if not gen_path.exists():
        raise DataError(f"no generations.csv in {run_dir}")
    header, raw_rows = read_csv_rows(gen_path)
    if set(GENERATION_COLUMNS) - set(header):
        raise DataError(f"{gen_path} misses columns {set(GENERATION_COLUMNS) - set(header)}")
    if not raw_rows:
        raise DataError(f"{gen_path} has no generation rows")
    rows = [dict(zip(header, cells)) for cells in raw_rows]

    baseline_median = None
    baseline_path = run_dir / "baseline_summary.csv"
    if baseline_path.exists():
        bheader, brows = read_csv_rows(baseline_path)
        if brows and "median" in bheader:
            baseline_median = float(brows[0][bheader.index("median")])

    svg_path = run_dir / "report.svg"
    txt_path = run_dir / "report.txt"
    svg_path.write_text(render_report_svg(rows, baseline_median), encoding="utf-8")
    txt_path.write_text(render_report_text(rows, baseline_median), encoding="utf-8")
    return svg_path, txt_path
