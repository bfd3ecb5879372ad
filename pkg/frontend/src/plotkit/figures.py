"""Figure builders over the benchmark CSV tables.

Rendering is read-only over the CSVs and deterministic: SVG output carries
no timestamps and a fixed hash salt, so re-rendering the same spec is
byte-identical.  No numerical processing happens here beyond unit scaling
for display.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "plotkit"
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "FIGURE_KINDS", "load_table", "render"]

FIGURE_KINDS = ("snapshot", "stress", "convergence", "condition", "history",
                "timing")


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: figure kind, input CSVs, series selection, axes."""

    kind: str
    inputs: dict[str, str]                 # table name -> csv path
    output: str
    formulations: tuple[str, ...] = ()
    n_elements: tuple[int, ...] = ()
    x_scale: str = "linear"
    y_scale: str = "linear"
    title: str = ""
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "FigureSpec":
        known = {"kind", "inputs", "output", "formulations", "n_elements",
                 "x_scale", "y_scale", "title", "options"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown figure spec keys {sorted(unknown)}")
        if raw.get("kind") not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {raw.get('kind')!r}; choose from {FIGURE_KINDS}")
        return cls(kind=raw["kind"], inputs=dict(raw["inputs"]),
                   output=raw["output"],
                   formulations=tuple(raw.get("formulations", ())),
                   n_elements=tuple(raw.get("n_elements", ())),
                   x_scale=raw.get("x_scale", "linear"),
                   y_scale=raw.get("y_scale", "linear"),
                   title=raw.get("title", ""),
                   options=dict(raw.get("options", {})))


def load_table(path: str | Path, required: tuple[str, ...]) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input table not found: {path}")
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        columns = reader.fieldnames or []
        missing = [c for c in required if c not in columns]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        rows = []
        for raw in reader:
            row = {}
            for key, value in raw.items():
                if value is None or value == "":
                    row[key] = None
                else:
                    try:
                        row[key] = float(value)
                    except ValueError:
                        row[key] = value
            rows.append(row)
    return rows


def _select(rows, spec: FigureSpec):
    out = rows
    if spec.formulations:
        out = [r for r in out if r.get("formulation") in spec.formulations]
    if spec.n_elements:
        wanted = {float(n) for n in spec.n_elements}
        out = [r for r in out if r.get("n_elements") in wanted]
    if not out:
        raise ValueError(
            f"series selection matched no rows (formulations={spec.formulations}, "
            f"n_elements={spec.n_elements})")
    return out


def _series_labels(rows):
    return sorted({r["formulation"] for r in rows})


def _new_axes(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.4, 4.2), constrained_layout=True)
    ax.set_xscale(spec.x_scale)
    ax.set_yscale(spec.y_scale)
    if spec.title:
        ax.set_title(spec.title)
    return fig, ax


def _draw_snapshot(spec: FigureSpec, ax):
    rows = _select(load_table(spec.inputs["snapshots"],
                              ("formulation", "step", "s", "x", "z")), spec)
    plane = spec.options.get("plane", "xz")
    second = {"xz": "z", "xy": "y"}[plane]
    for label in _series_labels(rows):
        sub = [r for r in rows if r["formulation"] == label]
        for step in sorted({r["step"] for r in sub}):
            pts = sorted((r for r in sub if r["step"] == step),
                         key=lambda r: r["s"])
            ax.plot([p["x"] for p in pts], [p[second] for p in pts],
                    label=f"{label} step {step:g}")
    ax.set_xlabel("x [m]")
    ax.set_ylabel(f"{second} [m]")
    ax.set_aspect("equal", adjustable="datalim")


def _draw_stress(spec: FigureSpec, ax):
    rows = _select(load_table(spec.inputs["stress"],
                              ("formulation", "s", "axial", "bending_norm")), spec)
    component = spec.options.get("component", "axial")
    for label in _series_labels(rows):
        pts = sorted((r for r in rows if r["formulation"] == label),
                     key=lambda r: r["s"])
        ax.plot([p["s"] for p in pts], [p[component] for p in pts], label=label)
    ax.set_xlabel("arclength [m]")
    ax.set_ylabel({"axial": "axial resultant [N]",
                   "axial_norm": "|axial| [N]",
                   "bending_norm": "|bending moment| [N m]"}[component])


def _draw_convergence(spec: FigureSpec, ax):
    rows = _select(load_table(spec.inputs["norms"],
                              ("formulation", "n_elements", "l2", "h1", "h2")),
                   spec)
    norms = spec.options.get("norms", ["l2", "h1", "h2"])
    for label in _series_labels(rows):
        pts = sorted((r for r in rows if r["formulation"] == label),
                     key=lambda r: r["n_elements"])
        for norm in norms:
            ax.plot([p["n_elements"] for p in pts], [p[norm] for p in pts],
                    marker="o", label=f"{label} {norm.upper()}")
    ax.set_xlabel("elements")
    ax.set_ylabel("relative error")


def _draw_condition(spec: FigureSpec, ax):
    rows = _select(load_table(spec.inputs["condition"],
                              ("formulation", "regime", "parameter", "value",
                               "estimate")), spec)
    parameter = spec.options.get("parameter", "penalty_factor")
    regime = spec.options.get("regime", "static")
    swept = [r for r in rows if r["parameter"] == parameter
             and r["regime"] == regime]
    flat = [r for r in rows if r["parameter"] == "none" and r["regime"] == regime]
    if not swept:
        raise ValueError(f"no rows sweep parameter {parameter!r} in regime {regime!r}")
    for label in _series_labels(swept):
        pts = sorted((r for r in swept if r["formulation"] == label),
                     key=lambda r: r["value"])
        ax.plot([p["value"] for p in pts], [p["estimate"] for p in pts],
                marker="o", label=label)
    span = sorted({r["value"] for r in swept})
    for ref in flat:
        ax.plot([span[0], span[-1]], [ref["estimate"]] * 2, linestyle="--",
                label=f"{ref['formulation']} (reference)")
    ax.set_xlabel(parameter)
    ax.set_ylabel("condition estimate")


def _draw_history(spec: FigureSpec, ax):
    table = spec.options.get("table", "energy")
    fields = spec.options.get("fields", ["total"] if table == "energy" else ["z"])
    rows = _select(load_table(spec.inputs[table],
                              ("formulation", "time", *fields)), spec)
    for label in _series_labels(rows):
        pts = sorted((r for r in rows if r["formulation"] == label),
                     key=lambda r: r["time"])
        for name in fields:
            ax.plot([p["time"] for p in pts], [p[name] for p in pts],
                    label=f"{label} {name}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel(", ".join(fields))


def _draw_timing(spec: FigureSpec, ax):
    rows = _select(load_table(spec.inputs["stats"],
                              ("formulation", "n_elements",
                               "mean_time_per_iter_s")), spec)
    labels = _series_labels(rows)
    meshes = sorted({r["n_elements"] for r in rows})
    width = 0.8 / len(labels)
    for i, label in enumerate(labels):
        sub = {r["n_elements"]: r["mean_time_per_iter_s"] for r in rows
               if r["formulation"] == label}
        xs = np.arange(len(meshes)) + i * width
        ax.bar(xs, [sub.get(m, 0.0) for m in meshes], width=width, label=label)
    ax.set_xticks(np.arange(len(meshes)) + 0.4 - width / 2)
    ax.set_xticklabels([f"{int(m)}" for m in meshes])
    ax.set_xlabel("elements")
    ax.set_ylabel("mean time per iteration [s]")


_DRAWERS = {
    "snapshot": _draw_snapshot,
    "stress": _draw_stress,
    "convergence": _draw_convergence,
    "condition": _draw_condition,
    "history": _draw_history,
    "timing": _draw_timing,
}


def render(spec: FigureSpec) -> Path:
    """Draw the figure and write it to the spec's output path."""
    fig, ax = _new_axes(spec)
    try:
        _DRAWERS[spec.kind](spec, ax)
        ax.legend(loc="best", fontsize=8)
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, format=out.suffix.lstrip(".") or "svg",
                    metadata={"Date": None} if out.suffix == ".svg" else None)
    finally:
        plt.close(fig)
    return Path(spec.output)
