"""Renderers for the experiment CSV artifacts.

Strictly file-coupled: this package never imports the simulation code, it
only understands the published CSV schemas.  Unknown columns are ignored;
missing required columns are fatal (SchemaError).  Rendering is
deterministic: identical inputs and style produce identical image bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib import cm, colors

KINDS = ("trajectory", "distance-curves", "heatmap", "slopes", "rates")

# divergence cells (abscissa >= 0) are painted solid black
DIVERGENCE_RGBA = (0.0, 0.0, 0.0, 1.0)


class SchemaError(ValueError):
    """Input file does not match the expected column schema."""


@dataclass
class PlotJob:
    kind: str
    inputs: list
    output: str
    overlay: str | None = None  # heatmap: analytic boundary; trajectory: slope grid
    log_y: bool | None = None
    title: str | None = None
    dpi: int = 120
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown plot kind {self.kind!r}; have {KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input file is required")


def read_table(path, required):
    """Load a CSV with a header row; returns {column: float array}.

    Raises SchemaError if any required column is absent.  Extra columns are
    kept (callers ignore what they do not understand).
    """
    path = Path(path)
    with open(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing required columns {missing} (have {header})")
        rows = []
        for row in reader:
            if row:
                rows.append(row)
    cols = {}
    for j, name in enumerate(header):
        raw = [r[j] for r in rows]
        try:
            cols[name] = np.array([float(v) for v in raw])
        except ValueError:
            cols[name] = np.array(raw)  # non-numeric column (e.g. scheme)
    return cols


def _finish(fig, job):
    if job.title:
        fig.suptitle(job.title)
    out = Path(job.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=job.dpi)
    plt.close(fig)
    return out


def render_trajectory(job):
    fig, ax = plt.subplots(figsize=(5, 4.2))
    if job.overlay:
        bg = read_table(job.overlay, ("x", "y", "slope"))
        xs = np.unique(bg["x"])
        ys = np.unique(bg["y"])
        grid = np.full((ys.size, xs.size), np.nan)
        xi = np.searchsorted(xs, bg["x"])
        yi = np.searchsorted(ys, bg["y"])
        grid[yi, xi] = bg["slope"]
        ax.pcolormesh(xs, ys, grid, cmap="magma_r", shading="nearest", rasterized=True)
    for path in job.inputs:
        tab = read_table(path, ("index", "t", "x_0", "y_0"))
        ax.plot(tab["x_0"], tab["y_0"], lw=0.8, label=Path(path).stem)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if len(job.inputs) > 1:
        ax.legend(fontsize=6)
    return _finish(fig, job)


def render_distance_curves(job):
    fig, ax = plt.subplots(figsize=(5, 4))
    for path in job.inputs:
        tab = read_table(path, ("step",))
        series = [c for c in tab if c.startswith("dist")]
        if not series:
            raise SchemaError(f"{path}: no dist_* columns")
        stem = Path(path).stem
        for name in series:
            label = name if len(job.inputs) == 1 else f"{stem}:{name}"
            ax.plot(tab["step"], tab[name], lw=1.0, label=label)
    if job.log_y is not False:
        ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("distance")
    ax.legend(fontsize=7)
    return _finish(fig, job)


def heatmap_rgba(betas, hs, grid, cmap_name="viridis"):
    """RGBA colors for a stability map; cells with abscissa >= 0 are black.

    Convergent cells are colored by magnitude of the (negative) abscissa.
    """
    neg = np.ma.masked_array(grid, mask=grid >= 0)
    if neg.count():
        norm = colors.Normalize(vmin=float(neg.min()), vmax=0.0)
    else:
        norm = colors.Normalize(vmin=-1.0, vmax=0.0)
    mapper = cm.ScalarMappable(norm=norm, cmap=cmap_name)
    rgba = mapper.to_rgba(grid)
    rgba[grid >= 0] = DIVERGENCE_RGBA
    return rgba


def render_heatmap(job):
    tab = read_table(job.inputs[0], ("beta", "h", "abscissa"))
    betas = np.unique(tab["beta"])
    hs = np.unique(tab["h"])
    grid = np.full((betas.size, hs.size), np.nan)
    bi = np.searchsorted(betas, tab["beta"])
    hi = np.searchsorted(hs, tab["h"])
    grid[bi, hi] = tab["abscissa"]
    if np.isnan(grid).any():
        raise SchemaError(f"{job.inputs[0]}: (beta, h) grid is not complete")

    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    rgba = heatmap_rgba(betas, hs, grid)
    # x axis: momentum, y axis: step size
    ax.pcolormesh(betas, hs, np.transpose(rgba, (1, 0, 2)), shading="nearest", rasterized=True)
    ax.set_yscale("log")
    if job.overlay:
        bnd = read_table(job.overlay, ("beta", "hmax"))
        if bnd["beta"].size:  # empty overlay file: no boundary known
            order = np.argsort(bnd["beta"])
            ax.plot(bnd["beta"][order], bnd["hmax"][order], "w--", lw=1.2, label="analytic bound")
            ax.legend(fontsize=7, loc="upper right")
    ax.set_xlabel("momentum")
    ax.set_ylabel("step size")
    return _finish(fig, job)


def render_slopes(job):
    fig, ax = plt.subplots(figsize=(5, 4))
    for path in job.inputs:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        if "avg_slope" in header and "beta" in header:
            tab = read_table(path, ("beta", "scheme", "avg_slope"))
            schemes = sorted(set(tab["scheme"].tolist()))
            for scheme in schemes:
                mask = tab["scheme"] == scheme
                order = np.argsort(tab["beta"][mask])
                ax.plot(
                    tab["beta"][mask][order],
                    tab["avg_slope"][mask][order],
                    marker="o",
                    label=str(scheme),
                )
            ax.set_xlabel("momentum")
        else:
            tab = read_table(path, ("step", "avg_slope"))
            ax.plot(tab["step"], tab["avg_slope"], label=Path(path).stem)
            ax.set_xlabel("step")
    ax.set_ylabel("average slope")
    if job.log_y:
        ax.set_yscale("log")
    ax.legend(fontsize=7)
    return _finish(fig, job)


def render_rates(job):
    fig, ax = plt.subplots(figsize=(5, 4))
    tab = read_table(job.inputs[0], ("step", "dist_sim", "dist_alt"))
    ax.plot(tab["step"], tab["dist_sim"], label="simultaneous")
    ax.plot(tab["step"], tab["dist_alt"], label="alternating")
    if job.log_y is not False:
        ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("distance to equilibrium")
    ax.legend(fontsize=8)
    return _finish(fig, job)


RENDERERS = {
    "trajectory": render_trajectory,
    "distance-curves": render_distance_curves,
    "heatmap": render_heatmap,
    "slopes": render_slopes,
    "rates": render_rates,
}


def render(job: PlotJob) -> Path:
    """Render one job to its output image; returns the written path."""
    return RENDERERS[job.kind](job)
