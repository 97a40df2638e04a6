"""
Render harness CSV files as SVG.

Output is deterministic: fixed figure size, text kept as SVG text, a fixed
hash salt for element ids and no creation date.
"""

import enum

import matplotlib
import numpy as np
from matplotlib.figure import Figure
from matplotlib.patches import Circle
from scipy import stats

from dispectral.harness import (
    HISTOGRAM_COLUMNS,
    SPECTRUM_COLUMNS,
    THRESHOLD_MAP_COLUMNS,
    read_table,
)


FIGURE_SIZE = (6.4, 4.8)
SVG_PARAMETERS = {
    "svg.fonttype": "none",
    "svg.hashsalt": "dispectral",
    "path.simplify": False,
}
CIRCLE_COLOR = "#f5deb3"
EXPECTED_COLOR = "#8b4513"
CURVE_POINTS = 400


class PlotKind(enum.Enum):
    OVERLAP_CURVES = "overlap-curves"
    SPECTRUM_SCATTER = "spectrum-scatter"
    THRESHOLD_MAP = "threshold-map"
    HISTOGRAM = "histogram"


REQUIRED_COLUMNS = {
    PlotKind.OVERLAP_CURVES: ("eta", "i", "j", "overlap", "predicted"),
    PlotKind.SPECTRUM_SCATTER: SPECTRUM_COLUMNS,
    PlotKind.THRESHOLD_MAP: THRESHOLD_MAP_COLUMNS,
    PlotKind.HISTOGRAM: HISTOGRAM_COLUMNS,
}


def _overlap_curves(axes, frame):
    if "side" in frame.columns:
        frame = frame[frame["side"] == "right"]
    diagonal = frame[frame["i"] == frame["j"]]
    for (i, j), rows in diagonal.groupby(["i", "j"], sort=True):
        by_eta = rows.groupby("eta", sort=True)
        mean = by_eta["overlap"].mean()
        axes.plot(mean.index, mean.values, marker=".", label=f"|<u{i}, phi{j}>|")
        predicted = by_eta["predicted"].mean().dropna()
        if not predicted.empty:
            axes.plot(
                predicted.index,
                predicted.values,
                linewidth=4,
                alpha=0.4,
                label=f"a{i}{j} predicted",
            )
    axes.set_xlabel("eta")
    axes.set_ylabel("overlap")
    axes.set_ylim(0, 1.05)
    if not diagonal.empty:
        axes.legend(loc="best")


def _spectrum_scatter(axes, frame):
    samples = frame[frame["kind"] == "sample"]
    axes.scatter(
        samples["re"].to_numpy(dtype=float),
        samples["im"].to_numpy(dtype=float),
        s=8,
        color="black",
        zorder=3,
        label="sample",
    )
    threshold = frame.loc[frame["kind"] == "threshold", "re"]
    if not threshold.empty:
        radius = float(threshold.iloc[0])
        axes.add_patch(Circle((0, 0), radius, color=CIRCLE_COLOR, zorder=1))
    for value in frame.loc[frame["kind"] == "expected", "re"]:
        axes.axvline(float(value), color=EXPECTED_COLOR, linewidth=1, zorder=2)
    axes.set_xlabel("Re")
    axes.set_ylabel("Im")
    axes.set_aspect("equal", adjustable="datalim")


def _threshold_map(axes, frame):
    finite = frame[~frame["infinite"].astype(bool)]
    for r_blocks, rows in finite.groupby("r", sort=True):
        rows = rows.sort_values("eta")
        axes.plot(rows["eta"], rows["rhs"], linewidth=1, label=f"r={r_blocks}")
    axes.set_yscale("log")
    axes.set_xlabel("eta")
    axes.set_ylabel("detection threshold on s / r")


def _histogram(figure, frame):
    indices = sorted(frame["eigen_index"].unique())
    if not indices:
        figure.add_subplot(1, 1, 1)
        return
    for position, index in enumerate(indices, start=1):
        axes = figure.add_subplot(1, len(indices), position)
        rows = frame[frame["eigen_index"] == index]
        for cluster, cluster_rows in rows.groupby("cluster", sort=True):
            left = cluster_rows["bin_left"].to_numpy()
            width = cluster_rows["bin_right"].to_numpy() - left
            axes.bar(
                left,
                cluster_rows["density"],
                width=width,
                align="edge",
                alpha=0.6,
                label=f"cluster {cluster}",
            )
        components = rows.drop_duplicates("cluster")
        grid = np.linspace(rows["bin_left"].min(), rows["bin_right"].max(), CURVE_POINTS)
        mixture = np.zeros_like(grid)
        for _, component in components.iterrows():
            if component["sigma2"] > 0:
                density = component["weight"] * stats.norm.pdf(
                    grid, component["mu"], np.sqrt(component["sigma2"])
                )
                mixture += density
                axes.plot(grid, density, color="grey", linewidth=1)
        axes.plot(grid, mixture, color="dimgrey", linewidth=2)
        axes.set_xlabel(f"sqrt(n) u{index}")
        axes.set_ylabel("density")


def render(frame, kind):
    """Draw a checked frame; returns the matplotlib Figure."""
    kind = PlotKind(kind)
    figure = Figure(figsize=FIGURE_SIZE)
    if kind is PlotKind.HISTOGRAM:
        _histogram(figure, frame)
    else:
        axes = figure.add_subplot(1, 1, 1)
        {
            PlotKind.OVERLAP_CURVES: _overlap_curves,
            PlotKind.SPECTRUM_SCATTER: _spectrum_scatter,
            PlotKind.THRESHOLD_MAP: _threshold_map,
        }[kind](axes, frame)
    figure.tight_layout()
    return figure


def save_svg(figure, file_path):
    with matplotlib.rc_context(SVG_PARAMETERS):
        figure.savefig(file_path, format="svg", metadata={"Date": None})


def plot(csv_path, kind, out_path):
    """
    Render csv_path as an SVG of the given kind.

    :raise SchemaError: when the CSV lacks a column the kind needs.
    """
    kind = PlotKind(kind)
    frame = read_table(csv_path, REQUIRED_COLUMNS[kind], kind=kind.value)
    save_svg(render(frame, kind), out_path)
