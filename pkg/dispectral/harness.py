"""
Monte Carlo harness: parameter sweeps, validation runs and their tables.

Every task of a sweep draws its randomness from
derive_seed(master_seed, point_index, run_index), so results do not depend
on the number of threads. Tasks run in a thread pool; their rows are
written by the calling thread in task order, one task group at a time,
so an interrupted CSV can be resumed.
"""

import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from dispectral.baselines import simpleherm_cluster, svd_cluster
from dispectral.clustering import adjusted_overlap, cluster_digraph
from dispectral.config import EXPERIMENT_METHODS
from dispectral.eigen import top_eigenpairs
from dispectral.errors import DispectralError, SchemaError, ValidationError
from dispectral.graph import sample, two_block_spec
from dispectral.presets import ModelKind, build_model, round_to_blocks
from dispectral.rng import derive_seed, seed_to_int, spawn_seeds
from dispectral.theory import (
    calibrate_s,
    expected_spectrum,
    limit_moments,
    overlap_prediction,
    pathwise_detection_threshold,
    pathwise_mean_degree,
    sample_overlaps,
)


FLOAT_FORMAT = "%.17g"
LAMBDA_COUNT = 4
RECORD_COLUMNS = (
    "run_id",
    "point",
    "run",
    "n",
    "r_blocks",
    "s",
    "eta",
    "d_target",
    "method",
    "seed",
    "r0_used",
    "aov",
    "lambda_values",
    "runtime_ms",
    "error",
)
OVERLAP_COLUMNS = (
    "eta",
    "run",
    "seed",
    "r0",
    "side",
    "i",
    "j",
    "overlap",
    "predicted",
    "informative",
)
HISTOGRAM_COLUMNS = (
    "eigen_index",
    "cluster",
    "bin_left",
    "bin_right",
    "count",
    "density",
    "weight",
    "mu",
    "sigma2",
)
THRESHOLD_MAP_COLUMNS = ("r", "eta", "rhs", "infinite")
SPECTRUM_COLUMNS = ("kind", "re", "im")
THRESHOLD_MAP_BLOCKS = range(2, 33)


class ShowProgress:
    """
    Show progress through a progress bar, as a context manager.

    Return the progress bar object on context enter, allowing the
    caller to call next().

    Allow to supply the desired progress bar as None, to disable
    progress bar output.
    """

    class _NoProgressBar:
        """
        Stub to replace a real progress.bar.Bar.

        Use this if you don't want progress bar output, or if
        there's an ImportError of progress module.
        """

        def next(self):  # noqa
            """Do nothing; be compatible to progress.bar.Bar."""

        def finish(self):
            """Do nothing; be compatible to progress.bar.Bar."""

    def __init__(self, progress_bar_type):
        """
        Construct the context manager object.

        :param progress_bar_type type: Type of progress bar to use.
           Set to None if you don't want progress bar output.
        """
        self.progress_bar_type = progress_bar_type
        self.progress_bar = None

    def __call__(self, message, maximum):
        """
        Return a context manager for a progress bar.

        :param str message: Message to show next to the progress bar.
        :param int maximum: Number of tasks at 100%.
        :return ShowProgress: Context manager object.
        """
        if not self.progress_bar_type:
            self.progress_bar = self._NoProgressBar()
        else:
            self.progress_bar = self.progress_bar_type(
                message, max=maximum, suffix="%(index)d/%(max)d"
            )

        return self

    def __enter__(self):
        """Enter context: return progress bar to allow calling next()."""
        return self.progress_bar

    def __exit__(self, exc_type, exc_val, exc_tb):
        """Exit context: clean up by finish()ing the progress bar."""
        self.progress_bar.finish()


def default_threads():
    return os.cpu_count() or 1


def write_table(file_path, rows, columns):
    """Write rows (dicts) as a UTF-8 CSV with a header and 17-digit floats."""
    frame = pd.DataFrame(list(rows), columns=list(columns))
    with open(file_path, "w", encoding="utf-8", newline="") as file:
        frame.to_csv(
            file, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n"
        )


def _append_rows(file, rows, columns):
    frame = pd.DataFrame(rows, columns=list(columns))
    frame.to_csv(
        file,
        header=False,
        index=False,
        float_format=FLOAT_FORMAT,
        na_rep="",
        lineterminator="\n",
    )
    file.flush()
    os.fsync(file.fileno())


def read_table(file_path, required_columns, kind="table"):
    """
    Read a CSV and check that it holds the columns a consumer needs.

    :raise SchemaError: listing the missing columns.
    """
    try:
        frame = pd.read_csv(file_path)
    except pd.errors.EmptyDataError as e:
        raise SchemaError(
            f"{file_path}: empty file, expected columns {', '.join(required_columns)}.",
            kind=kind,
            missing=tuple(required_columns),
        ) from e
    missing = tuple(column for column in required_columns if column not in frame.columns)
    if missing:
        raise SchemaError(
            f"{file_path}: a {kind} CSV needs the columns {', '.join(missing)}.",
            kind=kind,
            missing=missing,
        )
    return frame


@dataclass(frozen=True)
class GridPoint:
    """One model of a sweep; s, eta and d_target are None for custom-F models."""

    index: int
    n: int
    s: float = None
    eta: float = None
    d_target: float = None


@dataclass(frozen=True)
class ExperimentRecord:
    """One CSV row: a method applied to one sampled graph."""

    run_id: int
    point: int
    run: int
    n: int
    r_blocks: int
    s: float
    eta: float
    d_target: float
    method: str
    seed: int
    r0_used: int = None
    aov: float = None
    lambda_values: str = ""
    runtime_ms: float = None
    error: str = ""

    def to_row(self):
        return {column: getattr(self, column) for column in RECORD_COLUMNS}


def grid_points(cfg):
    """
    The models of an experiment, degree (or s) major and eta minor.

    Pathwise and two-block sizes are rounded down to a multiple of the
    number of blocks.
    """
    model = cfg.model
    if model.kind is ModelKind.CUSTOM_F:
        return [GridPoint(index=0, n=model.n)]

    r_blocks = 2 if model.kind is ModelKind.TWO_BLOCK else model.r_blocks
    n = round_to_blocks(model.n, r_blocks)
    if model.degrees:
        targets = [(calibrate_s(r_blocks, d), d) for d in model.degrees]
    else:
        targets = [(s, pathwise_mean_degree(r_blocks, s)) for s in model.s_values]
    points = []
    for s, d in targets:
        for eta in model.sweep:
            points.append(GridPoint(index=len(points), n=n, s=s, eta=eta, d_target=d))
    return points


def model_for_point(cfg, point):
    model = cfg.model
    return build_model(
        model.kind,
        n=point.n,
        r_blocks=model.r_blocks,
        s=point.s,
        eta=point.eta,
        F=model.F,
        proportions=model.proportions,
    )


def _format_moduli(values):
    return ";".join(f"{float(value):.17g}" for value in values)


def _top_moduli(matrix, seed):
    count = min(LAMBDA_COUNT, matrix.n_rows - 1)
    try:
        pairs = top_eigenpairs(matrix, count, seed=seed)
    except Exception:  # pylint: disable=broad-except
        return ""
    return _format_moduli(pairs.moduli[:count])


def _error_text(error):
    return f"{type(error).__name__}: {error}".replace("\n", " ")


def run_method(matrix, k, method, seed):
    """
    Cluster with one of the experiment methods.

    :return (Partition, r0_used): baselines use k vectors, r0_used is then k.
    """
    if method in ("gmm", "kmeans"):
        partition, diagnostics = cluster_digraph(matrix, k, r0="auto", method=method, seed=seed)
        return partition, diagnostics.r0
    if method == "svd":
        return svd_cluster(matrix, k, seed=seed), k
    if method == "simpleherm":
        return simpleherm_cluster(matrix, k, seed=seed), k
    raise ValidationError(
        f"Unknown method {method!r}; expected one of {', '.join(EXPERIMENT_METHODS)}."
    )


def run_task(cfg, point, run, spec=None):
    """Sample one graph of a grid point and apply every method to it."""
    task_seed = derive_seed(cfg.master_seed, point.index, run)
    sample_seed, eigen_seed, *method_seeds = spawn_seeds(task_seed, 2 + len(cfg.methods))
    r_blocks = 2 if cfg.model.kind is ModelKind.TWO_BLOCK else cfg.model.r_blocks
    common = {
        "run_id": point.index * cfg.runs_per_point + run,
        "point": point.index,
        "run": run,
        "n": point.n,
        "r_blocks": r_blocks,
        "s": point.s,
        "eta": point.eta,
        "d_target": point.d_target,
        "seed": seed_to_int(task_seed),
    }

    try:
        spec = model_for_point(cfg, point) if spec is None else spec
        matrix = sample(spec, seed=sample_seed)
    except Exception as e:  # pylint: disable=broad-except
        return [
            ExperimentRecord(method=method, error=_error_text(e), **common)
            for method in cfg.methods
        ]

    lambda_values = _top_moduli(matrix, eigen_seed)
    truth = spec.sigma_left
    records = []
    for method, method_seed in zip(cfg.methods, method_seeds):
        started = time.perf_counter()
        try:
            partition, r0_used = run_method(matrix, spec.r, method, method_seed)
            aov = adjusted_overlap(truth, partition.labels)
            error = ""
        except Exception as e:  # pylint: disable=broad-except
            r0_used, aov, error = None, None, _error_text(e)
        records.append(
            ExperimentRecord(
                method=method,
                r0_used=r0_used,
                aov=aov,
                lambda_values=lambda_values,
                runtime_ms=(time.perf_counter() - started) * 1000,
                error=error,
                **common,
            )
        )
    return records


def _completed_tasks(csv_path, methods):
    """
    Number of leading task groups already complete in csv_path.

    The file is cut back to those groups; a half-written last line or an
    incomplete group is dropped.
    """
    text = Path(csv_path).read_text(encoding="utf-8")
    lines = text.split("\n")
    # The last element is "" for a complete file, a partial line otherwise.
    lines = lines[:-1]
    header = ",".join(RECORD_COLUMNS)
    if not lines or lines[0] != header:
        raise SchemaError(
            f"{csv_path}: cannot resume, the header differs from {header!r}.",
            kind="experiment",
        )
    frame = pd.read_csv(io.StringIO("\n".join(lines) + "\n"), dtype=str, keep_default_na=False)
    group = len(methods)
    completed = 0
    for start in range(0, len(frame) - group + 1, group):
        rows = frame.iloc[start : start + group]
        if set(rows["run_id"]) != {str(completed)} or tuple(rows["method"]) != tuple(methods):
            break
        completed += 1
    kept = lines[: 1 + completed * group]
    Path(csv_path).write_text("\n".join(kept) + "\n", encoding="utf-8")
    return completed


def summarize_records(frame):
    """
    Per (d_target, s, eta, method): mean adjusted overlap, its standard
    error, the number of scored runs and the number of failed ones.
    """
    frame = frame.copy()
    frame["failed"] = frame["error"].fillna("").astype(str).str.len() > 0
    keys = ["d_target", "s", "eta", "method"]
    summary = []
    for key, rows in frame.groupby(keys, sort=False, dropna=False):
        scores = rows.loc[~rows["failed"], "aov"].astype(float)
        count = int(scores.size)
        mean = float(scores.mean()) if count else None
        se = float(scores.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
        entry = dict(zip(keys, key))
        for name in ("d_target", "s", "eta"):
            entry[name] = None if pd.isna(entry[name]) else float(entry[name])
        entry.update(mean_aov=mean, se_aov=se, count=count, errors=int(rows["failed"].sum()))
        summary.append(entry)
    return summary


def run_experiment(cfg, threads=None, resume=False, show_progress=None):
    """
    Run every (grid point, run) task of cfg and write the record CSV and the
    JSON summary.

    :return list: the summary entries.
    """
    cfg.validate()
    show_progress = show_progress or ShowProgress(None)
    points = grid_points(cfg)
    tasks = [(point, run) for point in points for run in range(cfg.runs_per_point)]
    csv_path = Path(cfg.output.csv)

    completed = 0
    if resume and csv_path.exists():
        completed = _completed_tasks(csv_path, cfg.methods)
    else:
        write_table(csv_path, [], RECORD_COLUMNS)
    remaining = tasks[completed:]

    specs = {}

    def run(task):
        point, run_index = task
        spec = specs.get(point.index)
        if spec is None:
            try:
                spec = specs.setdefault(point.index, model_for_point(cfg, point))
            except DispectralError:
                spec = None
        return run_task(cfg, point, run_index, spec=spec)

    with ThreadPoolExecutor(max_workers=threads or default_threads()) as executor:
        with show_progress("Experiment", maximum=len(remaining)) as progress_bar:
            with open(csv_path, "a", encoding="utf-8", newline="") as file:
                for records in executor.map(run, remaining):
                    _append_rows(file, [record.to_row() for record in records], RECORD_COLUMNS)
                    progress_bar.next()

    frame = pd.read_csv(csv_path, keep_default_na=True)
    summary = summarize_records(frame)
    document = {
        "model": {
            "kind": cfg.model.kind.value,
            "n": cfg.model.n,
            "r_blocks": cfg.model.r_blocks,
        },
        "methods": list(cfg.methods),
        "runs_per_point": cfg.runs_per_point,
        "master_seed": cfg.master_seed,
        "rows": int(len(frame)),
        "points": summary,
    }
    Path(cfg.output.summary).write_text(
        json.dumps(document, indent=2) + "\n", encoding="utf-8"
    )
    return summary


def run_overlap_validation(
    s, eta_grid, n, runs, master_seed=0, threads=None, show_progress=None
):
    """
    Empirical |<u_i, phi_j>| and |<v_i, xi_j>| of the two-block model next to
    the predicted overlaps, for i, j in {1, 2}.

    Predictions exist for the informative eigenvalues only (i, j < r0);
    other rows carry an empty prediction and informative = False.

    :return list: rows with the OVERLAP_COLUMNS.
    """
    show_progress = show_progress or ShowProgress(None)
    n = round_to_blocks(n, 2)
    models = []
    for eta in eta_grid:
        spec = two_block_spec(s, eta, n)
        spectrum = expected_spectrum(spec)
        models.append((eta, spec, spectrum, overlap_prediction(spec, spectrum)))
    tasks = [(index, run) for index in range(len(models)) for run in range(runs)]

    def run(task):
        index, run_index = task
        eta, spec, spectrum, prediction = models[index]
        task_seed = derive_seed(master_seed, index, run_index)
        sample_seed, eigen_seed = spawn_seeds(task_seed, 2)
        matrix = sample(spec, seed=sample_seed)
        pairs = top_eigenpairs(matrix, 2, seed=eigen_seed).head(2)
        overlaps = sample_overlaps(pairs, spectrum, count=2)
        rows = []
        for side, empirical, predicted in (
            ("right", overlaps.right, prediction.a),
            ("left", overlaps.left, prediction.b),
        ):
            for i in range(empirical.shape[0]):
                for j in range(empirical.shape[1]):
                    informative = i < spectrum.r0 and j < spectrum.r0
                    rows.append(
                        {
                            "eta": eta,
                            "run": run_index,
                            "seed": seed_to_int(task_seed),
                            "r0": spectrum.r0,
                            "side": side,
                            "i": i + 1,
                            "j": j + 1,
                            "overlap": float(empirical[i, j]),
                            "predicted": float(predicted[i, j]) if informative else None,
                            "informative": informative,
                        }
                    )
        return rows

    rows = []
    with ThreadPoolExecutor(max_workers=threads or default_threads()) as executor:
        with show_progress("Overlaps", maximum=len(tasks)) as progress_bar:
            for task_rows in executor.map(run, tasks):
                rows.extend(task_rows)
                progress_bar.next()
    return rows


@dataclass(frozen=True)
class FluctuationReport:
    """Histograms of sqrt(n) u_i by true cluster, with the limit moments."""

    rows: list
    empirical_mean: np.ndarray
    empirical_se: np.ndarray
    empirical_variance: np.ndarray
    moments: object

    def mean_z(self):
        """(empirical mean - mu_ij) / SE per (i, j)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.empirical_mean - self.moments.mu_ij) / self.empirical_se

    def to_dict(self):
        return {
            "empirical_mean": self.empirical_mean.tolist(),
            "empirical_se": self.empirical_se.tolist(),
            "empirical_variance": self.empirical_variance.tolist(),
            "mean_z": self.mean_z().tolist(),
            "limit": self.moments.to_dict(),
        }


def scaled_eigenvectors(matrix, spectrum, r0, seed=None):
    """
    sqrt(n) u_i for i < r0, with the sign of each u_i chosen so that
    <u_i, phi_i> >= 0.
    """
    pairs = top_eigenpairs(matrix, r0, seed=seed).head(r0)
    vectors = pairs.right_vectors.real
    reference = spectrum.phi[:, :r0].real
    signs = np.where(np.sum(vectors * reference, axis=0) < 0, -1.0, 1.0)
    return math.sqrt(matrix.n_rows) * vectors * signs


def run_fluctuation_histograms(
    spec, samples, bins=60, master_seed=0, threads=None, show_progress=None
):
    """
    Sample graphs of a block model with identical memberships and histogram
    the entries of sqrt(n) u_i grouped by true cluster.

    Densities are normalized over all entries of u_i, so the cluster
    histograms add up to the mixture sum_j p_j N(mu_ij, sigma2_ij).
    """
    show_progress = show_progress or ShowProgress(None)
    moments = limit_moments(spec)
    spectrum = expected_spectrum(spec)
    r0 = moments.nu.size
    labels = spec.sigma_left

    def run(index):
        sample_seed, eigen_seed = spawn_seeds(derive_seed(master_seed, index), 2)
        matrix = sample(spec, seed=sample_seed)
        return scaled_eigenvectors(matrix, spectrum, r0, seed=eigen_seed)

    with ThreadPoolExecutor(max_workers=threads or default_threads()) as executor:
        with show_progress("Fluctuations", maximum=samples) as progress_bar:
            collected = []
            for values in executor.map(run, range(samples)):
                collected.append(values)
                progress_bar.next()
    # One row per node and sample, one column per eigenvector.
    entries = np.concatenate(collected, axis=0)
    clusters = np.tile(labels, samples)

    r = spec.r
    means = np.zeros((r0, r))
    ses = np.zeros((r0, r))
    variances = np.zeros((r0, r))
    rows = []
    for i in range(r0):
        edges = np.histogram_bin_edges(entries[:, i], bins=bins)
        widths = np.diff(edges)
        total = entries.shape[0]
        for j in range(r):
            values = entries[clusters == j, i]
            means[i, j] = values.mean()
            variances[i, j] = values.var(ddof=1)
            ses[i, j] = math.sqrt(variances[i, j] / values.size)
            counts, _ = np.histogram(values, bins=edges)
            for left, right, count, width in zip(edges[:-1], edges[1:], counts, widths):
                rows.append(
                    {
                        "eigen_index": i + 1,
                        "cluster": j,
                        "bin_left": float(left),
                        "bin_right": float(right),
                        "count": int(count),
                        "density": float(count / (total * width)) if width > 0 else 0.0,
                        "weight": float(moments.p[j]),
                        "mu": float(moments.mu_ij[i, j]),
                        "sigma2": float(moments.sigma2_ij[i, j]),
                    }
                )
    return FluctuationReport(
        rows=rows,
        empirical_mean=means,
        empirical_se=ses,
        empirical_variance=variances,
        moments=moments,
    )


def threshold_map_rows(r_values=THRESHOLD_MAP_BLOCKS, etas=None):
    """
    Right-hand side of the all-eigenvalues detection condition of the
    pathwise model, as a function of eta, for every number of blocks.
    """
    etas = np.linspace(0.5, 1.0, 201) if etas is None else etas
    rows = []
    for r_blocks in r_values:
        for eta in etas:
            threshold = pathwise_detection_threshold(r_blocks, 1.0, float(eta))
            rows.append(
                {
                    "r": int(r_blocks),
                    "eta": float(eta),
                    "rhs": None if threshold.infinite else threshold.rhs,
                    "infinite": threshold.infinite,
                }
            )
    return rows


def spectrum_rows(pairs, spectrum=None):
    """
    Eigenvalues of a sample (kind "sample") and, when known, the nonzero
    eigenvalues of its model ("expected") and the detection threshold
    ("threshold", stored in re).
    """
    rows = [
        {"kind": "sample", "re": float(value.real), "im": float(value.imag)}
        for value in pairs.values
    ]
    if spectrum is not None:
        rows.extend(
            {"kind": "expected", "re": float(value.real), "im": float(value.imag)}
            for value in spectrum.mu
        )
        rows.append({"kind": "threshold", "re": float(spectrum.theta_threshold), "im": 0.0})
    return rows
