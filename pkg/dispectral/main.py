"""Spectral clustering of sparse directed graphs: command-line application."""

import dataclasses
import json
import math
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

try:
    from progress.bar import ChargingBar as progress_bar
except ImportError:
    progress_bar = None

from dispectral import args, edgelist, harness
from dispectral.baselines import simpleherm_cluster, svd_cluster
from dispectral.clustering import adjusted_overlap, cluster_digraph
from dispectral.config import load_experiment, resolve_model
from dispectral.eigen import top_eigenpairs
from dispectral.errors import (
    DispectralError,
    NumericalError,
    UnsupportedModelError,
    ValidationError,
)
from dispectral.graph import SbmModel, pathwise_connectivity, sample
from dispectral.gw import CHUNK_SIZE, GwConfig, moment_check, simulate_martingale
from dispectral.plot import PlotKind, plot, render, save_svg
from dispectral.theory import (
    expected_spectrum,
    limit_moments,
    overlap_prediction,
    two_block_report,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _write_json(file_path, document):
    Path(file_path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


class Dispectral:
    """Main application: parse arguments and handle commands."""

    def __init__(self):
        """Construct Dispectral object with default settings."""
        self.configuration = SimpleNamespace(verbosity=args.DEFAULT_VERBOSITY, no_progress=True)

    def debug(self, level, message):
        """Log a message to stderror if its level is low enough."""
        if self.configuration.verbosity >= level:
            print(message, file=sys.stderr)

    def parse_arguments(self, arguments):
        """Parse the list of command-line arguments."""
        self.configuration = args.parse_arguments(arguments)

    @property
    def show_progress(self):
        if self.configuration.no_progress or not progress_bar:
            return harness.ShowProgress(None)
        return harness.ShowProgress(progress_bar)

    def perform_commands(self):
        """Run the subcommand selected by the configuration."""
        command = self.configuration.command.replace("-", "_")
        getattr(self, f"command_{command}")()

    def _model(self):
        return resolve_model(self.configuration.model, n=self.configuration.n)

    def command_sample(self):
        spec = self._model()
        matrix = sample(spec, seed=self.configuration.seed)
        edgelist.write_edgelist(self.configuration.out, matrix)
        self.debug(5, f"Sampled n={matrix.n_rows} with {matrix.nnz} edges.")
        if self.configuration.labels:
            if not isinstance(spec, SbmModel):
                raise UnsupportedModelError("Only block models have planted memberships.")
            edgelist.write_memberships(self.configuration.labels, spec.sigma_left)

    def command_spectrum(self):
        spec = self._model()
        if self.configuration.input:
            matrix = edgelist.read_edgelist(self.configuration.input)
        else:
            matrix = sample(spec, seed=self.configuration.seed)
        k = min(self.configuration.k, matrix.n_rows - 1)
        pairs = top_eigenpairs(matrix, k, seed=self.configuration.seed)
        spectrum = expected_spectrum(spec)
        harness.write_table(
            self.configuration.out,
            harness.spectrum_rows(pairs, spectrum),
            harness.SPECTRUM_COLUMNS,
        )
        self.debug(5, f"Threshold {spectrum.theta_threshold:.6g}, r0 = {spectrum.r0}.")
        for value in pairs.values:
            self.debug(10, f"lambda = {value:.6g} (modulus {abs(value):.6g})")

    def command_predict(self):
        if self.configuration.threshold_map:
            harness.write_table(
                self.configuration.threshold_map,
                harness.threshold_map_rows(),
                harness.THRESHOLD_MAP_COLUMNS,
            )
            self.debug(5, f"Threshold map written to {self.configuration.threshold_map}.")
        if not self.configuration.model:
            return

        spec = self._model()
        spectrum = expected_spectrum(spec)
        document = {
            "spectrum": spectrum.to_dict(),
            "overlaps": overlap_prediction(spec, spectrum).to_dict(),
        }
        try:
            document["limit_moments"] = limit_moments(spec).to_dict()
        except (UnsupportedModelError, ValidationError) as e:
            self.debug(10, f"No limit moments: {e}")
        report = self._two_block_report(spec)
        if report is not None:
            document["two_block"] = report.to_dict()

        text = json.dumps(document, indent=2)
        if self.configuration.out:
            Path(self.configuration.out).write_text(text + "\n", encoding="utf-8")
        else:
            print(text)

    @staticmethod
    def _two_block_report(spec):
        """Closed forms for two equal blocks with F = [[s/2, s eta], [s (1-eta), s/2]]."""
        if not isinstance(spec, SbmModel) or spec.r != 2 or not spec.same_memberships:
            return None
        F = spec.F
        s = 2 * float(F[0, 0])
        if s <= 1:
            return None
        eta = float(F[0, 1]) / s
        if not 0.5 <= eta <= 1 or not np.allclose(F, pathwise_connectivity(2, s, eta)):
            return None
        if abs(2 * int(np.sum(spec.sigma_left == 0)) - spec.n) > 1:
            return None
        return two_block_report(s, eta)

    def command_cluster(self):
        configuration = self.configuration
        matrix = edgelist.read_edgelist(configuration.input)
        diagnostics = None
        if configuration.method in ("gmm", "kmeans"):
            partition, diagnostics = cluster_digraph(
                matrix,
                configuration.k,
                r0=configuration.r0,
                method=configuration.method,
                seed=configuration.seed,
                margin=configuration.margin,
                sides=configuration.sides,
            )
            origin = "estimated" if diagnostics.r0_estimated else "given"
            self.debug(5, f"r0 = {diagnostics.r0} ({origin}).")
        else:
            cluster = svd_cluster if configuration.method == "svd" else simpleherm_cluster
            partition = cluster(
                matrix,
                configuration.k,
                seed=configuration.seed,
                normalize_embedding=configuration.normalize_embedding,
            )
        edgelist.write_memberships(configuration.out, partition.labels)

        document = diagnostics.to_dict() if diagnostics else {"method": configuration.method}
        document["sizes"] = partition.sizes().tolist()
        if configuration.truth:
            truth = edgelist.read_memberships(configuration.truth)
            if truth.size != partition.n:
                raise ValidationError(
                    f"{configuration.truth} holds {truth.size} labels for {partition.n} nodes."
                )
            document["adjusted_overlap"] = adjusted_overlap(truth, partition.labels)
            self.debug(0, f"Adjusted overlap: {document['adjusted_overlap']:.4f}")
        if configuration.diagnostics:
            _write_json(configuration.diagnostics, document)

    def command_experiment(self):
        cfg = load_experiment(self.configuration.config)
        seed = self.configuration.seed
        if seed is not None:
            self.debug(10, f"Seed {seed} replaces master_seed {cfg.master_seed}.")
            cfg = dataclasses.replace(cfg, master_seed=seed)
        summary = harness.run_experiment(
            cfg,
            threads=self.configuration.threads,
            resume=self.configuration.resume,
            show_progress=self.show_progress,
        )
        self.debug(5, f"{len(summary)} summary entries written to {cfg.output.summary}.")
        for entry in summary:
            if entry["errors"]:
                self.debug(5, f"{entry['errors']} failed runs for {entry}.")

    def command_overlap_validate(self):
        configuration = self.configuration
        eta_grid = np.linspace(
            configuration.eta_start, configuration.eta_stop, configuration.eta_num
        )
        rows = harness.run_overlap_validation(
            configuration.s,
            eta_grid,
            configuration.n,
            configuration.runs,
            master_seed=configuration.seed,
            threads=configuration.threads,
            show_progress=self.show_progress,
        )
        harness.write_table(configuration.out, rows, harness.OVERLAP_COLUMNS)

    def command_fluctuations(self):
        configuration = self.configuration
        report = harness.run_fluctuation_histograms(
            self._model(),
            configuration.samples,
            bins=configuration.bins,
            master_seed=configuration.seed,
            threads=configuration.threads,
            show_progress=self.show_progress,
        )
        frame_rows = report.rows
        harness.write_table(configuration.out, frame_rows, harness.HISTOGRAM_COLUMNS)
        if configuration.svg:
            frame = harness.read_table(
                configuration.out, harness.HISTOGRAM_COLUMNS, kind=PlotKind.HISTOGRAM.value
            )
            save_svg(render(frame, PlotKind.HISTOGRAM), configuration.svg)
        if configuration.summary:
            _write_json(configuration.summary, report.to_dict())
        for (i, j), z in np.ndenumerate(report.mean_z()):
            self.debug(10, f"u{i + 1}, cluster {j}: mean z-score {z:.3g}")

    def command_gw_sim(self):
        configuration = self.configuration
        cfg, moments = GwConfig.from_model(
            self._model(),
            depth=configuration.depth,
            n_samples=configuration.samples,
            root_type=configuration.root_type,
        )
        chunks = math.ceil(cfg.n_samples / CHUNK_SIZE)
        with self.show_progress("Galton-Watson", maximum=chunks) as bar:
            run = simulate_martingale(
                cfg,
                eigen_index=configuration.eigen_index,
                seed=configuration.seed,
                threads=configuration.threads or harness.default_threads(),
                progress=bar.next,
            )
        report = moment_check(run, moments)
        harness.write_table(
            configuration.out,
            report.to_rows(),
            ("quantity", "empirical", "target", "standard_error", "z"),
        )
        self.debug(5, f"mean z = {report.mean_z:.3g}, variance z = {report.variance_z:.3g}")

    def command_plot(self):
        plot(self.configuration.input, self.configuration.kind, self.configuration.out)


def main(*arguments, **kwargs):
    """
    Parse arguments and execute tasks.

    Default usage is to supply *sys.argv[1:].
    Exit codes: 0 success, 2 invalid input, 3 numerical failure, 1 otherwise.
    Pass avoid_system_exit=True to get the code returned instead.
    """
    application = Dispectral()
    try:
        application.parse_arguments(arguments)
        application.perform_commands()
        code = EXIT_OK
    except SystemExit as e:
        # argparse: 0 after --help/--version, 2 on usage errors.
        code = e.code if isinstance(e.code, int) else EXIT_VALIDATION
    except ValidationError as e:
        application.debug(0, f"Error: {e}")
        code = EXIT_VALIDATION
    except NumericalError as e:
        application.debug(0, f"Numerical failure: {e}")
        code = EXIT_NUMERICAL
    except (DispectralError, OSError) as e:
        application.debug(0, f"Error: {e}")
        code = EXIT_FAILURE

    if kwargs.get("avoid_system_exit"):
        return code
    sys.exit(code)


if __name__ == "__main__":
    main(*sys.argv[1:])
