"""Parse command-line arguments."""

import argparse
import copy

from dispectral import __version__
from dispectral.clustering import DEFAULT_R0_MARGIN
from dispectral.config import EXPERIMENT_METHODS
from dispectral.gw import DEFAULT_DEPTH, DEFAULT_SAMPLES
from dispectral.plot import PlotKind


DEFAULT_VERBOSITY = 5
UNUSED_SEED_HELP = "Random seed; accepted for uniformity, the output is deterministic."
COMMANDS = (
    "sample",
    "spectrum",
    "predict",
    "cluster",
    "experiment",
    "overlap-validate",
    "fluctuations",
    "gw-sim",
    "plot",
)


class HelpFormatter(argparse.RawDescriptionHelpFormatter, argparse.ArgumentDefaultsHelpFormatter):
    """Custom help formatter -- don't print confusing default values."""

    def _get_help_string(self, action):
        action = copy.copy(action)
        # Don't show "(default: None)" for arguments without defaults,
        # or "(default: False)" for boolean flags, and hide the
        # (default: 5) from --verbose's help because it's confusing.
        if not action.default or action.dest == "verbosity":
            action.default = argparse.SUPPRESS
        return super()._get_help_string(action)


def _r0(value):
    """'auto' or a positive integer."""
    if value == "auto":
        return value
    try:
        r0 = int(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected 'auto' or an integer, got {value!r}") from e
    if r0 < 1:
        raise argparse.ArgumentTypeError("r0 must be positive")
    return r0


def _positive_int(value):
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def _common_arguments():
    """Options shared by every subcommand."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "-V",
        "--verbose",
        dest="verbosity",
        action="store_const",
        const=100,
        default=DEFAULT_VERBOSITY,
        help="Verbose mode.",
    )
    parser.add_argument(
        "-q", "--quiet", dest="verbosity", action="store_const", const=0, help="Quiet mode."
    )
    parser.add_argument(
        "-n", "--no-progress", action="store_true", help="Don't show progress bar."
    )
    return parser


def _seed_argument(parser, default=0, help_text="Random seed."):
    parser.add_argument("--seed", type=int, default=default, help=help_text)


def _threads_argument(parser):
    parser.add_argument(
        "--threads",
        type=_positive_int,
        help="Worker threads (default: number of CPUs).",
    )


def _model_argument(parser, required=True, default=None):
    parser.add_argument(
        "-m",
        "--model",
        required=required,
        default=default,
        metavar="MODEL",
        help="Preset name (two-block, F1, F2, pathwise-k6-d2) or a model TOML file.",
    )
    parser.add_argument("--n", type=_positive_int, help="Override the number of nodes.")


def _add_sample(subparsers, common):
    parser = subparsers.add_parser(
        "sample", parents=[common], formatter_class=HelpFormatter, help="Sample a graph."
    )
    _model_argument(parser)
    _seed_argument(parser)
    parser.add_argument("--out", required=True, metavar="EDGES", help="Edge list to write.")
    parser.add_argument("--labels", metavar="FILE", help="Also write the planted memberships.")


def _add_spectrum(subparsers, common):
    parser = subparsers.add_parser(
        "spectrum",
        parents=[common],
        formatter_class=HelpFormatter,
        help="Top eigenvalues of a sampled graph next to the expected ones.",
    )
    _model_argument(parser)
    parser.add_argument(
        "--input", metavar="EDGES", help="Edge list to analyse instead of a fresh sample."
    )
    parser.add_argument("--k", type=_positive_int, default=10, help="Eigenvalues to compute.")
    _seed_argument(parser)
    parser.add_argument("--out", required=True, metavar="CSV", help="Spectrum CSV to write.")


def _add_predict(subparsers, common):
    parser = subparsers.add_parser(
        "predict",
        parents=[common],
        formatter_class=HelpFormatter,
        help="Expected spectrum, threshold, r0 and predicted overlaps of a model.",
    )
    _model_argument(parser, required=False)
    parser.add_argument("--out", metavar="JSON", help="Write the prediction as JSON.")
    parser.add_argument(
        "--threshold-map",
        metavar="CSV",
        help="Write the pathwise detection threshold for r = 2 ... 32 blocks.",
    )
    _seed_argument(parser, help_text=UNUSED_SEED_HELP)


def _add_cluster(subparsers, common):
    parser = subparsers.add_parser(
        "cluster",
        parents=[common],
        formatter_class=HelpFormatter,
        help="Cluster the nodes of a directed graph.",
    )
    parser.add_argument("--input", required=True, metavar="EDGES", help="Edge list to cluster.")
    parser.add_argument("--k", type=_positive_int, required=True, help="Number of clusters.")
    parser.add_argument(
        "--r0",
        type=_r0,
        default="auto",
        help="Informative eigenvectors to embed, or 'auto'.",
    )
    parser.add_argument(
        "--method", choices=EXPERIMENT_METHODS, default="gmm", help="Clustering method."
    )
    parser.add_argument(
        "--margin",
        type=float,
        default=DEFAULT_R0_MARGIN,
        help="Relative margin above sqrt(|lambda_1|) for the automatic r0.",
    )
    parser.add_argument(
        "--sides",
        choices=("both", "right"),
        default="both",
        help="Embed right and left eigenvectors, or right ones only.",
    )
    parser.add_argument(
        "--normalize-embedding",
        action="store_true",
        help="Scale embedded rows to unit norm (svd and simpleherm).",
    )
    _seed_argument(parser)
    parser.add_argument("--out", required=True, metavar="LABELS", help="Labels file to write.")
    parser.add_argument("--diagnostics", metavar="JSON", help="Write diagnostics as JSON.")
    parser.add_argument(
        "--truth", metavar="LABELS", help="Planted labels; report the adjusted overlap."
    )


def _add_experiment(subparsers, common):
    parser = subparsers.add_parser(
        "experiment",
        parents=[common],
        formatter_class=HelpFormatter,
        help="Run a Monte Carlo sweep from a TOML config.",
    )
    parser.add_argument("--config", required=True, metavar="TOML", help="Experiment config.")
    parser.add_argument(
        "--resume", action="store_true", help="Continue an interrupted sweep's CSV."
    )
    _seed_argument(parser, default=None, help_text="Override the config's master_seed.")
    _threads_argument(parser)


def _add_overlap_validate(subparsers, common):
    parser = subparsers.add_parser(
        "overlap-validate",
        parents=[common],
        formatter_class=HelpFormatter,
        help="Empirical against predicted eigenvector overlaps of the two-block model.",
    )
    parser.add_argument("--s", type=float, default=10.0, help="Density scale.")
    parser.add_argument("--eta-start", type=float, default=0.5, help="First eta.")
    parser.add_argument("--eta-stop", type=float, default=1.0, help="Last eta.")
    parser.add_argument("--eta-num", type=_positive_int, default=26, help="Number of etas.")
    parser.add_argument("--n", type=_positive_int, default=2000, help="Number of nodes.")
    parser.add_argument("--runs", type=_positive_int, default=20, help="Graphs per eta.")
    _seed_argument(parser)
    _threads_argument(parser)
    parser.add_argument("--out", required=True, metavar="CSV", help="Overlap CSV to write.")


def _add_fluctuations(subparsers, common):
    parser = subparsers.add_parser(
        "fluctuations",
        parents=[common],
        formatter_class=HelpFormatter,
        help="Histograms of eigenvector entries against the Gaussian mixture limit.",
    )
    _model_argument(parser, required=False, default="F1")
    parser.add_argument("--samples", type=_positive_int, default=10, help="Graphs to sample.")
    parser.add_argument("--bins", type=_positive_int, default=60, help="Histogram bins.")
    _seed_argument(parser)
    _threads_argument(parser)
    parser.add_argument("--out", required=True, metavar="CSV", help="Histogram CSV to write.")
    parser.add_argument("--svg", metavar="SVG", help="Also render the histograms.")
    parser.add_argument("--summary", metavar="JSON", help="Per-cluster moments as JSON.")


def _add_gw_sim(subparsers, common):
    parser = subparsers.add_parser(
        "gw-sim",
        parents=[common],
        formatter_class=HelpFormatter,
        help="Galton-Watson martingale moments against their limits.",
    )
    _model_argument(parser, required=False, default="F1")
    parser.add_argument(
        "--eigen-index", type=int, default=0, help="Informative eigenvalue i (0-based)."
    )
    parser.add_argument("--root-type", type=int, default=0, help="Type j of the root.")
    parser.add_argument("--depth", type=_positive_int, default=DEFAULT_DEPTH, help="Generations.")
    parser.add_argument(
        "--samples", type=_positive_int, default=DEFAULT_SAMPLES, help="Trees to simulate."
    )
    _seed_argument(parser)
    _threads_argument(parser)
    parser.add_argument("--out", required=True, metavar="CSV", help="Moment CSV to write.")


def _add_plot(subparsers, common):
    parser = subparsers.add_parser(
        "plot", parents=[common], formatter_class=HelpFormatter, help="Render a CSV as SVG."
    )
    parser.add_argument("--input", required=True, metavar="CSV", help="CSV to render.")
    parser.add_argument(
        "--kind",
        required=True,
        choices=[kind.value for kind in PlotKind],
        help="Figure kind.",
    )
    _seed_argument(parser, help_text=UNUSED_SEED_HELP)
    parser.add_argument("--out", required=True, metavar="SVG", help="SVG to write.")


def parse_arguments(arguments):
    """Parse the given command-line arguments and return the configuration."""

    parser = argparse.ArgumentParser(
        prog="dispectral",
        description="Spectral clustering of sparse directed graphs.",
        epilog="\n".join(
            [
                "examples:",
                "  %(prog)s sample --model two-block --seed 1 --out graph.tsv --labels truth.txt",
                "  %(prog)s cluster --input graph.tsv --k 2 --out labels.txt --truth truth.txt",
                "  %(prog)s experiment --config sweep.toml --threads 4",
            ]
        ),
        formatter_class=HelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)

    common = _common_arguments()
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for add in (
        _add_sample,
        _add_spectrum,
        _add_predict,
        _add_cluster,
        _add_experiment,
        _add_overlap_validate,
        _add_fluctuations,
        _add_gw_sim,
        _add_plot,
    ):
        add(subparsers, common)

    configuration = parser.parse_args(arguments)

    if configuration.command == "predict" and not (
        configuration.model or configuration.threshold_map
    ):
        parser.error("predict needs --model, --threshold-map or both")

    return configuration
