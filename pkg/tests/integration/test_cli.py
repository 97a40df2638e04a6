"""
Tests for the dispectral executable and main() method.

Every command runs end to end on small models, through main() with
avoid_system_exit=True so the exit code can be checked.
"""

import json
import textwrap

import pandas as pd
import pytest

from dispectral import edgelist
from dispectral.main import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main

# pylint: disable=missing-docstring, redefined-outer-name


@pytest.fixture
def dispectral():
    def main_with_default_arguments(*args):
        return main(*args, "--quiet", "--no-progress", avoid_system_exit=True)

    return main_with_default_arguments


@pytest.fixture
def assortative_toml(tmp_path):
    path = tmp_path / "assortative.toml"
    path.write_text(
        '[model]\nkind = "custom-F"\nn = 600\nF = [[60.0, 4.0], [4.0, 60.0]]\n',
        encoding="utf-8",
    )
    return path


@pytest.fixture
def degenerate_toml(tmp_path):
    path = tmp_path / "degenerate.toml"
    path.write_text(
        '[model]\nkind = "custom-F"\nn = 100\nF = [[5.0, 0.0], [0.0, 5.0]]\n', encoding="utf-8"
    )
    return path


def test_help_exits_with_zero():
    assert main("--help", avoid_system_exit=True) == EXIT_OK


def test_missing_command_exits_with_validation_code():
    assert main(avoid_system_exit=True) == EXIT_VALIDATION


def test_main_without_avoid_system_exit_raises_systemexit(tmp_path):
    with pytest.raises(SystemExit) as exit_info:
        main("predict", "--threshold-map", str(tmp_path / "map.csv"), "-q")
    assert exit_info.value.code == EXIT_OK


def test_sample_then_cluster_recovers_planted_labels(dispectral, assortative_toml, tmp_path):
    graph, truth = tmp_path / "graph.tsv", tmp_path / "truth.txt"
    labels, diagnostics = tmp_path / "labels.txt", tmp_path / "diagnostics.json"
    code = dispectral(
        "sample", "--model", str(assortative_toml), "--seed", "1",
        "--out", str(graph), "--labels", str(truth),
    )  # fmt: skip
    assert code == EXIT_OK
    assert edgelist.read_edgelist(graph).n_rows == 600

    code = dispectral(
        "cluster", "--input", str(graph), "--k", "2", "--r0", "2", "--seed", "2",
        "--out", str(labels), "--truth", str(truth), "--diagnostics", str(diagnostics),
    )  # fmt: skip
    assert code == EXIT_OK
    assert edgelist.read_memberships(labels).size == 600
    document = json.loads(diagnostics.read_text(encoding="utf-8"))
    assert document["r0"] == 2
    assert document["adjusted_overlap"] > 0.9
    assert sum(document["sizes"]) == 600


@pytest.mark.parametrize("method", ["svd", "simpleherm"])
def test_cluster_with_baseline_method(dispectral, assortative_toml, tmp_path, method):
    graph, labels = tmp_path / "graph.tsv", tmp_path / "labels.txt"
    dispectral("sample", "--model", str(assortative_toml), "--out", str(graph))
    code = dispectral(
        "cluster", "--input", str(graph), "--k", "2", "--method", method, "--out", str(labels)
    )
    assert code == EXIT_OK
    assert set(edgelist.read_memberships(labels)) <= {0, 1}


def test_cluster_with_wrong_truth_size_exits_with_validation_code(
    dispectral, assortative_toml, tmp_path, capsys
):
    graph, truth = tmp_path / "graph.tsv", tmp_path / "truth.txt"
    dispectral("sample", "--model", str(assortative_toml), "--out", str(graph))
    edgelist.write_memberships(truth, [0, 1, 0])
    code = dispectral(
        "cluster", "--input", str(graph), "--k", "2",
        "--out", str(tmp_path / "labels.txt"), "--truth", str(truth),
    )  # fmt: skip
    assert code == EXIT_VALIDATION
    assert "3 labels for 600 nodes" in capsys.readouterr().err


def test_predict_two_block_writes_closed_forms(dispectral, tmp_path):
    out = tmp_path / "prediction.json"
    assert dispectral("predict", "--model", "two-block", "--out", str(out)) == EXIT_OK
    document = json.loads(out.read_text(encoding="utf-8"))
    assert document["spectrum"]["r0"] == 1
    assert document["spectrum"]["theta_threshold"] == pytest.approx(2.0)
    assert "two_block" in document
    assert "limit_moments" in document


def test_predict_threshold_map(dispectral, tmp_path):
    out = tmp_path / "map.csv"
    assert dispectral("predict", "--threshold-map", str(out)) == EXIT_OK
    frame = pd.read_csv(out)
    assert len(frame) == 31 * 201


def test_predict_degenerate_model_exits_with_numerical_code(
    dispectral, degenerate_toml, tmp_path, capsys
):
    code = dispectral("predict", "--model", str(degenerate_toml))
    assert code == EXIT_NUMERICAL
    assert "Numerical failure" in capsys.readouterr().err


def test_unknown_model_key_exits_with_validation_code(dispectral, tmp_path):
    path = tmp_path / "model.toml"
    path.write_text('[model]\nkind = "two-block"\nn = 100\ncolour = 1\n', encoding="utf-8")
    code = dispectral("sample", "--model", str(path), "--out", str(tmp_path / "graph.tsv"))
    assert code == EXIT_VALIDATION


def test_usage_error_exits_with_validation_code(dispectral):
    assert dispectral("cluster", "--k", "two") == EXIT_VALIDATION


def test_spectrum_then_plot(dispectral, tmp_path):
    csv_path, svg_path = tmp_path / "spectrum.csv", tmp_path / "spectrum.svg"
    code = dispectral(
        "spectrum", "--model", "two-block", "--n", "400", "--k", "4", "--out", str(csv_path)
    )
    assert code == EXIT_OK
    frame = pd.read_csv(csv_path)
    assert frame["kind"].tolist().count("sample") >= 4
    assert frame["kind"].tolist()[-1] == "threshold"

    code = dispectral(
        "plot", "--input", str(csv_path), "--kind", "spectrum-scatter", "--out", str(svg_path)
    )
    assert code == EXIT_OK
    assert "<svg" in svg_path.read_text(encoding="utf-8")


def test_plot_with_wrong_kind_of_csv_exits_with_validation_code(dispectral, tmp_path, capsys):
    csv_path = tmp_path / "map.csv"
    dispectral("predict", "--threshold-map", str(csv_path))
    code = dispectral(
        "plot", "--input", str(csv_path), "--kind", "histogram", "--out", str(tmp_path / "h.svg")
    )
    assert code == EXIT_VALIDATION
    assert "eigen_index" in capsys.readouterr().err


def test_experiment_writes_records_and_summary(dispectral, tmp_path):
    config = tmp_path / "sweep.toml"
    config.write_text(
        textwrap.dedent(
            f"""
            methods = ["gmm", "svd"]
            runs_per_point = 2
            master_seed = 5

            [model]
            kind = "two-block"
            n = 300
            degrees = [10.0]
            sweep = [0.7, 0.95]

            [output]
            csv = "{(tmp_path / 'records.csv').as_posix()}"
            summary = "{(tmp_path / 'summary.json').as_posix()}"
            """
        ),
        encoding="utf-8",
    )
    assert dispectral("experiment", "--config", str(config), "--threads", "2") == EXIT_OK
    assert len(pd.read_csv(tmp_path / "records.csv")) == 8
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert len(summary["points"]) == 4

    code = dispectral("experiment", "--config", str(config), "--resume")
    assert code == EXIT_OK
    assert len(pd.read_csv(tmp_path / "records.csv")) == 8


def test_experiment_seed_overrides_master_seed(dispectral, tmp_path):
    config = tmp_path / "sweep.toml"
    config.write_text(
        textwrap.dedent(
            f"""
            runs_per_point = 1
            master_seed = 5

            [model]
            kind = "two-block"
            n = 200
            degrees = [10.0]
            sweep = [0.9]

            [output]
            csv = "{(tmp_path / 'records.csv').as_posix()}"
            summary = "{(tmp_path / 'summary.json').as_posix()}"
            """
        ),
        encoding="utf-8",
    )
    seeds = {}
    for arguments in ((), ("--seed", "9")):
        assert dispectral("experiment", "--config", str(config), *arguments) == EXIT_OK
        summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
        seeds[summary["master_seed"]] = pd.read_csv(tmp_path / "records.csv")["seed"].tolist()
    assert set(seeds) == {5, 9}
    assert seeds[5] != seeds[9]


def test_predict_and_plot_accept_seed(dispectral, tmp_path):
    csv_path = tmp_path / "map.csv"
    assert dispectral("predict", "--threshold-map", str(csv_path), "--seed", "3") == EXIT_OK
    svg_path = tmp_path / "map.svg"
    code = dispectral(
        "plot", "--input", str(csv_path), "--kind", "threshold-map", "--out", str(svg_path),
        "--seed", "3",
    )  # fmt: skip
    assert code == EXIT_OK
    assert "<svg" in svg_path.read_text(encoding="utf-8")


def test_overlap_validate(dispectral, tmp_path):
    out = tmp_path / "overlaps.csv"
    code = dispectral(
        "overlap-validate", "--n", "200", "--runs", "1", "--eta-start", "0.9",
        "--eta-stop", "0.99", "--eta-num", "2", "--out", str(out),
    )  # fmt: skip
    assert code == EXIT_OK
    assert len(pd.read_csv(out)) == 2 * 2 * 4


def test_fluctuations_writes_histogram_svg_and_summary(dispectral, tmp_path):
    out, svg, summary = tmp_path / "hist.csv", tmp_path / "hist.svg", tmp_path / "moments.json"
    code = dispectral(
        "fluctuations", "--model", "F1", "--n", "300", "--samples", "1", "--bins", "10",
        "--out", str(out), "--svg", str(svg), "--summary", str(summary),
    )  # fmt: skip
    assert code == EXIT_OK
    assert len(pd.read_csv(out)) == 2 * 10
    assert svg.exists()
    assert "mean_z" in json.loads(summary.read_text(encoding="utf-8"))


def test_gw_sim_writes_moment_table(dispectral, tmp_path):
    out = tmp_path / "gw.csv"
    code = dispectral(
        "gw-sim", "--model", "F1", "--samples", "2000", "--depth", "6", "--seed", "3",
        "--out", str(out),
    )  # fmt: skip
    assert code == EXIT_OK
    frame = pd.read_csv(out)
    assert frame["quantity"].tolist()[:2] == ["mean", "variance"]
    assert frame.loc[frame["quantity"] == "samples", "empirical"].iloc[0] + frame.loc[
        frame["quantity"] == "excluded", "empirical"
    ].iloc[0] == 2000


def test_gw_sim_with_uninformative_eigen_index_exits_with_validation_code(dispectral, tmp_path):
    code = dispectral(
        "gw-sim", "--model", "F1", "--samples", "2000", "--depth", "2", "--eigen-index", "1",
        "--out", str(tmp_path / "gw.csv"),
    )  # fmt: skip
    assert code == EXIT_VALIDATION
