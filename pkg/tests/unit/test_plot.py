import pytest

from dispectral import harness
from dispectral.eigen import dense_eigen_oracle
from dispectral.errors import SchemaError
from dispectral.graph import two_block_spec
from dispectral.plot import REQUIRED_COLUMNS, PlotKind, plot
from dispectral.theory import expected_spectrum

# pylint: disable=missing-docstring, redefined-outer-name


@pytest.fixture
def spectrum_csv(tmp_path):
    spec = two_block_spec(10.0, 0.9, 100)
    pairs = dense_eigen_oracle(spec.expected_matrix()).head(4)
    path = tmp_path / "spectrum.csv"
    harness.write_table(
        path, harness.spectrum_rows(pairs, expected_spectrum(spec)), harness.SPECTRUM_COLUMNS
    )
    return path


@pytest.fixture
def overlap_csv(tmp_path):
    rows = []
    for eta in (0.6, 0.8, 1.0):
        for run in (0, 1):
            for i, j in ((1, 1), (1, 2), (2, 1), (2, 2)):
                rows.append(
                    {
                        "eta": eta,
                        "run": run,
                        "seed": 1,
                        "r0": 1,
                        "side": "right",
                        "i": i,
                        "j": j,
                        "overlap": 0.9 if i == j else 0.1,
                        "predicted": 0.85 if (i, j) == (1, 1) else None,
                        "informative": (i, j) == (1, 1),
                    }
                )
    path = tmp_path / "overlaps.csv"
    harness.write_table(path, rows, harness.OVERLAP_COLUMNS)
    return path


@pytest.fixture
def threshold_csv(tmp_path):
    path = tmp_path / "thresholds.csv"
    rows = harness.threshold_map_rows(r_values=range(2, 5), etas=[0.5, 0.75, 1.0])
    harness.write_table(path, rows, harness.THRESHOLD_MAP_COLUMNS)
    return path


@pytest.fixture
def histogram_csv(tmp_path):
    rows = []
    for cluster, (mu, weight) in enumerate(((1.2, 2 / 3), (-0.4, 1 / 3))):
        for position in range(10):
            rows.append(
                {
                    "eigen_index": 1,
                    "cluster": cluster,
                    "bin_left": -2.0 + 0.4 * position,
                    "bin_right": -1.6 + 0.4 * position,
                    "count": position,
                    "density": 0.05 * position,
                    "weight": weight,
                    "mu": mu,
                    "sigma2": 0.5,
                }
            )
    path = tmp_path / "histogram.csv"
    harness.write_table(path, rows, harness.HISTOGRAM_COLUMNS)
    return path


@pytest.mark.parametrize(
    "kind, source",
    [
        (PlotKind.SPECTRUM_SCATTER, "spectrum_csv"),
        (PlotKind.OVERLAP_CURVES, "overlap_csv"),
        (PlotKind.THRESHOLD_MAP, "threshold_csv"),
        (PlotKind.HISTOGRAM, "histogram_csv"),
    ],
)
def test_plot_writes_svg(request, tmp_path, kind, source):
    out = tmp_path / "figure.svg"
    plot(request.getfixturevalue(source), kind.value, out)
    text = out.read_text(encoding="utf-8")
    assert text.lstrip().startswith("<?xml")
    assert "<svg" in text


def test_plot_output_is_reproducible(spectrum_csv, tmp_path):
    first, second = tmp_path / "first.svg", tmp_path / "second.svg"
    plot(spectrum_csv, "spectrum-scatter", first)
    plot(spectrum_csv, "spectrum-scatter", second)
    assert first.read_bytes() == second.read_bytes()


def test_plot_keeps_text_as_svg_text(overlap_csv, tmp_path):
    out = tmp_path / "figure.svg"
    plot(overlap_csv, "overlap-curves", out)
    assert "predicted" in out.read_text(encoding="utf-8")


@pytest.mark.parametrize("kind", [PlotKind.SPECTRUM_SCATTER, PlotKind.HISTOGRAM])
def test_plot_of_header_only_csv_writes_empty_figure(tmp_path, kind):
    path = tmp_path / "empty.csv"
    harness.write_table(path, [], REQUIRED_COLUMNS[kind])
    out = tmp_path / "figure.svg"
    plot(path, kind, out)
    assert out.exists()


def test_plot_with_missing_columns_raises_schema_error(spectrum_csv, tmp_path):
    with pytest.raises(SchemaError) as error:
        plot(spectrum_csv, "histogram", tmp_path / "figure.svg")
    assert error.value.kind == "histogram"
    assert "eigen_index" in error.value.missing
    assert not (tmp_path / "figure.svg").exists()


def test_plot_with_unknown_kind_raises_value_error(spectrum_csv, tmp_path):
    with pytest.raises(ValueError):
        plot(spectrum_csv, "pie", tmp_path / "figure.svg")
