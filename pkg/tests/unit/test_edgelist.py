import numpy as np
import pytest

from dispectral.edgelist import (
    format_float,
    read_edgelist,
    read_memberships,
    write_edgelist,
    write_memberships,
)
from dispectral.errors import ValidationError
from dispectral.graph import SparseMatrix, sample, two_block_spec

# pylint: disable=missing-docstring, redefined-outer-name


def test_format_float_keeps_17_significant_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(2.0) == "2"


def test_edgelist_preserves_sampled_graph(tmp_path):
    matrix = sample(two_block_spec(10.0, 0.9, 300), seed=2)
    path = tmp_path / "graph.tsv"
    write_edgelist(path, matrix)
    assert read_edgelist(path) == matrix


def test_edgelist_preserves_isolated_trailing_nodes(tmp_path):
    matrix = SparseMatrix.from_entries([0], [1], [0.3], (5, 5))
    path = tmp_path / "graph.tsv"
    write_edgelist(path, matrix)
    loaded = read_edgelist(path)
    assert loaded.shape == (5, 5)
    assert loaded.toarray()[0, 1] == 0.3


def test_edgelist_header_records_n(tmp_path):
    path = tmp_path / "graph.tsv"
    write_edgelist(path, SparseMatrix(np.zeros((7, 7))))
    assert path.read_text(encoding="utf-8") == "# dispectral-edgelist v1 n=7\n"


def test_write_edgelist_with_complex_weights_raises_validation_error(tmp_path):
    matrix = SparseMatrix(np.array([[0, 1j], [0, 0]]))
    with pytest.raises(ValidationError, match="real weights"):
        write_edgelist(tmp_path / "graph.tsv", matrix)


def test_read_edgelist_without_header_raises_validation_error(tmp_path):
    path = tmp_path / "graph.tsv"
    path.write_text("0\t1\t1\n", encoding="utf-8")
    with pytest.raises(ValidationError, match="header"):
        read_edgelist(path)


def test_read_edgelist_reports_line_number_of_bad_line(tmp_path):
    path = tmp_path / "graph.tsv"
    path.write_text("# dispectral-edgelist v1 n=3\n0\t1\t1\n2\t1\n", encoding="utf-8")
    with pytest.raises(ValidationError, match=r"graph.tsv:3"):
        read_edgelist(path)


def test_read_edgelist_with_node_out_of_range_raises_validation_error(tmp_path):
    path = tmp_path / "graph.tsv"
    path.write_text("# dispectral-edgelist v1 n=2\n0\t5\t1\n", encoding="utf-8")
    with pytest.raises(ValidationError, match="out of range"):
        read_edgelist(path)


def test_memberships_file_holds_one_label_per_line(tmp_path):
    path = tmp_path / "labels.txt"
    write_memberships(path, np.array([0, 2, 1, 1]))
    assert path.read_text(encoding="utf-8") == "0\n2\n1\n1\n"
    assert read_memberships(path).tolist() == [0, 2, 1, 1]


def test_read_memberships_with_text_raises_validation_error(tmp_path):
    path = tmp_path / "labels.txt"
    path.write_text("0\nblue\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        read_memberships(path)


def test_read_edgelist_with_invalid_utf8_reports_line_number(tmp_path):
    path = tmp_path / "graph.tsv"
    path.write_bytes(b"# dispectral-edgelist v1 n=3\n0\t1\t1\n2\t\xff\t1\n")
    with pytest.raises(ValidationError, match=r"graph.tsv:3: not valid UTF-8"):
        read_edgelist(path)


def test_read_edgelist_sums_repeated_edges(tmp_path):
    path = tmp_path / "graph.tsv"
    path.write_text(
        "# dispectral-edgelist v1 n=3\n0\t1\t1\n2\t0\t0.5\n0\t1\t2.5\n", encoding="utf-8"
    )
    matrix = read_edgelist(path)
    assert matrix.nnz == 2
    assert matrix.toarray()[0, 1] == 3.5


def test_read_edgelist_without_duplicates_allowed_names_both_lines(tmp_path):
    path = tmp_path / "graph.tsv"
    path.write_text("# dispectral-edgelist v1 n=3\n0\t1\t1\n2\t0\t1\n0\t1\t1\n", encoding="utf-8")
    message = r"graph.tsv:4: edge 0 -> 1 already listed on line 2"
    with pytest.raises(ValidationError, match=message):
        read_edgelist(path, allow_duplicates=False)


def test_read_memberships_with_invalid_utf8_raises_validation_error(tmp_path):
    path = tmp_path / "labels.txt"
    path.write_bytes(b"0\n1\n\xc3\x28\n")
    with pytest.raises(ValidationError, match=r"labels.txt:3"):
        read_memberships(path)
