import numpy as np
import pytest
from scipy import sparse

from dispectral.baselines import (
    hermitian_adjacency,
    hermitian_laplacian,
    normalize_rows,
    omega_order,
    simpleherm_cluster,
    simpleherm_embedding,
    svd_cluster,
    svd_embedding,
)
from dispectral.clustering import adjusted_overlap
from dispectral.eigen import check_hermitian
from dispectral.errors import ValidationError
from dispectral.graph import sample, sbm_from_proportions

# pylint: disable=missing-docstring, redefined-outer-name


@pytest.fixture
def assortative_graph():
    spec = sbm_from_proportions([[60.0, 4.0], [4.0, 60.0]], (1, 1), 600)
    return sample(spec, seed=1), spec.sigma_left


@pytest.fixture
def flow_graph():
    spec = sbm_from_proportions([[2.0, 18.0], [2.0, 2.0]], (1, 1), 400)
    return sample(spec, seed=2)


@pytest.mark.parametrize("k, expected", [(2, 13), (4, 26), (6, 38)])
def test_omega_order(k, expected):
    assert omega_order(k) == expected


def test_hermitian_adjacency_is_hermitian(flow_graph):
    check_hermitian(hermitian_adjacency(flow_graph, 2))


def test_hermitian_adjacency_rotates_edge_directions():
    matrix = sparse.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    H = hermitian_adjacency(matrix, 2).toarray()
    omega = np.exp(2j * np.pi / 13)
    assert H[0, 1] == pytest.approx(omega)
    assert H[1, 0] == pytest.approx(np.conj(omega))


def test_hermitian_laplacian_spectrum_lies_in_zero_two(flow_graph):
    laplacian = hermitian_laplacian(flow_graph, 2)
    values = np.linalg.eigvalsh(laplacian.toarray())
    assert values.min() >= -1e-10
    assert values.max() <= 2 + 1e-10


def test_hermitian_laplacian_leaves_isolated_nodes_on_identity():
    matrix = sparse.csr_matrix(np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    laplacian = hermitian_laplacian(matrix, 2).toarray()
    assert laplacian[2, 2] == 1.0
    assert np.all(laplacian[2, :2] == 0)


def test_simpleherm_embedding_has_two_columns(flow_graph):
    embedding = simpleherm_embedding(flow_graph, 2, seed=3)
    assert embedding.points.shape == (400, 2)
    assert embedding.omega_order == 13
    assert -1e-9 <= embedding.eigenvalue < 1


def test_simpleherm_cluster_returns_full_partition(flow_graph):
    partition = simpleherm_cluster(flow_graph, 2, seed=4)
    assert partition.n == 400
    assert partition.k == 2
    assert partition.sizes().sum() == 400


def test_simpleherm_cluster_is_reproducible(flow_graph):
    first = simpleherm_cluster(flow_graph, 2, seed=5, normalize_embedding=True)
    second = simpleherm_cluster(flow_graph, 2, seed=5, normalize_embedding=True)
    assert np.array_equal(first.labels, second.labels)


def test_svd_embedding_stacks_left_then_right_vectors(assortative_graph):
    matrix, _ = assortative_graph
    assert svd_embedding(matrix, 3, seed=6).shape == (600, 6)


def test_svd_cluster_recovers_assortative_blocks(assortative_graph):
    matrix, truth = assortative_graph
    partition = svd_cluster(matrix, 2, seed=7)
    assert adjusted_overlap(truth, partition) > 0.9


def test_normalize_rows_keeps_zero_rows():
    points = normalize_rows(np.array([[3.0, 4.0], [0.0, 0.0]]))
    assert points.tolist() == [[0.6, 0.8], [0.0, 0.0]]


def test_svd_embedding_of_rectangular_matrix_raises_validation_error():
    with pytest.raises(ValidationError, match="square"):
        svd_embedding(np.ones((3, 4)), 1)
