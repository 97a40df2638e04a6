"""Unit tests for graph storage, models and samplers."""

import dataclasses

import numpy as np
import pytest
from scipy import sparse, stats

from dispectral.errors import ValidationError
from dispectral.graph import (
    DenseModel,
    SbmModel,
    SparseMatrix,
    block_memberships,
    pathwise_connectivity,
    pathwise_spec,
    sample,
    sample_naive,
    sbm_summary,
    two_block_spec,
)

# pylint: disable=missing-docstring, redefined-outer-name


@pytest.fixture
def three_block():
    F = np.array([[6.0, 1.0, 0.5], [2.0, 4.0, 1.0], [0.0, 3.0, 5.0]])
    sigma_left = np.repeat([0, 1, 2], [20, 25, 15])
    sigma_right = np.repeat([2, 0, 1], [10, 30, 20])
    return SbmModel(n=60, F=F, sigma_left=sigma_left, sigma_right=sigma_right)


def test_sparse_matrix_sums_duplicates_and_drops_zeros():
    matrix = SparseMatrix.from_entries([0, 0, 1, 2], [1, 1, 0, 2], [1.0, 2.0, 0.0, 4.0], (3, 3))
    assert matrix.nnz == 2
    assert matrix.toarray()[0, 1] == 3.0
    assert list(matrix.entries()) == [(0, 1, 3.0), (2, 2, 4.0)]


def test_sparse_matrix_is_read_only():
    matrix = SparseMatrix(np.eye(3))
    with pytest.raises(ValueError):
        matrix.csr.data[0] = 5.0


def test_sparse_matrix_transpose_is_cached_and_involutive():
    matrix = SparseMatrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert matrix.T is matrix.transpose()
    assert matrix.T.T is matrix
    assert matrix.T.toarray()[1, 0] == 1.0


def test_sparse_matrix_equality_and_hash_follow_content():
    first = SparseMatrix(sparse.random(10, 10, density=0.3, random_state=1))
    second = SparseMatrix(first.csr.copy())
    assert first == second
    assert hash(first) == hash(second)
    assert first != SparseMatrix(np.zeros((10, 10)))


def test_from_entries_with_index_out_of_range_raises_validation_error():
    with pytest.raises(ValidationError, match="Column index"):
        SparseMatrix.from_entries([0], [3], [1.0], (3, 3))


def test_sbm_model_fields_keep_declaration_order():
    assert [item.name for item in dataclasses.fields(SbmModel)] == [
        "n",
        "F",
        "sigma_left",
        "sigma_right",
    ]
    model = SbmModel(4, [[1.0]], np.zeros(4))
    assert model.n == 4
    assert model.same_memberships


def test_sbm_model_without_n_raises_type_error():
    with pytest.raises(TypeError):
        SbmModel(F=[[1.0]], sigma_left=np.zeros(4))  # pylint: disable=no-value-for-parameter


def test_sbm_model_with_probability_above_one_raises_validation_error():
    with pytest.raises(ValidationError, match="exceeds 1"):
        SbmModel(n=4, F=np.full((2, 2), 5.0), sigma_left=[0, 0, 1, 1])


def test_sbm_model_with_wrong_membership_length_raises_validation_error():
    with pytest.raises(ValidationError, match="length n"):
        SbmModel(n=4, F=np.ones((2, 2)), sigma_left=[0, 1, 1])


def test_sbm_model_with_label_out_of_range_raises_validation_error():
    with pytest.raises(ValidationError, match="labels"):
        SbmModel(n=3, F=np.ones((2, 2)), sigma_left=[0, 1, 2])


def test_k_matvec_matches_dense_second_moment(three_block):
    x = np.random.default_rng(3).standard_normal(60)
    dense = three_block.second_moment_matrix()
    assert np.allclose(three_block.k_matvec(x), dense @ x)
    assert np.allclose(three_block.k_rmatvec(x), dense.T @ x)


def test_k_matvec_accepts_complex_vectors(three_block):
    rng = np.random.default_rng(4)
    x = rng.standard_normal(60) + 1j * rng.standard_normal(60)
    assert np.allclose(three_block.k_matvec(x), three_block.second_moment_matrix() @ x)


def test_expected_mean_degree_is_exact_sum_of_probabilities(three_block):
    expected = three_block.dense_probabilities().sum() / 60
    assert three_block.expected_mean_degree() == pytest.approx(expected, rel=1e-12)


def test_modularity_eigenvalues_are_nonzero_eigenvalues_of_q(three_block):
    summary = sbm_summary(three_block)
    q_values = np.linalg.eigvals(three_block.expected_matrix())
    q_values = q_values[np.abs(q_values) > 1e-9]
    modularity_values = np.linalg.eigvals(summary.modularity)
    assert np.allclose(
        np.sort_complex(np.round(q_values, 9)), np.sort_complex(np.round(modularity_values, 9))
    )
    assert summary.p.sum() == pytest.approx(1.0)
    assert summary.Pi.sum() == pytest.approx(1.0)


def test_block_memberships_gives_remainder_to_first_clusters():
    labels = block_memberships((2 / 3, 1 / 3), 10)
    assert np.bincount(labels).tolist() == [7, 3]
    assert np.all(np.diff(labels) >= 0)


def test_pathwise_connectivity_is_tridiagonal_toeplitz():
    F = pathwise_connectivity(4, 10.0, 0.9)
    assert np.allclose(np.diag(F), 5.0)
    assert np.allclose(np.diag(F, k=1), 9.0)
    assert np.allclose(np.diag(F, k=-1), 1.0)
    assert F[0, 2] == 0.0


def test_two_block_connectivity_matches_worked_example():
    assert np.allclose(two_block_spec(10.0, 0.9, 100).F, [[5.0, 9.0], [1.0, 5.0]])


def test_pathwise_spec_with_indivisible_n_raises_validation_error():
    with pytest.raises(ValidationError, match="not divisible"):
        pathwise_spec(6, 8.0, 0.7, 2500)


@pytest.mark.parametrize("eta", [0.4, 1.1])
def test_pathwise_spec_with_eta_outside_range_raises_validation_error(eta):
    with pytest.raises(ValidationError, match="eta"):
        pathwise_spec(2, 8.0, eta, 100)


def test_dense_materialization_above_limit_is_refused():
    spec = two_block_spec(10.0, 0.9, 4000)
    with pytest.raises(ValidationError, match="dense"):
        spec.dense_probabilities()


def test_sample_with_same_seed_is_identical():
    spec = two_block_spec(10.0, 0.9, 200)
    assert sample(spec, seed=11) == sample(spec, seed=11)
    assert sample(spec, seed=11) != sample(spec, seed=12)


def test_sample_has_unit_weights_and_expected_edge_count():
    spec = two_block_spec(10.0, 0.9, 2000)
    matrix = sample(spec, seed=5)
    assert np.all(matrix.csr.data == 1.0)
    # n * mean degree = 2000 * 5, standard deviation about 100.
    assert abs(matrix.nnz - 10_000) < 500


def test_sample_block_counts_are_unbiased(three_block):
    counts = np.zeros((3, 3))
    left, right = three_block.block_sizes()
    for seed in range(200):
        matrix = sample(three_block, seed=seed)
        rows, cols = matrix.csr.nonzero()
        np.add.at(counts, (three_block.sigma_left[rows], three_block.sigma_right[cols]), 1)
    expected = 200 * np.outer(left, right) * three_block.F / three_block.n
    cells = expected > 0
    assert np.all(counts[~cells] == 0)
    statistic = np.sum((counts[cells] - expected[cells]) ** 2 / expected[cells])
    assert stats.chi2.sf(statistic, df=cells.sum()) > 1e-3


def test_block_sampler_agrees_with_naive_sampler_on_average(three_block):
    block = [sample(three_block, seed=seed).nnz for seed in range(150)]
    naive = [sample_naive(three_block, seed=1000 + seed).nnz for seed in range(150)]
    spread = np.sqrt(np.var(block) / 150 + np.var(naive) / 150)
    assert abs(np.mean(block) - np.mean(naive)) < 5 * spread


def test_dense_model_sample_uses_weights():
    P = np.array([[1.0, 0.0], [1.0, 1.0]])
    W = np.array([[2.0, 7.0], [-1.0, 0.5]])
    matrix = sample(DenseModel(P=P, W=W), seed=0)
    assert np.array_equal(matrix.toarray(), [[2.0, 0.0], [-1.0, 0.5]])


def test_dense_model_with_probability_out_of_range_raises_validation_error():
    with pytest.raises(ValidationError, match="Probabilities"):
        DenseModel(P=np.full((2, 2), 1.5), W=np.ones((2, 2)))
