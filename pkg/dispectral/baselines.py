"""
Comparison methods: SVD embedding and the Hermitian (SimpleHerm) embedding.

Both end with k-means on the embedded nodes, with the same restart
policy as kmeans_fit.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from dispectral.clustering import DEFAULT_RESTARTS, kmeans_fit
from dispectral.eigen import hermitian_extreme, top_svd
from dispectral.errors import ValidationError
from dispectral.graph import as_csr
from dispectral.rng import spawn_seeds


@dataclass(frozen=True)
class HermitianEmbedding:
    """(Re, Im) of the eigenvector of the smallest eigenvalue of L."""

    points: np.ndarray
    eigenvalue: float
    omega_order: int


def _square_csr(matrix):
    csr = as_csr(matrix)
    if csr.shape[0] != csr.shape[1]:
        raise ValidationError(f"Expected a square matrix, got shape {csr.shape}.")
    return csr


def normalize_rows(points):
    """Scale every row to unit norm; zero rows stay zero."""
    norms = np.linalg.norm(points, axis=1)
    norms[norms == 0] = 1.0
    return points / norms[:, None]


def svd_embedding(matrix, k, seed=None):
    """n x 2k embedding: the k top left singular vectors, then the k right ones."""
    csr = _square_csr(matrix)
    triplets = top_svd(csr, k, seed=seed)
    return np.column_stack((triplets.left_vectors.real, triplets.right_vectors.real))


def svd_cluster(
    matrix, k, seed=None, normalize_embedding=False, restarts=DEFAULT_RESTARTS
):
    svd_seed, fit_seed = spawn_seeds(seed, 2)
    points = svd_embedding(matrix, k, seed=svd_seed)
    if normalize_embedding:
        points = normalize_rows(points)
    _, partition = kmeans_fit(points, k, restarts=restarts, seed=fit_seed)
    return partition


def omega_order(k):
    """ceil(2 pi k): 13 for k=2, 26 for k=4, 38 for k=6."""
    return math.ceil(2 * math.pi * k)


def hermitian_adjacency(matrix, k):
    """H = omega A + conj(omega) A^T, omega the ceil(2 pi k)-th root of unity."""
    csr = _square_csr(matrix)
    omega = np.exp(2j * np.pi / omega_order(k))
    transposed = csr.transpose().tocsr()
    return (csr * omega + transposed * np.conj(omega)).tocsr()


def hermitian_laplacian(matrix, k):
    """
    L = I - D^-1/2 H D^-1/2 with D the total (out + in) degree.

    Isolated nodes get a zero entry in D^-1/2.
    """
    csr = _square_csr(matrix)
    degrees = np.asarray(csr.sum(axis=1)).ravel() + np.asarray(csr.sum(axis=0)).ravel()
    inverse_roots = np.zeros(degrees.size)
    positive = degrees > 0
    inverse_roots[positive] = 1 / np.sqrt(degrees[positive])
    scaling = sparse.diags(inverse_roots)
    normalized = scaling @ hermitian_adjacency(csr, k) @ scaling
    return (sparse.identity(csr.shape[0], dtype=complex, format="csr") - normalized).tocsr()


def simpleherm_embedding(matrix, k, seed=None):
    laplacian = hermitian_laplacian(matrix, k)
    pairs = hermitian_extreme(laplacian, which="smallest", k=1, seed=seed)
    vector = pairs.right_vectors[:, 0]
    return HermitianEmbedding(
        points=np.column_stack((vector.real, vector.imag)),
        eigenvalue=float(pairs.values[0]),
        omega_order=omega_order(k),
    )


def simpleherm_cluster(
    matrix, k, seed=None, normalize_embedding=False, restarts=DEFAULT_RESTARTS
):
    eigen_seed, fit_seed = spawn_seeds(seed, 2)
    points = simpleherm_embedding(matrix, k, seed=eigen_seed).points
    if normalize_embedding:
        points = normalize_rows(points)
    _, partition = kmeans_fit(points, k, restarts=restarts, seed=fit_seed)
    return partition
