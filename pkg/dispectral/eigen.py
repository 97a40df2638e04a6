"""
Eigensolvers for sparse non-symmetric adjacency matrices.

Sparse problems are handed to ARPACK (implicitly restarted Arnoldi for
general matrices, Lanczos for the Hermitian and the SVD problems) through
scipy.sparse.linalg; small problems, and the test oracle, go to the dense
LAPACK QR algorithm on the Hessenberg form.

Conventions for every result:

* eigenvalues are sorted by decreasing modulus, and within a complex
  conjugate pair the member with positive imaginary part comes first;
* vectors have unit Euclidean norm and their largest-modulus coordinate
  is real and positive (lowest index on exact ties);
* left vectors are eigenvectors of the transpose: A^T v = lambda v.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigs, eigsh, svds

from dispectral.errors import ConvergenceError, DegeneracyError, ValidationError
from dispectral.graph import as_csr
from dispectral.rng import make_rng


DEFAULT_TOL = 1e-10
DEFAULT_MAX_RESTARTS = 300
DENSE_ORACLE_LIMIT = 2000
HERMITIAN_TOLERANCE = 1e-12
# Two left/right eigenvalue matches closer than this (relative to |lambda_1|) collide.
MATCH_COLLISION = 1e-6
# Moduli are compared at this relative precision when ordering.
ORDER_DECIMALS = 10


@dataclass(frozen=True)
class EigenPairs:
    """Eigenvalues with unit right vectors u_i and left vectors v_i (as columns)."""

    values: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    residuals: np.ndarray
    left_residuals: np.ndarray

    def __len__(self):
        return self.values.size

    @property
    def moduli(self):
        return np.abs(self.values)

    def head(self, k):
        """The first k pairs."""
        return EigenPairs(
            values=self.values[:k],
            right_vectors=self.right_vectors[:, :k],
            left_vectors=self.left_vectors[:, :k],
            residuals=self.residuals[:k],
            left_residuals=self.left_residuals[:k],
        )


@dataclass(frozen=True)
class SvdTriplets:
    """Top singular values with unit left and right singular vectors (as columns)."""

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray


def krylov_dimension(k, n):
    """Arnoldi basis size: max(2k + 10, 30), capped by n."""
    return min(n, max(2 * k + 10, 30))


def fix_phase(vectors):
    """Rotate each column so that its largest-modulus entry is real positive."""
    vectors = np.array(vectors, dtype=complex, copy=True)
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    pivot_values = vectors[pivots, np.arange(vectors.shape[1])]
    moduli = np.abs(pivot_values)
    moduli[moduli == 0] = 1.0
    return vectors * (np.conj(pivot_values) / moduli)


def modulus_order(values):
    """Indices sorting values by decreasing modulus, positive imaginary part first."""
    values = np.asarray(values)
    if values.size == 0:
        return np.arange(0)
    scale = np.abs(values).max() or 1.0
    moduli = np.round(np.abs(values) / scale, ORDER_DECIMALS)
    return np.lexsort((-values.imag, -moduli))


def _normalize(vectors):
    norms = np.linalg.norm(vectors, axis=0)
    norms[norms == 0] = 1.0
    return vectors / norms


def _residuals(csr, values, vectors):
    if values.size == 0:
        return np.zeros(0)
    return np.linalg.norm(csr @ vectors - vectors * values, axis=0)


def _start_vector(rng, n, dtype):
    start = rng.standard_normal(n)
    if np.issubdtype(dtype, np.complexfloating):
        start = start + 1j * rng.standard_normal(n)
    return start / np.linalg.norm(start)


def _roundoff_allowance(csr):
    norm = sparse.linalg.norm(csr, 1) if csr.nnz else 0.0
    return 100 * np.finfo(float).eps * max(norm, 1.0) * np.sqrt(csr.shape[0])


def _keep_conjugates(values, k, is_real):
    """Number of leading values to keep so a conjugate pair is not split at position k."""
    if not is_real or k >= values.size or k == 0:
        return k
    last = values[k - 1]
    if abs(last.imag) > 0 and np.isclose(values[k], np.conj(last), rtol=1e-8, atol=0):
        return k + 1
    return k


def dense_eigen_oracle(matrix):
    """
    Full eigendecomposition by the LAPACK QR algorithm, sorted and phase-fixed.

    Left vectors satisfy A^T v = lambda v.
    """
    if sparse.issparse(matrix) or hasattr(matrix, "csr"):
        matrix = as_csr(matrix).toarray()
    dense = np.asarray(matrix)
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise ValidationError(f"Expected a square matrix, got shape {dense.shape}.")
    if dense.shape[0] > DENSE_ORACLE_LIMIT:
        raise ValidationError(
            f"Dense oracle is limited to n <= {DENSE_ORACLE_LIMIT}, got n={dense.shape[0]}."
        )
    try:
        values, left, right = scipy.linalg.eig(dense, left=True, right=True)
    except np.linalg.LinAlgError as e:
        raise ConvergenceError(f"QR algorithm did not converge: {e}") from e

    order = modulus_order(values)
    values = values[order].astype(complex)
    right = fix_phase(_normalize(right[:, order]))
    left = fix_phase(_normalize(np.conj(left[:, order])))
    return EigenPairs(
        values=values,
        right_vectors=right,
        left_vectors=left,
        residuals=_residuals(dense, values, right),
        left_residuals=_residuals(dense.T, values, left),
    )


def _arpack_eigs(csr, k, tol, max_iter, start):
    ncv = krylov_dimension(k, csr.shape[0])
    try:
        values, vectors = eigs(csr, k=k, which="LM", tol=tol, maxiter=max_iter, v0=start, ncv=ncv)
    except ArpackNoConvergence as e:
        partial = _residuals(csr, e.eigenvalues, e.eigenvectors) if len(e.eigenvalues) else None
        raise ConvergenceError(
            f"Arnoldi iteration did not converge after {max_iter} restarts "
            f"({len(e.eigenvalues)} of {k} pairs converged).",
            residuals=partial,
        ) from e
    except ArpackError as e:
        raise ConvergenceError(f"Arnoldi iteration failed: {e}") from e
    order = modulus_order(values)
    return values[order], vectors[:, order]


def _match_left(right_values, left_values, scale):
    """Greedy nearest-neighbour matching of left to right eigenvalues."""
    available = list(range(left_values.size))
    matches = []
    for value in right_values:
        distances = np.abs(left_values[available] - value)
        order = np.argsort(distances, kind="stable")
        if order.size > 1 and distances[order[1]] - distances[order[0]] < MATCH_COLLISION * scale:
            raise DegeneracyError(
                f"Cannot pair left and right eigenvectors of {value:.6g}: "
                "eigenvalues closer than the matching tolerance."
            )
        matches.append(available.pop(int(order[0])))
    return np.asarray(matches, dtype=np.int64)


def top_eigenpairs(
    matrix, k, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_RESTARTS, seed=None
):
    """
    The k eigenpairs of largest modulus, with left and right unit vectors.

    For real input one extra pair is returned when the k-th eigenvalue is
    complex and its conjugate would otherwise be cut off.
    """
    csr = as_csr(matrix)
    n = csr.shape[0]
    if csr.shape[0] != csr.shape[1]:
        raise ValidationError(f"Expected a square matrix, got shape {csr.shape}.")
    if not 1 <= k < n:
        raise ValidationError(f"Need 1 <= k < n, got k={k} and n={n}.")
    is_real = not np.iscomplexobj(csr.data)

    if k >= n - 2 or krylov_dimension(k + 1, n) >= n:
        pairs = dense_eigen_oracle(csr.toarray())
        keep = _keep_conjugates(pairs.values, k, is_real)
        return pairs.head(keep)

    rng = make_rng(seed)
    start = _start_vector(rng, n, csr.dtype)
    # One spare pair so that a conjugate pair at the cut can be completed.
    requested = k + 1
    values, right = _arpack_eigs(csr, requested, tol, max_iter, start)
    keep = _keep_conjugates(values, k, is_real)
    values, right = values[:keep], right[:, :keep]

    transposed = csr.transpose().tocsr()
    left_requested = min(keep + 2, n - 2)
    left_values, left = _arpack_eigs(transposed, left_requested, tol, max_iter, start)

    scale = float(np.abs(values[0])) if values.size else 1.0
    matches = _match_left(values, left_values, scale)
    left = left[:, matches]

    right = fix_phase(_normalize(right))
    left = fix_phase(_normalize(left))
    residuals = _residuals(csr, values, right)
    left_residuals = _residuals(transposed, values, left)

    bound = tol * scale + _roundoff_allowance(csr)
    worst = max(residuals.max(initial=0.0), left_residuals.max(initial=0.0))
    if worst > bound:
        raise ConvergenceError(
            f"Eigenpair residual {worst:.3g} exceeds tol * |lambda_1| = {tol * scale:.3g}.",
            residuals=residuals,
        )

    return EigenPairs(
        values=values.astype(complex),
        right_vectors=right,
        left_vectors=left,
        residuals=residuals,
        left_residuals=left_residuals,
    )


def _fix_svd_signs(left, right):
    pivots = np.argmax(np.abs(right), axis=0)
    signs = np.sign(right[pivots, np.arange(right.shape[1])])
    signs[signs == 0] = 1.0
    return left * signs, right * signs


def top_svd(matrix, k, tol=DEFAULT_TOL, seed=None, max_iter=None):
    """The k largest singular triplets."""
    csr = as_csr(matrix)
    smallest_side = min(csr.shape)
    if not 1 <= k <= smallest_side:
        raise ValidationError(f"Need 1 <= k <= min(shape), got k={k} and shape {csr.shape}.")

    if k >= smallest_side - 1 or krylov_dimension(k, smallest_side) >= smallest_side:
        try:
            left, singular_values, right_t = np.linalg.svd(csr.toarray())
        except np.linalg.LinAlgError as e:
            raise ConvergenceError(f"Dense SVD did not converge: {e}") from e
        left, right = left[:, :k], right_t[:k].conj().T
        singular_values = singular_values[:k]
    else:
        rng = make_rng(seed)
        start = _start_vector(rng, smallest_side, csr.dtype)
        try:
            left, singular_values, right_t = svds(
                csr,
                k=k,
                tol=tol,
                v0=start,
                which="LM",
                solver="arpack",
                maxiter=max_iter,
                ncv=krylov_dimension(k, smallest_side),
            )
        except ArpackNoConvergence as e:
            raise ConvergenceError(f"Lanczos SVD did not converge: {e}") from e
        except ArpackError as e:
            raise ConvergenceError(f"Lanczos SVD failed: {e}") from e
        order = np.argsort(-singular_values, kind="stable")
        singular_values = singular_values[order]
        left, right = left[:, order], right_t[order].conj().T

    if np.isrealobj(left) and np.isrealobj(right):
        left, right = _fix_svd_signs(left, right)
    return SvdTriplets(
        singular_values=np.asarray(singular_values, dtype=float),
        left_vectors=left,
        right_vectors=right,
    )


def gershgorin_upper_bound(csr):
    """Upper bound on the eigenvalue moduli: the largest absolute row sum."""
    if csr.nnz == 0:
        return 0.0
    return float(np.asarray(abs(csr).sum(axis=1)).max())


def check_hermitian(csr, tolerance=HERMITIAN_TOLERANCE):
    difference = csr - csr.conj().transpose()
    worst = abs(difference).max() if difference.nnz else 0.0
    if worst > tolerance:
        raise ValidationError(f"Matrix is not Hermitian: max |H - H^*| = {worst:.3g}.")


def hermitian_extreme(matrix, which="smallest", k=1, tol=DEFAULT_TOL, seed=None):
    """
    Extreme eigenpairs of a complex Hermitian matrix.

    Values are real and ordered from the requested end of the spectrum.
    The smallest pairs are the largest pairs of cI - H, with c the
    Gershgorin bound.
    """
    if which not in ("smallest", "largest"):
        raise ValidationError(f"which must be 'smallest' or 'largest', got {which!r}.")
    csr = as_csr(matrix).astype(complex)
    n = csr.shape[0]
    if csr.shape[0] != csr.shape[1]:
        raise ValidationError(f"Expected a square matrix, got shape {csr.shape}.")
    if not 1 <= k < n:
        raise ValidationError(f"Need 1 <= k < n, got k={k} and n={n}.")
    check_hermitian(csr)

    shift = gershgorin_upper_bound(csr) if which == "smallest" else 0.0
    operator = csr if which == "largest" else sparse.identity(n, format="csr") * shift - csr

    if k >= n - 1 or krylov_dimension(k, n) >= n:
        values, vectors = scipy.linalg.eigh(operator.toarray())
        order = np.argsort(-values, kind="stable")[:k]
        values, vectors = values[order], vectors[:, order]
    else:
        rng = make_rng(seed)
        start = _start_vector(rng, n, complex)
        try:
            values, vectors = eigsh(
                operator,
                k=k,
                which="LA",
                tol=tol,
                v0=start,
                ncv=krylov_dimension(k, n),
                maxiter=DEFAULT_MAX_RESTARTS * n,
            )
        except ArpackNoConvergence as e:
            raise ConvergenceError(f"Lanczos iteration did not converge: {e}") from e
        except ArpackError as e:
            raise ConvergenceError(f"Lanczos iteration failed: {e}") from e
        order = np.argsort(-values.real, kind="stable")
        values, vectors = values[order].real, vectors[:, order]

    if which == "smallest":
        values = shift - values
    vectors = fix_phase(_normalize(vectors))
    residuals = _residuals(csr, values, vectors)
    left = np.conj(vectors)
    return EigenPairs(
        values=np.asarray(values, dtype=float),
        right_vectors=vectors,
        left_vectors=left,
        residuals=residuals,
        left_residuals=_residuals(csr.transpose().tocsr(), values, left),
    )
