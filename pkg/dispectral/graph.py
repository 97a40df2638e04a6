"""
Sparse directed weighted graphs and the random models they are sampled from.

A graph is stored as its weighted adjacency matrix A, with A[x, y] the
weight of the edge x -> y. Two generative models are supported:

* DenseModel: every entry (x, y) is present with probability P[x, y]
  and carries weight W[x, y].
* SbmModel: a directed stochastic block model with connectivity F,
  left memberships sigma_left and right memberships sigma_right; entry
  (x, y) is present with probability F[sigma_left(x), sigma_right(y)] / n.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from dispectral.errors import ValidationError
from dispectral.rng import make_rng


# Dense materialization of n x n model matrices is refused above this size.
DENSE_LIMIT = 2000


class SparseMatrix:
    """
    Immutable compressed-row n_rows x n_cols matrix.

    Column indices are sorted within each row, and no explicit zero is stored.
    """

    def __init__(self, matrix):
        """
        Construct from anything scipy.sparse understands (or a dense array).

        The input is copied and canonicalized.
        """
        csr = sparse.csr_matrix(matrix, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        csr.data.setflags(write=False)
        csr.indices.setflags(write=False)
        csr.indptr.setflags(write=False)
        self._csr = csr
        self._transpose = None

    @classmethod
    def from_entries(cls, rows, cols, values, shape):
        """Build from coordinate lists; duplicate coordinates are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values)
        if rows.size and (rows.min() < 0 or rows.max() >= shape[0]):
            raise ValidationError("Row index out of range.")
        if cols.size and (cols.min() < 0 or cols.max() >= shape[1]):
            raise ValidationError("Column index out of range.")
        return cls(sparse.coo_matrix((values, (rows, cols)), shape=shape))

    @property
    def csr(self):
        """The underlying read-only scipy CSR matrix."""
        return self._csr

    @property
    def shape(self):
        return self._csr.shape

    @property
    def n_rows(self):
        return self._csr.shape[0]

    @property
    def n_cols(self):
        return self._csr.shape[1]

    @property
    def nnz(self):
        return self._csr.nnz

    @property
    def dtype(self):
        return self._csr.dtype

    @property
    def is_square(self):
        return self.n_rows == self.n_cols

    def transpose(self):
        """Return the transpose, computed once and cached."""
        if self._transpose is None:
            self._transpose = SparseMatrix(self._csr.transpose())
            self._transpose._transpose = self
        return self._transpose

    @property
    def T(self):  # noqa: N802
        return self.transpose()

    def entries(self):
        """Yield (row, col, value) triples in row-major order."""
        coo = self._csr.tocoo()
        for row, col, value in zip(coo.row, coo.col, coo.data):
            yield int(row), int(col), value

    def toarray(self):
        return self._csr.toarray()

    def row_sums(self):
        return np.asarray(self._csr.sum(axis=1)).ravel()

    def col_sums(self):
        return np.asarray(self._csr.sum(axis=0)).ravel()

    def __matmul__(self, other):
        return self._csr @ other

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if self.shape != other.shape:
            return False
        return (self._csr != other.csr).nnz == 0

    def __hash__(self):
        return hash((self.shape, self.nnz, self._csr.data.tobytes(), self._csr.indices.tobytes()))

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz}, dtype={self.dtype})"


def as_csr(matrix):
    """Accept a SparseMatrix, a scipy sparse matrix or a dense array."""
    if isinstance(matrix, SparseMatrix):
        return matrix.csr
    if sparse.issparse(matrix):
        return sparse.csr_matrix(matrix)
    return sparse.csr_matrix(np.asarray(matrix))


class ModelSpec:
    """Base class of the generative models; subclasses provide n."""

    def validate(self):
        """Raise ValidationError when the model parameters are out of range."""
        raise NotImplementedError

    def expected_matrix(self):
        """Dense Q = P * W."""
        raise NotImplementedError

    def second_moment_matrix(self):
        """Dense K = P * W * W."""
        raise NotImplementedError

    def expected_mean_degree(self):
        """Exact n^-1 sum_{x,y} P[x, y]."""
        raise NotImplementedError

    def _check_dense_size(self):
        if self.n > DENSE_LIMIT:
            raise ValidationError(
                f"Refusing to materialize a dense {self.n}x{self.n} matrix (limit {DENSE_LIMIT})."
            )


@dataclass(frozen=True, eq=False)
class DenseModel(ModelSpec):
    """Inhomogeneous directed Erdos-Renyi model with explicit P and W."""

    P: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "P", np.asarray(self.P, dtype=float))
        object.__setattr__(self, "W", np.asarray(self.W))
        self.validate()

    @property
    def n(self):
        return self.P.shape[0]

    def validate(self):
        if self.P.ndim != 2 or self.P.shape[0] != self.P.shape[1]:
            raise ValidationError(f"P must be square, got shape {self.P.shape}.")
        if self.W.shape != self.P.shape:
            raise ValidationError(
                f"W shape {self.W.shape} does not match P shape {self.P.shape}."
            )
        if not np.all(np.isfinite(self.P)) or self.P.min() < 0 or self.P.max() > 1:
            raise ValidationError("Probabilities in P must lie in [0, 1].")

    def expected_matrix(self):
        return self.P * self.W

    def second_moment_matrix(self):
        return self.P * np.abs(self.W) ** 2

    def weight_sup_norm(self):
        """max |W[x, y]| over the entries that can appear."""
        possible = self.P > 0
        if not possible.any():
            return 0.0
        return float(np.abs(self.W[possible]).max())

    def expected_mean_degree(self):
        return float(self.P.sum()) / self.n


@dataclass(frozen=True, eq=False)
class SbmModel(ModelSpec):
    """Directed stochastic block model; edges are unweighted."""

    n: int
    F: np.ndarray
    sigma_left: np.ndarray
    sigma_right: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "F", np.asarray(self.F, dtype=float))
        left = np.asarray(self.sigma_left, dtype=np.int64)
        right = left if self.sigma_right is None else np.asarray(self.sigma_right, dtype=np.int64)
        object.__setattr__(self, "sigma_left", left)
        object.__setattr__(self, "sigma_right", right)
        self.validate()

    @property
    def r(self):
        return self.F.shape[0]

    @property
    def same_memberships(self):
        return np.array_equal(self.sigma_left, self.sigma_right)

    def validate(self):
        if self.F.ndim != 2 or self.F.shape[0] != self.F.shape[1]:
            raise ValidationError(f"F must be square, got shape {self.F.shape}.")
        if self.n < 1:
            raise ValidationError("n must be positive.")
        if not np.all(np.isfinite(self.F)) or self.F.min() < 0:
            raise ValidationError("Entries of F must be nonnegative.")
        if self.F.max() / self.n > 1:
            raise ValidationError(
                f"max(F)/n = {self.F.max() / self.n:.4g} exceeds 1: not a probability."
            )
        for name, sigma in (("sigma_left", self.sigma_left), ("sigma_right", self.sigma_right)):
            if sigma.shape != (self.n,):
                raise ValidationError(f"{name} must have length n={self.n}.")
            if sigma.min() < 0 or sigma.max() >= self.r:
                raise ValidationError(f"{name} labels must lie in [0, {self.r}).")

    def block_sizes(self):
        """Sizes of the left and the right clusters."""
        return (
            np.bincount(self.sigma_left, minlength=self.r),
            np.bincount(self.sigma_right, minlength=self.r),
        )

    def q_entries(self, x, y):
        """Q[x, y] for index arrays x, y, without building Q."""
        return self.F[self.sigma_left[x], self.sigma_right[y]] / self.n

    # Unweighted model: K = Q.
    k_entries = q_entries

    def k_matvec(self, vector):
        """K @ vector in O(n + r^2) through the block structure."""
        vector = np.asarray(vector)
        block = _block_sum(self.sigma_right, vector, self.r)
        return (self.F @ block)[self.sigma_left] / self.n

    def k_rmatvec(self, vector):
        """K^T @ vector in O(n + r^2)."""
        vector = np.asarray(vector)
        block = _block_sum(self.sigma_left, vector, self.r)
        return (self.F.T @ block)[self.sigma_right] / self.n

    def dense_probabilities(self):
        self._check_dense_size()
        return self.F[np.ix_(self.sigma_left, self.sigma_right)] / self.n

    def expected_matrix(self):
        return self.dense_probabilities()

    def second_moment_matrix(self):
        return self.dense_probabilities()

    def expected_mean_degree(self):
        left, right = self.block_sizes()
        return float(left @ self.F @ right) / self.n**2


def _block_sum(sigma, vector, r):
    """Sum the entries of vector per cluster."""
    if np.iscomplexobj(vector):
        return np.bincount(sigma, weights=vector.real, minlength=r) + 1j * np.bincount(
            sigma, weights=vector.imag, minlength=r
        )
    return np.bincount(sigma, weights=vector, minlength=r)


@dataclass(frozen=True)
class SbmSummary:
    """Cluster proportions p, q, intersection matrix Pi and modularity F Pi."""

    p: np.ndarray
    q: np.ndarray
    Pi: np.ndarray
    modularity: np.ndarray


def sbm_summary(spec):
    """
    Count memberships of an SbmModel.

    Pi[i, j] is the fraction of nodes with right label i and left label j,
    so that the nonzero eigenvalues of Q are those of F @ Pi.
    """
    if not isinstance(spec, SbmModel):
        raise ValidationError("sbm_summary needs an SbmModel.")
    r, n = spec.r, spec.n
    left, right = spec.block_sizes()
    intersection = np.zeros((r, r))
    np.add.at(intersection, (spec.sigma_right, spec.sigma_left), 1.0)
    intersection /= n
    return SbmSummary(
        p=left / n,
        q=right / n,
        Pi=intersection,
        modularity=spec.F @ intersection,
    )


def block_memberships(proportions, n):
    """
    Contiguous memberships of n nodes for the given cluster proportions.

    Sizes are rounded down and the remainder goes to the first clusters.
    """
    proportions = np.asarray(proportions, dtype=float)
    if proportions.ndim != 1 or proportions.size == 0 or proportions.min() < 0:
        raise ValidationError("Proportions must be a nonempty nonnegative vector.")
    proportions = proportions / proportions.sum()
    sizes = np.floor(proportions * n).astype(np.int64)
    sizes[: n - sizes.sum()] += 1
    return np.repeat(np.arange(proportions.size), sizes)


def pathwise_connectivity(r_blocks, s, eta):
    """Tridiagonal Toeplitz F: s/2 on the diagonal, s*eta above, s*(1-eta) below."""
    connectivity = np.diag(np.full(r_blocks, s / 2))
    connectivity += np.diag(np.full(r_blocks - 1, s * eta), k=1)
    connectivity += np.diag(np.full(r_blocks - 1, s * (1 - eta)), k=-1)
    return connectivity


def pathwise_spec(r_blocks, s, eta, n):
    """
    Pathwise SBM with r_blocks equal contiguous clusters.

    Identical left and right memberships.
    """
    if r_blocks < 1:
        raise ValidationError("r_blocks must be positive.")
    if n % r_blocks:
        raise ValidationError(f"n={n} is not divisible by r_blocks={r_blocks}.")
    if s <= 0:
        raise ValidationError("s must be positive.")
    if not 0.5 <= eta <= 1:
        raise ValidationError(f"eta={eta} must lie in [1/2, 1].")
    sigma = np.repeat(np.arange(r_blocks), n // r_blocks)
    return SbmModel(n=n, F=pathwise_connectivity(r_blocks, s, eta), sigma_left=sigma)


def two_block_spec(s, eta, n):
    """The two-block pathwise model."""
    return pathwise_spec(2, s, eta, n)


def sbm_from_proportions(F, proportions, n):
    """SBM with identical contiguous memberships of the given proportions."""
    return SbmModel(n=n, F=F, sigma_left=block_memberships(proportions, n))


def sample(spec, seed=None):
    """
    Draw the adjacency matrix of one graph from the model.

    Every entry, the diagonal included, is present independently.
    """
    rng = make_rng(seed)
    if isinstance(spec, SbmModel):
        return _sample_sbm(spec, rng)
    if isinstance(spec, DenseModel):
        spec.validate()
        present = rng.random(spec.P.shape) < spec.P
        rows, cols = np.nonzero(present)
        return SparseMatrix.from_entries(rows, cols, spec.W[rows, cols], spec.P.shape)
    raise ValidationError(f"Unknown model type {type(spec).__name__}.")


def sample_naive(spec, seed=None):
    """Per-entry Bernoulli sampler of an SbmModel; O(n^2), reference only."""
    rng = make_rng(seed)
    if not isinstance(spec, SbmModel):
        return sample(spec, rng)
    probabilities = spec.dense_probabilities()
    rows, cols = np.nonzero(rng.random(probabilities.shape) < probabilities)
    return SparseMatrix.from_entries(rows, cols, np.ones(rows.size), probabilities.shape)


def _sample_sbm(spec, rng):
    spec.validate()
    left_members = [np.flatnonzero(spec.sigma_left == i) for i in range(spec.r)]
    right_members = [np.flatnonzero(spec.sigma_right == j) for j in range(spec.r)]
    rows, cols = [], []
    for i in range(spec.r):
        for j in range(spec.r):
            n_i, n_j = left_members[i].size, right_members[j].size
            size = n_i * n_j
            probability = spec.F[i, j] / spec.n
            if size == 0 or probability == 0:
                continue
            count = int(rng.binomial(size, probability))
            positions = _distinct_positions(rng, size, count)
            rows.append(left_members[i][positions // n_j])
            cols.append(right_members[j][positions % n_j])
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
    return SparseMatrix.from_entries(rows, cols, np.ones(len(rows)), (spec.n, spec.n))


def _distinct_positions(rng, size, count):
    """Uniform random subset of range(size) with count elements."""
    if count == 0:
        return np.empty(0, dtype=np.int64)
    if 2 * count > size:
        return rng.permutation(size)[:count]
    chosen = np.unique(rng.integers(0, size, size=count))
    while chosen.size < count:
        extra = rng.integers(0, size, size=count - chosen.size)
        chosen = np.union1d(chosen, extra)
    return chosen
