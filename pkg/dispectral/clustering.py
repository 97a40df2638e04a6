"""
Spectral clustering of directed graphs from the raw adjacency eigenvectors.

cluster_digraph runs the whole pipeline: the top eigenpairs of A, an
estimate of r0 when requested, the left/right embedding of the nodes
and a Gaussian mixture (or k-means) fit of the resulting cloud. The
adjacency matrix is used as is: no trimming, pruning or normalization.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp
from sklearn.metrics import adjusted_rand_score
from sklearn.metrics.cluster import contingency_matrix

from dispectral.eigen import DEFAULT_TOL, top_eigenpairs
from dispectral.errors import ClusteringError, ValidationError
from dispectral.graph import as_csr
from dispectral.rng import make_rng, spawn_seeds


DEFAULT_R0_MARGIN = 0.1
DEFAULT_RESTARTS = 10
# Imaginary parts below this (relative to |lambda_1|) count as real eigenvalues.
REAL_TOLERANCE = 1e-10
# Covariance floor, relative to the mean diagonal of the pooled covariance.
COVARIANCE_REGULARIZATION = 1e-6
METHODS = ("gmm", "kmeans")


@dataclass(frozen=True)
class Partition:
    """Hard assignment of n nodes to k clusters."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValidationError(f"Labels must lie in [0, {self.k}).")

    @classmethod
    def from_labels(cls, labels):
        labels = np.asarray(labels, dtype=np.int64)
        return cls(labels=labels, k=int(labels.max()) + 1 if labels.size else 0)

    @property
    def n(self):
        return self.labels.size

    def sizes(self):
        return np.bincount(self.labels, minlength=self.k)


@dataclass(frozen=True)
class Embedding:
    """
    Node coordinates built from eigenvectors.

    realification_map names each column: "u2" for a real eigenvector, or
    "u2.re" and "u2.im" for the representative of a conjugate pair; left
    vectors are named "v<i>".
    """

    points: np.ndarray
    r0: int
    realification_map: tuple
    sides: str = "both"

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class GmmModel:
    """Fitted Gaussian mixture; history holds the mean log-likelihood per EM iteration."""

    k: int
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: float
    history: tuple = ()
    converged: bool = True
    restart: int = 0

    def _log_joint(self, points):
        points = _as_points(points)
        return np.log(self.weights) + _log_gaussians(points, self.means, self.covariances)

    def predict_proba(self, points):
        """Responsibilities of every component for every point."""
        log_joint = self._log_joint(points)
        return np.exp(log_joint - logsumexp(log_joint, axis=1, keepdims=True))

    def predict(self, points):
        return np.argmax(self._log_joint(points), axis=1)

    def score(self, points):
        """Mean per-point log-likelihood of new points."""
        return float(logsumexp(self._log_joint(points), axis=1).mean())


@dataclass(frozen=True)
class KMeansModel:
    centers: np.ndarray
    cost: float
    n_iter: int = 0
    restart: int = 0

    def predict(self, points):
        return np.argmin(cdist(_as_points(points), self.centers, "sqeuclidean"), axis=1)


@dataclass(frozen=True)
class ClusteringDiagnostics:
    """What cluster_digraph saw and decided; serialized by the cluster command."""

    eigenvalues: np.ndarray
    residuals: np.ndarray
    left_residuals: np.ndarray
    r0: int
    r0_estimated: bool
    method: str
    embedding_columns: tuple
    log_likelihood: float = None
    cost: float = None
    timings: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "eigenvalues": [[float(v.real), float(v.imag)] for v in self.eigenvalues],
            "moduli": [float(v) for v in np.abs(self.eigenvalues)],
            "residuals": [float(v) for v in self.residuals],
            "left_residuals": [float(v) for v in self.left_residuals],
            "r0": self.r0,
            "r0_estimated": self.r0_estimated,
            "method": self.method,
            "embedding_columns": list(self.embedding_columns),
            "log_likelihood": self.log_likelihood,
            "cost": self.cost,
            "timings_ms": dict(self.timings),
        }


def _as_points(points):
    if isinstance(points, Embedding):
        points = points.points
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    return points


def _is_real(value, scale):
    return abs(value.imag) <= REAL_TOLERANCE * scale


def _realify(vectors, values, r0, prefix, scale):
    columns, names = [], []
    for i in range(r0):
        value = values[i]
        label = f"{prefix}{i + 1}"
        if _is_real(value, scale):
            columns.append(vectors[:, i].real)
            names.append(label)
            continue
        # Values are ordered with the positive imaginary part first: skip the partner.
        if value.imag < 0 and i > 0 and np.isclose(values[i - 1], np.conj(value)):
            continue
        columns.extend((vectors[:, i].real, vectors[:, i].imag))
        names.extend((f"{label}.re", f"{label}.im"))
    return columns, names


def embed(pairs, r0, sides="both"):
    """
    Embed node x as (u_1(x), ..., u_r0(x), v_1(x), ..., v_r0(x)).

    A complex conjugate pair contributes the real and imaginary parts of one
    representative; sides="right" keeps the right eigenvectors only.
    """
    if sides not in ("both", "right"):
        raise ValidationError(f"sides must be 'both' or 'right', got {sides!r}.")
    if r0 < 1 or r0 > len(pairs):
        raise ValidationError(f"r0={r0} must lie in [1, {len(pairs)}] (available pairs).")
    values = np.asarray(pairs.values, dtype=complex)
    scale = float(np.abs(values[0])) or 1.0
    columns, names = _realify(pairs.right_vectors, values, r0, "u", scale)
    if sides == "both":
        left_columns, left_names = _realify(pairs.left_vectors, values, r0, "v", scale)
        columns += left_columns
        names += left_names
    return Embedding(
        points=np.column_stack(columns),
        r0=r0,
        realification_map=tuple(names),
        sides=sides,
    )


def estimate_r0(values, margin=DEFAULT_R0_MARGIN):
    """Number of eigenvalues with modulus above (1 + margin) sqrt(|lambda_1|)."""
    moduli = np.abs(np.asarray(values))
    if moduli.size == 0:
        raise ValidationError("Cannot estimate r0 from an empty spectrum.")
    threshold = (1 + margin) * math.sqrt(moduli.max())
    return int(np.count_nonzero(moduli > threshold))


def kmeans_plusplus(points, k, rng):
    """k-means++ seeding: each new center drawn with probability proportional to D^2."""
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    distances = cdist(points, centers[0][None, :], "sqeuclidean").ravel()
    for _ in range(1, k):
        total = distances.sum()
        if total > 0:
            index = rng.choice(n, p=distances / total)
        else:
            index = rng.integers(n)
        centers.append(points[index])
        distances = np.minimum(
            distances, cdist(points, points[index][None, :], "sqeuclidean").ravel()
        )
    return np.array(centers)


def _log_gaussians(points, means, covariances):
    """log N(x | mean_c, cov_c) for every point and component; raises LinAlgError."""
    n, dim = points.shape
    result = np.empty((n, means.shape[0]))
    for c, (mean, covariance) in enumerate(zip(means, covariances)):
        cholesky = np.linalg.cholesky(covariance)
        solved = np.linalg.solve(cholesky, (points - mean).T)
        log_det = 2 * np.log(np.diag(cholesky)).sum()
        result[:, c] = -0.5 * (dim * np.log(2 * np.pi) + log_det + (solved**2).sum(axis=0))
    return result


def _pooled_covariance(points):
    return np.atleast_2d(np.cov(points, rowvar=False, bias=True))


def _em_run(points, k, tol, max_iter, rng, regularization):
    n, dim = points.shape
    pooled = _pooled_covariance(points)
    floor = regularization * np.eye(dim)

    weights = np.full(k, 1 / k)
    means = kmeans_plusplus(points, k, rng)
    covariances = np.array([pooled + floor for _ in range(k)])

    history = []
    converged = False
    for _ in range(max_iter):
        log_joint = np.log(weights) + _log_gaussians(points, means, covariances)
        log_norm = logsumexp(log_joint, axis=1)
        history.append(float(log_norm.mean()))
        if len(history) > 1 and history[-1] - history[-2] < tol:
            converged = True
            break

        responsibilities = np.exp(log_joint - log_norm[:, None])
        counts = responsibilities.sum(axis=0)
        if counts.min() <= 10 * np.finfo(float).eps * n:
            raise np.linalg.LinAlgError("A mixture component lost all its points.")
        weights = counts / n
        means = (responsibilities.T @ points) / counts[:, None]
        for c in range(k):
            centered = points - means[c]
            covariances[c] = (responsibilities[:, c, None] * centered).T @ centered / counts[c]
            covariances[c] += floor

    labels = np.argmax(log_joint, axis=1)
    model = GmmModel(
        k=k,
        weights=weights,
        means=means,
        covariances=covariances,
        log_likelihood=history[-1],
        history=tuple(history),
        converged=converged,
    )
    return model, labels


def gmm_fit(points, k, restarts=DEFAULT_RESTARTS, tol=1e-7, max_iter=500, seed=None):
    """
    Full-covariance Gaussian mixture by EM, best of several restarts.

    Each restart starts from k-means++ centers with the pooled covariance.
    A restart whose covariances collapse is dropped.
    """
    points = _as_points(points)
    n, dim = points.shape
    if k < 1:
        raise ValidationError("k must be positive.")
    if n < k * (dim + 1):
        raise ValidationError(f"Need at least k*(dim+1) = {k * (dim + 1)} points, got {n}.")
    if restarts < 1:
        raise ValidationError("restarts must be positive.")

    pooled = _pooled_covariance(points)
    scale = float(np.mean(np.diag(pooled)))
    regularization = COVARIANCE_REGULARIZATION * (scale if scale > 0 else 1.0)

    best, best_labels = None, None
    for restart, child in enumerate(spawn_seeds(seed, restarts)):
        try:
            model, labels = _em_run(points, k, tol, max_iter, make_rng(child), regularization)
        except np.linalg.LinAlgError:
            continue
        if best is None or model.log_likelihood > best.log_likelihood:
            best = replace(model, restart=restart)
            best_labels = labels
    if best is None:
        raise ClusteringError(f"All {restarts} EM restarts collapsed.")
    return best, Partition(labels=best_labels, k=k)


def _repair_empty(points, labels, centers, k):
    """Give each empty cluster the point of the largest cluster farthest from its center."""
    sizes = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(sizes == 0):
        largest = int(np.argmax(sizes))
        members = np.flatnonzero(labels == largest)
        distances = ((points[members] - centers[largest]) ** 2).sum(axis=1)
        moved = members[int(np.argmax(distances))]
        labels[moved] = empty
        centers[empty] = points[moved]
        sizes[largest] -= 1
        sizes[empty] = 1
    return labels, centers


def _lloyd(points, k, rng, max_iter):
    centers = kmeans_plusplus(points, k, rng)
    labels = None
    for iteration in range(1, max_iter + 1):
        new_labels = np.argmin(cdist(points, centers, "sqeuclidean"), axis=1)
        new_labels, centers = _repair_empty(points, new_labels, centers, k)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            centers[c] = points[labels == c].mean(axis=0)
    cost = float(((points - centers[labels]) ** 2).sum())
    return KMeansModel(centers=centers, cost=cost, n_iter=iteration), labels


def kmeans_fit(points, k, restarts=DEFAULT_RESTARTS, seed=None, max_iter=300):
    """Lloyd iterations from k-means++ seeds; best of restarts by within-cluster cost."""
    points = _as_points(points)
    n = points.shape[0]
    if k < 1:
        raise ValidationError("k must be positive.")
    if k > n:
        raise ValidationError(f"k={k} exceeds the number of points n={n}.")

    best, best_labels = None, None
    for restart, child in enumerate(spawn_seeds(seed, restarts)):
        model, labels = _lloyd(points, k, make_rng(child), max_iter)
        if best is None or model.cost < best.cost:
            best = KMeansModel(
                centers=model.centers, cost=model.cost, n_iter=model.n_iter, restart=restart
            )
            best_labels = labels
    return best, Partition(labels=best_labels, k=k)


def _as_labels(partition):
    labels = partition.labels if isinstance(partition, Partition) else np.asarray(partition)
    return np.unique(labels, return_inverse=True)[1].reshape(labels.shape)


def contingency_table(truth, guess):
    """Counts n_ij of nodes with true label i and guessed label j."""
    return contingency_matrix(_as_labels(truth), _as_labels(guess))


def adjusted_overlap(truth, guess):
    """Adjusted Rand index between two partitions (1 is perfect, 0 is chance level)."""
    truth, guess = _as_labels(truth), _as_labels(guess)
    if truth.shape != guess.shape:
        raise ValidationError(f"Partitions differ in size: {truth.size} and {guess.size}.")
    if truth.ndim != 1:
        raise ValidationError(f"Partitions must be one-dimensional, got shape {truth.shape}.")
    return float(adjusted_rand_score(truth, guess))


def cluster_digraph(
    matrix,
    k,
    r0="auto",
    method="gmm",
    seed=None,
    margin=DEFAULT_R0_MARGIN,
    sides="both",
    restarts=DEFAULT_RESTARTS,
    tol=DEFAULT_TOL,
):
    """
    Cluster the nodes of a directed graph into k groups.

    :return (Partition, ClusteringDiagnostics):
    """
    if method not in METHODS:
        raise ValidationError(f"Unknown method {method!r}; expected one of {', '.join(METHODS)}.")
    csr = as_csr(matrix)
    if csr.shape[0] != csr.shape[1]:
        raise ValidationError(f"Expected a square matrix, got shape {csr.shape}.")
    n = csr.shape[0]
    estimated = r0 == "auto"
    if not estimated and (int(r0) < 1):
        raise ValidationError(f"r0 must be 'auto' or a positive integer, got {r0}.")

    eigen_seed, fit_seed = spawn_seeds(seed, 2)
    timings = {}
    started = time.perf_counter()
    requested = min(n - 1, max(k, 1 if estimated else int(r0)) + 2)
    pairs = top_eigenpairs(csr, requested, tol=tol, seed=eigen_seed)
    timings["eigen"] = (time.perf_counter() - started) * 1000

    if estimated:
        r0 = max(estimate_r0(pairs.values, margin), 1)
    r0 = min(int(r0), len(pairs))

    embedding = embed(pairs, r0, sides=sides)
    started = time.perf_counter()
    if method == "gmm":
        model, partition = gmm_fit(embedding, k, restarts=restarts, seed=fit_seed)
        log_likelihood, cost = model.log_likelihood, None
    else:
        model, partition = kmeans_fit(embedding, k, restarts=restarts, seed=fit_seed)
        log_likelihood, cost = None, model.cost
    timings["fit"] = (time.perf_counter() - started) * 1000

    diagnostics = ClusteringDiagnostics(
        eigenvalues=pairs.values,
        residuals=pairs.residuals,
        left_residuals=pairs.left_residuals,
        r0=r0,
        r0_estimated=estimated,
        method=method,
        embedding_columns=embedding.realification_map,
        log_likelihood=log_likelihood,
        cost=cost,
        timings=timings,
    )
    return partition, diagnostics
