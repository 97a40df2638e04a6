"""
Multitype Galton-Watson trees and their normalized population martingales.

A vertex of type a has Poisson(M[a, b]) children of type b. Only the
per-type counts N(t) of every generation are simulated: the children
counts of a whole generation are Poisson(N(t) @ M), so the tree itself
is never built. For an eigenpair (nu_i, f_i) of M the martingale is

    U_i(j, t) = nu_i^-t <N(T_j, t), f_i>

for the tree T_j rooted at a vertex of type j; U_i(j, 0) = f_i(j).
"""

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from dispectral.errors import PopulationOverflowError, ValidationError
from dispectral.rng import make_rng, spawn_seeds
from dispectral.theory import limit_moments


DEFAULT_DEPTH = 12
DEFAULT_SAMPLES = 100_000
MIN_CHECK_SAMPLES = 1000
CHUNK_SIZE = 10_000
# Counts are floats: supercritical trees reach 1e18 vertices at the default depth.
DEFAULT_POPULATION_CAP = 1e30
# Above this mean, Poisson counts are drawn from the normal approximation.
POISSON_EXACT_LIMIT = 1e15


@dataclass(frozen=True, eq=False)
class GwConfig:
    """
    Offspring means M, eigenvectors f (columns) with eigenvalues nu, and
    the simulation depth, sample count and root type.
    """

    M: np.ndarray
    f: np.ndarray
    nu: np.ndarray
    depth: int = DEFAULT_DEPTH
    n_samples: int = DEFAULT_SAMPLES
    root_type: int = 0
    population_cap: float = DEFAULT_POPULATION_CAP

    def __post_init__(self):
        object.__setattr__(self, "M", np.atleast_2d(np.asarray(self.M, dtype=float)))
        vectors = np.asarray(self.f, dtype=float).reshape(self.M.shape[0], -1)
        object.__setattr__(self, "f", vectors)
        object.__setattr__(self, "nu", np.atleast_1d(np.asarray(self.nu, dtype=float)))
        self.validate()

    @property
    def r(self):
        return self.M.shape[0]

    def validate(self):
        if self.M.ndim != 2 or self.M.shape[0] != self.M.shape[1]:
            raise ValidationError(f"M must be square, got shape {self.M.shape}.")
        if not np.all(np.isfinite(self.M)) or self.M.min() < 0:
            raise ValidationError("Offspring means must be nonnegative.")
        if self.f.shape[1] != self.nu.size:
            raise ValidationError("Need one eigenvalue per eigenvector column.")
        if self.depth < 1:
            raise ValidationError("depth must be at least 1.")
        if self.n_samples < 1:
            raise ValidationError("n_samples must be positive.")
        if not 0 <= self.root_type < self.r:
            raise ValidationError(f"root_type must lie in [0, {self.r}).")

    @classmethod
    def from_model(cls, spec, **kwargs):
        """Offspring means and eigenvectors of a block model, normalized as in limit_moments."""
        moments = limit_moments(spec)
        return cls(M=moments.modularity, f=moments.f, nu=moments.nu, **kwargs), moments


@dataclass(frozen=True)
class MartingaleSample:
    """U_i(j, t) for t = 0 ... depth of one tree."""

    values: np.ndarray
    extinct: bool
    overflowed: bool = False


class MartingaleRun(Sequence):
    """All samples of one simulation, stored as a (samples, depth + 1) array."""

    def __init__(self, values, extinct, overflowed, eigen_index, root_type):
        self.values = values
        self.extinct = extinct
        self.overflowed = overflowed
        self.eigen_index = eigen_index
        self.root_type = root_type

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        return MartingaleSample(
            values=self.values[index],
            extinct=bool(self.extinct[index]),
            overflowed=bool(self.overflowed[index]),
        )

    @property
    def valid(self):
        return ~self.overflowed

    @property
    def excluded(self):
        return int(self.overflowed.sum())

    def end_values(self):
        """U_i(j, depth) of the samples below the population cap."""
        return self.values[self.valid, -1]


def _offspring(rng, means):
    counts = np.zeros_like(means)
    exact = means < POISSON_EXACT_LIMIT
    counts[exact] = rng.poisson(means[exact])
    large = means[~exact]
    if large.size:
        counts[~exact] = np.round(large + np.sqrt(large) * rng.standard_normal(large.size))
    return counts


def _simulate_chunk(cfg, eigen_index, size, seed):
    rng = make_rng(seed)
    vector = cfg.f[:, eigen_index]
    nu = cfg.nu[eigen_index]

    counts = np.zeros((size, cfg.r))
    counts[:, cfg.root_type] = 1.0
    values = np.empty((size, cfg.depth + 1))
    values[:, 0] = vector[cfg.root_type]
    overflowed = np.zeros(size, dtype=bool)

    for t in range(1, cfg.depth + 1):
        counts = _offspring(rng, counts @ cfg.M)
        over = counts.sum(axis=1) > cfg.population_cap
        overflowed |= over
        counts[overflowed] = 0.0
        values[:, t] = (counts @ vector) / nu**t
        values[overflowed, t] = np.nan

    extinct = (counts.sum(axis=1) == 0) & ~overflowed
    return values, extinct, overflowed


def simulate_martingale(cfg, eigen_index=0, seed=None, threads=1, progress=None):
    """
    Simulate cfg.n_samples trees and their martingale U_i(root_type, t).

    Samples are drawn in fixed chunks with derived seeds, so the result
    does not depend on threads. progress, when given, is called once per
    finished chunk.
    """
    if not 0 <= eigen_index < cfg.nu.size:
        raise ValidationError(f"eigen_index must lie in [0, {cfg.nu.size}).")
    if cfg.nu[eigen_index] == 0:
        raise ValidationError("The martingale needs a nonzero eigenvalue.")

    chunks = math.ceil(cfg.n_samples / CHUNK_SIZE)
    sizes = [min(CHUNK_SIZE, cfg.n_samples - c * CHUNK_SIZE) for c in range(chunks)]
    seeds = spawn_seeds(seed, chunks)

    def run(task):
        size, chunk_seed = task
        result = _simulate_chunk(cfg, eigen_index, size, chunk_seed)
        if progress is not None:
            progress()
        return result

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        results = list(executor.map(run, zip(sizes, seeds)))

    values = np.concatenate([result[0] for result in results])
    extinct = np.concatenate([result[1] for result in results])
    overflowed = np.concatenate([result[2] for result in results])
    if overflowed.all():
        raise PopulationOverflowError(
            f"All {cfg.n_samples} samples exceeded the population cap {cfg.population_cap:.3g}."
        )
    return MartingaleRun(values, extinct, overflowed, eigen_index, cfg.root_type)


@dataclass(frozen=True)
class MomentReport:
    """Empirical moments of the normalized end values against the limit moments."""

    eigen_index: int
    root_type: int
    samples: int
    excluded: int
    mean: float
    mean_target: float
    mean_se: float
    variance: float
    variance_target: float
    variance_se: float
    atom_fraction: float
    ks_statistic: float
    ks_pvalue: float
    mean_by_depth: np.ndarray
    mean_se_by_depth: np.ndarray
    second_moment_by_depth: np.ndarray
    second_moment_se_by_depth: np.ndarray
    second_moment_limit: float

    @property
    def mean_z(self):
        return (self.mean - self.mean_target) / self.mean_se if self.mean_se else 0.0

    @property
    def variance_z(self):
        if not self.variance_se:
            return 0.0
        return (self.variance - self.variance_target) / self.variance_se

    def to_rows(self):
        """One row per checked quantity: empirical value, target, standard error, z-score."""
        rows = [
            {
                "quantity": "mean",
                "empirical": self.mean,
                "target": self.mean_target,
                "standard_error": self.mean_se,
                "z": self.mean_z,
            },
            {
                "quantity": "variance",
                "empirical": self.variance,
                "target": self.variance_target,
                "standard_error": self.variance_se,
                "z": self.variance_z,
            },
            {"quantity": "atom_fraction", "empirical": self.atom_fraction},
            {"quantity": "ks_statistic", "empirical": self.ks_statistic},
            {"quantity": "ks_pvalue", "empirical": self.ks_pvalue},
            {"quantity": "samples", "empirical": self.samples},
            {"quantity": "excluded", "empirical": self.excluded},
        ]
        for quantity in ("target", "standard_error", "z"):
            for row in rows:
                row.setdefault(quantity, "")
        return rows


def moment_check(run, moments):
    """
    Compare the end values of a run, divided by sqrt(gamma_i), with the
    limit mean mu_ij and variance sigma2_ij.
    """
    i, j = run.eigen_index, run.root_type
    if i >= moments.mu_ij.shape[0]:
        raise ValidationError(f"No limit moments for eigen_index {i} (r0={moments.nu.size}).")
    valid_values = run.values[run.valid]
    count = valid_values.shape[0]
    if count < MIN_CHECK_SAMPLES:
        raise ValidationError(
            f"Need at least {MIN_CHECK_SAMPLES} valid samples, got {count} "
            f"({run.excluded} excluded)."
        )

    scale = math.sqrt(moments.gamma[i])
    normalized = valid_values[:, -1] / scale
    mean = float(normalized.mean())
    variance = float(normalized.var(ddof=1))
    fourth = float(((normalized - mean) ** 4).mean())
    mean_target = float(moments.mu_ij[i, j])
    variance_target = float(moments.sigma2_ij[i, j])
    if variance_target > 0:
        ks = stats.kstest(normalized, "norm", args=(mean_target, math.sqrt(variance_target)))
        ks_statistic, ks_pvalue = float(ks.statistic), float(ks.pvalue)
    else:
        ks_statistic, ks_pvalue = math.nan, math.nan

    squares = valid_values**2
    return MomentReport(
        eigen_index=i,
        root_type=j,
        samples=count,
        excluded=run.excluded,
        mean=mean,
        mean_target=mean_target,
        mean_se=math.sqrt(variance / count),
        variance=variance,
        variance_target=variance_target,
        variance_se=math.sqrt(max(fourth - variance**2, 0.0) / count),
        atom_fraction=float(np.mean(valid_values[:, -1] == 0)),
        ks_statistic=ks_statistic,
        ks_pvalue=ks_pvalue,
        mean_by_depth=valid_values.mean(axis=0),
        mean_se_by_depth=valid_values.std(axis=0, ddof=1) / math.sqrt(count),
        second_moment_by_depth=squares.mean(axis=0),
        second_moment_se_by_depth=squares.std(axis=0, ddof=1) / math.sqrt(count),
        second_moment_limit=float(moments.second_moment_ij[i, j] * moments.gamma[i]),
    )
