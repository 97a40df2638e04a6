"""
Closed-form predictions derived from a random graph model.

The expected spectrum (eigenvalues and eigenvectors of Q = E[A]), the
detection threshold and the number r0 of informative eigenvalues, the
Gamma functional and the eigendefects, the predicted overlaps between
sample and expected eigenvectors, the pathwise thresholds and the limit
moments of the eigenvector entries.

For block models every quantity is computed from r x r matrices: the
nonzero eigenvalues of Q are those of the modularity matrix M = F Pi,
and a right eigenvector f of M lifts to the eigenvector f[sigma_left]
of Q.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from dispectral.eigen import dense_eigen_oracle
from dispectral.errors import (
    ConvergenceError,
    DegeneracyError,
    DivergenceError,
    UnsupportedModelError,
    ValidationError,
)
from dispectral.graph import DenseModel, SbmModel, sbm_summary


# Eigenvalues closer than this (relative to |mu_1|) are not separated.
SEPARATION_TOLERANCE = 1e-8
# Eigenvalues of Q below this (relative to |mu_1|) are treated as zero.
RANK_TOLERANCE = 1e-9
NEUMANN_TOLERANCE = 1e-12
MAX_NEUMANN_TERMS = 1_000_000
ZERO_EIGENVALUE_TOLERANCE = 1e-14


def _complex_pair(value):
    return [float(np.real(value)), float(np.imag(value))]


@dataclass(frozen=True, eq=False)
class ExpectedSpectrum:
    """
    Spectral data of Q.

    mu holds the nonzero eigenvalues sorted by decreasing modulus, phi and
    xi the unit right and left eigenvectors as columns. For block models
    the block vectors f and g are kept too, scaled so that phi = f[sigma_left]
    and xi = g[sigma_right].
    """

    mu: np.ndarray
    phi: np.ndarray
    xi: np.ndarray
    rho: float
    theta_threshold: float
    r0: int
    tau: float
    f: np.ndarray = None
    g: np.ndarray = None
    modularity: np.ndarray = None
    p: np.ndarray = None
    q: np.ndarray = None

    @property
    def is_block_model(self):
        return self.f is not None

    @property
    def outliers(self):
        return self.mu[: self.r0]

    def to_dict(self):
        record = {
            "mu": [_complex_pair(value) for value in self.mu],
            "moduli": [float(value) for value in np.abs(self.mu)],
            "rho": self.rho,
            "theta_threshold": self.theta_threshold,
            "r0": self.r0,
            "tau": self.tau,
        }
        if self.is_block_model:
            record["modularity"] = self.modularity.real.tolist()
            record["p"] = self.p.tolist()
            record["q"] = self.q.tolist()
            record["f"] = [[_complex_pair(v) for v in column] for column in self.f.T]
            record["g"] = [[_complex_pair(v) for v in column] for column in self.g.T]
        return record


@dataclass(frozen=True)
class OverlapPrediction:
    """Predicted |<u_i, phi_j>| (a), |<v_i, xi_j>| (b) and the eigendefects R, L."""

    a: np.ndarray
    b: np.ndarray
    R: np.ndarray
    L: np.ndarray
    gamma_right: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gamma_left: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def empty(self):
        """No eigenvalue of Q exceeds the detection threshold."""
        return self.a.size == 0

    def to_dict(self):
        return {
            "empty": self.empty,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "R": self.R.tolist(),
            "L": self.L.tolist(),
        }


@dataclass(frozen=True)
class LimitMoments:
    """
    Mean and variance of the limit laws of sqrt(n) u_i(x) for x in cluster j.

    Rows are the informative eigenvalues i < r0, columns the clusters j.
    f holds the right eigenvectors of M as columns, scaled so that
    <p, f_i^2> = 1; gamma[i] = <p, (I - M / nu_i^2)^-1 f_i^2>.
    """

    mu_ij: np.ndarray
    sigma2_ij: np.ndarray
    second_moment_ij: np.ndarray
    nu: np.ndarray
    f: np.ndarray
    gamma: np.ndarray
    p: np.ndarray
    modularity: np.ndarray

    def to_dict(self):
        return {
            "nu": self.nu.tolist(),
            "p": self.p.tolist(),
            "mu_ij": self.mu_ij.tolist(),
            "sigma2_ij": self.sigma2_ij.tolist(),
            "gamma": self.gamma.tolist(),
        }


class ToeplitzEigen(NamedTuple):
    values: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray


class DetectionThreshold(NamedTuple):
    detect_all: bool
    lhs: float
    rhs: float
    infinite: bool


class SampleOverlaps(NamedTuple):
    right: np.ndarray
    left: np.ndarray


@dataclass(frozen=True)
class TwoBlockReport:
    """Exact values and large-s expansions of the two-block model."""

    s: float
    eta: float
    theta: float
    nu1: float
    nu2: float
    theta_threshold: float
    r0: int
    a11: float
    a22: float
    a11_asymptotic: float
    a22_asymptotic: float
    degenerate: bool

    def to_dict(self):
        record = asdict(self)
        for key in ("a11", "a22", "a11_asymptotic", "a22_asymptotic"):
            if record[key] is not None and not math.isfinite(record[key]):
                record[key] = None
        return record


def _phase_factors(vectors):
    """Unit factors making the largest-modulus entry of each column real positive."""
    pivots = np.argmax(np.abs(vectors), axis=0)
    values = vectors[pivots, np.arange(vectors.shape[1])]
    moduli = np.abs(values)
    moduli[moduli == 0] = 1.0
    return np.conj(values) / moduli


def _check_separation(values, scale):
    for i in range(values.size):
        for j in range(i + 1, values.size):
            if abs(values[i] - values[j]) < SEPARATION_TOLERANCE * scale:
                raise DegeneracyError(
                    f"Eigenvalues {values[i]:.6g} and {values[j]:.6g} of the expected matrix "
                    "are not separated."
                )


def _match_by_value(values, candidates):
    """Greedy nearest matching of candidate eigenvalues to values."""
    available = list(range(candidates.size))
    matches = []
    for value in values:
        position = int(np.argmin(np.abs(candidates[available] - value)))
        matches.append(available.pop(position))
    return np.asarray(matches, dtype=np.int64)


def _threshold(rho, weight_sup):
    return max(math.sqrt(rho), weight_sup)


def _count_outliers(mu, theta_threshold):
    return int(np.count_nonzero(np.abs(mu) > theta_threshold))


def _spectral_gap(mu, r0, theta_threshold):
    if r0 == 0:
        return 1.0
    return math.sqrt(theta_threshold / abs(mu[r0 - 1]))


def spectral_radius(spec):
    """
    Spectral radius of K = E[A * A].

    DenseModel uses rho(K) in place of the operator norm ||K||; the two
    agree whenever K is normal.
    """
    if isinstance(spec, SbmModel):
        modularity = sbm_summary(spec).modularity
        return float(np.abs(scipy.linalg.eigvals(modularity)).max(initial=0.0))
    if isinstance(spec, DenseModel):
        second_moment = spec.second_moment_matrix()
        return float(np.abs(scipy.linalg.eigvals(second_moment)).max(initial=0.0))
    raise ValidationError(f"Unknown model type {type(spec).__name__}.")


def expected_spectrum(spec):
    """Eigenvalues, unit eigenvectors, threshold and r0 of the expected adjacency matrix."""
    if isinstance(spec, SbmModel):
        return _sbm_spectrum(spec)
    if isinstance(spec, DenseModel):
        return _dense_spectrum(spec)
    raise ValidationError(f"Unknown model type {type(spec).__name__}.")


def _sbm_spectrum(spec):
    summary = sbm_summary(spec)
    modularity = summary.modularity
    right = dense_eigen_oracle(modularity)
    left = dense_eigen_oracle(summary.Pi @ spec.F)

    scale = float(np.abs(right.values[0])) if right.values.size else 0.0
    keep = np.abs(right.values) > RANK_TOLERANCE * scale if scale else np.zeros(0, dtype=bool)
    mu = right.values[keep]
    _check_separation(mu, scale)

    f = right.right_vectors[:, keep]
    # Left vectors of Q come from the eigenvectors of (Pi F)^T.
    g = left.left_vectors[:, _match_by_value(mu, left.values)]

    n = spec.n
    f = f / np.sqrt(n * (summary.p @ np.abs(f) ** 2))
    g = g / np.sqrt(n * (summary.q @ np.abs(g) ** 2))
    phi = f[spec.sigma_left]
    xi = g[spec.sigma_right]
    right_phase = _phase_factors(phi) if phi.size else np.ones(0)
    left_phase = _phase_factors(xi) if xi.size else np.ones(0)

    rho = scale
    weight_sup = 1.0 if spec.F.max() > 0 else 0.0
    theta_threshold = _threshold(rho, weight_sup)
    r0 = _count_outliers(mu, theta_threshold)
    return ExpectedSpectrum(
        mu=mu,
        phi=phi * right_phase,
        xi=xi * left_phase,
        rho=rho,
        theta_threshold=theta_threshold,
        r0=r0,
        tau=_spectral_gap(mu, r0, theta_threshold),
        f=f * right_phase,
        g=g * left_phase,
        modularity=modularity,
        p=summary.p,
        q=summary.q,
    )


def _dense_spectrum(spec):
    pairs = dense_eigen_oracle(spec.expected_matrix())
    scale = float(np.abs(pairs.values[0])) if len(pairs) else 0.0
    keep = np.abs(pairs.values) > RANK_TOLERANCE * scale if scale else np.zeros(0, dtype=bool)
    mu = pairs.values[keep]

    rho = spectral_radius(spec)
    theta_threshold = _threshold(rho, spec.weight_sup_norm())
    r0 = _count_outliers(mu, theta_threshold)
    # A dense bulk may be degenerate; only the informative eigenvalues must be separated.
    _check_separation(mu[:r0], scale)
    return ExpectedSpectrum(
        mu=mu,
        phi=pairs.right_vectors[:, keep],
        xi=pairs.left_vectors[:, keep],
        rho=rho,
        theta_threshold=theta_threshold,
        r0=r0,
        tau=_spectral_gap(mu, r0, theta_threshold),
    )


def _neumann_terms(rho, z, fallback):
    ratio = rho / abs(z)
    if ratio == 0:
        return fallback
    terms = math.ceil(math.log(NEUMANN_TOLERANCE) / math.log(ratio))
    if terms > MAX_NEUMANN_TERMS:
        raise ConvergenceError(
            f"Neumann series at |z|={abs(z):.6g} needs {terms} terms (rho={rho:.6g})."
        )
    return max(terms, 1)


def _neumann_sum(apply, vector, z, terms):
    """sum_{t <= terms} <1, K^t vector> / z^t."""
    total = vector.sum()
    power = vector
    for t in range(1, terms + 1):
        power = apply(power) / z
        total = total + power.sum()
    return total


def _real_if_close(value):
    value = complex(value)
    if abs(value.imag) <= 1e-14 * max(abs(value.real), 1.0):
        return value.real
    return value


def _check_side(side):
    if side not in ("left", "right"):
        raise ValidationError(f"side must be 'left' or 'right', got {side!r}.")


def gamma_functional(spec, z, xi_vec, side="right"):
    """
    Gamma(z, xi) = sum_t <1, K^t xi> / z^t, for |z| > rho.

    For a block model, a vector of length r is a block vector h standing for
    h[sigma_left] (right side) or h[sigma_right] (left side), and the series
    is summed in closed form as n <p, (I - M / z)^-1 h>. Vectors of length n
    go through the truncated series.
    """
    _check_side(side)
    vector = np.asarray(xi_vec)
    rho = spectral_radius(spec)
    if abs(z) <= rho:
        raise DivergenceError(f"Gamma diverges: |z|={abs(z):.6g} <= rho={rho:.6g}.")

    if isinstance(spec, SbmModel):
        if vector.shape == (spec.n,):
            apply = spec.k_matvec if side == "right" else spec.k_rmatvec
            terms = _neumann_terms(rho, z, spec.r + 1)
            return _real_if_close(_neumann_sum(apply, vector, z, terms))
        if vector.shape == (spec.r,):
            return _real_if_close(_sbm_gamma(sbm_summary(spec), spec, z, vector, side))
        raise ValidationError(f"Expected a vector of length r={spec.r} or n={spec.n}.")

    if isinstance(spec, DenseModel):
        if vector.shape != (spec.n,):
            raise ValidationError(f"Expected a vector of length n={spec.n}.")
        second_moment = spec.second_moment_matrix()
        operator = second_moment if side == "right" else second_moment.T
        terms = _neumann_terms(rho, z, spec.n + 1)
        return _real_if_close(_neumann_sum(lambda x: operator @ x, vector, z, terms))

    raise ValidationError(f"Unknown model type {type(spec).__name__}.")


def _sbm_resolvent_apply(summary, spec, z, vector, side):
    """(I - M / z)^-1 h, with M = F Pi on the right and (Pi F)^T on the left."""
    if side == "right":
        operator = summary.modularity
    else:
        operator = (summary.Pi @ spec.F).T
    system = np.eye(spec.r) - operator / z
    return scipy.linalg.solve(system, vector)


def _sbm_gamma(summary, spec, z, vector, side):
    weights = summary.p if side == "right" else summary.q
    return spec.n * (weights @ _sbm_resolvent_apply(summary, spec, z, vector, side))


def overlap_prediction(spec, spectrum=None):
    """
    Predicted overlaps a (right) and b (left) between the sample and the
    expected eigenvectors, for the r0 informative eigenvalues.

    a[i, j] = |<phi_i, phi_j>| / sqrt(|Gamma(mu_i^2, phi_i * phi_i)|)
    """
    spectrum = expected_spectrum(spec) if spectrum is None else spectrum
    r0 = spectrum.r0
    if r0 == 0:
        return OverlapPrediction(
            a=np.zeros((0, 0)), b=np.zeros((0, 0)), R=np.zeros(0), L=np.zeros(0)
        )

    if isinstance(spec, SbmModel):
        gammas_right, gammas_left, defects_right, defects_left = _sbm_defects(spec, spectrum)
    else:
        gammas_right, gammas_left, defects_right, defects_left = _dense_defects(spec, spectrum)

    phi = spectrum.phi[:, :r0]
    xi = spectrum.xi[:, :r0]
    a = np.abs(phi.conj().T @ phi) / np.sqrt(np.abs(gammas_right))[:, None]
    b = np.abs(xi.conj().T @ xi) / np.sqrt(np.abs(gammas_left))[:, None]
    return OverlapPrediction(
        a=a,
        b=b,
        R=defects_right,
        L=defects_left,
        gamma_right=gammas_right,
        gamma_left=gammas_left,
    )


def _sbm_defects(spec, spectrum):
    summary = sbm_summary(spec)
    gammas = {"right": [], "left": []}
    defects = {"right": [], "left": []}
    for i in range(spectrum.r0):
        z = spectrum.mu[i] ** 2
        for side, block, weights in (
            ("right", spectrum.f[:, i], summary.p),
            ("left", spectrum.g[:, i], summary.q),
        ):
            resolved = _sbm_resolvent_apply(summary, spec, z, block * block, side)
            gammas[side].append(spec.n * (weights @ resolved))
            # |(z I - K)^-1 phi^2|_1 = |z|^-1 * n <p, |(I - M / z)^-1 f^2|>
            defects[side].append(spec.n * (weights @ np.abs(resolved)) / abs(z))
    return (
        np.asarray(gammas["right"]),
        np.asarray(gammas["left"]),
        np.asarray(defects["right"]),
        np.asarray(defects["left"]),
    )


def _dense_defects(spec, spectrum):
    second_moment = spec.second_moment_matrix()
    identity = np.eye(spec.n)
    gammas = {"right": [], "left": []}
    defects = {"right": [], "left": []}
    for i in range(spectrum.r0):
        z = spectrum.mu[i] ** 2
        for side, vector, operator in (
            ("right", spectrum.phi[:, i], second_moment),
            ("left", spectrum.xi[:, i], second_moment.T),
        ):
            resolved = scipy.linalg.solve(z * identity - operator, vector * vector)
            gammas[side].append(z * resolved.sum())
            defects[side].append(np.abs(resolved).sum())
    return (
        np.asarray(gammas["right"]),
        np.asarray(gammas["left"]),
        np.asarray(defects["right"]),
        np.asarray(defects["left"]),
    )


def sample_overlaps(pairs, spectrum, count=None):
    """|<u_i, phi_j>| and |<v_i, xi_j>| between computed and expected eigenvectors."""
    count = spectrum.mu.size if count is None else min(count, spectrum.mu.size)
    right = np.abs(pairs.right_vectors.conj().T @ spectrum.phi[:, :count])
    left = np.abs(pairs.left_vectors.conj().T @ spectrum.xi[:, :count])
    return SampleOverlaps(right=right, left=left)


def theta_of_eta(eta):
    """theta = 2 sqrt(eta (1 - eta))."""
    return 2 * math.sqrt(eta * (1 - eta))


def _toeplitz_cosines(r_blocks):
    return np.cos(np.arange(1, r_blocks + 1) * np.pi / (r_blocks + 1))


def tridiag_toeplitz_eigen(r_blocks, s, eta):
    """
    Eigenvalues and unit eigenvectors of the pathwise connectivity F.

    Values s/2 + s c_k theta with c_k = cos(k pi / (r + 1)), in decreasing order.
    """
    if r_blocks < 1:
        raise ValidationError("r_blocks must be positive.")
    if not 0 < eta < 1:
        raise ValidationError(
            f"eta={eta} must lie strictly in (0, 1); use dense_eigen_oracle on F instead."
        )
    cosines = _toeplitz_cosines(r_blocks)
    values = s / 2 + s * cosines * theta_of_eta(eta)

    positions = np.arange(1, r_blocks + 1)
    sines = np.sin(np.outer(positions, positions) * np.pi / (r_blocks + 1))
    ratio = (1 - eta) / eta
    right = (ratio ** (positions / 2))[:, None] * sines
    left = (ratio ** (-positions / 2))[:, None] * sines
    return ToeplitzEigen(
        values=values,
        right_vectors=right / np.linalg.norm(right, axis=0),
        left_vectors=left / np.linalg.norm(left, axis=0),
    )


def pathwise_detection_threshold(r_blocks, s, eta):
    """
    Whether all r eigenvalues of the pathwise model exceed the threshold:
    s / r > (1/2 + c_1 theta) / min_k (1/2 + c_k theta)^2.
    """
    if not 0.5 <= eta <= 1:
        raise ValidationError(f"eta={eta} must lie in [1/2, 1].")
    if r_blocks < 1:
        raise ValidationError("r_blocks must be positive.")
    theta = theta_of_eta(eta)
    terms = 0.5 + _toeplitz_cosines(r_blocks) * theta
    smallest = float((terms**2).min())
    lhs = s / r_blocks
    if smallest < ZERO_EIGENVALUE_TOLERANCE:
        return DetectionThreshold(detect_all=False, lhs=lhs, rhs=math.inf, infinite=True)
    rhs = float(terms[0]) / smallest
    return DetectionThreshold(detect_all=lhs > rhs, lhs=lhs, rhs=rhs, infinite=False)


def eta_threshold(s):
    """Smallest eta at which the second two-block eigenvalue is informative."""
    if s <= 4:
        raise ValidationError(f"No eta in [1/2, 1] detects the second eigenvalue at s={s} <= 4.")
    x = 1 + (2 - 2 * math.sqrt(2 * s + 1)) / s
    return (1 + math.sqrt(1 - x * x)) / 2


def pathwise_mean_degree(r_blocks, s):
    """Mean degree (s / k)(3/2 - 1/k^2) of the pathwise model with k blocks."""
    if r_blocks < 2:
        raise ValidationError("The pathwise mean degree needs r_blocks >= 2.")
    return (s / r_blocks) * (1.5 - 1 / r_blocks**2)


def calibrate_s(r_blocks, d):
    """The s giving the pathwise model with r_blocks blocks mean degree d."""
    if r_blocks < 2:
        raise ValidationError("Calibration needs r_blocks >= 2.")
    return r_blocks * d / (1.5 - 1 / r_blocks**2)


def limit_moments(spec):
    """Mean and variance of the limit laws of the informative eigenvector entries."""
    if not isinstance(spec, SbmModel):
        raise UnsupportedModelError("Limit moments are defined for block models only.")
    if not spec.same_memberships:
        raise UnsupportedModelError("Limit moments need identical left and right memberships.")
    spectrum = expected_spectrum(spec)
    if spectrum.r0 == 0:
        raise ValidationError("No eigenvalue exceeds the detection threshold (r0 = 0).")
    nu = spectrum.mu[: spectrum.r0]
    if np.abs(nu.imag).max() > 1e-12 * abs(nu[0]):
        raise UnsupportedModelError("Limit moments need real informative eigenvalues.")
    nu = nu.real

    p = spectrum.p
    modularity = spectrum.modularity
    f = spectrum.f[:, : spectrum.r0].real
    f = f / np.sqrt(p @ f**2)

    r = spec.r
    mu_ij = np.zeros((nu.size, r))
    second = np.zeros((nu.size, r))
    gammas = np.zeros(nu.size)
    for i, value in enumerate(nu):
        resolved = scipy.linalg.solve(np.eye(r) - modularity / value**2, f[:, i] ** 2)
        gammas[i] = p @ resolved
        mu_ij[i] = f[:, i] / math.sqrt(gammas[i])
        second[i] = resolved / gammas[i]
    return LimitMoments(
        mu_ij=mu_ij,
        sigma2_ij=second - mu_ij**2,
        second_moment_ij=second,
        nu=nu,
        f=f,
        gamma=gammas,
        p=p,
        modularity=modularity,
    )


def two_block_gamma(x, theta):
    """
    a_ii^2 of the two-block model as a function of x = s / nu_i^2:
    (4 - 2x + x^2 (1 - theta^2) / 4) / (4 - x + x theta^2).
    """
    return (4 - 2 * x + x * x * (1 - theta * theta) / 4) / (4 - x + x * theta * theta)


def two_block_report(s, eta):
    if s <= 1:
        raise ValidationError("s must exceed 1.")
    if not 0.5 <= eta <= 1:
        raise ValidationError(f"eta={eta} must lie in [1/2, 1].")
    theta = theta_of_eta(eta)
    nu1 = s * (1 + theta) / 4
    nu2 = s * (1 - theta) / 4
    threshold = max(math.sqrt(nu1), 1.0)
    r0 = int(nu1 > threshold) + int(abs(nu2) > threshold)

    a11 = math.sqrt(two_block_gamma(s / nu1**2, theta)) if r0 >= 1 else None
    a22 = math.sqrt(two_block_gamma(s / nu2**2, theta)) if r0 == 2 else None
    a11_asymptotic = 1 - (2 / s) * (1 + theta**2) / (1 + theta) ** 2
    a22_asymptotic = 1 - (2 / s) * (1 + theta**2) / (1 - theta) ** 2 if theta < 1 else None
    return TwoBlockReport(
        s=float(s),
        eta=float(eta),
        theta=theta,
        nu1=nu1,
        nu2=nu2,
        theta_threshold=threshold,
        r0=r0,
        a11=a11,
        a22=a22,
        a11_asymptotic=a11_asymptotic,
        a22_asymptotic=a22_asymptotic,
        degenerate=abs(nu1 - nu2) < SEPARATION_TOLERANCE * nu1,
    )

