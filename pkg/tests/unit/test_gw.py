"""Unit tests for the Galton-Watson martingale simulation."""

from unittest.mock import MagicMock

import numpy as np
import pytest

from dispectral.errors import PopulationOverflowError, ValidationError
from dispectral.graph import SbmModel, sbm_from_proportions
from dispectral.gw import GwConfig, MartingaleSample, moment_check, simulate_martingale
from dispectral.theory import limit_moments

# pylint: disable=missing-docstring, redefined-outer-name


@pytest.fixture
def poisson_three():
    return GwConfig(M=[[3.0]], f=[1.0], nu=[3.0], depth=8, n_samples=20_000)


@pytest.fixture
def poisson_three_moments():
    return limit_moments(SbmModel(n=100, F=[[3.0]], sigma_left=np.zeros(100)))


def test_single_type_martingale_matches_limit_moments(poisson_three, poisson_three_moments):
    run = simulate_martingale(poisson_three, seed=0)
    report = moment_check(run, poisson_three_moments)
    assert report.samples == 20_000
    assert report.excluded == 0
    assert report.mean_target == pytest.approx(1 / np.sqrt(1.5))
    assert report.variance_target == pytest.approx(1 / 3)
    assert abs(report.mean_z) < 5
    assert abs(report.variance_z) < 5


def test_martingale_mean_is_one_at_every_depth(poisson_three, poisson_three_moments):
    run = simulate_martingale(poisson_three, seed=1)
    report = moment_check(run, poisson_three_moments)
    assert np.all(np.abs(report.mean_by_depth - 1) < 5 * report.mean_se_by_depth + 1e-12)
    assert report.mean_by_depth[0] == 1.0


def test_atom_at_zero_is_the_extinction_probability(poisson_three, poisson_three_moments):
    run = simulate_martingale(poisson_three, seed=2)
    report = moment_check(run, poisson_three_moments)
    # q = exp(3 (q - 1)) for Poisson(3) offspring.
    assert report.atom_fraction == pytest.approx(0.0595, abs=0.01)
    assert run.extinct.mean() == pytest.approx(report.atom_fraction)


def test_result_does_not_depend_on_threads():
    cfg = GwConfig(M=[[3.0]], f=[1.0], nu=[3.0], depth=5, n_samples=25_000)
    single = simulate_martingale(cfg, seed=3, threads=1)
    several = simulate_martingale(cfg, seed=3, threads=4)
    assert np.array_equal(single.values, several.values, equal_nan=True)
    assert np.array_equal(single.extinct, several.extinct)


def test_progress_is_called_once_per_chunk():
    cfg = GwConfig(M=[[2.0]], f=[1.0], nu=[2.0], depth=3, n_samples=25_000)
    progress = MagicMock()
    simulate_martingale(cfg, seed=4, progress=progress)
    assert progress.call_count == 3


def test_all_samples_above_cap_raise_population_overflow_error():
    cfg = GwConfig(M=[[50.0]], f=[1.0], nu=[50.0], depth=3, n_samples=100, population_cap=10)
    with pytest.raises(PopulationOverflowError):
        simulate_martingale(cfg, seed=5)


def test_samples_above_cap_are_excluded():
    cfg = GwConfig(M=[[3.0]], f=[1.0], nu=[3.0], depth=6, n_samples=2000, population_cap=100)
    run = simulate_martingale(cfg, seed=6)
    assert 0 < run.excluded < 2000
    assert np.all(np.isfinite(run.end_values()))
    assert run.end_values().size == 2000 - run.excluded
    assert np.isnan(run.values[run.overflowed, -1]).all()


def test_subcritical_trees_die_out():
    cfg = GwConfig(M=[[0.5]], f=[1.0], nu=[0.5], depth=40, n_samples=1000)
    run = simulate_martingale(cfg, seed=7)
    assert run.extinct.all()
    assert np.all(run.end_values() == 0)


def test_run_is_a_sequence_of_samples():
    cfg = GwConfig(M=[[2.0]], f=[1.0], nu=[2.0], depth=2, n_samples=10)
    run = simulate_martingale(cfg, seed=8)
    assert len(run) == 10
    assert isinstance(run[0], MartingaleSample)
    assert run[0].values.shape == (3,)
    assert len(run[2:5]) == 3


def test_config_from_model_uses_normalized_eigenvectors():
    spec = sbm_from_proportions([[48.0, 6.0], [12.0, 24.0]], (2, 1), 600)
    cfg, moments = GwConfig.from_model(spec, depth=4, n_samples=10)
    assert cfg.r == 2
    assert cfg.nu.size == 2
    assert np.allclose(moments.p @ cfg.f**2, 1.0)
    assert np.allclose(cfg.M @ cfg.f, cfg.f * cfg.nu)


def test_two_type_martingale_matches_limit_moments():
    spec = sbm_from_proportions([[48.0, 6.0], [12.0, 24.0]], (2, 1), 600)
    cfg, moments = GwConfig.from_model(spec, depth=14, n_samples=20_000, root_type=1)
    run = simulate_martingale(cfg, eigen_index=1, seed=9)
    report = moment_check(run, moments)
    assert abs(report.mean_z) < 5
    assert abs(report.variance_z) < 5


@pytest.mark.parametrize(
    "changes, message",
    [
        ({"root_type": 1}, "root_type"),
        ({"depth": 0}, "depth"),
        ({"n_samples": 0}, "n_samples"),
        ({"M": [[-1.0]]}, "nonnegative"),
        ({"nu": [3.0, 1.0]}, "eigenvalue"),
    ],
)
def test_invalid_config_raises_validation_error(changes, message):
    arguments = {"M": [[3.0]], "f": [1.0], "nu": [3.0]}
    arguments.update(changes)
    with pytest.raises(ValidationError, match=message):
        GwConfig(**arguments)


def test_simulation_with_unknown_eigen_index_raises_validation_error(poisson_three):
    with pytest.raises(ValidationError, match="eigen_index"):
        simulate_martingale(poisson_three, eigen_index=1)


def test_moment_check_with_few_samples_raises_validation_error(poisson_three_moments):
    cfg = GwConfig(M=[[3.0]], f=[1.0], nu=[3.0], depth=2, n_samples=500)
    with pytest.raises(ValidationError, match="at least"):
        moment_check(simulate_martingale(cfg, seed=10), poisson_three_moments)
