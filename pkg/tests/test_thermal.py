import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contspec.algebra import Observable, SeparableKernel, compose, hamiltonian, pair, random_observable, validate
from contspec.errors import InfeasibleTarget
from contspec.spectral import build_grid
from contspec.thermal import (ThermalParams, build_kms_state, canonical_density, cauchy_riemann_defect,
                              constrained_competitors, cr_halving_ratio, dlogz_dbeta, kms_correlators,
                              log_partition, mean_energy, shannon_entropy, solve_multiplier, solve_thermal_params,
                              strip_lattice, thermal_functional, verify_kms)


def _params(grid, beta):
    return ThermalParams(beta, float(np.exp(log_partition(grid, beta))))


def test_solver_recovers_beta_on_finite_band():
    # oracle: on [0, L] the mean of exp(-beta w) is 1/beta - L / (e^{beta L} - 1)
    L, beta = 5.0, 0.7
    target = 1 / beta - L / np.expm1(beta * L)
    grid = build_grid("gauss-legendre", 64, L)
    assert solve_thermal_params(grid, target).beta == pytest.approx(beta, abs=1e-12)
    # negative temperature is reachable on a bounded band
    hot = 1 / -0.4 - L / np.expm1(-0.4 * L)
    assert solve_thermal_params(grid, hot).beta == pytest.approx(-0.4, abs=1e-12)


@pytest.mark.parametrize("target", [-1.0, 0.0, 40.0, 100.0])
def test_infeasible_targets(target):
    grid = build_grid("gauss-legendre", 32, 40.0)
    with pytest.raises(InfeasibleTarget):
        solve_thermal_params(grid, target)


def test_label_multipliers():
    grid = build_grid("gauss-legendre", 64, 30.0)
    p = solve_thermal_params(grid, 2.0, momentum_means=[0.8], label_shape=[3])
    r = np.arange(3.0)
    w = np.exp(-p.gammas[0] * r)
    assert np.dot(w, r) / w.sum() == pytest.approx(0.8, abs=1e-12)
    with pytest.raises(ValueError):
        solve_thermal_params(grid, 2.0, momentum_means=[0.8])
    state = build_kms_state(grid, p, degeneracy=3)
    assert validate(state).ok


def test_entropy_of_exponential_density():
    # oracle: -int b e^{-bw} log(b e^{-bw}) dw = 1 - log b
    grid = build_grid("gauss-laguerre-mapped", 60, 80.0)
    for b in (0.5, 1.0, 2.0):
        assert shannon_entropy(grid, canonical_density(grid, b)) == pytest.approx(1 - np.log(b), abs=1e-8)
    with pytest.raises(ValueError):
        shannon_entropy(grid, -np.ones(grid.size))


def test_partition_derivative_and_energy():
    grid = build_grid("gauss-legendre", 96, 40.0)
    for b in (0.5, 1.0, 3.0):
        assert -dlogz_dbeta(grid, b) == pytest.approx(mean_energy(grid, b), rel=1e-8)
        assert log_partition(grid, b) == pytest.approx(-np.log(b), abs=1e-8)


def test_competitors_keep_constraints_and_lose_entropy(rng):
    grid = build_grid("gauss-legendre", 64, 30.0)
    dens = canonical_density(grid, 1.0)
    comp = constrained_competitors(grid, dens, rng, 50)
    assert np.all(comp >= 0)
    assert np.allclose(comp @ grid.weights, 1.0)
    assert np.allclose(comp @ (grid.weights * grid.nodes), np.dot(grid.weights * grid.nodes, dens))
    s0 = shannon_entropy(grid, dens)
    assert all(shannon_entropy(grid, c) < s0 for c in comp)


def test_kms_state_mean_energy():
    grid = build_grid("gauss-legendre", 64, 30.0)
    p = solve_thermal_params(grid, 1.5)
    state = build_kms_state(grid, p)
    assert pair(state, hamiltonian(grid)) == pytest.approx(1.5, abs=1e-10)
    assert thermal_functional(hamiltonian(grid), p) == pytest.approx(1.5, abs=1e-10)
    with pytest.raises(ValueError):
        thermal_functional(hamiltonian(grid), ThermalParams(-1.0, 1.0))


def test_solve_multiplier_uniform_points():
    lam, res = solve_multiplier(np.arange(5.0), np.ones(5), 2.0)
    assert lam == pytest.approx(0.0, abs=1e-12) and res < 1e-12


def _gauss(grid, c):
    g = np.exp(-((grid.nodes - c) ** 2) / 2)
    return Observable(grid, np.zeros((1, 1)), np.zeros((grid.size, 1, 1)), cc_full=SeparableKernel.outer(g, g))


def test_correlator_at_zero_is_thermal_functional():
    grid = build_grid("gauss-legendre", 64, 30.0)
    p = _params(grid, 1.0)
    a, b = _gauss(grid, 2.0), _gauss(grid, 3.5)
    corr = kms_correlators(a, b, p, [0.0])
    assert corr.F_values[0] == pytest.approx(thermal_functional(compose(b, a), p, include_regular=True), rel=1e-12)
    assert corr.G_values[0] == pytest.approx(thermal_functional(compose(a, b), p, include_regular=True), rel=1e-12)


def test_cauchy_riemann_defect_second_order():
    grid = build_grid("gauss-legendre", 64, 30.0)
    p = _params(grid, 1.0)
    res = cr_halving_ratio(_gauss(grid, 3.0), _gauss(grid, 4.0), p, 2.0, 21, 4)
    assert res["ratio"] == pytest.approx(4.0, abs=0.05)


def test_correlator_argument_checks():
    grid = build_grid("gauss-legendre", 16, 10.0)
    p = _params(grid, 1.0)
    a = _gauss(grid, 2.0)
    with pytest.raises(ValueError):
        kms_correlators(a, a, p, [0.0], [1.0])
    cross = Observable(grid, np.eye(1), np.zeros((16, 1, 1)), cross_lo=np.ones((16, 1, 1)))
    with pytest.raises(ValueError):
        kms_correlators(cross, a, p, [0.0])
    corr = kms_correlators(a, a, p, [0.0, 1.0], [0.5])
    with pytest.raises(ValueError):
        verify_kms(corr, _params(grid, 2.0))
    with pytest.raises(ValueError):
        cauchy_riemann_defect(corr)
    t, g = strip_lattice(2.0, 3, 1.0, 5)
    assert np.allclose(g, [0.5, 1.0, 1.5]) and len(t) == 5


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.2, 3.0))
def test_kms_boundary_identity_random_observables(seed, beta):
    rng = np.random.default_rng(seed)
    grid = build_grid("gauss-legendre", 24, 15.0)
    a, b = random_observable(grid, 2, rng), random_observable(grid, 2, rng)
    p = ThermalParams(beta, float(np.exp(log_partition(grid, beta))))
    corr = kms_correlators(a, b, p, np.linspace(-3, 3, 13))
    assert verify_kms(corr, p)["boundary_residual_relative"] < 1e-10
