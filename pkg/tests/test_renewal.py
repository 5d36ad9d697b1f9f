import warnings

import numpy as np
import pytest

from fragsim.errors import DomainError, LatticeWarning
from fragsim.functionals import (Characteristic, energy_characteristic,
                                 psi_const)
from fragsim.limits import theorem_constant
from fragsim.measures import (DiracBinary, DissipativeUniformBinary,
                              UniformBinary, solve_malthusian)
from fragsim.renewal import renewal_oracle

GRID = np.arange(0.0, 10.0 + 1e-12, 0.01)


def test_zero_characteristic_gives_zero_solution():
    zero = Characteristic("zero", lambda x, s, rng: 0.0, lambda x, s: 0.0,
                          lambda x, f1, f2: np.zeros_like(x),
                          lambda x, s: np.zeros_like(x))
    sol = renewal_oracle(UniformBinary(), 0.0, zero, GRID, mc_budget=400,
                         seed=2)
    assert np.all(sol.g == 0.0)
    assert sol.f_integral == 0.0


def test_uniform_tilted_mean_estimates_phi_prime():
    phi = energy_characteristic(psi_const(1.0), -0.5)
    sol = renewal_oracle(UniformBinary(), 0.0, phi, GRID, mc_budget=8000,
                         seed=5)
    assert abs(sol.mu_tilted - 0.5) <= 3 * sol.mu_tilted_se
    assert sol.n_paths == 8000
    assert not sol.lattice


def test_uniform_solution_covers_theorem_constant():
    u = UniformBinary()
    phi = energy_characteristic(psi_const(1.0), -0.5)
    sol = renewal_oracle(u, 0.0, phi, np.arange(0.0, 12.0 + 1e-12, 0.01),
                         mc_budget=12000, seed=8)
    constant = theorem_constant(u, 0.0, 0.5, phi).value
    assert sol.covers(constant)
    assert sol.g_final == pytest.approx(constant, rel=0.05)


def test_dissipative_effective_sample_size_reported():
    dd = DissipativeUniformBinary(0.5)
    md = solve_malthusian(dd)
    phi = energy_characteristic(psi_const(1.0), -1.0)
    sol = renewal_oracle(dd, md.p_star, phi, GRID, mc_budget=2000, seed=3)
    assert 0 < sol.ess <= sol.n_paths
    assert abs(sol.mu_tilted - md.phi_prime_at_star) <= 4 * sol.mu_tilted_se


def test_lattice_family_flagged_not_failed():
    phi = energy_characteristic(psi_const(1.0), -0.5)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = renewal_oracle(DiracBinary(0.5, 0.5), 0.0, phi, GRID,
                             mc_budget=1500, seed=4)
    assert sol.lattice
    assert any(issubclass(w.category, LatticeWarning) for w in caught)


def test_continuous_family_not_flagged():
    phi = energy_characteristic(psi_const(1.0), -0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error", LatticeWarning)
        sol = renewal_oracle(UniformBinary(), 0.0, phi, GRID, mc_budget=1500,
                             seed=4)
    assert not sol.lattice


@pytest.mark.parametrize("grid", [
    np.array([0.0, 0.1, 0.3]),                  # nonuniform
    np.arange(0.5, 2.0, 0.01),                  # does not start at zero
    np.array([0.0, 0.01, 0.02]),                # too short
])
def test_bad_grids_rejected(grid):
    phi = energy_characteristic(psi_const(1.0), -0.5)
    with pytest.raises(DomainError):
        renewal_oracle(UniformBinary(), 0.0, phi, grid, mc_budget=500)


def test_budget_too_small_for_batches_rejected():
    phi = energy_characteristic(psi_const(1.0), -0.5)
    with pytest.raises(DomainError):
        renewal_oracle(UniformBinary(), 0.0, phi, GRID, mc_budget=10)


def test_deterministic_given_seed():
    phi = energy_characteristic(psi_const(1.0), -0.5)
    a = renewal_oracle(UniformBinary(), 0.0, phi, GRID, mc_budget=500, seed=6)
    b = renewal_oracle(UniformBinary(), 0.0, phi, GRID, mc_budget=500, seed=6)
    assert np.array_equal(a.g, b.g)
    assert a.mu_tilted == b.mu_tilted
