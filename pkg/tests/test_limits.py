import math

import numpy as np
import pytest

from fragsim.errors import DomainError, QuadratureFailure
from fragsim.functionals import (energy_characteristic,
                                 empirical_characteristic, f_const, f_power,
                                 psi_const, psi_excess_power, psi_mass_power)
from fragsim.limits import (empirical_kernel, empirical_limit, energy_limit,
                            theorem_constant)
from fragsim.measures import (BetaBinary, DiracBinary,
                              DissipativeUniformBinary, UniformBinary,
                              solve_malthusian)


class TestEnergyLimit:
    def test_uniform_half(self):
        c = energy_limit(UniformBinary(), 0.0, 0.5, psi_const(1.0), -0.5)
        assert c.value == pytest.approx(4.0, abs=1e-12)

    def test_uniform_minus_one(self):
        c = energy_limit(UniformBinary(), 0.0, 0.5, psi_const(1.0), -1.0)
        assert c.value == pytest.approx(2.0, abs=1e-12)

    def test_zero_cost(self):
        c = energy_limit(UniformBinary(), 0.0, 0.5, psi_const(0.0), -0.5)
        assert c.value == 0.0

    def test_p_at_or_above_root_rejected(self):
        with pytest.raises(DomainError):
            energy_limit(UniformBinary(), 0.0, 0.5, psi_const(1.0), 0.0)


class TestTheoremConstant:
    def test_agrees_with_energy_limit_to_1e10(self):
        # two code paths, one number
        u = UniformBinary()
        phi = energy_characteristic(psi_const(1.0), -0.5)
        via_quad = theorem_constant(u, 0.0, 0.5, phi, tol=1e-10)
        via_closed = energy_limit(u, 0.0, 0.5, psi_const(1.0), -0.5)
        assert abs(via_quad.value - via_closed.value) <= 1e-10
        assert via_quad.theorem == "main"

    def test_dirac_closed_chain(self):
        # p* solves 2 b^(1+p)=1, so phi'(p*) (p*+1) collapses to ln 2 and the
        # unit-cost constant at p = -1 is exactly 1/ln 2
        d = DiracBinary(0.4, 0.4)
        md = solve_malthusian(d)
        phi = energy_characteristic(psi_const(1.0), -1.0)
        c = theorem_constant(d, md.p_star, md.phi_prime_at_star, phi)
        assert c.value == pytest.approx(1.0 / math.log(2.0), abs=1e-9)

    def test_zero_characteristic(self):
        u = UniformBinary()
        phi = energy_characteristic(psi_const(0.0), -0.5)
        assert theorem_constant(u, 0.0, 0.5, phi).value == 0.0

    def test_agreement_for_nontrivial_psi(self):
        dd = DissipativeUniformBinary(0.5)
        md = solve_malthusian(dd)
        psi = psi_mass_power(2.0)
        phi = energy_characteristic(psi, -0.75)
        a = theorem_constant(dd, md.p_star, md.phi_prime_at_star, phi,
                             tol=1e-10)
        b = energy_limit(dd, md.p_star, md.phi_prime_at_star, psi, -0.75)
        assert abs(a.value - b.value) <= 1e-10

    def test_error_estimate_reported(self):
        u = UniformBinary()
        phi = energy_characteristic(psi_const(1.0), -0.5)
        c = theorem_constant(u, 0.0, 0.5, phi, tol=1e-9)
        assert 0.0 <= c.error_estimate <= 1e-8


class TestEmpiricalKernel:
    def test_uniform_kernel_is_u_squared(self):
        u = UniformBinary()
        for x in (0.1, 0.3, 0.5, 0.7, 0.9):
            assert empirical_kernel(u, 0.0, x) == pytest.approx(x * x,
                                                                abs=1e-9)

    def test_limit_at_one_is_unit(self):
        # K(1-) = mean of sum s^(1+p*) = 1 for a conservative unit-rate law
        u = UniformBinary()
        assert empirical_kernel(u, 0.0, 1.0 - 1e-9) == pytest.approx(
            1.0, abs=1e-6)

    def test_dirac_below_atom_is_zero(self):
        d = DiracBinary(0.5, 0.5)
        assert empirical_kernel(d, 0.0, 0.3) == 0.0
        assert empirical_kernel(d, 0.0, 0.7) == pytest.approx(1.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            empirical_kernel(UniformBinary(), 0.0, 1.5)


class TestEmpiricalLimit:
    def test_constant_function_self_consistency(self):
        # for a conservative model the empirical mean of 1 is the unit
        # martingale, so the limit constant must be 1
        c = empirical_limit(UniformBinary(), 0.0, 0.5, f_const(1.0))
        assert c.value == pytest.approx(1.0, abs=1e-8)

    def test_identity_function(self):
        c = empirical_limit(UniformBinary(), 0.0, 0.5, f_power(1.0))
        assert c.value == pytest.approx(2.0 / 3.0, abs=1e-8)

    def test_zero_function(self):
        c = empirical_limit(UniformBinary(), 0.0, 0.5, f_const(0.0))
        assert c.value == 0.0

    def test_matches_theorem_constant_route(self):
        u = UniformBinary()
        direct = empirical_limit(u, 0.0, 0.5, f_power(1.0))
        via_phi = theorem_constant(u, 0.0, 0.5,
                                   empirical_characteristic(f_power(1.0),
                                                            0.0))
        assert direct.value == pytest.approx(via_phi.value, abs=1e-8)

    def test_dirac_atom_kernel(self):
        d = DiracBinary(0.5, 0.5)
        md = solve_malthusian(d)
        # K(u) = 1{u > 1/2}, so the integral is log(2) over phi'
        c = empirical_limit(d, md.p_star, md.phi_prime_at_star, f_const(1.0))
        expected = math.log(2.0) / math.log(2.0)
        assert c.value == pytest.approx(expected, abs=1e-8)


class TestBetaLimits:
    def test_energy_limit_pinned(self):
        # value computed from the truncated-measure quadrature oracle
        b = BetaBinary(0.5, 1e-2)
        c = energy_limit(b, 0.0, b.phi_prime(0.0), psi_excess_power(0.75),
                         -0.5)
        assert c.value == pytest.approx(0.651281, abs=1e-5)

    def test_kernel_monotone(self):
        b = BetaBinary(0.5, 1e-2)
        ks = [empirical_kernel(b, 0.0, x) for x in (0.1, 0.3, 0.6, 0.9)]
        assert ks == sorted(ks)
        assert ks[0] > 0.0
