import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from fragsim.errors import ConfigError, DomainError, NoRoot
from fragsim.measures import (BetaBinary, DiracBinary, DislocationModel,
                              DissipativeUniformBinary, MalthusianData,
                              MassSplit, UniformBinary, model_from_config,
                              solve_malthusian)
from fragsim.rng import Stream

ALL_MODELS = [
    DiracBinary(0.5, 0.5),
    DiracBinary(0.4, 0.4),
    UniformBinary(),
    DissipativeUniformBinary(0.5),
    BetaBinary(0.5, 1e-2),
]

# p* of DissipativeUniformBinary(0.5), pinned from a bisection oracle on the
# closed-form exponent before the build
DISSIP_HALF_P_STAR = -0.2416850366956933


class TestMassSplit:
    def test_drops_zeros_and_orders(self):
        s = MassSplit((0.5, 0.0))
        assert s.masses == (0.5,)
        assert s.dissipated == 0.5

    @pytest.mark.parametrize("masses", [
        (0.3, 0.4),          # not ordered
        (1.1, 0.2),          # above one
        (0.9, 0.3),          # sums above one
        (1.0,),              # trivial split
        (0.0, 0.0),          # no positive fragment
    ])
    def test_invalid_rejected(self, masses):
        with pytest.raises(ValueError):
            MassSplit(masses)

    @given(st.floats(0.5, 1.0 - 1e-9), st.floats(0.0, 0.5))
    @settings(max_examples=200, deadline=None)
    def test_valid_binary_accepted(self, a, b):
        b = min(b, a, 1.0 - a)
        s = MassSplit((a, b))
        assert s.masses[0] == a
        assert sum(s.masses) <= 1.0 + 1e-12


class TestPhi:
    def test_uniform_closed_form(self):
        u = UniformBinary()
        assert u.phi(1.0) == pytest.approx(1.0 / 3.0, abs=1e-15)
        for p in np.linspace(-0.9, 2.0, 13):
            assert u.phi(p) == pytest.approx(p / (p + 2.0), abs=1e-15)

    def test_uniform_closed_form_vs_quadrature_oracle(self):
        u = UniformBinary()
        for p in np.linspace(-0.9, 2.0, 7):
            val, _ = integrate.quad(
                lambda x: 2.0 * (1.0 - x**(1 + p) - (1 - x)**(1 + p)),
                0.5, 1.0, epsabs=1e-12)
            assert u.phi(p) == pytest.approx(val, abs=1e-10)

    def test_dirac_direct_substitution(self):
        d = DiracBinary(0.4, 0.4)
        assert d.phi(0.0) == pytest.approx(0.2, abs=1e-15)
        p = 0.7
        assert d.phi(p) == pytest.approx(1 - 2 * 0.4**(1 + p), abs=1e-15)

    def test_conservative_phi_zero_at_origin(self):
        for model in ALL_MODELS:
            if model.conservative:
                assert abs(model.phi(0.0)) <= 1e-12

    def test_domain_error_below_lower_bound(self):
        for model in ALL_MODELS:
            with pytest.raises(DomainError):
                model.phi(model.p_lower)
            with pytest.raises(DomainError):
                model.phi_prime(-1.5)

    @pytest.mark.parametrize("model", ALL_MODELS, ids=repr)
    def test_increasing_and_concave_on_grid(self, model):
        grid = np.linspace(model.p_lower + 0.1, 2.0, 50)
        vals = np.array([model.phi(p) for p in grid])
        diffs = np.diff(vals)
        assert np.all(diffs > 0.0)
        assert np.all(np.diff(diffs) <= 1e-8)

    @pytest.mark.parametrize("model", ALL_MODELS, ids=repr)
    def test_phi_prime_matches_finite_differences(self, model):
        h = 1e-5
        for p in np.linspace(model.p_lower + 0.1, 2.0, 9):
            fd = (model.phi(p + h) - model.phi(p - h)) / (2 * h)
            assert model.phi_prime(p) == pytest.approx(fd, abs=1e-6)

    def test_uniform_phi_prime_closed_form(self):
        u = UniformBinary()
        assert u.phi_prime(0.0) == pytest.approx(0.5, abs=1e-15)
        assert u.phi_prime(1.0) == pytest.approx(2.0 / 9.0, abs=1e-15)

    def test_dirac_half_phi_prime_is_log_two(self):
        d = DiracBinary(0.5, 0.5)
        assert d.phi_prime(0.0) == pytest.approx(math.log(2.0), abs=1e-15)


class TestMalthusian:
    def test_conservative_root_is_exactly_zero(self):
        for model in (UniformBinary(), BetaBinary(0.5, 1e-2)):
            md = solve_malthusian(model)
            assert md.p_star == 0.0
            assert md.phi_prime_at_star > 0.0

    def test_dirac_closed_form_root(self):
        md = solve_malthusian(DiracBinary(0.4, 0.4))
        exact = math.log(0.5) / math.log(0.4) - 1.0
        assert md.p_star == pytest.approx(exact, abs=1e-8)
        assert abs(DiracBinary(0.4, 0.4).phi(md.p_star)) <= 1e-10
        assert md.phi_prime_at_star == pytest.approx(math.log(2.5), abs=1e-9)

    def test_dissipative_uniform_pinned_root(self):
        md = solve_malthusian(DissipativeUniformBinary(0.5))
        assert md.p_star == pytest.approx(DISSIP_HALF_P_STAR, abs=1e-9)
        assert md.p_lower < md.p_star <= 0.0

    def test_no_root_for_single_fragment_family(self):
        with pytest.raises(NoRoot):
            solve_malthusian(DiracBinary(0.5, 0.0))

    def test_malthusian_data_validation(self):
        with pytest.raises(ValueError):
            MalthusianData(-1.0, 0.5, 1.0)
        with pytest.raises(ValueError):
            MalthusianData(-1.0, -0.5, -1.0)


class TestSampling:
    def test_dirac_point_mass(self):
        d = DiracBinary(0.5, 0.5)
        s = d.sample_split(Stream(1))
        assert s.masses == (0.5, 0.5)

    def test_uniform_empirical_mean(self):
        u = UniformBinary()
        rng = Stream(123)
        draws = np.array([u.sample_split(rng).masses[0] for _ in range(10**5)])
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 0.75) <= 3 * se

    def test_beta_sampler_matches_analytic_cdf(self):
        b = BetaBinary(0.5, 1e-2)
        rng = Stream(7)
        draws = np.array([b.sample_split(rng).masses[0] for _ in range(5000)])
        assert draws.min() >= 0.5 and draws.max() < 0.99
        res = stats.kstest(draws, lambda x: b.cdf_largest(x))
        assert res.pvalue > 0.01

    @pytest.mark.parametrize("model", ALL_MODELS, ids=repr)
    def test_sample_moment_matches_exponent(self, model):
        # mean of sum s^(1+p) under the normalised law = 1 - phi(p)/rate
        p = 1.0
        rng = Stream(55)
        n = 20000
        vals = np.empty(n)
        for i in range(n):
            vals[i] = math.fsum(m**(1 + p) for m in model.sample_split(rng))
        expected = 1.0 - model.phi(p) / model.total_rate
        se = vals.std(ddof=1) / math.sqrt(n)
        assert abs(vals.mean() - expected) <= max(4 * se, 1e-12)


class TestNuIntegral:
    def test_uniform_total_mass(self):
        res = UniformBinary().nu_integral(lambda s: 1.0)
        assert res.value == pytest.approx(1.0, abs=1e-10)

    def test_uniform_kernel_value(self):
        u = 0.3
        res = UniformBinary().nu_integral(
            lambda s: math.fsum(m for m in s if m < u),
            points=UniformBinary().fragment_preimages(u))
        assert res.value == pytest.approx(0.09, abs=1e-10)

    def test_dirac_point_evaluation(self):
        res = DiracBinary(0.4, 0.4).nu_integral(lambda s: math.fsum(s))
        assert res.value == 0.8
        assert res.method == "exact"

    def test_mc_agrees_with_quadrature(self):
        model = DissipativeUniformBinary(0.5)
        F = lambda s: s.dissipated
        quad = model.nu_integral(F)
        mc = model.nu_integral(F, method="mc", rng=Stream(9), samples=20000)
        assert mc.method == "mc"
        assert abs(mc.value - quad.value) <= 4 * mc.error
        assert quad.value == pytest.approx(0.125, abs=1e-10)

    def test_beta_rate_closed_form(self):
        b = BetaBinary(0.5, 1e-2)
        total = b.nu_integral(lambda s: 1.0)
        assert total.value == pytest.approx(b.total_rate, rel=1e-10)
        assert b.total_rate == pytest.approx(((1e-2)**-0.5 - 2**0.5) / 0.5)


class TestConfig:
    def test_round_trip(self):
        for model in ALL_MODELS:
            again = model_from_config(model.to_config())
            assert again.to_config() == model.to_config()

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            model_from_config({"family": "nope"})

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            model_from_config({"family": "uniform_binary", "wat": 1})

    def test_beta_requires_eps(self):
        with pytest.raises(ConfigError):
            model_from_config({"family": "beta_binary",
                               "params": {"gamma": 0.5}})

    def test_eps_only_for_beta(self):
        with pytest.raises(ConfigError):
            model_from_config({"family": "uniform_binary", "eps": 0.1})

    def test_bad_params(self):
        with pytest.raises(ConfigError):
            model_from_config({"family": "dirac_binary",
                               "params": {"b": 0.7, "b2": 0.8}})
