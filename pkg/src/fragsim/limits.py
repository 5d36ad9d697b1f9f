"""Deterministic limit constants of the strong laws.

The general constant multiplying the stopping-line martingale limit is

    C = (1 / phi'(p*)) * integral over splits s of
        integral over rho in (0, 1] of rho^p* E[phi(rho, s)] d rho

using that the time integral of the expected p*-weighted mass sum collapses
to 1 in the homogeneous case (unit-mean martingale at the Malthusian root).
The same constant is used for every self-similarity index, since the counted
process depends on block sizes only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, NonFinite
from .functionals import Characteristic, SplitFunctional, UnitFunction
from .measures import DEFAULT_QUAD_TOL, DislocationModel, MassSplit, _quad


@dataclass(frozen=True)
class LimitConstant:
    """A theorem constant with provenance and an error estimate."""

    value: float
    theorem: str  # one of: main, energy, empirical
    method: str   # one of: closed_form, quadrature, renewal_oracle
    error_estimate: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise NonFinite(f"limit constant is {self.value}")


def theorem_constant(model: DislocationModel, p_star: float,
                     phi_prime_star: float, phi: Characteristic,
                     tol: float = 1e-9) -> LimitConstant:
    """General constant for the process counted with `phi`."""
    inner_errs = []

    def inner(split: MassSplit) -> float:
        # rho = exp(-v) turns the rho -> 0 endpoint singularity into plain
        # exponential decay, so the quadrature error estimate is honest
        pts = sorted(-math.log(m) for m in split.masses if 0.0 < m < 1.0)

        def integrand(v):
            x = math.exp(-v)
            return math.exp(-(1.0 + p_star) * v) * phi.mean(x, split)

        val, err = _quad(integrand, 0.0, math.inf, tol, points=pts or None)
        inner_errs.append(err)
        return val

    outer = model.nu_integral(inner, tol=tol)
    value = outer.value / phi_prime_star
    inner_err = max(inner_errs) if inner_errs else 0.0
    err = (outer.error + inner_err * max(1.0, model.total_rate)) / phi_prime_star
    return LimitConstant(value, "main", "quadrature", err)


def energy_limit(model: DislocationModel, p_star: float,
                 phi_prime_star: float, psi: SplitFunctional, p: float,
                 tol: float = DEFAULT_QUAD_TOL) -> LimitConstant:
    """Energy SLLN constant: nu(psi) / (phi'(p*) (p* - p)), for p < p*."""
    if p >= p_star:
        raise DomainError(f"energy exponent p={p} must be below p_star={p_star}")
    nu_psi = model.nu_integral(psi, tol=tol)
    scale = 1.0 / (phi_prime_star * (p_star - p))
    method = "closed_form" if nu_psi.method == "exact" else "quadrature"
    return LimitConstant(nu_psi.value * scale, "energy", method,
                         nu_psi.error * scale)


def empirical_kernel(model: DislocationModel, p_star: float, u: float,
                     tol: float = DEFAULT_QUAD_TOL) -> float:
    """K(u) = integral of sum_k 1{s_k < u} s_k^(1+p*) over the measure."""
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must be in (0, 1), got {u}")

    def F(split: MassSplit) -> float:
        return math.fsum(m ** (1.0 + p_star) for m in split if m < u)

    res = model.nu_integral(F, tol=tol, points=model.fragment_preimages(u))
    return res.value


def empirical_limit(model: DislocationModel, p_star: float,
                    phi_prime_star: float, f: UnitFunction,
                    tol: float = 1e-8) -> LimitConstant:
    """Empirical-mean SLLN constant: (1/phi'(p*)) int f(u) K(u) du/u."""
    atoms = _fragment_atoms(model)

    def integrand(u):
        return float(f(u)) * empirical_kernel(model, p_star, u, tol=tol) / u

    val, err = _quad(integrand, 0.0, 1.0, tol, points=atoms or None)
    return LimitConstant(val / phi_prime_star, "empirical", "quadrature",
                         err / phi_prime_star)


def _fragment_atoms(model) -> list[float]:
    # kernel breakpoints in u for atomic families
    params = model.params
    if model.family == "dirac_binary":
        return sorted(v for v in (params["b"], params["b2"]) if 0.0 < v < 1.0)
    return []
