"""Functionals of event logs and stopped states.

Everything here is a pure function of an immutable log/state, so replica-level
parallel evaluation is safe.  Sums use compensated summation (`math.fsum` on
already-materialised term arrays) and a fixed term order, which is what makes
the cross-checks between code paths exact rather than approximate.

Characteristics are functions phi(x, split) of the relative threshold
x = eta / parent_mass, supported on x in (0, 1], possibly with their own
randomness (independent of the chain: each event hashes (seed, event index)
into a fresh stream).  Only nonnegative characteristics are supported in the
core API; handle signed ones as a difference of two runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .engine import EventLog, StoppedState
from .errors import ConfigError, DomainError, IncompleteHorizon, NonFinite
from .measures import DislocationModel, MassSplit
from .rng import Stream


# -- mass-level cost functionals (psi) and unit-interval functions (f) -------


@dataclass(frozen=True)
class SplitFunctional:
    """Named psi: MassSplit -> real, with a vectorised form over event rows."""

    name: str
    scalar: Callable[[MassSplit], float]
    pair_terms: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, split: MassSplit) -> float:
        return self.scalar(split)


def psi_const(c: float = 1.0) -> SplitFunctional:
    return SplitFunctional(
        f"const({c:g})",
        lambda s: c,
        lambda f1, f2: np.full_like(f1, c))


def psi_mass_power(q: float) -> SplitFunctional:
    """psi(s) = sum_k s_k^q."""
    def scalar(s: MassSplit) -> float:
        return math.fsum(m**q for m in s)

    def pair(f1, f2):
        out = f1**q
        two = f2 > 0.0
        out = out + np.where(two, f2**q, 0.0)
        return out

    return SplitFunctional(f"mass_power({q:g})", scalar, pair)


def psi_excess_power(q: float) -> SplitFunctional:
    """psi(s) = sum_k s_k^q - 1, the potential-energy cost (q in (gamma, 1))."""
    base = psi_mass_power(q)
    return SplitFunctional(
        f"excess_power({q:g})",
        lambda s: base.scalar(s) - 1.0,
        lambda f1, f2: base.pair_terms(f1, f2) - 1.0)


def psi_deficit() -> SplitFunctional:
    return SplitFunctional(
        "deficit",
        lambda s: s.dissipated,
        lambda f1, f2: 1.0 - f1 - f2)


@dataclass(frozen=True)
class UnitFunction:
    """Named f on [0, 1]; mean over its own randomness where applicable."""

    name: str
    vec: Callable[[np.ndarray], np.ndarray]

    def __call__(self, u):
        return self.vec(np.asarray(u, dtype=float))


def f_const(c: float = 1.0) -> UnitFunction:
    return UnitFunction(f"const({c:g})", lambda u: np.full_like(u, c))


def f_power(q: float) -> UnitFunction:
    return UnitFunction(f"power({q:g})", lambda u: u**q)


# -- random characteristics ---------------------------------------------------


@dataclass(frozen=True)
class Characteristic:
    """phi(x, split) with support x in (0, 1].

    `eval` may use the provided stream for characteristic-level randomness;
    `mean` integrates that randomness out (equal to `eval` for deterministic
    characteristics).  `event_terms`, when present, evaluates the mean on
    whole event columns at once.
    """

    name: str
    eval: Callable[[float, MassSplit, Stream], float]
    mean: Callable[[float, MassSplit], float]
    event_terms: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = None
    mean_vec: Callable[[np.ndarray, MassSplit], np.ndarray] | None = None

    def mean_at(self, x, split: MassSplit):
        if np.ndim(x) == 0:
            return self.mean(float(x), split)
        if self.mean_vec is not None:
            return self.mean_vec(np.asarray(x, dtype=float), split)
        return np.array([self.mean(float(v), split) for v in np.asarray(x)])


def energy_characteristic(psi: SplitFunctional, p: float) -> Characteristic:
    """phi(x, s) = 1{0 < x <= 1} x^-(1+p) psi(s): the crushing-energy kernel."""
    def mean(x: float, split: MassSplit) -> float:
        if not 0.0 < x <= 1.0:
            return 0.0
        return x ** -(1.0 + p) * psi.scalar(split)

    def terms(x, f1, f2):
        inside = (x > 0.0) & (x <= 1.0)
        out = np.where(inside, x ** -(1.0 + p), 0.0)
        return out * psi.pair_terms(f1, f2)

    def mvec(x, split):
        inside = (x > 0.0) & (x <= 1.0)
        return np.where(inside, x ** -(1.0 + p), 0.0) * psi.scalar(split)

    return Characteristic(f"energy(psi={psi.name}, p={p:g})",
                          lambda x, s, rng: mean(x, s), mean, terms, mvec)


def empirical_characteristic(f: UnitFunction, p_star: float) -> Characteristic:
    """phi whose counted process reproduces the stopping-line empirical mean.

    phi(x, s) = sum_k 1{s_k < x <= 1} x^-(1+p*) s_k^(1+p*) f(s_k / x).
    """
    def mean(x: float, split: MassSplit) -> float:
        if not 0.0 < x <= 1.0:
            return 0.0
        acc = 0.0
        for m in split:
            if m < x:
                acc += m ** (1.0 + p_star) * float(f(m / x))
        return x ** -(1.0 + p_star) * acc

    def terms(x, f1, f2):
        inside = (x > 0.0) & (x <= 1.0)
        xf = np.where(inside, x, 1.0)
        out = np.zeros_like(x)
        for fr in (f1, f2):
            hit = inside & (fr > 0.0) & (fr < x)
            if hit.any():
                out[hit] += fr[hit] ** (1.0 + p_star) * f.vec(fr[hit] / xf[hit])
        return np.where(inside, xf ** -(1.0 + p_star), 0.0) * out

    def mvec(x, split):
        out = np.zeros_like(x)
        inside = (x > 0.0) & (x <= 1.0)
        for m in split:
            hit = inside & (m < x)
            if hit.any():
                out[hit] += m ** (1.0 + p_star) * f.vec(m / x[hit])
        return np.where(inside, x ** -(1.0 + p_star), 0.0) * out

    return Characteristic(f"empirical(f={f.name}, p_star={p_star:g})",
                          lambda x, s, rng: mean(x, s), mean, terms, mvec)


def window_characteristic(a: float, b: float) -> Characteristic:
    """phi = 1{x in (a, b)}: counts blocks created at sizes in (eta/b, eta/a).

    Degenerate for infinite dislocation measures (the count is 0 or infinity);
    shipped for finite-rate experiments and unit checks only.
    """
    if not 0.0 < a < b <= 1.0:
        raise DomainError(f"need 0 < a < b <= 1, got ({a}, {b})")

    def mean(x: float, split: MassSplit) -> float:
        return 1.0 if a < x < b else 0.0

    def terms(x, f1, f2):
        return ((x > a) & (x < b)).astype(float)

    return Characteristic(f"window({a:g},{b:g})",
                          lambda x, s, rng: mean(x, s), mean, terms,
                          lambda x, s: ((x > a) & (x < b)).astype(float))


@dataclass(frozen=True)
class FunctionalValue:
    value: float
    eta: float
    normalization: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise NonFinite(f"functional value {self.value} at eta={self.eta}")


# -- martingales ---------------------------------------------------------------


def _masses_of(state) -> np.ndarray:
    if isinstance(state, StoppedState):
        return state.masses
    return np.asarray(state, dtype=float)


def lambda_mart(state, p: float) -> float:
    """Stopping-line additive martingale: sum_k lambda_k^(1+p)."""
    lam = _masses_of(state)
    if lam.size == 0:
        return 0.0
    return math.fsum(lam ** (1.0 + p))


def m_mart(log: EventLog, t: float, p: float, phi_p: float) -> float:
    """Time-t additive martingale sum masses(t)^(1+p) * exp(phi_p * t).

    Evaluated on the stopped process: frozen blocks keep their frozen mass,
    which preserves the unit mean exactly at p = p* and up to
    O(eta^(p - p*)) above it.
    """
    from .engine import blocks_at

    masses = blocks_at(log, t)
    return math.fsum(masses ** (1.0 + p)) * math.exp(phi_p * t)


# -- the counted process and its named specialisations ------------------------


def counted_process(log: EventLog, phi: Characteristic, eta: float,
                    seed: int = 0) -> FunctionalValue:
    """Z^phi_eta: independent copies of phi summed over all split events.

    Events with parent mass <= eta contribute nothing (their argument falls
    outside the support); the zero-mass-parent convention phi(a/0) := 0 is
    honoured because frozen blocks never appear as parents.
    """
    if eta < log.eta:
        raise IncompleteHorizon(
            f"log stopped at eta={log.eta} > requested {eta}")
    sel = log.parent_masses > eta
    if not sel.any():
        return FunctionalValue(0.0, eta, "none")
    pm = log.parent_masses[sel]
    x = eta / pm
    if phi.event_terms is not None:
        terms = phi.event_terms(x, log.frac1[sel], log.frac2[sel])
    else:
        idx = np.nonzero(sel)[0]
        terms = np.empty(idx.size)
        f1, f2 = log.frac1, log.frac2
        for j, i in enumerate(idx):
            split = MassSplit((float(f1[i]), float(f2[i])))
            terms[j] = phi.eval(float(x[j]), split, Stream(seed, int(i)))
    return FunctionalValue(math.fsum(terms), eta, "none")


def energy(log: EventLog, psi: SplitFunctional, p: float, eta: float,
           seed: int = 0) -> FunctionalValue:
    """Crushing energy to fineness eta: sum over events of pm^(1+p) psi(s).

    Computed as eta^(1+p) times the counted process with the energy
    characteristic -- one event set, one term order, one final scaling.
    """
    z = counted_process(log, energy_characteristic(psi, p), eta, seed)
    return FunctionalValue(eta ** (1.0 + p) * z.value, eta,
                           f"eta**(p_star - ({p:g}))")


def empirical_mean(state, f: UnitFunction, p_star: float, eta: float | None = None,
                   seed: int = 0) -> float:
    """sum_k lambda_k^(1+p*) f(lambda_k / eta) over the stopping line."""
    if isinstance(state, StoppedState):
        lam = state.masses
        eta = state.eta if eta is None else eta
    else:
        lam = np.asarray(state, dtype=float)
        if eta is None:
            raise ValueError("eta required when passing raw masses")
    if lam.size == 0:
        return 0.0
    return math.fsum(lam ** (1.0 + p_star) * np.asarray(f(lam / eta), dtype=float))


def count_T(state, rho: float, eta: float | None = None) -> int:
    """Number of stopping-line blocks of size at least eta * rho."""
    if not 0.0 < rho <= 1.0:
        raise DomainError(f"rho must be in (0, 1], got {rho}")
    if isinstance(state, StoppedState):
        lam = state.masses
        eta = state.eta if eta is None else eta
    else:
        lam = np.asarray(state, dtype=float)
        if eta is None:
            raise ValueError("eta required when passing raw masses")
    return int(np.count_nonzero(lam >= eta * rho))


# -- integrability pre-check ---------------------------------------------------


def precheck_characteristic(model: DislocationModel, phi: Characteristic,
                            p_star: float, p_tilde: float,
                            beta: float = 0.5,
                            eta_grid: Sequence[float] | None = None) -> dict:
    """Numerical screen for the two SLLN integrability conditions.

    Evaluates, on a grid, the measure integral of sup_eta eta^(1+p*+beta)
    phi(eta, s) and the tail of eta^(1+p_tilde) * integral of phi(eta, s).
    This flags obvious divergence; it does not prove integrability.
    """
    if not model.p_lower < p_tilde < p_star:
        raise DomainError(
            f"need p_tilde in ({model.p_lower}, {p_star}), got {p_tilde}")
    if eta_grid is None:
        eta_grid = np.geomspace(1e-6, 1.0, 61)
    eta_grid = np.asarray(eta_grid, dtype=float)

    def sup_term(split: MassSplit) -> float:
        vals = eta_grid ** (1.0 + p_star + beta) * phi.mean_at(eta_grid, split)
        return float(np.max(vals))

    sup_integral = model.nu_integral(sup_term, tol=1e-8)
    tail = []
    for eta in eta_grid[eta_grid <= 1e-2]:
        v = model.nu_integral(lambda s: phi.mean(float(eta), s), tol=1e-8)
        tail.append(eta ** (1.0 + p_tilde) * v.value)
    tail = np.asarray(tail)
    finite = math.isfinite(sup_integral.value) and np.all(np.isfinite(tail))
    return {
        "sup_integral": sup_integral.value,
        "tail_values": tail.tolist(),
        "tail_limsup_estimate": float(tail.max()) if tail.size else float("nan"),
        "looks_integrable": bool(finite),
    }


# -- named-spec builders (shared by config/CLI) --------------------------------


_PSI_BUILDERS = {
    "const": psi_const,
    "mass_power": psi_mass_power,
    "excess_power": psi_excess_power,
    "deficit": psi_deficit,
}

_F_BUILDERS = {
    "const": f_const,
    "power": f_power,
}


def _build_named(spec: dict, builders: dict, what: str):
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"{what} spec must be an object with 'name'")
    name = spec["name"]
    if name not in builders:
        raise ConfigError(f"unknown {what} {name!r}; choose from {sorted(builders)}")
    kwargs = {k: v for k, v in spec.items() if k != "name"}
    try:
        return builders[name](**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad arguments for {what} {name!r}: {exc}") from exc


def build_psi(spec: dict) -> SplitFunctional:
    return _build_named(spec, _PSI_BUILDERS, "psi")


def build_f(spec: dict) -> UnitFunction:
    return _build_named(spec, _F_BUILDERS, "f")


def build_characteristic(spec: dict, p_star: float) -> Characteristic:
    """Characteristic from a config spec (shared by CLI and experiments)."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("characteristic spec must be an object with 'kind'")
    kind = spec["kind"]
    if kind == "energy":
        return energy_characteristic(build_psi(spec["psi"]), float(spec["p"]))
    if kind == "empirical":
        return empirical_characteristic(build_f(spec["f"]), p_star)
    if kind == "window":
        return window_characteristic(float(spec["a"]), float(spec["b"]))
    raise ConfigError(f"unknown characteristic kind {kind!r}")
