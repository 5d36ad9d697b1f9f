"""Dislocation-measure families on the mass simplex.

A model bundles a (possibly truncated) dislocation measure: how fast a unit
block splits (`total_rate`), the law of the split fractions (`sample_split`,
one uniform in -> one split out), the Laplace exponent `phi` and its
derivative, and integrals of mass-level functionals against the measure.

All shipped families are binary.  Sigma-finite measures (beta_binary) are
truncated to {s1 <= 1 - eps}, which yields a finite-rate chain; the reported
domain lower bound after truncation is -1 for every shipped family (the
untruncated beta family has gamma - 1, recorded on the class).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, NoRoot, NonFinite, QuadratureFailure
from .rng import Stream

DEFAULT_QUAD_TOL = 1e-10
ROOT_TOL = 1e-10


@dataclass(frozen=True)
class MassSplit:
    """Ordered fractions of one dislocation: s1 >= s2 >= ... > 0, sum <= 1.

    Zero entries are dropped at construction; the trivial split (1, 0, ...)
    is rejected.
    """

    masses: tuple[float, ...]

    def __post_init__(self):
        kept = tuple(float(m) for m in self.masses if m > 0.0)
        object.__setattr__(self, "masses", kept)
        if not kept:
            raise ValueError("split has no positive fragment")
        if any(m > 1.0 for m in kept):
            raise ValueError(f"fragment above 1: {kept}")
        if any(a < b for a, b in zip(kept, kept[1:])):
            raise ValueError(f"fragments not nonincreasing: {kept}")
        if sum(kept) > 1.0 + 1e-12:
            raise ValueError(f"fragments sum to {sum(kept)} > 1")
        if kept == (1.0,):
            raise ValueError("trivial split (1, 0, ...) is excluded")

    @property
    def dissipated(self) -> float:
        return max(0.0, 1.0 - math.fsum(self.masses))

    def __len__(self) -> int:
        return len(self.masses)

    def __iter__(self):
        return iter(self.masses)


class IntegralResult(NamedTuple):
    value: float
    error: float
    method: str

    def __float__(self) -> float:
        return self.value


def _quad(f, a, b, tol, points=None):
    # split at breakpoints by hand: plain QAGS keeps its endpoint
    # extrapolation on every piece, which QAGP (points=...) would lose
    edges = [a, b]
    if points:
        edges = sorted({a, b, *(p for p in points if a < p < b)})
    val = err = 0.0
    piece_tol = tol / (len(edges) - 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            # near-zero epsrel keeps QUADPACK honest about the absolute goal
            v, e = integrate.quad(f, lo, hi, epsabs=piece_tol,
                                  epsrel=1e-12, limit=200)
            val += v
            err += e
    if not math.isfinite(val):
        raise NonFinite(f"integral over ({a}, {b}) is not finite")
    if err > tol * (1.0 + abs(val)):
        raise QuadratureFailure(
            f"quadrature error {err:.3e} exceeds tolerance {tol:.1e} "
            f"(value {val:.6e})")
    return val, err


class DislocationModel:
    """Base class; concrete families fill in the closed forms and sampler."""

    family: str = ""
    conservative: bool = False
    lattice: bool = False
    p_lower: float = -1.0

    # -- construction / description ------------------------------------

    @property
    def params(self) -> dict:
        return {}

    @property
    def eps(self) -> float | None:
        return None

    def to_config(self) -> dict:
        cfg = {"family": self.family, "params": self.params}
        if self.eps is not None:
            cfg["eps"] = self.eps
        return cfg

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in self.params.items())
        if self.eps is not None:
            inner += f", eps={self.eps}"
        return f"{self.family}({inner})"

    # -- sampling --------------------------------------------------------

    @property
    def total_rate(self) -> float:
        raise NotImplementedError

    def fractions_from_uniform(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised inverse-CDF sampler: one uniform -> (s1, s2) arrays."""
        raise NotImplementedError

    def sample_split(self, rng: Stream) -> MassSplit:
        u = np.asarray([rng.uniform()])
        s1, s2 = self.fractions_from_uniform(u)
        return MassSplit((float(s1[0]), float(s2[0])))

    # -- Laplace exponent -------------------------------------------------

    def _check_p(self, p: float) -> None:
        if p <= self.p_lower:
            raise DomainError(
                f"p={p} outside domain (p_lower={self.p_lower}, inf) of {self!r}")

    def phi(self, p: float, tol: float = DEFAULT_QUAD_TOL) -> float:
        """Laplace exponent of the truncated measure at p."""
        raise NotImplementedError

    def phi_prime(self, p: float, tol: float = DEFAULT_QUAD_TOL) -> float:
        raise NotImplementedError

    # -- integrals ---------------------------------------------------------

    def nu_integral(self, F: Callable[[MassSplit], float], *,
                    tol: float = DEFAULT_QUAD_TOL,
                    points: Sequence[float] | None = None,
                    method: str = "auto",
                    rng: Stream | None = None,
                    samples: int = 100_000) -> IntegralResult:
        """Integral of a mass-level functional against the truncated measure.

        `points` are breakpoints in the family's integration variable (see
        `fragment_preimages`); `method="mc"` draws from the normalised law
        and reports a standard error.
        """
        if method == "mc":
            if rng is None:
                raise ValueError("method='mc' requires rng")
            vals = np.empty(samples)
            for i in range(samples):
                vals[i] = F(self.sample_split(rng))
            rate = self.total_rate
            mean = float(vals.mean()) * rate
            se = float(vals.std(ddof=1) / math.sqrt(samples)) * rate
            if not math.isfinite(mean):
                raise NonFinite("MC integral is not finite")
            return IntegralResult(mean, se, "mc")
        return self._nu_quad(F, tol, points)

    def _nu_quad(self, F, tol, points) -> IntegralResult:
        raise NotImplementedError

    def fragment_preimages(self, u: float) -> list[float]:
        """Integration-variable points where some fragment equals u."""
        return []


class DiracBinary(DislocationModel):
    """Point mass at the split (b, b2); rate one per unit block."""

    family = "dirac_binary"
    lattice = True

    def __init__(self, b: float, b2: float):
        if not (0.0 < b < 1.0):
            raise ValueError(f"need 0 < b < 1, got {b}")
        if not (0.0 <= b2 <= b):
            raise ValueError(f"need 0 <= b2 <= b, got b2={b2}")
        if b + b2 > 1.0 + 1e-15:
            raise ValueError(f"b + b2 = {b + b2} > 1")
        self.b = float(b)
        self.b2 = float(b2)
        self._split = MassSplit((self.b, self.b2))

    @property
    def params(self):
        return {"b": self.b, "b2": self.b2}

    @property
    def conservative(self) -> bool:  # type: ignore[override]
        return self.b + self.b2 == 1.0

    @property
    def total_rate(self) -> float:
        return 1.0

    def fractions_from_uniform(self, u):
        n = np.shape(u)[0]
        return np.full(n, self.b), np.full(n, self.b2)

    def phi(self, p, tol=DEFAULT_QUAD_TOL):
        self._check_p(p)
        out = 1.0 - self.b ** (1.0 + p)
        if self.b2 > 0.0:
            out -= self.b2 ** (1.0 + p)
        return out

    def phi_prime(self, p, tol=DEFAULT_QUAD_TOL):
        self._check_p(p)
        out = self.b ** (1.0 + p) * math.log(1.0 / self.b)
        if self.b2 > 0.0:
            out += self.b2 ** (1.0 + p) * math.log(1.0 / self.b2)
        return out

    def nu_integral(self, F, *, tol=DEFAULT_QUAD_TOL, points=None,
                    method="auto", rng=None, samples=100_000):
        if method == "mc":
            return super().nu_integral(F, tol=tol, method="mc",
                                       rng=rng, samples=samples)
        val = float(F(self._split))
        if not math.isfinite(val):
            raise NonFinite("functional not finite at the atom")
        return IntegralResult(val, 0.0, "exact")


class _BinaryDensityModel(DislocationModel):
    """Binary family with a density over one integration variable t."""

    _lo: float
    _hi: float

    def _split_at(self, t: float) -> MassSplit:
        raise NotImplementedError

    def _weight(self, t: float) -> float:
        raise NotImplementedError

    def _nu_quad(self, F, tol, points):
        def integrand(t):
            return F(self._split_at(t)) * self._weight(t)
        pts = None
        if points:
            pts = sorted(p for p in points if self._lo < p < self._hi)
            pts = pts or None
        val, err = _quad(integrand, self._lo, self._hi, tol, points=pts)
        return IntegralResult(val, err, "quadrature")

    def _phi_quad(self, p, tol):
        def integrand(t):
            s = self._split_at(t)
            return (1.0 - math.fsum(m ** (1.0 + p) for m in s)) * self._weight(t)
        val, err = _quad(integrand, self._lo, self._hi, tol)
        return val

    def _phi_prime_quad(self, p, tol):
        def integrand(t):
            s = self._split_at(t)
            return math.fsum(m ** (1.0 + p) * math.log(1.0 / m)
                             for m in s) * self._weight(t)
        val, err = _quad(integrand, self._lo, self._hi, tol)
        return val


class UniformBinary(_BinaryDensityModel):
    """Conservative split (B, 1-B) with B uniform on (1/2, 1); nu(S) = 1.

    Phi(p) = p / (p + 2) in closed form.
    """

    family = "uniform_binary"
    conservative = True
    _lo, _hi = 0.5, 1.0

    @property
    def total_rate(self) -> float:
        return 1.0

    def fractions_from_uniform(self, u):
        b = 0.5 + 0.5 * np.asarray(u)
        return b, 1.0 - b

    def _split_at(self, t):
        return MassSplit((t, 1.0 - t))

    def _weight(self, t):
        return 2.0

    def phi(self, p, tol=DEFAULT_QUAD_TOL):
        self._check_p(p)
        return p / (p + 2.0)

    def phi_prime(self, p, tol=DEFAULT_QUAD_TOL):
        self._check_p(p)
        return 2.0 / (p + 2.0) ** 2

    def fragment_preimages(self, u):
        return [u, 1.0 - u]


class DissipativeUniformBinary(_BinaryDensityModel):
    """Split (B, kappa (1-B)), B uniform on (1/2, 1), kappa in (0, 1)."""

    family = "dissipative_uniform_binary"
    _lo, _hi = 0.5, 1.0

    def __init__(self, kappa: float):
        if not (0.0 < kappa < 1.0):
            raise ValueError(f"need kappa in (0, 1), got {kappa}")
        self.kappa = float(kappa)

    @property
    def params(self):
        return {"kappa": self.kappa}

    @property
    def total_rate(self) -> float:
        return 1.0

    def fractions_from_uniform(self, u):
        b = 0.5 + 0.5 * np.asarray(u)
        return b, self.kappa * (1.0 - b)

    def _split_at(self, t):
        return MassSplit((t, self.kappa * (1.0 - t)))

    def _weight(self, t):
        return 2.0

    def phi(self, p, tol=DEFAULT_QUAD_TOL):
        self._check_p(p)
        q = 2.0 + p
        half_pow = 2.0 ** -q
        return 1.0 - (2.0 * (1.0 - half_pow)
                      + 2.0 * self.kappa ** (1.0 + p) * half_pow) / q

    def phi_prime(self, p, tol=DEFAULT_QUAD_TOL):
        self._check_p(p)
        q = 2.0 + p
        half_pow = 2.0 ** -q
        ln2 = math.log(2.0)
        a_term = 2.0 * (ln2 * half_pow * q - (1.0 - half_pow)) / q ** 2
        b_val = 2.0 * self.kappa ** (1.0 + p) * half_pow / q
        b_term = b_val * (math.log(self.kappa) - ln2 - 1.0 / q)
        return -a_term - b_term

    def fragment_preimages(self, u):
        return [u, 1.0 - u / self.kappa]


class BetaBinary(_BinaryDensityModel):
    """Conservative binary with density (1-x)^(-1-gamma) on x in [1/2, 1-eps).

    The untruncated measure is sigma-finite (infinite total mass); the
    truncation to {s1 <= 1 - eps} makes the chain finite-rate.  Untruncated
    domain lower bound: gamma - 1.
    """

    family = "beta_binary"
    conservative = True

    def __init__(self, gamma: float, eps: float):
        if not (0.0 < gamma < 1.0):
            raise ValueError(f"need gamma in (0, 1), got {gamma}")
        if not (0.0 < eps < 0.5):
            raise ValueError(f"need eps in (0, 1/2), got {eps}")
        self.gamma = float(gamma)
        self._eps = float(eps)
        # integrate over v = (1-x)^(-gamma): the measure is uniform in v
        # (weight 1/gamma), which keeps the quadrature well conditioned
        self._lo, self._hi = 2.0**gamma, eps**-gamma
        self.p_lower_untruncated = self.gamma - 1.0

    @property
    def params(self):
        return {"gamma": self.gamma}

    @property
    def eps(self):
        return self._eps

    @property
    def total_rate(self) -> float:
        g = self.gamma
        return (self._eps ** -g - 2.0 ** g) / g

    def fractions_from_uniform(self, u):
        g = self.gamma
        y = (2.0 ** g + np.asarray(u) * g * self.total_rate) ** (-1.0 / g)
        return 1.0 - y, y

    def cdf_largest(self, x) -> np.ndarray:
        """CDF of s1 under the normalised truncated law (for KS checks)."""
        g = self.gamma
        x = np.clip(np.asarray(x, dtype=float), 0.5, 1.0 - self._eps)
        return ((1.0 - x) ** -g - 2.0 ** g) / (g * self.total_rate)

    def _split_at(self, v):
        y = v ** (-1.0 / self.gamma)
        return MassSplit((1.0 - y, y))

    def _weight(self, v):
        return 1.0 / self.gamma

    def phi(self, p, tol=DEFAULT_QUAD_TOL):
        self._check_p(p)
        if p == 0.0:
            return 0.0
        return self._phi_quad(p, tol)

    def phi_prime(self, p, tol=DEFAULT_QUAD_TOL):
        self._check_p(p)
        return self._phi_prime_quad(p, tol)

    def fragment_preimages(self, u):
        g = self.gamma
        pts = []
        if 0.0 < u < 1.0:
            pts = [u**-g, (1.0 - u) ** -g]
        return pts


@dataclass(frozen=True)
class MalthusianData:
    """Malthusian root p* of the Laplace exponent with its derivative there."""

    p_lower: float
    p_star: float
    phi_prime_at_star: float
    root_tol: float = ROOT_TOL

    def __post_init__(self):
        if not (self.p_lower < self.p_star <= 0.0):
            raise ValueError(
                f"p_star={self.p_star} not in ({self.p_lower}, 0]")
        if self.phi_prime_at_star <= 0.0:
            raise ValueError("phi_prime_at_star must be positive")


def solve_malthusian(model: DislocationModel,
                     tol: float = ROOT_TOL) -> MalthusianData:
    """Root of phi on (p_lower, 0]; conservative families short-circuit to 0."""
    if model.conservative:
        return MalthusianData(model.p_lower, 0.0, model.phi_prime(0.0), tol)
    lo = model.p_lower + 1e-9
    hi = 0.0
    flo, fhi = model.phi(lo), model.phi(hi)
    if flo >= 0.0 or fhi < 0.0:
        raise NoRoot(
            f"phi has no sign change on ({model.p_lower}, 0] for {model!r}: "
            f"phi({lo:.3g})={flo:.3g}, phi(0)={fhi:.3g}")
    mid = lo
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        fm = model.phi(mid)
        if abs(fm) <= tol:
            break
        if flo * fm <= 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    else:
        raise NoRoot(f"bisection did not reach |phi| <= {tol}")
    return MalthusianData(model.p_lower, mid, model.phi_prime(mid), tol)


_FAMILIES = {
    "dirac_binary": DiracBinary,
    "uniform_binary": UniformBinary,
    "dissipative_uniform_binary": DissipativeUniformBinary,
    "beta_binary": BetaBinary,
}


def model_from_config(cfg: dict) -> DislocationModel:
    """Build a model from {"family": ..., "params": {...}, "eps": ...}."""
    from .errors import ConfigError

    if not isinstance(cfg, dict):
        raise ConfigError(f"model config must be an object, got {type(cfg).__name__}")
    unknown = set(cfg) - {"family", "params", "eps"}
    if unknown:
        raise ConfigError(f"unknown model keys: {sorted(unknown)}")
    family = cfg.get("family")
    if family not in _FAMILIES:
        raise ConfigError(
            f"unknown family {family!r}; choose from {sorted(_FAMILIES)}")
    params = dict(cfg.get("params") or {})
    if family == "beta_binary":
        eps = cfg.get("eps")
        if eps is None:
            raise ConfigError("beta_binary requires 'eps' (truncation)")
        params["eps"] = eps
    elif cfg.get("eps") is not None:
        raise ConfigError(f"'eps' is only meaningful for beta_binary, not {family}")
    try:
        return _FAMILIES[family](**params)
    except TypeError as exc:
        raise ConfigError(f"bad params for {family}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
