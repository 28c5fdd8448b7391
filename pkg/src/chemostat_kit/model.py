"""Closed-form rate functions, division kernel and initial mass densities.

All operations are pure; sampling operations take an explicit
``numpy.random.Generator``.  Rate functions accept scalars or numpy arrays
in the mass argument.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .params import ChemostatParams


# --------------------------------------------------------------------------
# Growth and division rates
# --------------------------------------------------------------------------

def monod_rate(s, params: ChemostatParams):
    """Monod growth-rate factor r(s) = r_max * s / (k_r + s), 1/h."""
    if np.any(np.asarray(s) < 0.0):
        raise ValueError(f"substrate concentration must be >= 0, got {s}")
    return params.r_max * s / (params.k_r + s)


def growth_speed(s, x, params: ChemostatParams):
    """Gompertz mass flux r(s) * log(m_max/x) * x, mg/h.

    Continuous limits: 0 at x = 0 and at x = m_max.  Bounded above by
    r_max * m_max / e.
    """
    r = monod_rate(s, params)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0) or np.any(xa > params.m_max):
        raise ValueError(f"mass must lie in [0, m_max={params.m_max}], got {x}")
    with np.errstate(divide="ignore", invalid="ignore"):
        # written as x*(log(m_max) - log(x)) so subnormal x cannot overflow
        logx = np.log(np.where(xa > 0.0, xa, 1.0))
        out = r * np.where(xa > 0.0, (math.log(params.m_max) - logx) * xa, 0.0)
    if np.isscalar(x):
        return float(out)
    return out


def growth_speed_dx(s, x, params: ChemostatParams):
    """Mass derivative of the Gompertz flux: r(s) * (log(m_max/x) - 1), 1/h."""
    r = monod_rate(s, params)
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0.0):
        raise ValueError(f"mass must be strictly positive, got {x}")
    if np.any(xa > params.m_max):
        raise ValueError(f"mass must be <= m_max={params.m_max}, got {x}")
    out = r * (np.log(params.m_max / xa) - 1.0)
    if np.isscalar(x):
        return float(out)
    return out


def growth_lipschitz_bound(params: ChemostatParams) -> float:
    """Lipschitz constant of growth_speed w.r.t. s, uniform in x."""
    return (params.r_max / params.k_r) * (params.m_max / math.e)


def division_rate(s, x, params: ChemostatParams):
    """Division rate, 1/h: saturating log law above the threshold m_div,

        lambda_bar * log((x - m_div) p_lambda + 1) / log((m_max - m_div) p_lambda + 1)

    for x >= m_div and 0 below, with the mass excess in mg (p_lambda carries
    the inverse mass unit).  Runs from 0 at m_div to lambda_bar at m_max.
    The substrate argument is part of the interface but unused by this
    built-in form; substrate-dependent laws plug in via DivisionLaw.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0) or np.any(xa > params.m_max):
        raise ValueError(f"mass must lie in [0, m_max={params.m_max}], got {x}")
    denom = math.log((params.m_max - params.m_div) * params.p_lambda + 1.0)
    arg = np.maximum((xa - params.m_div) * params.p_lambda + 1.0, 1.0)
    out = params.lambda_bar * np.log(arg) / denom
    if np.isscalar(x):
        return float(out)
    return out


@dataclass(frozen=True)
class DivisionLaw:
    """Pluggable division-rate slot for the simulators.

    kind:
      * ``"mass_log"`` -- built-in law (division_rate above), bound lambda_bar;
      * ``"constant"`` -- rate ``value`` for every individual;
      * ``"zero"``     -- no divisions;
      * ``"custom"``   -- arbitrary callable ``fn(s, x) -> rate`` with upper
        bound ``value`` (reference IBM engine and IDE solver only).
    """

    kind: str = "mass_log"
    value: float = 0.0
    fn: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("mass_log", "constant", "zero", "custom"):
            raise ValueError(f"unknown division law kind {self.kind!r}")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom division law requires fn")

    def bound(self, params: ChemostatParams) -> float:
        if self.kind == "mass_log":
            return params.lambda_bar
        if self.kind == "constant":
            return self.value
        if self.kind == "zero":
            return 0.0
        return self.value

    def rate(self, s, x, params: ChemostatParams):
        if self.kind == "mass_log":
            return division_rate(s, x, params)
        if self.kind == "constant":
            return self.value * np.ones_like(np.asarray(x, dtype=float)) if not np.isscalar(x) else self.value
        if self.kind == "zero":
            return np.zeros_like(np.asarray(x, dtype=float)) if not np.isscalar(x) else 0.0
        return self.fn(s, x)


# --------------------------------------------------------------------------
# Division kernel (symmetric beta)
# --------------------------------------------------------------------------

def kernel_beta_norm(p_beta: float) -> float:
    """Normalizer B(p) = integral of (a(1-a))^(p-1) over [0,1] = Gamma(p)^2/Gamma(2p)."""
    if p_beta < 1.0:
        raise ValueError(f"p_beta must be >= 1, got {p_beta}")
    return math.exp(2.0 * math.lgamma(p_beta) - math.lgamma(2.0 * p_beta))


def kernel_density(alpha, p_beta: float):
    """Density of the daughter mass fraction: (a(1-a))^(p-1) / B(p) on [0,1]."""
    aa = np.asarray(alpha, dtype=float)
    if np.any(aa < 0.0) or np.any(aa > 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    norm = kernel_beta_norm(p_beta)
    out = (aa * (1.0 - aa)) ** (p_beta - 1.0) / norm
    if np.isscalar(alpha):
        return float(out)
    return out


def kernel_density_clipped(alpha, p_beta: float, norm: float | None = None):
    """kernel_density extended by a hard zero outside [0,1] (array-safe)."""
    aa = np.asarray(alpha, dtype=float)
    if norm is None:
        norm = kernel_beta_norm(p_beta)
    inside = (aa >= 0.0) & (aa <= 1.0)
    clipped = np.clip(aa, 0.0, 1.0)
    return np.where(inside, (clipped * (1.0 - clipped)) ** (p_beta - 1.0) / norm, 0.0)


def kernel_sample(rng: np.random.Generator, p_beta: float, size=None):
    """Sample daughter mass fractions from the symmetric beta kernel.

    Ratio of two gamma variates, each drawn by the generator's accept-reject
    gamma sampler; every sample lies strictly in (0, 1).
    """
    if p_beta < 1.0:
        raise ValueError(f"p_beta must be >= 1, got {p_beta}")
    n = 1 if size is None else int(size)
    out = np.empty(n, dtype=float)
    todo = np.arange(n)
    while todo.size:
        g1 = rng.standard_gamma(p_beta, todo.size)
        g2 = rng.standard_gamma(p_beta, todo.size)
        a = g1 / (g1 + g2)
        out[todo] = a
        todo = todo[(a <= 0.0) | (a >= 1.0)]
    if size is None:
        return float(out[0])
    return out


# --------------------------------------------------------------------------
# Initial mass densities
# --------------------------------------------------------------------------

D_TRANSIENT = "transient"
D_SMOOTH = "smooth"
D_CUSTOM = "custom"

_TRANSIENT_SUPPORT = (0.0005, 0.00075)
_SMOOTH_SUPPORT = (0.00035, 0.00065)
_BUMP_EXPONENT = 5.0


def _bump(x, lo: float, hi: float):
    """Unnormalized bump ((x-lo)/w * (1 - (x-lo)/w))^5 on (lo, hi), zero outside."""
    xa = np.asarray(x, dtype=float)
    w = hi - lo
    u = (xa - lo) / w
    inside = (u > 0.0) & (u < 1.0)
    uu = np.where(inside, u, 0.5)
    return np.where(inside, (uu * (1.0 - uu)) ** _BUMP_EXPONENT, 0.0)


@dataclass(frozen=True)
class InitialMassDensity:
    """Initial individual-mass density (kept unnormalized; sampling uses rejection).

    ``kind`` is one of D_TRANSIENT, D_SMOOTH, D_CUSTOM.  Custom densities carry
    a callable on [0, m_max], their support bounds and an upper bound on the
    density over the support (computed by grid scan when not given).
    """

    kind: str = D_TRANSIENT
    fn: Optional[Callable] = None
    support: tuple = _TRANSIENT_SUPPORT
    sup_bound: float = 2.0 ** -10

    @classmethod
    def transient(cls) -> "InitialMassDensity":
        return cls(kind=D_TRANSIENT, support=_TRANSIENT_SUPPORT, sup_bound=2.0 ** -10)

    @classmethod
    def smooth(cls) -> "InitialMassDensity":
        return cls(kind=D_SMOOTH, support=_SMOOTH_SUPPORT, sup_bound=2.0 ** -10)

    @classmethod
    def custom(cls, fn: Callable, support: tuple, sup_bound: float | None = None) -> "InitialMassDensity":
        lo, hi = float(support[0]), float(support[1])
        if not (0.0 < lo < hi):
            raise ValueError(f"support must satisfy 0 < lo < hi, got {support}")
        if sup_bound is None:
            xs = np.linspace(lo, hi, 4097)
            sup_bound = 1.05 * float(np.max(np.asarray(fn(xs), dtype=float)))
        if sup_bound <= 0.0:
            raise ValueError("density is identically zero on its support")
        return cls(kind=D_CUSTOM, fn=fn, support=(lo, hi), sup_bound=float(sup_bound))

    def evaluate(self, x):
        lo, hi = self.support
        if self.kind == D_CUSTOM:
            xa = np.asarray(x, dtype=float)
            inside = (xa > lo) & (xa < hi)
            out = np.where(inside, np.asarray(self.fn(xa), dtype=float), 0.0)
            return float(out) if np.isscalar(x) else out
        out = _bump(x, lo, hi)
        return float(out) if np.isscalar(x) else out

    def mean(self) -> float:
        """Mean of the normalized density, by quadrature over the support."""
        lo, hi = self.support
        xs = np.linspace(lo, hi, 8193)
        d = self.evaluate(xs)
        total = np.trapezoid(d, xs)
        if total <= 0.0:
            raise ValueError("density is identically zero on its support")
        return float(np.trapezoid(xs * d, xs) / total)


def initial_density_eval(d: InitialMassDensity, x, params: ChemostatParams):
    """Evaluate the (unnormalized) initial density; domain error outside [0, m_max]."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0) or np.any(xa > params.m_max):
        raise ValueError(f"mass must lie in [0, m_max={params.m_max}], got {x}")
    return d.evaluate(x)


def sample_initial_population(n0: int, d: InitialMassDensity, rng: np.random.Generator,
                              params: ChemostatParams) -> np.ndarray:
    """Draw ``n0`` masses from the normalized density by rejection sampling.

    Uses the uniform envelope over the support with height sup_bound.
    """
    if n0 < 0:
        raise ValueError(f"n0 must be >= 0, got {n0}")
    lo, hi = d.support
    if not (0.0 < lo < hi < params.m_max):
        raise ValueError(f"density support {d.support} must lie inside (0, m_max={params.m_max})")
    out = np.empty(n0, dtype=float)
    filled = 0
    attempts = 0
    while filled < n0:
        m = max(n0 - filled, 256)
        xs = rng.uniform(lo, hi, m)
        us = rng.uniform(0.0, d.sup_bound, m)
        acc = xs[us < d.evaluate(xs)]
        take = min(acc.size, n0 - filled)
        out[filled:filled + take] = acc[:take]
        filled += take
        attempts += m
        if attempts > 1000 * (n0 + 256) and filled == 0:
            raise ValueError("rejection sampling failed: density appears to be zero")
    return out


# --------------------------------------------------------------------------
# Growth laws for the population-balance solver
# --------------------------------------------------------------------------

class GompertzGrowth:
    """Default growth law: the Gompertz flux of growth_speed."""

    def __init__(self, params: ChemostatParams):
        self.params = params

    def speed(self, s, x):
        return growth_speed(s, x, self.params)

    def speed_dx(self, s, x):
        return growth_speed_dx(s, x, self.params)

    def max_speed(self) -> float:
        return self.params.r_max * self.params.m_max / math.e


class LinearGrowth:
    """Test-mode law rho(s, x) = mu(s) * x with Monod mu; violates the
    zero-flux-at-m_max hypothesis, used for consistency checks against the
    classic two-ODE chemostat."""

    def __init__(self, mu_max: float, k_s: float, m_max: float):
        self.mu_max = float(mu_max)
        self.k_s = float(k_s)
        self.m_max = float(m_max)

    def mu(self, s):
        return self.mu_max * s / (self.k_s + s)

    def speed(self, s, x):
        return self.mu(s) * np.asarray(x, dtype=float)

    def speed_dx(self, s, x):
        return self.mu(s) * np.ones_like(np.asarray(x, dtype=float))

    def max_speed(self) -> float:
        return self.mu_max * self.m_max
