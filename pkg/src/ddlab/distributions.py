"""Amplitude distribution families used for multipath fading coefficients.

Four classical families are supported: Rician(s, sigma), Rayleigh(b),
Nakagami(mu, omega), and Weibull(a, b).  All parameters are dimensionless
amplitude scales except the shape parameters (Nakagami mu, Weibull b).
Conventions:

* Rician: amplitude of ``s + CN(0, 2 sigma^2)``, so ``E[X^2] = s^2 + 2 sigma^2``.
* Rayleigh: ``E[X^2] = 2 b^2`` (Rician with s = 0 and sigma = b).
* Nakagami: ``X^2 ~ Gamma(mu, omega/mu)``, so ``E[X^2] = omega``.
* Weibull: scale a, shape b, ``E[X^2] = a^2 Gamma(1 + 2/b)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ParameterDomainError

__all__ = [
    "Family",
    "DistributionSpec",
    "rician",
    "rayleigh",
    "nakagami",
    "weibull",
    "pdf",
    "cdf",
    "ppf",
    "log_pdf",
    "sample",
    "mean",
    "second_moment",
    "scaled",
]


class Family(str, enum.Enum):
    RICIAN = "rician"
    RAYLEIGH = "rayleigh"
    NAKAGAMI = "nakagami"
    WEIBULL = "weibull"


_PARAM_COUNT = {
    Family.RICIAN: 2,
    Family.RAYLEIGH: 1,
    Family.NAKAGAMI: 2,
    Family.WEIBULL: 2,
}

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class DistributionSpec:
    """One amplitude distribution: a family plus its ordered parameters."""

    family: Family
    params: tuple[float, ...]

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if len(params) != _PARAM_COUNT[fam]:
            raise ParameterDomainError(
                f"{fam.value} takes {_PARAM_COUNT[fam]} parameters, got {len(params)}"
            )
        if not all(math.isfinite(p) for p in params):
            raise ParameterDomainError(f"non-finite parameters {params}")
        if fam is Family.RICIAN:
            s, sigma = params
            if s < 0 or sigma <= _TINY:
                raise ParameterDomainError(f"rician requires s >= 0 and sigma > 0, got {params}")
        elif fam is Family.RAYLEIGH:
            if params[0] <= _TINY:
                raise ParameterDomainError(f"rayleigh requires b > 0, got {params}")
        elif fam is Family.NAKAGAMI:
            mu, omega = params
            # measured channels can fit mu < 0.5; reject only non-positive values
            if mu <= _TINY or omega <= _TINY:
                raise ParameterDomainError(f"nakagami requires mu > 0 and omega > 0, got {params}")
        elif fam is Family.WEIBULL:
            a, b = params
            if a <= _TINY or b <= _TINY:
                raise ParameterDomainError(f"weibull requires a > 0 and b > 0, got {params}")


def rician(s: float, sigma: float) -> DistributionSpec:
    return DistributionSpec(Family.RICIAN, (s, sigma))


def rayleigh(b: float) -> DistributionSpec:
    return DistributionSpec(Family.RAYLEIGH, (b,))


def nakagami(mu: float, omega: float) -> DistributionSpec:
    return DistributionSpec(Family.NAKAGAMI, (mu, omega))


def weibull(a: float, b: float) -> DistributionSpec:
    return DistributionSpec(Family.WEIBULL, (a, b))


def _as_nonneg_array(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ParameterDomainError("amplitudes must be >= 0")
    return x


def pdf(spec: DistributionSpec, x) -> np.ndarray:
    """Probability density of the amplitude at x (elementwise)."""
    x = _as_nonneg_array(x)
    fam, p = spec.family, spec.params
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam is Family.RICIAN:
            s, sig = p
            z = x * s / sig**2
            # i0e keeps the Bessel factor bounded; exponent collapses to -(x-s)^2/(2 sig^2)
            out = (x / sig**2) * special.i0e(z) * np.exp(-((x - s) ** 2) / (2 * sig**2))
        elif fam is Family.RAYLEIGH:
            b = p[0]
            out = (x / b**2) * np.exp(-(x**2) / (2 * b**2))
        elif fam is Family.NAKAGAMI:
            mu, w = p
            logf = (
                math.log(2.0)
                + mu * math.log(mu / w)
                - special.gammaln(mu)
                + (2 * mu - 1) * np.log(np.where(x > 0, x, 1.0))
                - mu * x**2 / w
            )
            out = np.where(x > 0, np.exp(logf), 0.0 if 2 * mu - 1 > 0 else np.inf)
        else:
            a, b = p
            t = x / a
            logf = math.log(b / a) + (b - 1) * np.log(np.where(t > 0, t, 1.0)) - t**b
            if b >= 1:
                out = np.where(t > 0, np.exp(logf), (b / a if b == 1 else 0.0))
            else:
                out = np.where(t > 0, np.exp(logf), np.inf)
    return out


def log_pdf(spec: DistributionSpec, x) -> np.ndarray:
    """Log density; x must be strictly positive."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ParameterDomainError("log_pdf requires x > 0")
    fam, p = spec.family, spec.params
    if fam is Family.RICIAN:
        s, sig = p
        z = x * s / sig**2
        return np.log(x / sig**2) + np.log(special.i0e(z)) + z - (x**2 + s**2) / (2 * sig**2)
    if fam is Family.RAYLEIGH:
        b = p[0]
        return np.log(x) - 2 * math.log(b) - x**2 / (2 * b**2)
    if fam is Family.NAKAGAMI:
        mu, w = p
        return (
            math.log(2.0)
            + mu * math.log(mu / w)
            - special.gammaln(mu)
            + (2 * mu - 1) * np.log(x)
            - mu * x**2 / w
        )
    a, b = p
    return math.log(b / a) + (b - 1) * np.log(x / a) - (x / a) ** b


def cdf(spec: DistributionSpec, x) -> np.ndarray:
    """Cumulative distribution of the amplitude at x (elementwise)."""
    x = _as_nonneg_array(x)
    fam, p = spec.family, spec.params
    if fam is Family.RICIAN:
        s, sig = p
        # amplitude^2 / sigma^2 is noncentral chi-square with 2 dof
        return special.chndtr((x / sig) ** 2, 2, (s / sig) ** 2)
    if fam is Family.RAYLEIGH:
        b = p[0]
        return -np.expm1(-(x**2) / (2 * b**2))
    if fam is Family.NAKAGAMI:
        mu, w = p
        return special.gammainc(mu, mu * x**2 / w)
    a, b = p
    return -np.expm1(-((x / a) ** b))


def ppf(spec: DistributionSpec, q) -> np.ndarray:
    """Quantile function (inverse CDF) for q in [0, 1)."""
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q >= 1)):
        raise ParameterDomainError("quantile levels must lie in [0, 1)")
    fam, p = spec.family, spec.params
    if fam is Family.RICIAN:
        s, sig = p
        return sig * np.sqrt(special.chndtrix(q, 2, (s / sig) ** 2))
    if fam is Family.RAYLEIGH:
        b = p[0]
        return b * np.sqrt(-2.0 * np.log1p(-q))
    if fam is Family.NAKAGAMI:
        mu, w = p
        return np.sqrt((w / mu) * special.gammaincinv(mu, q))
    a, b = p
    return a * (-np.log1p(-q)) ** (1.0 / b)


def sample(spec: DistributionSpec, rng: np.random.Generator, size=None) -> np.ndarray | float:
    """Draw amplitudes from the family (nonnegative reals)."""
    fam, p = spec.family, spec.params
    if fam is Family.RICIAN:
        s, sig = p
        re = s + sig * rng.standard_normal(size)
        im = sig * rng.standard_normal(size)
        return np.hypot(re, im)
    if fam is Family.RAYLEIGH:
        return rng.rayleigh(p[0], size)
    if fam is Family.NAKAGAMI:
        mu, w = p
        return np.sqrt(rng.gamma(mu, w / mu, size))
    a, b = p
    return a * rng.weibull(b, size)


def mean(spec: DistributionSpec) -> float:
    """Analytic mean amplitude."""
    fam, p = spec.family, spec.params
    if fam is Family.RICIAN:
        s, sig = p
        k = s**2 / (2 * sig**2)
        # sigma*sqrt(pi/2)*L_{1/2}(-k); the scaled Bessels absorb exp(-k/2)
        lag = (1 + k) * special.i0e(k / 2) + k * special.i1e(k / 2)
        return float(sig * math.sqrt(math.pi / 2) * lag)
    if fam is Family.RAYLEIGH:
        return float(p[0] * math.sqrt(math.pi / 2))
    if fam is Family.NAKAGAMI:
        mu, w = p
        return float(math.exp(special.gammaln(mu + 0.5) - special.gammaln(mu)) * math.sqrt(w / mu))
    a, b = p
    return float(a * math.exp(special.gammaln(1 + 1.0 / b)))


def second_moment(spec: DistributionSpec) -> float:
    """Analytic E[X^2]; the expected power carried by the amplitude."""
    fam, p = spec.family, spec.params
    if fam is Family.RICIAN:
        s, sig = p
        return float(s**2 + 2 * sig**2)
    if fam is Family.RAYLEIGH:
        return float(2 * p[0] ** 2)
    if fam is Family.NAKAGAMI:
        return float(p[1])
    a, b = p
    return float(a**2 * math.exp(special.gammaln(1 + 2.0 / b)))


def scaled(spec: DistributionSpec, c: float) -> DistributionSpec:
    """Spec for c*X: multiplies amplitude scales by c (Nakagami omega by c^2)."""
    if c <= 0:
        raise ParameterDomainError("scale factor must be positive")
    fam, p = spec.family, spec.params
    if fam is Family.RICIAN:
        return DistributionSpec(fam, (p[0] * c, p[1] * c))
    if fam is Family.RAYLEIGH:
        return DistributionSpec(fam, (p[0] * c,))
    if fam is Family.NAKAGAMI:
        return DistributionSpec(fam, (p[0], p[1] * c**2))
    return DistributionSpec(fam, (p[0] * c, p[1]))
