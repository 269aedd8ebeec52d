"""Twist profiles, cross-sections and pointwise geometric quantities.

Coordinates are (s, t): s runs along the straight base line, t across the
segment (a1, a2). All evaluators broadcast over NumPy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError


class DivergenceClass(str, Enum):
    DIVERGING = "diverging"
    VANISHING = "vanishing"
    BOUNDED = "bounded"
    OTHER = "other"


class SignClass(str, Enum):
    POSITIVE = "positive"      # a1 * a2 > 0: genuine annulus at infinity
    DEGENERATE = "degenerate"  # a1 * a2 <= 0: disk at infinity


@dataclass(frozen=True)
class TwistProfile:
    """Rotation angle theta(s) with analytic derivatives.

    ``d2theta`` and ``d3theta`` may be omitted; quantities that need them
    then raise :class:`ConfigurationError`.
    """
    theta: Callable
    dtheta: Callable
    d2theta: Optional[Callable] = None
    d3theta: Optional[Callable] = None
    divergence_class: DivergenceClass = DivergenceClass.OTHER
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "divergence_class", DivergenceClass(self.divergence_class))

    def rate(self, s):
        return np.asarray(self.dtheta(np.asarray(s, dtype=float)), dtype=float)

    def require(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigurationError(
                f"profile {self.name!r} has no {', '.join(missing)}")

    def check_divergence(self):
        """Finite-sample sanity check of the declared class.

        A diverging profile must have |theta'| strictly increasing along
        |s| = 1e2, 1e3, 1e4 (both signs of s); a vanishing one strictly
        decreasing. Other classes are not checked.
        """
        samples = np.array([1e2, 1e3, 1e4])
        rates = [np.abs(self.rate(samples)), np.abs(self.rate(-samples))]
        if self.divergence_class is DivergenceClass.DIVERGING:
            return all(np.all(np.diff(r) > 0) for r in rates)
        if self.divergence_class is DivergenceClass.VANISHING:
            return all(np.all(np.diff(r) < 0) for r in rates)
        return True


@dataclass(frozen=True)
class CrossSection:
    a1: float
    a2: float

    def __post_init__(self):
        if not (math.isfinite(self.a1) and math.isfinite(self.a2)):
            raise ValueError("cross-section endpoints must be finite")
        if not self.a1 < self.a2:
            raise ValueError(f"cross-section needs a1 < a2, got ({self.a1}, {self.a2})")

    @property
    def width(self):
        return self.a2 - self.a1

    @property
    def sign_class(self):
        return SignClass.POSITIVE if self.a1 * self.a2 > 0 else SignClass.DEGENERATE

    @property
    def r1(self):
        if self.a1 * self.a2 >= 0:
            return min(abs(self.a1), abs(self.a2))
        return 0.0

    @property
    def r2(self):
        return max(abs(self.a1), abs(self.a2))

    @property
    def straddles_zero(self):
        return self.a1 < 0.0 < self.a2


# -- profile library ------------------------------------------------------------

def _sgn(s):
    return np.where(np.asarray(s) >= 0, 1.0, -1.0)


def linear_rate(c=1.0):
    """theta'(s) = c s, i.e. theta = c s^2 / 2."""
    return TwistProfile(
        theta=lambda s: 0.5 * c * np.asarray(s) ** 2,
        dtheta=lambda s: c * np.asarray(s, dtype=float),
        d2theta=lambda s: np.full(np.shape(s), float(c)),
        d3theta=lambda s: np.zeros(np.shape(s)),
        divergence_class=DivergenceClass.DIVERGING if c else DivergenceClass.VANISHING,
        name="linear", params={"c": c})


def quadratic_rate(c=1.0):
    """theta'(s) = c s^2."""
    return TwistProfile(
        theta=lambda s: c * np.asarray(s) ** 3 / 3.0,
        dtheta=lambda s: c * np.asarray(s, dtype=float) ** 2,
        d2theta=lambda s: 2.0 * c * np.asarray(s, dtype=float),
        d3theta=lambda s: np.full(np.shape(s), 2.0 * c),
        divergence_class=DivergenceClass.DIVERGING if c else DivergenceClass.VANISHING,
        name="quadratic", params={"c": c})


def sqrt_rate():
    """theta'(s) = sign(s) sqrt(1 + s^2); theta' jumps at s = 0 (sign(0) := +1).

    theta'' and theta''' are the a.e. derivatives away from 0.
    """
    def theta(s):
        a = np.abs(np.asarray(s, dtype=float))
        return 0.5 * (a * np.sqrt(1.0 + a * a) + np.arcsinh(a))

    return TwistProfile(
        theta=theta,
        dtheta=lambda s: _sgn(s) * np.sqrt(1.0 + np.asarray(s, dtype=float) ** 2),
        d2theta=lambda s: np.abs(s) / np.sqrt(1.0 + np.asarray(s, dtype=float) ** 2),
        d3theta=lambda s: _sgn(s) / (1.0 + np.asarray(s, dtype=float) ** 2) ** 1.5,
        divergence_class=DivergenceClass.DIVERGING,
        name="sqrt", params={})


def constant_rate(c=1.0):
    """theta'(s) = c (uniform twisting); c = 0 is the flat strip."""
    return TwistProfile(
        theta=lambda s: c * np.asarray(s, dtype=float),
        dtheta=lambda s: np.full(np.shape(s), float(c)),
        d2theta=lambda s: np.zeros(np.shape(s)),
        d3theta=lambda s: np.zeros(np.shape(s)),
        divergence_class=DivergenceClass.BOUNDED if c else DivergenceClass.VANISHING,
        name="constant", params={"c": c})


def vanishing_rate():
    """theta'(s) = 1 / (1 + s^2), theta = arctan s."""
    return TwistProfile(
        theta=lambda s: np.arctan(s),
        dtheta=lambda s: 1.0 / (1.0 + np.asarray(s, dtype=float) ** 2),
        d2theta=lambda s: -2.0 * np.asarray(s) / (1.0 + np.asarray(s, dtype=float) ** 2) ** 2,
        d3theta=lambda s: (6.0 * np.asarray(s, dtype=float) ** 2 - 2.0)
        / (1.0 + np.asarray(s, dtype=float) ** 2) ** 3,
        divergence_class=DivergenceClass.VANISHING,
        name="vanishing", params={})


def exponential_rate():
    """theta'(s) = e^s; diverges only as s -> +inf."""
    return TwistProfile(
        theta=lambda s: np.exp(s) - 1.0,
        dtheta=lambda s: np.exp(np.asarray(s, dtype=float)),
        d2theta=lambda s: np.exp(np.asarray(s, dtype=float)),
        d3theta=lambda s: np.exp(np.asarray(s, dtype=float)),
        divergence_class=DivergenceClass.OTHER,
        name="exponential", params={})


PROFILES = {
    "linear": linear_rate,
    "quadratic": quadratic_rate,
    "sqrt": sqrt_rate,
    "constant": constant_rate,
    "vanishing": vanishing_rate,
    "exponential": exponential_rate,
}


def make_profile(name, **params):
    try:
        factory = PROFILES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for profile {name!r}: {exc}") from None


# -- pointwise quantities ---------------------------------------------------------

def jacobian(p, s, t):
    """f(s, t) = sqrt(1 + theta'(s)^2 t^2)."""
    return np.sqrt(1.0 + (p.rate(s) * np.asarray(t, dtype=float)) ** 2)


def jacobian_infinity(p, s, t):
    """Asymptotic Jacobian |theta'(s)| |t|."""
    return np.abs(p.rate(s)) * np.abs(np.asarray(t, dtype=float))


def gauss_curvature(p, s, t):
    k = p.rate(s) ** 2
    return -k / (1.0 + k * np.asarray(t, dtype=float) ** 2) ** 2


def mean_curvature(p, s, t):
    p.require("d2theta")
    t = np.asarray(t, dtype=float)
    k = p.rate(s) ** 2
    return -np.asarray(p.d2theta(np.asarray(s, dtype=float))) * t / (1.0 + k * t * t) ** 1.5


def potential_v1(p, s, t):
    """Derivative part of the potential left by the f^(1/2) ground-state transform.

    The theta''' term carries t^2: with t^3 the expression would not have
    units of inverse length squared, and direct conjugation confirms t^2.
    """
    p.require("d2theta", "d3theta")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    d1 = p.rate(s)
    d2 = np.asarray(p.d2theta(s), dtype=float)
    d3 = np.asarray(p.d3theta(s), dtype=float)
    g = 1.0 + d1 ** 2 * t ** 2
    return (-1.75 * d1 ** 2 * d2 ** 2 * t ** 4 / g ** 3
            + 0.5 * d2 ** 2 * t ** 2 / g ** 2
            + 0.5 * d1 * d3 * t ** 2 / g ** 2)


def potential_v2(p, s, t):
    t = np.asarray(t, dtype=float)
    k = p.rate(s) ** 2
    return k * (2.0 - k * t * t) / (4.0 * (1.0 + k * t * t) ** 2)


@dataclass(frozen=True)
class IntervalMode:
    """Dirichlet mode of -d^2/dt^2 on (a1, a2)."""
    cs: CrossSection
    k: int

    @property
    def eigenvalue(self):
        return (self.k * math.pi / self.cs.width) ** 2

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return math.sqrt(2.0 / self.cs.width) * np.sin(math.sqrt(self.eigenvalue) * (t - self.cs.a1))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        w = math.sqrt(self.eigenvalue)
        return math.sqrt(2.0 / self.cs.width) * w * np.cos(w * (t - self.cs.a1))


def interval_mode(cs, k):
    """(E_k, chi_k) for the cross-section interval."""
    if int(k) != k or k < 1:
        raise ValueError("mode index must be a positive integer")
    mode = IntervalMode(cs, int(k))
    return mode.eigenvalue, mode


@dataclass
class ExtraDivergenceReport:
    s: np.ndarray
    second_ratio: np.ndarray   # theta'' / theta'^2
    third_ratio: np.ndarray    # theta''' / theta'^3
    undefined: np.ndarray      # theta'(s) == 0 at this sample
    threshold: float
    decreasing: bool
    below_threshold: bool


def diverging_extra_check(p, s_samples, threshold=1e-2):
    """Evaluate theta''/theta'^2 and theta'''/theta'^3 along ``s_samples``.

    Samples where theta' vanishes are flagged and reported as NaN. The
    report says whether |ratios| are nonincreasing along the samples (in
    the order given) and whether they end below ``threshold``.
    """
    p.require("d2theta", "d3theta")
    s = np.asarray(s_samples, dtype=float)
    d1 = p.rate(s)
    undefined = d1 == 0.0
    safe = np.where(undefined, 1.0, d1)
    r2 = np.where(undefined, np.nan, np.asarray(p.d2theta(s)) / safe ** 2)
    r3 = np.where(undefined, np.nan, np.asarray(p.d3theta(s)) / safe ** 3)
    ok = ~undefined
    a2, a3 = np.abs(r2[ok]), np.abs(r3[ok])
    decreasing = bool(np.all(np.diff(a2) <= 0) and np.all(np.diff(a3) <= 0))
    below = bool(a2.size and a2[-1] < threshold and a3[-1] < threshold)
    return ExtraDivergenceReport(s, r2, r3, undefined, threshold, decreasing, below)
