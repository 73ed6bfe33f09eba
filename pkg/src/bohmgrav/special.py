"""Building-block special functions for the windowed-source phase integrals.

All lengths are measured in units of the Gaussian packet width, which is
fixed to 1 throughout the package (a packet centered at u has density
proportional to exp(-(x-u)^2)).

The three model functions are

    J_R(xi) = (2/sqrt(pi)) * int_0^R r e^{-r^2} / sqrt(r^2 + xi^2) dr
            = e^{xi^2} [erf(sqrt(R^2 + xi^2)) - erf(|xi|)]

    Q(p, q) = (e^{-p^2} + e^{-q^2}) / (1 + e^{-dx^2/4})
              + 2 e^{-((p+q)/2)^2} / (1 + e^{+dx^2/4})

    N(R)    = (1 - e^{-R^2}) * [ (erf(R + dx/2) + erf(R - dx/2))
                                   / (2 (1 + e^{+dx^2/4}))
                               + (erf(R + dx) + erf(R - dx) + 2 erf(R))
                                   / (4 (1 + e^{-dx^2/4})) ]

with dx the spin splitting of the interferometer geometry.  The naive form
of J_R overflows already for |xi| around 6; everything here is routed
through the scaled complementary error function erfcx(x) = e^{x^2} erfc(x),
which is implemented in-module so that every asymptotic-regime expression
shares one audited kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

SQRT_PI = math.sqrt(math.pi)

# erfcx evaluation switches from the Maclaurin-type series to the Laplace
# continued fraction here; both sides are good to ~1e-13 relative at the seam.
_ERFCX_CF_SWITCH = 2.0
_EXP_OVERFLOW = 709.0


@dataclass(frozen=True)
class PacketGeometry:
    """Interferometer geometry in packet-width units.

    delta_x_big is the separation of the two arm centers, delta_x_small the
    spin splitting of each arm.  delta_x_big must exceed delta_x_small so
    that all four trajectory combinations keep a nonzero distance (the
    point-source limit diverges otherwise).
    """

    delta_x_big: float
    delta_x_small: float

    def __post_init__(self):
        problems = []
        if not (self.delta_x_small >= 0.0):
            problems.append("delta_x_small must be >= 0")
        if not (self.delta_x_big - self.delta_x_small > 0.0):
            problems.append("delta_x_big - delta_x_small must be > 0")
        if problems:
            raise ConfigError(problems)

    def u1(self, s: int) -> float:
        """Arm center of particle 1 for spin eigenvalue s = +-1."""
        return +self.delta_x_big / 2 + s * self.delta_x_small / 2

    def u2(self, s: int) -> float:
        """Arm center of particle 2 for spin eigenvalue s = +-1."""
        return -self.delta_x_big / 2 + s * self.delta_x_small / 2

    def delta_u(self, s1: int, s2: int) -> float:
        """Separation u1(s1) - u2(s2) of a branch pair."""
        return self.delta_x_big + (s1 - s2) * self.delta_x_small / 2


def _erfcx_series(x: float) -> float:
    # erfcx = e^{x^2} - (2x/sqrt(pi)) * sum_n (2x^2)^n / (2n+1)!!
    # All series terms are positive, so the only cancellation is the final
    # subtraction (mild for x < 2).
    x2 = 2.0 * x * x
    term = 1.0
    acc = 1.0
    n = 0
    while True:
        n += 1
        term *= x2 / (2 * n + 1)
        acc += term
        if term < 1e-18 * acc:
            break
        if n > 200:  # unreachable for x < 2
            break
    return math.exp(x * x) - (2.0 * x / SQRT_PI) * acc


def _erfcx_cf(x: float) -> float:
    # Laplace continued fraction erfcx(x) = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + ...)))
    # evaluated with the modified Lentz algorithm.
    tiny = 1e-300
    f = x if x != 0.0 else tiny
    c = f
    d = 0.0
    n = 0
    while n < 400:
        n += 1
        a = 0.5 * n
        d = x + a * d
        if d == 0.0:
            d = tiny
        c = x + a / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    return 1.0 / (SQRT_PI * f)


def erfcx(x: float) -> float:
    """Scaled complementary error function e^{x^2} erfc(x).

    Stable for large positive x (no overflow until well past x = 1e150);
    for x below about -26.6 the exact value overflows and +inf is returned.
    """
    x = float(x)
    if x < 0.0:
        if x * x > _EXP_OVERFLOW:
            return math.inf
        return 2.0 * math.exp(x * x) - erfcx(-x)
    if x >= _ERFCX_CF_SWITCH:
        return _erfcx_cf(x)
    return _erfcx_series(x)


def j_r(R: float, xi: float) -> float:
    """Windowed radial source integral J_R(xi).

    Uses the cancellation-free form
        erfcx(|xi|) - e^{-R^2} erfcx(sqrt(R^2 + xi^2)),
    equal to e^{xi^2} [erf(sqrt(R^2 + xi^2)) - erf(|xi|)] but representable
    for any xi.  Even in xi, strictly increasing in R, in (0, 1] for R > 0.
    """
    if R < 0.0:
        raise ValueError("window radius R must be >= 0")
    a = abs(xi)
    r2 = R * R
    damp = math.exp(-r2) if r2 < _EXP_OVERFLOW else 0.0
    return erfcx(a) - damp * erfcx(math.hypot(R, xi))


def q_func(p: float, q: float, geom: PacketGeometry) -> float:
    """Two-packet transverse density profile Q(p, q) for the given splitting."""
    d2 = geom.delta_x_small ** 2
    direct = (math.exp(-p * p) + math.exp(-q * q)) / (1.0 + math.exp(-d2 / 4.0))
    cross = 2.0 * math.exp(-((p + q) / 2.0) ** 2) / (1.0 + math.exp(d2 / 4.0))
    return direct + cross


def n_norm(R: float, geom: PacketGeometry) -> float:
    """Source normalization N(R): the windowed fraction of a two-packet density.

    N(0) = 0, N is nondecreasing, and N -> 1 as the window covers the
    whole packet pair.
    """
    if R < 0.0:
        raise ValueError("window radius R must be >= 0")
    d = geom.delta_x_small
    d2 = d * d
    axial = (math.erf(R + d / 2.0) + math.erf(R - d / 2.0)) / (
        2.0 * (1.0 + math.exp(d2 / 4.0))
    )
    axial += (math.erf(R + d) + math.erf(R - d) + 2.0 * math.erf(R)) / (
        4.0 * (1.0 + math.exp(-d2 / 4.0))
    )
    return (1.0 - math.exp(-R * R)) * axial
