"""Spin-branch phases of the windowed-source gravitational model.

Two particles, each split into spin-dependent arms at
u1(s) = +dx_big/2 + s dx_small/2 and u2(s) = -dx_big/2 + s dx_small/2,
accumulate a phase per spin branch (s1, s2):

    phi^{s1 s2} = Gamma/(2 N(R)) * int_{-R}^{R} [ Q(x + u1(s1) - u1(+), x + u1(s1) - u1(-))
                                                + Q(x - u2(s2) + u2(+), x - u2(s2) + u2(-)) ]
                                  * J_R(x + du^{s1 s2}) dx   +  phi_gamma^{s1 s2}

with du^{s1 s2} = u1(s1) - u2(s2), Gamma the coupling length, and
phi_gamma the contribution of the trajectory-only potential term.
The equal-spin branches carry the same (global) phase Phi_R; the physics
sits in the relative phases

    phi^+   = phi^{+-} - Phi_R,      phi^-   = phi^{-+} - Phi_R,
    phi^Sig = (phi^+ + phi^-)/2,     phi^Del = (phi^+ - phi^-)/2.

Three evaluation routes are provided and cross-validated by the test
suite: adaptive quadrature (any R), a small-R series (R << 1, exact at
R = 0), and large-R asymptotics (R well beyond the arm separations).

Numerical notes.  phi^Sig decays like e^{-R^2} while the branch phases
stay O(Gamma), so assembling it from branch differences is hopeless
beyond R of about 3.  Instead it is computed from the identity

    int_{-R}^{R} q(x) B_R(x) dx = - int_{R}^{inf} [q(x) B_R(x) + q(-x) B_R(-x)] dx

(q(x) = Q(x, x + dx_small), B_R the phase-average bracket), whose
right-hand side is an exact consequence of J_R being even and q being
symmetric about -dx_small/2 and is free of cancellation.  The large-R
closed form expands that tail in Gaussian half-line moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from scipy.integrate import quad

from .errors import ConfigError, PhaseConsistencyError, QuadratureError
from .special import SQRT_PI, PacketGeometry, erfcx, j_r, n_norm, q_func

# Regime-routing thresholds and quadrature budget (configuration constants).
SMALL_R_MAX = 0.005
LARGE_R_MIN = 6.0
SIGMA_TAIL_SWITCH = 3.0        # phase-average quadrature: interior vs tail form
QUAD_EPSABS_SCALE = 1e-10      # absolute tolerance = scale * max(Gamma, tiny)
QUAD_EPSREL = 1e-11
QUAD_LIMIT = 2 ** 15
BRANCH_MATCH_TOL = 1e-8        # |phi^{++} - phi^{--}| <= tol * max(1, Gamma)


@dataclass(frozen=True)
class CouplingConfig:
    """Single coupling constant of the model, a length in packet-width units."""

    gamma_big: float

    def __post_init__(self):
        if not (self.gamma_big >= 0.0):
            raise ConfigError("gamma_big must be >= 0")


@dataclass(frozen=True)
class PhaseSet:
    """The five derived phases of one (R, Gamma, geometry) configuration."""

    global_phase: float
    phi_plus: float
    phi_minus: float
    phi_sigma: float
    phi_delta: float

    def __post_init__(self):
        for name in ("global_phase", "phi_plus", "phi_minus", "phi_sigma", "phi_delta"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} is not finite")

    @classmethod
    def from_plus_minus(cls, global_phase: float, plus: float, minus: float) -> "PhaseSet":
        return cls(global_phase, plus, minus, (plus + minus) / 2.0, (plus - minus) / 2.0)

    @classmethod
    def from_sigma_delta(cls, global_phase: float, sigma: float, delta: float) -> "PhaseSet":
        return cls(global_phase, sigma + delta, sigma - delta, sigma, delta)


class GammaModel:
    """Trajectory-only potential term, expressed as a phase-level function g.

    g(xi) is the accumulated phase of the term for a branch pair at
    separation xi, so the relative contributions are
    phi_gamma^{+-} = g(dx_big) - g(dx_big +- dx_small).
    """

    def __init__(self, kind: str, fn: Optional[Callable[[float], float]] = None):
        if kind not in ("zero", "point_newtonian", "smoothed_newtonian", "custom"):
            raise ConfigError(f"unknown gamma model '{kind}'")
        if kind == "custom" and fn is None:
            raise ConfigError("custom gamma model needs a callable")
        self.kind = kind
        self.fn = fn

    @classmethod
    def zero(cls) -> "GammaModel":
        return cls("zero")

    @classmethod
    def point_newtonian(cls) -> "GammaModel":
        return cls("point_newtonian")

    @classmethod
    def smoothed_newtonian(cls) -> "GammaModel":
        return cls("smoothed_newtonian")

    @classmethod
    def custom(cls, fn: Callable[[float], float]) -> "GammaModel":
        return cls("custom", fn)

    @property
    def linear_in_coupling(self) -> bool:
        return self.kind != "custom"

    def phase_level(self, xi: float, R: float, geom: PacketGeometry,
                    coupling: CouplingConfig, method: str = "quad") -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "point_newtonian":
            return coupling.gamma_big / abs(xi)
        if self.kind == "custom":
            return float(self.fn(xi))
        # smoothed_newtonian: the windowed-source self-consistent choice,
        # g(xi) = I_R(xi); it reduces to Gamma/|xi| at R = 0.
        if method == "series" or R == 0.0:
            return _i_r_series(xi, R, geom, coupling.gamma_big)
        return _i_r_quad(xi, R, geom, coupling.gamma_big)

    def branch_offsets(self, R: float, geom: PacketGeometry, coupling: CouplingConfig,
                       method: str = "quad") -> dict:
        """Phase offsets per branch: -g(|du^{s1 s2}|)."""
        out = {}
        for s1 in (+1, -1):
            for s2 in (+1, -1):
                out[(s1, s2)] = -self.phase_level(abs(geom.delta_u(s1, s2)), R, geom,
                                                  coupling, method)
        return out

    def plus_minus_offsets(self, R: float, geom: PacketGeometry, coupling: CouplingConfig,
                           method: str = "quad") -> tuple:
        """(phi_gamma^+, phi_gamma^-) = g(dx_big) - g(dx_big +- dx_small)."""
        if self.kind == "zero":
            return 0.0, 0.0
        gl = self.phase_level(geom.delta_x_big, R, geom, coupling, method)
        gp = self.phase_level(geom.delta_x_big + geom.delta_x_small, R, geom, coupling, method)
        gm = self.phase_level(geom.delta_x_big - geom.delta_x_small, R, geom, coupling, method)
        return gl - gp, gl - gm


def adaptive_quad(f, a, b, epsabs, epsrel=QUAD_EPSREL, points=None, limit=QUAD_LIMIT):
    """Adaptive quadrature with a hard error contract.

    Raises QuadratureError carrying the achieved error estimate when the
    routine cannot certify abs error <= epsabs or rel error <= epsrel.
    `points` marks interior break points (integrand corners).
    """
    if points is not None:
        pts = sorted(p for p in points if a < p < b)
        if not pts or not (math.isfinite(a) and math.isfinite(b)):
            pts = None
    else:
        pts = None
    out = quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit,
               points=pts, full_output=True)
    value, abserr = out[0], out[1]
    ier_ok = len(out) < 4  # quad appends a message (and more) on trouble
    if not ier_ok and abserr > max(epsabs, abs(value) * epsrel) * 10.0:
        raise QuadratureError(
            f"quadrature did not converge (requested {epsabs:.3e} abs)",
            achieved_error=abserr, value=value)
    return value, abserr


def _q_of(geom: PacketGeometry):
    d = geom.delta_x_small
    return lambda x: q_func(x, x + d, geom)


def _kinks(geom: PacketGeometry, shifts):
    """Integrand corner locations: J_R's argument has a cusp at zero."""
    return [-s for s in shifts]


def branch_phase(s1: int, s2: int, R: float, geom: PacketGeometry,
                 coupling: CouplingConfig, gamma: GammaModel) -> float:
    """Phase of spin branch (s1, s2) by adaptive quadrature; R > 0."""
    if s1 not in (+1, -1) or s2 not in (+1, -1):
        raise ValueError("spin labels must be +1 or -1")
    if not (R > 0.0):
        raise ValueError("branch_phase needs R > 0; use small_r_phases at R = 0")
    gam = coupling.gamma_big
    offset = gamma.branch_offsets(R, geom, coupling)[(s1, s2)]
    if gam == 0.0:
        return offset
    du = geom.delta_u(s1, s2)
    u1s, u2s = geom.u1(s1), geom.u2(s2)
    u1p, u1m = geom.u1(+1), geom.u1(-1)
    u2p, u2m = geom.u2(+1), geom.u2(-1)

    def f(x):
        t1 = q_func(x + u1s - u1p, x + u1s - u1m, geom)
        t2 = q_func(x - u2s + u2p, x - u2s + u2m, geom)
        return (t1 + t2) * j_r(R, x + du)

    epsabs = QUAD_EPSABS_SCALE * gam
    value, _ = adaptive_quad(f, -R, R, epsabs=epsabs, points=[-du])
    return gam / (2.0 * n_norm(R, geom)) * value + offset


def phi_sigma_direct(R: float, geom: PacketGeometry, coupling: CouplingConfig) -> float:
    """Interaction part of the phase average by stable quadrature.

    Audit route, valid at every R > 0.  For R beyond the tail switch the
    interior integral is rewritten as a tail integral (see module
    docstring); both forms are the same integral.
    """
    if not (R > 0.0):
        raise ValueError("needs R > 0")
    gam = coupling.gamma_big
    if gam == 0.0:
        return 0.0
    D, d = geom.delta_x_big, geom.delta_x_small
    q = _q_of(geom)

    def bracket(x):
        return (j_r(R, x + D + d) + j_r(R, x - D + d)
                - j_r(R, x + D) - j_r(R, x - D))

    nr = n_norm(R, geom)
    if R <= SIGMA_TAIL_SWITCH:
        value, _ = adaptive_quad(lambda x: q(x) * bracket(x), -R, R,
                                 epsabs=1e-13 * gam,
                                 points=_kinks(geom, [D + d, -D + d, D, -D]))
        return gam / (2.0 * nr) * value
    value, _ = adaptive_quad(lambda x: q(x) * bracket(x) + q(-x) * bracket(-x),
                             R, math.inf, epsabs=0.0, epsrel=1e-10)
    return -gam / (2.0 * nr) * value


def phase_set(R: float, geom: PacketGeometry, coupling: CouplingConfig,
              gamma: GammaModel) -> PhaseSet:
    """All five phases at one R by quadrature.

    The two equal-spin branches are computed independently and compared
    (they must agree; disagreement flags a broken integrand).  The phase
    average is taken from the cancellation-free quadrature so it stays
    meaningful where the branch difference would be pure roundoff.
    """
    pp = branch_phase(+1, +1, R, geom, coupling, gamma)
    mm = branch_phase(-1, -1, R, geom, coupling, gamma)
    gam = coupling.gamma_big
    if abs(pp - mm) > BRANCH_MATCH_TOL * max(1.0, gam):
        raise PhaseConsistencyError(
            f"equal-spin branch phases disagree: {pp!r} vs {mm!r}")
    pm = branch_phase(+1, -1, R, geom, coupling, gamma)
    mp = branch_phase(-1, +1, R, geom, coupling, gamma)
    global_phase = 0.5 * (pp + mm)
    delta = 0.5 * (pm - mp)
    gplus, gminus = gamma.plus_minus_offsets(R, geom, coupling)
    sigma = phi_sigma_direct(R, geom, coupling) + 0.5 * (gplus + gminus)
    return PhaseSet.from_sigma_delta(global_phase, sigma, delta)


# ---------------------------------------------------------------------------
# small-R series
# ---------------------------------------------------------------------------

def _i_r_series(xi: float, R: float, geom: PacketGeometry, gam: float) -> float:
    # I_R(xi) ~ (Gamma/|xi|) [1 + R^2/(12 xi^2) (1 + 8 xi dx / (1 + e^{dx^2/2}))]
    d = geom.delta_x_small
    corr = 1.0 + (R * R / (12.0 * xi * xi)) * (
        1.0 + 8.0 * xi * d / (1.0 + math.exp(d * d / 2.0)))
    return gam / abs(xi) * corr


def _i_r_quad(xi: float, R: float, geom: PacketGeometry, gam: float) -> float:
    q = _q_of(geom)
    value, _ = adaptive_quad(lambda x: q(x) * j_r(R, x + xi), -R, R,
                             epsabs=QUAD_EPSABS_SCALE * max(gam, 1.0),
                             points=[-xi])
    return gam / (2.0 * n_norm(R, geom)) * value


def small_r_phases(R: float, geom: PacketGeometry, coupling: CouplingConfig,
                   gamma: GammaModel) -> PhaseSet:
    """Series phases for R << 1; exact point-source values at R = 0.

    Validity degrades as O(R^4).  The smoothed gamma model is evaluated
    with the same series so the whole set is consistent at this order.
    """
    if R < 0.0:
        raise ValueError("R must be >= 0")
    gam = coupling.gamma_big
    D = geom.delta_x_big
    d = geom.delta_x_small

    def i_r(xi):
        return _i_r_series(xi, R, geom, gam)

    base = i_r(D) + i_r(-D)
    gplus, gminus = gamma.plus_minus_offsets(R, geom, coupling, method="series")
    plus = 2.0 * i_r(d + D) - base + gplus
    minus = (2.0 * i_r(d - D) - base + gminus) if d != D else 0.0
    if d == 0.0:
        plus = gplus
        minus = gminus
    gpp = gamma.branch_offsets(R, geom, coupling, method="series")[(+1, +1)]
    return PhaseSet.from_plus_minus(base + gpp, plus, minus)


# ---------------------------------------------------------------------------
# large-R asymptotics
# ---------------------------------------------------------------------------

_ERFCX_SERIES_COEFF = (1.0, -0.5, 0.75)   # erfcx(y) ~ (1/sqrt(pi)) sum c_m y^{-(2m+1)}


def _gauss_components(d: float):
    """Centers and weights of the three Gaussians composing q(x)."""
    wa = 1.0 / (1.0 + math.exp(-d * d / 4.0))
    wb = 2.0 / (1.0 + math.exp(d * d / 4.0))
    return ((0.0, wa), (-d, wa), (-d / 2.0, wb))


def _half_moments(rho: float, K: int):
    """m_k = e^{rho^2} int_rho^inf e^{-u^2} (u - rho)^k du, k = 0..K."""
    m = [0.0] * (K + 1)
    m[0] = 0.5 * SQRT_PI * erfcx(rho)
    if K >= 1:
        m[1] = 0.5 - rho * m[0]
    for k in range(1, K):
        m[k + 1] = 0.5 * k * m[k - 1] - rho * m[k]
    return m


def _gauss_tail_erfcx(R: float, a: float, beta: float, K: int = 8) -> float:
    """Asymptotics of int_R^inf e^{-(x-a)^2} erfcx(x + beta) dx.

    Requires R + beta > 0 comfortably; accuracy O((R + beta)^{-7}).
    """
    rho = R - a
    g = a + beta
    base = rho + g  # = R + beta
    if base <= 0.5:
        raise ValueError("argument leaves the asymptotic domain")
    m = _half_moments(rho, K)
    acc = 0.0
    for mi, c in enumerate(_ERFCX_SERIES_COEFF):
        n = 2 * mi + 1
        coeff = c / SQRT_PI
        binom = 1.0
        for k in range(K + 1):
            if k > 0:
                binom *= -(n + k - 1) / k
            acc += coeff * binom * base ** (-(n + k)) * m[k]
    return math.exp(-rho * rho) * acc


def _tail_bracket(R: float, geom: PacketGeometry, which: str) -> float:
    """Tail integral int_R^inf of the phase-average or phase-difference bracket."""
    D, d = geom.delta_x_big, geom.delta_x_small
    comps_x = _gauss_components(d)
    comps_mx = tuple((-a, w) for a, w in comps_x)
    if which == "sigma":
        betas_x = ((D + d, 0.5), (-D + d, 0.5), (D, -0.5), (-D, -0.5))
        betas_mx = ((-D - d, 0.5), (D - d, 0.5), (-D, -0.5), (D, -0.5))
    elif which == "delta":
        betas_x = ((D + d, 0.5), (-D + d, -0.5))
        betas_mx = ((-D - d, 0.5), (D - d, -0.5))
    else:
        raise ValueError(which)
    total = 0.0
    for (a, w) in comps_x:
        for (b, cf) in betas_x:
            total += w * cf * _gauss_tail_erfcx(R, a, b)
    for (a, w) in comps_mx:
        for (b, cf) in betas_mx:
            total += w * cf * _gauss_tail_erfcx(R, a, b)
    return total


def _w_delta_moments(R: float, geom: PacketGeometry) -> float:
    """Antisymmetric window-deficit integral by Gaussian-moment expansion.

    int q(x) (1/2)[F(x + D + d) - F(x - D + d)] dx with
    F(xi) = erfcx(sqrt(R^2 + xi^2)), expanded in moments/R^2.
    """
    D, d = geom.delta_x_big, geom.delta_x_small
    total = 0.0
    for (c, coeff) in ((D + d, 0.5), (-D + d, -0.5)):
        for mi, cm in enumerate(_ERFCX_SERIES_COEFF):
            p = 2 * mi + 1
            val = 0.0
            for (mu, w) in _gauss_components(d):
                mc = mu + c
                e2 = mc * mc + 0.5
                e4 = mc ** 4 + 3.0 * mc * mc + 0.75
                e6 = mc ** 6 + 7.5 * mc ** 4 + 11.25 * mc * mc + 1.875
                ph = p / 2.0
                series = (1.0 - ph * e2 / R ** 2
                          + ph * (ph + 1.0) / 2.0 * e4 / R ** 4
                          - ph * (ph + 1.0) * (ph + 2.0) / 6.0 * e6 / R ** 6)
                val += w * SQRT_PI * series * R ** (-p)
            total += coeff * cm / SQRT_PI * val
    return total


def phi_infinity(geom: PacketGeometry, coupling: CouplingConfig) -> tuple:
    """Unwindowed (mean-field limit) relative phases by whole-line quadrature."""
    gam = coupling.gamma_big
    if gam == 0.0:
        return 0.0, 0.0
    D, d = geom.delta_x_big, geom.delta_x_small
    q = _q_of(geom)

    def h(x, sign):
        return q(x) * (erfcx(abs(x + sign * D + d))
                       - 0.5 * (erfcx(abs(x + D)) + erfcx(abs(x - D))))

    epsabs = QUAD_EPSABS_SCALE * gam
    # split at the corner points; quad cannot take `points` with infinite
    # bounds, so integrate the pieces separately
    out = []
    for sign in (+1, -1):
        cuts = sorted({-sign * D - d, -D, D})
        pieces = [(-math.inf, cuts[0])] + list(zip(cuts[:-1], cuts[1:])) + [(cuts[-1], math.inf)]
        total = 0.0
        for (lo, hi) in pieces:
            v, _ = adaptive_quad(lambda x: h(x, sign), lo, hi, epsabs=epsabs / 4.0)
            total += v
        out.append(gam * total)
    return out[0], out[1]


def large_r_phases(R: float, geom: PacketGeometry, coupling: CouplingConfig) -> PhaseSet:
    """Asymptotic phases for R well beyond the arm separations.

    The trajectory-only term is taken to vanish in this regime.  The phase
    average here follows the corrected tail asymptotics: it decays like
    dx * e^{-R^2} sinh-type factors over R^3 and is negative, while its
    magnitude stays nonzero at every finite R (see the decisions log for
    the discrepancy with the historical closed form).
    """
    D, d = geom.delta_x_big, geom.delta_x_small
    if R <= D + d + 0.5:
        raise ValueError("large_r_phases needs R well beyond delta_x_big + delta_x_small")
    gam = coupling.gamma_big
    nr = n_norm(R, geom)
    if gam == 0.0:
        return PhaseSet.from_sigma_delta(0.0, 0.0, 0.0)
    p_inf, m_inf = phi_infinity(geom, coupling)
    delta_inf = 0.5 * (p_inf - m_inf)   # symmetric part vanishes identically
    tail_delta = _tail_bracket(R, geom, "delta")
    tail_sigma = _tail_bracket(R, geom, "sigma")
    w_delta = _w_delta_moments(R, geom)
    delta = (delta_inf - gam * (tail_delta + math.exp(-R * R) * w_delta)) / nr
    sigma = -gam * tail_sigma / nr
    q = _q_of(geom)
    glob, _ = adaptive_quad(
        lambda x: q(x) * 0.5 * (erfcx(abs(x + D)) + erfcx(abs(x - D))),
        -math.inf, math.inf, epsabs=QUAD_EPSABS_SCALE * gam)
    return PhaseSet.from_sigma_delta(gam * glob / nr, sigma, delta)


def phases_auto(R: float, geom: PacketGeometry, coupling: CouplingConfig,
                gamma: GammaModel) -> tuple:
    """Route to the best evaluation scheme for this R.

    Returns (PhaseSet, method) with method in {"small_r", "quad", "large_r"}.
    The trajectory-only offsets are composed additively in every regime.
    """
    if R < SMALL_R_MAX:
        return small_r_phases(R, geom, coupling, gamma), "small_r"
    if R <= LARGE_R_MIN:
        return phase_set(R, geom, coupling, gamma), "quad"
    base = large_r_phases(R, geom, coupling)
    if gamma.kind == "zero":
        return base, "large_r"
    gplus, gminus = gamma.plus_minus_offsets(R, geom, coupling)
    gpp = gamma.branch_offsets(R, geom, coupling)[(+1, +1)]
    return PhaseSet.from_plus_minus(base.global_phase + gpp,
                                    base.phi_plus + gplus,
                                    base.phi_minus + gminus), "large_r"
