"""1D two-particle Schrödinger dynamics coupled to guiding trajectories.

Natural units: hbar = 1, lengths in packet widths.  The wave function
psi(x1, x2) lives on a shared periodic grid (axis 0 = x1, axis 1 = x2) and
is advanced by symmetric operator splitting

    psi -> e^{-i V dt/2} . F^{-1} e^{-i K dt} F . e^{-i V dt/2} psi,

with the potential rebuilt every step from the current wave function and
trajectory pair, so the nonlinear/trajectory coupling is refreshed at the
splitting cadence.  The trajectory obeys dq_i/dt = Im(d_i psi / psi)/m_i
evaluated at (q1, q2); gradients are spectral, point values bilinear, and
the ODE step is classical RK4 with the velocity field interpolated
linearly in time across the PDE step.

Potential variants (softened kernel k_eps(y) = 1/sqrt(y^2 + eps^2)):

    quantum_pair   V = -G' k_eps(x1 - x2)                      (pair interaction)
    bohm_point     V = -G' k_eps(x1 - q2) - G' k_eps(q1 - x2) + gamma0(q1, q2)
    hybrid_r       each point source replaced by the marginal density
                   restricted to a window of radius R around the source
                   trajectory, normalized by the windowed mass
    mean_field     the hybrid form with the window removed (R = infinity)

All variants are sums of single-coordinate functions plus a constant, so
a product wave stays a product under a single evolution.  Superposition
branches conditioned on distinct trajectory combinations see distinct
sources; evolve_branched advances one wave per branch with the windows
centered on that branch's trajectories (marginals always from the full
assembled density), which is what generates spin-branch entanglement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (BohmgravError, ConfigError, DegenerateWindowError,
                     NodeProximityError, NumericalDegeneracyError,
                     OutOfDomainError)

HBAR = 1.0
NODE_AMPLITUDE = 1e-12          # |psi(q)| below this: guiding velocity undefined
WINDOW_MASS_FLOOR = 1e-12       # N_j below this: degenerate window
FIELD_MASK_REL = 1e-10          # conditional-slice mask, relative to slice max
NORM_DRIFT_TOL = 1e-8
ENTROPY_EIG_FLOOR = -1e-10
CHECKPOINT_VERSION = 1


@dataclass
class Grid1D:
    """Shared 1D grid for both particle coordinates."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        problems = []
        if self.n < 64:
            problems.append("n must be >= 64")
        if self.n & (self.n - 1) != 0:
            problems.append("n must be a power of two")
        if not (self.x_max > self.x_min):
            problems.append("x_max must exceed x_min")
        if problems:
            raise ConfigError(problems)
        self.dx = (self.x_max - self.x_min) / self.n
        self.x = self.x_min + self.dx * np.arange(self.n)
        self.k = 2.0 * math.pi * np.fft.fftfreq(self.n, self.dx)


@dataclass
class TwoParticleWave:
    grid: Grid1D
    psi: np.ndarray
    m1: float = 1.0
    m2: float = 1.0

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        if self.psi.shape != (self.grid.n, self.grid.n):
            raise ConfigError("psi must be an n x n grid")

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.psi) ** 2)) * self.grid.dx ** 2)

    def normalized(self) -> "TwoParticleWave":
        return TwoParticleWave(self.grid, self.psi / self.norm(), self.m1, self.m2)

    def marginals(self):
        """Probability densities (P1(x), P2(x)), each integrating to ~1."""
        rho = np.abs(self.psi) ** 2
        return rho.sum(axis=1) * self.grid.dx, rho.sum(axis=0) * self.grid.dx

    def copy(self) -> "TwoParticleWave":
        return TwoParticleWave(self.grid, self.psi.copy(), self.m1, self.m2)


@dataclass
class TrajectoryPair:
    q1: float
    q2: float
    history: list = field(default_factory=list)

    def record(self, t: float):
        self.history.append((t, self.q1, self.q2))


@dataclass(frozen=True)
class PotentialModel:
    """Interaction model: variant, coupling G' and softening, window radius R."""

    variant: str
    coupling: float
    softening: float = 0.1
    r_window: Optional[float] = None
    gamma: object = "zero"      # "zero" | "point" | "smoothed" | callable(q1, q2)

    def __post_init__(self):
        problems = []
        if self.variant not in ("quantum_pair", "bohm_point", "hybrid_r", "mean_field"):
            problems.append(f"unknown potential variant '{self.variant}'")
        if not (self.softening > 0.0):
            problems.append("softening must be > 0")
        if self.variant == "hybrid_r" and not (self.r_window and self.r_window > 0.0):
            problems.append("hybrid_r needs r_window > 0")
        if isinstance(self.gamma, str) and self.gamma not in ("zero", "point", "smoothed"):
            problems.append(f"unknown gamma choice '{self.gamma}'")
        if problems:
            raise ConfigError(problems)

    @property
    def trajectory_independent(self) -> bool:
        return self.variant in ("quantum_pair", "mean_field")

    @classmethod
    def quantum_pair(cls, coupling, softening=0.1):
        return cls("quantum_pair", coupling, softening)

    @classmethod
    def bohm_point(cls, coupling, softening=0.1, gamma="zero"):
        return cls("bohm_point", coupling, softening, gamma=gamma)

    @classmethod
    def hybrid_r(cls, coupling, r_window, softening=0.1, gamma="zero"):
        return cls("hybrid_r", coupling, softening, r_window, gamma)

    @classmethod
    def mean_field(cls, coupling, softening=0.1):
        return cls("mean_field", coupling, softening)


@dataclass
class EntanglementFields:
    """Coupling fields Pi_i^(n)(x): n-th derivative slices over conditional slices."""

    pi1_1: np.ndarray
    pi2_1: np.ndarray
    pi1_2: Optional[np.ndarray]
    pi2_2: Optional[np.ndarray]
    valid1: np.ndarray
    valid2: np.ndarray


def soft_kernel(y, eps):
    return 1.0 / np.sqrt(np.asarray(y) ** 2 + eps * eps)


# ---------------------------------------------------------------------------
# wave builders
# ---------------------------------------------------------------------------

def gaussian_packet(grid: Grid1D, center: float, sigma: float = 1.0,
                    momentum: float = 0.0) -> np.ndarray:
    g = np.exp(-(grid.x - center) ** 2 / (2.0 * sigma ** 2)
               + 1j * momentum * grid.x)
    return g / math.sqrt(float(np.sum(np.abs(g) ** 2)) * grid.dx)


def packet_sum(grid: Grid1D, centers: Sequence[float], sigma: float = 1.0) -> np.ndarray:
    g = np.zeros(grid.n, dtype=complex)
    for c in centers:
        g += np.exp(-(grid.x - c) ** 2 / (2.0 * sigma ** 2))
    return g / math.sqrt(float(np.sum(np.abs(g) ** 2)) * grid.dx)


def product_wave(grid: Grid1D, f1: np.ndarray, f2: np.ndarray,
                 m1: float = 1.0, m2: float = 1.0) -> TwoParticleWave:
    return TwoParticleWave(grid, np.outer(f1, f2), m1, m2).normalized()


def free_gaussian_width(sigma0: float, t: float, mass: float) -> float:
    """Width of a freely spreading packet (density ~ e^{-x^2/w^2})."""
    return sigma0 * math.sqrt(1.0 + (HBAR * t / (mass * sigma0 ** 2)) ** 2)


def expectation_x(wave: TwoParticleWave, particle: int) -> float:
    p1, p2 = wave.marginals()
    p = p1 if particle == 1 else p2
    return float(np.sum(wave.grid.x * p) * wave.grid.dx)


def packet_width(wave: TwoParticleWave, particle: int) -> float:
    p1, p2 = wave.marginals()
    p = p1 if particle == 1 else p2
    mu = float(np.sum(wave.grid.x * p) * wave.grid.dx)
    var = float(np.sum((wave.grid.x - mu) ** 2 * p) * wave.grid.dx)
    return math.sqrt(2.0 * var)


def expectation_momentum(wave: TwoParticleWave, particle: int) -> float:
    axis = 0 if particle == 1 else 1
    f = np.fft.fft(wave.psi, axis=axis)
    k = wave.grid.k.reshape((-1, 1) if axis == 0 else (1, -1))
    dens = np.abs(f) ** 2
    return float(np.sum(k * dens) / np.sum(dens))


def boundary_density(wave: TwoParticleWave) -> float:
    rho = np.abs(wave.psi) ** 2
    return float(max(rho[0, :].max(), rho[-1, :].max(),
                     rho[:, 0].max(), rho[:, -1].max()))


def overlap(a: TwoParticleWave, b: TwoParticleWave) -> complex:
    return complex(np.sum(np.conj(a.psi) * b.psi) * a.grid.dx ** 2)


def sample_positions(wave: TwoParticleWave, n_samples: int,
                     rng: np.random.Generator):
    """Draw (q1, q2) pairs from |psi|^2 (cell choice plus in-cell jitter)."""
    rho = np.abs(wave.psi) ** 2
    p = (rho / rho.sum()).ravel()
    idx = rng.choice(rho.size, size=n_samples, p=p)
    i1, i2 = np.unravel_index(idx, rho.shape)
    dx = wave.grid.dx
    q1 = wave.grid.x[i1] + rng.uniform(-0.5, 0.5, n_samples) * dx
    q2 = wave.grid.x[i2] + rng.uniform(-0.5, 0.5, n_samples) * dx
    return q1, q2


# ---------------------------------------------------------------------------
# potential assembly
# ---------------------------------------------------------------------------

def _windowed_source(P: np.ndarray, q: float, R: float, eps: float,
                     grid: Grid1D):
    """Normalized softened potential of the density P restricted to |r-q|<=R.

    Returns (T(x) on the grid, windowed mass N).  When the window covers
    the whole box the quadrature collapses to the plain grid sum, so the
    R -> infinity case matches the unwindowed source to rounding.
    """
    lo = max(q - R, grid.x[0])
    hi = min(q + R, grid.x[-1])
    if lo <= grid.x[0] and hi >= grid.x[-1]:
        mass = float(np.sum(P) * grid.dx)
        if mass < WINDOW_MASS_FLOOR:
            raise DegenerateWindowError("windowed mass below threshold")
        T = soft_kernel(grid.x[:, None] - grid.x[None, :], eps) @ P * grid.dx
        return T / mass, mass
    if hi <= lo:
        raise DegenerateWindowError("window does not intersect the grid box")
    n_sub = int(min(max(16, math.ceil((hi - lo) / grid.dx) * 4), 1024)) | 1
    r = np.linspace(lo, hi, n_sub)
    w = np.full(n_sub, (hi - lo) / (n_sub - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    Pr = np.interp(r, grid.x, P)
    mass = float(np.sum(w * Pr))
    if mass < WINDOW_MASS_FLOOR:
        raise DegenerateWindowError("windowed mass below threshold")
    T = soft_kernel(grid.x[:, None] - r[None, :], eps) @ (w * Pr)
    return T / mass, mass


def _gamma_const(pot: PotentialModel, wave: TwoParticleWave,
                 q1: float, q2: float) -> float:
    g = pot.gamma
    if callable(g):
        return float(g(q1, q2))
    if g == "zero" or pot.variant == "mean_field":
        return 0.0
    if g == "point" or pot.variant == "bohm_point":
        return pot.coupling * float(soft_kernel(q1 - q2, pot.softening))
    # smoothed: half the symmetrized windowed mutual energy at the trajectories
    P1, P2 = wave.marginals()
    T1, _ = _windowed_source(P1, q1, pot.r_window, pot.softening, wave.grid)
    T2, _ = _windowed_source(P2, q2, pot.r_window, pot.softening, wave.grid)
    t1_at_q2 = float(np.interp(q2, wave.grid.x, T1))
    t2_at_q1 = float(np.interp(q1, wave.grid.x, T2))
    return pot.coupling * 0.5 * (t1_at_q2 + t2_at_q1)


def potential_terms(pot: PotentialModel, wave: TwoParticleWave,
                    q1: float, q2: float, marginals=None):
    """(v1(x), v2(x), const) with V(x1, x2) = v1(x1) + v2(x2) + const,
    or (None, None, Vgrid) for the pair variant."""
    G = pot.coupling
    eps = pot.softening
    grid = wave.grid
    if pot.variant == "quantum_pair":
        V = -G * soft_kernel(grid.x[:, None] - grid.x[None, :], eps)
        return None, None, V
    if pot.variant == "bohm_point":
        v1 = -G * soft_kernel(grid.x - q2, eps)
        v2 = -G * soft_kernel(q1 - grid.x, eps)
        return v1, v2, _gamma_const(pot, wave, q1, q2)
    P1, P2 = marginals if marginals is not None else wave.marginals()
    if pot.variant == "mean_field":
        T1 = soft_kernel(grid.x[:, None] - grid.x[None, :], eps) @ P1 * grid.dx
        T2 = soft_kernel(grid.x[:, None] - grid.x[None, :], eps) @ P2 * grid.dx
        return -G * T2, -G * T1, 0.0
    T1, _ = _windowed_source(P1, q1, pot.r_window, eps, grid)
    T2, _ = _windowed_source(P2, q2, pot.r_window, eps, grid)
    return -G * T2, -G * T1, _gamma_const(pot, wave, q1, q2)


def potential_field(pot: PotentialModel, wave: TwoParticleWave,
                    q1: float, q2: float) -> np.ndarray:
    """Full V(x1, x2) grid for the given wave and trajectory pair."""
    v1, v2, rest = potential_terms(pot, wave, q1, q2)
    if v1 is None:
        return rest
    return v1[:, None] + v2[None, :] + rest


def potential_scalar(pot: PotentialModel, wave: TwoParticleWave,
                     r1: float, r2: float, q1: float, q2: float) -> float:
    """V evaluated at a single configuration point (r1, r2)."""
    G = pot.coupling
    eps = pot.softening
    if pot.variant == "quantum_pair":
        return -G * float(soft_kernel(r1 - r2, eps))
    if pot.variant == "bohm_point":
        return (-G * float(soft_kernel(r1 - q2, eps))
                - G * float(soft_kernel(q1 - r2, eps))
                + _gamma_const(pot, wave, q1, q2))
    v1, v2, const = potential_terms(pot, wave, q1, q2)
    x = wave.grid.x
    return float(np.interp(r1, x, v1)) + float(np.interp(r2, x, v2)) + const


# ---------------------------------------------------------------------------
# guiding velocity
# ---------------------------------------------------------------------------

def _gradient_fields(psi: np.ndarray, grid: Grid1D):
    F = np.fft.fft2(psi)
    d1 = np.fft.ifft2(1j * grid.k[:, None] * F)
    d2 = np.fft.ifft2(1j * grid.k[None, :] * F)
    return psi, d1, d2


def _bilinear(arr: np.ndarray, grid: Grid1D, q1, q2):
    fi = (np.asarray(q1) - grid.x[0]) / grid.dx
    fj = (np.asarray(q2) - grid.x[0]) / grid.dx
    if np.any(fi < 0) or np.any(fi > grid.n - 1) or np.any(fj < 0) or np.any(fj > grid.n - 1):
        raise OutOfDomainError("trajectory left the grid box")
    i0 = np.minimum(fi.astype(int), grid.n - 2)
    j0 = np.minimum(fj.astype(int), grid.n - 2)
    fi = fi - i0
    fj = fj - j0
    return (arr[i0, j0] * (1 - fi) * (1 - fj) + arr[i0 + 1, j0] * fi * (1 - fj)
            + arr[i0, j0 + 1] * (1 - fi) * fj + arr[i0 + 1, j0 + 1] * fi * fj)


def _velocity_from_fields(fields, grid: Grid1D, m1: float, m2: float, q1, q2):
    psi, d1, d2 = fields
    p = _bilinear(psi, grid, q1, q2)
    if np.any(np.abs(p) < NODE_AMPLITUDE):
        raise NodeProximityError("wave amplitude at the trajectory below threshold")
    v1 = (HBAR / m1) * np.imag(_bilinear(d1, grid, q1, q2) / p)
    v2 = (HBAR / m2) * np.imag(_bilinear(d2, grid, q1, q2) / p)
    return v1, v2


def guiding_velocity(wave: TwoParticleWave, q1: float, q2: float):
    """(dq1/dt, dq2/dt) at (q1, q2): spectral gradients, bilinear point values."""
    fields = _gradient_fields(wave.psi, wave.grid)
    v1, v2 = _velocity_from_fields(fields, wave.grid, wave.m1, wave.m2, q1, q2)
    return float(v1), float(v2)


def _rk4_step(fields_old, fields_new, grid, m1, m2, q1, q2, dt):
    def vel(tau, a1, a2):
        va = _velocity_from_fields(fields_old, grid, m1, m2, a1, a2)
        vb = _velocity_from_fields(fields_new, grid, m1, m2, a1, a2)
        return (va[0] * (1 - tau) + vb[0] * tau, va[1] * (1 - tau) + vb[1] * tau)

    k1 = vel(0.0, q1, q2)
    k2 = vel(0.5, q1 + 0.5 * dt * k1[0], q2 + 0.5 * dt * k1[1])
    k3 = vel(0.5, q1 + 0.5 * dt * k2[0], q2 + 0.5 * dt * k2[1])
    k4 = vel(1.0, q1 + dt * k3[0], q2 + dt * k3[1])
    return (q1 + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            q2 + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------

def _kinetic_factor(grid: Grid1D, m1: float, m2: float, dt: float):
    K = grid.k[:, None] ** 2 / (2.0 * m1) + grid.k[None, :] ** 2 / (2.0 * m2)
    return np.exp(-1j * HBAR * K * dt)


def _apply_split_step(psi, expT, v1, v2, const, dt):
    if v1 is None:
        half = np.exp(-0.5j * dt / HBAR * v2)   # v2 carries the full grid here
    else:
        half = np.exp(-0.5j * dt / HBAR * (v1[:, None] + v2[None, :] + const))
    psi = half * psi
    psi = np.fft.ifft2(expT * np.fft.fft2(psi))
    return half * psi


def evolve(wave: TwoParticleWave, traj: TrajectoryPair, pot: PotentialModel,
           dt: float, steps: int,
           observer: Optional[Callable] = None, t0: float = 0.0):
    """Advance the coupled (wave, trajectory) system by `steps` splitting steps.

    Returns the advanced (wave, trajectory); both inputs are left untouched.
    The observer, if given, is called as observer(step, t, wave, traj) after
    every step.  Norm drift beyond tolerance aborts the run.
    """
    wave = wave.copy()
    traj = TrajectoryPair(traj.q1, traj.q2, list(traj.history))
    grid = wave.grid
    expT = _kinetic_factor(grid, wave.m1, wave.m2, dt)
    norm0 = wave.norm()
    if not traj.history:
        traj.record(t0)
    static = None
    if pot.variant == "quantum_pair":
        _, _, V = potential_terms(pot, wave, traj.q1, traj.q2)
        static = (None, V, 0.0)
    fields = _gradient_fields(wave.psi, grid)
    t = t0
    for step in range(steps):
        try:
            if static is not None:
                v1, v2, const = static
            else:
                v1, v2, const = potential_terms(pot, wave, traj.q1, traj.q2)
            wave.psi = _apply_split_step(wave.psi, expT, v1, v2, const, dt)
            fields_new = _gradient_fields(wave.psi, grid)
            traj.q1, traj.q2 = _rk4_step(fields, fields_new, grid, wave.m1, wave.m2,
                                         traj.q1, traj.q2, dt)
            fields = fields_new
        except (NodeProximityError, OutOfDomainError) as err:
            err.wave = wave
            err.trajectory = traj
            err.step = step
            raise
        t = t0 + (step + 1) * dt
        traj.record(t)
        if abs(wave.norm() - norm0) > NORM_DRIFT_TOL:
            raise BohmgravError(f"norm drift exceeded {NORM_DRIFT_TOL} at step {step}")
        if observer is not None:
            observer(step, t, wave, traj)
    return wave, traj


def evolve_ensemble(wave: TwoParticleWave, q1s: np.ndarray, q2s: np.ndarray,
                    pot: PotentialModel, dt: float, steps: int,
                    observer: Optional[Callable] = None):
    """Transport an ensemble of trajectory pairs through one wave evolution.

    Only trajectory-independent potentials qualify (the single evolved wave
    is then consistent for every ensemble member).
    """
    if not pot.trajectory_independent:
        raise ConfigError("ensemble transport needs a trajectory-independent potential")
    wave = wave.copy()
    q1s = np.array(q1s, dtype=float)
    q2s = np.array(q2s, dtype=float)
    grid = wave.grid
    expT = _kinetic_factor(grid, wave.m1, wave.m2, dt)
    static = None
    if pot.variant == "quantum_pair":
        _, _, V = potential_terms(pot, wave, 0.0, 0.0)
        static = (None, V, 0.0)
    fields = _gradient_fields(wave.psi, grid)
    for step in range(steps):
        if static is not None:
            v1, v2, const = static
        else:
            v1, v2, const = potential_terms(pot, wave, 0.0, 0.0)
        wave.psi = _apply_split_step(wave.psi, expT, v1, v2, const, dt)
        fields_new = _gradient_fields(wave.psi, grid)
        q1s, q2s = _rk4_step(fields, fields_new, grid, wave.m1, wave.m2, q1s, q2s, dt)
        fields = fields_new
        if observer is not None:
            observer(step, (step + 1) * dt, wave, (q1s, q2s))
    return wave, q1s, q2s


@dataclass
class Branch:
    """One trajectory-conditioned sector of a superposition run."""

    amplitude: complex
    wave: TwoParticleWave
    traj: TrajectoryPair


def assemble_wave(branches: Sequence[Branch]) -> TwoParticleWave:
    first = branches[0].wave
    psi = np.zeros_like(first.psi)
    for b in branches:
        psi = psi + b.amplitude * b.wave.psi
    return TwoParticleWave(first.grid, psi, first.m1, first.m2).normalized()


def branch_product_waves(grid: Grid1D, centers1: Sequence[float],
                         centers2: Sequence[float], sigma: float = 1.0,
                         m1: float = 1.0, m2: float = 1.0):
    """Branches of a two-arm x two-arm product start, trajectories at centers."""
    n_br = len(centers1) * len(centers2)
    amp = 1.0 / math.sqrt(n_br)
    out = []
    for c1 in centers1:
        for c2 in centers2:
            w = product_wave(grid, gaussian_packet(grid, c1, sigma),
                             gaussian_packet(grid, c2, sigma), m1, m2)
            out.append(Branch(amp, w, TrajectoryPair(c1, c2)))
    return out


def evolve_branched(branches: Sequence[Branch], pot: PotentialModel,
                    dt: float, steps: int,
                    observer: Optional[Callable] = None, t0: float = 0.0):
    """Advance every branch under its own trajectory-conditioned potential.

    Marginal densities entering hybrid/mean-field sources are those of the
    full assembled wave; the window of each source sits on the branch's own
    trajectory.  Returns the advanced branches.
    """
    branches = [Branch(b.amplitude, b.wave.copy(),
                       TrajectoryPair(b.traj.q1, b.traj.q2, list(b.traj.history)))
                for b in branches]
    grid = branches[0].wave.grid
    m1, m2 = branches[0].wave.m1, branches[0].wave.m2
    expT = _kinetic_factor(grid, m1, m2, dt)
    fields = [_gradient_fields(b.wave.psi, grid) for b in branches]
    for b in branches:
        if not b.traj.history:
            b.traj.record(t0)
    for step in range(steps):
        assembled = assemble_wave(branches)
        marg = assembled.marginals()
        for i, b in enumerate(branches):
            v1, v2, const = potential_terms(pot, assembled, b.traj.q1, b.traj.q2,
                                            marginals=marg)
            b.wave.psi = _apply_split_step(b.wave.psi, expT, v1, v2, const, dt)
            fields_new = _gradient_fields(b.wave.psi, grid)
            b.traj.q1, b.traj.q2 = _rk4_step(fields[i], fields_new, grid, m1, m2,
                                             b.traj.q1, b.traj.q2, dt)
            fields[i] = fields_new
            b.traj.record(t0 + (step + 1) * dt)
        if observer is not None:
            observer(step, t0 + (step + 1) * dt, branches)
    return branches


# ---------------------------------------------------------------------------
# conditional-slice machinery
# ---------------------------------------------------------------------------

def _slice_at(arr: np.ndarray, grid: Grid1D, q: float, axis: int) -> np.ndarray:
    """Linear interpolation of a grid function along one axis at q."""
    f = (q - grid.x[0]) / grid.dx
    if f < 0 or f > grid.n - 1:
        raise OutOfDomainError("conditioning point outside the grid box")
    i0 = min(int(f), grid.n - 2)
    w = f - i0
    if axis == 1:
        return arr[:, i0] * (1 - w) + arr[:, i0 + 1] * w
    return arr[i0, :] * (1 - w) + arr[i0 + 1, :] * w


def conditional_wavefunctions(wave: TwoParticleWave, q1: float, q2: float):
    """Unnormalized conditional waves psi1(x) = psi(x, q2), psi2(x) = psi(q1, x)."""
    psi1 = _slice_at(wave.psi, wave.grid, q2, axis=1)
    psi2 = _slice_at(wave.psi, wave.grid, q1, axis=0)
    return psi1, psi2


def _spectral_derivative(psi: np.ndarray, grid: Grid1D, axis: int, order: int):
    F = np.fft.fft(psi, axis=axis)
    k = grid.k.reshape((-1, 1) if axis == 0 else (1, -1))
    return np.fft.ifft((1j * k) ** order * F, axis=axis)


def entanglement_fields(wave: TwoParticleWave, q1: float, q2: float,
                        order: int = 2) -> EntanglementFields:
    """Pi_i^(n)(x): cross-derivative slices divided by the conditional waves.

    Entries where the conditional amplitude is below the relative mask are
    set to zero and flagged invalid.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    grid = wave.grid
    psi1, psi2 = conditional_wavefunctions(wave, q1, q2)
    valid1 = np.abs(psi1) > FIELD_MASK_REL * np.abs(psi1).max()
    valid2 = np.abs(psi2) > FIELD_MASK_REL * np.abs(psi2).max()

    def ratio(num, den, valid):
        out = np.zeros_like(num)
        out[valid] = num[valid] / den[valid]
        return out

    d2_1 = _slice_at(_spectral_derivative(wave.psi, grid, 1, 1), grid, q2, axis=1)
    d1_1 = _slice_at(_spectral_derivative(wave.psi, grid, 0, 1), grid, q1, axis=0)
    pi1_1 = ratio(d2_1, psi1, valid1)
    pi2_1 = ratio(d1_1, psi2, valid2)
    pi1_2 = pi2_2 = None
    if order == 2:
        d2_2 = _slice_at(_spectral_derivative(wave.psi, grid, 1, 2), grid, q2, axis=1)
        d1_2 = _slice_at(_spectral_derivative(wave.psi, grid, 0, 2), grid, q1, axis=0)
        pi1_2 = ratio(d2_2, psi1, valid1)
        pi2_2 = ratio(d1_2, psi2, valid2)
    return EntanglementFields(pi1_1, pi2_1, pi1_2, pi2_2, valid1, valid2)


def effective_potential(wave: TwoParticleWave, traj: TrajectoryPair,
                        pot: PotentialModel, particle: int) -> np.ndarray:
    """Complex single-particle potential driving the conditional wave.

    V_1^eff(x) = V(x, q2; q1, q2) + i hbar (dq2/dt) Pi_1^(1)(x)
                 - hbar^2/(2 m2) Pi_1^(2)(x),  and symmetrically for 2.
    """
    if particle not in (1, 2):
        raise ValueError("particle must be 1 or 2")
    fields = entanglement_fields(wave, traj.q1, traj.q2, order=2)
    v1, v2 = guiding_velocity(wave, traj.q1, traj.q2)
    Vgrid = potential_field(pot, wave, traj.q1, traj.q2)
    if particle == 1:
        v_slice = _slice_at(Vgrid, wave.grid, traj.q2, axis=1)
        return (v_slice + 1j * HBAR * v2 * fields.pi1_1
                - HBAR ** 2 / (2.0 * wave.m2) * fields.pi1_2)
    v_slice = _slice_at(Vgrid, wave.grid, traj.q1, axis=0)
    return (v_slice + 1j * HBAR * v1 * fields.pi2_1
            - HBAR ** 2 / (2.0 * wave.m1) * fields.pi2_2)


def entanglement_entropy(wave: TwoParticleWave) -> float:
    """Von Neumann entropy of the reduced state of particle 1."""
    rho1 = (wave.psi @ wave.psi.conj().T) * wave.grid.dx ** 2
    lam = np.linalg.eigvalsh(rho1)
    if lam.min() < ENTROPY_EIG_FLOOR:
        raise NumericalDegeneracyError(
            f"reduced-state eigenvalue {lam.min():.3e} below tolerance")
    lam = lam[lam > 0.0]
    return float(-np.sum(lam * np.log(lam)))


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, wave: TwoParticleWave, traj: TrajectoryPair,
                    config: Optional[dict] = None):
    """Self-describing container; amplitude grid flattened with x1 fastest."""
    import json

    hist = np.array(traj.history if traj.history else
                    [(0.0, traj.q1, traj.q2)], dtype=float)
    np.savez(path,
             format_version=np.int64(CHECKPOINT_VERSION),
             x_min=wave.grid.x_min, x_max=wave.grid.x_max,
             n=np.int64(wave.grid.n), m1=wave.m1, m2=wave.m2,
             psi_flat_x1_fastest=np.ravel(wave.psi, order="F"),
             traj_t=hist[:, 0], traj_q1=hist[:, 1], traj_q2=hist[:, 2],
             config_json=np.bytes_(json.dumps(config or {}, sort_keys=True).encode()))


def load_checkpoint(path):
    import json

    with np.load(path) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {version}")
        grid = Grid1D(float(data["x_min"]), float(data["x_max"]), int(data["n"]))
        psi = data["psi_flat_x1_fastest"].reshape((grid.n, grid.n), order="F")
        wave = TwoParticleWave(grid, psi, float(data["m1"]), float(data["m2"]))
        hist = list(zip(data["traj_t"].tolist(), data["traj_q1"].tolist(),
                        data["traj_q2"].tolist()))
        traj = TrajectoryPair(hist[-1][1], hist[-1][2], hist)
        config = json.loads(bytes(data["config_json"]).decode())
    return wave, traj, config
