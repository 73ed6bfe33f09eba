"""L2 bound on the phase-dressed free approximation of the interacting run.

For an initial wave evolved (i) under a model potential coupled to its
trajectory and (ii) freely, the interacting solution stays close to the
free one dressed with the accumulated potential phase

    S(t) = -(1/hbar) int_0^t V[psi_f](t', u(t'), u(t')) dt',

u(t) the free position expectations.  With

    eps1 = sup |psi_f| outside the moving box Sigma_t (u(t) +- k * width),
    eps2 = sup |dV|   inside  Sigma_t,
    dV(t, x) = V[psi](t, x, q) - V[psi_f](t, u, u),

the deviation delta_psi = psi - e^{iS} psi_f obeys

    ||delta_psi||_2(t) <= (t/hbar) (eps2 + eps1 ||dV||_2).

bound_check measures both sides on a shared grid/time mesh; the sup / max
quantities are discrete sups over grid points and running maxima over the
sampled times, which keeps the right side a valid upper bound at every t.
For superposition initial data the same statement holds branch by branch
with branch-wise phases S_j; bound_check_branched runs the
trajectory-conditioned branch evolution and checks each branch, also
returning the dressing-phase mismatch arg<e^{iS_j} psi_f_j, psi_j> which
must stay inside the bound's own phase margin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import (HBAR, Branch, PotentialModel, TrajectoryPair,
                       TwoParticleWave, _kinetic_factor, assemble_wave,
                       evolve, evolve_branched, expectation_momentum,
                       expectation_x, packet_width, potential_field,
                       potential_scalar)
from .errors import ConfigError


@dataclass
class BoundReport:
    T: float
    k_sigma: float
    eps1: float
    eps2: float
    delta_v_norm: float
    times: list
    measured_delta_psi: list
    bound_series: list
    s_series: list
    label: str = ""
    config: dict = field(default_factory=dict)

    def holds(self, allowance: float = 1e-6) -> bool:
        m = np.asarray(self.measured_delta_psi)
        b = np.asarray(self.bound_series)
        return bool(np.all(m <= b + allowance))

    def margin(self) -> float:
        """min bound/measured over sampled times (inf when measured is 0)."""
        m = np.asarray(self.measured_delta_psi)
        b = np.asarray(self.bound_series)
        mask = m > 0
        if not mask.any():
            return math.inf
        return float(np.min(b[mask] / m[mask]))

    def to_dict(self) -> dict:
        return {
            "T": self.T, "k_sigma": self.k_sigma,
            "eps1": self.eps1, "eps2": self.eps2,
            "delta_v_norm": self.delta_v_norm,
            "times": list(self.times),
            "measured_delta_psi": list(self.measured_delta_psi),
            "bound_series": list(self.bound_series),
            "s_series": list(self.s_series),
            "label": self.label,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def phase_functional(free_record: Sequence, pot: PotentialModel, u_series) -> np.ndarray:
    """Cumulative phase S at the record times.

    free_record: sequence of (t, TwoParticleWave) of the free evolution;
    u_series: matching sequence of (u1, u2) classical points.
    """
    ts = np.array([t for t, _ in free_record], dtype=float)
    vals = np.array([potential_scalar(pot, w, u1, u2, u1, u2)
                     for (_, w), (u1, u2) in zip(free_record, u_series)])
    S = np.zeros_like(ts)
    if len(ts) > 1:
        S[1:] = np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(ts))
    return -S / HBAR


def _sigma_box(grid, u1, u2, w1, w2, k_sigma):
    in1 = np.abs(grid.x - u1) <= k_sigma * w1
    in2 = np.abs(grid.x - u2) <= k_sigma * w2
    if (u1 - k_sigma * w1 < grid.x[0] or u1 + k_sigma * w1 > grid.x[-1]
            or u2 - k_sigma * w2 < grid.x[0] or u2 + k_sigma * w2 > grid.x[-1]):
        raise ConfigError("confinement box left the grid; enlarge the box or shorten T")
    return np.outer(in1, in2)


def _free_propagator_stepper(wave: TwoParticleWave, dt: float):
    expT = _kinetic_factor(wave.grid, wave.m1, wave.m2, dt)
    state = {"F": np.fft.fft2(wave.psi)}

    def step():
        state["F"] = expT * state["F"]
        return np.fft.ifft2(state["F"])

    return step


def bound_check(pot: PotentialModel, init: TwoParticleWave, T: float,
                k_sigma: float = 5.0, steps: int = 400,
                traj: Optional[TrajectoryPair] = None,
                label: str = "", config: Optional[dict] = None) -> BoundReport:
    """Co-evolve interacting and free runs and compare deviation to the bound."""
    dt = T / steps
    grid = init.grid
    dx2 = grid.dx ** 2
    if traj is None:
        traj = TrajectoryPair(expectation_x(init, 1), expectation_x(init, 2))
    u0 = (expectation_x(init, 1), expectation_x(init, 2))
    vband = (expectation_momentum(init, 1) / init.m1,
             expectation_momentum(init, 2) / init.m2)

    free_step = _free_propagator_stepper(init, dt)
    psif = init.psi.copy()
    wave_f = TwoParticleWave(grid, psif, init.m1, init.m2)

    eps1 = 0.0
    eps2 = 0.0
    dv_norm = 0.0
    times = [0.0]
    measured = [0.0]
    bound = [0.0]
    s_series = [0.0]
    state = {"S": 0.0,
             "v_prev": potential_scalar(pot, wave_f, u0[0], u0[1], u0[0], u0[1])}

    def observer(step, t, wave, tr):
        nonlocal eps1, eps2, dv_norm
        psif_t = free_step()
        wave_ft = TwoParticleWave(grid, psif_t, init.m1, init.m2)
        u1 = u0[0] + vband[0] * t
        u2 = u0[1] + vband[1] * t
        v_now = potential_scalar(pot, wave_ft, u1, u2, u1, u2)
        state["S"] += -0.5 * dt * (state["v_prev"] + v_now) / HBAR
        state["v_prev"] = v_now
        w1 = packet_width(wave_ft, 1)
        w2 = packet_width(wave_ft, 2)
        inside = _sigma_box(grid, u1, u2, w1, w2, k_sigma)
        absf = np.abs(psif_t)
        outside = ~inside
        if outside.any():
            eps1 = max(eps1, float(absf[outside].max()))
        dV = potential_field(pot, wave, tr.q1, tr.q2) - v_now
        eps2 = max(eps2, float(np.abs(dV[inside]).max()))
        dv_norm = max(dv_norm, math.sqrt(float(np.sum(dV * dV)) * dx2))
        dpsi = wave.psi - np.exp(1j * state["S"]) * psif_t
        times.append(t)
        measured.append(math.sqrt(float(np.sum(np.abs(dpsi) ** 2)) * dx2))
        bound.append(t / HBAR * (eps2 + eps1 * dv_norm))
        s_series.append(state["S"])

    evolve(init, traj, pot, dt, steps, observer=observer)
    return BoundReport(T=T, k_sigma=k_sigma, eps1=eps1, eps2=eps2,
                       delta_v_norm=dv_norm, times=times,
                       measured_delta_psi=measured, bound_series=bound,
                       s_series=s_series, label=label, config=config or {})


def bound_check_branched(pot: PotentialModel, branches: Sequence[Branch], T: float,
                         k_sigma: float = 5.0, steps: int = 400,
                         label: str = "", config: Optional[dict] = None):
    """Per-branch bound reports for a trajectory-conditioned superposition run.

    Each report also carries the extracted dressing-phase mismatch in
    config["phase_mismatch"] (radians, per sampled time).
    """
    dt = T / steps
    grid = branches[0].wave.grid
    m1, m2 = branches[0].wave.m1, branches[0].wave.m2
    dx2 = grid.dx ** 2
    nb = len(branches)
    u0 = [(expectation_x(b.wave, 1), expectation_x(b.wave, 2)) for b in branches]

    free_steps = [_free_propagator_stepper(b.wave, dt) for b in branches]
    free_waves = [b.wave.copy() for b in branches]
    amps = [b.amplitude for b in branches]

    eps1 = [0.0] * nb
    eps2 = [0.0] * nb
    dv_norm = [0.0] * nb
    times = [0.0]
    measured = [[0.0] for _ in range(nb)]
    bounds = [[0.0] for _ in range(nb)]
    s_ser = [[0.0] for _ in range(nb)]
    mismatch = [[0.0] for _ in range(nb)]
    S = [0.0] * nb
    assembled_f0 = assemble_wave([Branch(a, w, None) for a, w in zip(amps, free_waves)])
    v_prev = [potential_scalar(pot, assembled_f0, u[0], u[1], u[0], u[1]) for u in u0]

    def observer(step, t, brs):
        psif = [fs() for fs in free_steps]
        waves_f = [TwoParticleWave(grid, p, m1, m2) for p in psif]
        assembled_f = assemble_wave([Branch(a, w, None) for a, w in zip(amps, waves_f)])
        times.append(t)
        for i, b in enumerate(brs):
            u1, u2 = u0[i]
            v_now = potential_scalar(pot, assembled_f, u1, u2, u1, u2)
            S[i] += -0.5 * dt * (v_prev[i] + v_now) / HBAR
            v_prev[i] = v_now
            w1 = packet_width(waves_f[i], 1)
            w2 = packet_width(waves_f[i], 2)
            inside = _sigma_box(grid, u1, u2, w1, w2, k_sigma)
            absf = np.abs(psif[i])
            if (~inside).any():
                eps1[i] = max(eps1[i], float(absf[~inside].max()))
            dV = potential_field(pot, assemble_wave(brs), b.traj.q1, b.traj.q2) - v_now
            eps2[i] = max(eps2[i], float(np.abs(dV[inside]).max()))
            dv_norm[i] = max(dv_norm[i], math.sqrt(float(np.sum(dV * dV)) * dx2))
            dressed = np.exp(1j * S[i]) * psif[i]
            dpsi = b.wave.psi - dressed
            measured[i].append(math.sqrt(float(np.sum(np.abs(dpsi) ** 2)) * dx2))
            bounds[i].append(t / HBAR * (eps2[i] + eps1[i] * dv_norm[i]))
            s_ser[i].append(S[i])
            ov = complex(np.sum(np.conj(dressed) * b.wave.psi) * dx2)
            mismatch[i].append(float(np.angle(ov)))

    evolve_branched(branches, pot, dt, steps, observer=observer)
    reports = []
    for i in range(nb):
        cfg = dict(config or {})
        cfg["phase_mismatch"] = mismatch[i]
        reports.append(BoundReport(T=T, k_sigma=k_sigma, eps1=eps1[i], eps2=eps2[i],
                                   delta_v_norm=dv_norm[i], times=times,
                                   measured_delta_psi=measured[i],
                                   bound_series=bounds[i], s_series=s_ser[i],
                                   label=f"{label}[branch {i}]", config=cfg))
    return reports
