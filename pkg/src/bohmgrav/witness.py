"""Two-qubit spin state of the closed interferometer and entanglement witnesses.

After recombination the position branches map onto spin labels and the
state, with the global phase dropped, is

    |psi> = (|uu> + e^{i phi+} |ud> + e^{i phi-} |du> + |dd>) / 2 .

The primary witness is W = |<sx sz> + <sy sy>|, entanglement iff W > 1;
on this state it reduces to |sin(phi_Del) (sin(phi_Del) - sin(phi_Sig))|.
A one-parameter family W_G(theta) = <2I - 4 |theta><theta|>, negative on
entangled states, reduces to
2 sin^2(theta/2) sin^2(phi_Del) + sin(theta) (sin(phi-) + sin(phi+)).
Both reductions are cross-checked against explicit 4x4 operator
expectation values by the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidStateError
from .phases import PhaseSet

NORM_TOL = 1e-12
IMAG_TOL = 1e-12
DEFAULT_SEED = 20240817

PAULI = {
    "I": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

W3_THETA = 3 * math.pi / 2
W4_THETA = math.pi / 2


@dataclass(frozen=True)
class TwoQubitState:
    """Four complex amplitudes ordered (uu, ud, du, dd), unit norm."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(4)
        object.__setattr__(self, "amplitudes", amps)
        if abs(np.sum(np.abs(amps) ** 2) - 1.0) > NORM_TOL:
            raise InvalidStateError("state norm differs from 1 beyond 1e-12")


@dataclass(frozen=True)
class WitnessReport:
    w: float
    wg_theta: dict
    w3: float
    w4: float
    entangled_flag: bool
    seed: int = field(default=DEFAULT_SEED)


def build_state(phases: PhaseSet) -> TwoQubitState:
    """Post-interferometer spin state; the global phase is discarded."""
    amps = np.array([1.0,
                     np.exp(1j * phases.phi_plus),
                     np.exp(1j * phases.phi_minus),
                     1.0]) / 2.0
    return TwoQubitState(amps)


def pauli_expectation(state: TwoQubitState, a: str, b: str) -> float:
    """<psi| A (x) B |psi> for A, B in {I, x, y, z}; must come out real."""
    if a not in PAULI or b not in PAULI:
        raise ValueError("axis labels must be one of I, x, y, z")
    psi = state.amplitudes
    if abs(np.vdot(psi, psi) - 1.0) > NORM_TOL:
        raise InvalidStateError("state norm differs from 1 beyond 1e-12")
    op = np.kron(PAULI[a], PAULI[b])
    val = np.vdot(psi, op @ psi)
    if abs(val.imag) > IMAG_TOL:
        raise InvalidStateError(f"expectation has imaginary residue {val.imag!r}")
    return float(val.real)


def witness_w(phases: PhaseSet) -> float:
    """Closed-form W on the interferometer state."""
    sd = math.sin(phases.phi_delta)
    ss = math.sin(phases.phi_sigma)
    return abs(sd * (sd - ss))


def witness_w_state(state: TwoQubitState) -> float:
    """Operator route |<sx sz> + <sy sy>| for an arbitrary two-qubit state."""
    return abs(pauli_expectation(state, "x", "z") + pauli_expectation(state, "y", "y"))


def witness_wg(theta: float, phases: PhaseSet) -> float:
    """Closed-form W_G(theta); negative values witness entanglement."""
    sd = math.sin(phases.phi_delta)
    return (2.0 * math.sin(theta / 2.0) ** 2 * sd * sd
            + math.sin(theta) * (math.sin(phases.phi_minus) + math.sin(phases.phi_plus)))


def witness_wg_state(theta: float, state: TwoQubitState) -> float:
    """Operator route for W_G(theta) via its Pauli decomposition."""
    return (pauli_expectation(state, "I", "I")
            - pauli_expectation(state, "x", "x")
            + math.cos(theta) * (pauli_expectation(state, "y", "y")
                                 - pauli_expectation(state, "z", "z"))
            + math.sin(theta) * (pauli_expectation(state, "y", "z")
                                 + pauli_expectation(state, "z", "y")))


def bloch_state(theta: float, phi: float) -> np.ndarray:
    return np.array([math.cos(theta / 2.0),
                     np.exp(1j * phi) * math.sin(theta / 2.0)])


def sample_product_states(n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """n_samples product states, each factor uniform on its Bloch sphere."""
    cos_t = rng.uniform(-1.0, 1.0, size=(n_samples, 2))
    phi = rng.uniform(0.0, 2.0 * math.pi, size=(n_samples, 2))
    half = np.arccos(cos_t) / 2.0
    a = np.stack([np.cos(half[:, 0]), np.exp(1j * phi[:, 0]) * np.sin(half[:, 0])], axis=1)
    b = np.stack([np.cos(half[:, 1]), np.exp(1j * phi[:, 1]) * np.sin(half[:, 1])], axis=1)
    return np.einsum("ni,nj->nij", a, b).reshape(n_samples, 4)


def separability_bound_check(n_samples: int, seed: int = DEFAULT_SEED) -> float:
    """Max W over random product states; must not exceed 1 (+ float slack)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    psi = sample_product_states(n_samples, rng)
    xz = np.kron(PAULI["x"], PAULI["z"])
    yy = np.kron(PAULI["y"], PAULI["y"])
    w = np.abs(np.einsum("ni,ij,nj->n", psi.conj(), xz, psi).real
               + np.einsum("ni,ij,nj->n", psi.conj(), yy, psi).real)
    return float(np.max(w))


def witness_report(phases: PhaseSet, n_theta: int = 64, seed: int = DEFAULT_SEED) -> WitnessReport:
    """Witness summary on the grid of theta plus the two distinguished values."""
    thetas = [2.0 * math.pi * k / n_theta for k in range(n_theta)]
    for special in (W3_THETA, W4_THETA):
        if special not in thetas:
            thetas.append(special)
    wg = {t: witness_wg(t, phases) for t in sorted(thetas)}
    w = witness_w(phases)
    w3 = wg[W3_THETA]
    w4 = wg[W4_THETA]
    return WitnessReport(w=w, wg_theta=wg, w3=w3, w4=w4,
                         entangled_flag=(w > 1.0 or min(wg.values()) < 0.0),
                         seed=seed)
