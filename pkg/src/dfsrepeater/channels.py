"""Noise channels and twirls acting on :class:`~dfsrepeater.state.QuantumState`."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .state import (
    BELL_BASIS,
    GateSpec,
    QuantumState,
    StateError,
    _wrap,
    apply_unitary,
)


@dataclass(frozen=True)
class NoiseModel:
    """Gate noise and memory coherence.

    ``p_g1``/``p_g2`` are the depolarizing parameters of single- and two-qubit
    gates (1 means noiseless). ``prep_noise`` treats preparing an ancilla in
    ``|1>`` as a noisy single-qubit flip; ``measurement_noise`` adds a
    single-qubit depolarization in front of every readout.
    """

    p_g1: float = 0.999
    p_g2: float = 0.995
    tau: float = 10e-3
    ideal: bool = False
    prep_noise: bool = True
    measurement_noise: bool = False

    def __post_init__(self):
        for name in ("p_g1", "p_g2"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if not self.tau > 0:
            raise ValueError(f"tau={self.tau} must be positive")

    @property
    def single(self) -> float:
        return 1.0 if self.ideal else self.p_g1

    @property
    def double(self) -> float:
        return 1.0 if self.ideal else self.p_g2

    @classmethod
    def noiseless(cls, tau: float = 10e-3) -> "NoiseModel":
        return cls(p_g1=1.0, p_g2=1.0, tau=tau, ideal=True)


@dataclass(frozen=True)
class DephasingContext:
    """Trap groups sharing one fluctuating field, and the spread sigma = T/tau."""

    trap_groups: tuple[tuple[int, ...], ...] = field(default_factory=tuple)
    sigma: float = 0.0

    def __post_init__(self):
        groups = tuple(tuple(int(q) for q in g) for g in self.trap_groups)
        object.__setattr__(self, "trap_groups", groups)
        flat = [q for g in groups for q in g]
        if len(flat) != len(set(flat)):
            raise StateError(f"trap groups overlap: {groups}")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"sigma={self.sigma} must be finite and >= 0")


def local_depolarizing(state: QuantumState, qubit: int, p_g: float) -> QuantumState:
    """p rho + (1-p)/4 (rho + X rho X + Y rho Y + Z rho Z) on one qubit."""
    if not 0 <= p_g <= 1:
        raise ValueError(f"p_g={p_g} outside [0, 1]")
    n = state.num_qubits
    if not 0 <= qubit < n:
        raise StateError(f"qubit {qubit} outside register of {n}")
    if p_g == 1:
        return state
    t = state.matrix.reshape((2,) * (2 * n))
    # full Pauli twirl = (1/2) I (x) Tr_q: keep the q-diagonal, average it
    diag = (t.take(0, axis=qubit).take(0, axis=n - 1 + qubit)
            + t.take(1, axis=qubit).take(1, axis=n - 1 + qubit)) / 2
    mixed = np.zeros_like(t)
    idx0: list = [slice(None)] * (2 * n)
    idx1: list = [slice(None)] * (2 * n)
    idx0[qubit], idx0[n + qubit] = 0, 0
    idx1[qubit], idx1[n + qubit] = 1, 1
    mixed[tuple(idx0)] = diag
    mixed[tuple(idx1)] = diag
    out = p_g * t + (1 - p_g) * mixed
    return _wrap(out.reshape(state.dim, state.dim))


def depolarize_all(state: QuantumState, qubits: Sequence[int], p_g: float) -> QuantumState:
    for q in qubits:
        state = local_depolarizing(state, q, p_g)
    return state


def noisy_gate(state: QuantumState, g: GateSpec, noise: NoiseModel) -> QuantumState:
    """Depolarize every involved qubit, then apply the ideal gate."""
    if not noise.ideal:
        p = noise.double if g.is_two_qubit else noise.single
        state = depolarize_all(state, g.targets, p)
    return apply_unitary(state, g)


@lru_cache(maxsize=256)
def _dephasing_factors(n: int, groups: tuple, sigma: float) -> np.ndarray:
    idx = np.arange(2**n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))) & 1
    expo = np.zeros((2**n, 2**n))
    for g in groups:
        m = (1 - 2 * bits[:, list(g)]).sum(axis=1)
        expo += (m[:, None] - m[None, :]) ** 2
    f = np.exp(-0.5 * sigma**2 * expo)
    f.flags.writeable = False
    return f


def collective_dephasing(state: QuantumState, ctx: DephasingContext) -> QuantumState:
    """Gaussian-averaged collective Z rotation, independently per trap group.

    Element (a, b) is scaled by exp(-sigma^2 (m_a - m_b)^2 / 2), m being the
    group's sum of Z eigenvalues.
    """
    n = state.num_qubits
    for g in ctx.trap_groups:
        for q in g:
            if not 0 <= q < n:
                raise StateError(f"trap group qubit {q} outside register of {n}")
    if ctx.sigma == 0 or not ctx.trap_groups:
        return state
    f = _dephasing_factors(n, ctx.trap_groups, float(ctx.sigma))
    return _wrap(state.matrix * f)


def _require_pair(state: QuantumState) -> None:
    if state.num_qubits != 2:
        raise StateError(f"expected a 2-qubit state, got {state.num_qubits}")


def bell_populations(state: QuantumState) -> np.ndarray:
    """Diagonal in the Bell basis, ordered (phi+, phi-, psi+, psi-)."""
    _require_pair(state)
    return np.real(np.einsum("ia,ij,ja->a", BELL_BASIS.conj(), state.matrix, BELL_BASIS))


def bell_coherence(state: QuantumState) -> float:
    """Largest off-diagonal magnitude in the Bell basis."""
    _require_pair(state)
    m = BELL_BASIS.conj().T @ state.matrix @ BELL_BASIS
    return float(np.max(np.abs(m - np.diag(np.diag(m)))))


def bell_diagonal_state(populations: Sequence[float]) -> QuantumState:
    pops = np.asarray(populations, dtype=float)
    if pops.shape != (4,):
        raise ValueError("need four Bell populations")
    return _wrap((BELL_BASIS * pops) @ BELL_BASIS.conj().T)


def bell_twirl(state: QuantumState) -> QuantumState:
    """Project onto the Bell-diagonal part, keeping the four populations."""
    return bell_diagonal_state(bell_populations(state))


def werner_state(F: float) -> QuantumState:
    r = (1 - F) / 3
    return bell_diagonal_state([F, r, r, r])


def werner_enforce(state: QuantumState) -> QuantumState:
    """Bell-twirl, then average the three non-phi+ populations."""
    pops = bell_populations(state)
    return werner_state(pops[0])
