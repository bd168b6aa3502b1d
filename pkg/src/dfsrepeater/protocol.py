"""Repeater protocol: links, DFS encoding, Bell measurements, chain composition.

Logical qubits live in the decoherence-free subspace ``|0_L> = |01>``,
``|1_L> = |10>`` of a (data, ancilla) pair of ions. Each physical register used
by the chain is laid out as consecutive (data, ancilla) pairs, ends first::

    DFS chain, joint step:  A_d A_a | B_d B_a  C_d C_a | D_d D_a
    plain chain, joint step: A | B  C | D

``B`` and ``C`` sit in the same trap and are consumed by the swap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import state as st
from .channels import (
    DephasingContext,
    NoiseModel,
    bell_coherence,
    bell_populations,
    collective_dephasing,
    depolarize_all,
    local_depolarizing,
    noisy_gate,
    werner_enforce,
    werner_state,
)
from .state import GateSpec, QuantumState, StateError, gate

LABELS = st.BELL_LABELS

# Pauli frame restoring phi+ on the far end, per projected Bell state.
CORRECTIONS = {"phi+": "I", "phi-": "Z", "psi+": "X", "psi-": "XZ"}

# Logical Bell-measurement outcome tables, keyed by the readouts of the
# swap qubits labelled 1, 2, 3, 4; +1 is |0> for Z and |+> for X readouts.
# Qubits 1 and 3 are the data and ancilla of one logical qubit, 2 and 4 of
# the other.
_P, _M = +1, -1
TABLE_V1: dict[tuple[int, int, int, int], str] = {
    (_P, _M, _P, _M): "phi+",
    (_M, _M, _M, _M): "phi+",
    (_P, _M, _M, _M): "phi-",
    (_M, _M, _P, _M): "phi-",
    (_P, _P, _P, _P): "psi+",
    (_M, _P, _M, _P): "psi+",
    (_P, _P, _M, _P): "psi-",
    (_M, _P, _P, _P): "psi-",
}

TABLE_V2: dict[tuple[int, int, int, int], str] = {
    (_P, _P, _P, _P): "phi+",
    (_P, _M, _M, _P): "phi+",
    (_M, _P, _M, _P): "phi+",
    (_M, _M, _P, _P): "phi+",
    (_P, _P, _M, _P): "phi-",
    (_P, _M, _P, _P): "phi-",
    (_M, _P, _P, _P): "phi-",
    (_M, _M, _M, _P): "phi-",
    (_P, _P, _P, _M): "psi+",
    (_P, _M, _M, _M): "psi+",
    (_M, _P, _M, _M): "psi+",
    (_M, _M, _P, _M): "psi+",
    (_P, _P, _M, _M): "psi-",
    (_P, _M, _P, _M): "psi-",
    (_M, _P, _P, _M): "psi-",
    (_M, _M, _M, _M): "psi-",
}

# Physical swap: CNOT(B->C), H(B), then Z readouts of (B, C).
TABLE_PHYSICAL: dict[tuple[int, int], str] = {
    (_P, _P): "phi+",
    (_M, _P): "phi-",
    (_P, _M): "psi+",
    (_M, _M): "psi-",
}

# swap label -> register index for the 8-qubit joint step
CHAIN_QUBIT_MAP = {1: 2, 3: 3, 2: 4, 4: 5}


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class ChainConfig:
    num_links: int
    link_length_km: float = 1.0
    encoding: str = "dfs"
    swap_version: int | None = 1
    storage_time_s: float | str = 1.0
    link_fidelity: float = 0.99
    noisy_decoding: bool = True
    order: str = "left"

    def __post_init__(self):
        if int(self.num_links) != self.num_links or self.num_links < 1:
            raise ValueError(f"num_links={self.num_links} must be an integer >= 1")
        if not self.link_length_km > 0:
            raise ValueError(f"link_length_km={self.link_length_km} must be positive")
        if self.encoding not in ("none", "dfs"):
            raise ValueError(f"encoding must be 'none' or 'dfs', got {self.encoding!r}")
        if self.encoding == "dfs" and self.swap_version not in (1, 2):
            raise ValueError("DFS chains need swap_version 1 or 2")
        if self.encoding == "none" and self.swap_version is not None:
            raise ValueError("swap_version only applies to DFS chains")
        if isinstance(self.storage_time_s, str):
            if self.storage_time_s != "auto":
                raise ValueError(f"storage_time_s must be seconds or 'auto'")
        elif self.storage_time_s < 0:
            raise ValueError("storage_time_s must be >= 0")
        if not 0.25 <= self.link_fidelity <= 1:
            raise ValueError(f"link_fidelity={self.link_fidelity} outside [1/4, 1]")
        if self.order not in ("left", "right"):
            raise ValueError(f"order must be 'left' or 'right', got {self.order!r}")

    @property
    def total_distance_km(self) -> float:
        return self.num_links * self.link_length_km


@dataclass(frozen=True)
class SwapResult:
    outcomes: tuple[int, ...]
    projected_bell: str | None
    correction: str | None
    accepted: bool
    branch_probability: float


@dataclass(frozen=True)
class ChainResult:
    fidelity: float
    acceptance_probability: float
    bell_diagonal: tuple[float, float, float, float]
    num_links: int = 1
    storage_time_s: float = 0.0
    raw_populations: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    bell_coherence: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def werner_parameter(self) -> float:
        """Visibility p of the equivalent Werner state, F = (3p + 1)/4."""
        return (4 * self.fidelity - 1) / 3

    @property
    def local_depolarizing_parameter(self) -> float:
        """p such that depolarizing both halves of phi+ with p gives this state."""
        return float(np.sqrt(max(self.werner_parameter, 0.0)))


# ---------------------------------------------------------------------------
# links and encoding


def elementary_link(F: float) -> QuantumState:
    """Werner pair of fidelity ``F`` between neighbouring nodes."""
    if not 0.25 <= F <= 1:
        raise ValueError(f"F={F} outside [1/4, 1]")
    return werner_state(F)


def dfs_encode(state: QuantumState, data_qubit: int, noise: NoiseModel) -> QuantumState:
    """Append an ancilla in |1> and CNOT the data qubit onto it.

    The ancilla is the new last qubit of the register.
    """
    n = state.num_qubits
    if not 0 <= data_qubit < n:
        raise StateError(f"data qubit {data_qubit} outside register of {n}")
    out = st.tensor(state, st.basis_state([1]))
    if noise.prep_noise and not noise.ideal:
        out = local_depolarizing(out, n, noise.single)
    return noisy_gate(out, gate("CNOT", data_qubit, n), noise)


def dfs_decode(
    state: QuantumState, logical_pair: Sequence[int], noise: NoiseModel
) -> QuantumState:
    """Undo the encoding CNOT and trace the ancilla out (no post-selection)."""
    d, a = logical_pair
    out = noisy_gate(state, gate("CNOT", d, a), noise)
    keep = [q for q in range(state.num_qubits) if q != a]
    return st.partial_trace(out, keep)


def _permute_pairs(state: QuantumState) -> QuantumState:
    # (A_d, B_d, A_a, B_a) -> (A_d, A_a, B_d, B_a)
    return st.permute(state, [0, 2, 1, 3])


@lru_cache(maxsize=64)
def encoded_link(F: float, noise: NoiseModel) -> QuantumState:
    """Werner link with both ends DFS-encoded, laid out (A_d, A_a, B_d, B_a)."""
    s = elementary_link(F)
    s = dfs_encode(s, 0, noise)
    s = dfs_encode(s, 1, noise)
    return _permute_pairs(s)


def logical_bell_vector(label: str) -> np.ndarray:
    """Logical Bell state on (A_d, A_a, B_d, B_a)."""
    zero, one = np.array([0, 1, 0, 0]), np.array([0, 0, 1, 0])
    phys = st.BELL_VECTORS[label]
    comps = {(0, 0): (zero, zero), (0, 1): (zero, one), (1, 0): (one, zero), (1, 1): (one, one)}
    v = np.zeros(16, dtype=complex)
    for (i, j), (a, b) in comps.items():
        v += phys[2 * i + j] * np.kron(a, b)
    return v


def logical_fidelity(state: QuantumState, label: str = "phi+") -> float:
    return st.fidelity(state, logical_bell_vector(label))


# ---------------------------------------------------------------------------
# Bell measurements


def _apply_correction(block: np.ndarray, correction: str, pair: Sequence[int], n: int,
                      logical: bool) -> np.ndarray:
    s = st._wrap(block)
    if "Z" in correction:
        s = st.apply_matrix(s, st.PAULI_Z, [pair[0]])
    if "X" in correction:
        targets = list(pair) if logical else [pair[0]]
        for q in targets:
            s = st.apply_matrix(s, st.PAULI_X, [q])
    return np.array(s.matrix)


def _bell_measurement(
    state: QuantumState,
    gates: Sequence[GateSpec],
    measured: Sequence[int],
    x_basis: Sequence[int],
    table: Mapping[tuple, str],
    correct_on: Sequence[int],
    noise: NoiseModel,
    logical: bool,
):
    for g in gates:
        state = noisy_gate(state, g, noise)
    for q in x_basis:
        state = noisy_gate(state, gate("H", q), noise)
    if noise.measurement_noise and not noise.ideal:
        state = depolarize_all(state, measured, noise.single)

    n = state.num_qubits
    survivors = [q for q in range(n) if q not in measured]
    pair = [survivors.index(q) for q in correct_on]

    results = []
    for bits in itertools.product((0, 1), repeat=len(measured)):
        outcomes = tuple(+1 if b == 0 else -1 for b in bits)
        block = st.project(state, measured, bits)
        p = float(np.trace(block).real)
        label = table.get(outcomes)
        accepted = label is not None
        correction = CORRECTIONS[label] if accepted else None
        if p > st.BRANCH_TOL:
            if accepted and correction != "I":
                block = _apply_correction(block, correction, pair, n, logical)
            post = st._wrap(block / p)
        else:
            post = None
        results.append((SwapResult(outcomes, label, correction, accepted, max(p, 0.0)), post))
    return results


def _check_map(state: QuantumState, qubit_map: Mapping[int, int] | None, n_expected: int):
    if state.num_qubits != n_expected:
        raise StateError(f"expected a {n_expected}-qubit register, got {state.num_qubits}")
    qubit_map = dict(CHAIN_QUBIT_MAP if qubit_map is None else qubit_map)
    if sorted(qubit_map) != [1, 2, 3, 4]:
        raise StateError(f"qubit_map must assign labels 1-4, got {sorted(qubit_map)}")
    return qubit_map


def _default_correct_on(n: int, measured: Sequence[int], logical: bool) -> tuple[int, ...]:
    survivors = [q for q in range(n) if q not in measured]
    return tuple(survivors[-2:]) if logical else (survivors[-1],)


def logical_bsm_v1(
    state: QuantumState,
    qubit_map: Mapping[int, int] | None = None,
    noise: NoiseModel | None = None,
    table: Mapping[tuple, str] = TABLE_V1,
    correct_on: Sequence[int] | None = None,
):
    """Post-selected logical Bell measurement with two CNOTs.

    Returns one ``(SwapResult, post_state)`` per readout pattern. Accepted
    branches carry the Pauli-corrected state of the surviving qubits;
    ``post_state`` is ``None`` for branches of vanishing weight.
    """
    noise = noise if noise is not None else NoiseModel.noiseless()
    qm = _check_map(state, qubit_map, 8)
    measured = [qm[k] for k in (1, 2, 3, 4)]
    correct_on = correct_on or _default_correct_on(8, measured, True)
    gates = [gate("CNOT", qm[3], qm[2]), gate("CNOT", qm[1], qm[4])]
    return _bell_measurement(state, gates, measured, [qm[1], qm[3]], table,
                             correct_on, noise, logical=True)


def logical_bsm_v2(
    state: QuantumState,
    qubit_map: Mapping[int, int] | None = None,
    noise: NoiseModel | None = None,
    table: Mapping[tuple, str] = TABLE_V2,
    correct_on: Sequence[int] | None = None,
):
    """Deterministic logical Bell measurement with a single CNOT."""
    noise = noise if noise is not None else NoiseModel.noiseless()
    qm = _check_map(state, qubit_map, 8)
    measured = [qm[k] for k in (1, 2, 3, 4)]
    correct_on = correct_on or _default_correct_on(8, measured, True)
    gates = [gate("CNOT", qm[3], qm[4])]
    return _bell_measurement(state, gates, measured, [qm[1], qm[2], qm[3]], table,
                             correct_on, noise, logical=True)


def physical_bsm(
    state: QuantumState,
    noise: NoiseModel | None = None,
    pair: Sequence[int] = (1, 2),
    correct_on: int | None = None,
    table: Mapping[tuple, str] = TABLE_PHYSICAL,
):
    """Deterministic Bell measurement on two co-located physical qubits."""
    noise = noise if noise is not None else NoiseModel.noiseless()
    if state.num_qubits != 4:
        raise StateError(f"expected a 4-qubit register, got {state.num_qubits}")
    b, c = pair
    correct = (correct_on,) if correct_on is not None else _default_correct_on(4, pair, False)
    gates = [gate("CNOT", b, c)]
    return _bell_measurement(state, gates, [b, c], [b], table, correct, noise, logical=False)


def mix_accepted(branches) -> tuple[QuantumState, float]:
    """Probability-weighted mixture of accepted branches, renormalised."""
    acc = 0.0
    total = None
    for res, post in branches:
        if not res.accepted or post is None:
            continue
        term = res.branch_probability * post.matrix
        total = term if total is None else total + term
        acc += res.branch_probability
    if total is None or acc <= 0:
        raise StateError("no accepted measurement branch")
    return st._wrap(total / acc), acc


def generate_outcome_table(version: int | str) -> dict[tuple, str]:
    """Derive an outcome table by enumerating branches on ideal Bell inputs."""
    noise = NoiseModel.noiseless()
    if version == "physical":
        phi = st.from_pure(st.PHI_PLUS)
        joint = st.tensor(phi, phi)
        branches = physical_bsm(joint, noise, table={})
        refs = {k: st.BELL_VECTORS[k] for k in LABELS}
    else:
        phi = st.from_pure(logical_bell_vector("phi+"))
        joint = st.tensor(phi, phi)
        bsm = {1: logical_bsm_v1, 2: logical_bsm_v2}[int(version)]
        branches = bsm(joint, noise=noise, table={})
        refs = {k: logical_bell_vector(k) for k in LABELS}
    table = {}
    for res, post in branches:
        if res.branch_probability < 1e-10:
            continue
        overlaps = {k: st.fidelity(post, v) for k, v in refs.items()}
        best = max(overlaps, key=overlaps.get)
        if overlaps[best] < 1 - 1e-9:
            raise StateError(f"branch {res.outcomes} is not a Bell state")
        table[res.outcomes] = best
    return table


# ---------------------------------------------------------------------------
# chain composition


def resolve_storage_time(config: ChainConfig, hw=None) -> float:
    """Memory time T for the chain; ``auto`` derives it from the waiting time."""
    if not isinstance(config.storage_time_s, str):
        return float(config.storage_time_s)
    if hw is None:
        raise ValueError("storage_time_s='auto' needs hardware parameters")
    from .timing import expected_chain_time, link_success_probability

    p_link = link_success_probability(hw, config.link_length_km)
    t = expected_chain_time(p_link, config.num_links, config.link_length_km, hw.c_fiber_km_s)
    return max(1.0, t) if config.encoding == "dfs" else t


def _finish(cur: QuantumState, config: ChainConfig, noise: NoiseModel, sigma: float,
            num_links: int, acceptance: float, storage: float) -> ChainResult:
    if config.encoding == "dfs":
        ends = DephasingContext(((0, 1), (2, 3)), sigma)
        cur = collective_dephasing(cur, ends)
        dec_noise = noise if config.noisy_decoding else NoiseModel.noiseless(noise.tau)
        cur = dfs_decode(cur, (2, 3), dec_noise)
        cur = dfs_decode(cur, (0, 1), dec_noise)
    else:
        cur = collective_dephasing(cur, DephasingContext(((0,), (1,)), sigma))
    raw = bell_populations(cur)
    coherence = bell_coherence(cur)
    final = werner_enforce(cur)
    pops = bell_populations(final)
    return ChainResult(
        fidelity=float(pops[0]),
        acceptance_probability=float(acceptance),
        bell_diagonal=tuple(float(x) for x in pops),
        num_links=num_links,
        storage_time_s=storage,
        raw_populations=tuple(float(x) for x in raw),
        bell_coherence=coherence,
    )


def chain_profile(
    config: ChainConfig, noise: NoiseModel, storage_time_s: float | None = None,
    hw=None,
) -> Iterator[ChainResult]:
    """Yield the chain result for 1, 2, ..., ``config.num_links`` links.

    Every node is dephased exactly once with sigma = T/tau, so the result
    after ``k`` links equals a fresh ``k``-link simulation.
    """
    storage = (resolve_storage_time(config, hw) if storage_time_s is None
               else float(storage_time_s))
    sigma = storage / noise.tau
    dfs = config.encoding == "dfs"
    if dfs:
        link = encoded_link(float(config.link_fidelity), noise)
        middle = DephasingContext(((2, 3, 4, 5),), sigma)
        bsm = logical_bsm_v1 if config.swap_version == 1 else logical_bsm_v2
    else:
        link = elementary_link(config.link_fidelity)
        middle = DephasingContext(((1, 2),), sigma)

    cur = link
    acceptance = 1.0
    yield _finish(cur, config, noise, sigma, 1, acceptance, storage)
    for k in range(2, config.num_links + 1):
        joint = st.tensor(cur, link) if config.order == "left" else st.tensor(link, cur)
        joint = collective_dephasing(joint, middle)
        branches = bsm(joint, noise=noise) if dfs else physical_bsm(joint, noise)
        cur, p_acc = mix_accepted(branches)
        acceptance *= p_acc
        yield _finish(cur, config, noise, sigma, k, acceptance, storage)


def simulate_chain(config: ChainConfig, hw=None, noise: NoiseModel | None = None) -> ChainResult:
    """End-to-end decoded Bell-pair fidelity and swap acceptance of a chain."""
    noise = noise if noise is not None else NoiseModel()
    result = None
    for result in chain_profile(config, noise, hw=hw):
        pass
    return result


# ---------------------------------------------------------------------------
# logical Clifford group and purification


def logical_clifford(
    name: str, first: Sequence[int] = (0, 1), second: Sequence[int] = (2, 3)
) -> list[GateSpec]:
    """Physical circuit (in application order) of a logical Clifford generator.

    ``first`` and ``second`` are the (data, ancilla) indices of the logical
    qubits; single-qubit generators act on ``first``.
    """
    d, a = first
    if name == "S_L":
        return [gate("S", d)]
    if name == "H_L":
        # [(HSHZ) x (HSH)] CNOT(d->a) [(HSX) x X], rightmost first
        return [
            gate("X", d), gate("S", d), gate("H", d),
            gate("X", a),
            gate("CNOT", d, a),
            gate("Z", d), gate("H", d), gate("S", d), gate("H", d),
            gate("H", a), gate("S", a), gate("H", a),
        ]
    if name == "CZ_L":
        return [gate("CZ", d, second[0])]
    raise ValueError(f"unknown logical generator {name!r}")


def codespace_basis(num_logical: int) -> np.ndarray:
    """Columns are the encoded computational basis states, logical qubit 0 first."""
    zero = np.array([0, 1, 0, 0], dtype=complex)
    one = np.array([0, 0, 1, 0], dtype=complex)
    cols = []
    for bits in itertools.product((0, 1), repeat=num_logical):
        v = np.array([1], dtype=complex)
        for b in bits:
            v = np.kron(v, one if b else zero)
        cols.append(v)
    return np.stack(cols, axis=1)


def logical_measure_z(state: QuantumState, logical_pair: Sequence[int]):
    """Logical Z readout via the data qubit; returns ``[(bit, p, post), ...]``."""
    d, a = logical_pair
    n = state.num_qubits
    for q in (d, a):
        if not 0 <= q < n:
            raise StateError(f"qubit {q} outside register of {n}")
    if d == a:
        raise StateError("logical pair needs two distinct qubits")
    return [(0 if outcome == +1 else 1, p, post)
            for outcome, p, post in st.measure_branches(state, d, "Z")]


def _deutsch_circuit(level: str) -> tuple[list[GateSpec], list[int], list[int]]:
    """Circuit on (pair_a, pair_b), measured qubits, kept qubits."""
    if level == "physical":
        a1, b1, a2, b2 = 0, 1, 2, 3

        def rx_plus(q):
            return [gate("H", q), gate("S", q), gate("H", q)]

        def rx_minus(q):
            return [gate("H", q)] + [gate("S", q)] * 3 + [gate("H", q)]

        def cnot(c, t):
            return [gate("H", t), gate("CZ", c, t), gate("H", t)]

        circuit = []
        for q in (a1, a2):
            circuit += rx_plus(q)
        for q in (b1, b2):
            circuit += rx_minus(q)
        circuit += cnot(a1, a2) + cnot(b1, b2)
        return circuit, [a2, b2], [a1, b1]

    A1, B1, A2, B2 = (0, 1), (2, 3), (4, 5), (6, 7)

    def h(q):
        return logical_clifford("H_L", q)

    def s(q):
        return logical_clifford("S_L", q)

    def rx_plus(q):
        return h(q) + s(q) + h(q)

    def rx_minus(q):
        return h(q) + s(q) * 3 + h(q)

    def cnot(c, t):
        return h(t) + logical_clifford("CZ_L", c, t) + h(t)

    circuit = []
    for q in (A1, A2):
        circuit += rx_plus(q)
    for q in (B1, B2):
        circuit += rx_minus(q)
    circuit += cnot(A1, A2) + cnot(B1, B2)
    return circuit, [A2[0], B2[0]], [0, 1, 2, 3]


def purification_round(
    pair_a: QuantumState,
    pair_b: QuantumState,
    noise: NoiseModel | None = None,
    level: str = "physical",
) -> tuple[float, QuantumState]:
    """One recurrence round: keep ``pair_a`` when the target readouts agree.

    ``level='logical'`` expects DFS-encoded pairs laid out (A_d, A_a, B_d, B_a)
    and runs every gate through the logical generators.
    """
    noise = noise if noise is not None else NoiseModel.noiseless()
    if level not in ("physical", "logical"):
        raise ValueError(f"level must be 'physical' or 'logical', got {level!r}")
    width = 2 if level == "physical" else 4
    if pair_a.num_qubits != width or pair_b.num_qubits != width:
        raise StateError(f"{level} purification needs two {width}-qubit pairs")
    circuit, measured, keep = _deutsch_circuit(level)
    joint = st.tensor(pair_a, pair_b)
    for g in circuit:
        joint = noisy_gate(joint, g, noise)
    if noise.measurement_noise and not noise.ideal:
        joint = depolarize_all(joint, measured, noise.single)
    kept = None
    for bits in ((0, 0), (1, 1)):
        block = st.project(joint, measured, bits)
        # measured data qubits are gone; trace the remaining pair_b ancillas
        rest = st._wrap(block)
        if level == "logical":
            rest = st.partial_trace(rest, keep)
        kept = rest.matrix if kept is None else kept + rest.matrix
    p = float(np.trace(kept).real)
    if p <= st.BRANCH_TOL:
        raise st.DegenerateStateError("purification never succeeds on this input")
    return p, st._wrap(kept / p)


def deutsch_map(pops: Sequence[float]) -> tuple[float, np.ndarray]:
    """Recurrence map on Bell-diagonal populations ordered (phi+, phi-, psi+, psi-).

    Returns the success probability and the output populations.
    """
    phi_p, phi_m, psi_p, psi_m = pops
    a, b, c, d = phi_p, psi_m, psi_p, phi_m
    norm = (a + b) ** 2 + (c + d) ** 2
    out_a = (a * a + b * b) / norm
    out_b = 2 * c * d / norm
    out_c = (c * c + d * d) / norm
    out_d = 2 * a * b / norm
    return norm, np.array([out_a, out_d, out_c, out_b])


def chsh_value(F: float) -> float:
    """Maximal CHSH value of a Werner state of fidelity ``F``."""
    if not 0.25 <= F <= 1:
        raise ValueError(f"F={F} outside [1/4, 1]")
    return 2 * np.sqrt(2) * (4 * F - 1) / 3


CHSH_THRESHOLD_FIDELITY = (3 / np.sqrt(2) + 1) / 4
