"""Dense density-matrix engine for small qubit registers.

Qubit 0 is the most significant bit of the basis index throughout, so the
basis state ``|q0 q1 ... q(n-1)>`` has index ``int("q0q1...", 2)``.
States are immutable: every operation returns a new :class:`QuantumState`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_QUBITS = 8

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
NEG_EIG_TOL = 1e-9
BRANCH_TOL = 1e-12


class StateError(ValueError):
    """Invalid state, gate or register index."""


class CapacityError(StateError):
    """Register would exceed :data:`MAX_QUBITS`."""


class DegenerateStateError(StateError):
    """Both branches of a measurement have vanishing probability."""


# ---------------------------------------------------------------------------
# gates

_SQ2 = 1 / np.sqrt(2)

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2
PHASE_S = np.diag([1, 1j]).astype(complex)
CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ_MATRIX = np.diag([1, 1, 1, -1]).astype(complex)

GATE_MATRICES: dict[str, np.ndarray] = {
    "X": PAULI_X,
    "Y": PAULI_Y,
    "Z": PAULI_Z,
    "H": HADAMARD,
    "S": PHASE_S,
    "CNOT": CNOT_MATRIX,
    "CZ": CZ_MATRIX,
}


@dataclass(frozen=True)
class GateSpec:
    """A named gate on an ordered list of register indices.

    For two-qubit gates the control comes first.
    """

    name: str
    targets: tuple[int, ...]

    def __post_init__(self):
        if self.name not in GATE_MATRICES:
            raise StateError(f"unknown gate {self.name!r}")
        targets = tuple(int(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        arity = 2 if self.name in ("CNOT", "CZ") else 1
        if len(targets) != arity:
            raise StateError(f"{self.name} acts on {arity} qubit(s), got {targets}")
        if len(set(targets)) != len(targets):
            raise StateError(f"repeated target in {targets}")

    @property
    def matrix(self) -> np.ndarray:
        return GATE_MATRICES[self.name]

    @property
    def is_two_qubit(self) -> bool:
        return len(self.targets) == 2


def gate(name: str, *targets: int) -> GateSpec:
    return GateSpec(name, tuple(targets))


# ---------------------------------------------------------------------------
# state type


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Density matrix over an ordered register of up to eight qubits."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dim = m.shape[0]
        if m.ndim != 2 or m.shape[1] != dim or dim < 2 or dim & (dim - 1):
            raise StateError(f"density matrix must be 2^n square, got {m.shape}")
        if dim.bit_length() - 1 > MAX_QUBITS:
            raise CapacityError(f"{dim.bit_length() - 1} qubits exceeds {MAX_QUBITS}")
        if m is self.matrix:
            m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def num_qubits(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def check(self) -> None:
        """Raise :class:`StateError` if the matrix is not a valid density matrix."""
        m = self.matrix
        herm = np.max(np.abs(m - m.conj().T))
        if herm > HERMITIAN_TOL:
            raise StateError(f"not Hermitian (deviation {herm:.3g})")
        tr = np.trace(m)
        if abs(tr - 1) > TRACE_TOL:
            raise StateError(f"trace {tr.real:.12g} != 1")
        low = np.linalg.eigvalsh(m).min()
        if low < -NEG_EIG_TOL:
            raise StateError(f"negative eigenvalue {low:.3g}")

    def __repr__(self):
        return f"QuantumState(num_qubits={self.num_qubits})"


def _wrap(m: np.ndarray) -> QuantumState:
    """Internal constructor: no validation, takes ownership of ``m``."""
    state = object.__new__(QuantumState)
    m.flags.writeable = False
    object.__setattr__(state, "matrix", m)
    return state


def from_matrix(matrix: np.ndarray) -> QuantumState:
    """Validate a density matrix, clamping round-off negative eigenvalues."""
    m = QuantumState(matrix).matrix
    herm = np.max(np.abs(m - m.conj().T))
    if herm > HERMITIAN_TOL:
        raise StateError(f"not Hermitian (deviation {herm:.3g})")
    m = (m + m.conj().T) / 2
    tr = np.trace(m).real
    if abs(tr - 1) > TRACE_TOL:
        raise StateError(f"trace {tr:.12g} != 1")
    w, v = np.linalg.eigh(m)
    if w.min() < -NEG_EIG_TOL:
        raise StateError(f"negative eigenvalue {w.min():.3g}")
    if w.min() < 0:
        w = np.clip(w, 0, None)
        m = (v * w) @ v.conj().T
        m = m / np.trace(m).real
    return QuantumState(m)


def from_pure(amplitudes: Sequence[complex]) -> QuantumState:
    """Rank-one density matrix of a normalised state vector."""
    psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > 1e-10:
        raise StateError(f"state vector norm {norm:.12g} != 1")
    return QuantumState(np.outer(psi, psi.conj()))


def basis_state(bits: Sequence[int]) -> QuantumState:
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int("".join(str(int(b)) for b in bits), 2)] = 1
    return from_pure(psi)


def maximally_mixed(n: int) -> QuantumState:
    return QuantumState(np.eye(2**n, dtype=complex) / 2**n)


# Bell vectors in the order (phi+, phi-, psi+, psi-).
BELL_LABELS = ("phi+", "phi-", "psi+", "psi-")
BELL_VECTORS: dict[str, np.ndarray] = {
    "phi+": np.array([1, 0, 0, 1], dtype=complex) * _SQ2,
    "phi-": np.array([1, 0, 0, -1], dtype=complex) * _SQ2,
    "psi+": np.array([0, 1, 1, 0], dtype=complex) * _SQ2,
    "psi-": np.array([0, 1, -1, 0], dtype=complex) * _SQ2,
}
BELL_BASIS = np.stack([BELL_VECTORS[k] for k in BELL_LABELS], axis=1)
PHI_PLUS = BELL_VECTORS["phi+"]


# ---------------------------------------------------------------------------
# composition and reordering


def tensor(a: QuantumState, b: QuantumState) -> QuantumState:
    """Kronecker product; ``a`` occupies the lower register indices."""
    if a.num_qubits + b.num_qubits > MAX_QUBITS:
        raise CapacityError(
            f"{a.num_qubits} + {b.num_qubits} qubits exceeds {MAX_QUBITS}"
        )
    return _wrap(np.kron(a.matrix, b.matrix))


def permute(state: QuantumState, order: Sequence[int]) -> QuantumState:
    """Reorder qubits: new qubit ``i`` is old qubit ``order[i]``."""
    n = state.num_qubits
    order = [int(q) for q in order]
    if sorted(order) != list(range(n)):
        raise StateError(f"{order} is not a permutation of {n} qubits")
    t = state.matrix.reshape((2,) * (2 * n))
    t = t.transpose(order + [n + q for q in order])
    return _wrap(np.ascontiguousarray(t).reshape(state.dim, state.dim))


def _check_targets(n: int, targets: Sequence[int]) -> None:
    for q in targets:
        if not 0 <= q < n:
            raise StateError(f"qubit index {q} outside register of {n}")
    if len(set(targets)) != len(targets):
        raise StateError(f"repeated target in {tuple(targets)}")


def apply_matrix(
    state: QuantumState, u: np.ndarray, targets: Sequence[int]
) -> QuantumState:
    """Conjugate by a k-qubit operator ``u`` embedded on ``targets``."""
    n = state.num_qubits
    targets = list(targets)
    _check_targets(n, targets)
    k = len(targets)
    uk = np.asarray(u, dtype=complex).reshape((2,) * (2 * k))
    t = state.matrix.reshape((2,) * (2 * n))
    # rows: contract u's input axes with the target row axes
    t = np.tensordot(uk, t, axes=(list(range(k, 2 * k)), targets))
    t = np.moveaxis(t, list(range(k)), targets)
    # columns: rho @ u^dagger
    cols = [n + q for q in targets]
    t = np.tensordot(t, uk.conj(), axes=(cols, list(range(k, 2 * k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), cols)
    return _wrap(np.ascontiguousarray(t).reshape(state.dim, state.dim))


def apply_unitary(state: QuantumState, g: GateSpec) -> QuantumState:
    """rho -> U rho U^dagger with the gate embedded on its targets."""
    return apply_matrix(state, g.matrix, g.targets)


def apply_circuit(state: QuantumState, circuit: Sequence[GateSpec]) -> QuantumState:
    for g in circuit:
        state = apply_unitary(state, g)
    return state


def embed(u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of a k-qubit operator acting on ``targets``."""
    k = len(targets)
    rest = [q for q in range(n) if q not in targets]
    full = np.kron(np.asarray(u, dtype=complex), np.eye(2 ** (n - k)))
    order = list(targets) + rest
    inv = np.argsort(order)
    t = full.reshape((2,) * (2 * n))
    t = t.transpose(list(inv) + [n + i for i in inv])
    return t.reshape(2**n, 2**n)


def circuit_unitary(circuit: Sequence[GateSpec], n: int) -> np.ndarray:
    u = np.eye(2**n, dtype=complex)
    for g in circuit:
        u = embed(g.matrix, g.targets, n) @ u
    return u


# ---------------------------------------------------------------------------
# reduction and measurement


def partial_trace(state: QuantumState, keep: Sequence[int]) -> QuantumState:
    """Reduced state on ``keep`` (sorted, distinct), ordering preserved."""
    keep = [int(q) for q in keep]
    n = state.num_qubits
    if not keep:
        raise StateError("keep list is empty")
    if keep != sorted(set(keep)):
        raise StateError(f"keep list {keep} must be sorted and distinct")
    _check_targets(n, keep)
    if len(keep) == n:
        return state
    drop = [q for q in range(n) if q not in keep]
    t = state.matrix.reshape((2,) * (2 * n))
    # trace pairs from the highest index down so lower axis numbers stay valid
    for q in reversed(drop):
        m = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=m + q)
    d = 2 ** len(keep)
    return _wrap(np.ascontiguousarray(t).reshape(d, d))


def project(
    state: QuantumState, qubits: Sequence[int], bits: Sequence[int]
) -> np.ndarray:
    """Unnormalised block of the remaining qubits after Z-projecting ``qubits``.

    The measured qubits are removed from the register.
    """
    n = state.num_qubits
    t = state.matrix.reshape((2,) * (2 * n))
    idx: list = [slice(None)] * (2 * n)
    for q, b in zip(qubits, bits):
        idx[q] = int(b)
        idx[n + q] = int(b)
    block = t[tuple(idx)]
    d = 2 ** (n - len(qubits))
    return np.ascontiguousarray(block).reshape(d, d)


def _branch(state: QuantumState, qubit: int, basis: str, bit: int):
    n = state.num_qubits
    if basis == "X":
        state = apply_matrix(state, HADAMARD, [qubit])
    t = np.array(state.matrix.reshape((2,) * (2 * n)))
    idx: list = [slice(None)] * (2 * n)
    idx[qubit] = 1 - bit
    t[tuple(idx)] = 0
    idx = [slice(None)] * (2 * n)
    idx[n + qubit] = 1 - bit
    t[tuple(idx)] = 0
    m = t.reshape(state.dim, state.dim)
    p = float(np.trace(m).real)
    post = _wrap(m / p) if p > BRANCH_TOL else None
    if post is not None and basis == "X":
        post = apply_matrix(post, HADAMARD, [qubit])
    return p, post


def measure_branches(state: QuantumState, qubit: int, basis: str = "Z"):
    """Both outcomes of a projective measurement as ``(outcome, p, post)``.

    Outcome ``+1`` is ``|0>`` (Z) or ``|+>`` (X). ``post`` is ``None`` for a
    branch with probability below 1e-12.
    """
    if basis not in ("Z", "X"):
        raise StateError(f"basis must be 'Z' or 'X', got {basis!r}")
    _check_targets(state.num_qubits, [qubit])
    out = []
    for bit, outcome in ((0, +1), (1, -1)):
        p, post = _branch(state, qubit, basis, bit)
        out.append((outcome, p, post))
    if all(p < BRANCH_TOL for _, p, _ in out):
        raise DegenerateStateError("both measurement branches vanish")
    return out


def measure(
    state: QuantumState,
    qubit: int,
    basis: str = "Z",
    outcome: int | None = None,
    rng: np.random.Generator | None = None,
):
    """Projective measurement returning ``(outcome, probability, post_state)``.

    With ``outcome`` given, that branch is selected; otherwise one is sampled.
    """
    branches = measure_branches(state, qubit, basis)
    if outcome is None:
        rng = rng if rng is not None else np.random.default_rng()
        p_plus = branches[0][1]
        outcome = +1 if rng.random() < p_plus else -1
    if outcome not in (+1, -1):
        raise StateError(f"outcome must be +1 or -1, got {outcome}")
    chosen = branches[0] if outcome == +1 else branches[1]
    if chosen[1] < BRANCH_TOL:
        raise DegenerateStateError(f"outcome {outcome} has probability {chosen[1]:.3g}")
    return chosen


def fidelity(state: QuantumState, reference: Sequence[complex]) -> float:
    """<phi|rho|phi> for a pure reference vector."""
    phi = np.asarray(reference, dtype=complex).reshape(-1)
    if phi.shape[0] != state.dim:
        raise StateError(f"reference has length {phi.shape[0]}, state dim {state.dim}")
    return float(np.real(phi.conj() @ state.matrix @ phi))
