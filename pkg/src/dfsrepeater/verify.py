"""Oracle suites comparing the simulator against independent computations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import quad_vec

from . import protocol as pr
from . import state as st
from .channels import DephasingContext, NoiseModel, bell_populations, collective_dephasing
from .timing import expected_chain_time, sample_chain_attempts


@dataclass
class SuiteResult:
    name: str
    passed: bool
    lines: list[str] = field(default_factory=list)

    def report(self) -> str:
        head = f"[{'PASS' if self.passed else 'FAIL'}] {self.name}"
        return "\n".join([head] + [f"    {line}" for line in self.lines])


def random_density_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def dephasing_by_quadrature(rho: np.ndarray, sigma: float) -> np.ndarray:
    """Average exp(-i theta sum Z) rho exp(+i theta sum Z) over a Gaussian theta."""
    n = int(np.log2(rho.shape[0]))
    idx = np.arange(2**n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))) & 1
    m = (1 - 2 * bits).sum(axis=1).astype(float)

    def integrand(z):
        phase = np.exp(-1j * sigma * z * m)
        rotated = phase[:, None] * rho * phase.conj()[None, :]
        return np.concatenate([rotated.real.ravel(), rotated.imag.ravel()]) * np.exp(-z * z / 2) / np.sqrt(2 * np.pi)

    # theta = sigma z with z standard normal; tails beyond 12 are below 1e-32
    val, _ = quad_vec(integrand, -12.0, 12.0, epsabs=1e-11, epsrel=1e-10, limit=2000)
    half = val.size // 2
    return (val[:half] + 1j * val[half:]).reshape(rho.shape)


def dephasing_suite(num_states: int = 50, sigmas=(0.1, 1.0, 10.0), tol: float = 1e-8,
                    seed: int = 2024) -> SuiteResult:
    rng = np.random.default_rng(seed)
    lines, worst = [], 0.0
    for i in range(num_states):
        n = 1 + i % 4
        rho = random_density_matrix(n, rng)
        devs = []
        for sigma in sigmas:
            ctx = DephasingContext(trap_groups=(tuple(range(n)),), sigma=sigma)
            analytic = collective_dephasing(st.from_matrix(rho), ctx).matrix
            devs.append(float(np.abs(analytic - dephasing_by_quadrature(rho, sigma)).max()))
        worst = max(worst, *devs)
        lines.append(f"state {i:2d} ({n} qubits): max deviation "
                     + ", ".join(f"{d:.1e}" for d in devs))
    lines.append(f"worst deviation {worst:.2e} (tolerance {tol:g})")
    return SuiteResult("dephasing", worst <= tol, lines)


def timing_suite(trials: int = 100_000, seed: int = 1234, rtol: float = 0.01) -> SuiteResult:
    lines, ok = [], True
    for k, (p, n) in enumerate([(0.5, 2), (0.5, 10), (0.01, 2), (0.01, 10)]):
        exact = expected_chain_time(p, n, 1.0, 1.0)
        mc = float(sample_chain_attempts(p, n, trials, (seed, k)).mean())
        rel = (mc - exact) / exact
        ok &= abs(rel) <= rtol
        lines.append(f"P_link={p}, N={n}: closed form {exact:.4f}, Monte Carlo {mc:.4f}, "
                     f"relative error {rel:+.3%}")
    return SuiteResult("timing", ok, lines)


def tables_suite(tables: Mapping[object, Mapping] | None = None) -> SuiteResult:
    """Regenerate outcome tables by enumeration and compare with the transcriptions."""
    tables = tables or {1: pr.TABLE_V1, 2: pr.TABLE_V2, "physical": pr.TABLE_PHYSICAL}
    lines, ok = [], True
    for version, stored in tables.items():
        derived = pr.generate_outcome_table(version)
        diff = sorted(k for k in set(derived) | set(stored) if derived.get(k) != stored.get(k))
        ok &= not diff
        lines.append(f"version {version}: {len(derived)} outcomes, "
                     + ("match" if not diff else f"mismatched outcomes {diff}"))
    return SuiteResult("tables", ok, lines)


_LOGICAL_TARGETS = {
    "S_L": (1, np.diag([1, 1j])),
    "H_L": (1, st.HADAMARD),
    "CZ_L": (2, np.diag([1, 1, 1, -1]).astype(complex)),
}


def up_to_phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """min over phi of max |a - e^{i phi} b|, using the phase of the overlap."""
    overlap = np.vdot(b, a)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.abs(a - phase * b).max())


def clifford_suite(tol: float = 1e-10) -> SuiteResult:
    lines, ok = [], True
    for name, (k, target) in _LOGICAL_TARGETS.items():
        n = 2 * k
        circuit = pr.logical_clifford(name, first=(0, 1), second=(2, 3))
        u = st.circuit_unitary(circuit, n)
        basis = pr.codespace_basis(k)
        image = u @ basis
        leak = float(np.abs(image - basis @ (basis.conj().T @ image)).max())
        restricted = basis.conj().T @ image
        dev = up_to_phase_distance(restricted, target)
        ok &= leak <= tol and dev <= tol
        lines.append(f"{name}: codespace leakage {leak:.1e}, deviation from target "
                     f"up to global phase {dev:.1e}")
    return SuiteResult("clifford", ok, lines)


def _logical_populations(state: st.QuantumState) -> np.ndarray:
    return np.array([pr.logical_fidelity(state, label) for label in st.BELL_LABELS])


def purification_suite(fidelities=None, tol: float = 1e-10) -> SuiteResult:
    fidelities = fidelities if fidelities is not None else np.linspace(0.55, 0.99, 12)
    ideal = NoiseModel.noiseless()
    lines, ok = [], True
    for F in fidelities:
        pops = np.array([F, (1 - F) / 3, (1 - F) / 3, (1 - F) / 3])
        p_map, out_map = pr.deutsch_map(pops)
        werner = st.from_matrix(sum(w * np.outer(v, v.conj())
                                    for w, v in zip(pops, st.BELL_VECTORS.values())))
        p_phys, out_phys = pr.purification_round(werner, werner, ideal, level="physical")
        enc = pr.encoded_link(float(F), ideal)
        p_log, out_log = pr.purification_round(enc, enc, ideal, level="logical")
        dev_phys = max(abs(p_phys - p_map), np.abs(bell_populations(out_phys) - out_map).max())
        dev_log = max(abs(p_log - p_map), np.abs(_logical_populations(out_log) - out_map).max())
        gain = out_map[0] - F
        ok &= dev_phys <= tol and dev_log <= tol and gain > 0
        lines.append(f"F={F:.3f}: F'={out_map[0]:.6f}, p={p_map:.6f}, physical deviation "
                     f"{dev_phys:.1e}, logical deviation {dev_log:.1e}")
    return SuiteResult("purification", ok, lines)


SUITES: dict[str, Callable[[], SuiteResult]] = {
    "dephasing": dephasing_suite,
    "timing": timing_suite,
    "tables": tables_suite,
    "clifford": clifford_suite,
    "purification": purification_suite,
}


def run_suites(names=None, out=print) -> bool:
    """Run the named suites (all by default), print each report; True iff all pass."""
    names = list(names) if names else list(SUITES)
    all_ok = True
    for name in names:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
        try:
            res = SUITES[name]()
        except Exception as exc:  # a crashing oracle counts as a failure
            res = SuiteResult(name, False, [f"{type(exc).__name__}: {exc}"])
        out(res.report())
        all_ok &= res.passed
    return all_ok
