import numpy as np
import pytest

from dfsrepeater import protocol as pr
from dfsrepeater import state as st
from dfsrepeater.channels import DephasingContext, NoiseModel, collective_dephasing
from dfsrepeater.verify import random_density_matrix

IDEAL = NoiseModel.noiseless()


def encoded_random_state(num_logical, seed):
    basis = pr.codespace_basis(num_logical)
    rho_l = random_density_matrix(num_logical, np.random.default_rng(seed))
    return st.from_matrix(basis @ rho_l @ basis.conj().T)


@pytest.mark.parametrize("version, stored", [
    (1, pr.TABLE_V1), (2, pr.TABLE_V2), ("physical", pr.TABLE_PHYSICAL),
])
def test_outcome_tables_regenerate(version, stored):
    assert pr.generate_outcome_table(version) == stored


def test_v2_table_phi_sector_set_by_fourth_readout():
    for outcomes, label in pr.TABLE_V2.items():
        assert label.startswith("phi") == (outcomes[3] == +1)


def test_corrections_are_paulis_restoring_phi_plus():
    assert pr.CORRECTIONS == {"phi+": "I", "phi-": "Z", "psi+": "X", "psi-": "XZ"}


def test_encoding_maps_into_codespace():
    for F in (1.0, 0.9):
        s = pr.encoded_link(F, IDEAL)
        basis = pr.codespace_basis(2)
        proj = basis @ basis.conj().T
        assert np.allclose(proj @ s.matrix @ proj, s.matrix, atol=1e-14)
    assert np.isclose(pr.logical_fidelity(pr.encoded_link(1.0, IDEAL)), 1)


def test_encoded_link_decodes_back():
    F = 0.93
    s = pr.encoded_link(F, IDEAL)
    s = pr.dfs_decode(s, (2, 3), IDEAL)
    s = pr.dfs_decode(s, (0, 1), IDEAL)
    assert np.allclose(s.matrix, pr.elementary_link(F).matrix, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_v1_rejects_nothing_inside_codespace(seed):
    s = encoded_random_state(4, seed)
    rejected = sum(res.branch_probability
                   for res, _ in pr.logical_bsm_v1(s, noise=IDEAL) if not res.accepted)
    assert rejected <= 1e-12


def test_v1_detects_single_bit_flip():
    s = encoded_random_state(4, 0)
    flipped = st.apply_unitary(s, st.gate("X", pr.CHAIN_QUBIT_MAP[1]))
    accepted = sum(res.branch_probability
                   for res, _ in pr.logical_bsm_v1(flipped, noise=IDEAL) if res.accepted)
    assert accepted <= 1e-12


def test_v2_accepts_every_outcome():
    s = encoded_random_state(4, 1)
    branches = pr.logical_bsm_v2(s, noise=IDEAL)
    assert all(res.accepted for res, _ in branches)
    assert np.isclose(sum(res.branch_probability for res, _ in branches), 1)


def test_bsm_rejects_wrong_register():
    with pytest.raises(st.StateError):
        pr.logical_bsm_v1(st.maximally_mixed(6))
    with pytest.raises(st.StateError):
        pr.physical_bsm(st.maximally_mixed(3))


@pytest.mark.parametrize("encoding, version", [("none", None), ("dfs", 1), ("dfs", 2)])
def test_ideal_chain_is_perfect(encoding, version):
    cfg = pr.ChainConfig(num_links=8, encoding=encoding, swap_version=version,
                         storage_time_s=0.0, link_fidelity=1.0)
    for res in pr.chain_profile(cfg, IDEAL):
        assert abs(res.fidelity - 1) <= 1e-10
        assert abs(res.acceptance_probability - 1) <= 1e-10


def test_dfs_chain_immune_to_storage_without_gate_noise():
    cfg = pr.ChainConfig(num_links=4, storage_time_s=100.0, link_fidelity=1.0)
    assert abs(pr.simulate_chain(cfg, noise=IDEAL).fidelity - 1) <= 1e-10


def test_left_and_right_composition_agree():
    base = pr.ChainConfig(num_links=5, swap_version=1)
    left = pr.simulate_chain(base)
    right = pr.simulate_chain(pr.ChainConfig(num_links=5, swap_version=1, order="right"))
    assert abs(left.fidelity - right.fidelity) < 1e-12
    assert abs(left.acceptance_probability - right.acceptance_probability) < 1e-12


def test_chain_stays_bell_diagonal():
    for version in (1, 2):
        res = pr.simulate_chain(pr.ChainConfig(num_links=4, swap_version=version))
        assert res.bell_coherence < 1e-10


def test_profile_matches_fresh_simulations():
    cfg = pr.ChainConfig(num_links=4, swap_version=2)
    profile = list(pr.chain_profile(cfg, NoiseModel()))
    fresh = pr.simulate_chain(pr.ChainConfig(num_links=3, swap_version=2))
    assert abs(profile[2].fidelity - fresh.fidelity) < 1e-12


def test_fidelity_decreases_with_links():
    fids = [r.fidelity for r in pr.chain_profile(pr.ChainConfig(num_links=6), NoiseModel())]
    assert all(a > b for a, b in zip(fids, fids[1:]))


def test_dephasing_leaves_encoded_links_untouched():
    s = pr.encoded_link(0.95, IDEAL)
    out = collective_dephasing(s, DephasingContext(((0, 1), (2, 3)), 40.0))
    assert np.abs(out.matrix - s.matrix).max() <= 1e-12


def test_auto_storage_needs_hardware():
    cfg = pr.ChainConfig(num_links=2, encoding="none", swap_version=None, storage_time_s="auto")
    with pytest.raises(ValueError):
        pr.simulate_chain(cfg)


@pytest.mark.parametrize("kwargs", [
    {"num_links": 0},
    {"num_links": 2, "encoding": "dfs", "swap_version": 3},
    {"num_links": 2, "encoding": "none", "swap_version": 1},
    {"num_links": 2, "storage_time_s": "later"},
    {"num_links": 2, "link_fidelity": 0.1},
    {"num_links": 2, "link_length_km": 0},
])
def test_chain_config_validation(kwargs):
    with pytest.raises(ValueError):
        pr.ChainConfig(**kwargs)


def test_logical_clifford_unknown_gate():
    with pytest.raises(ValueError):
        pr.logical_clifford("T_L")


def test_logical_measure_z_reads_data_qubit():
    s = st.basis_state([1, 0])  # |1_L>
    branches = pr.logical_measure_z(s, (0, 1))
    probs = {bit: p for bit, p, _ in branches}
    assert np.isclose(probs[1], 1) and np.isclose(probs[0], 0)


def test_deutsch_map_on_perfect_pairs_is_fixed_point():
    p, out = pr.deutsch_map([1, 0, 0, 0])
    assert p == 1 and np.allclose(out, [1, 0, 0, 0])


@pytest.mark.parametrize("F", [0.6, 0.8, 0.95])
def test_logical_purification_matches_physical(F):
    pops = [F] + [(1 - F) / 3] * 3
    p_map, out = pr.deutsch_map(pops)
    enc = pr.encoded_link(F, IDEAL)
    p_log, s = pr.purification_round(enc, enc, level="logical")
    assert abs(p_log - p_map) < 1e-10
    assert abs(pr.logical_fidelity(s) - out[0]) < 1e-10
    assert out[0] > F


def test_purification_rejects_bad_level():
    w = pr.elementary_link(0.9)
    with pytest.raises(ValueError):
        pr.purification_round(w, w, level="hybrid")


def test_chsh_threshold():
    assert np.isclose(pr.chsh_value(pr.CHSH_THRESHOLD_FIDELITY), 2)
    assert pr.chsh_value(1.0) == pytest.approx(2 * np.sqrt(2))
    with pytest.raises(ValueError):
        pr.chsh_value(0.1)
