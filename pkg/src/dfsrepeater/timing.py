"""Entanglement distribution times: closed forms, Monte Carlo, distance search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channels import NoiseModel
from .protocol import ChainConfig, chain_profile


@dataclass(frozen=True)
class HardwareParams:
    """Photon source, fibre and detector parameters.

    ``bsm_success`` is the linear-optics Bell-measurement success probability
    entering the link heralding rate; set it to 1 for the cruder estimate that
    omits it.
    """

    p: float = 0.35
    eta_d: float = 0.9
    L_att_km: float = 22.0
    c_fiber_km_s: float = 2e5
    pair_rate_hz: float = 1e10
    bsm_success: float = 0.5

    def __post_init__(self):
        for name in ("p", "eta_d", "bsm_success"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name}={v} outside [0, 1]")
        for name in ("L_att_km", "c_fiber_km_s", "pair_rate_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class TimingEstimate:
    expected_time_s: float
    classical_comm_bound_s: float
    repetition_factor: float
    total_time_s: float

    @property
    def success_probability(self) -> float:
        return 1.0 / self.repetition_factor


def link_success_probability(hw: HardwareParams, link_length_km: float) -> float:
    """Heralding probability of one elementary link per attempt.

    Each photon covers half the link to the middle station, so the per-photon
    transmission is exp(-L0 / (2 L_att)).
    """
    if not link_length_km > 0:
        raise ValueError(f"link_length_km={link_length_km} must be positive")
    eta_t = math.exp(-link_length_km / (2 * hw.L_att_km))
    return hw.bsm_success * (hw.p * eta_t * hw.eta_d) ** 2


def _check_chain_args(p_link: float, N: int, link_length_km: float, c: float) -> None:
    if not 0 < p_link <= 1:
        raise ValueError(f"P_link={p_link} outside (0, 1]")
    if int(N) != N or N < 1:
        raise ValueError(f"N={N} must be an integer >= 1")
    if not link_length_km > 0 or not c > 0:
        raise ValueError("link length and light speed must be positive")


def expected_chain_time(p_link: float, N: int, link_length_km: float, c: float) -> float:
    """Mean time until all ``N`` links are up, via minima of geometric variables."""
    _check_chain_args(p_link, N, link_length_km, c)
    n = np.arange(1, int(N) + 1)
    # -expm1(n log1p(-p)) = 1 - (1 - p)^n without cancellation for tiny p
    if p_link == 1:
        succ = np.ones_like(n, dtype=float)
    else:
        succ = -np.expm1(n * math.log1p(-p_link))
    return float(link_length_km / c * np.sum(1.0 / succ))


def approx_chain_time(hw: HardwareParams, n_doublings: int, link_length_km: float) -> float:
    """Rough waiting-time estimate for 2^n links: a factor 3/2 per doubling.

    The single-link rate here carries no Bell-measurement factor.
    """
    if int(n_doublings) != n_doublings or n_doublings < 0:
        raise ValueError(f"n_doublings={n_doublings} must be an integer >= 0")
    if not link_length_km > 0:
        raise ValueError(f"link_length_km={link_length_km} must be positive")
    eta_t = math.exp(-link_length_km / (2 * hw.L_att_km))
    per_link = (hw.p * eta_t * hw.eta_d) ** 2
    return 1.5**n_doublings * link_length_km / hw.c_fiber_km_s / per_link


MC_CHUNK = 10_000


def _stage_attempts(rng: np.random.Generator, p_link: float, N: int, size: int) -> np.ndarray:
    total = np.zeros(size, dtype=np.int64)
    for remaining in range(N, 0, -1):
        draws = rng.geometric(p_link, size=(size, remaining))
        total += draws.min(axis=1)
    return total


def sample_chain_attempts(p_link: float, N: int, trials: int, seed: int) -> np.ndarray:
    """Attempt counts until all ``N`` links are up, one per trial.

    The chain is built stage by stage: with ``n`` links still missing, the
    stage lasts the minimum of ``n`` fresh geometric attempt counts. Trials are
    drawn in fixed chunks with seeds spawned from ``seed``, so the output does
    not depend on how chunks are spread over workers.
    """
    _check_chain_args(p_link, N, 1.0, 1.0)
    if trials < 1:
        raise ValueError("need at least one trial")
    n_chunks = -(-trials // MC_CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)
    out = []
    for i, ss in enumerate(seeds):
        size = min(MC_CHUNK, trials - i * MC_CHUNK)
        out.append(_stage_attempts(np.random.default_rng(ss), p_link, int(N), size))
    return np.concatenate(out)


def sample_chain_time(
    p_link: float, N: int, link_length_km: float, c: float, rng_seed: int, trials: int = 1
):
    """Sampled distribution time(s) in seconds; a float when ``trials == 1``."""
    _check_chain_args(p_link, N, link_length_km, c)
    t = sample_chain_attempts(p_link, N, trials, rng_seed) * (link_length_km / c)
    return float(t[0]) if trials == 1 else t


def sample_max_attempts(p_link: float, N: int, trials: int, seed: int) -> np.ndarray:
    """Slot in which the slowest of ``N`` independent links first succeeds."""
    _check_chain_args(p_link, N, 1.0, 1.0)
    rng = np.random.default_rng(seed)
    return rng.geometric(p_link, size=(trials, int(N))).max(axis=1)


def expected_max_attempts(p_link: float, N: int) -> float:
    """Exact mean of :func:`sample_max_attempts` by inclusion-exclusion."""
    _check_chain_args(p_link, N, 1.0, 1.0)
    total = 0.0
    for k in range(1, int(N) + 1):
        total += (-1) ** (k + 1) * math.comb(int(N), k) / (1 - (1 - p_link) ** k)
    return total


def total_time(
    config: ChainConfig,
    hw: HardwareParams,
    acceptance_probability: float = 1.0,
    include_repetition: bool = True,
    include_classical: bool = True,
) -> TimingEstimate:
    """Waiting time, repeated on average 1/P times, plus classical signalling."""
    if not 0 < acceptance_probability <= 1:
        raise ValueError(
            f"acceptance probability {acceptance_probability} outside (0, 1]: "
            "the protocol cannot complete"
        )
    L0, N, c = config.link_length_km, config.num_links, hw.c_fiber_km_s
    expected = expected_chain_time(link_success_probability(hw, L0), N, L0, c)
    classical = N * L0 / c
    rep = 1.0 / acceptance_probability if include_repetition else 1.0
    total = expected * rep + (classical if include_classical else 0.0)
    return TimingEstimate(expected, classical, rep, total)


def direct_transmission_time(total_distance_km: float, hw: HardwareParams) -> float:
    """Mean time to deliver one photon pair straight through the fibre.

    Here the pair sees the transmission of the whole distance,
    exp(-L / L_att), and both photons must be detected.
    """
    if not total_distance_km > 0:
        raise ValueError(f"distance {total_distance_km} must be positive")
    transmission = math.exp(-total_distance_km / hw.L_att_km)
    return 1.0 / (hw.pair_rate_hz * transmission * hw.eta_d**2) + total_distance_km / hw.c_fiber_km_s


def direct_distance_for_time(time_s: float, hw: HardwareParams, hi_km: float = 5000.0) -> float:
    """Distance at which the direct-transmission time equals ``time_s``."""
    from scipy.optimize import brentq

    return float(brentq(lambda d: direct_transmission_time(d, hw) - time_s, 1e-9, hi_km))


@dataclass
class DistanceResult:
    distance_km: int | None
    num_links: int | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.distance_km is not None


def _largest_distance(N: int, hw: HardwareParams, acceptance: float, budget: float,
                      template: ChainConfig, **toggles) -> int:
    """Largest whole-km total distance with total time within budget (0 if none)."""

    def ok(d_km: int) -> bool:
        cfg = replace(template, num_links=N, link_length_km=d_km / N)
        return total_time(cfg, hw, acceptance, **toggles).total_time_s <= budget

    if not ok(1):
        return 0
    lo, hi = 1, 2
    while ok(hi):
        lo, hi = hi, hi * 2
        if hi > 10**7:
            break
    # total time grows monotonically with distance
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def max_distance(
    template: ChainConfig,
    hw: HardwareParams,
    noise: NoiseModel,
    time_budget_s: float,
    fidelity_floor: float,
    max_links: int = 200,
    **toggles,
) -> DistanceResult:
    """Largest end-to-end distance reachable within a time budget.

    Link counts are limited to those whose chain fidelity stays at or above
    ``fidelity_floor``; for each, the distance is scanned on a 1 km grid.
    """
    if not 0 < fidelity_floor < 1:
        raise ValueError(f"fidelity floor {fidelity_floor} outside (0, 1)")
    diag: dict = {"per_links": {}}
    if not time_budget_s > 0:
        diag["reason"] = "non-positive time budget"
        return DistanceResult(None, None, diag)

    storage = template.storage_time_s
    if isinstance(storage, str):
        # memories wait at most the budget; DFS chains are evaluated at >= 1 s
        storage = max(1.0, time_budget_s) if template.encoding == "dfs" else time_budget_s
    profile_cfg = replace(template, num_links=max_links)
    fidelities, acceptances = [], []
    for res in chain_profile(profile_cfg, noise, storage_time_s=storage):
        if res.fidelity < fidelity_floor:
            break
        fidelities.append(res.fidelity)
        acceptances.append(res.acceptance_probability)
    diag["max_links_above_floor"] = len(fidelities)
    diag["storage_time_s"] = storage
    if not fidelities:
        diag["reason"] = "no link count reaches the fidelity floor"
        return DistanceResult(None, None, diag)

    best_d, best_n = 0, None
    for N, (F, acc) in enumerate(zip(fidelities, acceptances), start=1):
        d = _largest_distance(N, hw, acc, time_budget_s, template, **toggles)
        diag["per_links"][N] = {"distance_km": d, "fidelity": F, "acceptance_probability": acc}
        if d > best_d:
            best_d, best_n = d, N
    if best_n is None:
        diag["reason"] = "time budget too small for any distance"
        return DistanceResult(None, None, diag)
    return DistanceResult(best_d, best_n, diag)
