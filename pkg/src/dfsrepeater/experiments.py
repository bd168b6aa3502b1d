"""Named sweeps regenerating the fidelity tables and time/fidelity curves.

Every experiment writes a CSV (one row per sweep point), a JSON sidecar with
the fully resolved parameters, and for curve experiments a PNG figure.
"""

from __future__ import annotations

import csv
import json
import math
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .channels import NoiseModel
from .presets import PRESETS
from .protocol import ChainConfig, chain_profile, simulate_chain
from .timing import (
    HardwareParams,
    direct_distance_for_time,
    direct_transmission_time,
    link_success_probability,
    max_distance,
    sample_chain_attempts,
    total_time,
)

CHSH_FLOOR = 0.78


class ConfigError(ValueError):
    """Unusable experiment configuration (CLI exit code 2)."""


class InfeasibleExperiment(RuntimeError):
    """The requested experiment has no feasible operating point (exit code 3)."""


@dataclass
class ExperimentConfig:
    experiment: str
    overrides: dict = field(default_factory=dict)
    seed: int | None = None
    output_path: str | None = None
    trials: int = 0
    plot: bool = True


@dataclass
class Resolved:
    preset: str
    hardware: HardwareParams
    noise: NoiseModel
    chain: dict
    search: dict

    def as_dict(self) -> dict:
        return {
            "preset": self.preset,
            "hardware": asdict(self.hardware),
            "noise": asdict(self.noise),
            "chain": dict(self.chain),
            "search": dict(self.search),
        }


@dataclass
class Output:
    columns: list[str]
    rows: list[dict]
    summary: dict = field(default_factory=dict)
    plot: Callable | None = None


# ---------------------------------------------------------------------------
# parameter resolution

_CHAIN_KEYS = {
    "num_links", "link_length_km", "encoding", "swap_version", "storage_time_s",
    "link_fidelity", "noisy_decoding", "order", "links", "distances_km", "curves",
}
_SEARCH_KEYS = {"time_budget_s", "fidelity_floor", "max_links", "include_repetition",
                "include_classical"}
_SECTIONS = {"hardware", "noise", "chain", "search"}


def _merge_dataclass(base, updates: dict, section: str):
    allowed = {f.name for f in fields(base)}
    unknown = set(updates) - allowed
    if unknown:
        raise ConfigError(f"unknown {section} key(s): {sorted(unknown)}")
    try:
        return replace(base, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section} parameters: {exc}") from exc


def resolve(name: str, overrides: dict) -> Resolved:
    spec = EXPERIMENTS[name]
    unknown = set(overrides) - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    if name == "custom":
        _require_full(overrides)
    preset = PRESETS[spec.preset]
    hw = _merge_dataclass(preset.hardware, overrides.get("hardware", {}), "hardware")
    noise = _merge_dataclass(preset.noise, overrides.get("noise", {}), "noise")
    chain = {"link_fidelity": preset.link_fidelity, **spec.chain_defaults}
    chain_over = overrides.get("chain", {})
    unknown = set(chain_over) - _CHAIN_KEYS
    if unknown:
        raise ConfigError(f"unknown chain key(s): {sorted(unknown)}")
    chain.update(chain_over)
    search = {"time_budget_s": 1.0, "fidelity_floor": CHSH_FLOOR, "max_links": 200,
              "include_repetition": True, "include_classical": True}
    search_over = overrides.get("search", {})
    unknown = set(search_over) - _SEARCH_KEYS
    if unknown:
        raise ConfigError(f"unknown search key(s): {sorted(unknown)}")
    search.update(search_over)
    # fail early on invalid chain values even where the sweep sets num_links itself
    chain_config({"num_links": 1, **chain})
    return Resolved(spec.preset, hw, noise, chain, search)


_CUSTOM_REQUIRED = {
    "hardware": {"p", "eta_d", "L_att_km", "c_fiber_km_s"},
    "noise": {"p_g1", "p_g2", "tau"},
    "chain": {"num_links", "link_length_km", "encoding", "link_fidelity"},
}


def _require_full(overrides: dict) -> None:
    for section, keys in _CUSTOM_REQUIRED.items():
        missing = keys - set(overrides.get(section, {}))
        if missing:
            raise ConfigError(f"custom experiment needs {section} keys {sorted(missing)}")


def chain_config(chain: dict, **changes) -> ChainConfig:
    params = {k: v for k, v in {**chain, **changes}.items()
              if k in {f.name for f in fields(ChainConfig)}}
    if params.get("encoding", "dfs") == "none":
        params["swap_version"] = None
    try:
        return ChainConfig(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid chain parameters: {exc}") from exc


# ---------------------------------------------------------------------------
# parallel sweeps


def worker_count() -> int:
    raw = os.environ.get("SIM_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError as exc:
            raise ConfigError(f"SIM_THREADS={raw!r} is not an integer") from exc
    return os.cpu_count() or 1


def sweep_map(fn, items: list) -> list:
    """Map over sweep points; results come back in input order."""
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


# ---------------------------------------------------------------------------
# experiments


def _table(res: Resolved, cfg: ExperimentConfig) -> Output:
    links = [int(n) for n in res.chain.get("links", [])]
    if not links:
        raise ConfigError("table experiment needs a non-empty 'links' list")
    top = max(max(links), 2)
    profile_cfg = chain_config(res.chain, num_links=top)
    floor = res.search["fidelity_floor"]
    results = {}
    max_above = 0
    # extend past the requested rows until the fidelity floor is crossed
    extended = replace(profile_cfg, num_links=max(top, int(res.search["max_links"])))
    storage = None if not isinstance(profile_cfg.storage_time_s, str) else max(
        1.0, res.search["time_budget_s"])
    for r in chain_profile(extended, res.noise, storage_time_s=storage, hw=res.hardware):
        results[r.num_links] = r
        if r.fidelity >= floor and max_above == r.num_links - 1:
            max_above = r.num_links
        if r.num_links >= top and r.fidelity < floor:
            break
    rows = [{"num_links": n, "fidelity": results[n].fidelity,
             "acceptance_probability": results[n].acceptance_probability} for n in links]
    summary = {"max_links_above_floor": max_above, "fidelity_floor": floor}
    return Output(["num_links", "fidelity", "acceptance_probability"], rows, summary)


def _fig2_point(args):
    chain, noise, hw, n, distance = args
    L0 = distance / n
    cfg = chain_config(chain, num_links=n, link_length_km=L0)
    r = simulate_chain(cfg, hw, noise)
    return {"num_links": n, "distance_km": distance, "fidelity": r.fidelity,
            "storage_time_s": r.storage_time_s}


def _fig2(res: Resolved, cfg: ExperimentConfig) -> Output:
    links = [int(n) for n in res.chain.get("links", [4, 8, 16])]
    distances = res.chain.get("distances_km") or list(range(1, 41))
    points = [(res.chain, res.noise, res.hardware, n, float(d)) for n in links for d in distances]
    rows = sweep_map(_fig2_point, points)
    crossings = {}
    for n in links:
        below = [r["distance_km"] for r in rows if r["num_links"] == n and r["fidelity"] < CHSH_FLOOR]
        crossings[str(n)] = min(below) if below else None
    columns = ["num_links", "distance_km", "fidelity", "storage_time_s"]
    return Output(columns, rows, {"first_distance_below_floor_km": crossings},
                  plot=lambda rows, path: _plots().plot_fidelity_vs_distance(
                      rows, path, "no encoding"))


def _plots():
    from . import plotting

    return plotting


def _toggles(res: Resolved) -> dict:
    return {k: bool(res.search[k]) for k in ("include_repetition", "include_classical")}


def _acceptances(res: Resolved, version: int, top: int) -> dict[int, float]:
    cfg = chain_config(res.chain, encoding="dfs", swap_version=version, num_links=top)
    storage = cfg.storage_time_s if not isinstance(cfg.storage_time_s, str) else max(
        1.0, res.search["time_budget_s"])
    return {r.num_links: r.acceptance_probability
            for r in chain_profile(cfg, res.noise, storage_time_s=storage)}


def _mc_time(hw: HardwareParams, n: int, L0: float, trials: int, seed) -> float:
    p = link_success_probability(hw, L0)
    return float(sample_chain_attempts(p, n, trials, seed).mean() * L0 / hw.c_fiber_km_s)


def _times(res: Resolved, cfg: ExperimentConfig, with_direct: bool) -> Output:
    curves, distances = res.chain["curves"], res.chain["distances_km"]
    if cfg.trials and cfg.seed is None:
        raise ConfigError("Monte Carlo columns (--trials) need --seed")
    rows = []
    index = 0
    for version, links in curves:
        acc = _acceptances(res, version, max(links))
        for n in links:
            for d in distances:
                tmpl = chain_config(res.chain, encoding="dfs", swap_version=version,
                                    num_links=n, link_length_km=d / n)
                est = total_time(tmpl, res.hardware, acc[n] if version == 1 else 1.0,
                                 **_toggles(res))
                row = {"curve": f"v{version}", "num_links": n, "distance_km": d,
                       "time_s": est.total_time_s, "expected_time_s": est.expected_time_s,
                       "acceptance_probability": acc[n]}
                if cfg.trials:
                    mc = _mc_time(res.hardware, n, d / n, cfg.trials, (cfg.seed, index))
                    row["mc_expected_time_s"] = mc
                index += 1
                rows.append(row)
    if with_direct:
        for d in distances:
            t = direct_transmission_time(d, res.hardware)
            row = {"curve": "direct", "num_links": 0, "distance_km": d, "time_s": t,
                   "expected_time_s": t, "acceptance_probability": 1.0}
            if cfg.trials:
                row["mc_expected_time_s"] = t
            rows.append(row)
    columns = ["curve", "num_links", "distance_km", "time_s", "expected_time_s",
               "acceptance_probability"] + (["mc_expected_time_s"] if cfg.trials else [])
    summary = {}
    budget, floor = res.search["time_budget_s"], res.search["fidelity_floor"]
    for version in (1, 2):
        tmpl = chain_config(res.chain, encoding="dfs", swap_version=version, num_links=1,
                            storage_time_s="auto")
        found = max_distance(tmpl, res.hardware, res.noise, budget, floor,
                             max_links=int(res.search["max_links"]), **_toggles(res))
        summary[f"v{version}_max_distance_km"] = found.distance_km
        summary[f"v{version}_best_num_links"] = found.num_links
    if with_direct:
        summary["direct_distance_at_budget_km"] = direct_distance_for_time(budget, res.hardware)
    return Output(columns, rows, summary,
                  plot=lambda rows, path: _plots().plot_distribution_times(rows, path, budget_s=budget))


def _fig4(res, cfg):
    return _times(res, cfg, with_direct=True)


def _fig6(res, cfg):
    return _times(res, cfg, with_direct=False)


def _direct(res: Resolved, cfg: ExperimentConfig) -> Output:
    distances = res.chain.get("distances_km") or list(range(10, 710, 10))
    rows = [{"distance_km": d, "expected_time_s": direct_transmission_time(d, res.hardware)}
            for d in distances]
    summary = {"distance_at_budget_km": direct_distance_for_time(
        res.search["time_budget_s"], res.hardware)}
    return Output(["distance_km", "expected_time_s"], rows, summary,
                  plot=lambda rows, path: _plots().plot_direct(rows, path))


def _custom(res: Resolved, cfg: ExperimentConfig) -> Output:
    chain = chain_config(res.chain)
    r = simulate_chain(chain, res.hardware, res.noise)
    acc = r.acceptance_probability if chain.swap_version == 1 else 1.0
    try:
        est = total_time(chain, res.hardware, acc, **_toggles(res))
    except ValueError as exc:
        raise InfeasibleExperiment(str(exc)) from exc
    row = {"num_links": chain.num_links, "link_length_km": chain.link_length_km,
           "total_distance_km": chain.total_distance_km, "fidelity": r.fidelity,
           "acceptance_probability": r.acceptance_probability,
           "expected_time_s": est.expected_time_s, "total_time_s": est.total_time_s}
    columns = list(row)
    if cfg.trials:
        if cfg.seed is None:
            raise ConfigError("Monte Carlo columns (--trials) need --seed")
        row["mc_expected_time_s"] = _mc_time(res.hardware, chain.num_links,
                                             chain.link_length_km, cfg.trials, cfg.seed)
        columns.append("mc_expected_time_s")
    summary = {"chsh_violation": r.fidelity > CHSH_FLOOR}
    if "search" in cfg.overrides:
        found = max_distance(replace(chain, num_links=1), res.hardware, res.noise,
                             res.search["time_budget_s"], res.search["fidelity_floor"],
                             max_links=int(res.search["max_links"]), **_toggles(res))
        if not found.feasible:
            raise InfeasibleExperiment(found.diagnostics.get("reason", "infeasible"))
        summary["max_distance_km"] = found.distance_km
        summary["best_num_links"] = found.num_links
    return Output(columns, [row], summary)


@dataclass(frozen=True)
class ExperimentSpec:
    preset: str
    runner: Callable
    chain_defaults: dict
    description: str


_FIG4_CURVES = [(1, [4, 8, 10]), (2, [4, 6, 7])]
_FIG6_CURVES = [(1, [16, 32, 64, 71]), (2, [16, 32, 47])]

EXPERIMENTS: dict[str, ExperimentSpec] = {
    "table3": ExperimentSpec("current", _table, {
        "encoding": "dfs", "swap_version": 1, "storage_time_s": 1.0, "links": [4, 8, 10, 11]},
        "DFS chain, post-selected swaps, current parameters"),
    "table4": ExperimentSpec("current", _table, {
        "encoding": "dfs", "swap_version": 2, "storage_time_s": 1.0, "links": [4, 6, 7, 8]},
        "DFS chain, deterministic swaps, current parameters"),
    "table5": ExperimentSpec("improved", _table, {
        "encoding": "dfs", "swap_version": 1, "storage_time_s": 1.0,
        "links": [16, 32, 64, 70, 71, 72]},
        "DFS chain, post-selected swaps, improved parameters"),
    "table6": ExperimentSpec("improved", _table, {
        "encoding": "dfs", "swap_version": 2, "storage_time_s": 1.0, "links": [16, 32, 47, 48]},
        "DFS chain, deterministic swaps, improved parameters"),
    "fig2": ExperimentSpec("current", _fig2, {
        "encoding": "none", "swap_version": None, "storage_time_s": "auto", "links": [4, 8, 16]},
        "fidelity vs distance without encoding, memory time = waiting time"),
    "fig4": ExperimentSpec("current", _fig4, {
        "encoding": "dfs", "swap_version": 1, "storage_time_s": "auto",
        "curves": _FIG4_CURVES, "distances_km": list(range(10, 1210, 10))},
        "distribution time vs distance, both swap versions and direct transmission"),
    "fig6": ExperimentSpec("improved", _fig6, {
        "encoding": "dfs", "swap_version": 1, "storage_time_s": "auto",
        "curves": _FIG6_CURVES, "distances_km": list(range(100, 8100, 100))},
        "distribution time vs distance with improved parameters"),
    "direct": ExperimentSpec("current", _direct, {}, "direct photon-pair transmission time"),
    "custom": ExperimentSpec("current", _custom, {
        "encoding": "dfs", "swap_version": 1, "storage_time_s": "auto"},
        "single chain from a full parameter set"),
}


# ---------------------------------------------------------------------------
# output


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def run(cfg: ExperimentConfig) -> dict:
    """Run one experiment; returns the paths written and the summary."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}; "
                          f"choose from {sorted(EXPERIMENTS)}")
    if cfg.trials < 0:
        raise ConfigError("trials must be >= 0")
    res = resolve(cfg.experiment, cfg.overrides)
    out = EXPERIMENTS[cfg.experiment].runner(res, cfg)

    csv_path = Path(cfg.output_path or f"results/{cfg.experiment}.csv")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(csv_path, out.columns, out.rows)
    meta = {
        "experiment": cfg.experiment,
        "version": version_string(),
        "seed": cfg.seed,
        "trials": cfg.trials,
        "parameters": res.as_dict(),
        "columns": out.columns,
        "summary": out.summary,
    }
    json_path = csv_path.with_suffix(".json")
    json_path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    paths = {"csv": csv_path, "json": json_path}
    if cfg.plot and out.plot is not None:
        paths["figure"] = out.plot(out.rows, csv_path.with_suffix(".png"))
    return {"paths": paths, "summary": out.summary, "rows": out.rows}


def load_sidecar_parameters(path) -> Resolved:
    """Rebuild the resolved parameter set recorded in a JSON sidecar."""
    meta = json.loads(Path(path).read_text())
    p = meta["parameters"]
    return Resolved(p["preset"], HardwareParams(**p["hardware"]), NoiseModel(**p["noise"]),
                    p["chain"], p["search"])

