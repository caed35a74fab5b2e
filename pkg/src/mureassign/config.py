"""
Run configuration.

A configuration document is an INI file with one section per subsystem::

    [scenario]
    name = dual_stripe
    dr = 0.2

    [sweep]
    tau_list = -3, -1.5, 0, 1.5
    ues_per_cell = 1, 2, 3, 4

Unknown sections or keys are rejected. Command-line flags override
document values. Every value has a default, so an empty document yields
the reference parameter set.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from typing import Optional

from .energy import PRESETS, EnergyParams

SCENARIOS = ("dual_stripe", "outdoor")

SCENARIO_DEFAULTS = {
    "dual_stripe": {"small_cell_power_dbm": 20.0, "macro_power_dbm": 46.0,
                    "shadowing_db": 4.0, "power_class": "femto"},
    "outdoor": {"small_cell_power_dbm": 24.0, "macro_power_dbm": 43.0,
                "shadowing_db": 8.0, "power_class": "pico"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Everything one snapshot needs.

    Scenario-dependent fields left as ``None`` resolve to the scenario's
    defaults in :meth:`resolved`.
    """

    scenario: str = "dual_stripe"
    dr: float = 0.2
    n_cells: int = 21
    area_m: float = 250.0
    mean_isd_m: float = 37.0
    macro_distance_m: float = 100.0
    macro_ring_radius_m: float = 350.0
    small_cell_power_dbm: Optional[float] = None
    macro_power_dbm: Optional[float] = None
    shadowing_db: Optional[float] = None
    ues_per_cell: int = 1

    bandwidth_mhz: float = 10.0
    noise_figure_db: float = 9.0
    noise_density_dbm_hz: float = -174.0
    subband_rbs: int = 6

    epsilon: float = 0.1
    delta_mui: float = 0.05
    sinr_floor_db: float = 0.0

    tau: float = -1.5
    solver: str = "exact"

    tti_before: int = 5
    tti_after: int = 5
    feedback_delay: int = 1
    pf_alpha: float = 0.02

    feedback_overhead: bool = False
    overhead_fraction: float = 0.3115

    power_class: Optional[str] = None
    energy_p0: Optional[float] = None
    energy_delta_p: Optional[float] = None
    energy_p_max: Optional[float] = None
    energy_p_sleep: Optional[float] = None

    def __post_init__(self):
        check(self)

    @property
    def n_rb(self) -> int:
        return int(round(self.bandwidth_mhz * 5))

    def resolved(self) -> "SimConfig":
        d = SCENARIO_DEFAULTS[self.scenario]
        upd = {k: v for k, v in d.items() if getattr(self, k) is None}
        base = PRESETS[upd.get("power_class", self.power_class)]
        for name in ("p0", "delta_p", "p_max", "p_sleep"):
            if getattr(self, "energy_" + name) is None:
                upd["energy_" + name] = getattr(base, name)
        return dataclasses.replace(self, **upd) if upd else self

    def energy_params(self) -> EnergyParams:
        r = self.resolved()
        return EnergyParams(r.energy_p0, r.energy_delta_p, r.energy_p_max, r.energy_p_sleep)

    def replace(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def check(c: SimConfig) -> None:
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}")

    if c.scenario not in SCENARIOS:
        bad("scenario.name", f"must be one of {', '.join(SCENARIOS)}")
    if not 0 < c.dr <= 1:
        bad("scenario.dr", "dr must be in (0,1]")
    if c.n_cells < 1:
        bad("scenario.n_cells", "must be >= 1")
    if c.ues_per_cell < 1:
        bad("scenario.ues_per_cell", "must be >= 1")
    if c.shadowing_db is not None and c.shadowing_db < 0:
        bad("scenario.shadowing_db", "must be >= 0")
    if c.bandwidth_mhz <= 0:
        bad("link.bandwidth_mhz", "must be positive")
    if c.subband_rbs < 1:
        bad("link.subband_rbs", "must be >= 1")
    if not 0 < c.epsilon <= 1:
        bad("mimo.epsilon", "must be in (0,1]")
    if c.delta_mui < 0:
        bad("mimo.delta_mui", "must be >= 0")
    if c.solver not in ("exact", "greedy"):
        bad("reassignment.solver", "must be exact or greedy")
    if c.tti_before < 1 or c.tti_after < 1:
        bad("engine.tti_before", "snapshot phases need at least one TTI")
    if c.feedback_delay < 0:
        bad("engine.feedback_delay", "must be >= 0")
    if not 0 < c.pf_alpha <= 1:
        bad("scheduler.pf_alpha", "must be in (0,1]")
    if not 0 <= c.overhead_fraction < 1:
        bad("engine.overhead_fraction", "must be in [0,1)")
    if c.power_class is not None and c.power_class not in PRESETS:
        bad("energy.power_class", f"must be one of {', '.join(PRESETS)}")


# Document layout: section -> {key: SimConfig field}
SECTIONS = {
    "scenario": {
        "name": "scenario", "dr": "dr", "n_cells": "n_cells", "area_m": "area_m",
        "mean_isd_m": "mean_isd_m", "macro_distance_m": "macro_distance_m",
        "macro_ring_radius_m": "macro_ring_radius_m",
        "small_cell_power_dbm": "small_cell_power_dbm", "macro_power_dbm": "macro_power_dbm",
        "shadowing_db": "shadowing_db",
    },
    "link": {
        "bandwidth_mhz": "bandwidth_mhz", "noise_figure_db": "noise_figure_db",
        "noise_density_dbm_hz": "noise_density_dbm_hz", "subband_rbs": "subband_rbs",
    },
    "mimo": {"epsilon": "epsilon", "delta_mui": "delta_mui", "sinr_floor_db": "sinr_floor_db"},
    "reassignment": {"solver": "solver"},
    "scheduler": {"pf_alpha": "pf_alpha"},
    "engine": {
        "tti_before": "tti_before", "tti_after": "tti_after", "feedback_delay": "feedback_delay",
        "feedback_overhead": "feedback_overhead", "overhead_fraction": "overhead_fraction",
    },
    "energy": {
        "power_class": "power_class", "p0": "energy_p0", "delta_p": "energy_delta_p",
        "p_max": "energy_p_max", "p_sleep": "energy_p_sleep",
    },
}
SWEEP_KEYS = {"tau_list", "ues_per_cell", "n_iterations", "seed", "workers", "output_dir"}


@dataclass(frozen=True)
class RunConfig:
    """A sweep: base snapshot config crossed with tau and UEs-per-cell lists."""

    base: SimConfig = field(default_factory=SimConfig)
    tau_list: tuple = (-3.0, -1.5, 0.0, 1.5)
    ues_per_cell_list: tuple = (1,)
    n_iterations: int = 100
    seed: int = 0
    workers: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ConfigError("sweep.n_iterations: must be >= 1")
        if self.workers < 1:
            raise ConfigError("sweep.workers: must be >= 1")
        if not self.tau_list:
            raise ConfigError("sweep.tau_list: must not be empty")
        if not self.ues_per_cell_list or min(self.ues_per_cell_list) < 1:
            raise ConfigError("sweep.ues_per_cell: values must be >= 1")

    def grid(self) -> list[SimConfig]:
        return [self.base.replace(ues_per_cell=u, tau=t)
                for u in self.ues_per_cell_list for t in self.tau_list]

    def to_dict(self) -> dict:
        return {
            "base": self.base.resolved().to_dict(),
            "tau_list": list(self.tau_list),
            "ues_per_cell_list": list(self.ues_per_cell_list),
            "n_iterations": self.n_iterations,
            "seed": self.seed,
            "workers": self.workers,
            "output_dir": self.output_dir,
        }


_FIELD_TYPES = {f.name: f.type for f in fields(SimConfig)}


def _coerce(key: str, name: str, raw: str):
    t = _FIELD_TYPES[name]
    try:
        if raw.strip().lower() in ("", "none") and "Optional" in str(t):
            return None
        if "bool" in str(t):
            v = raw.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in str(t):
            return int(raw)
        if "float" in str(t):
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None


def _float_list(key, raw) -> tuple:
    try:
        return tuple(float(x) for x in str(raw).replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: expected a list of numbers") from None


def _int_list(key, raw) -> tuple:
    try:
        return tuple(int(x) for x in str(raw).replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: expected a list of integers") from None


def parse_config(text: str = "", overrides: Optional[dict] = None) -> RunConfig:
    """Build a :class:`RunConfig` from an INI document plus flag overrides.

    ``overrides`` uses dotted ``section.key`` names, e.g.
    ``{"sweep.tau_list": "-3,0"}``; values may be strings or already typed.
    """
    doc = configparser.ConfigParser(interpolation=None)
    doc.optionxform = str
    try:
        doc.read_string(text or "")
    except configparser.Error as exc:
        raise ConfigError(f"malformed document: {exc}") from None

    values: dict = {}
    for section in doc.sections():
        for key, raw in doc.items(section):
            values[f"{section}.{key}"] = raw
    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = raw

    sim_kw: dict = {}
    run_kw: dict = {}
    for dotted, raw in values.items():
        section, _, key = dotted.partition(".")
        if section == "sweep":
            if key not in SWEEP_KEYS:
                raise ConfigError(f"{dotted}: unknown key")
            if key == "tau_list":
                run_kw["tau_list"] = _float_list(dotted, raw) if isinstance(raw, str) else tuple(map(float, raw))
            elif key == "ues_per_cell":
                run_kw["ues_per_cell_list"] = _int_list(dotted, raw) if isinstance(raw, str) else tuple(map(int, raw))
            elif key in ("n_iterations", "seed", "workers"):
                try:
                    run_kw[key] = int(raw)
                except ValueError:
                    raise ConfigError(f"{dotted}: expected an integer") from None
            else:
                run_kw[key] = str(raw)
            continue
        if section not in SECTIONS:
            raise ConfigError(f"{section}: unknown section")
        if key not in SECTIONS[section]:
            raise ConfigError(f"{dotted}: unknown key")
        name = SECTIONS[section][key]
        sim_kw[name] = _coerce(dotted, name, raw) if isinstance(raw, str) else raw

    base = SimConfig(**sim_kw)
    return RunConfig(base=base, **run_kw)
