"""Declarative run configuration (TOML) and object construction.

Unknown keys are rejected so a typo cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .controller import MOP_GROUP, QUEUE_DEPTH, MemController, MopMapper
from .device import DeviceTimings, Topology, timings_from_preset
from .mitigations import make_mitigation
from .pacram import CONTROLLER, ON_DRAM_DIE, PacramState, derive_config
from .profiles import get_profile, level, load_profiles
from .security import deployed_pacram
from .workload import EnergyModel


class ConfigError(ValueError):
    pass


_TIMING_KEYS = {"t_rcd", "t_ras", "t_rp", "t_cl", "t_bl", "t_rfc", "t_refi", "t_refw"}
_TOPOLOGY_KEYS = {"channels", "ranks", "bankgroups", "banks_per_group",
                  "rows_per_bank", "columns"}


@dataclass
class RunConfig:
    device_preset: str = "ddr5_default"
    timing_overrides: dict = field(default_factory=dict)
    topology: dict = field(default_factory=dict)
    queue_depth: int = QUEUE_DEPTH
    mop_group: int = MOP_GROUP
    blast_radius: int = 2
    mitigation: str = "none"
    nrh: int = 1024
    mitigation_params: dict = field(default_factory=dict)
    pacram_enabled: bool = False
    pacram_profile: str = ""
    pacram_level: float = 1.0
    pacram_mode: str = CONTROLLER
    pacram_periodic_ext: bool = False
    profiles_path: Optional[str] = None
    traces: list = field(default_factory=list)
    generator: str = ""
    gen_accesses: int = 100_000
    cores: int = 1
    instr_budget: int = 100_000_000   # upper bound; short traces end sooner
    warmup: int = 10_000_000
    weighted_speedup: bool = False
    llc_enabled: bool = True
    seed: int = 0
    out_dir: str = "out"
    nrh_sweep: list = field(default_factory=lambda: [1024, 512, 256, 128, 64, 32])
    sweep_mechanisms: list = field(default_factory=list)
    max_ticks: int = 1 << 62

    def build_timings(self) -> DeviceTimings:
        return timings_from_preset(self.device_preset, **self.timing_overrides)

    def build_topology(self) -> Topology:
        return Topology(**self.topology)

    def build_pacram(self, timings: DeviceTimings, topology: Topology,
                     nrh_config: Optional[int] = None):
        """Returns (PacramState or None, effective mitigation threshold)."""
        nrh_config = nrh_config if nrh_config is not None else self.nrh
        if not self.pacram_enabled:
            return None, nrh_config
        profiles = load_profiles(self.profiles_path)
        profile = get_profile(self.pacram_profile, profiles)
        cfg, scaled = deployed_pacram(profile, level(self.pacram_level), timings, nrh_config)
        cfg = dataclasses.replace(cfg, mode=self.pacram_mode)
        if cfg.mode == ON_DRAM_DIE and self.mitigation not in ("rfm", "prac"):
            raise ConfigError("on-die latency selection requires a device-resident "
                              "mitigation (rfm or prac)")
        state = PacramState(cfg, timings, topology.ranks * topology.banks_per_rank,
                            topology.rows_per_bank,
                            periodic_ext=self.pacram_periodic_ext)
        return state, scaled

    def build_controller(self, timings: DeviceTimings, topology: Topology,
                         nrh_config: Optional[int] = None, keep_log: bool = True,
                         mitigation_name: Optional[str] = None) -> MemController:
        name = mitigation_name or self.mitigation
        pacram, nrh_eff = self.build_pacram(timings, topology, nrh_config)
        params = dict(self.mitigation_params)
        if name == "graphene":
            from .device import ns_to_ticks
            params.setdefault("window_acts", int(timings.t_refw / timings.t_rc))
            params.setdefault("reset_window_ticks", ns_to_ticks(timings.t_refw))
        mitigation = make_mitigation(name, nrh_eff, rows_per_bank=topology.rows_per_bank,
                                     blast_radius=self.blast_radius,
                                     **params)
        return MemController(timings, topology, mitigation, pacram,
                             EnergyModel(), self.queue_depth, self.blast_radius,
                             keep_log=keep_log, periodic_ext=self.pacram_periodic_ext)

    def build_mapper(self, topology: Topology) -> MopMapper:
        return MopMapper(topology, self.mop_group)


def _take(table: dict, section: str, known: dict) -> dict:
    unknown = set(table) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    return {known[k]: v for k, v in table.items()}


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    kwargs: dict = {}
    sections = set(raw)
    allowed = {"device", "topology", "controller", "mitigation", "pacram",
               "workload", "run"}
    if sections - allowed:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(sections - allowed))}")

    device = dict(raw.get("device", {}))
    kwargs["device_preset"] = device.pop("preset", "ddr5_default")
    bad = set(device) - _TIMING_KEYS
    if bad:
        raise ConfigError(f"unknown key(s) in [device]: {', '.join(sorted(bad))}")
    kwargs["timing_overrides"] = device

    topo = dict(raw.get("topology", {}))
    bad = set(topo) - _TOPOLOGY_KEYS
    if bad:
        raise ConfigError(f"unknown key(s) in [topology]: {', '.join(sorted(bad))}")
    kwargs["topology"] = topo

    kwargs.update(_take(raw.get("controller", {}), "controller",
                        {"queue_depth": "queue_depth", "mop_group": "mop_group",
                         "blast_radius": "blast_radius"}))
    mit = dict(raw.get("mitigation", {}))
    kwargs["mitigation"] = kind = mit.pop("kind", "none")
    kwargs["nrh"] = mit.pop("nrh", 1024)
    allowed_params = {
        "none": set(),
        "para": {"constant", "seed"},
        "rfm": {"raaimt"},
        "prac": {"threshold"},
        "hydra": {"group_size", "cache_entries", "trigger", "group_threshold"},
        "graphene": {"quota", "table_entries", "window_acts", "reset_window_ticks"},
    }.get(kind, set())
    bad = set(mit) - allowed_params
    if bad:
        raise ConfigError(f"unknown key(s) in [mitigation] for {kind!r}: "
                          f"{', '.join(sorted(bad))}")
    kwargs["mitigation_params"] = mit
    kwargs.update(_take(raw.get("pacram", {}), "pacram",
                        {"enabled": "pacram_enabled", "profile": "pacram_profile",
                         "level": "pacram_level", "mode": "pacram_mode",
                         "periodic_ext": "pacram_periodic_ext",
                         "profiles_path": "profiles_path"}))
    kwargs.update(_take(raw.get("workload", {}), "workload",
                        {"traces": "traces", "generator": "generator",
                         "gen_accesses": "gen_accesses", "cores": "cores",
                         "instr_budget": "instr_budget", "warmup": "warmup",
                         "llc_enabled": "llc_enabled", "seed": "seed",
                         "weighted_speedup": "weighted_speedup"}))
    kwargs.update(_take(raw.get("run", {}), "run",
                        {"out_dir": "out_dir", "seed": "seed",
                         "nrh_sweep": "nrh_sweep", "mechanisms": "sweep_mechanisms",
                         "max_ticks": "max_ticks"}))

    cfg = RunConfig(**kwargs)
    if cfg.mitigation not in ("none", "para", "rfm", "prac", "hydra", "graphene"):
        raise ConfigError(f"unknown mitigation kind {cfg.mitigation!r}")
    if cfg.pacram_mode not in (CONTROLLER, ON_DRAM_DIE):
        raise ConfigError(f"unknown pacram mode {cfg.pacram_mode!r}")
    if cfg.pacram_enabled and not cfg.pacram_profile:
        raise ConfigError("pacram.enabled requires pacram.profile")
    if cfg.pacram_periodic_ext and cfg.mitigation != "none" and cfg.pacram_enabled:
        raise ConfigError("periodic_ext is modeled without a preventive mitigation; "
                          "disable the mitigation or periodic_ext")
    return cfg
