"""Activation-level adversarial runs for read-disturbance safety checks.

The worst case for a preventive-refresh mechanism is an attacker activating
aggressor rows back-to-back at the minimum row-cycle time, which needs no
request scheduling model: the emitted command stream is fully determined by
the activation sequence, the trigger algorithm, the restoration-latency
selector, and periodic refresh. This module drives that stream through the
compiled kernels, producing a timing-legal command log that the independent
verifier can replay.

Deployment note: when a mitigation is configured for a threshold below the
module's own sustained threshold, the full-restore interval is re-derived at
the deployed threshold (the worst-case hammer cycle shortens with it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from . import cmdlog
from .cmdlog import CommandLog
from .device import DeviceTimings, Topology, ns_to_ticks
from .mitigations import (GRAPHENE_QUOTA_DIV, HYDRA_CACHE_ENTRIES,
                          HYDRA_GROUP_SIZE, HYDRA_TRIGGER_DIV, PARA_CONSTANT,
                          PRAC_THRESHOLD_DIV, RFM_RAAIMT_DIV)
from .pacram import PacramConfig, derive_config, scale_mitigation_thresholds
from .profiles import ChipProfile, RestorationLevel
from .verifier import VerifierConfig

MECH_IDS = {"none": K.MECH_NONE, "para": K.MECH_PARA, "rfm": K.MECH_RFM,
            "prac": K.MECH_PRAC, "hydra": K.MECH_HYDRA, "graphene": K.MECH_GRAPHENE}

# the kernels emit log codes directly; they must agree with the log format
assert (K.CMD_ACT, K.CMD_PREF, K.CMD_REF) == (cmdlog.CMD_ACT, cmdlog.CMD_PREF, cmdlog.CMD_REF)
assert (K.LAT_NA, K.LAT_FULL, K.LAT_PART) == (cmdlog.LAT_NA, cmdlog.LAT_FULL, cmdlog.LAT_PART)

DOUBLE_SIDED, SINGLE_SIDED, HALF_DOUBLE = "double_sided", "single", "half_double"

HALF_DOUBLE_FAR_BURST = 32  # far-row activations per near-row activation pair


def attack_rows(pattern: str, victim_row: int, n_acts: int,
                rows_per_bank: int = 65536) -> np.ndarray:
    """Aggressor-row sequence hammering *victim_row* under the given pattern."""
    if not 2 <= victim_row < rows_per_bank - 2:
        raise ValueError("victim row too close to the bank edge")
    if pattern == DOUBLE_SIDED:
        rows = np.empty(n_acts, np.int64)
        rows[0::2] = victim_row - 1
        rows[1::2] = victim_row + 1
        return rows
    if pattern == SINGLE_SIDED:
        return np.full(n_acts, victim_row - 1, np.int64)
    if pattern == HALF_DOUBLE:
        # long far-row bursts at distance two, then a brief near-row touch
        period = 2 * HALF_DOUBLE_FAR_BURST + 2
        block = np.empty(period, np.int64)
        block[:HALF_DOUBLE_FAR_BURST] = victim_row - 2
        block[HALF_DOUBLE_FAR_BURST:2 * HALF_DOUBLE_FAR_BURST] = victim_row + 2
        block[-2] = victim_row - 1
        block[-1] = victim_row + 1
        reps = n_acts // period + 1
        return np.tile(block, reps)[:n_acts]
    raise ValueError(f"unknown attack pattern {pattern!r}")


@dataclass
class SecurityRun:
    """Outcome of one adversarial run."""

    log: CommandLog
    nrh_scaled: int
    pacram: Optional[PacramConfig]
    triggers: int
    full_restores: int
    partial_restores: int
    guard_forced_fulls: int
    pref_busy_ticks: int
    end_tick: int

    def verifier_config(self, timings: DeviceTimings, topology: Topology,
                        blast_radius: int = 2) -> VerifierConfig:
        t_ras_red = self.pacram.t_ras_red if self.pacram else timings.t_ras
        return VerifierConfig(
            t_rcd=timings.t_rcd, t_ras=timings.t_ras, t_rp=timings.t_rp,
            t_bl=timings.t_bl, t_rfc=timings.t_rfc, t_refi=timings.t_refi,
            t_refw=timings.t_refw, t_ras_red=t_ras_red,
            ranks=1, banks_per_rank=1, rows_per_bank=topology.rows_per_bank,
            nrh_limit=self.nrh_scaled,
            n_pcr=self.pacram.n_pcr if self.pacram else 0,
            t_fcri_ns=self.pacram.t_fcri_ns if self.pacram else 0.0,
            blast_radius=blast_radius)


def deployed_pacram(profile: ChipProfile, lv: RestorationLevel, timings: DeviceTimings,
                    nrh_config: int) -> tuple[PacramConfig, int]:
    """Operating config for *profile*@*lv* plus the scaled mitigation threshold.

    The full-restore interval comes from the module's own parameters; the
    per-row partial-streak guard (not the interval) is what bounds
    consecutive partial restores when a mitigation is configured far below
    the module's sustained threshold and so refreshes rows much faster than
    the interval derivation assumes.
    """
    nrh_scaled = scale_mitigation_thresholds([nrh_config], profile, lv)[0]
    cfg = derive_config(profile, lv, timings)
    return cfg, nrh_scaled


def run_adversarial(mechanism: str, nrh_config: int, n_acts: int,
                    pattern: str = DOUBLE_SIDED, victim_row: int = 1000,
                    pacram_cfg: Optional[PacramConfig] = None,
                    nrh_scaled: Optional[int] = None,
                    timings: DeviceTimings = None, topology: Topology = None,
                    blast_radius: int = 2, seed: int = 0,
                    mech_params: Optional[dict] = None) -> SecurityRun:
    """Run one adversarial activation stream through a trigger algorithm.

    ``nrh_scaled`` is the threshold the mechanism is configured with
    (defaults to ``nrh_config``; pass the scaled value when reduced-latency
    refresh is enabled). Returns the command log plus counters.
    """
    timings = timings or DeviceTimings()
    topology = topology or Topology()
    mech_params = mech_params or {}
    if mechanism not in MECH_IDS:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    nrh = nrh_scaled if nrh_scaled is not None else nrh_config

    rows = attack_rows(pattern, victim_row, n_acts, topology.rows_per_bank)

    para_p = 0.0
    uniforms = np.empty(0, np.float64)
    if mechanism == "para":
        para_p = min(1.0, mech_params.get("constant", PARA_CONSTANT) / nrh)
        rng = np.random.Generator(np.random.PCG64(seed))
        uniforms = rng.random(n_acts)

    raaimt = mech_params.get("raaimt", max(1, nrh // RFM_RAAIMT_DIV))
    prac_th = mech_params.get("threshold", max(1, nrh // PRAC_THRESHOLD_DIV))
    hyd_trigger = mech_params.get("trigger", max(1, nrh // HYDRA_TRIGGER_DIV))
    hyd_group_th = mech_params.get("group_threshold", max(1, hyd_trigger // 2))
    gra_quota = mech_params.get("quota", max(1, nrh // GRAPHENE_QUOTA_DIV))
    window_acts = int(timings.t_refw / timings.t_rc)
    gra_entries = mech_params.get("table_entries", math.ceil(window_acts / gra_quota))

    # worst-case trigger rate bounds the log size
    min_quota = {"none": n_acts + 1, "para": 1, "rfm": raaimt, "prac": prac_th,
                 "hydra": max(1, hyd_trigger - hyd_trigger // 2),
                 "graphene": gra_quota}[mechanism]
    max_prefs = (n_acts // min_quota + 1) * 2 * blast_radius
    t_rc_ticks = ns_to_ticks(timings.t_rc)
    lat_ticks = ns_to_ticks((pacram_cfg.t_ras_red if pacram_cfg else timings.t_ras)
                            + timings.t_rp)
    est_dur = n_acts * t_rc_ticks + max_prefs * lat_ticks
    max_refs = (est_dur // ns_to_ticks(timings.t_refi) + 2) * K.REF_ROWS_PER_CMD
    cap = n_acts + max_prefs + int(max_refs * 1.3) + 64

    log_tick = np.empty(cap, np.int64)
    log_cmd = np.empty(cap, np.int8)
    log_row = np.empty(cap, np.int32)
    log_lat = np.empty(cap, np.int8)

    pacram_on = pacram_cfg is not None
    all_partial = bool(pacram_cfg.all_partial) if pacram_on else False
    epoch_ticks = 1
    if pacram_on and not all_partial:
        epoch_ticks = max(1, ns_to_ticks(pacram_cfg.t_fcri_ns))

    n_log, triggers, fulls, partials, guard, busy, end = K.run_attack(
        rows, uniforms, MECH_IDS[mechanism],
        para_p, raaimt, prac_th,
        hyd_trigger, hyd_group_th,
        mech_params.get("group_size", HYDRA_GROUP_SIZE),
        mech_params.get("cache_entries", HYDRA_CACHE_ENTRIES),
        gra_quota, gra_entries, ns_to_ticks(timings.t_refw),
        mech_params.get("tracker_size", 16),
        blast_radius, topology.rows_per_bank,
        t_rc_ticks, ns_to_ticks(timings.t_rp), ns_to_ticks(timings.t_rfc),
        ns_to_ticks(timings.t_refi), ns_to_ticks(timings.t_bl),
        ns_to_ticks(timings.t_ras),
        ns_to_ticks(pacram_cfg.t_ras_red) if pacram_on else ns_to_ticks(timings.t_ras),
        pacram_on, all_partial, epoch_ticks,
        pacram_cfg.n_pcr if pacram_on else 0,
        log_tick, log_cmd, log_row, log_lat)

    if n_log + 16 >= cap:
        raise RuntimeError("command log capacity estimate too small")

    n_log = int(n_log)
    log = CommandLog(log_tick[:n_log].copy(), log_cmd[:n_log].copy(),
                     np.zeros(n_log, np.int16), np.zeros(n_log, np.int16),
                     log_row[:n_log].copy(), log_lat[:n_log].copy())
    return SecurityRun(log, nrh, pacram_cfg, int(triggers), int(fulls),
                       int(partials), int(guard), int(busy), int(end))
