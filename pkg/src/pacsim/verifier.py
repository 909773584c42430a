"""Independent oracles over emitted command logs.

Two checks, both re-derived from the raw configuration rather than from the
device or controller code:

* :func:`replay_timing` re-computes every command's earliest legal tick from
  scratch and reports commands issued early.
* :func:`check_disturbance` walks the log with per-row shadow state and
  reports rows that accumulate the configured disturbance budget without an
  intervening restore, rows whose consecutive partial-restore streak exceeds
  its limit, and rows that go too long without a full restore.

A pure-python walker (:func:`check_disturbance_py`) implements the same
shadow rules for small logs and doubles as a cross-check of the compiled
kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .cmdlog import (CMD_ACT, CMD_PRE, CMD_PREF, CMD_RD, CMD_REF, CMD_WR,
                     CommandLog, LAT_PART)

TICK_NS = 0.75
MAX_REPORTED = 64

V_TIMING, V_DISTURB, V_PCR, V_LIVENESS, V_STATE = 0, 1, 2, 3, 4
VIOLATION_KINDS = {V_TIMING: "timing", V_DISTURB: "disturbance",
                   V_PCR: "consecutive-partials", V_LIVENESS: "full-restore-liveness",
                   V_STATE: "illegal-state"}


def _ticks(ns: float) -> int:
    return math.ceil(ns / TICK_NS - 1e-9)


@dataclass(frozen=True)
class VerifierConfig:
    """Everything the oracles need, in plain numbers."""

    # timing in ns
    t_rcd: float = 14.0
    t_ras: float = 33.0
    t_rp: float = 15.0
    t_bl: float = 2.5
    t_rfc: float = 195.0
    t_refi: float = 3900.0
    t_refw: float = 32_000_000.0
    t_ras_red: float = 33.0       # partial-restore latency for PREF entries
    rfc_partial_scale: float = 1.0
    # topology
    ranks: int = 2
    banks_per_rank: int = 16
    rows_per_bank: int = 65536
    # safety parameters
    nrh_limit: int = 0            # 0 disables the disturbance bound
    n_pcr: int = 0                # 0 disables the partial-streak bound
    t_fcri_ns: float = 0.0
    blast_radius: int = 2

    @property
    def t_rc(self) -> float:
        return self.t_ras + self.t_rp


@dataclass(frozen=True)
class Violation:
    kind: str
    index: int
    tick: int
    rank: int
    bank: int
    row: int
    detail: str = ""


@dataclass
class ShadowRowState:
    """Reference per-row record used by the pure-python walker."""

    disturbance_count: int = 0
    consecutive_partials: int = 0
    last_full_restore_tick: int = 0
    last_any_restore_tick: int = 0


@njit(cache=True)
def _replay_kernel(tick, cmd, rank, bank, row, lat,
                   n_banks_total, banks_per_rank,
                   t_rcd, t_ras, t_rp, t_rc, t_bl, t_rfc, t_rfc_part,
                   t_ras_red,
                   out_idx, out_earliest):
    NEG = np.int64(-1) << 60
    last_act = np.full(n_banks_total, NEG, np.int64)
    pre_done = np.full(n_banks_total, np.int64(0), np.int64)
    pref_done = np.full(n_banks_total, np.int64(0), np.int64)
    rdwr_done = np.full(n_banks_total, np.int64(0), np.int64)
    is_open = np.zeros(n_banks_total, np.uint8)
    n_ranks = n_banks_total // banks_per_rank
    ref_done = np.zeros(n_ranks, np.int64)
    ref_tick_seen = np.full(n_ranks, NEG, np.int64)

    n = tick.shape[0]
    n_viol = 0
    cap = out_idx.shape[0]
    for i in range(n):
        t = tick[i]
        c = cmd[i]
        rk = rank[i]
        g = rk * banks_per_rank + bank[i]
        earliest = np.int64(0)
        bad_state = False
        if c == CMD_ACT:
            e1 = last_act[g] + t_rc
            earliest = max(e1, pre_done[g], pref_done[g], ref_done[rk])
            last_act[g] = t
            is_open[g] = 1
        elif c == CMD_PRE:
            earliest = max(last_act[g] + t_ras, rdwr_done[g], pref_done[g], ref_done[rk])
            pre_done[g] = t + t_rp
            is_open[g] = 0
        elif c == CMD_RD or c == CMD_WR:
            if is_open[g] == 0:
                bad_state = True
            earliest = max(last_act[g] + t_rcd, rdwr_done[g], ref_done[rk])
            rdwr_done[g] = t + t_bl
        elif c == CMD_PREF:
            earliest = max(last_act[g] + t_rc, pre_done[g], pref_done[g], ref_done[rk])
            restore = t_ras_red if lat[i] == LAT_PART else t_ras
            pref_done[g] = t + restore + t_rp
            is_open[g] = 0
        elif c == CMD_REF:
            if ref_tick_seen[rk] == t:
                continue  # one REF command refreshes several rows; sibling entries
            ref_tick_seen[rk] = t
            earliest = ref_done[rk]
            base = rk * banks_per_rank
            for b in range(banks_per_rank):
                e = max(last_act[base + b] + t_rc, pre_done[base + b], pref_done[base + b])
                if e > earliest:
                    earliest = e
            dur = t_rfc_part if lat[i] == LAT_PART else t_rfc
            ref_done[rk] = t + dur
        if t < earliest or bad_state:
            if n_viol < cap:
                out_idx[n_viol] = i
                out_earliest[n_viol] = -1 if bad_state else earliest
            n_viol += 1
    return n_viol


def replay_timing(log: CommandLog, cfg: VerifierConfig) -> list[Violation]:
    """Re-check every command against constraints recomputed from *cfg*."""
    out_idx = np.zeros(MAX_REPORTED, np.int64)
    out_earliest = np.zeros(MAX_REPORTED, np.int64)
    n_banks_total = cfg.ranks * cfg.banks_per_rank
    n = _replay_kernel(log.tick, log.cmd, log.rank, log.bank, log.row, log.latency_class,
                       n_banks_total, cfg.banks_per_rank,
                       _ticks(cfg.t_rcd), _ticks(cfg.t_ras), _ticks(cfg.t_rp),
                       _ticks(cfg.t_rc), _ticks(cfg.t_bl), _ticks(cfg.t_rfc),
                       _ticks(cfg.t_rfc * cfg.rfc_partial_scale),
                       _ticks(cfg.t_ras_red),
                       out_idx, out_earliest)
    violations = []
    for j in range(min(n, MAX_REPORTED)):
        i = int(out_idx[j])
        kind = V_STATE if out_earliest[j] < 0 else V_TIMING
        detail = ("command while bank precharged" if kind == V_STATE
                  else f"issued at {int(log.tick[i])}, earliest legal {int(out_earliest[j])}")
        violations.append(Violation(VIOLATION_KINDS[kind], i, int(log.tick[i]),
                                    int(log.rank[i]), int(log.bank[i]),
                                    int(log.row[i]), detail))
    if n > MAX_REPORTED:
        violations.append(Violation("timing", -1, -1, -1, -1, -1,
                                    f"{n - MAX_REPORTED} further violations suppressed"))
    return violations


@njit(cache=True)
def _shadow_kernel(tick, cmd, rank, bank, row, lat,
                   n_banks_total, banks_per_rank, rows_per_bank,
                   radius, nrh_limit, n_pcr, live_bound,
                   out_kind, out_idx, out_row):
    size = n_banks_total * rows_per_bank
    dist = np.zeros(size, np.int32)
    streak = np.zeros(size, np.int32)
    last_full = np.zeros(size, np.int64)

    n = tick.shape[0]
    totals = np.zeros(3, np.int64)  # disturbance, pcr, liveness
    cap = out_idx.shape[0]
    n_out = 0
    for i in range(n):
        t = tick[i]
        c = cmd[i]
        g = rank[i] * banks_per_rank + bank[i]
        r = row[i]
        base = g * rows_per_bank
        if c == CMD_ACT:
            # a demand activation disturbs every row within the blast radius;
            # refresh-induced activations are absorbed by the threshold
            # guardband (a +-2 refresh policy would otherwise hammer rows at
            # distance 3-4 that no mechanism refreshes)
            lo = r - radius
            if lo < 0:
                lo = 0
            hi = r + radius
            if hi > rows_per_bank - 1:
                hi = rows_per_bank - 1
            for v in range(lo, hi + 1):
                if v == r:
                    continue
                dv = dist[base + v] + 1
                if nrh_limit > 0 and dv >= nrh_limit:
                    if n_out < cap:
                        out_kind[n_out] = 0
                        out_idx[n_out] = i
                        out_row[n_out] = v
                        n_out += 1
                    totals[0] += 1
                    dv = 0
                dist[base + v] = dv
        if c == CMD_ACT:
            # the activated row itself is fully restored by the activation
            dist[base + r] = 0
            streak[base + r] = 0
            last_full[base + r] = t
        elif c == CMD_PREF or c == CMD_REF:
            j = base + r
            dist[j] = 0
            if live_bound > 0 and t - last_full[j] > live_bound:
                if n_out < cap:
                    out_kind[n_out] = 2
                    out_idx[n_out] = i
                    out_row[n_out] = r
                    n_out += 1
                totals[2] += 1
            if lat[i] == LAT_PART:
                streak[j] += 1
                if n_pcr > 0 and streak[j] > n_pcr:
                    if n_out < cap:
                        out_kind[n_out] = 1
                        out_idx[n_out] = i
                        out_row[n_out] = r
                        n_out += 1
                    totals[1] += 1
            else:
                streak[j] = 0
                last_full[j] = t
    return n_out, totals


def check_disturbance(log: CommandLog, cfg: VerifierConfig) -> list[Violation]:
    """Walk the log with shadow per-row state; returns every invariant breach."""
    out_kind = np.zeros(MAX_REPORTED, np.int8)
    out_idx = np.zeros(MAX_REPORTED, np.int64)
    out_row = np.zeros(MAX_REPORTED, np.int64)
    live_bound = 0
    if cfg.nrh_limit or cfg.n_pcr:
        live_bound = _ticks(max(cfg.t_fcri_ns, cfg.t_refw) + cfg.t_refi)
    n_banks_total = cfg.ranks * cfg.banks_per_rank
    n_out, totals = _shadow_kernel(
        log.tick, log.cmd, log.rank, log.bank, log.row, log.latency_class,
        n_banks_total, cfg.banks_per_rank, cfg.rows_per_bank,
        cfg.blast_radius, cfg.nrh_limit, cfg.n_pcr, live_bound,
        out_kind, out_idx, out_row)
    kinds = {0: V_DISTURB, 1: V_PCR, 2: V_LIVENESS}
    violations = []
    for j in range(min(n_out, MAX_REPORTED)):
        i = int(out_idx[j])
        kind = kinds[int(out_kind[j])]
        violations.append(Violation(VIOLATION_KINDS[kind], i, int(log.tick[i]),
                                    int(log.rank[i]), int(log.bank[i]), int(out_row[j])))
    extra = int(totals[0] + totals[1] + totals[2]) - len(violations)
    if extra > 0:
        violations.append(Violation("disturbance", -1, -1, -1, -1, -1,
                                    f"{extra} further violations suppressed"))
    return violations


def disturbance_totals(log: CommandLog, cfg: VerifierConfig) -> dict[str, int]:
    """Totals by kind (cheaper than materializing every violation)."""
    out_kind = np.zeros(MAX_REPORTED, np.int8)
    out_idx = np.zeros(MAX_REPORTED, np.int64)
    out_row = np.zeros(MAX_REPORTED, np.int64)
    live_bound = 0
    if cfg.nrh_limit or cfg.n_pcr:
        live_bound = _ticks(max(cfg.t_fcri_ns, cfg.t_refw) + cfg.t_refi)
    n_banks_total = cfg.ranks * cfg.banks_per_rank
    _, totals = _shadow_kernel(
        log.tick, log.cmd, log.rank, log.bank, log.row, log.latency_class,
        n_banks_total, cfg.banks_per_rank, cfg.rows_per_bank,
        cfg.blast_radius, cfg.nrh_limit, cfg.n_pcr, live_bound,
        out_kind, out_idx, out_row)
    return {"disturbance": int(totals[0]), "consecutive-partials": int(totals[1]),
            "full-restore-liveness": int(totals[2])}


def check_disturbance_py(log: CommandLog, cfg: VerifierConfig) -> list[Violation]:
    """Reference implementation of the shadow walk (small logs, cross-checks)."""
    shadow: dict[tuple[int, int, int], ShadowRowState] = {}
    live_bound = 0
    if cfg.nrh_limit or cfg.n_pcr:
        live_bound = _ticks(max(cfg.t_fcri_ns, cfg.t_refw) + cfg.t_refi)
    violations: list[Violation] = []

    def state(rk: int, b: int, r: int) -> ShadowRowState:
        return shadow.setdefault((rk, b, r), ShadowRowState())

    for i in range(len(log)):
        t, name, rk, b, r, lat = log.entry(i)
        if name == "ACT":
            lo = max(0, r - cfg.blast_radius)
            hi = min(cfg.rows_per_bank - 1, r + cfg.blast_radius)
            for v in range(lo, hi + 1):
                if v == r:
                    continue
                st = state(rk, b, v)
                st.disturbance_count += 1
                if cfg.nrh_limit and st.disturbance_count >= cfg.nrh_limit:
                    violations.append(Violation("disturbance", i, t, rk, b, v))
                    st.disturbance_count = 0
        if name == "ACT":
            st = state(rk, b, r)
            st.disturbance_count = 0
            st.consecutive_partials = 0
            st.last_full_restore_tick = t
            st.last_any_restore_tick = t
        elif name in ("PREF", "REF"):
            st = state(rk, b, r)
            st.disturbance_count = 0
            if live_bound and t - st.last_full_restore_tick > live_bound:
                violations.append(Violation("full-restore-liveness", i, t, rk, b, r))
            if lat == "partial":
                st.consecutive_partials += 1
                if cfg.n_pcr and st.consecutive_partials > cfg.n_pcr:
                    violations.append(Violation("consecutive-partials", i, t, rk, b, r))
            else:
                st.consecutive_partials = 0
                st.last_full_restore_tick = t
            st.last_any_restore_tick = t
    return violations
