"""Compiled inner loops for the activation-level security harness.

One fused kernel advances the attack clock, interleaves periodic refresh,
runs the selected trigger algorithm, applies the restoration-latency
selector, and appends every command to the log arrays. Everything is plain
ints/arrays so numba can keep the whole loop in machine code; the pythonic
plugin classes in :mod:`pacsim.mitigations` implement the same trigger laws
and are cross-checked against these kernels by the test suite.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from numba.core import types
from numba.typed import Dict

# command codes in the packed log
CMD_ACT, CMD_PREF, CMD_REF = 0, 1, 2
# latency classes
LAT_NA, LAT_FULL, LAT_PART = 0, 1, 2

MECH_NONE, MECH_PARA, MECH_RFM, MECH_PRAC, MECH_HYDRA, MECH_GRAPHENE = 0, 1, 2, 3, 4, 5

REF_ROWS_PER_CMD = 8


@njit(cache=True)
def _tracker_observe(trk_rows, trk_counts, n_used, spill, row):
    for i in range(n_used):
        if trk_rows[i] == row:
            trk_counts[i] += 1
            return n_used, spill
    if n_used < trk_rows.shape[0]:
        trk_rows[n_used] = row
        trk_counts[n_used] = 1
        return n_used + 1, spill
    spill += 1
    mi = 0
    for i in range(1, n_used):
        if trk_counts[i] < trk_counts[mi] or (trk_counts[i] == trk_counts[mi]
                                              and trk_rows[i] < trk_rows[mi]):
            mi = i
    if spill >= trk_counts[mi]:
        low = trk_counts[mi]
        trk_rows[mi] = row
        trk_counts[mi] = spill
        spill = low
    return n_used, spill


@njit(cache=True)
def _tracker_top(trk_rows, trk_counts, n_used):
    if n_used == 0:
        return np.int64(-1)
    bi = 0
    for i in range(1, n_used):
        if trk_counts[i] > trk_counts[bi] or (trk_counts[i] == trk_counts[bi]
                                              and trk_rows[i] < trk_rows[bi]):
            bi = i
    return trk_rows[bi]


@njit(cache=True)
def _tracker_reset(trk_rows, trk_counts, n_used, row):
    for i in range(n_used):
        if trk_rows[i] == row:
            trk_rows[i] = trk_rows[n_used - 1]
            trk_counts[i] = trk_counts[n_used - 1]
            return n_used - 1
    return n_used


@njit(cache=True)
def run_attack(
    act_rows,          # int64[n] aggressor row per activation, one bank
    uniforms,          # float64[] per-act draws (probabilistic trigger only)
    mech_id,
    para_p,
    raaimt,
    prac_th,
    hyd_trigger, hyd_group_th, hyd_group_size,
    hyd_cache_entries,
    gra_quota, gra_entries, gra_window_ticks,
    tracker_cap,
    blast_radius, rows_per_bank,
    t_rc, t_rp, t_rfc, t_refi, t_bl,
    t_ras_full, t_ras_red,
    pacram_on, all_partial, epoch_ticks, n_pcr,
    log_tick, log_cmd, log_row, log_lat,
):
    """Drive one maximal-rate adversarial run; returns packed counters.

    Output tuple: (log_len, triggers, full_restores, partial_restores,
    guard_forced_fulls, pref_busy_ticks, end_tick).
    """
    n = act_rows.shape[0]
    cap = log_tick.shape[0]

    gra_table = Dict.empty(types.int64, types.int64)
    gra_spill = np.int64(0)
    gra_last_reset = np.int64(0)

    prac_counters = np.zeros(rows_per_bank, dtype=np.int64)
    touched = np.empty(rows_per_bank, dtype=np.int64)
    in_touched = np.zeros(rows_per_bank, dtype=np.uint8)
    touched_n = 0

    hyd_groups = np.zeros(rows_per_bank // hyd_group_size + 1, dtype=np.int64)
    hyd_rows = np.zeros(rows_per_bank, dtype=np.int64)
    hyd_tags = np.full(hyd_cache_entries, -1, dtype=np.int64)

    trk_rows = np.empty(tracker_cap, dtype=np.int64)
    trk_counts = np.zeros(tracker_cap, dtype=np.int64)
    trk_used = 0
    trk_spill = np.int64(0)

    streak = np.zeros(rows_per_bank, dtype=np.int64)
    last_full_epoch = np.full(rows_per_bank, -1, dtype=np.int64)

    raa = np.int64(0)
    bank_free = np.int64(0)
    next_ref = np.int64(t_refi)
    ref_cursor = np.int64(0)

    log_n = 0
    triggers = 0
    fulls = 0
    partials = 0
    guard_fulls = 0
    pref_busy = np.int64(0)

    for i in range(n):
        row = act_rows[i]
        t_act = bank_free

        # periodic refresh due before the next activation slot
        while next_ref <= t_act and log_n + REF_ROWS_PER_CMD + 8 < cap:
            ref_start = next_ref if next_ref > bank_free else bank_free
            for k in range(REF_ROWS_PER_CMD):
                rr = (ref_cursor + k) % rows_per_bank
                log_tick[log_n] = ref_start
                log_cmd[log_n] = CMD_REF
                log_row[log_n] = rr
                log_lat[log_n] = LAT_FULL
                log_n += 1
                if pacram_on:
                    streak[rr] = 0
                    if not all_partial:
                        last_full_epoch[rr] = ref_start // epoch_ticks
            bank_free = ref_start + t_rfc
            ref_cursor = (ref_cursor + REF_ROWS_PER_CMD) % rows_per_bank
            next_ref += t_refi
            t_act = bank_free

        if log_n + 12 >= cap:
            break

        log_tick[log_n] = t_act
        log_cmd[log_n] = CMD_ACT
        log_row[log_n] = row
        log_lat[log_n] = LAT_NA
        log_n += 1
        bank_free = t_act + t_rc

        # trigger algorithm: decide which aggressor (if any) gets serviced now
        target = np.int64(-1)
        extra_busy = np.int64(0)
        if mech_id == MECH_PARA:
            if uniforms[i] < para_p:
                target = row
        elif mech_id == MECH_RFM:
            trk_used, trk_spill = _tracker_observe(trk_rows, trk_counts, trk_used, trk_spill, row)
            raa += 1
            if raa >= raaimt:
                raa -= raaimt
                target = _tracker_top(trk_rows, trk_counts, trk_used)
                if target >= 0:
                    trk_used = _tracker_reset(trk_rows, trk_counts, trk_used, target)
        elif mech_id == MECH_PRAC:
            c = prac_counters[row] + 1
            prac_counters[row] = c
            if in_touched[row] == 0:
                in_touched[row] = 1
                touched[touched_n] = row
                touched_n += 1
            if c >= prac_th:
                # back-off: device services its hottest row before the next ACT
                bi = 0
                for k in range(1, touched_n):
                    tr = touched[k]
                    tb = touched[bi]
                    if prac_counters[tr] > prac_counters[tb] or (
                            prac_counters[tr] == prac_counters[tb] and tr < tb):
                        bi = k
                target = touched[bi]
                prac_counters[target] = 0
        elif mech_id == MECH_HYDRA:
            g = row // hyd_group_size
            if hyd_groups[g] < hyd_group_th:
                hyd_groups[g] += 1
                if hyd_groups[g] >= hyd_group_th:
                    start = g * hyd_group_size
                    end = min(start + hyd_group_size, rows_per_bank)
                    for rr in range(start, end):
                        hyd_rows[rr] = hyd_group_th
            else:
                slot = row % hyd_cache_entries
                if hyd_tags[slot] != row:
                    if hyd_tags[slot] >= 0:
                        extra_busy += t_bl   # write back the evicted counter
                    extra_busy += t_bl       # fetch this row's counter
                    hyd_tags[slot] = row
                hyd_rows[row] += 1
                if hyd_rows[row] >= hyd_trigger:
                    hyd_rows[row] //= 2
                    target = row
        elif mech_id == MECH_GRAPHENE:
            if gra_window_ticks > 0 and t_act - gra_last_reset >= gra_window_ticks:
                gra_table.clear()
                gra_spill = np.int64(0)
                while t_act - gra_last_reset >= gra_window_ticks:
                    gra_last_reset += gra_window_ticks
            cnt = gra_table.get(row, np.int64(-1))
            if cnt >= 0:
                cnt += 1
            elif len(gra_table) < gra_entries:
                cnt = np.int64(1)
            else:
                gra_spill += 1
                mk = np.int64(-1)
                mv = np.int64(1) << 62
                for k, v in gra_table.items():
                    if v < mv or (v == mv and k < mk):
                        mk, mv = k, v
                if gra_spill >= mv:
                    del gra_table[mk]
                    cnt = gra_spill
                    gra_spill = mv
            if cnt >= 0:
                if cnt >= gra_quota:
                    gra_table[row] = 0
                    target = row
                else:
                    gra_table[row] = cnt

        bank_free += extra_busy  # metadata traffic occupies the channel

        if target >= 0:
            triggers += 1
            lo = target - blast_radius
            if lo < 0:
                lo = 0
            hi = target + blast_radius
            if hi > rows_per_bank - 1:
                hi = rows_per_bank - 1
            for v in range(lo, hi + 1):
                if v == target:
                    continue
                pref_t = bank_free
                lat_code = LAT_FULL
                restore = t_ras_full
                if pacram_on:
                    if streak[v] >= n_pcr:
                        guard_fulls += 1
                    elif all_partial or last_full_epoch[v] == pref_t // epoch_ticks:
                        lat_code = LAT_PART
                        restore = t_ras_red
                if lat_code == LAT_FULL:
                    fulls += 1
                    streak[v] = 0
                    if pacram_on and not all_partial:
                        last_full_epoch[v] = pref_t // epoch_ticks
                else:
                    partials += 1
                    streak[v] += 1
                log_tick[log_n] = pref_t
                log_cmd[log_n] = CMD_PREF
                log_row[log_n] = v
                log_lat[log_n] = lat_code
                log_n += 1
                bank_free = pref_t + restore + t_rp
                pref_busy += restore + t_rp

    return log_n, triggers, fulls, partials, guard_fulls, pref_busy, bank_free
