"""DDR device model: timings, topology, and per-bank command legality.

All timing parameters are declared in nanoseconds and converted once to
controller clock ticks (0.75 ns/tick by default). Command legality is a
per-bank state machine; periodic refresh blocks the whole rank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

TICK_NS = 0.75  # controller command-clock period


class IllegalCommandError(RuntimeError):
    """A command was issued before its earliest legal tick (simulator bug)."""


def ns_to_ticks(ns: float) -> int:
    return math.ceil(ns / TICK_NS - 1e-9)


@dataclass(frozen=True)
class DeviceTimings:
    """DDR timing parameters in nanoseconds."""

    t_rcd: float = 14.0
    t_ras: float = 33.0
    t_rp: float = 15.0
    t_cl: float = 14.0
    t_bl: float = 2.5
    t_rfc: float = 195.0
    t_refi: float = 3900.0
    t_refw: float = 32_000_000.0

    @property
    def t_rc(self) -> float:
        return self.t_ras + self.t_rp

    def ticks(self, ns: float) -> int:
        return ns_to_ticks(ns)


DDR5_DEFAULT = DeviceTimings()
DDR4_DEFAULT = DeviceTimings(t_rfc=350.0, t_refi=7800.0, t_refw=64_000_000.0)

TIMING_PRESETS = {"ddr5_default": DDR5_DEFAULT, "ddr4_default": DDR4_DEFAULT}


def timings_from_preset(name: str, **overrides) -> DeviceTimings:
    try:
        base = TIMING_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown timing preset {name!r}") from None
    return replace(base, **overrides) if overrides else base


@dataclass(frozen=True)
class Topology:
    channels: int = 1
    ranks: int = 2
    bankgroups: int = 8
    banks_per_group: int = 2
    rows_per_bank: int = 65536
    columns: int = 128  # cache lines per row

    @property
    def banks_per_rank(self) -> int:
        return self.bankgroups * self.banks_per_group

    @property
    def total_banks(self) -> int:
        return self.channels * self.ranks * self.banks_per_rank

    @property
    def capacity_bytes(self) -> int:
        return self.total_banks * self.rows_per_bank * self.columns * 64


ACT, PRE, RD, WR, REF, RFM, PREF = "ACT", "PRE", "RD", "WR", "REF", "RFM", "PREF"

PRECHARGED, ACTIVE, REFRESHING = "Precharged", "Active", "Refreshing"


class MisraGriesTracker:
    """Small frequent-items table the device uses to pick service targets.

    Follows the counter-table scheme with a spillover counter: hits increment,
    free slots claim, and overflowing misses feed the spillover which can
    displace the current minimum entry.
    """

    def __init__(self, capacity: int = 16):
        self.capacity = capacity
        self.counts: dict[int, int] = {}
        self.spill = 0

    def observe(self, key: int) -> None:
        counts = self.counts
        if key in counts:
            counts[key] += 1
        elif len(counts) < self.capacity:
            counts[key] = 1
        else:
            self.spill += 1
            victim, low = min(counts.items(), key=lambda kv: (kv[1], kv[0]))
            if self.spill >= low:
                del counts[victim]
                counts[key] = self.spill
                self.spill = low

    def top(self) -> Optional[int]:
        if not self.counts:
            return None
        return max(self.counts.items(), key=lambda kv: (kv[1], -kv[0]))[0]

    def reset_entry(self, key: int) -> None:
        self.counts.pop(key, None)

    def clear(self) -> None:
        self.counts.clear()
        self.spill = 0


@dataclass
class BankState:
    """Command-legality state for one bank."""

    timings: DeviceTimings
    rows_per_bank: int = 65536
    prac_enabled: bool = False
    rfm_tracking: bool = False
    prac_threshold: int = 0
    tracker_size: int = 16

    state: str = PRECHARGED
    open_row: Optional[int] = None
    busy_until: int = 0
    earliest: dict = field(default_factory=dict)
    prac_counters: dict = field(default_factory=dict)
    rfm_tracker: Optional[MisraGriesTracker] = None
    backoff_pending: bool = False

    def __post_init__(self) -> None:
        self.earliest = {c: 0 for c in (ACT, PRE, RD, WR, REF, PREF)}
        if self.rfm_tracking or self.prac_enabled:
            self.rfm_tracker = MisraGriesTracker(self.tracker_size)
        t = self.timings
        self._t_rcd = ns_to_ticks(t.t_rcd)
        self._t_ras = ns_to_ticks(t.t_ras)
        self._t_rp = ns_to_ticks(t.t_rp)
        self._t_rc = ns_to_ticks(t.t_rc)
        self._t_bl = ns_to_ticks(t.t_bl)
        self._t_rfc = ns_to_ticks(t.t_rfc)

    def legal_at(self, cmd: str, now: int) -> int:
        """Earliest tick at or after *now* where *cmd* may issue."""
        if cmd in (RD, WR) and self.state != ACTIVE:
            raise IllegalCommandError(f"{cmd} while {self.state}")
        if cmd in (ACT, PREF, REF) and self.state == ACTIVE:
            raise IllegalCommandError(f"{cmd} while a row is open")
        return max(self.earliest.get(cmd, 0), now)

    def issue(self, cmd: str, now: int, row: Optional[int] = None,
              restore_latency_ns: Optional[float] = None) -> int:
        """Apply *cmd* at *now*; returns the completion tick.

        ``restore_latency_ns`` parameterizes the charge-restoration time of a
        PREF composite (defaults to nominal t_RAS).
        """
        legal = self.legal_at(cmd, now)
        if now < legal:
            raise IllegalCommandError(f"{cmd} at {now} before legal tick {legal}")
        ear = self.earliest
        if cmd == ACT:
            self.state = ACTIVE
            self.open_row = row
            ear[RD] = ear[WR] = now + self._t_rcd
            ear[PRE] = now + self._t_ras
            ear[ACT] = ear[PREF] = ear[REF] = now + self._t_rc
            if self.prac_enabled:
                count = self.prac_counters.get(row, 0) + 1
                self.prac_counters[row] = count
                if count >= self.prac_threshold:
                    self.backoff_pending = True
            if self.rfm_tracker is not None:
                self.rfm_tracker.observe(row)
            self.busy_until = now + self._t_rcd
            return now + self._t_rcd
        if cmd == PRE:
            self.state = PRECHARGED
            self.open_row = None
            ear[ACT] = max(ear[ACT], now + self._t_rp)
            ear[PREF] = max(ear[PREF], now + self._t_rp)
            ear[REF] = max(ear[REF], now + self._t_rp)
            self.busy_until = now + self._t_rp
            return now + self._t_rp
        if cmd in (RD, WR):
            done = now + self._t_bl
            ear[RD] = max(ear[RD], done)
            ear[WR] = max(ear[WR], done)
            ear[PRE] = max(ear[PRE], done)   # the burst must drain first
            self.busy_until = done
            return done
        if cmd == PREF:
            # Composite open+close at a chosen restoration latency.
            restore = ns_to_ticks(restore_latency_ns if restore_latency_ns is not None
                                  else self.timings.t_ras)
            done = now + restore + self._t_rp
            for c in (ACT, PRE, RD, WR, REF, PREF):
                ear[c] = max(ear[c], done)
            self.busy_until = done
            return done
        if cmd == REF:
            # reduced-latency refresh windows shorten the blocking time
            dur = (ns_to_ticks(restore_latency_ns) if restore_latency_ns is not None
                   else self._t_rfc)
            done = now + dur
            for c in (ACT, PRE, RD, WR, REF, PREF):
                ear[c] = max(ear[c], done)
            self.busy_until = done
            return done
        raise ValueError(f"unknown command {cmd!r}")

    def prac_check_backoff(self) -> Optional[bool]:
        """True when some row counter has reached the device threshold."""
        if not self.prac_enabled:
            return None
        return self.backoff_pending or None

    def service_target(self) -> Optional[int]:
        """Row the device would preventively service next (its top aggressor)."""
        if self.prac_enabled and self.prac_counters:
            row = max(self.prac_counters.items(), key=lambda kv: (kv[1], -kv[0]))[0]
            return row
        if self.rfm_tracker is not None:
            return self.rfm_tracker.top()
        return None

    def rfm_service_reset(self, row: int) -> None:
        """Forget the serviced aggressor so counting restarts."""
        if self.prac_enabled:
            self.prac_counters.pop(row, None)
            if not any(c >= self.prac_threshold for c in self.prac_counters.values()):
                self.backoff_pending = False
        if self.rfm_tracker is not None:
            self.rfm_tracker.reset_entry(row)


def victim_rows(row: int, blast_radius: int, rows_per_bank: int) -> list[int]:
    """Rows within the blast radius on both sides, clamped to the bank."""
    if blast_radius < 1:
        raise ValueError("blast_radius must be >= 1")
    lo = max(0, row - blast_radius)
    hi = min(rows_per_bank - 1, row + blast_radius)
    return [r for r in range(lo, hi + 1) if r != row]


def rfm_service(bank: BankState, now: int,
                restore_latency_ns: Optional[float] = None,
                blast_radius: int = 2) -> tuple[list[int], int]:
    """Device-side preventive action: refresh the top aggressor's neighbors.

    Returns the refreshed victim rows and the completion tick. An empty
    tracker is a no-op service.
    """
    target = bank.service_target()
    if target is None:
        return [], now
    victims = victim_rows(target, blast_radius, bank.rows_per_bank)
    done = now
    for _ in victims:
        done = bank.issue(PREF, max(done, bank.legal_at(PREF, done)),
                          restore_latency_ns=restore_latency_ns)
    bank.rfm_service_reset(target)
    return victims, done
