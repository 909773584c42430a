"""Memory controller: address mapping, request queues, FR-FCFS scheduling,
periodic refresh, preventive-refresh issue, and the channel event loop.

Scheduling priority, highest first: overdue periodic refresh (plus the
precharges it needs), device back-off service, pending preventive refreshes,
row-hit reads/writes oldest-first, then the oldest request's activate or
conflicting-row precharge. A bank with a pending preventive refresh accepts
no new activates until it is serviced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .cmdlog import CommandLog
from .device import (ACT, PRE, RD, WR, REF, PREF, BankState, DeviceTimings,
                     Topology, ns_to_ticks)
from .mitigations import MetadataAccess, MitigationPlugin, NoMitigation, Refresh, RfmRequest
from .pacram import FULL, PARTIAL, PacramState
from .workload import EnergyModel

CPU_CYCLES_PER_TICK = 2.4   # 3.2 GHz core clock against the 0.75 ns command clock
QUEUE_DEPTH = 64
WRITE_HI, WRITE_LO = 54, 26
MOP_GROUP = 4


@dataclass(frozen=True)
class MappedAddress:
    channel: int
    rank: int
    bankgroup: int
    bank: int
    row: int
    column: int

    def flat_bank(self, topology: Topology) -> int:
        return ((self.rank * topology.bankgroups) + self.bankgroup) * topology.banks_per_group + self.bank


class MopMapper:
    """Minimalist open-page interleaving: a small group of consecutive lines
    per row, then banks rotate before columns advance."""

    def __init__(self, topology: Topology, group: int = MOP_GROUP):
        if topology.columns % group:
            raise ValueError("columns must be a multiple of the group size")
        self.topology = topology
        self.group = group

    def map_address(self, addr: int) -> MappedAddress:
        topo = self.topology
        if not 0 <= addr < topo.capacity_bytes:
            raise ValueError(f"address 0x{addr:x} outside capacity")
        line = addr >> 6
        line, col_lo = divmod(line, self.group)
        line, channel = divmod(line, topo.channels)
        line, bankgroup = divmod(line, topo.bankgroups)
        line, bank = divmod(line, topo.banks_per_group)
        line, rank = divmod(line, topo.ranks)
        row, col_hi = divmod(line, topo.columns // self.group)
        return MappedAddress(channel, rank, bankgroup, bank, row,
                             col_hi * self.group + col_lo)

    def compose(self, *, channel: int, rank: int, bankgroup: int, bank: int,
                row: int, column: int) -> int:
        topo = self.topology
        col_hi, col_lo = divmod(column, self.group)
        line = row
        line = line * (topo.columns // self.group) + col_hi
        line = line * topo.ranks + rank
        line = line * topo.banks_per_group + bank
        line = line * topo.bankgroups + bankgroup
        line = line * topo.channels + channel
        line = line * self.group + col_lo
        return line << 6


@dataclass
class MemRequest:
    kind: str                  # RD | WR
    mapped: MappedAddress
    core_id: int
    arrival: int
    metadata: bool = False


class MemController:
    """One channel's controller, including device bank state and accounting."""

    def __init__(self, timings: DeviceTimings, topology: Topology,
                 mitigation: Optional[MitigationPlugin] = None,
                 pacram: Optional[PacramState] = None,
                 energy: Optional[EnergyModel] = None,
                 queue_depth: int = QUEUE_DEPTH, blast_radius: int = 2,
                 keep_log: bool = True, periodic_ext: bool = False):
        self.timings = timings
        self.topology = topology
        self.mitigation = mitigation or NoMitigation(1 << 30)
        self.pacram = pacram
        self.energy_model = energy or EnergyModel()
        self.queue_depth = queue_depth
        self.blast_radius = blast_radius
        self.periodic_ext = periodic_ext

        prac = self.mitigation.name == "prac"
        rfm = self.mitigation.name == "rfm"
        self._prac_mode = prac
        self.banks = [BankState(timings, topology.rows_per_bank,
                                prac_enabled=prac, rfm_tracking=rfm,
                                prac_threshold=getattr(self.mitigation, "threshold", 0) or 1)
                      for _ in range(topology.ranks * topology.banks_per_rank)]
        self.read_q: list[MemRequest] = []
        self.write_q: list[MemRequest] = []
        self.pending_prefs: dict[int, list[int]] = {}      # flat bank -> victim rows
        self.pending_rfms: list[int] = []                  # flat banks, fifo
        self.refresh_deadline = [ns_to_ticks(timings.t_refi)] * topology.ranks
        self.ref_cursor = [0] * topology.ranks
        self.draining = False

        self._t_refi = ns_to_ticks(timings.t_refi)
        self._t_refw = ns_to_ticks(timings.t_refw)
        self._t_cl = ns_to_ticks(timings.t_cl)
        self._t_bl = ns_to_ticks(timings.t_bl)
        self._rows_per_ref = max(1, topology.rows_per_bank // 8192)

        self.log_entries: Optional[list] = [] if keep_log else None
        self.completions: list[tuple[int, MemRequest]] = []
        self.energy_pj = 0.0
        self.pref_busy = [0] * len(self.banks)
        self.pref_full = 0
        self.pref_partial = 0
        self.reads = 0
        self.writes = 0

    # -- queue admission -------------------------------------------------

    def can_accept(self, kind: str) -> bool:
        q = self.read_q if kind == RD else self.write_q
        return len(q) < self.queue_depth

    def enqueue(self, req: MemRequest) -> None:
        (self.read_q if req.kind == RD else self.write_q).append(req)

    # -- logging / energy helpers ----------------------------------------

    def _log(self, tick: int, cmd: str, rank: int, bank: int, row: int, lat: str) -> None:
        if self.log_entries is not None:
            self.log_entries.append((tick, cmd, rank, bank, row, lat))

    def command_log(self) -> CommandLog:
        return CommandLog.from_lists(self.log_entries or [])

    # -- scheduling ------------------------------------------------------

    def _bank(self, rank: int, idx_in_rank: int) -> BankState:
        return self.banks[rank * self.topology.banks_per_rank + idx_in_rank]

    def _ref_pending(self, now: int, rank: int) -> bool:
        return now >= self.refresh_deadline[rank]

    def _pick_request(self, now: int) -> Optional[tuple[MemRequest, bool]]:
        """FR-FCFS: oldest row hit first, else the oldest request."""
        self.draining = (len(self.write_q) >= WRITE_HI
                         or (self.draining and len(self.write_q) > WRITE_LO)
                         or (not self.read_q and bool(self.write_q)))
        queues = [self.write_q, self.read_q] if self.draining else [self.read_q, self.write_q]
        for q in queues:
            for req in q:
                gid = req.mapped.flat_bank(self.topology)
                if gid in self.pending_prefs or gid in self.pending_rfms:
                    continue
                bank = self.banks[gid]
                if self._ref_pending(now, req.mapped.rank):
                    continue
                if bank.state == "Active" and bank.open_row == req.mapped.row:
                    return req, True
            for req in q:
                gid = req.mapped.flat_bank(self.topology)
                if gid in self.pending_prefs or gid in self.pending_rfms:
                    continue
                if self._ref_pending(now, req.mapped.rank):
                    continue
                return req, False
            if q and self.draining:
                break
        return None

    def schedule(self, now: int) -> tuple[bool, Optional[int]]:
        """Issue at most one command at *now*.

        Returns ``(issued, wake)``: when nothing was legal yet, *wake* is the
        earliest tick at which the highest-priority blocked work becomes
        legal (None if the controller is idle).
        """
        candidates: list[tuple[int, int, object]] = []   # (priority, legal, thunk)

        # 1. periodic refresh per rank (close open banks first)
        for rank in range(self.topology.ranks):
            if not self._ref_pending(now, rank):
                continue
            banks = [self._bank(rank, b) for b in range(self.topology.banks_per_rank)]
            open_idx = next((i for i, b in enumerate(banks) if b.state == "Active"), None)
            if open_idx is not None:
                legal = banks[open_idx].legal_at(PRE, now)
                candidates.append((0, legal, ("pre", rank, open_idx)))
            else:
                legal = max(b.legal_at(REF, now) for b in banks)
                candidates.append((0, legal, ("ref", rank)))

        # 2. device back-off service
        if self._prac_mode:
            for gid, bank in enumerate(self.banks):
                if bank.backoff_pending and gid not in self.pending_rfms:
                    self.pending_rfms.append(gid)
        if self.pending_rfms:
            self.pending_rfms.sort()
            gid = self.pending_rfms[0]
            bank = self.banks[gid]
            if bank.state == "Active":
                legal = bank.legal_at(PRE, now)
                candidates.append((1, legal, ("pre", gid // self.topology.banks_per_rank,
                                              gid % self.topology.banks_per_rank)))
            else:
                candidates.append((1, bank.legal_at(PREF, now), ("rfm", gid)))

        # 3. pending preventive refreshes
        for gid in sorted(self.pending_prefs):
            bank = self.banks[gid]
            if bank.state == "Active":
                legal = bank.legal_at(PRE, now)
                candidates.append((2, legal, ("pre", gid // self.topology.banks_per_rank,
                                              gid % self.topology.banks_per_rank)))
            else:
                candidates.append((2, bank.legal_at(PREF, now), ("pref", gid)))
            break

        # 4./5. demand traffic
        picked = self._pick_request(now)
        if picked is not None:
            req, row_hit = picked
            gid = req.mapped.flat_bank(self.topology)
            bank = self.banks[gid]
            if row_hit:
                candidates.append((3, bank.legal_at(req.kind, now), ("rdwr", req)))
            elif bank.state == "Active":
                candidates.append((4, bank.legal_at(PRE, now),
                                   ("pre", req.mapped.rank, gid % self.topology.banks_per_rank)))
            else:
                candidates.append((4, bank.legal_at(ACT, now), ("act", req)))

        if not candidates:
            return False, None
        for _, legal, thunk in sorted(candidates, key=lambda c: (c[0], c[1])):
            if legal <= now:
                self._dispatch(now, thunk)
                return True, now + 1
        return False, min(legal for _, legal, _ in candidates)

    def _dispatch(self, now: int, thunk) -> None:
        op = thunk[0]
        if op == "pre":
            self._issue_pre(now, thunk[1], thunk[2])
        elif op == "ref":
            self._issue_ref(now, thunk[1])
        elif op == "rfm":
            self._issue_rfm_service(now, thunk[1])
        elif op == "pref":
            self._issue_pref(now, thunk[1])
        elif op == "rdwr":
            self._issue_rdwr(now, thunk[1])
        elif op == "act":
            self._issue_act(now, thunk[1])

    # -- command issue ---------------------------------------------------

    def _issue_pre(self, now: int, rank: int, bank_in_rank: int) -> None:
        bank = self._bank(rank, bank_in_rank)
        row = bank.open_row
        bank.issue(PRE, now)
        self.energy_pj += self.energy_model.pre_pj
        self._log(now, PRE, rank, bank_in_rank, row if row is not None else 0, "na")

    def _issue_ref(self, now: int, rank: int) -> None:
        topo = self.topology
        lat = FULL
        scale = 1.0
        if self.periodic_ext and self.pacram is not None:
            window = now // self._t_refw
            lat = self.pacram.periodic_ext.window_latency(window)
            if lat == PARTIAL:
                scale = self.pacram.config.level.m_factor
        start = self.ref_cursor[rank]
        rows = [(start + i) % topo.rows_per_bank for i in range(self._rows_per_ref)]
        ref_ns = self.timings.t_rfc * scale
        for b in range(topo.banks_per_rank):
            bank = self._bank(rank, b)
            bank.issue(REF, now, restore_latency_ns=ref_ns)
            for row in rows:
                self._log(now, REF, rank, b, row, "partial" if lat == PARTIAL else "full")
            if self.pacram is not None:
                self.pacram.on_periodic_refresh(rank * topo.banks_per_rank + b, rows,
                                                now, partial=lat == PARTIAL)
            self.mitigation.on_periodic_refresh(rank * topo.banks_per_rank + b, rows, now)
            self.energy_pj += self.energy_model.refresh(len(rows), scale)
        self.ref_cursor[rank] = (start + self._rows_per_ref) % topo.rows_per_bank
        self.refresh_deadline[rank] += self._t_refi

    def _select_latency(self, gid: int, row: int, now: int) -> tuple[str, float]:
        if self.pacram is None:
            return FULL, self.timings.t_ras
        cls, t_ras = self.pacram.select_latency(gid, row, now)
        return cls, float(t_ras)

    def _do_pref(self, now: int, gid: int, row: int) -> int:
        bank = self.banks[gid]
        cls, restore_ns = self._select_latency(gid, row, now)
        done = bank.issue(PREF, now, restore_latency_ns=restore_ns)
        if cls == FULL:
            self.pref_full += 1
        else:
            self.pref_partial += 1
        self.pref_busy[gid] += done - now
        self.energy_pj += self.energy_model.preventive(restore_ns)
        rank, b = divmod(gid, self.topology.banks_per_rank)
        self._log(now, PREF, rank, b, row, "full" if cls == FULL else "partial")
        return done

    def _issue_pref(self, now: int, gid: int) -> None:
        rows = self.pending_prefs[gid]
        row = rows.pop(0)
        self._do_pref(now, gid, row)
        if not rows:
            del self.pending_prefs[gid]

    def _issue_rfm_service(self, now: int, gid: int) -> None:
        bank = self.banks[gid]
        target = bank.service_target()
        self.pending_rfms.remove(gid)
        if target is None:
            return
        victims = self.mitigation.victims(target)
        t = now
        for row in victims:
            t = max(t, bank.legal_at(PREF, t))
            t = self._do_pref(t, gid, row)
        bank.rfm_service_reset(target)

    def _issue_act(self, now: int, req: MemRequest) -> None:
        gid = req.mapped.flat_bank(self.topology)
        bank = self.banks[gid]
        bank.issue(ACT, now, row=req.mapped.row)
        self.energy_pj += self.energy_model.act(self.timings.t_ras)
        self._log(now, ACT, req.mapped.rank, gid % self.topology.banks_per_rank,
                  req.mapped.row, "na")
        for action in self.mitigation.on_activate(gid, req.mapped.row, now):
            self._apply_action(action)

    def _apply_action(self, action) -> None:
        if isinstance(action, Refresh):
            self.pending_prefs.setdefault(action.bank, []).extend(
                r for r in action.rows
                if r not in self.pending_prefs.get(action.bank, ()))
        elif isinstance(action, RfmRequest):
            if action.bank not in self.pending_rfms:
                self.pending_rfms.append(action.bank)
        elif isinstance(action, MetadataAccess):
            rank, b = divmod(action.bank, self.topology.banks_per_rank)
            row = self.topology.rows_per_bank - 1 - (action.slot % 64)
            mapped = MappedAddress(0, rank, b // self.topology.banks_per_group,
                                   b % self.topology.banks_per_group, row,
                                   action.slot % self.topology.columns)
            self.enqueue(MemRequest(WR if action.write else RD, mapped,
                                    core_id=-1, arrival=0, metadata=True))

    def _issue_rdwr(self, now: int, req: MemRequest) -> tuple[int, MemRequest]:
        gid = req.mapped.flat_bank(self.topology)
        bank = self.banks[gid]
        bank.issue(req.kind, now)
        q = self.read_q if req.kind == RD else self.write_q
        q.remove(req)
        if req.kind == RD:
            self.reads += 1
            self.energy_pj += self.energy_model.rd_pj
        else:
            self.writes += 1
            self.energy_pj += self.energy_model.wr_pj
        self._log(now, req.kind, req.mapped.rank, gid % self.topology.banks_per_rank,
                  req.mapped.row, "na")
        if req.kind == RD:
            self.completions.append((now + self._t_cl + self._t_bl, req))

    def next_refresh_tick(self) -> int:
        return min(self.refresh_deadline)

    def has_work(self) -> bool:
        return bool(self.read_q or self.write_q or self.pending_prefs
                    or self.pending_rfms)
