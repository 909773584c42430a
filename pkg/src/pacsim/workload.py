"""Workloads and accounting: trace I/O, synthetic generators, cores, energy.

Trace format is one access per line, ``<bubbles> <R|W> <hex-addr>``: the
number of non-memory instructions retired before the access, the kind, and
the 64-bit physical address (64-byte aligned).

The core model is deliberately small: in-order, fixed issue width, stalls
only on outstanding reads; writes are fire-and-forget while queue space
lasts. Relative comparisons between configurations are meaningful; absolute
figures are not calibrated against any particular machine.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np


@dataclass(frozen=True)
class TraceEntry:
    bubble_count: int
    kind: str          # "R" | "W"
    address: int


def parse_trace(path) -> Iterator[TraceEntry]:
    """Stream entries from a trace file; malformed lines abort with position."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3 or parts[1] not in ("R", "W"):
                raise ValueError(f"{path}:{lineno}: bad trace line {line!r}")
            try:
                bubbles = int(parts[0])
                addr = int(parts[2], 16)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad trace line {line!r}") from exc
            if bubbles < 0:
                raise ValueError(f"{path}:{lineno}: negative bubble count")
            yield TraceEntry(bubbles, parts[1], addr)


def write_trace(entries: Iterable[TraceEntry], path) -> None:
    with open(path, "w") as fh:
        for e in entries:
            fh.write(f"{e.bubble_count} {e.kind} 0x{e.address:x}\n")


def gen_attacker(mapper, victim_row: int, hammer_count: int,
                 pattern: str = "double_sided", bank: int = 0,
                 far_burst: int = 32) -> list[TraceEntry]:
    """Trace hammering the victim's neighbor rows with zero-bubble reads.

    Addresses are produced through the inverse of the controller's address
    mapping so each access lands on the intended (bank, row).
    """
    def addr(row: int) -> int:
        return mapper.compose(rank=0, bankgroup=bank % mapper.topology.bankgroups,
                              bank=bank // mapper.topology.bankgroups, row=row,
                              column=0, channel=0)

    rows: list[int] = []
    if pattern == "double_sided":
        for i in range(hammer_count):
            rows.append(victim_row - 1 if i % 2 == 0 else victim_row + 1)
    elif pattern == "single":
        rows = [victim_row - 1] * hammer_count
    elif pattern == "half_double":
        period = 2 * far_burst + 2
        block = ([victim_row - 2] * far_burst + [victim_row + 2] * far_burst
                 + [victim_row - 1, victim_row + 1])
        reps = hammer_count // period + 1
        rows = (block * reps)[:hammer_count]
    else:
        raise ValueError(f"unknown attack pattern {pattern!r}")
    return [TraceEntry(0, "R", addr(r)) for r in rows]


def gen_random(n: int, seed: int, footprint_bytes: int = 1 << 28,
               read_fraction: float = 0.7, max_bubbles: int = 8) -> list[TraceEntry]:
    """Memory-intensive synthetic trace with uniformly random line addresses."""
    rng = np.random.Generator(np.random.PCG64(seed))
    lines = rng.integers(0, footprint_bytes // 64, size=n)
    kinds = rng.random(n) < read_fraction
    bubbles = rng.integers(0, max_bubbles + 1, size=n)
    return [TraceEntry(int(b), "R" if k else "W", int(a) * 64)
            for b, k, a in zip(bubbles, kinds, lines)]


class FilterCache:
    """Per-core set-associative write-back cache in front of the controller."""

    def __init__(self, size_bytes: int = 2 * 1024 * 1024, ways: int = 16,
                 line_bytes: int = 64):
        self.ways = ways
        self.sets = max(1, size_bytes // (ways * line_bytes))
        self.line_bits = line_bytes.bit_length() - 1
        # set index -> {line: [lru_clock, dirty]}
        self._sets: list[dict[int, list]] = [dict() for _ in range(self.sets)]
        self._clock = 0

    def access(self, addr: int, write: bool) -> tuple[bool, Optional[int]]:
        """Returns (hit, writeback_addr_of_evicted_dirty_line_or_None)."""
        line = addr >> self.line_bits
        s = self._sets[line % self.sets]
        self._clock += 1
        if line in s:
            entry = s[line]
            entry[0] = self._clock
            entry[1] = entry[1] or write
            return True, None
        writeback = None
        if len(s) >= self.ways:
            victim = min(s, key=lambda k: s[k][0])
            if s[victim][1]:
                writeback = victim << self.line_bits
            del s[victim]
        s[line] = [self._clock, write]
        return False, writeback


@dataclass
class CoreState:
    """In-order core consuming one trace; stalls only on outstanding reads."""

    core_id: int
    trace: list[TraceEntry]
    issue_width: int = 4
    instr_budget: int = 0          # 0 = run the whole trace
    warmup_instr: int = 0
    cursor: int = 0
    retired: float = 0.0
    cycles: float = 0.0
    stalled: bool = False
    bubbles_left: float = 0.0
    _warmup_mark: Optional[tuple] = None

    def __post_init__(self) -> None:
        if self.trace:
            self.bubbles_left = float(self.trace[0].bubble_count)
        if self.warmup_instr <= 0:
            self._warmup_mark = (0.0, 0.0)

    def done(self) -> bool:
        if self.instr_budget and self.retired >= self.instr_budget:
            return True
        return self.cursor >= len(self.trace)

    def advance_to(self, target_cycles: float) -> Optional[TraceEntry]:
        """Retire until *target_cycles*, a stall, or a ready memory access.

        Returns the access whose bubbles are exhausted (a zero-bubble access
        is ready immediately, independent of the time budget). The caller
        issues it: reads set :attr:`stalled` until data returns; writes call
        :meth:`complete_access` immediately (fire-and-forget).
        """
        if self.stalled or self.done():
            return None
        if self.bubbles_left > 0:
            if self.cycles >= target_cycles - 1e-12:
                return None
            avail = (target_cycles - self.cycles) * self.issue_width
            step = min(self.bubbles_left, avail)
            self.bubbles_left -= step
            self.cycles += step / self.issue_width
            self._retire(step)
            if self.bubbles_left > 0:
                return None
        if self.cursor >= len(self.trace):
            return None
        return self.trace[self.cursor]

    def complete_access(self, at_cycles: Optional[float] = None) -> None:
        if at_cycles is not None:
            self.cycles = max(self.cycles, at_cycles)
        self.cycles += 1.0 / self.issue_width
        self._retire(1.0)
        self.cursor += 1
        if self.cursor < len(self.trace):
            self.bubbles_left = float(self.trace[self.cursor].bubble_count)

    def _retire(self, n: float) -> None:
        self.retired += n
        if self._warmup_mark is None and self.retired >= self.warmup_instr:
            self._warmup_mark = (self.retired, self.cycles)

    def ipc(self) -> float:
        """Post-warmup instructions per cycle."""
        mark_retired, mark_cycles = self._warmup_mark or (0.0, 0.0)
        cycles = self.cycles - mark_cycles
        if cycles <= 0:
            return 0.0
        return (self.retired - mark_retired) / cycles


@dataclass
class EnergyModel:
    """Command-level DRAM energy accounting in pJ (relative scale).

    Activation restore energy is linear in the restoration time, so partial
    restores save energy proportionally. Background power accrues with wall
    clock at finalization.
    """

    act_base_pj: float = 120.0
    restore_pj_per_ns: float = 6.0
    rd_pj: float = 150.0
    wr_pj: float = 160.0
    pre_pj: float = 60.0
    ref_pj_per_row: float = 250.0
    background_mw: float = 90.0

    def act(self, restore_ns: float) -> float:
        return self.act_base_pj + self.restore_pj_per_ns * restore_ns

    def preventive(self, restore_ns: float) -> float:
        return self.act(restore_ns) + self.pre_pj

    def refresh(self, rows: int, scale: float = 1.0) -> float:
        return self.ref_pj_per_row * rows * scale

    def background(self, elapsed_ns: float) -> float:
        return self.background_mw * elapsed_ns


@dataclass
class RunStats:
    """Aggregated results of one simulation."""

    run_id: str
    total_ticks: int = 0
    cpu_cycles: float = 0.0
    ipc: dict = field(default_factory=dict)              # core -> ipc
    weighted_speedup: Optional[float] = None
    busy_fraction: dict = field(default_factory=dict)    # bank -> fraction
    pref_full: int = 0
    pref_partial: int = 0
    reads: int = 0
    writes: int = 0
    energy_pj: float = 0.0

    def rows(self) -> list[tuple[str, str, str]]:
        out = [(self.run_id, "total_ticks", str(self.total_ticks)),
               (self.run_id, "cpu_cycles", repr(self.cpu_cycles)),
               (self.run_id, "pref_full", str(self.pref_full)),
               (self.run_id, "pref_partial", str(self.pref_partial)),
               (self.run_id, "reads", str(self.reads)),
               (self.run_id, "writes", str(self.writes)),
               (self.run_id, "energy_pj", repr(self.energy_pj))]
        for core, ipc in sorted(self.ipc.items()):
            out.append((self.run_id, f"ipc_core{core}", repr(ipc)))
        if self.weighted_speedup is not None:
            out.append((self.run_id, "weighted_speedup", repr(self.weighted_speedup)))
        for bank, frac in sorted(self.busy_fraction.items()):
            out.append((self.run_id, f"busy_fraction_bank{bank}", repr(frac)))
        return out

    def save_csv(self, path, append: bool = False) -> None:
        mode = "a" if append else "w"
        with open(path, mode, newline="") as fh:
            writer = csv.writer(fh)
            if not append:
                writer.writerow(["run_id", "metric", "value"])
            writer.writerows(self.rows())


def weighted_speedup(shared_ipc: dict, alone_ipc: dict) -> float:
    """Sum over cores of shared IPC over solo IPC."""
    total = 0.0
    for core, ipc in shared_ipc.items():
        alone = alone_ipc.get(core)
        if not alone:
            raise ValueError(f"missing solo IPC baseline for core {core}")
        total += ipc / alone
    return total
