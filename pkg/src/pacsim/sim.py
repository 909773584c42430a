"""Channel-level simulation loop: cores in lockstep against one controller.

Time advances to the next interesting tick (a read completion, a core's next
ready access, a refresh deadline, or the earliest legal tick of blocked
work), so idle stretches cost nothing. Deterministic given (traces, config,
seed): every queue and candidate scan is ordered.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional

from .controller import CPU_CYCLES_PER_TICK, MemController, MemRequest, MopMapper
from .device import RD, WR
from .workload import CoreState, FilterCache, RunStats

STARVATION_TICKS = 10_000_000   # watchdog: no request may wait this long


def _cycles_to_tick(cycles: float) -> int:
    return int(cycles / CPU_CYCLES_PER_TICK) + 1


@dataclass
class ChannelSim:
    cores: list[CoreState]
    controller: MemController
    mapper: MopMapper
    caches: Optional[list[FilterCache]] = None
    max_ticks: int = 1 << 62
    run_id: str = "run"

    def run(self) -> RunStats:
        cores = self.cores
        ctrl = self.controller
        caches = None
        if self.caches is not None:
            caches = {core.core_id: cache for core, cache in zip(cores, self.caches)}
        now = 0
        seq = 0
        completion_heap: list[tuple[int, int, int]] = []   # (tick, seq, core_id)
        waiting: dict[int, CoreState] = {}

        def pump_core(core: CoreState) -> None:
            target = now * CPU_CYCLES_PER_TICK
            while True:
                entry = core.advance_to(target)
                if entry is None:
                    return
                is_read = entry.kind == "R"
                if caches is not None:
                    # a miss needs room for the fetch and a possible writeback
                    if not (ctrl.can_accept(RD) and ctrl.can_accept(WR)):
                        return
                    hit, writeback = caches[core.core_id].access(entry.address,
                                                                 not is_read)
                    if hit:
                        core.complete_access()
                        continue
                    if writeback is not None:
                        ctrl.enqueue(MemRequest(WR, self.mapper.map_address(writeback),
                                                -1, now))
                    # write misses allocate in the background; only reads stall
                    ctrl.enqueue(MemRequest(RD, self.mapper.map_address(entry.address),
                                            core.core_id if is_read else -1, now))
                else:
                    kind = RD if is_read else WR
                    if not ctrl.can_accept(kind):
                        return   # retry when the queue drains
                    ctrl.enqueue(MemRequest(kind, self.mapper.map_address(entry.address),
                                            core.core_id, now))
                if is_read:
                    core.stalled = True
                    waiting[core.core_id] = core
                    return
                core.complete_access()

        while now < self.max_ticks:
            while completion_heap and completion_heap[0][0] <= now:
                _, _, core_id = heapq.heappop(completion_heap)
                core = waiting.pop(core_id)
                core.stalled = False
                core.complete_access(at_cycles=now * CPU_CYCLES_PER_TICK)
            for core in cores:
                if not (core.stalled or core.done()):
                    pump_core(core)
            if all(core.done() for core in cores):
                break

            issued, wake = ctrl.schedule(now)
            for done_tick, req in ctrl.completions:
                if req.core_id >= 0:
                    seq += 1
                    heapq.heappush(completion_heap, (done_tick, seq, req.core_id))
            ctrl.completions.clear()
            if issued:
                now += 1
                continue

            candidates = [self.max_ticks]
            if wake is not None:
                candidates.append(wake)
            if completion_heap:
                candidates.append(completion_heap[0][0])
            candidates.append(ctrl.next_refresh_tick())
            for core in cores:
                if not core.stalled and not core.done() and core.bubbles_left > 0:
                    finish = core.cycles + core.bubbles_left / core.issue_width
                    candidates.append(_cycles_to_tick(finish))
            nxt = min(candidates)
            if nxt <= now:
                nxt = now + 1
            now = nxt
            for q in (ctrl.read_q, ctrl.write_q):
                if q and now - q[0].arrival > STARVATION_TICKS:
                    raise RuntimeError(
                        f"request starved for {now - q[0].arrival} ticks: {q[0]}")

        stats = RunStats(self.run_id)
        stats.total_ticks = now
        stats.cpu_cycles = now * CPU_CYCLES_PER_TICK
        stats.ipc = {c.core_id: c.ipc() for c in cores}
        stats.busy_fraction = {gid: busy / now if now else 0.0
                               for gid, busy in enumerate(ctrl.pref_busy) if busy}
        stats.pref_full = ctrl.pref_full
        stats.pref_partial = ctrl.pref_partial
        stats.reads = ctrl.reads
        stats.writes = ctrl.writes
        stats.energy_pj = ctrl.energy_pj + ctrl.energy_model.background(now * 0.75)
        return stats
