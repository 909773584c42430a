"""Trigger algorithms that watch row activations and request preventive refreshes.

Five mechanisms sit behind one small interface:

* ``para``     - probabilistic refresh of the activated row's neighbors
* ``rfm``      - per-bank rolling activation counter; the device picks victims
* ``prac``     - device-side per-row counters with a back-off signal
* ``hydra``    - group counters plus per-row counters kept in DRAM (metadata traffic)
* ``graphene`` - frequent-items counter table per bank

Trigger thresholds derive from the configured disturbance threshold
(``nrh_config``). The divisors are calibrated so that, with refreshes on all
rows within the blast radius, no victim can accumulate ``nrh_config``
disturbing activations between its restorations under any access pattern the
tracker can see (including table resets and four-aggressor patterns); the
safety argument lives with the verifier tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .device import victim_rows

PARA_CONSTANT = 11          # trigger probability = min(1, c / nrh_config)
GRAPHENE_QUOTA_DIV = 8      # quota = nrh/8: 2x reset staleness x 4 neighbor rows
HYDRA_TRIGGER_DIV = 4       # per-row trigger = nrh/4: 4 neighbor rows
RFM_RAAIMT_DIV = 4
PRAC_THRESHOLD_DIV = 4
HYDRA_GROUP_SIZE = 128
HYDRA_CACHE_ENTRIES = 4096


@dataclass(frozen=True)
class Refresh:
    """Preventive refresh request for the given victim rows of one bank."""
    bank: int
    rows: tuple[int, ...]


@dataclass(frozen=True)
class RfmRequest:
    """Ask the device to take its own preventive action on this bank."""
    bank: int


@dataclass(frozen=True)
class MetadataAccess:
    """Counter-table traffic the mechanism itself puts on the channel."""
    bank: int
    slot: int
    write: bool


def victims_of(row: int, blast_radius: int, rows_per_bank: int = 65536) -> list[int]:
    return victim_rows(row, blast_radius, rows_per_bank)


class MitigationPlugin:
    """Base trigger algorithm. Subclasses override :meth:`on_activate`."""

    name = "none"

    def __init__(self, nrh_config: int, rows_per_bank: int = 65536, blast_radius: int = 2):
        if nrh_config <= 0:
            raise ValueError("nrh_config must be positive")
        self.nrh_config = nrh_config
        self.rows_per_bank = rows_per_bank
        self.blast_radius = blast_radius

    def victims(self, row: int) -> tuple[int, ...]:
        return tuple(victim_rows(row, self.blast_radius, self.rows_per_bank))

    def on_activate(self, bank: int, row: int, now: int) -> list:
        return []

    def on_periodic_refresh(self, bank: int, rows, now: int) -> None:
        pass

    @property
    def min_acts_per_trigger(self) -> int:
        """Deterministic lower bound on activations consumed per trigger (1 if none)."""
        return 1


class NoMitigation(MitigationPlugin):
    name = "none"


class Para(MitigationPlugin):
    """Refresh neighbors of each activated row with a small probability."""

    name = "para"

    def __init__(self, nrh_config: int, rows_per_bank: int = 65536, blast_radius: int = 2,
                 constant: int = PARA_CONSTANT, seed: int = 0):
        super().__init__(nrh_config, rows_per_bank, blast_radius)
        self.probability = min(1.0, constant / nrh_config)
        self.rng = np.random.Generator(np.random.PCG64(seed))

    def on_activate(self, bank: int, row: int, now: int) -> list:
        if self.rng.random() < self.probability:
            return [Refresh(bank, self.victims(row))]
        return []


class RfmPolicy(MitigationPlugin):
    """Rolling activation counter per bank; past the threshold, request an RFM."""

    name = "rfm"

    def __init__(self, nrh_config: int, rows_per_bank: int = 65536, blast_radius: int = 2,
                 raaimt: Optional[int] = None):
        super().__init__(nrh_config, rows_per_bank, blast_radius)
        self.raaimt = raaimt if raaimt is not None else max(1, nrh_config // RFM_RAAIMT_DIV)
        self.raa: dict[int, int] = {}

    def on_activate(self, bank: int, row: int, now: int) -> list:
        count = self.raa.get(bank, 0) + 1
        if count >= self.raaimt:
            self.raa[bank] = count - self.raaimt
            return [RfmRequest(bank)]
        self.raa[bank] = count
        return []

    @property
    def min_acts_per_trigger(self) -> int:
        return self.raaimt


class PracPolicy(MitigationPlugin):
    """Controller half of per-row activation counting.

    The row counters live in the device model; this plugin only translates a
    back-off signal into an RFM. :attr:`threshold` is what the device banks
    should be configured with.
    """

    name = "prac"

    def __init__(self, nrh_config: int, rows_per_bank: int = 65536, blast_radius: int = 2,
                 threshold: Optional[int] = None):
        super().__init__(nrh_config, rows_per_bank, blast_radius)
        self.threshold = threshold if threshold is not None else max(1, nrh_config // PRAC_THRESHOLD_DIV)

    def on_backoff(self, bank: int) -> list:
        return [RfmRequest(bank)]

    @property
    def min_acts_per_trigger(self) -> int:
        return self.threshold


class GrapheneTable(MitigationPlugin):
    """Per-bank frequent-items counter table with a spillover counter.

    Estimates never undercount by more than the spillover, and the spillover
    is bounded by window/k. A row whose estimate reaches the trigger quota
    gets its neighbors refreshed and its entry reset. Tables reset once per
    refresh window.
    """

    name = "graphene"

    def __init__(self, nrh_config: int, rows_per_bank: int = 65536, blast_radius: int = 2,
                 quota: Optional[int] = None, table_entries: Optional[int] = None,
                 window_acts: Optional[int] = None, reset_window_ticks: int = 0):
        super().__init__(nrh_config, rows_per_bank, blast_radius)
        self.quota = quota if quota is not None else max(1, nrh_config // GRAPHENE_QUOTA_DIV)
        self.window_acts = window_acts if window_acts is not None else 700_000
        self.table_entries = (table_entries if table_entries is not None
                              else math.ceil(self.window_acts / self.quota))
        self.reset_window_ticks = reset_window_ticks
        self.tables: dict[int, dict[int, int]] = {}
        self.spill: dict[int, int] = {}
        self._last_reset = 0

    def _maybe_reset(self, now: int) -> None:
        if self.reset_window_ticks and now - self._last_reset >= self.reset_window_ticks:
            self.tables.clear()
            self.spill.clear()
            self._last_reset = now - (now - self._last_reset) % self.reset_window_ticks

    def estimate(self, bank: int, row: int) -> int:
        """Tracked count for resident rows; the spillover otherwise (an upper
        bound on any untracked row's count, so estimates never undercount)."""
        table = self.tables.get(bank, {})
        if row in table:
            return table[row]
        return self.spill.get(bank, 0)

    def on_activate(self, bank: int, row: int, now: int) -> list:
        self._maybe_reset(now)
        table = self.tables.setdefault(bank, {})
        if row in table:
            table[row] += 1
        elif len(table) < self.table_entries:
            table[row] = 1
        else:
            spill = self.spill.get(bank, 0) + 1
            victim, low = min(table.items(), key=lambda kv: (kv[1], kv[0]))
            if spill >= low:
                del table[victim]
                table[row] = spill
                spill = low
            self.spill[bank] = spill
        if table.get(row, 0) >= self.quota:
            table[row] = 0
            return [Refresh(bank, self.victims(row))]
        return []

    @property
    def min_acts_per_trigger(self) -> int:
        return self.quota


class Hydra(MitigationPlugin):
    """Hybrid tracker: small group counters here, per-row counters in DRAM.

    A group past its threshold switches to per-row counting, with each row
    counter conservatively initialized to the group count. Row counters are
    cached; a miss fetches the counter from memory (one read), a dirty
    eviction writes one back. A row reaching the trigger threshold gets its
    neighbors refreshed and its counter halved.
    """

    name = "hydra"

    def __init__(self, nrh_config: int, rows_per_bank: int = 65536, blast_radius: int = 2,
                 group_size: int = HYDRA_GROUP_SIZE, cache_entries: int = HYDRA_CACHE_ENTRIES,
                 trigger: Optional[int] = None, group_threshold: Optional[int] = None):
        super().__init__(nrh_config, rows_per_bank, blast_radius)
        self.group_size = group_size
        self.cache_entries = cache_entries
        self.trigger = trigger if trigger is not None else max(1, nrh_config // HYDRA_TRIGGER_DIV)
        self.group_threshold = (group_threshold if group_threshold is not None
                                else max(1, self.trigger // 2))
        n_groups = math.ceil(rows_per_bank / group_size)
        self.group_counts: dict[int, np.ndarray] = {}
        self.row_counts: dict[int, np.ndarray] = {}
        self.cache_tags: dict[int, np.ndarray] = {}
        self._n_groups = n_groups

    def _bank_state(self, bank: int):
        if bank not in self.group_counts:
            self.group_counts[bank] = np.zeros(self._n_groups, dtype=np.int64)
            self.row_counts[bank] = np.zeros(self.rows_per_bank, dtype=np.int64)
            self.cache_tags[bank] = np.full(self.cache_entries, -1, dtype=np.int64)
        return self.group_counts[bank], self.row_counts[bank], self.cache_tags[bank]

    def on_activate(self, bank: int, row: int, now: int) -> list:
        groups, rows, tags = self._bank_state(bank)
        actions: list = []
        group = row // self.group_size
        if groups[group] < self.group_threshold:
            groups[group] += 1
            if groups[group] >= self.group_threshold:
                # engage per-row counting, assuming the worst split so far
                start = group * self.group_size
                end = min(start + self.group_size, self.rows_per_bank)
                rows[start:end] = groups[group]
            return actions
        slot = row % self.cache_entries
        if tags[slot] != row:
            if tags[slot] >= 0:
                actions.append(MetadataAccess(bank, slot, write=True))
            actions.append(MetadataAccess(bank, slot, write=False))
            tags[slot] = row
        rows[row] += 1
        if rows[row] >= self.trigger:
            rows[row] //= 2
            actions.append(Refresh(bank, self.victims(row)))
        return actions

    @property
    def min_acts_per_trigger(self) -> int:
        return max(1, self.trigger - self.trigger // 2)


MECHANISMS = {
    "none": NoMitigation,
    "para": Para,
    "rfm": RfmPolicy,
    "prac": PracPolicy,
    "hydra": Hydra,
    "graphene": GrapheneTable,
}


def make_mitigation(name: str, nrh_config: int, **kwargs) -> MitigationPlugin:
    try:
        cls = MECHANISMS[name]
    except KeyError:
        raise ValueError(f"unknown mitigation {name!r}") from None
    return cls(nrh_config, **kwargs)
