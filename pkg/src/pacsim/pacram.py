"""Reduced-latency preventive refresh: configuration and runtime state.

The mechanism keeps one bit of state per DRAM row: set means the row's next
preventive refresh must run at nominal latency (F), clear means a partial
restore is allowed (P). All rows are pulled back to F once per full-restore
interval. The interval is the smallest window that can contain ``n_pcr``
back-to-back worst-case hammer+refresh cycles:

    t_fcri = n_pcr * (nrh * t_rc + t_ras_red + t_rp)

When that interval is at least the refresh window, the periodic refresh
already provides the full restore and every preventive refresh may be
partial.

Two thresholds matter:

* :func:`derive_config` with no override uses the module's own sustained
  threshold, reproducing the published per-module parameter tables.
* A deployment that configures its mitigation for a smaller threshold must
  pass that threshold as ``nrh_override`` so the interval shrinks with it.

On top of the bit vector, the runtime keeps an exact consecutive-partial
counter per row and forces a full restore when a row's streak would exceed
``n_pcr``. For deterministic trigger algorithms the bit vector alone already
keeps streaks within bounds; the counter makes the guarantee unconditional
(probabilistic triggers can otherwise cluster refreshes arbitrarily).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .device import DeviceTimings, ns_to_ticks
from .profiles import (ChipProfile, NotApplicableError, RestorationLevel,
                       nrh_reduction_ratio)

FULL, PARTIAL = "full", "partial"

CONTROLLER, ON_DRAM_DIE = "controller", "ondie"


@dataclass(frozen=True)
class PacramConfig:
    """Operating parameters for one module at one restoration level."""

    module_id: str
    level: RestorationLevel
    t_ras_red: int            # ns
    nrh_scaled: int           # threshold the mitigation must be configured with
    n_pcr: int
    t_fcri_ns: float          # formula value; rows reset to F at this period
    all_partial: bool = False # interval >= refresh window: no reset needed
    mode: str = CONTROLLER


def fcri_ns(nrh: int, n_pcr: int, t_ras_red: int, timings: DeviceTimings) -> float:
    """Smallest window holding n_pcr maximal-rate hammer+refresh cycles, in ns."""
    return n_pcr * (nrh * timings.t_rc + t_ras_red + timings.t_rp)


def derive_config(profile: ChipProfile, lv: RestorationLevel, timings: DeviceTimings,
                  nrh_override: Optional[int] = None, mode: str = CONTROLLER) -> PacramConfig:
    """Build the operating config for *profile* at level *lv*.

    Uses the profile's sustained threshold unless the deployment configures
    its mitigation for a different (scaled) threshold via ``nrh_override``.
    Raises :class:`NotApplicableError` where the module has no safe
    parameters at this level.
    """
    params = profile.params_by_level.get(lv)
    if params is None:
        raise NotApplicableError(
            f"{profile.module_id} has no reduced-latency parameters at {lv}")
    nrh = nrh_override if nrh_override is not None else params.nrh_eff
    if nrh <= 0:
        raise ValueError("threshold must be positive")
    t_ras_red = lv.t_ras_red(timings.t_ras)
    interval = fcri_ns(nrh, params.n_pcr, t_ras_red, timings)
    return PacramConfig(profile.module_id, lv, t_ras_red, nrh, params.n_pcr,
                        interval, all_partial=interval >= timings.t_refw, mode=mode)


def scale_mitigation_thresholds(nominal_list, profile: ChipProfile,
                                lv: RestorationLevel) -> list[int]:
    """Scale mitigation thresholds down by the module's threshold-reduction ratio.

    The ratio is quantized to two decimal places (the precision the
    characterization tables report) before flooring each product; the
    published scaled sweeps derive from the quantized ratio.
    """
    ratio = round(nrh_reduction_ratio(profile, lv), 2)
    scaled = []
    for value in nominal_list:
        if value <= 0:
            raise ValueError("thresholds must be positive")
        scaled.append(math.floor(value * ratio))
    return scaled


class FrBitVector:
    """Per-row full-restore flags with a periodic global reset.

    Rather than rewriting one bit per row every interval, each row stores the
    epoch of its last full restore and the query compares it against the
    current epoch (now // t_fcri); semantics are identical to setting every
    bit at each epoch boundary. A row is in F whenever its last full restore
    happened in an earlier epoch.
    """

    def __init__(self, banks: int, rows_per_bank: int, epoch_ticks: int):
        if epoch_ticks <= 0:
            raise ValueError("epoch_ticks must be positive")
        self.epoch_ticks = epoch_ticks
        self._last_full_epoch = np.full((banks, rows_per_bank), -1, dtype=np.int64)

    def epoch(self, now: int) -> int:
        return now // self.epoch_ticks

    def full_required(self, bank: int, row: int, now: int) -> bool:
        return self._last_full_epoch[bank, row] != self.epoch(now)

    def mark_full(self, bank: int, row: int, now: int) -> None:
        self._last_full_epoch[bank, row] = self.epoch(now)


class PacramState:
    """Runtime latency selector for preventive refreshes."""

    def __init__(self, config: PacramConfig, timings: DeviceTimings,
                 banks: int, rows_per_bank: int, periodic_ext: bool = False):
        self.config = config
        self.timings = timings
        self.t_ras_nominal = round(timings.t_ras)
        self.fr: Optional[FrBitVector] = None
        if not config.all_partial:
            self.fr = FrBitVector(banks, rows_per_bank, ns_to_ticks(config.t_fcri_ns))
        self._streak = np.zeros((banks, rows_per_bank), dtype=np.int32)
        self.periodic_ext = PeriodicExtensionState(config.n_pcr) if periodic_ext else None
        self.full_count = 0
        self.partial_count = 0

    def select_latency(self, bank: int, row: int, now: int) -> tuple[str, int]:
        """Choose the restoration class for a preventive refresh and commit it.

        Returns ``(class, t_ras_ns)``. The row's state transition is applied
        here; the caller is expected to perform the refresh it asked about
        (the bank stays busy until it completes, so nothing can interleave).
        """
        cfg = self.config
        if self._streak[bank, row] >= cfg.n_pcr:
            choice = FULL
        elif cfg.all_partial:
            choice = PARTIAL
        elif self.fr.full_required(bank, row, now):
            choice = FULL
        else:
            choice = PARTIAL
        if choice is FULL:
            self._commit_full(bank, row, now)
            return FULL, self.t_ras_nominal
        self._streak[bank, row] += 1
        self.partial_count += 1
        return PARTIAL, cfg.t_ras_red

    def _commit_full(self, bank: int, row: int, now: int) -> None:
        self._streak[bank, row] = 0
        if self.fr is not None:
            self.fr.mark_full(bank, row, now)
        self.full_count += 1

    def on_periodic_refresh(self, bank: int, rows, now: int, partial: bool = False) -> None:
        """Account a periodic refresh of *rows*; a full one moves them to P."""
        for row in rows:
            if partial:
                self._streak[bank, row] += 1
            else:
                self._streak[bank, row] = 0
                if self.fr is not None:
                    self.fr.mark_full(bank, row, now)


class PeriodicExtensionState:
    """Window counter for reduced-latency periodic refresh.

    Counts reduced-latency refresh windows; after ``n_pcr`` of them the next
    window runs at nominal latency and the counter resets.
    """

    def __init__(self, n_pcr: int):
        if n_pcr < 1:
            raise ValueError("n_pcr must be >= 1")
        self.n_pcr = n_pcr

    def window_latency(self, window_index: int) -> str:
        return PARTIAL if window_index % (self.n_pcr + 1) < self.n_pcr else FULL
