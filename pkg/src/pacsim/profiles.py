"""Chip characterization profiles and the preventive-refresh cost model.

Each profile records, for one DRAM module, the lowest observed disturbance
threshold at every tested charge-restoration latency, together with the
parameters needed to run reduced-latency preventive refreshes safely:
the sustained threshold after repeated partial restorations (``nrh_eff``),
the maximum number of consecutive partial restorations (``n_pcr``), and the
resulting full-restore interval (``t_fcri_ns``).

Profiles ship as a checked-in CSV (``data/profiles.csv``) with the schema

    module,mfr,level,nrh,nrh_eff,n_pcr,t_fcri_ns

where an empty ``nrh`` means the module never showed bitflips, ``nrh=0``
marks a retention failure at that latency, an empty ``t_fcri_ns`` with
params present means "always partial", and all three param cells empty
means the level is not applicable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

# Fraction of nominal restoration latency for each supported level, and the
# rounded restoration latency in ns at the 33 ns nominal.
LEVEL_FACTORS = (1.00, 0.81, 0.64, 0.45, 0.36, 0.27, 0.18)

#: Sentinel for "no full-restore interval needed; all refreshes may be partial".
ALL_PARTIAL = math.inf


class ProfileError(ValueError):
    """Malformed profile data (parse or schema problem)."""


class ProfileValidationError(ProfileError):
    """Profile data violates a consistency rule (strict mode only)."""


class NotApplicableError(ValueError):
    """Requested restoration level is not applicable for this module."""


@dataclass(frozen=True)
class RestorationLevel:
    """One charge-restoration latency setting, as a fraction of nominal."""

    m_factor: float

    def __post_init__(self) -> None:
        if not any(abs(self.m_factor - m) < 1e-9 for m in LEVEL_FACTORS):
            raise ProfileError(f"unsupported restoration level {self.m_factor}")

    def t_ras_red(self, t_ras_nominal_ns: float = 33.0) -> int:
        """Reduced restoration latency in ns (rounded, like the DRAM timing grid)."""
        return round(self.m_factor * t_ras_nominal_ns)

    def __repr__(self) -> str:
        return f"RestorationLevel({self.m_factor:.2f})"


LEVELS = tuple(RestorationLevel(m) for m in LEVEL_FACTORS)
NOMINAL = LEVELS[0]


def level(m_factor: float) -> RestorationLevel:
    for lv in LEVELS:
        if abs(lv.m_factor - m_factor) < 1e-9:
            return lv
    raise ProfileError(f"unsupported restoration level {m_factor}")


@dataclass(frozen=True)
class PacramParams:
    """Per-level configuration inputs measured under repeated partial restores."""

    nrh_eff: int        # sustained threshold while partially restored
    n_pcr: int          # max consecutive partial restorations
    t_fcri_ns: float    # published full-restore interval (ALL_PARTIAL if unbounded)


@dataclass(frozen=True)
class ChipProfile:
    """Characterization record for one DRAM module."""

    module_id: str
    mfr: str
    nrh_by_level: dict[RestorationLevel, Optional[int]] = field(default_factory=dict)
    params_by_level: dict[RestorationLevel, Optional[PacramParams]] = field(default_factory=dict)

    @property
    def nrh_nominal(self) -> Optional[int]:
        return self.nrh_by_level.get(NOMINAL)

    def applicable(self, lv: RestorationLevel) -> bool:
        """True if reduced-latency refresh may be configured at this level."""
        return self.params_by_level.get(lv) is not None

    def retention_failure(self, lv: RestorationLevel) -> bool:
        return self.nrh_by_level.get(lv) == 0

    def applicable_levels(self) -> list[RestorationLevel]:
        return [lv for lv in LEVELS if self.applicable(lv)]


@dataclass(frozen=True)
class CostPoint:
    """One point of the preventive-refresh cost curve, normalized to nominal."""

    level: RestorationLevel
    prev_ref_latency: float      # ns for one preventive refresh
    prev_ref_count_rate: float   # refreshes per activation, normalized
    total_time_cost: float
    total_energy_cost: float


def _parse_int(cell: str, what: str, lineno: int) -> Optional[int]:
    cell = cell.strip()
    if not cell:
        return None
    try:
        return int(float(cell))
    except ValueError as exc:
        raise ProfileError(f"line {lineno}: bad {what} value {cell!r}") from exc


def load_profiles(path=None, strict: bool = False) -> list[ChipProfile]:
    """Load module profiles from a CSV file (bundled data when *path* is None).

    With ``strict=True``, a sustained threshold larger than the same level's
    observed threshold raises :class:`ProfileValidationError`. The bundled
    measurements contain a few such rows (run-to-run sampling variance between
    the two experiments), so the default is lenient.
    """
    if path is None:
        ref = resources.files("pacsim").joinpath("data/profiles.csv")
        with resources.as_file(ref) as p:
            return load_profiles(p, strict=strict)

    by_module: dict[str, ChipProfile] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return []
        expected = ["module", "mfr", "level", "nrh", "nrh_eff", "n_pcr", "t_fcri_ns"]
        if [h.strip() for h in header] != expected:
            raise ProfileError(f"bad header {header!r}, expected {expected!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 7:
                raise ProfileError(f"line {lineno}: expected 7 fields, got {len(row)}")
            module_id, mfr, level_s, nrh_s, eff_s, pcr_s, fcri_s = (c.strip() for c in row)
            try:
                lv = level(float(level_s))
            except (ValueError, ProfileError) as exc:
                raise ProfileError(f"line {lineno}: bad level {level_s!r}") from exc
            nrh = _parse_int(nrh_s, "nrh", lineno)
            eff = _parse_int(eff_s, "nrh_eff", lineno)
            pcr = _parse_int(pcr_s, "n_pcr", lineno)
            if (eff is None) != (pcr is None):
                raise ProfileError(f"line {lineno}: nrh_eff and n_pcr must both be set or both empty")
            params = None
            if eff is not None:
                if pcr < 1:
                    raise ProfileError(f"line {lineno}: n_pcr must be >= 1")
                fcri = float(fcri_s) if fcri_s else ALL_PARTIAL
                params = PacramParams(eff, pcr, fcri)
            prof = by_module.get(module_id)
            if prof is None:
                prof = ChipProfile(module_id, mfr)
                by_module[module_id] = prof
            if lv in prof.nrh_by_level:
                raise ProfileError(f"line {lineno}: duplicate level {level_s} for {module_id}")
            prof.nrh_by_level[lv] = nrh
            prof.params_by_level[lv] = params

    profiles = list(by_module.values())
    if strict:
        for prof in profiles:
            for lv, params in prof.params_by_level.items():
                if params is None:
                    continue
                observed = prof.nrh_by_level.get(lv)
                if observed and params.nrh_eff > observed:
                    raise ProfileValidationError(
                        f"{prof.module_id}@{lv.m_factor:.2f}: nrh_eff {params.nrh_eff} "
                        f"exceeds observed threshold {observed}"
                    )
    return profiles


def save_profiles(profiles: Iterable[ChipProfile], path) -> None:
    """Write profiles back out in the documented CSV schema."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["module", "mfr", "level", "nrh", "nrh_eff", "n_pcr", "t_fcri_ns"])
        for prof in profiles:
            for lv in LEVELS:
                if lv not in prof.nrh_by_level:
                    continue
                nrh = prof.nrh_by_level[lv]
                params = prof.params_by_level.get(lv)
                row = [prof.module_id, prof.mfr, f"{lv.m_factor:.2f}",
                       "" if nrh is None else nrh]
                if params is None:
                    row += ["", "", ""]
                else:
                    fcri = "" if params.t_fcri_ns == ALL_PARTIAL else repr(params.t_fcri_ns)
                    row += [params.nrh_eff, params.n_pcr, fcri]
                writer.writerow(row)


def get_profile(module_id: str, profiles: Optional[list[ChipProfile]] = None) -> ChipProfile:
    profiles = profiles if profiles is not None else load_profiles()
    for prof in profiles:
        if prof.module_id == module_id:
            return prof
    raise ProfileError(f"unknown module {module_id!r}")


def nrh_reduction_ratio(profile: ChipProfile, lv: RestorationLevel) -> float:
    """Sustained threshold at *lv* over the nominal threshold, clamped to (0, 1].

    The nominal level is the identity. Ratios above 1.0 (sampling variance
    between experiments) clamp to 1.0: a mitigation is never configured less
    aggressively than at nominal latency.
    """
    if lv == NOMINAL:
        return 1.0
    params = profile.params_by_level.get(lv)
    if params is None or not profile.nrh_nominal:
        raise NotApplicableError(f"{profile.module_id} has no configuration at {lv}")
    return min(1.0, params.nrh_eff / profile.nrh_nominal)


def preventive_refresh_latency(timings, lv: RestorationLevel) -> int:
    """Time to open and close one row at this restoration level, in ns."""
    return lv.t_ras_red(timings.t_ras) + timings.t_rp


def sustained_nrh(profile: ChipProfile, lv: RestorationLevel,
                  pcr_test_cap: int = 15000) -> Optional[int]:
    """Threshold governing continuous operation at *lv*.

    Where repeated partial restorations degraded the threshold within the
    tested budget (``n_pcr`` below the experiment cap), that degraded value
    binds. Otherwise the per-level observed threshold binds, clamped to the
    nominal threshold so sampling noise above nominal is never exploited.
    Returns None when the level has no usable threshold.
    """
    if lv == NOMINAL:
        return profile.nrh_nominal
    nrh = profile.nrh_by_level.get(lv)
    params = profile.params_by_level.get(lv)
    if params is not None and params.n_pcr < pcr_test_cap:
        return params.nrh_eff
    if not nrh:
        return None
    nominal = profile.nrh_nominal
    return min(nrh, nominal) if nominal else nrh


def cost_curve(profile: ChipProfile, timings, nrh_source: str = "sustained",
               energy_formula: str = "count_times_time") -> list[CostPoint]:
    """Normalized preventive-refresh cost at every usable level.

    Per level: count rate is one refresh per threshold activations and time
    cost is count times the per-refresh latency; both normalize to 1.0 at the
    nominal level. Retention-failure levels are omitted.

    ``nrh_source`` selects the count basis: ``"sustained"`` (default, see
    :func:`sustained_nrh`) or ``"measured"`` (the per-level observed
    threshold, no clamping).

    ``energy_formula`` selects the energy definition: ``"count_times_time"``
    (default) multiplies the refresh count by the total refresh time;
    ``"per_refresh"`` charges each refresh an energy proportional to its
    restoration time instead (count times per-refresh energy).
    """
    if nrh_source not in ("sustained", "measured"):
        raise ValueError(f"unknown nrh_source {nrh_source!r}")
    if energy_formula not in ("count_times_time", "per_refresh"):
        raise ValueError(f"unknown energy_formula {energy_formula!r}")
    nominal = profile.nrh_nominal
    if not nominal:
        raise NotApplicableError(f"{profile.module_id} has no usable levels")
    lat0 = preventive_refresh_latency(timings, NOMINAL)
    points = []
    for lv in LEVELS:
        if lv not in profile.nrh_by_level:
            continue
        if nrh_source == "measured":
            nrh = profile.nrh_by_level.get(lv)
        else:
            nrh = sustained_nrh(profile, lv)
        if not nrh:
            continue  # retention failure or never applicable at this latency
        lat = preventive_refresh_latency(timings, lv)
        count = nominal / nrh          # refresh rate relative to nominal
        time_cost = count * (lat / lat0)
        if energy_formula == "count_times_time":
            energy_cost = count * time_cost
        else:
            energy_cost = time_cost    # count x (energy ~ restoration time)
        points.append(CostPoint(lv, lat, count, time_cost, energy_cost))
    return points


def inflection_point(curve: list[CostPoint], metric: str = "time") -> RestorationLevel:
    """Level minimizing the chosen normalized cost; ties favor larger m."""
    if not curve:
        raise ValueError("empty cost curve")
    if metric == "time":
        key = lambda p: p.total_time_cost
    elif metric == "energy":
        key = lambda p: p.total_energy_cost
    else:
        raise ValueError(f"unknown metric {metric!r}")
    best = min(curve, key=lambda p: (key(p), -p.level.m_factor))
    return best.level


def write_curve_csv(curve: list[CostPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m_factor", "prev_ref_latency_ns", "prev_ref_count_rate",
                         "total_time_cost", "total_energy_cost"])
        for p in curve:
            writer.writerow([f"{p.level.m_factor:.2f}", p.prev_ref_latency,
                             repr(p.prev_ref_count_rate), repr(p.total_time_cost),
                             repr(p.total_energy_cost)])
