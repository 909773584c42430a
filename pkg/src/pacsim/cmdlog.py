"""Command-log format: packed arrays plus the documented CSV schema.

CSV columns: ``tick,cmd,rank,bank,row,latency_class``. Command names are
ACT/PRE/RD/WR/PREF/REF; latency classes are ``na`` (not a restore), ``full``
(nominal restoration) and ``partial`` (reduced restoration). Internally the
log is a set of parallel numpy arrays so multi-million-command logs stay
cheap to scan.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

CMD_ACT, CMD_PREF, CMD_REF, CMD_PRE, CMD_RD, CMD_WR = 0, 1, 2, 3, 4, 5
CMD_NAMES = {CMD_ACT: "ACT", CMD_PREF: "PREF", CMD_REF: "REF",
             CMD_PRE: "PRE", CMD_RD: "RD", CMD_WR: "WR"}
CMD_CODES = {name: code for code, name in CMD_NAMES.items()}

LAT_NA, LAT_FULL, LAT_PART = 0, 1, 2
LAT_NAMES = {LAT_NA: "na", LAT_FULL: "full", LAT_PART: "partial"}
LAT_CODES = {name: code for code, name in LAT_NAMES.items()}


@dataclass
class CommandLog:
    """Time-ordered command stream for one channel."""

    tick: np.ndarray
    cmd: np.ndarray
    rank: np.ndarray
    bank: np.ndarray
    row: np.ndarray
    latency_class: np.ndarray

    def __len__(self) -> int:
        return len(self.tick)

    @classmethod
    def empty(cls) -> "CommandLog":
        return cls(np.empty(0, np.int64), np.empty(0, np.int8), np.empty(0, np.int16),
                   np.empty(0, np.int16), np.empty(0, np.int32), np.empty(0, np.int8))

    @classmethod
    def from_lists(cls, entries) -> "CommandLog":
        """Build from an iterable of (tick, cmd_name, rank, bank, row, lat_name)."""
        rows = list(entries)
        return cls(
            np.array([e[0] for e in rows], np.int64),
            np.array([CMD_CODES[e[1]] for e in rows], np.int8),
            np.array([e[2] for e in rows], np.int16),
            np.array([e[3] for e in rows], np.int16),
            np.array([e[4] for e in rows], np.int32),
            np.array([LAT_CODES[e[5]] for e in rows], np.int8),
        )

    def entry(self, i: int) -> tuple:
        return (int(self.tick[i]), CMD_NAMES[int(self.cmd[i])], int(self.rank[i]),
                int(self.bank[i]), int(self.row[i]), LAT_NAMES[int(self.latency_class[i])])

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tick", "cmd", "rank", "bank", "row", "latency_class"])
            for i in range(len(self)):
                writer.writerow(self.entry(i))

    @classmethod
    def load(cls, path) -> "CommandLog":
        ticks, cmds, ranks, banks, rows, lats = [], [], [], [], [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["tick", "cmd", "rank", "bank", "row", "latency_class"]:
                raise ValueError(f"bad command log header: {header!r}")
            for lineno, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                try:
                    ticks.append(int(rec[0]))
                    cmds.append(CMD_CODES[rec[1]])
                    ranks.append(int(rec[2]))
                    banks.append(int(rec[3]))
                    rows.append(int(rec[4]))
                    lats.append(LAT_CODES[rec[5]])
                except (IndexError, KeyError, ValueError) as exc:
                    raise ValueError(f"bad command log record on line {lineno}: {rec!r}") from exc
        return cls(np.array(ticks, np.int64), np.array(cmds, np.int8),
                   np.array(ranks, np.int16), np.array(banks, np.int16),
                   np.array(rows, np.int32), np.array(lats, np.int8))
