"""Per-revision energy profiles and consecutive-revision deltas."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

REQUIRED_COLUMNS = ("revision", "mean_watts")


class ProfileError(ValueError):
    def __init__(self, message: str, row: int | None = None) -> None:
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


@dataclass(frozen=True)
class ProfileEntry:
    revision: str
    mean_watts: float


@dataclass(frozen=True)
class EnergyDelta:
    revision: str
    delta_watts: float


@dataclass(frozen=True)
class EnergyProfile:
    entries: tuple[ProfileEntry, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for e in self.entries:
            if not e.revision:
                raise ProfileError("empty revision id")
            if e.revision in seen:
                raise ProfileError(f"duplicate revision {e.revision!r}")
            seen.add(e.revision)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, float]]) -> "EnergyProfile":
        return cls(tuple(ProfileEntry(r, float(w)) for r, w in pairs))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def revisions(self) -> list[str]:
        return [e.revision for e in self.entries]

    @property
    def watts(self) -> list[float]:
        return [e.mean_watts for e in self.entries]

    def reversed(self) -> "EnergyProfile":
        return EnergyProfile(tuple(reversed(self.entries)))


def load_profile(source: str | Path | IO[str]) -> EnergyProfile:
    """Parse a ``revision,mean_watts`` CSV, keeping file order.

    Row numbers in errors count the header as row 1.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8-sig")
    if isinstance(text, bytes):
        text = text.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None:
        raise ProfileError("empty profile, missing header", 1)
    header = [h.strip().lstrip("﻿") for h in header]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise ProfileError(f"header lacks column(s) {', '.join(missing)}", 1)
    rev_col = header.index("revision")
    watt_col = header.index("mean_watts")

    entries: list[ProfileEntry] = []
    seen: set[str] = set()
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) <= max(rev_col, watt_col):
            raise ProfileError("too few columns", row_no)
        rev = row[rev_col].strip()
        if not rev:
            raise ProfileError("empty revision id", row_no)
        if rev in seen:
            raise ProfileError(f"duplicate revision {rev!r}", row_no)
        try:
            watts = float(row[watt_col])
        except ValueError:
            raise ProfileError(f"non-numeric mean_watts {row[watt_col]!r}", row_no) from None
        if not math.isfinite(watts) or watts <= 0:
            raise ProfileError(f"mean_watts must be finite and positive, got {watts}", row_no)
        seen.add(rev)
        entries.append(ProfileEntry(rev, watts))
    return EnergyProfile(tuple(entries))


def compute_deltas(profile: EnergyProfile) -> list[EnergyDelta]:
    """``watts[i] - watts[i-1]`` for each i >= 1, attributed to revision i."""
    if len(profile) < 2:
        raise ProfileError(f"need at least 2 profile entries for deltas, got {len(profile)}")
    e = profile.entries
    return [EnergyDelta(e[i].revision, e[i].mean_watts - e[i - 1].mean_watts) for i in range(1, len(e))]
