"""Waveform records and their CSV serialization.

A waveform is a time-stamped voltage record: two equal-length arrays of
timestamps (seconds, strictly increasing) and sample values (volts).  CSV
files carry one sample per row, ``time,value``, optionally preceded by a
single header row; columns beyond the first two are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import MalformedInput

PathLike = Union[str, Path]


class PdClass(Enum):
    """The six discharge source conditions, in canonical order.

    Canonical order (C < I < S < CI < CS < SI) is used for tie-breaking
    in classifiers and for confusion-matrix axes.
    """

    C = "C"
    I = "I"
    S = "S"
    CI = "CI"
    CS = "CS"
    SI = "SI"

    @property
    def order(self) -> int:
        return _CANONICAL.index(self)

    @property
    def constituents(self) -> tuple["PdClass", ...]:
        """Single-source classes whose populations this class combines."""
        return _CONSTITUENTS[self]

    @property
    def is_mixed(self) -> bool:
        return len(self.constituents) > 1

    def __lt__(self, other: "PdClass") -> bool:
        return self.order < other.order


_CANONICAL = [PdClass.C, PdClass.I, PdClass.S, PdClass.CI, PdClass.CS, PdClass.SI]

_CONSTITUENTS = {
    PdClass.C: (PdClass.C,),
    PdClass.I: (PdClass.I,),
    PdClass.S: (PdClass.S,),
    PdClass.CI: (PdClass.C, PdClass.I),
    PdClass.CS: (PdClass.C, PdClass.S),
    PdClass.SI: (PdClass.I, PdClass.S),
}

CLASSES: tuple[PdClass, ...] = tuple(_CANONICAL)
CLASS_NAMES: tuple[str, ...] = tuple(c.value for c in CLASSES)


@dataclass(frozen=True)
class Waveform:
    """An immutable time-domain signal record.

    Invariants (checked on construction): at least two samples, times and
    values the same length, times strictly increasing, all values finite.
    """

    times: np.ndarray
    values: np.ndarray
    label: Optional[PdClass] = None
    source_id: str = ""

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or values.ndim != 1 or times.shape != values.shape:
            raise MalformedInput("times and values must be 1-D arrays of equal length")
        if len(times) < 2:
            raise MalformedInput("a waveform needs at least 2 samples")
        if not np.all(np.diff(times) > 0):
            raise MalformedInput("timestamps must be strictly increasing")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
            raise MalformedInput("timestamps and values must be finite")

    def __len__(self) -> int:
        return len(self.times)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Waveform):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
            and self.label == other.label
            and self.source_id == other.source_id
        )


def _parse_row(row: Sequence[str]) -> Optional[tuple[float, float]]:
    """Parse one CSV row into (time, value); None if the row is blank."""
    cells = [c.strip() for c in row]
    if not any(cells):
        return None
    if len(cells) < 2:
        raise MalformedInput(f"row has fewer than 2 columns: {row!r}")
    return float(cells[0]), float(cells[1])


def read_waveform_csv(path: PathLike, label: Optional[PdClass] = None) -> Waveform:
    """Read a waveform CSV (time,value per row; optional single header row).

    The header is auto-detected: if the first non-blank row does not parse
    as numbers it is skipped.  Any later non-numeric row is an error; the
    parser never repairs malformed input.
    """
    path = Path(path)
    import csv

    rows: list[tuple[float, float]] = []
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first_data_seen = False
        for lineno, row in enumerate(reader, start=1):
            try:
                parsed = _parse_row(row)
            except (MalformedInput, ValueError) as exc:
                if not first_data_seen and lineno == 1:
                    continue  # header row
                raise MalformedInput(f"{path}:{lineno}: {exc}") from exc
            if parsed is None:
                continue
            first_data_seen = True
            rows.append(parsed)
    if len(rows) < 2:
        raise MalformedInput(f"{path}: fewer than 2 data rows")
    times = np.array([r[0] for r in rows], dtype=np.float64)
    values = np.array([r[1] for r in rows], dtype=np.float64)
    try:
        return Waveform(times=times, values=values, label=label, source_id=str(path))
    except MalformedInput as exc:
        raise MalformedInput(f"{path}: {exc}") from exc


def write_waveform_csv(w: Waveform, path: PathLike, header: bool = True) -> None:
    """Write a waveform as CSV using shortest round-trip decimal formatting.

    read_waveform_csv(write_waveform_csv(w)) reproduces times and values
    bit-exactly: Python's repr of a float is the shortest decimal string
    that parses back to the same binary value.
    """
    path = Path(path)
    lines = []
    if header:
        lines.append("time_s,value_v")
    for t, v in zip(w.times, w.values):
        lines.append(f"{float(t)!r},{float(v)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
