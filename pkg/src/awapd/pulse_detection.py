"""Discharge pulse detection: local maxima, prominence, half-prominence width.

The rules, in full:

* A sample is a local maximum when it strictly exceeds its left neighbour
  and strictly exceeds the next differing value to its right.  A plateau
  (run of equal values bounded below on both sides) yields exactly one
  peak, at its leftmost sample.  Endpoints are never peaks.

* Prominence: extend an interval left and right from the peak until a
  sample strictly exceeds the peak height or the signal ends; take the
  minimum within each half-interval (the peak itself excluded);
  prominence = height - max(left minimum, right minimum).

* Width: at the reference level height - prominence/2, walk outward to
  the first samples at or below the level within the prominence interval
  and linearly interpolate the crossing times; if a side never crosses
  (a floating-point corner case), clamp to the interval boundary
  timestamp.  Width = right crossing - left crossing, in seconds.

A pulse is accepted when both height >= min_height and
prominence >= min_prominence.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InvalidArgument, MalformedInput
from .signal_model import Waveform

# Block size for the outward scans; bounds the cost of short searches
# while keeping long searches vectorized.
_SCAN_BLOCK = 65536


@dataclass(frozen=True)
class Peak:
    """One accepted discharge pulse."""

    index: int  # sample index of the maximum
    time: float  # seconds
    height: float  # volts, local maximum of the (possibly rectified) signal
    prominence: float  # volts
    width: float  # seconds, at the half-prominence level
    left_cross: float  # seconds
    right_cross: float  # seconds

    def __post_init__(self):
        if not self.prominence > 0:
            raise InvalidArgument("peak prominence must be positive")
        if not self.width > 0:
            raise InvalidArgument("peak width must be positive")
        if not (self.left_cross <= self.time <= self.right_cross):
            raise InvalidArgument("peak time must lie between its width crossings")


@dataclass(frozen=True)
class DetectionConfig:
    """Acceptance thresholds for detect_pulses.

    min_height / min_prominence left as None resolve against the signal:
    5x the median absolute sample value (a robust noise reference), with
    min_prominence defaulting to the resolved min_height.
    """

    min_height: Optional[float] = None
    min_prominence: Optional[float] = None
    absolute_value: bool = True

    def __post_init__(self):
        if self.min_height is not None and not self.min_height >= 0:
            raise InvalidArgument("min_height must be >= 0")
        if self.min_prominence is not None and not self.min_prominence > 0:
            raise InvalidArgument("min_prominence must be > 0")

    def resolve(self, w: Waveform) -> tuple[float, float]:
        """Concrete (min_height, min_prominence) for a given waveform."""
        if self.min_height is not None:
            height = self.min_height
        else:
            height = 5.0 * float(np.median(np.abs(w.values)))
        if self.min_prominence is not None:
            prom = self.min_prominence
        else:
            # Keep the DetectionConfig invariant (prominence threshold > 0)
            # even for an identically-zero signal, which has no peaks anyway.
            prom = max(height, float(np.finfo(np.float64).tiny))
        return height, prom


def _local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of local maxima (leftmost plateau sample), endpoints excluded."""
    d = np.diff(values)
    s = np.sign(d)  # +1 rising, -1 falling, 0 flat
    n = len(s)
    if n < 2:
        return np.empty(0, dtype=np.intp)
    # next_nz[i] = sign of the first nonzero step at or after i (0 if none):
    # a plateau is a peak only if the terrain eventually falls again.
    idx = np.where(s != 0, np.arange(n), n)
    idx = np.minimum.accumulate(idx[::-1])[::-1]
    next_nz = np.where(idx < n, s[np.minimum(idx, n - 1)], 0.0)
    return np.flatnonzero((s[:-1] == 1) & (next_nz[1:] == -1)) + 1


def find_local_maxima(w: Waveform) -> np.ndarray:
    """All local maxima of the waveform values (see module rules)."""
    return _local_maxima(np.asarray(w.values, dtype=np.float64))


def _scan_left(values: np.ndarray, peak: int, height: float) -> tuple[int, float]:
    """Extend left from the peak until a sample strictly exceeds height.

    Returns (interval_start, interval_min): the interval is
    [interval_start, peak-1] and interval_min its minimum value.
    """
    j = peak
    vmin = np.inf
    while j > 0:
        i = max(0, j - _SCAN_BLOCK)
        chunk = values[i:j][::-1]  # nearest-first
        higher = chunk > height
        k = int(np.argmax(higher))
        if higher[k]:
            if k > 0:
                vmin = min(vmin, float(chunk[:k].min()))
            return j - k, vmin
        vmin = min(vmin, float(chunk.min()))
        j = i
    return 0, vmin


def _scan_right(values: np.ndarray, peak: int, height: float) -> tuple[int, float]:
    """Mirror of _scan_left; interval is [peak+1, interval_end]."""
    n = len(values)
    i = peak + 1
    vmin = np.inf
    while i < n:
        j = min(n, i + _SCAN_BLOCK)
        chunk = values[i:j]
        higher = chunk > height
        k = int(np.argmax(higher))
        if higher[k]:
            if k > 0:
                vmin = min(vmin, float(chunk[:k].min()))
            return i + k - 1, vmin
        vmin = min(vmin, float(chunk.min()))
        i = j
    return n - 1, vmin


def _check_is_peak(values: np.ndarray, p: int) -> None:
    n = len(values)
    if not 0 < p < n - 1:
        raise InvalidArgument(f"index {p} cannot be a peak (endpoint or out of range)")
    if not values[p] > values[p - 1]:
        raise InvalidArgument(f"index {p} is not a local maximum")
    j = p + 1
    while j < n and values[j] == values[p]:
        j += 1
    if j == n or values[j] > values[p]:
        raise InvalidArgument(f"index {p} is not a local maximum")


def prominence(w: Waveform, peak_index: int) -> float:
    """Topographic prominence of one local maximum (volts)."""
    values = np.asarray(w.values, dtype=np.float64)
    _check_is_peak(values, peak_index)
    h = float(values[peak_index])
    _, left_min = _scan_left(values, peak_index, h)
    _, right_min = _scan_right(values, peak_index, h)
    return h - max(left_min, right_min)


def _interp_cross(t0: float, v0: float, t1: float, v1: float, level: float) -> float:
    """Time where the segment (t0,v0)-(t1,v1) meets the level; v0 != v1."""
    return t0 + (level - v0) / (v1 - v0) * (t1 - t0)


def _width_one(
    times: np.ndarray,
    values: np.ndarray,
    p: int,
    height: float,
    prom: float,
    lo: int,
    hi: int,
) -> tuple[float, float, float]:
    """(width, left_cross, right_cross) for a peak with known prominence.

    lo/hi are the inclusive bounds of the prominence interval.
    """
    level = height - 0.5 * prom
    # Left: first sample at or below the level, nearest-first.
    j = p - 1
    while j >= lo and values[j] > level:
        j -= 1
    if j < lo:
        left_cross = float(times[lo])  # defensive clamp; see module docstring
    elif values[j] == level:
        left_cross = float(times[j])
    else:
        left_cross = _interp_cross(times[j], values[j], times[j + 1], values[j + 1], level)
    # Right, mirrored.
    j = p + 1
    while j <= hi and values[j] > level:
        j += 1
    if j > hi:
        right_cross = float(times[hi])
    elif values[j] == level:
        right_cross = float(times[j])
    else:
        right_cross = _interp_cross(times[j - 1], values[j - 1], times[j], values[j], level)
    left_cross = float(left_cross)
    right_cross = float(right_cross)
    return right_cross - left_cross, left_cross, right_cross


def width_at_half_prominence(
    w: Waveform, peak_index: int, prominence_value: Optional[float] = None
) -> tuple[float, float, float]:
    """(width, left_cross, right_cross) at the half-prominence level."""
    times = np.asarray(w.times, dtype=np.float64)
    values = np.asarray(w.values, dtype=np.float64)
    _check_is_peak(values, peak_index)
    h = float(values[peak_index])
    lo, lmin = _scan_left(values, peak_index, h)
    hi, rmin = _scan_right(values, peak_index, h)
    prom = h - max(lmin, rmin) if prominence_value is None else prominence_value
    return _width_one(times, values, peak_index, h, prom, lo, hi)


def detect_pulses(w: Waveform, cfg: Optional[DetectionConfig] = None) -> list[Peak]:
    """All local maxima passing both thresholds, in time order.

    With cfg.absolute_value (the default) detection runs on the rectified
    signal, so heights are scalar pulse magnitudes regardless of polarity.
    """
    if cfg is None:
        cfg = DetectionConfig()
    min_height, min_prom = cfg.resolve(w)
    times = np.asarray(w.times, dtype=np.float64)
    values = np.abs(w.values) if cfg.absolute_value else np.asarray(w.values, dtype=np.float64)

    maxima = _local_maxima(values)
    maxima = maxima[values[maxima] >= min_height]  # cheap filter before the scans
    peaks: list[Peak] = []
    for p in maxima:
        h = float(values[p])
        lo, lmin = _scan_left(values, p, h)
        hi, rmin = _scan_right(values, p, h)
        prom = h - max(lmin, rmin)
        if prom < min_prom:
            continue
        width, lc, rc = _width_one(times, values, p, h, prom, lo, hi)
        peaks.append(
            Peak(
                index=int(p),
                time=float(times[p]),
                height=h,
                prominence=prom,
                width=width,
                left_cross=lc,
                right_cross=rc,
            )
        )
    return peaks


PULSE_CSV_HEADER = "time_s,height_v,prominence_v,width_s"


def write_pulses_csv(peaks: Sequence[Peak], path: Union[str, Path]) -> None:
    """Write a detected pulse list (time_s, height_v, prominence_v, width_s)."""
    lines = [PULSE_CSV_HEADER]
    for p in peaks:
        lines.append(f"{float(p.time)!r},{float(p.height)!r},{float(p.prominence)!r},{float(p.width)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_pulses_csv(path: Union[str, Path]) -> list[tuple[float, float, float, float]]:
    """Read rows of (time_s, height_v, prominence_v, width_s)."""
    rows = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        if lineno == 1 and cells[0].strip() == "time_s":
            continue
        if len(cells) < 4:
            raise MalformedInput(f"{path}:{lineno}: expected 4 columns")
        try:
            rows.append(tuple(float(c) for c in cells[:4]))
        except ValueError as exc:
            raise MalformedInput(f"{path}:{lineno}: {exc}") from exc
    return rows
