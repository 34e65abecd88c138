"""Amplitude-Width-Area features and their scatter-pattern raster.

Each accepted pulse contributes a triple: amplitude (peak height), width
(half-prominence width) and area (their product).  A pulse population is
rendered as a deterministic RGB raster with amplitude on x, area on y and
width encoded by a fixed three-anchor colormap, one filled disc per pulse,
drawn in time order (later pulses overwrite).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from PIL import Image

from .errors import InvalidArgument
from .pulse_detection import Peak

# Colormap anchors at t = 0.0, 0.5, 1.0 (dark violet -> teal -> yellow).
COLOR_ANCHORS = ((68, 1, 84), (33, 145, 140), (253, 231, 37))


@dataclass(frozen=True)
class PulseFeatures:
    """The A/W/A triple of one pulse plus its occurrence time."""

    amplitude: float  # volts
    width: float  # seconds
    area: float  # volt-seconds, always amplitude * width
    time: float  # seconds

    def __post_init__(self):
        if not self.amplitude > 0 or not self.width > 0:
            raise InvalidArgument("pulse amplitude and width must be positive")
        if self.area != self.amplitude * self.width:
            raise InvalidArgument("area must equal amplitude * width exactly")

    @classmethod
    def from_peak(cls, peak: Peak) -> "PulseFeatures":
        return cls(
            amplitude=peak.height,
            width=peak.width,
            area=peak.height * peak.width,
            time=peak.time,
        )


def extract_features(peaks: Sequence[Peak]) -> list[PulseFeatures]:
    """One PulseFeatures per peak, in time order; area is the exact product."""
    return [PulseFeatures.from_peak(p) for p in peaks]


@dataclass(frozen=True)
class RenderConfig:
    """Geometry and normalization of the AWA raster."""

    image_width: int = 256
    image_height: int = 256
    amplitude_range: tuple[float, float] = (0.0, 1.0)
    area_range: tuple[float, float] = (0.0, 1.0)
    width_range: tuple[float, float] = (0.0, 1.0)
    point_radius: int = 2
    margin: int = 8
    background: tuple[int, int, int] = (255, 255, 255)

    def __post_init__(self):
        if self.image_width < 64 or self.image_height < 64:
            raise InvalidArgument("image dimensions must be >= 64")
        if self.point_radius < 1:
            raise InvalidArgument("point_radius must be >= 1")
        for name in ("amplitude_range", "area_range", "width_range"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise InvalidArgument(f"{name} must be non-degenerate (hi > lo)")

    def to_dict(self) -> dict:
        return {
            "image_width": self.image_width,
            "image_height": self.image_height,
            "amplitude_range": list(self.amplitude_range),
            "area_range": list(self.area_range),
            "width_range": list(self.width_range),
            "point_radius": self.point_radius,
            "margin": self.margin,
            "background": list(self.background),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RenderConfig":
        return cls(
            image_width=int(d["image_width"]),
            image_height=int(d["image_height"]),
            amplitude_range=tuple(d["amplitude_range"]),
            area_range=tuple(d["area_range"]),
            width_range=tuple(d["width_range"]),
            point_radius=int(d["point_radius"]),
            margin=int(d["margin"]),
            background=tuple(d["background"]),
        )


@dataclass(frozen=True)
class AwaImage:
    """A rendered AWA pattern: row-major 8-bit RGB pixels."""

    pixels: np.ndarray  # (H, W, 3) uint8
    config: RenderConfig
    n_pulses: int

    def save_png(self, path: Union[str, Path]) -> None:
        # Plain 8-bit RGB PNG, no ancillary chunks: byte-reproducible.
        Image.fromarray(self.pixels, mode="RGB").save(Path(path), format="PNG")

    def png_bytes(self) -> bytes:
        import io

        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def width_to_color(width: float, cfg: RenderConfig) -> tuple[int, int, int]:
    """Map a pulse width to RGB via the fixed three-anchor gradient."""
    w_lo, w_hi = cfg.width_range
    t = (width - w_lo) / (w_hi - w_lo)
    t = min(1.0, max(0.0, t))
    if t <= 0.5:
        a, b = COLOR_ANCHORS[0], COLOR_ANCHORS[1]
        u = t / 0.5
    else:
        a, b = COLOR_ANCHORS[1], COLOR_ANCHORS[2]
        u = (t - 0.5) / 0.5
    return tuple(_round_half_up(a[i] + (b[i] - a[i]) * u) for i in range(3))


def _disc_offsets(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    dx, dy = np.meshgrid(span, span)
    keep = dx * dx + dy * dy <= radius * radius
    return np.stack([dx[keep], dy[keep]], axis=1)


def render_awa(pulses: Sequence[PulseFeatures], cfg: RenderConfig) -> AwaImage:
    """Rasterize a pulse population; a pure function of (pulses, cfg).

    Pixel centers: x = margin + norm(amplitude) * (W - 2*margin),
    y = H - margin - norm(area) * (H - 2*margin); out-of-range pulses are
    clamped to the plot border before mapping.
    """
    h, w = cfg.image_height, cfg.image_width
    canvas = np.empty((h, w, 3), dtype=np.uint8)
    canvas[:, :] = cfg.background
    a_lo, a_hi = cfg.amplitude_range
    r_lo, r_hi = cfg.area_range
    offsets = _disc_offsets(cfg.point_radius)
    for p in sorted(pulses, key=lambda p: p.time):
        tx = min(1.0, max(0.0, (p.amplitude - a_lo) / (a_hi - a_lo)))
        ty = min(1.0, max(0.0, (p.area - r_lo) / (r_hi - r_lo)))
        cx = _round_half_up(cfg.margin + tx * (w - 2 * cfg.margin))
        cy = _round_half_up(h - cfg.margin - ty * (h - 2 * cfg.margin))
        color = width_to_color(p.width, cfg)
        xs = offsets[:, 0] + cx
        ys = offsets[:, 1] + cy
        keep = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
        canvas[ys[keep], xs[keep]] = color
    return AwaImage(pixels=canvas, config=cfg, n_pulses=len(pulses))


def auto_ranges(
    pulse_sets: Iterable[Sequence[PulseFeatures]],
) -> tuple[tuple[float, float], tuple[float, float], tuple[float, float]]:
    """Shared (amplitude, area, width) ranges: [0, 1.05 * global maximum].

    Computed across all sets so every image of a dataset shares one
    feature-space geometry.
    """
    a_max = r_max = w_max = 0.0
    any_pulse = False
    for pulses in pulse_sets:
        for p in pulses:
            any_pulse = True
            a_max = max(a_max, p.amplitude)
            r_max = max(r_max, p.area)
            w_max = max(w_max, p.width)
    if not any_pulse:
        raise InvalidArgument("auto_ranges needs at least one nonempty pulse set")
    return (0.0, 1.05 * a_max), (0.0, 1.05 * r_max), (0.0, 1.05 * w_max)
