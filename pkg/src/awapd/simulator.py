"""Synthetic switching-voltage PD waveform generator.

Generates the PD channel (post-sensor, post-filter analog): a flat trace
with damped-sinusoid discharge pulses clustered in windows that open at
the rising and falling edges of a trapezoidal excitation, plus optional
white noise.  Pulse counts are Poisson per edge; amplitudes and widths
are correlated log-normals per source class; mixed classes are exactly
the union of their two single-source populations, drawn from the same
per-source random streams so the union holds pulse for pulse.

Every draw comes from a counter-based stream keyed by
(master_seed, role, source, run_id, edge_index, pulse_index), so output
is a pure function of (class, config, run_id) and independent of
generation order.

The shipped default excitation is 60 Hz, 50% duty, 18 us edges, 20
cycles at 50 MS/s; the class-model numbers are engineering defaults
chosen for distinct per-class pattern morphology and are not measured
values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidArgument
from .seeding import stream
from .signal_model import PdClass, Waveform


@dataclass(frozen=True)
class ExcitationConfig:
    """Trapezoidal switching-voltage parameters (edge timing source)."""

    frequency: float  # Hz
    duty: float  # fraction of the period at the high level
    edge_time: float  # seconds, rise and fall duration
    peak_voltage: float  # volts (used only when emitting the excitation trace)
    n_cycles: int
    sample_rate: float  # samples/second

    def __post_init__(self):
        if not 0 < self.duty < 1:
            raise InvalidArgument("duty must be in (0, 1)")
        if not self.frequency > 0:
            raise InvalidArgument("frequency must be positive")
        if not self.edge_time < self.duty / self.frequency:
            raise InvalidArgument("edge_time must be shorter than the high interval")
        if self.sample_rate * self.edge_time < 10:
            raise InvalidArgument("sample_rate too low to resolve the edges")
        if self.n_cycles < 1:
            raise InvalidArgument("n_cycles must be >= 1")

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    @property
    def duration(self) -> float:
        return self.n_cycles / self.frequency

    def edge_starts(self) -> np.ndarray:
        """Start times of all rising and falling edges, in time order."""
        k = np.arange(self.n_cycles)
        rising = k * self.period
        falling = k * self.period + self.duty * self.period
        return np.sort(np.concatenate([rising, falling]))


@dataclass(frozen=True)
class ClassPulseModel:
    """Per-source pulse population statistics."""

    pulses_per_edge: float  # Poisson mean per switching edge
    edge_jitter: float  # seconds; placement window after each edge start
    amp_log_mean: float  # log-normal amplitude, volts in log space
    amp_log_sigma: float
    width_log_mean: float  # log-normal width, seconds in log space
    width_log_sigma: float
    amp_width_correlation: float  # rho in [-1, 1], shared Gaussian factor
    outlier_probability: float = 0.0
    outlier_scale: float = 1.0

    def __post_init__(self):
        if not self.pulses_per_edge > 0:
            raise InvalidArgument("pulses_per_edge must be positive")
        if self.amp_log_sigma < 0 or self.width_log_sigma < 0:
            raise InvalidArgument("log-sigmas must be >= 0")
        if not -1.0 <= self.amp_width_correlation <= 1.0:
            raise InvalidArgument("amp_width_correlation must lie in [-1, 1]")
        if not 0.0 <= self.outlier_probability <= 1.0:
            raise InvalidArgument("outlier_probability must lie in [0, 1]")
        if not self.edge_jitter > 0:
            raise InvalidArgument("edge_jitter must be positive")
        if not self.outlier_scale > 0:
            raise InvalidArgument("outlier_scale must be positive")


@dataclass(frozen=True)
class PulseShape:
    """Damped-sinusoid shape parameters: exp(-decay*t) * sin(2*pi*carrier*t)."""

    carrier_freq: float  # Hz
    decay: float  # 1/s

    def __post_init__(self):
        if not self.carrier_freq > 0 or not self.decay > 0:
            raise InvalidArgument("carrier_freq and decay must be positive")


@dataclass(frozen=True)
class ShapeSolution:
    """Closed-form geometry of the normalized damped sinusoid.

    All quantities are in carrier cycles (s = t * carrier_freq) for the
    unit shape phi(s) = exp(-q*s) * sin(2*pi*s), q = decay / carrier.
    """

    q: float
    s_peak: float  # location of the rectified maximum
    peak_value: float  # phi(s_peak)
    s_left: float  # half-level crossings of the main lobe
    s_right: float
    base_width: float  # s_right - s_left
    s_cutoff: float  # envelope below 1e-12 of the peak past this point


@lru_cache(maxsize=None)
def solve_shape(q: float) -> ShapeSolution:
    """Solve peak location, peak value and half-level crossings for ratio q."""
    if not q > 0:
        raise InvalidArgument("decay/carrier ratio must be positive")

    def phi(s: float) -> float:
        return math.exp(-q * s) * math.sin(2 * math.pi * s)

    s_peak = math.atan2(2 * math.pi, q) / (2 * math.pi)
    p = phi(s_peak)
    half = 0.5 * p
    s_left = brentq(lambda s: phi(s) - half, 1e-12, s_peak, xtol=1e-15, rtol=1e-15)
    s_right = brentq(lambda s: phi(s) - half, s_peak, 0.5, xtol=1e-15, rtol=1e-15)
    s_cutoff = s_peak + 27.631 / q  # exp(-27.631) < 1e-12
    return ShapeSolution(
        q=q,
        s_peak=s_peak,
        peak_value=p,
        s_left=s_left,
        s_right=s_right,
        base_width=s_right - s_left,
        s_cutoff=s_cutoff,
    )


SINGLE_SOURCES = (PdClass.C, PdClass.I, PdClass.S)


@dataclass(frozen=True)
class SimulatorConfig:
    """Everything simulate() needs; a pure value object.

    class_models holds exactly the three single-source models; a mixed
    class is simulated as the union of its constituents' populations,
    with no third population and no extra parameters.
    """

    excitation: ExcitationConfig
    class_models: dict  # PdClass -> ClassPulseModel, keys C, I, S only
    noise_sigma: float
    pulse_shape: PulseShape
    master_seed: int

    def __post_init__(self):
        if set(self.class_models) != set(SINGLE_SOURCES):
            raise InvalidArgument("class_models must have exactly the keys C, I, S")
        if self.noise_sigma < 0:
            raise InvalidArgument("noise_sigma must be >= 0")
        high_to_end = (1.0 - self.excitation.duty) / self.excitation.frequency
        for cls, model in self.class_models.items():
            if model.edge_jitter > high_to_end:
                raise InvalidArgument(
                    f"{cls.value}: edge_jitter exceeds the gap to the next cycle; "
                    "pulses would fall outside the record"
                )

    def to_dict(self) -> dict:
        ex = self.excitation
        return {
            "excitation": {
                "frequency": ex.frequency,
                "duty": ex.duty,
                "edge_time": ex.edge_time,
                "peak_voltage": ex.peak_voltage,
                "n_cycles": ex.n_cycles,
                "sample_rate": ex.sample_rate,
            },
            "class_models": {
                cls.value: {
                    "pulses_per_edge": m.pulses_per_edge,
                    "edge_jitter": m.edge_jitter,
                    "amp_log_mean": m.amp_log_mean,
                    "amp_log_sigma": m.amp_log_sigma,
                    "width_log_mean": m.width_log_mean,
                    "width_log_sigma": m.width_log_sigma,
                    "amp_width_correlation": m.amp_width_correlation,
                    "outlier_probability": m.outlier_probability,
                    "outlier_scale": m.outlier_scale,
                }
                for cls, m in sorted(self.class_models.items(), key=lambda kv: kv[0].order)
            },
            "noise_sigma": self.noise_sigma,
            "pulse_shape": {
                "carrier_freq": self.pulse_shape.carrier_freq,
                "decay": self.pulse_shape.decay,
            },
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimulatorConfig":
        try:
            excitation = ExcitationConfig(**d["excitation"])
            models = {
                PdClass(name): ClassPulseModel(**params)
                for name, params in d["class_models"].items()
            }
            shape = PulseShape(**d["pulse_shape"])
            return cls(
                excitation=excitation,
                class_models=models,
                noise_sigma=float(d["noise_sigma"]),
                pulse_shape=shape,
                master_seed=int(d["master_seed"]),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidArgument(f"bad simulator config: {exc}") from exc


@dataclass(frozen=True)
class InjectedPulse:
    """Ground-truth record of one injected pulse."""

    time: float  # seconds; instant of the rectified maximum
    amplitude: float  # volts; rectified peak value
    width: float  # seconds; half-prominence width of the clean pulse


def _draw_pulses(pd_class: PdClass, cfg: SimulatorConfig, run_id: int) -> list[InjectedPulse]:
    """Draw the full pulse population for one run (no waveform synthesis).

    Pulses of a mixed class come from its constituents' own streams, so
    the mixed population is the exact multiset union of the single-source
    populations for the same master seed and run id.
    """
    edges = cfg.excitation.edge_starts()
    pulses: list[InjectedPulse] = []
    for source in pd_class.constituents:
        model = cfg.class_models[source]
        rho = model.amp_width_correlation
        rho_c = math.sqrt(1.0 - rho * rho)
        for e, edge_start in enumerate(edges):
            count_rng = stream(cfg.master_seed, "count", source.value, run_id, e)
            k = int(count_rng.poisson(model.pulses_per_edge))
            for j in range(k):
                rng = stream(cfg.master_seed, "pulse", source.value, run_id, e, j)
                t_peak = edge_start + rng.uniform(0.0, model.edge_jitter)
                z1 = rng.standard_normal()
                z2 = rng.standard_normal()
                amp = math.exp(model.amp_log_mean + model.amp_log_sigma * z1)
                width = math.exp(
                    model.width_log_mean + model.width_log_sigma * (rho * z1 + rho_c * z2)
                )
                if model.outlier_probability > 0 and rng.uniform() < model.outlier_probability:
                    amp *= model.outlier_scale
                pulses.append(InjectedPulse(time=float(t_peak), amplitude=amp, width=width))
    pulses.sort(key=lambda p: (p.time, p.amplitude, p.width))
    return pulses


def ground_truth(pd_class: PdClass, cfg: SimulatorConfig, run_id: int) -> list[InjectedPulse]:
    """The exact injected pulse parameters of the matching simulate() call."""
    return _draw_pulses(pd_class, cfg, run_id)


def simulate(pd_class: PdClass, cfg: SimulatorConfig, run_id: int) -> Waveform:
    """Synthesize one labeled PD-channel waveform.

    Each injected pulse is a damped sinusoid scaled so its rectified peak
    equals the drawn amplitude and its half-prominence width equals the
    drawn width; the scaling comes from the closed-form shape solution.
    """
    ex = cfg.excitation
    n = round(ex.duration * ex.sample_rate)
    values = np.zeros(n, dtype=np.float64)
    shape = solve_shape(cfg.pulse_shape.decay / cfg.pulse_shape.carrier_freq)
    dt = 1.0 / ex.sample_rate

    for p in _draw_pulses(pd_class, cfg, run_id):
        cycle_time = p.width / shape.base_width  # seconds per carrier cycle
        t_onset = p.time - shape.s_peak * cycle_time
        i0 = max(0, math.ceil(t_onset / dt))
        i1 = min(n - 1, math.floor((t_onset + shape.s_cutoff * cycle_time) / dt))
        if i1 < i0:
            continue
        s = (np.arange(i0, i1 + 1) * dt - t_onset) / cycle_time
        values[i0 : i1 + 1] += (
            p.amplitude / shape.peak_value * np.exp(-shape.q * s) * np.sin(2 * np.pi * s)
        )

    if cfg.noise_sigma > 0:
        rng = stream(cfg.master_seed, "noise", pd_class.value, run_id)
        values += rng.normal(0.0, cfg.noise_sigma, n)

    times = np.arange(n, dtype=np.float64) * dt
    return Waveform(
        times=times,
        values=values,
        label=pd_class,
        source_id=f"sim:{pd_class.value}:{run_id}",
    )


def excitation_waveform(cfg: SimulatorConfig) -> Waveform:
    """The trapezoidal excitation itself (for plotting; not used downstream)."""
    ex = cfg.excitation
    n = round(ex.duration * ex.sample_rate)
    t = np.arange(n, dtype=np.float64) / ex.sample_rate
    tau = np.mod(t, ex.period)
    rise_end = ex.edge_time
    fall_start = ex.duty * ex.period
    fall_end = fall_start + ex.edge_time
    v = np.where(
        tau < rise_end,
        tau / ex.edge_time,
        np.where(tau < fall_start, 1.0, np.where(tau < fall_end, 1.0 - (tau - fall_start) / ex.edge_time, 0.0)),
    )
    return Waveform(times=t, values=ex.peak_voltage * v, source_id="sim:excitation")


def default_config(master_seed: Optional[int] = None) -> SimulatorConfig:
    """The shipped default configuration (data/default_sim.json)."""
    text = resources.files("awapd").joinpath("data/default_sim.json").read_text("utf-8")
    cfg = SimulatorConfig.from_dict(json.loads(text))
    if master_seed is not None:
        cfg = replace(cfg, master_seed=master_seed)
    return cfg


def desk_config(master_seed: Optional[int] = None) -> SimulatorConfig:
    """Default class models on a shorter, coarser excitation for desk-scale runs."""
    cfg = default_config(master_seed)
    return replace(cfg, excitation=replace(cfg.excitation, n_cycles=10, sample_rate=25e6))


def recovery_config(master_seed: Optional[int] = None) -> SimulatorConfig:
    """Sparse, noise-free preset for detector-recovery validation.

    Pulse density is low and the placement windows wide, so pulses
    essentially never overlap and each detected peak can be compared
    against its injected parameters.
    """
    cfg = default_config(master_seed)
    sparse = ClassPulseModel(
        pulses_per_edge=2.0,
        edge_jitter=6e-3,
        amp_log_mean=math.log(0.3),
        amp_log_sigma=0.3,
        width_log_mean=math.log(5e-7),
        width_log_sigma=0.25,
        amp_width_correlation=0.0,
    )
    return replace(
        cfg,
        excitation=replace(cfg.excitation, n_cycles=2),
        class_models={PdClass.C: sparse, PdClass.I: sparse, PdClass.S: sparse},
        noise_sigma=0.0,
    )


GROUND_TRUTH_CSV_HEADER = "time_s,amplitude_v,width_s"


def write_ground_truth_csv(pulses, path) -> None:
    from pathlib import Path

    lines = [GROUND_TRUTH_CSV_HEADER]
    for p in pulses:
        lines.append(f"{p.time!r},{p.amplitude!r},{p.width!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
