"""Analytic pulse-echo forward model for point-scatterer scenes.

Elements are isotropic points on the lateral axis (z = 0). Every echo is a
copy of the transmit pulse delayed by the two-way path length, scaled by the
scatterer reflectivity; there is no attenuation or directivity. Scenes may
move between transmit events but are frozen during a single pulse-echo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numba as nb
import numpy as np

from .datasets import DimensionError, EncodedDataset, MultistaticDataset
from .hadamard import check_hadamard

ENVELOPES = ("rectangular", "hann")


class InvalidSceneError(ValueError):
    """Raised for scenes that cannot be imaged (e.g. scatterers behind the array)."""


class UndersampledError(ValueError):
    """Raised when the sample rate is below four times the centre frequency."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Linear array of ``n_elements`` point elements, centred on x = 0."""

    n_elements: int
    pitch: float

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        if self.pitch <= 0:
            raise ValueError("pitch must be positive")

    @property
    def element_positions(self) -> np.ndarray:
        return (np.arange(self.n_elements) - (self.n_elements - 1) / 2.0) * self.pitch

    @property
    def aperture(self) -> float:
        return (self.n_elements - 1) * self.pitch


@dataclass(frozen=True)
class PulseDefinition:
    """Windowed sinusoid; ``sample_rate`` defaults to eight times the centre frequency."""

    center_frequency: float
    cycles: float = 2.0
    envelope: str = "rectangular"
    sample_rate: float | None = None

    def __post_init__(self):
        if self.center_frequency <= 0:
            raise ValueError("center_frequency must be positive")
        if self.cycles < 0:
            raise ValueError("cycles must be >= 0")
        if self.envelope not in ENVELOPES:
            raise ValueError(f"envelope must be one of {ENVELOPES}, got {self.envelope!r}")
        if self.sample_rate is None:
            object.__setattr__(self, "sample_rate", 8.0 * self.center_frequency)
        if self.sample_rate < 4.0 * self.center_frequency:
            raise UndersampledError(
                f"sample_rate {self.sample_rate:g} Hz is below 4 x centre frequency "
                f"({4 * self.center_frequency:g} Hz)")

    @property
    def duration(self) -> float:
        return self.cycles / self.center_frequency

    @property
    def center_time(self) -> float:
        """Time of the envelope centre relative to pulse onset."""
        return 0.5 * self.duration


def pulse_waveform(p: PulseDefinition) -> np.ndarray:
    """Sample the pulse on ``t = n / fs`` for ``t`` in ``[0, cycles / f_c)``."""
    n = int(round(p.duration * p.sample_rate))
    t = np.arange(n) / p.sample_rate
    wave = np.sin(2 * np.pi * p.center_frequency * t)
    if p.envelope == "hann":
        wave *= np.sin(np.pi * t / p.duration) ** 2
    return wave


@dataclass(frozen=True)
class Scatterer:
    initial_position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    reflectivity: float = 1.0
    reflectivity: float = 1.0


@dataclass
class ScattererScene:
    """Point scatterers moving at constant velocity.

    Positions and velocities are ``(lateral, axial)`` in metres and m/s.
    Stored as arrays so that speckle scenes with thousands of points stay cheap.
    """

    positions: np.ndarray
    velocities: np.ndarray | None = None
    reflectivity: np.ndarray | None = None
    speed_of_sound: float = 1540.0
    prf: float = 1000.0
    noise_snr_db: float | None = None
    rng_seed: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        k = self.positions.shape[0]
        if self.velocities is None:
            self.velocities = np.zeros((k, 2))
        self.velocities = np.asarray(self.velocities, dtype=np.float64).reshape(-1, 2)
        if self.velocities.shape[0] == 1 and k != 1:
            self.velocities = np.repeat(self.velocities, k, axis=0)
        if self.reflectivity is None:
            self.reflectivity = np.ones(k)
        self.reflectivity = np.asarray(self.reflectivity, dtype=np.float64).reshape(-1)
        if self.velocities.shape[0] != k or self.reflectivity.shape[0] != k:
            raise DimensionError("positions, velocities and reflectivity must have one row per scatterer")
        if self.speed_of_sound <= 0 or self.prf <= 0:
            raise InvalidSceneError("speed_of_sound and prf must be positive")
        if k and np.any(self.positions[:, 1] <= 0):
            raise InvalidSceneError("all scatterers must lie in front of the array (axial > 0)")

    @classmethod
    def from_scatterers(cls, scatterers: Iterable[Scatterer], **kwargs) -> "ScattererScene":
        scatterers = list(scatterers)
        if not scatterers:
            return cls(np.zeros((0, 2)), **kwargs)
        return cls(
            np.array([s.initial_position for s in scatterers], dtype=float),
            np.array([s.velocity for s in scatterers], dtype=float),
            np.array([s.reflectivity for s in scatterers], dtype=float),
            **kwargs,
        )

    @property
    def scatterers(self) -> list[Scatterer]:
        return [Scatterer(tuple(p), tuple(v), float(r))
                for p, v, r in zip(self.positions, self.velocities, self.reflectivity)]

    @property
    def n_scatterers(self) -> int:
        return self.positions.shape[0]

    @property
    def is_static(self) -> bool:
        return not np.any(self.velocities)

    def with_noise(self, noise_snr_db: float | None, rng_seed: int | None = None) -> "ScattererScene":
        return ScattererScene(self.positions, self.velocities, self.reflectivity,
                              self.speed_of_sound, self.prf, noise_snr_db,
                              self.rng_seed if rng_seed is None else rng_seed)

    def frozen(self, event_index: int = 1) -> "ScattererScene":
        """Static copy of the scene at ``event_index``."""
        return ScattererScene(scene_at_event(self, event_index), None, self.reflectivity,
                              self.speed_of_sound, self.prf, self.noise_snr_db, self.rng_seed)


def scene_at_event(scene: ScattererScene, event_index: int) -> np.ndarray:
    """Scatterer positions during transmit event ``event_index`` (1-based)."""
    if event_index < 1:
        raise ValueError(f"event_index must be >= 1, got {event_index}")
    return scene.positions + scene.velocities * ((event_index - 1) / scene.prf)


def speckle_scene(lateral: Sequence[float], axial: Sequence[float], density: float,
                  rng_seed: int = 0, cysts: Sequence[tuple[tuple[float, float], float]] = (),
                  velocity: tuple[float, float] = (0.0, 0.0), **kwargs) -> ScattererScene:
    """Uniformly scattered points with Gaussian reflectivity and anechoic circular cysts.

    Parameters
    ----------
    lateral, axial : (min, max)
        Region filled with scatterers, in metres.
    density : float
        Mean scatterer count per square millimetre.
    cysts : sequence of ((x, z), radius)
        Circular regions left empty.
    """
    rng = np.random.default_rng(rng_seed)
    area_mm2 = (lateral[1] - lateral[0]) * (axial[1] - axial[0]) * 1e6
    k = rng.poisson(density * area_mm2)
    pos = np.column_stack([rng.uniform(lateral[0], lateral[1], k),
                           rng.uniform(axial[0], axial[1], k)])
    refl = rng.standard_normal(k)
    keep = np.ones(k, dtype=bool)
    for (cx, cz), radius in cysts:
        keep &= (pos[:, 0] - cx) ** 2 + (pos[:, 1] - cz) ** 2 > radius ** 2
    return ScattererScene(pos[keep], np.asarray(velocity, dtype=float).reshape(1, 2),
                          refl[keep], rng_seed=rng_seed, **kwargs)


@nb.njit(cache=True)
def _echo_kernel(out, col_ptr, col_rows, col_vals, tx_x, rx_x, pos, refl, c, fs, t0, f0,
                 duration, hann):
    # out[r, j, n] += refl_k * sum_i weights[r, i] * p(t0 + n/fs - tau_ik - tau_jk)
    # weights are given column-wise: rows col_rows[col_ptr[i]:col_ptr[i+1]] of column i
    n_rows, n_rx, n_t = out.shape
    n_tx = tx_x.shape[0]
    dt_tx = np.empty(n_tx)
    dt_rx = np.empty(n_rx)
    two_pi = 2.0 * np.pi
    step = two_pi * f0 / fs
    cs, ss = math.cos(step), math.sin(step)
    wstep = two_pi / (duration * fs)
    cw, sw = math.cos(wstep), math.sin(wstep)
    n_pulse = int(math.ceil(duration * fs)) + 2
    buf = np.empty(n_pulse)
    for k in range(pos.shape[0]):
        px = pos[k, 0]
        pz = pos[k, 1]
        for i in range(n_tx):
            dt_tx[i] = math.sqrt((tx_x[i] - px) ** 2 + pz * pz) / c
        for j in range(n_rx):
            dt_rx[j] = math.sqrt((rx_x[j] - px) ** 2 + pz * pz) / c
        for i in range(n_tx):
            for j in range(n_rx):
                tau = dt_tx[i] + dt_rx[j]
                n0 = int(math.ceil((tau - t0) * fs))
                n1 = int(math.ceil((tau + duration - t0) * fs))
                if n0 < 0:
                    n0 = 0
                if n1 > n_t:
                    n1 = n_t
                if n0 >= n1:
                    continue
                u0 = t0 + n0 / fs - tau
                ph = two_pi * f0 * u0
                s = math.sin(ph)
                co = math.cos(ph)
                if hann:
                    wp = two_pi * u0 / duration
                    ws = math.sin(wp)
                    wc = math.cos(wp)
                for m in range(n1 - n0):
                    if hann:
                        buf[m] = s * 0.5 * (1.0 - wc)
                        wc, ws = wc * cw - ws * sw, ws * cw + wc * sw
                    else:
                        buf[m] = s
                    s, co = s * cs + co * ss, co * cs - s * ss
                for nz in range(col_ptr[i], col_ptr[i + 1]):
                    r = col_rows[nz]
                    w = col_vals[nz] * refl[k]
                    for m in range(n1 - n0):
                        out[r, j, n0 + m] += w * buf[m]


def _max_delay(scene: ScattererScene, geometry: ArrayGeometry, n_events: int) -> float:
    if scene.n_scatterers == 0:
        return 0.0
    xs = geometry.element_positions
    worst = 0.0
    for e in (1, n_events):
        pos = scene_at_event(scene, e)
        d = np.sqrt((pos[:, :1] - xs[None, :]) ** 2 + pos[:, 1:2] ** 2)
        worst = max(worst, float(np.max(2 * d.max(axis=1))))
    return worst / scene.speed_of_sound


def record_length(scene: ScattererScene, geometry: ArrayGeometry, pulse: PulseDefinition,
                  start_time: float = 0.0, n_events: int | None = None) -> int:
    """Samples needed to hold every echo over an ensemble of ``n_events`` events.

    Motion is linear, so the extreme delay occurs at the first or last event.
    """
    n_events = geometry.n_elements if n_events is None else n_events
    t_end = _max_delay(scene, geometry, n_events) + pulse.duration
    return max(int(math.ceil((t_end - start_time) * pulse.sample_rate)) + 2, 2)


def _echoes(scene, geometry, pulse, positions, weights, n_samples, start_time):
    out = np.zeros((weights.shape[0], geometry.n_elements, n_samples))
    if positions.shape[0]:
        xs = geometry.element_positions
        wt = np.asarray(weights, dtype=np.float64).T
        nonzero = wt != 0
        col_ptr = np.concatenate([[0], np.cumsum(nonzero.sum(axis=1))]).astype(np.int64)
        col_rows = np.nonzero(nonzero)[1].astype(np.int64)
        _echo_kernel(out, col_ptr, col_rows, np.ascontiguousarray(wt[nonzero]), xs, xs,
                     np.ascontiguousarray(positions), scene.reflectivity,
                     float(scene.speed_of_sound), float(pulse.sample_rate), float(start_time),
                     float(pulse.center_frequency), float(pulse.duration), pulse.envelope == "hann")
    return out


def _noise_sigma(clean: np.ndarray, snr_db: float) -> float:
    rms = float(np.sqrt(np.mean(clean ** 2)))
    return rms / 10.0 ** (snr_db / 20.0)


def _add_noise(data: np.ndarray, sigma: float, seed: int, tag: int, event_index: int,
               row_offset: int = 0) -> None:
    # one generator per (row, receive channel) so results do not depend on evaluation order
    n_rows, n_rx, n_t = data.shape
    for r in range(n_rows):
        for j in range(n_rx):
            rng = np.random.default_rng([seed, tag, event_index, row_offset + r, j])
            data[r, j] += sigma * rng.standard_normal(n_t)


def simulate_multistatic(scene: ScattererScene, geometry: ArrayGeometry, pulse: PulseDefinition,
                         event_index: int = 1, n_samples: int | None = None,
                         start_time: float = 0.0) -> MultistaticDataset:
    """Single-element transmit responses with the scene frozen at ``event_index``.

    Optional white noise is added at ``scene.noise_snr_db`` relative to the
    RMS of the noiseless dataset, from streams seeded by ``scene.rng_seed``.
    """
    if n_samples is None:
        n_samples = record_length(scene, geometry, pulse, start_time)
    n = geometry.n_elements
    data = _echoes(scene, geometry, pulse, scene_at_event(scene, event_index),
                   np.eye(n), n_samples, start_time)
    if scene.noise_snr_db is not None and data.any():
        _add_noise(data, _noise_sigma(data, scene.noise_snr_db), scene.rng_seed, 0, event_index)
    return MultistaticDataset(data, pulse.sample_rate, start_time)


def simulate_encoded(scene: ScattererScene, geometry: ArrayGeometry, pulse: PulseDefinition,
                     weights: np.ndarray, n_samples: int | None = None, start_time: float = 0.0,
                     static_shortcut: bool = True, first_event: int = 1) -> EncodedDataset:
    """Encoded acquisition: event ``e`` fires every element ``i`` with gain ``weights[e, i]``.

    The scene is frozen at event ``first_event + e`` for row ``e``. For a
    static scene the multistatic responses are computed once and combined,
    which is the same linear map; pass ``static_shortcut=False`` to force the
    per-event path.
    """
    weights = np.asarray(weights, dtype=np.float64)
    n_events = weights.shape[0]
    if weights.ndim != 2 or weights.shape[1] != geometry.n_elements:
        raise DimensionError(
            f"encoding matrix has shape {weights.shape}, expected (events, {geometry.n_elements})")
    if n_samples is None:
        n_samples = record_length(scene, geometry, pulse, start_time,
                                  n_events=first_event + n_events - 1)
    if scene.is_static and static_shortcut:
        multi = _echoes(scene, geometry, pulse, scene.positions, np.eye(geometry.n_elements),
                        n_samples, start_time)
        return encode_static(MultistaticDataset(multi, pulse.sample_rate, start_time), weights,
                             scene.noise_snr_db, scene.rng_seed, first_event)
    data = np.empty((n_events, geometry.n_elements, n_samples))
    for e in range(n_events):
        pos = scene_at_event(scene, first_event + e)
        data[e] = _echoes(scene, geometry, pulse, pos, weights[e:e + 1], n_samples, start_time)[0]
    if scene.noise_snr_db is not None and data.any():
        _add_noise(data, _noise_sigma(data, scene.noise_snr_db), scene.rng_seed, 1, 0,
                   row_offset=first_event - 1)
    return EncodedDataset(data, pulse.sample_rate, start_time, encoding_rank=n_events)


def encode_static(multi: MultistaticDataset, weights: np.ndarray, noise_snr_db: float | None = None,
                  rng_seed: int = 0, first_event: int = 1) -> EncodedDataset:
    """Encoded acquisition of a static scene from its noiseless multistatic responses.

    Gives the same result as :func:`simulate_encoded` on that scene, so one
    multistatic simulation can serve several encodings.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[1] != multi.n_tx:
        raise DimensionError(f"encoding matrix has shape {weights.shape}, expected (events, {multi.n_tx})")
    data = np.tensordot(weights, multi.samples, axes=(1, 0))
    if noise_snr_db is not None and data.any():
        _add_noise(data, _noise_sigma(data, noise_snr_db), rng_seed, 1, 0, row_offset=first_event - 1)
    return EncodedDataset(data, multi.sample_rate, multi.start_time, encoding_rank=weights.shape[0])


def simulate_forces(scene: ScattererScene, geometry: ArrayGeometry, pulse: PulseDefinition,
                    h: np.ndarray, n_samples: int | None = None, start_time: float = 0.0,
                    static_shortcut: bool = True, first_event: int = 1) -> EncodedDataset:
    """FORCES acquisition: event ``e`` biases the aperture with row ``e`` of ``h``."""
    n = check_hadamard(h)
    if n != geometry.n_elements:
        raise DimensionError(f"Hadamard rank {n} does not match {geometry.n_elements} elements")
    return simulate_encoded(scene, geometry, pulse, h, n_samples, start_time,
                            static_shortcut, first_event)
