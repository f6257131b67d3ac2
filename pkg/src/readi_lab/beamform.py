"""FORCES and READI reconstruction.

The FORCES path fully decodes the encoded ensemble and delay-and-sums the
multistatic dataset. The READI path keeps each sequential group of ``Q``
events separate: it partially decodes the group with ``H_Q^-1``, beamforms
the result once per element group with that group's delays, and weights the
sub-images with column ``s`` of ``H_S^-1``. Summing the ``S`` low-resolution
images reproduces the FORCES image exactly when coherence-factor weighting
is off.

Analytic-signal conversion happens after (partial) decoding on both paths.
Images are ``(n_axial, n_lateral)`` complex arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft

from . import _kernels
from .datasets import (DimensionError, EncodedDataset, GroupedDataset, MultistaticDataset,
                       PartiallyDecodedGroup)
from .hadamard import GroupingScheme, check_hadamard, inverse, sylvester, uforces_encoding
from .simulate import ArrayGeometry

WINDOWS = ("rect", "hann")
INTERPOLATIONS = ("nearest", "linear")


@dataclass(frozen=True)
class ImagingGrid:
    """Rectangular pixel grid; extents in metres, pixel centres start at the minimum."""

    lateral_extent: tuple[float, float]
    axial_extent: tuple[float, float]
    pixel_size: tuple[float, float]

    def __post_init__(self):
        (x0, x1), (z0, z1) = self.lateral_extent, self.axial_extent
        if x1 < x0 or z1 < z0:
            raise ValueError("grid extents must be non-empty [min, max] pairs")
        if min(self.pixel_size) <= 0:
            raise ValueError("pixel_size must be positive")
        if z0 <= 0:
            raise ValueError("axial extent must lie in front of the array")

    @property
    def x(self) -> np.ndarray:
        n = int(np.floor((self.lateral_extent[1] - self.lateral_extent[0]) / self.pixel_size[0] + 1e-9)) + 1
        return self.lateral_extent[0] + np.arange(n) * self.pixel_size[0]

    @property
    def z(self) -> np.ndarray:
        n = int(np.floor((self.axial_extent[1] - self.axial_extent[0]) / self.pixel_size[1] + 1e-9)) + 1
        return self.axial_extent[0] + np.arange(n) * self.pixel_size[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.z.size, self.x.size

    @classmethod
    def centered(cls, n_lateral: int, n_axial: int, pixel: float, depth: float,
                 x_center: float = 0.0) -> "ImagingGrid":
        """``n_axial x n_lateral`` grid whose centre sits at ``(x_center, depth)``."""
        half_x = (n_lateral - 1) / 2 * pixel
        half_z = (n_axial - 1) / 2 * pixel
        return cls((x_center - half_x, x_center + half_x), (depth - half_z, depth + half_z),
                   (pixel, pixel))


@dataclass(frozen=True)
class BeamformConfig:
    speed_of_sound: float = 1540.0
    receive_fnumber: float = 1.0
    apodization_window: str = "rect"
    cf_weighting: bool = False
    interpolation: str = "linear"
    parallel: bool = False

    def __post_init__(self):
        if self.receive_fnumber <= 0:
            raise ValueError("receive_fnumber must be positive")
        if self.apodization_window not in WINDOWS:
            raise ValueError(f"apodization_window must be one of {WINDOWS}")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")


@dataclass
class ComplexImage:
    grid: ImagingGrid
    pixels: np.ndarray
    provenance: str = "forces"

    def __post_init__(self):
        if self.pixels.shape != self.grid.shape:
            raise DimensionError(f"pixels {self.pixels.shape} do not match grid {self.grid.shape}")

    @property
    def envelope(self) -> np.ndarray:
        return np.abs(self.pixels)


# -- encoding ---------------------------------------------------------------

def _hadamard_apply(h: np.ndarray, data: np.ndarray) -> np.ndarray:
    # integer +-1 weights: cast to the data dtype so f32 input stays f32
    return np.tensordot(h.astype(data.real.dtype), data, axes=(1, 0))


def encode_forces(s: MultistaticDataset, h: np.ndarray) -> EncodedDataset:
    """``G = H S`` over the transmit dimension."""
    n = check_hadamard(h)
    if n != s.n_tx:
        raise DimensionError(f"Hadamard rank {n} does not match n_tx={s.n_tx}")
    return EncodedDataset(_hadamard_apply(h, s.samples), s.sample_rate, s.start_time, n)


def decode_forces(g: EncodedDataset, h: np.ndarray) -> MultistaticDataset:
    """``S = (1/n) H^T G``."""
    n = check_hadamard(h)
    if n != g.n_events:
        raise DimensionError(f"Hadamard rank {n} does not match n_events={g.n_events}")
    return MultistaticDataset(_decode(h, g.samples), g.sample_rate, g.start_time)


def _decode(h: np.ndarray, data: np.ndarray) -> np.ndarray:
    n = h.shape[0]
    out = _hadamard_apply(np.ascontiguousarray(h.T), data)
    out *= data.real.dtype.type(1.0 / n)
    return out


def analytic_signal(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """FFT analytic signal: zero negative frequencies, double positive ones.

    DC (and Nyquist, for even length) are left unscaled. ``real(out) == x``.
    """
    x = np.asarray(x)
    if np.iscomplexobj(x):
        raise TypeError("analytic_signal expects real input")
    n = x.shape[axis]
    if n < 2:
        raise ValueError("analytic_signal needs at least two samples")
    spectrum = scipy.fft.fft(x, axis=axis)
    gain = np.zeros(n, dtype=x.real.dtype if x.dtype.kind == "f" else np.float64)
    gain[0] = 1
    if n % 2 == 0:
        gain[n // 2] = 1
        gain[1:n // 2] = 2
    else:
        gain[1:(n + 1) // 2] = 2
    shape = [1] * x.ndim
    shape[axis] = n
    return scipy.fft.ifft(spectrum * gain.reshape(shape), axis=axis)


def _as_analytic(data: np.ndarray) -> np.ndarray:
    return data if np.iscomplexobj(data) else analytic_signal(data)


# -- delay and sum ------------------------------------------------------------

def _beamform(data: np.ndarray, tx_positions: np.ndarray, sample_rate: float, start_time: float,
              grid: ImagingGrid, geometry: ArrayGeometry, cfg: BeamformConfig,
              cf_weighting: bool | None = None) -> np.ndarray:
    """Delay-and-sum of analytic signals ``data[k, j, t]``; signal ``k`` is
    delayed as if fired by an element at lateral ``tx_positions[k]``."""
    data = np.ascontiguousarray(data)
    if data.shape[1] != geometry.n_elements:
        raise DimensionError(f"data has {data.shape[1]} receive channels, geometry {geometry.n_elements}")
    real = data.real.dtype
    out = np.zeros(grid.shape, dtype=data.dtype)
    rbuf = np.array([0, 1, 0, 0], dtype=real)
    use_cf = cfg.cf_weighting if cf_weighting is None else cf_weighting
    kernel = _kernels.das_kernel_parallel if cfg.parallel else _kernels.das_kernel
    kernel(data, np.asarray(tx_positions, dtype=np.float64), geometry.element_positions,
           grid.x, grid.z, float(start_time), float(sample_rate), float(cfg.speed_of_sound),
           float(cfg.receive_fnumber), cfg.apodization_window == "hann",
           cfg.interpolation == "linear", bool(use_cf), out, rbuf)
    return out


def das_reconstruct(s: MultistaticDataset, grid: ImagingGrid, geometry: ArrayGeometry,
                    cfg: BeamformConfig = BeamformConfig()) -> ComplexImage:
    """Multistatic delay-and-sum with two-way delays and an F-number receive gate.

    Real input is converted to analytic signals first. Delays that fall
    outside the record contribute nothing.
    """
    if s.n_tx != geometry.n_elements:
        raise DimensionError(f"dataset has {s.n_tx} transmitters, geometry {geometry.n_elements}")
    pixels = _beamform(_as_analytic(s.samples), geometry.element_positions, s.sample_rate,
                       s.start_time, grid, geometry, cfg)
    return ComplexImage(grid, pixels, "forces")


def forces_reconstruct(g: EncodedDataset, h: np.ndarray, grid: ImagingGrid,
                       geometry: ArrayGeometry, cfg: BeamformConfig = BeamformConfig()) -> ComplexImage:
    """Decode the full ensemble and delay-and-sum it."""
    return das_reconstruct(decode_forces(g, h), grid, geometry, cfg)


# -- READI ------------------------------------------------------------------

def group_dataset(g: EncodedDataset, scheme: GroupingScheme) -> GroupedDataset:
    """Slice the ensemble into ``S`` sequential groups of ``Q`` events (views, no copies)."""
    if scheme.n_total != g.n_events:
        raise DimensionError(f"scheme covers {scheme.n_total} events, dataset has {g.n_events}")
    q = scheme.group_size
    groups = [g.samples[s * q:(s + 1) * q] for s in range(scheme.n_groups)]
    return GroupedDataset(scheme, groups, g.sample_rate, g.start_time)


def partial_decode(group: np.ndarray, hq: np.ndarray, group_index: int = 1,
                   sample_rate: float = 1.0, start_time: float = 0.0,
                   analytic: bool = True) -> PartiallyDecodedGroup:
    """``d'_s = H_Q^-1 g'_s``, optionally followed by analytic-signal conversion."""
    q = check_hadamard(hq)
    group = np.asarray(group)
    if group.shape[0] != q:
        raise DimensionError(f"group has {group.shape[0]} events, H_Q has rank {q}")
    d = _decode(hq, group)
    if analytic:
        d = _as_analytic(d)
    return PartiallyDecodedGroup(group_index, d, sample_rate, start_time)


def _element_group_positions(geometry: ArrayGeometry, n_groups: int, group_size: int,
                             l: int) -> np.ndarray:
    if not 1 <= l <= n_groups:
        raise DimensionError(f"element group must lie in 1..{n_groups}, got {l}")
    xs = geometry.element_positions
    return xs[(l - 1) * group_size: l * group_size]


def grouped_das(d: PartiallyDecodedGroup, l: int, n_groups: int, grid: ImagingGrid,
                geometry: ArrayGeometry, cfg: BeamformConfig = BeamformConfig()) -> ComplexImage:
    """Sub-image of a partially decoded group using the delays of element group ``l``.

    Signal ``v`` is delayed as if transmitted by element ``v + Q(l-1)``.
    """
    q = d.signals.shape[0]
    if q * n_groups != geometry.n_elements:
        raise DimensionError(f"{n_groups} groups of {q} do not cover {geometry.n_elements} elements")
    tx = _element_group_positions(geometry, n_groups, q, l)
    pixels = _beamform(_as_analytic(d.signals), tx, d.sample_rate, d.start_time, grid,
                       geometry, cfg, cf_weighting=False)
    return ComplexImage(grid, pixels, f"readi-sub({d.group_index},{l})")


def _stack_for_group(d: np.ndarray, s: int, hs: np.ndarray) -> np.ndarray:
    # signal (v, l) -> hs_inv[l, s] * d'_v, fired from element v + Q(l-1)
    hs_inv = inverse(hs, d.real.dtype.type)
    weights = hs_inv[:, s - 1]
    return (weights[:, None, None, None] * d[None]).reshape((-1,) + d.shape[1:])


def readi_low_res(group: np.ndarray, s: int, hs: np.ndarray, hq: np.ndarray, grid: ImagingGrid,
                  geometry: ArrayGeometry, cfg: BeamformConfig = BeamformConfig(),
                  sample_rate: float | None = None, start_time: float = 0.0) -> ComplexImage:
    """Low-resolution image of event group ``s``.

    Equal to ``sum_l Hs_inv[l, s] * grouped_das(partial_decode(group), l)``.
    The weighted sub-images are formed in one delay-and-sum pass over all
    ``N`` (signal, element) pairings, so coherence-factor weighting, when
    enabled, sees every sample contributing to the low-resolution pixel.

    ``group`` may be a raw ``(Q, M, T)`` array (then ``sample_rate`` is required)
    or a :class:`PartiallyDecodedGroup`.
    """
    n_groups = check_hadamard(hs)
    q = check_hadamard(hq)
    if not 1 <= s <= n_groups:
        raise DimensionError(f"group index must lie in 1..{n_groups}, got {s}")
    if n_groups * q != geometry.n_elements:
        raise DimensionError(f"S*Q = {n_groups * q} does not match {geometry.n_elements} elements")
    if isinstance(group, PartiallyDecodedGroup):
        d = group
    else:
        if sample_rate is None:
            raise ValueError("sample_rate is required for raw group arrays")
        d = partial_decode(group, hq, s, sample_rate, start_time)
    signals = _as_analytic(d.signals)
    stacked = _stack_for_group(signals, s, hs)
    pixels = _beamform(stacked, geometry.element_positions, d.sample_rate, d.start_time, grid,
                       geometry, cfg)
    return ComplexImage(grid, pixels, f"readi({s})")


def readi_reconstruct(g: EncodedDataset, scheme: GroupingScheme, grid: ImagingGrid,
                      geometry: ArrayGeometry, cfg: BeamformConfig = BeamformConfig()) -> list[ComplexImage]:
    """All ``S`` low-resolution images of an encoded ensemble, in acquisition order."""
    grouped = group_dataset(g, scheme)
    hs = sylvester(scheme.n_groups)
    hq = sylvester(scheme.group_size)
    return [readi_low_res(grouped.group(s), s, hs, hq, grid, geometry, cfg,
                          grouped.sample_rate, grouped.start_time)
            for s in range(1, scheme.n_groups + 1)]


def compound(images: Sequence[ComplexImage], provenance: str = "compound") -> ComplexImage:
    """Coherent pixel-wise sum."""
    if not images:
        raise ValueError("compound needs at least one image")
    grid = images[0].grid
    for im in images[1:]:
        if im.grid != grid:
            raise DimensionError("cannot compound images on different grids")
    if len(images) == 1:
        return images[0]
    total = images[0].pixels.copy()
    for im in images[1:]:
        total += im.pixels
    return ComplexImage(grid, total, provenance)


def coherence_factor(samples) -> float:
    """``|sum S_k|^2 / (K sum |S_k|^2)``, in [0, 1]; zero when every sample is zero."""
    samples = np.asarray(samples).ravel()
    if samples.size == 0:
        raise ValueError("coherence_factor needs at least one sample")
    power = float(np.sum(np.abs(samples) ** 2))
    if power == 0:
        return 0.0
    return float(abs(samples.sum()) ** 2 / (samples.size * power))


# -- uFORCES baseline ---------------------------------------------------------

def uforces_reconstruct(g: EncodedDataset, hq: np.ndarray, grid: ImagingGrid,
                        geometry: ArrayGeometry, cfg: BeamformConfig = BeamformConfig(),
                        elements: np.ndarray | None = None) -> ComplexImage:
    """Sparse-transmit baseline: decode ``Q`` events, drop the aggregate, beamform the rest.

    The events are assumed to follow :func:`readi_lab.hadamard.uforces_encoding`:
    decoded row 1 is the sum of every non-designated element and is discarded;
    rows ``2..Q`` are single designated elements.
    """
    q = check_hadamard(hq)
    n = geometry.n_elements
    if q >= n:
        raise DimensionError(f"uFORCES needs Q < N, got Q={q}, N={n}")
    if g.n_events != q:
        raise DimensionError(f"expected {q} events, got {g.n_events}")
    if elements is None:
        _, elements = uforces_encoding(n, q)
    decoded = _as_analytic(_decode(hq, g.samples))[1:]
    tx = geometry.element_positions[np.asarray(elements)]
    pixels = _beamform(decoded, tx, g.sample_rate, g.start_time, grid, geometry, cfg)
    return ComplexImage(grid, pixels, "uforces")


def envelope_log(image: ComplexImage | np.ndarray, dynamic_range_db: float = 60.0) -> np.ndarray:
    """8-bit log-compressed envelope: 0 dB -> 255, ``-dynamic_range_db`` and below -> 0."""
    if dynamic_range_db <= 0:
        raise ValueError("dynamic_range_db must be positive")
    pixels = image.pixels if isinstance(image, ComplexImage) else np.asarray(image)
    env = np.abs(pixels).astype(np.float64)
    peak = env.max() if env.size else 0.0
    if peak == 0:
        return np.zeros(env.shape, dtype=np.uint8)
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(env / peak)
    db = np.clip(db, -dynamic_range_db, 0)
    return np.round((db + dynamic_range_db) / dynamic_range_db * 255).astype(np.uint8)
