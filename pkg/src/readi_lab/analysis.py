"""Image-quality metrics and SVD clutter filtering."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .beamform import ComplexImage, ImagingGrid
from .datasets import DimensionError
from .motion import MotionField


class RoiError(ValueError):
    """Raised for empty, out-of-grid or overlapping regions of interest."""


@dataclass(frozen=True)
class RoiSpec:
    """Circular or rectangular region in metres.

    ``dimensions`` is ``(radius,)`` for a circle and ``(width, height)`` for a
    rectangle; ``center`` is ``(x, z)``.
    """

    shape: str
    center: tuple[float, float]
    dimensions: tuple[float, ...]
    role: str = "inside"

    def __post_init__(self):
        if self.shape not in ("circle", "rectangle"):
            raise RoiError(f"ROI shape must be 'circle' or 'rectangle', got {self.shape!r}")
        if self.role not in ("inside", "background"):
            raise RoiError(f"ROI role must be 'inside' or 'background', got {self.role!r}")
        need = 1 if self.shape == "circle" else 2
        if len(self.dimensions) != need or min(self.dimensions) <= 0:
            raise RoiError(f"{self.shape} ROI needs {need} positive dimension(s), got {self.dimensions}")

    @classmethod
    def from_dict(cls, d: dict) -> "RoiSpec":
        return cls(d["shape"], tuple(d["center"]), tuple(np.atleast_1d(d["dimensions"]).tolist()),
                   d.get("role", "inside"))

    def to_dict(self) -> dict:
        return {"shape": self.shape, "center": list(self.center),
                "dimensions": list(self.dimensions), "role": self.role}

    def _bounds(self) -> tuple[float, float, float, float]:
        cx, cz = self.center
        if self.shape == "circle":
            r = self.dimensions[0]
            return cx - r, cx + r, cz - r, cz + r
        w, h = self.dimensions
        return cx - w / 2, cx + w / 2, cz - h / 2, cz + h / 2

    def mask(self, grid: ImagingGrid) -> np.ndarray:
        """Boolean ``(nz, nx)`` mask; raises when the region leaves the grid or is empty."""
        x0, x1, z0, z1 = self._bounds()
        tol = 1e-9 + 0.5 * grid.pixel_size[0]
        if (x0 < grid.x[0] - tol or x1 > grid.x[-1] + tol
                or z0 < grid.z[0] - tol or z1 > grid.z[-1] + tol):
            raise RoiError(f"{self.role} ROI at {self.center} extends outside the imaging grid")
        xx, zz = np.meshgrid(grid.x, grid.z)
        cx, cz = self.center
        if self.shape == "circle":
            m = (xx - cx) ** 2 + (zz - cz) ** 2 <= self.dimensions[0] ** 2
        else:
            m = (np.abs(xx - cx) <= self.dimensions[0] / 2) & (np.abs(zz - cz) <= self.dimensions[1] / 2)
        if not m.any():
            raise RoiError(f"{self.role} ROI at {self.center} contains no pixels")
        return m


def _union(rois: RoiSpec | Iterable[RoiSpec], grid: ImagingGrid) -> np.ndarray:
    if isinstance(rois, RoiSpec):
        rois = [rois]
    rois = list(rois)
    if not rois:
        raise RoiError("at least one ROI is required")
    m = np.zeros(grid.shape, dtype=bool)
    for r in rois:
        m |= r.mask(grid)
    return m


def gcnr_samples(inside: np.ndarray, background: np.ndarray, n_bins: int = 100) -> float:
    """Histogram overlap estimate ``1 - sum_b min(p_in, p_out)`` on a shared support."""
    a = np.abs(np.asarray(inside, dtype=complex if np.iscomplexobj(inside) else float)).ravel()
    b = np.abs(np.asarray(background, dtype=complex if np.iscomplexobj(background) else float)).ravel()
    if a.size == 0 or b.size == 0:
        raise RoiError("gCNR needs nonempty inside and background samples")
    if n_bins < 2:
        raise ValueError(f"n_bins must be >= 2, got {n_bins}")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi <= lo:
        return 0.0
    edges = np.linspace(lo, hi, n_bins + 1)
    pa = np.histogram(a, edges)[0] / a.size
    pb = np.histogram(b, edges)[0] / b.size
    return float(np.clip(1.0 - np.minimum(pa, pb).sum(), 0.0, 1.0))


def gcnr(image: ComplexImage, inside: RoiSpec | Sequence[RoiSpec],
         background: RoiSpec | Sequence[RoiSpec], n_bins: int = 100) -> float:
    """Generalized contrast-to-noise ratio between two ROI sets of an envelope image.

    Returns a value in [0, 1]: 0 for identical amplitude distributions and 1
    when they do not overlap. ROIs must lie in the grid, be nonempty and not
    overlap each other.
    """
    m_in = _union(inside, image.grid)
    m_bg = _union(background, image.grid)
    if (m_in & m_bg).any():
        raise RoiError("inside and background ROIs overlap")
    env = np.abs(image.pixels)
    return gcnr_samples(env[m_in], env[m_bg], n_bins)


@dataclass(frozen=True)
class WidthResult:
    width: float
    grid_limited: bool


def _crossing(prof: np.ndarray, peak: int, level: float, step: int) -> tuple[float, bool]:
    i = peak
    while 0 <= i + step < prof.size:
        nxt = i + step
        if prof[nxt] < level:
            frac = (prof[i] - level) / (prof[i] - prof[nxt])
            return i + step * frac, False
        i = nxt
    return float(i), True


def psf_width(image: ComplexImage | np.ndarray, axis: str = "lateral", level_db: float = -6.0,
              pixel_size: float | None = None) -> WidthResult:
    """Width of the envelope profile through the global peak at ``level_db``.

    Crossings are located by linear interpolation between samples. When the
    profile does not fall below the level before the grid edge, the edge is
    used and ``grid_limited`` is set.
    """
    if isinstance(image, ComplexImage):
        env = np.abs(image.pixels)
        dz, dx = image.grid.pixel_size[1], image.grid.pixel_size[0]
    else:
        env = np.abs(np.asarray(image))
        if pixel_size is None:
            raise ValueError("pixel_size is required for bare arrays")
        dz = dx = pixel_size
    if axis not in ("lateral", "axial"):
        raise ValueError(f"axis must be 'lateral' or 'axial', got {axis!r}")
    if level_db >= 0:
        raise ValueError("level_db must be negative")
    iz, ix = np.unravel_index(np.argmax(env), env.shape)
    if axis == "lateral":
        prof, peak, step = env[iz, :], ix, dx
    else:
        prof, peak, step = env[:, ix], iz, dz
    if prof[peak] <= 0:
        raise ValueError("image has no peak")
    level = prof[peak] * 10 ** (level_db / 20)
    left, lim_l = _crossing(prof, peak, level, -1)
    right, lim_r = _crossing(prof, peak, level, +1)
    return WidthResult(float((right - left) * step), lim_l or lim_r)


@dataclass(frozen=True)
class RmseResult:
    rmse: float
    valid_fraction: float

    @property
    def defined(self) -> bool:
        return not math.isnan(self.rmse)


def motion_rmse(estimated: MotionField, truth: np.ndarray) -> RmseResult:
    """Vector RMSE in pixels over valid nodes, against a dense ``(nz, nx, 2)`` field.

    With no valid node the RMSE is NaN (``defined`` is False).
    """
    truth = np.asarray(truth, dtype=float)
    if truth.ndim != 3 or truth.shape[2] != 2:
        raise DimensionError(f"truth must have shape (nz, nx, 2), got {truth.shape}")
    if estimated.rows.max(initial=-1) >= truth.shape[0] or estimated.cols.max(initial=-1) >= truth.shape[1]:
        raise DimensionError("motion field nodes fall outside the truth field")
    frac = estimated.valid_fraction
    if not estimated.valid.any():
        return RmseResult(float("nan"), frac)
    t = truth[np.ix_(estimated.rows, estimated.cols)]
    err = (estimated.vectors - t)[estimated.valid]
    return RmseResult(float(np.sqrt(np.mean(np.sum(err ** 2, axis=-1)))), frac)


@dataclass
class ImageEnsemble:
    """Ordered frames on a common grid."""

    frames: list = field(default_factory=list)
    frame_interval: float = 1e-3

    def __post_init__(self):
        if not self.frames:
            raise DimensionError("an ensemble needs at least one frame")
        grid = self.frames[0].grid
        for f in self.frames[1:]:
            if f.grid != grid or f.pixels.shape != self.frames[0].pixels.shape:
                raise DimensionError("ensemble frames must share one grid")

    @property
    def grid(self) -> ImagingGrid:
        return self.frames[0].grid

    def __len__(self) -> int:
        return len(self.frames)

    def casorati(self) -> np.ndarray:
        """``(pixels, frames)`` matrix."""
        return np.stack([f.pixels.ravel() for f in self.frames], axis=1)

    @classmethod
    def from_casorati(cls, c: np.ndarray, grid: ImagingGrid, frame_interval: float,
                      provenance: str = "svd") -> "ImageEnsemble":
        return cls([ComplexImage(grid, c[:, k].reshape(grid.shape), provenance)
                    for k in range(c.shape[1])], frame_interval)

    def energy(self) -> float:
        return float(sum(np.sum(np.abs(f.pixels) ** 2) for f in self.frames))


def parse_keep(spec: str) -> set[int]:
    """Parse ``"1,30-80"`` into a set of 1-based indices."""
    out: set[int] = set()
    for part in spec.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            out.update(range(int(a), int(b) + 1))
        else:
            out.add(int(part))
    return out


def svd_projector(ensemble: ImageEnsemble, keep: Iterable[int]) -> np.ndarray:
    """Frame-space projector ``V_k V_k^H`` onto the singular components in ``keep`` (1-based).

    Right-multiplying the Casorati matrix by this matrix keeps exactly the
    listed components of its thin SVD.
    """
    if len(ensemble) < 2:
        raise DimensionError("SVD filtering needs at least two frames")
    c = ensemble.casorati()
    rank = min(c.shape)
    keep = sorted(set(int(k) for k in keep))
    bad = [k for k in keep if not 1 <= k <= rank]
    if bad:
        raise IndexError(f"singular-value indices {bad} outside 1..{rank}")
    _, _, vh = np.linalg.svd(c, full_matrices=False)
    vk = vh[np.asarray(keep, dtype=int) - 1]
    return vk.conj().T @ vk


def apply_projector(ensemble: ImageEnsemble, projector: np.ndarray) -> ImageEnsemble:
    """Mix frames with a ``(frames, frames)`` matrix; linear in the ensemble."""
    c = ensemble.casorati()
    if projector.shape != (c.shape[1], c.shape[1]):
        raise DimensionError(f"projector {projector.shape} does not match {c.shape[1]} frames")
    out = (c @ projector).astype(c.dtype, copy=False)
    return ImageEnsemble.from_casorati(out, ensemble.grid, ensemble.frame_interval)


def svd_filter(ensemble: ImageEnsemble, keep: Iterable[int]) -> ImageEnsemble:
    """Keep only the singular components listed in ``keep`` (1-based) of the Casorati matrix.

    Components are ordered by decreasing singular value; everything outside
    ``keep`` is zeroed before the frames are rebuilt.
    """
    return apply_projector(ensemble, svd_projector(ensemble, keep))
