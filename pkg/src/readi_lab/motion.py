"""Block-matching motion estimation and motion-compensated compounding.

Motion between low-resolution images is measured by normalized
cross-correlation on envelope images over a coarse grid of nodes, refined
to sub-pixel precision with a least-squares paraboloid, screened by three
rejection tests, interpolated to a dense per-pixel field and used to
backward-warp the complex target image onto the reference.

Vectors are ``(dx, dy)`` in pixels: ``dx`` along the lateral (column) axis,
``dy`` along the axial (row) axis. A vector ``v`` at reference position ``p``
means the reference content at ``p`` appears at ``p + v`` in the target.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.signal import fftconvolve

from .beamform import ComplexImage, compound
from .datasets import DimensionError


@dataclass(frozen=True)
class MotionConfig:
    """Block-matching parameters; the defaults sit mid-range of the usual tuning ranges."""

    grid_spacing: int = 10
    ref_patch: int = 40
    search_margin: int = 36
    abs_peak_threshold: float = 0.255
    rel_peak_threshold: float = 110.5
    min_curvature: float = 0.0525
    reference_index: int = 0

    def __post_init__(self):
        if self.grid_spacing < 1 or self.ref_patch < 5 or self.search_margin < 1:
            raise ValueError("grid_spacing >= 1, ref_patch >= 5 and search_margin >= 1 are required")

    def in_standard_ranges(self) -> bool:
        return (4 <= self.grid_spacing <= 16 and 16 <= self.ref_patch <= 64
                and 8 <= self.search_margin <= 64 and 0.01 <= self.abs_peak_threshold <= 0.5
                and 101 <= self.rel_peak_threshold <= 120 and 0.005 <= self.min_curvature <= 0.1)


@dataclass
class MotionField:
    """Sparse displacement estimates on a grid of reference-image nodes."""

    rows: np.ndarray
    cols: np.ndarray
    vectors: np.ndarray
    valid: np.ndarray
    peak: np.ndarray
    curvature: np.ndarray
    integer: np.ndarray | None = None

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean()) if self.valid.size else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "dx", "dy", "valid", "peak", "curvature"])
            for a, r in enumerate(self.rows):
                for b, c in enumerate(self.cols):
                    dx, dy = self.vectors[a, b]
                    w.writerow([int(c), int(r), f"{dx:.6f}", f"{dy:.6f}", int(self.valid[a, b]),
                                f"{self.peak[a, b]:.6f}", f"{self.curvature[a, b]:.6f}"])


def _window_sums(a: np.ndarray, h: int, w: int) -> np.ndarray:
    c = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    c[1:, 1:] = np.cumsum(np.cumsum(a, axis=0), axis=1)
    return c[h:, w:] - c[:-h, w:] - c[h:, :-w] + c[:-h, :-w]


def ncc_surface(ref: np.ndarray, search: np.ndarray) -> np.ndarray:
    """Normalized cross-correlation of ``ref`` at every placement inside ``search``.

    Returns an array of shape ``search.shape - ref.shape + 1`` with values in
    [-1, 1]; entry ``(r, c)`` compares ``ref`` with ``search[r:r+h, c:c+w]``.
    Placements where either patch has zero variance score 0.
    """
    ref = np.asarray(ref, dtype=np.float64)
    search = np.asarray(search, dtype=np.float64)
    h, w = ref.shape
    if search.shape[0] < h or search.shape[1] < w:
        raise DimensionError(f"search region {search.shape} is smaller than the patch {ref.shape}")
    n = h * w
    ref0 = ref - ref.mean()
    ref_norm = np.sqrt(np.sum(ref0 ** 2))
    out_shape = (search.shape[0] - h + 1, search.shape[1] - w + 1)
    scale = max(float(np.abs(search).max()), float(np.abs(ref).max()), 1e-300)
    if ref_norm <= 1e-9 * scale * np.sqrt(n):
        return np.zeros(out_shape)
    s0 = search - search.mean()
    num = fftconvolve(s0, ref0[::-1, ::-1], mode="valid")
    local_sum = _window_sums(s0, h, w)
    local_sq = _window_sums(s0 ** 2, h, w)
    var = np.maximum(local_sq - local_sum ** 2 / n, 0.0)
    den = ref_norm * np.sqrt(var)
    flat = var <= (1e-9 * scale) ** 2 * n
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(flat, 0.0, num / np.where(flat, 1.0, den))
    return np.clip(out, -1.0, 1.0)


# design matrix of z = a + b x + c y + d x^2 + e x y + f y^2 on the 5x5 window
_OFF = np.arange(-2, 3)


def subpixel_peak(surface: np.ndarray, peak: tuple[int, int]) -> tuple[float, float, float, float]:
    """Least-squares paraboloid over the 5x5 neighbourhood of an integer peak.

    Returns ``(dx, dy, value, curvature)``: the vertex offset from ``peak``
    (columns, rows; each clamped to +-1 px), the fitted value there, and the
    smallest eigenvalue of the negated Hessian, which is positive for a
    proper maximum. Non-concave fits report curvature <= 0 and zero offset.
    """
    r0, c0 = peak
    rows = _OFF + r0
    cols = _OFF + c0
    yy, xx = np.meshgrid(_OFF, _OFF, indexing="ij")
    inside = ((rows >= 0) & (rows < surface.shape[0]))[:, None] & ((cols >= 0) & (cols < surface.shape[1]))[None, :]
    x = xx[inside].astype(float)
    y = yy[inside].astype(float)
    zv = surface[np.clip(rows, 0, surface.shape[0] - 1)][:, np.clip(cols, 0, surface.shape[1] - 1)][inside]
    design = np.column_stack([np.ones_like(x), x, y, x * x, x * y, y * y])
    if x.size < 6 or np.linalg.matrix_rank(design) < 6:
        return 0.0, 0.0, float(surface[r0, c0]), 0.0
    coef, *_ = np.linalg.lstsq(design, zv, rcond=None)
    a, b, c, d, e, f = coef
    hess = np.array([[2 * d, e], [e, 2 * f]])
    curvature = float(np.linalg.eigvalsh(-hess).min())
    if curvature <= 0:
        return 0.0, 0.0, float(surface[r0, c0]), curvature
    dx, dy = np.linalg.solve(hess, [-b, -c])
    dx = float(np.clip(dx, -1.0, 1.0))
    dy = float(np.clip(dy, -1.0, 1.0))
    value = float(a + b * dx + c * dy + d * dx * dx + e * dx * dy + f * dy * dy)
    return dx, dy, value, curvature


def _pixels(image) -> np.ndarray:
    return image.pixels if isinstance(image, ComplexImage) else np.asarray(image)


def node_positions(n: int, spacing: int) -> np.ndarray:
    return np.arange(spacing // 2, n, spacing)


def estimate_field(reference, target, cfg: MotionConfig = MotionConfig()) -> MotionField:
    """Block-match envelope images of ``reference`` and ``target`` on a node grid.

    A node is valid when its correlation peak reaches the absolute threshold,
    beats the zero-displacement correlation by the relative threshold (in
    percent), and the fitted paraboloid is curved at least ``min_curvature``.
    Nodes whose reference patch leaves the image are invalid; search regions
    are clipped to the image.
    """
    ref = np.abs(_pixels(reference)).astype(np.float64)
    tgt = np.abs(_pixels(target)).astype(np.float64)
    if ref.shape != tgt.shape:
        raise DimensionError(f"reference {ref.shape} and target {tgt.shape} differ in shape")
    nz, nx = ref.shape
    p, m = cfg.ref_patch, cfg.search_margin
    rows = node_positions(nz, cfg.grid_spacing)
    cols = node_positions(nx, cfg.grid_spacing)
    shape = (rows.size, cols.size)
    vectors = np.zeros(shape + (2,))
    valid = np.zeros(shape, dtype=bool)
    peak = np.zeros(shape)
    curv = np.zeros(shape)
    integer = np.zeros(shape + (2,), dtype=int)
    for a, r in enumerate(rows):
        top = r - p // 2
        if top < 0 or top + p > nz:
            continue
        for b, c in enumerate(cols):
            left = c - p // 2
            if left < 0 or left + p > nx:
                continue
            s_top, s_left = max(top - m, 0), max(left - m, 0)
            s_bot, s_right = min(top + p + m, nz), min(left + p + m, nx)
            surface = ncc_surface(ref[top:top + p, left:left + p], tgt[s_top:s_bot, s_left:s_right])
            zero = (top - s_top, left - s_left)
            ir, ic = np.unravel_index(np.argmax(surface), surface.shape)
            dx, dy, _, k = subpixel_peak(surface, (ir, ic))
            best = surface[ir, ic]
            peak[a, b] = best
            curv[a, b] = k
            integer[a, b] = (ic - zero[1], ir - zero[0])
            ok = (best >= cfg.abs_peak_threshold
                  and best >= cfg.rel_peak_threshold / 100.0 * surface[zero]
                  and k >= cfg.min_curvature)
            if ok:
                valid[a, b] = True
                vectors[a, b] = (ic - zero[1] + dx, ir - zero[0] + dy)
    return MotionField(rows, cols, vectors, valid, peak, curv, integer)


def densify_field(field: MotionField, shape: tuple[int, int]) -> np.ndarray:
    """Per-pixel ``(dx, dy)`` field of shape ``shape + (2,)``.

    Invalid nodes take the vector of the nearest valid node, then the node
    grid is bilinearly interpolated (held constant beyond the outer nodes).
    With no valid node the field is zero.
    """
    dense = np.zeros(tuple(shape) + (2,))
    if not field.valid.any():
        return dense
    filled = field.vectors
    if not field.valid.all():
        _, (ia, ib) = ndimage.distance_transform_edt(~field.valid, return_indices=True)
        filled = field.vectors[ia, ib]
    zz = np.arange(shape[0])
    xx = np.arange(shape[1])
    for comp in range(2):
        along_x = np.array([np.interp(xx, field.cols, row) for row in filled[:, :, comp]])
        dense[:, :, comp] = np.array([np.interp(zz, field.rows, col) for col in along_x.T]).T
    return dense


def warp_image(image: ComplexImage, dense: np.ndarray) -> ComplexImage:
    """Backward warp: ``out[p] = image[p + v(p)]`` with bilinear sampling, zero outside."""
    pixels = image.pixels
    if dense.shape[:2] != pixels.shape:
        raise DimensionError(f"field {dense.shape[:2]} does not match image {pixels.shape}")
    zz, xx = np.meshgrid(np.arange(pixels.shape[0]), np.arange(pixels.shape[1]), indexing="ij")
    coords = np.array([zz + dense[:, :, 1], xx + dense[:, :, 0]])
    re = ndimage.map_coordinates(pixels.real, coords, order=1, mode="constant", cval=0.0)
    im = ndimage.map_coordinates(pixels.imag, coords, order=1, mode="constant", cval=0.0)
    out = (re + 1j * im).astype(pixels.dtype, copy=False)
    return ComplexImage(image.grid, out, "warped")


def estimate_fields(low_res: Sequence[ComplexImage], cfg: MotionConfig = MotionConfig()) -> list[MotionField | None]:
    """Field of every image relative to the reference (``None`` at the reference)."""
    ref = low_res[cfg.reference_index]
    return [None if i == cfg.reference_index else estimate_field(ref, im, cfg)
            for i, im in enumerate(low_res)]


def emc2_compensate(low_res: Sequence[ComplexImage], cfg: MotionConfig = MotionConfig(),
                    fields: list[MotionField | None] | None = None) -> ComplexImage:
    """Warp every low-resolution image onto the reference and compound coherently."""
    low_res = list(low_res)
    if not low_res:
        raise ValueError("emc2_compensate needs at least one image")
    if len(low_res) == 1:
        return low_res[0]
    if not 0 <= cfg.reference_index < len(low_res):
        raise DimensionError(f"reference_index {cfg.reference_index} outside 0..{len(low_res) - 1}")
    if fields is None:
        fields = estimate_fields(low_res, cfg)
    aligned = []
    for im, field in zip(low_res, fields):
        if field is None:
            aligned.append(im)
        else:
            aligned.append(warp_image(im, densify_field(field, im.pixels.shape)))
    return compound(aligned, provenance="emc2")
