"""PNG figures written next to the CLI's CSV and PGM outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .beamform import ComplexImage  # noqa: E402

STYLE = {
    "font.size": 8,
    "axes.labelsize": 8,
    "axes.titlesize": 9,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "legend.fontsize": 7,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}


def _db(image: ComplexImage, ref: float | None = None) -> np.ndarray:
    env = np.abs(image.pixels)
    ref = env.max() if ref is None else ref
    with np.errstate(divide="ignore"):
        return 20 * np.log10(np.maximum(env, 1e-300) / max(ref, 1e-300))


def _extent_mm(image: ComplexImage) -> list[float]:
    x, z = image.grid.x * 1e3, image.grid.z * 1e3
    return [x[0], x[-1], z[-1], z[0]]


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def bmode(image: ComplexImage, path, dynamic_range_db: float = 60.0, title: str = "") -> Path:
    """Log-compressed envelope with millimetre axes."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 3.0))
        im = ax.imshow(_db(image), cmap="gray", vmin=-dynamic_range_db, vmax=0,
                       extent=_extent_mm(image), aspect="equal")
        ax.set_xlabel("lateral [mm]")
        ax.set_ylabel("depth [mm]")
        if title:
            ax.set_title(title)
        fig.colorbar(im, ax=ax, label="dB", shrink=0.8)
        return _save(fig, path)


def bmode_panel(images: Sequence[ComplexImage], path, titles: Sequence[str] | None = None,
                dynamic_range_db: float = 60.0, common_scale: bool = True) -> Path:
    """Several images side by side, optionally normalised to a shared maximum."""
    n = len(images)
    cols = min(n, 4)
    rows = int(np.ceil(n / cols))
    ref = max(float(np.abs(im.pixels).max()) for im in images) if common_scale else None
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(rows, cols, figsize=(2.2 * cols, 2.1 * rows), squeeze=False)
        for k, ax in enumerate(axes.flat):
            if k >= n:
                ax.axis("off")
                continue
            ax.imshow(_db(images[k], ref), cmap="gray", vmin=-dynamic_range_db, vmax=0,
                      extent=_extent_mm(images[k]))
            ax.set_title(titles[k] if titles else f"{k + 1}")
            ax.tick_params(labelbottom=k >= n - cols, labelleft=k % cols == 0)
        return _save(fig, path)


def motion_quiver(field, image: ComplexImage, path, title: str = "") -> Path:
    """Node vectors over the reference image; rejected nodes drawn as crosses."""
    dx_mm, dz_mm = image.grid.pixel_size[0] * 1e3, image.grid.pixel_size[1] * 1e3
    xx, zz = np.meshgrid(image.grid.x[field.cols] * 1e3, image.grid.z[field.rows] * 1e3)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 3.0))
        ax.imshow(_db(image), cmap="gray", vmin=-50, vmax=0, extent=_extent_mm(image))
        v = field.valid
        ax.quiver(xx[v], zz[v], field.vectors[..., 0][v] * dx_mm, field.vectors[..., 1][v] * dz_mm,
                  color="tab:orange", angles="xy", scale_units="xy", scale=1, width=0.006)
        ax.plot(xx[~v], zz[~v], "x", color="tab:red", ms=2.5, mew=0.6)
        ax.set_xlabel("lateral [mm]")
        ax.set_ylabel("depth [mm]")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def lateral_profiles(images: Mapping[str, ComplexImage], path) -> Path:
    """Envelope through each image's peak row, normalised to its own maximum."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 2.4))
        for label, im in images.items():
            env = np.abs(im.pixels)
            iz = np.unravel_index(np.argmax(env), env.shape)[0]
            prof = env[iz] / env.max()
            ax.plot(im.grid.x * 1e3, 20 * np.log10(np.maximum(prof, 1e-6)), lw=1, label=label)
        ax.axhline(-6, color="0.5", lw=0.6, ls="--")
        ax.set_ylim(-40, 1)
        ax.set_xlabel("lateral [mm]")
        ax.set_ylabel("normalised envelope [dB]")
        ax.legend(frameon=False)
        return _save(fig, path)


def singular_values(values: np.ndarray, path, keep: Sequence[int] = ()) -> Path:
    """Normalised singular-value spectrum with the kept indices highlighted."""
    values = np.asarray(values, dtype=float)
    idx = np.arange(1, values.size + 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 2.2))
        ax.semilogy(idx, values / values.max(), ".-", color="0.3", lw=0.8, ms=3)
        kept = np.isin(idx, list(keep))
        ax.semilogy(idx[kept], values[kept] / values.max(), "o", color="tab:blue", ms=3, mfc="none")
        ax.set_xlabel("singular value index")
        ax.set_ylabel("normalised magnitude")
        return _save(fig, path)


def criteria_table(rows: Sequence[tuple[str, bool]], path) -> Path:
    """Pass/fail chart for the reference experiments."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 0.3 * len(rows) + 0.4))
        for k, (name, ok) in enumerate(rows):
            ax.barh(k, 1, color="tab:green" if ok else "tab:red")
            ax.text(0.02, k, name, va="center", color="white", fontsize=7)
        ax.set_yticks([])
        ax.set_xticks([])
        ax.invert_yaxis()
        return _save(fig, path)
