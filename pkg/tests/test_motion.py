import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from readi_lab import motion
from readi_lab.beamform import ComplexImage, ImagingGrid
from readi_lab.datasets import DimensionError
from readi_lab.experiments import fourier_shift, speckle_texture
from readi_lab.motion import MotionConfig, MotionField

CFG = MotionConfig(grid_spacing=16, ref_patch=32, search_margin=8,
                   abs_peak_threshold=0.3, rel_peak_threshold=101, min_curvature=0.01)


def ncc_oracle(ref, search):
    h, w = ref.shape
    out = np.zeros((search.shape[0] - h + 1, search.shape[1] - w + 1))
    for r in range(out.shape[0]):
        for c in range(out.shape[1]):
            win = search[r:r + h, c:c + w]
            if win.std() == 0 or ref.std() == 0:
                continue
            out[r, c] = np.corrcoef(ref.ravel(), win.ravel())[0, 1]
    return out


def as_image(pixels):
    grid = ImagingGrid((0.0, (pixels.shape[1] - 1) * 1e-4), (1e-3, 1e-3 + (pixels.shape[0] - 1) * 1e-4),
                       (1e-4, 1e-4))
    return ComplexImage(grid, pixels.astype(complex))


def test_ncc_matches_corrcoef(rng):
    search = rng.standard_normal((20, 24))
    ref = search[5:13, 7:15] + 0.3 * rng.standard_normal((8, 8))
    np.testing.assert_allclose(motion.ncc_surface(ref, search), ncc_oracle(ref, search), atol=1e-10)


@given(hnp.arrays(np.float64, (6, 6), elements=st.floats(-10, 10, allow_nan=False)),
       hnp.arrays(np.float64, (10, 11), elements=st.floats(-10, 10, allow_nan=False)))
def test_ncc_bounds(ref, search):
    s = motion.ncc_surface(ref, search)
    assert s.shape == (5, 6)
    assert np.all(np.isfinite(s)) and np.all(np.abs(s) <= 1.0)


def test_ncc_self_match_and_flat_patches(rng):
    search = rng.standard_normal((16, 16))
    s = motion.ncc_surface(search[4:10, 3:9], search)
    assert s[4, 3] == pytest.approx(1.0)
    assert np.unravel_index(np.argmax(s), s.shape) == (4, 3)
    assert not motion.ncc_surface(np.ones((4, 4)), search).any()
    with pytest.raises(DimensionError):
        motion.ncc_surface(np.ones((5, 5)), np.ones((4, 8)))


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_subpixel_peak_recovers_paraboloid_vertex(x0, y0):
    yy, xx = np.mgrid[-4:5, -4:5].astype(float)
    surface = 0.9 - 0.05 * (xx - x0) ** 2 - 0.03 * (yy - y0) ** 2 - 0.01 * (xx - x0) * (yy - y0)
    dx, dy, value, k = motion.subpixel_peak(surface, (4, 4))
    assert dx == pytest.approx(x0, abs=1e-9) and dy == pytest.approx(y0, abs=1e-9)
    assert value == pytest.approx(0.9, abs=1e-9)
    expected_k = np.linalg.eigvalsh(np.array([[0.1, 0.01], [0.01, 0.06]])).min()
    assert k == pytest.approx(expected_k, rel=1e-9)


def test_subpixel_peak_clamps_and_rejects_saddles():
    yy, xx = np.mgrid[-4:5, -4:5].astype(float)
    far = -0.05 * (xx - 3) ** 2 - 0.05 * yy ** 2
    dx, dy, _, _ = motion.subpixel_peak(far, (4, 4))
    assert dx == 1.0 and dy == pytest.approx(0.0, abs=1e-12)
    dx, dy, _, k = motion.subpixel_peak(xx ** 2 - yy ** 2, (4, 4))
    assert k <= 0 and dx == 0 and dy == 0


@pytest.mark.parametrize("shift", [(3, -2), (-5, 4), (0, 6)])
def test_estimate_field_recovers_integer_shift(shift):
    dx, dy = shift
    tex = speckle_texture((96, 96), seed=2)
    moved = fourier_shift(tex, dx, dy)
    f = motion.estimate_field(tex, moved, CFG)
    interior = f.peak > 0
    assert interior.any()
    assert np.all(f.integer[interior] == (dx, dy))
    assert f.valid.any()
    np.testing.assert_allclose(f.vectors[f.valid], np.broadcast_to((dx, dy), f.vectors[f.valid].shape), atol=0.25)


def test_identical_images_yield_no_valid_nodes():
    tex = speckle_texture((96, 96), seed=4)
    f = motion.estimate_field(tex, tex, CFG)
    # the peak equals the zero-offset correlation, so the relative test fails
    assert not f.valid.any()


@given(st.floats(0.0, 0.9), st.floats(0.0, 0.9), st.floats(100, 130), st.floats(100, 130),
       st.floats(0.0, 0.2), st.floats(0.0, 0.2))
def test_rejection_is_monotone(a1, a2, r1, r2, k1, k2):
    tex = _TEX
    lo = MotionConfig(16, 32, 8, min(a1, a2), min(r1, r2), min(k1, k2))
    hi = MotionConfig(16, 32, 8, max(a1, a2), max(r1, r2), max(k1, k2))
    f_lo = motion.estimate_field(tex[0], tex[1], lo)
    f_hi = motion.estimate_field(tex[0], tex[1], hi)
    assert not np.any(f_hi.valid & ~f_lo.valid)


_base = speckle_texture((64, 64), seed=9)
_TEX = (_base, fourier_shift(_base, 1.4, -2.3) + 0.2 * speckle_texture((64, 64), seed=10))


def test_densify_uniform_and_infill():
    rows, cols = np.array([5, 15, 25]), np.array([5, 15])
    vec = np.zeros((3, 2, 2))
    vec[..., 0], vec[..., 1] = 2.0, -1.0
    valid = np.ones((3, 2), bool)
    f = MotionField(rows, cols, vec, valid, np.ones((3, 2)), np.ones((3, 2)))
    dense = motion.densify_field(f, (30, 20))
    np.testing.assert_allclose(dense[..., 0], 2.0)
    np.testing.assert_allclose(dense[..., 1], -1.0)
    # an invalid node takes the vector of its nearest valid neighbour
    vec2 = vec.copy()
    vec2[0, 0] = (50, 50)
    valid2 = valid.copy()
    valid2[0, 0] = False
    dense2 = motion.densify_field(MotionField(rows, cols, vec2, valid2, valid2 * 1.0, valid2 * 1.0), (30, 20))
    np.testing.assert_allclose(dense2, dense)
    none = MotionField(rows, cols, vec, np.zeros((3, 2), bool), np.zeros((3, 2)), np.zeros((3, 2)))
    assert not motion.densify_field(none, (30, 20)).any()


def test_densify_bilinear_between_nodes():
    rows, cols = np.array([0, 10]), np.array([0, 10])
    vec = np.zeros((2, 2, 2))
    vec[0, 1, 0] = 10.0
    vec[1, 1, 0] = 10.0
    f = MotionField(rows, cols, vec, np.ones((2, 2), bool), np.ones((2, 2)), np.ones((2, 2)))
    dense = motion.densify_field(f, (11, 11))
    np.testing.assert_allclose(dense[:, :, 0], np.tile(np.arange(11.0), (11, 1)))


def test_warp_identities(rng):
    pix = rng.standard_normal((20, 30)) + 1j * rng.standard_normal((20, 30))
    img = as_image(pix)
    np.testing.assert_allclose(motion.warp_image(img, np.zeros((20, 30, 2))).pixels, pix)
    dense = np.zeros((20, 30, 2))
    dense[..., 0] = 3.0
    dense[..., 1] = -2.0
    out = motion.warp_image(img, dense).pixels
    # out[p] = image[p + v]
    np.testing.assert_allclose(out[2:, :-3], pix[:-2, 3:])
    assert not out[:2].any() and not out[:, -3:].any()
    with pytest.raises(DimensionError):
        motion.warp_image(img, np.zeros((5, 5, 2)))


def test_emc2_undoes_known_shift():
    tex = speckle_texture((96, 96), seed=6)
    ref = as_image(tex)
    moved = as_image(fourier_shift(tex, 4.0, -3.0))
    out = motion.emc2_compensate([ref, moved], CFG)
    inner = (slice(16, -16), slice(16, -16))
    np.testing.assert_allclose(np.abs(out.pixels[inner]), 2 * np.abs(tex[inner]), rtol=0.05, atol=0.05 * np.abs(tex).max())
    assert motion.emc2_compensate([ref]) is ref
    with pytest.raises(DimensionError):
        motion.emc2_compensate([ref, moved], MotionConfig(reference_index=2))


def test_field_csv(tmp_path):
    tex = speckle_texture((64, 64), seed=1)
    f = motion.estimate_field(tex, fourier_shift(tex, 2, 1), CFG)
    f.to_csv(tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "x,y,dx,dy,valid,peak,curvature"
    assert len(lines) == 1 + f.rows.size * f.cols.size


def test_default_config_sits_in_standard_ranges():
    assert MotionConfig().in_standard_ranges()
    with pytest.raises(ValueError):
        MotionConfig(ref_patch=2)
