"""Reference experiments with pass/fail thresholds.

Each ``criterion_*`` function builds its own synthetic data, runs the
library end to end and returns a :class:`CriterionResult`. They back both
``readi-lab demo`` and the acceptance tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import ndimage, signal

from . import analysis, beamform, container, hadamard, motion, simulate
from .analysis import ImageEnsemble, RoiSpec
from .beamform import BeamformConfig, ComplexImage, ImagingGrid
from .hadamard import GroupingScheme, sylvester
from .datasets import EncodedDataset

C = 1540.0
F0 = 4.3e6
PRF = 1000.0


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    checks: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [k for k, ok in self.checks.items() if not ok]
        tail = f" (failed: {', '.join(failed)})" if failed else ""
        return f"[{status}] criterion {self.number}: {self.name} in {self.elapsed:.1f} s{tail}"


def _finish(number, name, checks, values, t0) -> CriterionResult:
    return CriterionResult(number, name, all(checks.values()), checks, values, time.perf_counter() - t0)


def _rel_l2(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def standard_probe(n_elements: int, f0: float = F0):
    """Lambda-pitch array and 2-cycle pulse."""
    return simulate.ArrayGeometry(n_elements, C / f0), simulate.PulseDefinition(f0)


# -- 1 ---------------------------------------------------------------------------

def criterion_1(seed: int = 1, factorizations=((2, 32), (4, 16), (8, 8)), n_pixels: int = 256,
                budget: float = 60.0) -> CriterionResult:
    """Sum of low-resolution images equals the full reconstruction on speckle."""
    t0 = time.perf_counter()
    n = 64
    geo, pulse = standard_probe(n)
    grid = ImagingGrid.centered(n_pixels, n_pixels, 0.05e-3, 15e-3)
    scene = simulate.speckle_scene((grid.x[0] - 1e-3, grid.x[-1] + 1e-3),
                                   (grid.z[0] - 1e-3, grid.z[-1] + 1e-3), 4.0, rng_seed=seed)
    h = sylvester(n)
    enc = simulate.simulate_forces(scene, geo, pulse, h)
    cfg = BeamformConfig(cf_weighting=False)
    checks, values = {}, {}
    for label, dtype, tol in (("f32", np.float32, 1e-5), ("f64", np.float64, 1e-10)):
        g = beamform.EncodedDataset(enc.samples.astype(dtype), enc.sample_rate, enc.start_time)
        full = beamform.forces_reconstruct(g, h, grid, geo, cfg).pixels
        for s, q in factorizations:
            low = beamform.readi_reconstruct(g, GroupingScheme(n, s, q), grid, geo, cfg)
            err = _rel_l2(beamform.compound(low).pixels, full)
            values[f"rel_l2_{label}_S{s}_Q{q}"] = err
            checks[f"{label} S={s} <= {tol:g}"] = err <= tol
    values["runtime_s"] = time.perf_counter() - t0
    checks[f"runtime <= {budget:g} s"] = values["runtime_s"] <= budget
    return _finish(1, "READI sum equals FORCES", checks, values, t0)


# -- 2 ---------------------------------------------------------------------------

def readi_term_matrix(n_groups: int, group_size: int, s: int) -> np.ndarray:
    """Exact term matrix of low-resolution image ``s`` from the library's numeric path.

    Multistatic signal ``i`` is a unit delta at time index ``i``, so the
    signals are orthogonal. Entry ``[k, i]`` of the result is the weight with
    which signal ``s_i`` is beamformed using the delay of element ``k``.
    All arithmetic involves only +-1 and powers of two, so the floats are
    exact and are returned as :class:`fractions.Fraction`.
    """
    n = n_groups * group_size
    h = sylvester(n)
    deltas = np.eye(n)[:, None, :]                         # s[i, rx, t] = delta(t - i)
    g = beamform.encode_forces(beamform.MultistaticDataset(deltas, 1.0), h).samples
    group = g[(s - 1) * group_size: s * group_size]
    d = beamform.partial_decode(group, sylvester(group_size), s, analytic=False).signals
    stacked = beamform._stack_for_group(d, s, sylvester(n_groups))[:, 0, :]
    return np.vectorize(Fraction)(stacked)


def readi_term_matrix_rational(n_groups: int, group_size: int, s: int) -> np.ndarray:
    """The same term matrix derived in rational arithmetic from the Kronecker factors."""
    n = n_groups * group_size
    hs_scale, hs_t = hadamard.inverse_scale(sylvester(n_groups))
    hq_scale, hq_t = hadamard.inverse_scale(sylvester(group_size))
    out = np.full((n, n), Fraction(0), dtype=object)
    for l in range(1, n_groups + 1):
        for v in range(1, group_size + 1):
            k = hadamard.index_join(l, v, group_size)
            for i in range(1, n + 1):
                # d'_v = sum_q Hq_inv[v, q] g_q, with g_q = sum_i h_N[(q,s), i] s_i
                coef = sum(hq_scale * int(hq_t[v - 1, q - 1])
                           * hadamard.kron_entry(n_groups, group_size, i, hadamard.index_join(s, q, group_size))
                           for q in range(1, group_size + 1))
                out[k - 1, i - 1] = hs_scale * int(hs_t[l - 1, s - 1]) * coef
    return out


def criterion_2() -> CriterionResult:
    """N=4, S=Q=2 cross-term bookkeeping."""
    t0 = time.perf_counter()
    half = Fraction(1, 2)
    # rows: delay element k, columns: signal i; in-focus on the diagonal
    r1 = np.array([[1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1]], dtype=object) * half
    r2 = np.array([[1, 0, -1, 0], [0, 1, 0, -1], [-1, 0, 1, 0], [0, -1, 0, 1]], dtype=object) * half
    t1, t2 = readi_term_matrix(2, 2, 1), readi_term_matrix(2, 2, 2)
    q1, q2 = readi_term_matrix_rational(2, 2, 1), readi_term_matrix_rational(2, 2, 2)
    eye = np.eye(4, dtype=int).astype(object)
    checks = {
        "group 1 terms": bool(np.all(t1 == r1)) and bool(np.all(q1 == r1)),
        "group 2 terms": bool(np.all(t2 == r2)) and bool(np.all(q2 == r2)),
        "cross terms cancel": bool(np.all(t1 + t2 == eye)) and bool(np.all(q1 + q2 == eye)),
    }
    return _finish(2, "N=4 cross-term structure", checks, {}, t0)


# -- 3 ---------------------------------------------------------------------------

def criterion_3(max_rank: int = 256, max_kron: int = 128) -> CriterionResult:
    t0 = time.perf_counter()
    ortho = True
    n = 1
    while n <= max_rank:
        h = sylvester(n)
        ortho &= bool(np.array_equal(h @ h.T, n * np.eye(n, dtype=np.int64)))
        n *= 2
    kron = True
    n = 1
    while n <= max_kron:
        h = sylvester(n)
        s = 1
        while s <= n:
            q = n // s
            hs, hq = sylvester(s), sylvester(q)
            i = np.arange(1, n + 1)
            l, v = (i - 1) // q + 1, (i - 1) % q + 1
            # build h[e, i] = hs[s_e, l_i] * hq[q_e, v_i] over every (e, i)
            built = hs[(l - 1)[:, None], (l - 1)[None, :]] * hq[(v - 1)[:, None], (v - 1)[None, :]]
            kron &= bool(np.array_equal(built, h))
            s *= 2
        n *= 2
    spot = True
    n = 1
    while n <= max_kron:
        h = sylvester(n)
        s = 1
        while s <= n:
            spot &= all(hadamard.kron_entry(s, n // s, i, e) == h[e - 1, i - 1]
                        for i in range(1, n + 1) for e in range(1, n + 1))
            s *= 2
        n *= 2
    checks = {f"H H^T = nI for n <= {max_rank}": ortho,
              f"Kronecker entries for N <= {max_kron}": kron and spot}
    return _finish(3, "Hadamard identities", checks, {}, t0)


# -- 4 ---------------------------------------------------------------------------

MOTION_N = 64
MOTION_S = 8
MOTION_V = 0.15
MOTION_PIXEL = 0.1e-3
MOTION_CFG = motion.MotionConfig(reference_index=3, search_margin=64, min_curvature=0.005)


def _reference_offset(cfg: motion.MotionConfig, group_size: int, v: float, prf: float) -> float:
    # lateral distance travelled from event 1 to the middle of the reference group
    return v * (cfg.reference_index * group_size + (group_size - 1) / 2) / prf


def _stepwise_forces(scene, geo, pulse, h, scheme: GroupingScheme) -> EncodedDataset:
    """Encoded ensemble with the scene frozen during each group at its middle event."""
    q = scheme.group_size
    n_t = simulate.record_length(scene, geo, pulse)
    parts = []
    for g in range(scheme.n_groups):
        middle = g * q + (q + 1) / 2
        frozen = simulate.ScattererScene(scene.positions + scene.velocities * ((middle - 1) / scene.prf),
                                         None, scene.reflectivity, scene.speed_of_sound, scene.prf)
        parts.append(simulate.simulate_encoded(frozen, geo, pulse, h[g * q:(g + 1) * q], n_t).samples)
    return EncodedDataset(np.concatenate(parts), pulse.sample_rate)


def motion_point_experiment(cfg: motion.MotionConfig = MOTION_CFG, stepwise: bool = False) -> dict:
    """Point target translating laterally at 0.15 m/s.

    With ``stepwise`` the target holds still during each group and jumps
    between groups, which removes the blur inside each low-resolution image
    and isolates what inter-group compensation can achieve.
    """
    n, s = MOTION_N, MOTION_S
    geo, pulse = standard_probe(n)
    h = sylvester(n)
    scheme = GroupingScheme.from_groups(n, s)
    z0 = 15e-3
    grid = ImagingGrid((-9e-3, 9e-3), (z0 - 3e-3, z0 + 3e-3), (MOTION_PIXEL, MOTION_PIXEL))
    bc = BeamformConfig()
    static = simulate.ScattererScene([[0.0, z0]], prf=PRF)
    static_img = beamform.forces_reconstruct(simulate.simulate_forces(static, geo, pulse, h), h, grid, geo, bc)
    x0 = -_reference_offset(cfg, scheme.group_size, MOTION_V, PRF)
    moving = simulate.ScattererScene([[x0, z0]], [[MOTION_V, 0.0]], prf=PRF)
    if stepwise:
        enc = _stepwise_forces(moving, geo, pulse, h, scheme)
    else:
        enc = simulate.simulate_forces(moving, geo, pulse, h)
    moving_img = beamform.forces_reconstruct(enc, h, grid, geo, bc)
    low = beamform.readi_reconstruct(enc, scheme, grid, geo, bc)
    comp = motion.emc2_compensate(low, cfg)
    return {"static": static_img, "uncompensated": moving_img, "compensated": comp, "low_res": low}


def cyst_rois(center_z: float = 17e-3) -> tuple[RoiSpec, list[RoiSpec]]:
    inside = RoiSpec("circle", (0.0, center_z), (2e-3,), "inside")
    background = [RoiSpec("rectangle", (sx * 4e-3, center_z), (1.5e-3, 5e-3), "background")
                  for sx in (-1, 1)]
    return inside, background


def motion_cyst_experiment(seed: int, cfg: motion.MotionConfig = MOTION_CFG) -> dict:
    n, s = MOTION_N, MOTION_S
    geo, pulse = standard_probe(n)
    h = sylvester(n)
    scheme = GroupingScheme.from_groups(n, s)
    cz, radius = 17e-3, 2.5e-3
    grid = ImagingGrid((-7e-3, 7e-3), (11e-3, 23e-3), (MOTION_PIXEL, MOTION_PIXEL))
    bc = BeamformConfig()
    lateral, axial = (-8e-3, 8e-3), (10e-3, 24e-3)
    static = simulate.speckle_scene(lateral, axial, 4.0, rng_seed=seed, cysts=[((0.0, cz), radius)])
    static_img = beamform.forces_reconstruct(simulate.simulate_forces(static, geo, pulse, h), h, grid, geo, bc)
    xr = _reference_offset(cfg, scheme.group_size, MOTION_V, PRF)
    travel = MOTION_V * (n - 1) / PRF
    # same scatterer statistics, extended so the field of view stays filled during the sweep
    moving = simulate.speckle_scene((lateral[0] - xr, lateral[1] + travel - xr), axial, 4.0,
                                    rng_seed=seed, cysts=[((-xr, cz), radius)],
                                    velocity=(MOTION_V, 0.0), prf=PRF)
    low = beamform.readi_reconstruct(simulate.simulate_forces(moving, geo, pulse, h), scheme, grid, geo, bc)
    comp = motion.emc2_compensate(low, cfg)
    inside, background = cyst_rois(cz)
    return {"static": static_img, "uncompensated": beamform.compound(low), "compensated": comp,
            "gcnr_static": analysis.gcnr(static_img, inside, background),
            "gcnr_uncompensated": analysis.gcnr(beamform.compound(low), inside, background),
            "gcnr_compensated": analysis.gcnr(comp, inside, background)}


def criterion_4(seeds=(1, 2, 3), budget: float = 180.0) -> CriterionResult:
    """Lateral translation at 0.15 m/s: PSF widths and cyst contrast with and without EMC2."""
    t0 = time.perf_counter()
    pt = motion_point_experiment()
    w = {k: analysis.psf_width(pt[k], "lateral") for k in ("static", "uncompensated", "compensated")}
    values = {f"width_{k}_mm": r.width * 1e3 for k, r in w.items()}
    gaps = []
    for seed in seeds:
        cy = motion_cyst_experiment(seed)
        for k in ("static", "uncompensated", "compensated"):
            values[f"gcnr_{k}_seed{seed}"] = cy[f"gcnr_{k}"]
        gaps.append(abs(cy["gcnr_compensated"] - cy["gcnr_static"]))
    values["gcnr_gap_mean"] = float(np.mean(gaps))
    values["runtime_s"] = time.perf_counter() - t0
    ws = w["static"].width
    checks = {
        "uncompensated width >= 1.5x static": w["uncompensated"].width >= 1.5 * ws,
        "compensated width within 15% of static": abs(w["compensated"].width - ws) <= 0.15 * ws,
        "compensated gCNR within 0.05 of static": values["gcnr_gap_mean"] <= 0.05,
        f"runtime <= {budget:g} s": values["runtime_s"] <= budget,
    }
    return _finish(4, "motion recovery", checks, values, t0)


# -- 5 ---------------------------------------------------------------------------

def speckle_texture(shape, seed: int, corr_px: float = 1.5) -> np.ndarray:
    """Periodic band-limited complex speckle, unit mean power."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    fy = np.fft.fftfreq(shape[0])[:, None]
    fx = np.fft.fftfreq(shape[1])[None, :]
    spectrum = np.exp(-2 * (np.pi * corr_px) ** 2 * (fx ** 2 + fy ** 2))
    field_ = np.fft.ifft2(np.fft.fft2(noise) * spectrum)
    return field_ / np.sqrt(np.mean(np.abs(field_) ** 2))


def fourier_shift(image: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Periodic translation so that content at ``p`` moves to ``p + (dx, dy)``."""
    fy = np.fft.fftfreq(image.shape[0])[:, None]
    fx = np.fft.fftfreq(image.shape[1])[None, :]
    return np.fft.ifft2(np.fft.fft2(image) * np.exp(-2j * np.pi * (fx * dx + fy * dy)))


def _add_complex_noise(image: np.ndarray, snr_db: float, rng) -> np.ndarray:
    sigma = np.sqrt(np.mean(np.abs(image) ** 2) / 10 ** (snr_db / 10) / 2)
    return image + sigma * (rng.standard_normal(image.shape) + 1j * rng.standard_normal(image.shape))


ESTIMATOR_CFG = motion.MotionConfig(grid_spacing=16, ref_patch=32, search_margin=8,
                                    abs_peak_threshold=0.3, rel_peak_threshold=101,
                                    min_curvature=0.01)


def criterion_5(n_trials: int = 50, snr_db: float = 20.0, shape=(128, 128)) -> CriterionResult:
    """Integer and sub-pixel translation recovery of the block matcher."""
    t0 = time.perf_counter()
    cfg = ESTIMATOR_CFG
    exact = True
    for k, (dx, dy) in enumerate([(0, 0), (3, 0), (0, -2), (4, 5), (-6, 1)]):
        ref = speckle_texture(shape, 100 + k)
        tgt = np.roll(ref, (dy, dx), axis=(0, 1))
        f = motion.estimate_field(ref, tgt, cfg)
        dense = motion.densify_field(f, shape)
        # integer NCC peak on the true shift at every interior node; refined field within 0.25 px
        interior = f.peak > 0
        exact &= bool(np.all(f.integer[interior] == (dx, dy)))
        exact &= float(np.max(np.abs(dense - (dx, dy)))) <= 0.25
    errors, valid_nodes, total_nodes = [], 0, 0
    ncc_ok = True
    rng = np.random.default_rng(2024)
    for trial in range(n_trials):
        dx, dy = rng.uniform(-3, 3, 2)
        base = speckle_texture(shape, 1000 + trial)
        ref = _add_complex_noise(base, snr_db, rng)
        tgt = _add_complex_noise(fourier_shift(base, dx, dy), snr_db, rng)
        f = motion.estimate_field(ref, tgt, cfg)
        ncc_ok &= bool(np.all(np.abs(f.peak) <= 1 + 1e-6))
        truth = np.broadcast_to(np.array([dx, dy]), shape + (2,))
        res = analysis.motion_rmse(f, truth)
        if res.defined:
            errors.append(np.sum((f.vectors[f.valid] - (dx, dy)) ** 2, axis=-1))
        valid_nodes += int(f.valid.sum())
        total_nodes += f.valid.size
    surf = motion.ncc_surface(np.abs(speckle_texture((32, 32), 7)), np.abs(speckle_texture((64, 64), 8)))
    ncc_ok &= bool(np.all(np.abs(surf) <= 1 + 1e-6))
    rmse = float(np.sqrt(np.mean(np.concatenate(errors)))) if errors else float("nan")
    values = {"subpixel_rmse_px": rmse, "valid_fraction": valid_nodes / max(total_nodes, 1)}
    checks = {"integer translations exact": exact,
              f"sub-pixel RMSE <= 0.25 px over {n_trials} trials": rmse <= 0.25,
              "NCC within [-1, 1]": ncc_ok}
    return _finish(5, "motion estimator accuracy", checks, values, t0)


# -- 6 ---------------------------------------------------------------------------

def criterion_6(seeds=(1, 2, 3, 4, 5), qs=(8, 16, 32), n_elements: int = 128,
                snr_db: float = 0.0) -> CriterionResult:
    """One READI low-resolution image against uFORCES with the same number of events.

    The channel noise is set so that both images are noise-limited; this is
    the regime where the S-fold transmit of each partially decoded READI
    signal matters. Without noise the comparison is dominated by artifacts
    instead.
    """
    t0 = time.perf_counter()
    geo, pulse = standard_probe(n_elements)
    cz = 17e-3
    grid = ImagingGrid((-6e-3, 6e-3), (12e-3, 22e-3), (0.1e-3, 0.1e-3))
    inside, background = cyst_rois(cz)
    h = sylvester(n_elements)
    bc = BeamformConfig()
    scores = {q: {"readi": [], "uforces": []} for q in qs}
    for seed in seeds:
        scene = simulate.speckle_scene((-8e-3, 8e-3), (10e-3, 24e-3), 4.0, rng_seed=seed,
                                       cysts=[((0.0, cz), 2.5e-3)])
        # static scene: one multistatic simulation serves every encoding
        multi = simulate.simulate_multistatic(scene, geo, pulse)
        for q in qs:
            s = n_elements // q
            enc = simulate.encode_static(multi, h[:q], snr_db, seed)
            low = beamform.readi_low_res(enc.samples, 1, sylvester(s), sylvester(q), grid, geo, bc,
                                         enc.sample_rate, enc.start_time)
            w, elements = hadamard.uforces_encoding(n_elements, q)
            uenc = simulate.encode_static(multi, w, snr_db, seed)
            uimg = beamform.uforces_reconstruct(uenc, sylvester(q), grid, geo, bc, elements)
            scores[q]["readi"].append(analysis.gcnr(low, inside, background))
            scores[q]["uforces"].append(analysis.gcnr(uimg, inside, background))
    checks, values = {}, {}
    for q in qs:
        mr, mu = float(np.mean(scores[q]["readi"])), float(np.mean(scores[q]["uforces"]))
        values[f"gcnr_readi_Q{q}"] = mr
        values[f"gcnr_uforces_Q{q}"] = mu
        checks[f"Q={q} READI >= uFORCES"] = mr >= mu
    return _finish(6, "READI low-res vs uFORCES", checks, values, t0)


# -- 7 ---------------------------------------------------------------------------

def static_plus_mover(n_frames: int = 64, shape=(64, 64), seed: int = 3, clutter_db: float = 30.0):
    """Components of a clutter-dominated ensemble: a fixed speckle image and a moving blob."""
    rng = np.random.default_rng(seed)
    grid = ImagingGrid((0.0, (shape[1] - 1) * 1e-4), (1e-3, 1e-3 + (shape[0] - 1) * 1e-4), (1e-4, 1e-4))
    tissue = speckle_texture(shape, seed) * 10 ** (clutter_db / 20)
    zz, xx = np.mgrid[:shape[0], :shape[1]]
    static_frames, mover_frames = [], []
    phase = rng.uniform(0, 2 * np.pi)
    for k in range(n_frames):
        cx = 4 + k * (shape[1] - 8) / n_frames
        blob = np.exp(-((xx - cx) ** 2 + (zz - shape[0] / 2) ** 2) / (2 * 1.5 ** 2))
        mover_frames.append(ComplexImage(grid, blob * np.exp(1j * (phase + 0.9 * k)), "mover"))
        static_frames.append(ComplexImage(grid, tissue.copy(), "static"))
    return ImageEnsemble(static_frames), ImageEnsemble(mover_frames)


def _sum_ensembles(a: ImageEnsemble, b: ImageEnsemble) -> ImageEnsemble:
    return ImageEnsemble([ComplexImage(x.grid, x.pixels + y.pixels, "mixed") for x, y in zip(a.frames, b.frames)],
                         a.frame_interval)


def criterion_7(n_frames: int = 64) -> CriterionResult:
    t0 = time.perf_counter()
    static, mover = static_plus_mover(n_frames)
    mixed = _sum_ensembles(static, mover)
    proj = analysis.svd_projector(mixed, range(2, n_frames + 1))
    static_left = analysis.apply_projector(static, proj).energy() / static.energy()
    mover_kept = analysis.apply_projector(mover, proj).energy() / mover.energy()
    full = analysis.svd_filter(mixed, range(1, n_frames + 1))
    ident = max(_rel_l2(f.pixels, m.pixels) for f, m in zip(full.frames, mixed.frames))
    values = {"static_energy_removed": 1 - static_left, "mover_energy_kept": mover_kept,
              "full_keep_rel_error": ident}
    checks = {"removes >= 99% static energy": 1 - static_left >= 0.99,
              "keeps >= 90% mover energy": mover_kept >= 0.90,
              "full keep-set is identity": ident <= 1e-6}
    return _finish(7, "SVD clutter filter", checks, values, t0)


# -- 8 ---------------------------------------------------------------------------

def criterion_8(seed: int = 8) -> CriterionResult:
    """Compact property suite: codec, analytic signal, CF, warping, gCNR, container."""
    import tempfile
    from pathlib import Path

    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    checks = {}
    h = sylvester(64)
    s = beamform.MultistaticDataset(rng.standard_normal((64, 8, 50)), 1.0)
    rt = beamform.decode_forces(beamform.encode_forces(s, h), h).samples
    checks["encode/decode round trip"] = float(np.max(np.abs(rt - s.samples))) <= 1e-10

    x = rng.standard_normal((4, 257))
    a = beamform.analytic_signal(x)
    spec = np.fft.fft(a, axis=-1)
    neg = spec[:, 129:]
    checks["analytic signal"] = (np.allclose(a.real, x, atol=1e-12)
                                 and np.allclose(a, signal.hilbert(x), atol=1e-10)
                                 and float(np.max(np.abs(neg))) <= 1e-9)

    cf_ok = abs(beamform.coherence_factor(np.full(16, 2 - 1j)) - 1) < 1e-12
    for _ in range(100):
        v = rng.standard_normal(rng.integers(1, 40)) + 1j * rng.standard_normal(1)
        c = beamform.coherence_factor(v)
        cf_ok &= -1e-12 <= c <= 1 + 1e-12
    checks["coherence factor bounds"] = bool(cf_ok)

    grid = ImagingGrid((0.0, 6.3e-3), (1e-3, 7.3e-3), (1e-4, 1e-4))
    img = ComplexImage(grid, speckle_texture(grid.shape, seed))
    zero = motion.warp_image(img, np.zeros(grid.shape + (2,)))
    shift = np.zeros(grid.shape + (2,))
    shift[..., 0], shift[..., 1] = 3, -2
    warped = motion.warp_image(img, shift).pixels
    expect = np.roll(img.pixels, (2, -3), axis=(0, 1))
    checks["warp identities"] = (np.array_equal(zero.pixels, img.pixels)
                                 and np.allclose(warped[2:, :-3], expect[2:, :-3], atol=1e-12)
                                 and not warped[:2].any() and not warped[:, -3:].any())

    u_in = rng.uniform(0, 1, 10_000)
    u_bg = rng.uniform(0.5, 1.5, 10_000)
    g = analysis.gcnr_samples(u_in, u_bg, 100)
    checks["gCNR analytic overlap 0.5 +- 0.03"] = abs(g - 0.5) <= 0.03

    enc = beamform.EncodedDataset(rng.standard_normal((16, 4, 30)), 40e6, 1e-6)
    with tempfile.TemporaryDirectory() as tmp:
        p1, p2 = Path(tmp) / "a.readi", Path(tmp) / "b.readi"
        container.write_container(p1, enc)
        container.write_container(p2, container.read_container(p1))
        checks["container byte equality"] = p1.read_bytes() == p2.read_bytes()
    return _finish(8, "property suites", checks, {"gcnr_uniform": g}, t0)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
            5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8}


def run_all(selected=None, echo=print) -> list[CriterionResult]:
    results = []
    for k in sorted(selected or CRITERIA):
        r = CRITERIA[k]()
        if echo:
            echo(r.line())
        results.append(r)
    return results
