import numpy as np
import pytest

from readi_lab import simulate
from readi_lab.datasets import DimensionError
from readi_lab.hadamard import sylvester
from readi_lab.simulate import (ArrayGeometry, InvalidSceneError, PulseDefinition, ScattererScene,
                                UndersampledError)

from conftest import C, F0, WAVELENGTH
from oracles import multistatic_oracle


@pytest.mark.parametrize("envelope", ["rectangular", "hann"])
def test_multistatic_matches_direct_evaluation(envelope):
    geo = ArrayGeometry(8, WAVELENGTH)
    pulse = PulseDefinition(F0, 2, envelope)
    pos = [[0.3e-3, 6e-3], [-1.1e-3, 7.5e-3]]
    scene = ScattererScene(pos, reflectivity=[1.0, -0.4], speed_of_sound=C)
    n_t = simulate.record_length(scene, geo, pulse)
    got = simulate.simulate_multistatic(scene, geo, pulse, n_samples=n_t).samples
    want = multistatic_oracle(np.array(pos), [1.0, -0.4], geo, pulse, n_t)
    np.testing.assert_allclose(got, want, atol=1e-9)


def test_multistatic_is_reciprocal(probe16, point_scene):
    geo, pulse = probe16
    s = simulate.simulate_multistatic(point_scene, geo, pulse).samples
    np.testing.assert_allclose(s, s.transpose(1, 0, 2), atol=1e-12)


def test_record_length_holds_every_echo(probe16, point_scene):
    geo, pulse = probe16
    n_t = simulate.record_length(point_scene, geo, pulse)
    s = simulate.simulate_multistatic(point_scene, geo, pulse, n_samples=n_t + 200).samples
    assert not s[..., n_t:].any()


def test_encoded_equals_weighted_multistatic(probe16, point_scene):
    geo, pulse = probe16
    h = sylvester(16)
    multi = simulate.simulate_multistatic(point_scene, geo, pulse)
    enc = simulate.simulate_forces(point_scene, geo, pulse, h, n_samples=multi.n_samples)
    np.testing.assert_allclose(enc.samples, np.tensordot(h, multi.samples, axes=(1, 0)), atol=1e-10)


def test_static_shortcut_equals_per_event_path(probe16, point_scene):
    geo, pulse = probe16
    h = sylvester(16)
    a = simulate.simulate_forces(point_scene, geo, pulse, h, static_shortcut=True)
    b = simulate.simulate_forces(point_scene, geo, pulse, h, static_shortcut=False)
    np.testing.assert_allclose(a.samples, b.samples, atol=1e-10)


def test_encode_static_matches_simulate_encoded_with_noise(probe16):
    geo, pulse = probe16
    scene = ScattererScene([[0.0, 8e-3]], speed_of_sound=C, noise_snr_db=10.0, rng_seed=5)
    w = sylvester(16)[:4]
    direct = simulate.simulate_encoded(scene, geo, pulse, w)
    clean = ScattererScene([[0.0, 8e-3]], speed_of_sound=C)
    multi = simulate.simulate_multistatic(clean, geo, pulse, n_samples=direct.n_samples)
    reused = simulate.encode_static(multi, w, 10.0, 5)
    np.testing.assert_allclose(reused.samples, direct.samples, atol=1e-10)


def test_moving_scene_uses_per_event_positions(probe16):
    geo, pulse = probe16
    scene = ScattererScene([[0.0, 8e-3]], [[0.5, 0.0]], speed_of_sound=C, prf=1000.0)
    w = np.eye(16)[:3]
    enc = simulate.simulate_encoded(scene, geo, pulse, w)
    for e in range(3):
        frozen = ScattererScene([simulate.scene_at_event(scene, e + 1)[0]], speed_of_sound=C)
        ref = simulate.simulate_multistatic(frozen, geo, pulse, n_samples=enc.n_samples).samples[e]
        np.testing.assert_allclose(enc.samples[e], ref, atol=1e-10)


def test_noise_is_deterministic_and_scaled(probe16):
    geo, pulse = probe16
    kw = dict(speed_of_sound=C, noise_snr_db=0.0, rng_seed=11)
    a = simulate.simulate_multistatic(ScattererScene([[0, 8e-3]], **kw), geo, pulse).samples
    b = simulate.simulate_multistatic(ScattererScene([[0, 8e-3]], **kw), geo, pulse).samples
    np.testing.assert_array_equal(a, b)
    clean = simulate.simulate_multistatic(ScattererScene([[0, 8e-3]], speed_of_sound=C), geo, pulse).samples
    noise = a - clean
    ratio = np.sqrt(np.mean(noise ** 2) / np.mean(clean ** 2))
    assert ratio == pytest.approx(1.0, rel=0.05)


def test_speckle_scene_respects_cysts():
    scene = simulate.speckle_scene((-2e-3, 2e-3), (5e-3, 9e-3), 20.0, rng_seed=3,
                                   cysts=[((0.0, 7e-3), 1e-3)])
    r = np.hypot(scene.positions[:, 0], scene.positions[:, 1] - 7e-3)
    assert scene.n_scatterers > 100 and r.min() > 1e-3


def test_invalid_inputs():
    with pytest.raises(UndersampledError):
        PulseDefinition(F0, sample_rate=3 * F0)
    with pytest.raises(InvalidSceneError):
        ScattererScene([[0.0, -1e-3]])
    with pytest.raises(ValueError):
        ArrayGeometry(0, 1e-4)
    geo = ArrayGeometry(4, WAVELENGTH)
    with pytest.raises(DimensionError):
        simulate.simulate_encoded(ScattererScene([[0, 5e-3]]), geo, PulseDefinition(F0), np.ones((2, 3)))


def test_scatterer_list_roundtrip():
    pts = [simulate.Scatterer((0.0, 5e-3), (0.1, 0.0), 2.0), simulate.Scatterer((1e-3, 6e-3))]
    scene = ScattererScene.from_scatterers(pts, speed_of_sound=C)
    assert scene.scatterers == pts
    assert not scene.is_static
    assert ScattererScene.from_scatterers([]).n_scatterers == 0
