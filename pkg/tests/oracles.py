"""Reference implementations written independently of the package."""

import numpy as np

from conftest import C


def pulse_oracle(u, pulse):
    """Continuous pulse evaluated directly on arbitrary times ``u``."""
    on = (u >= 0) & (u < pulse.duration)
    wave = np.sin(2 * np.pi * pulse.center_frequency * u)
    if pulse.envelope == "hann":
        wave = wave * np.sin(np.pi * u / pulse.duration) ** 2
    return np.where(on, wave, 0.0)


def multistatic_oracle(positions, refl, geo, pulse, n_t, t0=0.0):
    xs = geo.element_positions
    t = t0 + np.arange(n_t) / pulse.sample_rate
    out = np.zeros((geo.n_elements, geo.n_elements, n_t))
    for (px, pz), a in zip(positions, refl):
        d = np.hypot(xs - px, pz) / C
        tau = d[:, None] + d[None, :]
        out += a * pulse_oracle(t[None, None, :] - tau[:, :, None], pulse)
    return out
