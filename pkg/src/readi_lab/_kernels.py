"""Compiled delay-and-sum kernel.

The image is processed in small pixel tiles. For each tile, per-element
delays are tabulated once, then every (receive, transmit) record is swept
over the tile's pixels, so reads from one record stay within a few cache
lines. Each pixel is still reduced receive-major, transmit-minor, and the
order does not depend on the tiling or on threading.

The kernel is generic in precision: the accumulators take the dtype of
``out`` and interpolation weights are cast through ``rbuf`` (a scratch
array of the matching real dtype), so complex64 input is summed in 32-bit.
"""

import math

import numba as nb
import numpy as np

TILE_Z = 32
TILE_X = 8


@nb.njit(cache=True)
def _tile(data, tx_x, rx_x, x, z, ix0, ix1, iz0, iz1, t0, fs, c, fnumber, hann, linear,
          use_cf, out, rbuf):
    n_sig, n_rx, n_t = data.shape
    npx = (ix1 - ix0) * (iz1 - iz0)
    px = np.empty(npx)
    pz = np.empty(npx)
    p = 0
    for ix in range(ix0, ix1):
        for iz in range(iz0, iz1):
            px[p] = x[ix]
            pz[p] = z[iz]
            p += 1
    scale = fs / c
    tdel = np.empty((n_sig, npx), dtype=rbuf.dtype)
    for k in range(n_sig):
        for p in range(npx):
            tdel[k, p] = math.sqrt((tx_x[k] - px[p]) ** 2 + pz[p] ** 2) * scale
    rdel = np.empty(npx, dtype=rbuf.dtype)
    apod = np.zeros(npx, dtype=rbuf.dtype)
    acc = np.zeros(npx, dtype=out.dtype)
    power = np.zeros(npx, dtype=rbuf.dtype)
    count = np.zeros(npx, dtype=np.int64)
    last = n_t - 1
    offset = t0 * fs
    for j in range(n_rx):
        active = False
        for p in range(npx):
            dx = rx_x[j] - px[p]
            half = pz[p] / (2.0 * fnumber)
            if abs(dx) > half:
                apod[p] = 0.0
            else:
                active = True
                if hann:
                    apod[p] = math.cos(0.5 * math.pi * dx / half) ** 2
                else:
                    apod[p] = 1.0
                rdel[p] = math.sqrt(dx * dx + pz[p] ** 2) * scale - offset
        if not active:
            continue
        for k in range(n_sig):
            for p in range(npx):
                a = apod[p]
                if a == 0:
                    continue
                pos = tdel[k, p] + rdel[p]
                if pos < 0.0 or pos > last:
                    continue
                if linear:
                    fl = np.floor(pos)
                    i0 = int(fl)
                    d0 = data[k, j, i0]
                    if i0 == last:
                        sample = d0
                    else:
                        sample = d0 + (data[k, j, i0 + 1] - d0) * (pos - fl)
                else:
                    sample = data[k, j, int(pos + 0.5)]
                v = sample * a
                acc[p] += v
                if use_cf:
                    power[p] += v.real * v.real + v.imag * v.imag
                    count[p] += 1
    p = 0
    for ix in range(ix0, ix1):
        for iz in range(iz0, iz1):
            v = acc[p]
            if use_cf:
                if power[p] > 0:
                    rbuf[3] = (v.real * v.real + v.imag * v.imag) / (count[p] * power[p])
                    v = v * rbuf[3]
                else:
                    v = v * rbuf[0]
            out[iz, ix] = v
            p += 1


@nb.njit(cache=True)
def das_kernel(data, tx_x, rx_x, x, z, t0, fs, c, fnumber, hann, linear, use_cf, out, rbuf):
    """Serial delay-and-sum into ``out[iz, ix]``; see module docstring."""
    nx = x.shape[0]
    nz = z.shape[0]
    for ix0 in range(0, nx, TILE_X):
        for iz0 in range(0, nz, TILE_Z):
            _tile(data, tx_x, rx_x, x, z, ix0, min(ix0 + TILE_X, nx), iz0, min(iz0 + TILE_Z, nz),
                  t0, fs, c, fnumber, hann, linear, use_cf, out, rbuf)


@nb.njit(cache=True, parallel=True)
def das_kernel_parallel(data, tx_x, rx_x, x, z, t0, fs, c, fnumber, hann, linear, use_cf, out, rbuf):
    """Tiles distributed over threads; per-pixel arithmetic identical to :func:`das_kernel`."""
    nx = x.shape[0]
    nz = z.shape[0]
    n_tx_tiles = (nx + TILE_X - 1) // TILE_X
    n_tz_tiles = (nz + TILE_Z - 1) // TILE_Z
    for t in nb.prange(n_tx_tiles * n_tz_tiles):
        ix0 = (t // n_tz_tiles) * TILE_X
        iz0 = (t % n_tz_tiles) * TILE_Z
        _tile(data, tx_x, rx_x, x, z, ix0, min(ix0 + TILE_X, nx), iz0, min(iz0 + TILE_Z, nz),
              t0, fs, c, fnumber, hann, linear, use_cf, out, rbuf.copy())
