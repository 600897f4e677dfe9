"""Zero-padded FFT grids on which coefficient products are exact.

A mode set with max |k_i| = K is embedded in a periodic grid of side
G >= 4K + 1. Products of two fields then carry frequencies up to 2K without
wrap-around, and a third factor only aliases onto frequencies outside the
mode set.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .lattice import mode_set

_AXES = (-3, -2, -1)


class SpectralGrid:
    def __init__(self, N: int):
        self.mode_set = mode_set(N)
        self.N = N
        K = self.mode_set.kmax
        self.G = G = int(sfft.next_fast_len(4 * K + 1))
        k = self.mode_set.modes % G
        self.flat = (k[:, 0] * G + k[:, 1]) * G + k[:, 2]
        f = np.rint(sfft.fftfreq(G, 1.0 / G)).astype(np.int64)
        self.freqs = np.stack(np.meshgrid(f, f, f, indexing="ij"), axis=-1)
        self.freq_norm2 = np.sum(self.freqs ** 2, axis=-1)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.G,) * 3

    def scatter(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs)
        lead = coeffs.shape[:-1]
        out = np.zeros(lead + (self.G ** 3,), dtype=np.complex128)
        out[..., self.flat] = coeffs
        return out.reshape(lead + self.shape)

    def gather(self, grid_coeffs: np.ndarray) -> np.ndarray:
        lead = grid_coeffs.shape[:-3]
        return grid_coeffs.reshape(lead + (self.G ** 3,))[..., self.flat]

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        """Samples of sum_k c_k e^{ik.x} on the grid."""
        return sfft.ifftn(self.scatter(coeffs), axes=_AXES, norm="forward")

    def fft(self, phys: np.ndarray) -> np.ndarray:
        return sfft.fftn(phys, axes=_AXES, norm="forward")

    def ifft(self, grid_coeffs: np.ndarray) -> np.ndarray:
        return sfft.ifftn(grid_coeffs, axes=_AXES, norm="forward")

    def to_coeffs(self, phys: np.ndarray) -> np.ndarray:
        """Fourier coefficients on the mode set of a grid function."""
        return self.gather(self.fft(phys))


@lru_cache(maxsize=None)
def spectral_grid(N: int) -> SpectralGrid:
    return SpectralGrid(N)
