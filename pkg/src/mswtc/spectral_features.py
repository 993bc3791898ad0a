"""Continuous wavelet transform with generalized Morse wavelets.

The transform is computed per scale in the frequency domain. Each row of the
power matrix is then reduced to its mean and standard deviation, using only
the columns inside the cone of influence. That pair of per-scale vectors is
the MS-WTC feature; the mean alone is M-WTC and the std alone S-WTC. A plain
FFT periodogram is provided as the spectral baseline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sp_fft
from scipy.optimize import brentq

MS_WTC = "MS_WTC"
M_WTC = "M_WTC"
S_WTC = "S_WTC"
FFT_PSD = "FFT_PSD"
EMD = "EMD"
METHODS = (MS_WTC, M_WTC, S_WTC, FFT_PSD, EMD)
CHANNELS = {MS_WTC: 2, M_WTC: 1, S_WTC: 1, FFT_PSD: 1, EMD: 4}

MIN_COI_SAMPLES = 8


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class MorseParams:
    gamma: float = 3.0
    beta: float = 20.0

    def __post_init__(self):
        if self.gamma <= 0 or self.beta <= 0:
            raise SpectralError(f"Morse parameters must be positive, got {self}")

    @property
    def peak_omega(self):
        """Peak radian frequency of the unit-scale wavelet, (beta/gamma)**(1/gamma)."""
        return (self.beta / self.gamma) ** (1.0 / self.gamma)


@dataclass(frozen=True)
class ScaleGrid:
    freqs: tuple
    voices_per_octave: int
    f_min: float
    f_max: float

    @property
    def k(self):
        return len(self.freqs)


def make_grid(f_min=0.1, f_max=35.0, voices_per_octave=12):
    """Log-spaced center frequencies from ``f_max`` down towards ``f_min``.

    ``k = floor(voices * log2(f_max / f_min)) + 1``; the list is descending.
    """
    if not 0 < f_min < f_max:
        raise SpectralError(f"need 0 < f_min < f_max, got {f_min}, {f_max}")
    if voices_per_octave < 1:
        raise SpectralError("voices_per_octave must be >= 1")
    k = int(math.floor(voices_per_octave * math.log2(f_max / f_min) + 1e-12)) + 1
    freqs = f_max * 2.0 ** (-np.arange(k) / voices_per_octave)
    return ScaleGrid(tuple(float(f) for f in freqs), voices_per_octave, f_min, f_max)


def morse_wavelet_fourier(params, omega):
    """Generalized Morse wavelet in the frequency domain.

    ``Psi(w) = 2 * (w / w_p)**beta * exp(w_p**gamma - w**gamma)`` for ``w > 0``
    and zero otherwise, so the peak value at ``w_p`` is exactly 2.
    """
    w = np.asarray(omega, dtype=np.float64)
    out = np.zeros_like(w)
    pos = w > 0
    wp = params.peak_omega
    wl = w[pos]
    # log form avoids overflow of w**beta at large w
    out[pos] = 2.0 * np.exp(params.beta * np.log(wl / wp) + wp ** params.gamma - wl ** params.gamma)
    return out


def _omega_support(params, tail=1e-18):
    # upper frequency where the wavelet falls below `tail` of its peak
    wp = params.peak_omega
    f = lambda w: params.beta * math.log(w / wp) + wp ** params.gamma - w ** params.gamma - math.log(tail)
    hi = wp * 2
    while f(hi) > 0:
        hi *= 2
    return brentq(f, wp, hi)


def mother_wavelet_time(params, t, n_omega=20001):
    """Unit-scale wavelet in time, by quadrature of the inverse Fourier integral."""
    w = np.linspace(0.0, _omega_support(params), n_omega)
    psi_hat = morse_wavelet_fourier(params, w)
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    kern = np.exp(1j * np.outer(t, w))
    return np.trapezoid(kern * psi_hat, w, axis=1) / (2 * np.pi)


@lru_cache(maxsize=16)
def efolding_time(params):
    """Time at which the unit-scale wavelet envelope drops to 1/e of its peak."""
    peak = abs(mother_wavelet_time(params, 0.0)[0])
    target = peak / math.e
    g = lambda t: abs(mother_wavelet_time(params, t)[0]) - target
    hi = 1.0
    while g(hi) > 0:
        hi *= 2
    return brentq(g, 0.0, hi, xtol=1e-10)


def scales_seconds(grid, params):
    """Time scale (s) whose wavelet peaks at each grid frequency."""
    return params.peak_omega / (2 * np.pi * np.asarray(grid.freqs))


def coi_margins(grid, params, fs):
    return np.ceil(fs * efolding_time(params) * scales_seconds(grid, params)).astype(np.int64)


@dataclass
class TimeFrequencyMap:
    power: np.ndarray
    grid: ScaleGrid
    coi_margin: np.ndarray
    fs: float

    @property
    def length(self):
        return self.power.shape[1]

    def retained(self):
        """Boolean mask of scales keeping at least 8 in-COI samples."""
        return self.length - 2 * self.coi_margin >= MIN_COI_SAMPLES


@dataclass
class FeatureTensor:
    method: str
    data: np.ndarray
    meta: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.data = np.atleast_2d(self.data)
        if self.data.shape[0] != CHANNELS[self.method]:
            raise SpectralError(
                f"{self.method} expects {CHANNELS[self.method]} channels, got {self.data.shape[0]}"
            )


@lru_cache(maxsize=32)
def wavelet_bank(grid, params, fs, n):
    """Frequency responses of all scaled wavelets on an n-point DFT grid (k x n)."""
    omega = 2 * np.pi * np.fft.fftfreq(n, d=1.0 / fs)
    s = scales_seconds(grid, params)
    bank = morse_wavelet_fourier(params, np.outer(s, omega))
    bank.setflags(write=False)
    return bank


def _check_grid(grid, fs):
    if max(grid.freqs) >= fs / 2:
        raise SpectralError(f"grid frequency {max(grid.freqs)} Hz is not below Nyquist {fs / 2} Hz")


def cwt_coefficients(x, fs, grid, params):
    """Complex CWT coefficients, shape (k, len(x))."""
    x = np.asarray(getattr(x, "samples", x), dtype=np.float64)
    if x.size < 2:
        raise SpectralError("segment needs at least 2 samples")
    _check_grid(grid, fs)
    bank = wavelet_bank(grid, params, float(fs), x.size)
    return sp_fft.ifft(sp_fft.fft(x)[None, :] * bank, axis=1)


def cwt(segment, grid, params=MorseParams(), fs=None, power_mode="squared"):
    """Power scalogram ``m[a, b]`` of a segment with its cone-of-influence margins.

    ``power_mode`` picks ``|W|**2`` (``"squared"``) or ``|W|`` (``"magnitude"``).
    """
    fs = segment.fs if fs is None else fs
    coeffs = cwt_coefficients(segment, fs, grid, params)
    if power_mode == "squared":
        power = coeffs.real ** 2 + coeffs.imag ** 2
    elif power_mode == "magnitude":
        power = np.abs(coeffs)
    else:
        raise SpectralError(f"unknown power_mode {power_mode!r}")
    return TimeFrequencyMap(power, grid, coi_margins(grid, params, fs), float(fs))


def _row_stats(tf):
    keep = tf.retained()
    if not keep.any():
        raise SpectralError("cone of influence leaves no scale with enough samples")
    n = tf.length
    mu, sd = [], []
    for a in np.flatnonzero(keep):
        m = tf.coi_margin[a]
        row = tf.power[a, m:n - m]
        mean = row.mean()
        mu.append(mean)
        sd.append(np.sqrt(np.mean((row - mean) ** 2)))
    freqs = np.asarray(tf.grid.freqs)[keep]
    return np.array(mu), np.array(sd), freqs


def reduce_ms_wtc(tf):
    """Per-scale mean and population std of in-COI power: shape (2, k_retained)."""
    mu, sd, freqs = _row_stats(tf)
    return FeatureTensor(MS_WTC, np.vstack([mu, sd]), freqs)


def reduce_m_wtc(tf):
    ms = reduce_ms_wtc(tf)
    return FeatureTensor(M_WTC, ms.data[:1].copy(), ms.meta)


def reduce_s_wtc(tf):
    ms = reduce_ms_wtc(tf)
    return FeatureTensor(S_WTC, ms.data[1:].copy(), ms.meta)


def periodogram(x, fs):
    """Two-sided periodogram ``|X_j|**2 / (fs * n)`` and its bin frequencies."""
    x = np.asarray(x, dtype=np.float64)
    X = sp_fft.fft(x)
    return np.fft.fftfreq(x.size, 1.0 / fs), (X.real ** 2 + X.imag ** 2) / (fs * x.size)


def fft_psd(segment, band=(0.1, 35.0), fs=None):
    """One-sided rectangular-window periodogram restricted to ``band``.

    Interior bins carry twice the two-sided value so the one-sided density
    still integrates to the mean square.
    """
    fs = segment.fs if fs is None else fs
    x = np.asarray(getattr(segment, "samples", segment), dtype=np.float64)
    if x.size < 2:
        raise SpectralError("segment needs at least 2 samples")
    n = x.size
    X = sp_fft.rfft(x)
    p = (X.real ** 2 + X.imag ** 2) / (fs * n)
    p[1:(n + 1) // 2] *= 2.0
    f = sp_fft.rfftfreq(n, 1.0 / fs)
    sel = (f >= band[0]) & (f <= band[1])
    if not sel.any():
        raise SpectralError(f"band {band} contains no DFT bin")
    return FeatureTensor(FFT_PSD, p[sel][None, :], f[sel])
