"""Bandpass filtering and amplitude-artifact suppression."""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import signal


class PreprocessError(ValueError):
    pass


@dataclass(frozen=True)
class PreprocessConfig:
    band_low: float = 0.1
    band_high: float = 35.0
    clip_sigma: float = 3.0
    filter_order: int = 4
    clip_before_filter: bool = False

    def check(self, fs):
        if not (0 < self.band_low < self.band_high < fs / 2):
            raise PreprocessError(
                f"band edges ({self.band_low}, {self.band_high}) Hz must lie in (0, {fs / 2}) Hz"
            )
        if self.clip_sigma <= 0:
            raise PreprocessError("clip_sigma must be positive")
        if self.filter_order < 1:
            raise PreprocessError("filter_order must be a positive integer")


BONN_PREPROCESS = PreprocessConfig(band_low=0.53, band_high=40.0)


def _samples(x):
    return np.asarray(getattr(x, "samples", x), dtype=np.float64)


def _rewrap(seg, y):
    if hasattr(seg, "samples"):
        return replace(seg, samples=y)
    return y


@lru_cache(maxsize=32)
def butter_sos(cfg, fs):
    cfg.check(fs)
    return signal.butter(cfg.filter_order, [cfg.band_low, cfg.band_high],
                         btype="bandpass", fs=fs, output="sos")


def bandpass(seg, cfg, fs=None):
    """Zero-phase Butterworth bandpass of a Segment (or raw array with ``fs``).

    The mean is removed and the signal mirror-extended by its own length on
    each side, with a raised-cosine taper over the extension, before the
    forward-backward pass; the extension is trimmed afterwards. Short pads
    let the low band edge ring across the whole window.
    """
    fs = seg.fs if fs is None else fs
    x = _samples(seg)
    sos = butter_sos(cfg, fs)
    y = _filtfilt_tapered(sos, x)
    return _rewrap(seg, y)


def _filtfilt_tapered(sos, x):
    pad = x.size - 1
    if pad < 1:
        return np.zeros_like(x)
    ext = np.pad(x - x.mean(), (pad, pad), mode="reflect")
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(pad) / pad)
    ext[:pad] *= ramp
    ext[-pad:] *= ramp[::-1]
    return signal.sosfiltfilt(sos, ext, padtype=None)[pad:-pad]


def clip_stats(x):
    x = _samples(x)
    return float(x.mean()), float(x.std())


def clip_artifacts(seg, cfg, stats=None):
    """Zero every sample further than ``clip_sigma`` std from the mean.

    Statistics come from a single pass over the input unless ``stats`` (a
    ``(mean, std)`` pair) is given, which freezes them.

    Returns
    -------
    (Segment or ndarray, int)
        The cleaned signal and how many samples were replaced.
    """
    x = _samples(seg)
    mu, sd = clip_stats(x) if stats is None else stats
    if sd == 0:
        return _rewrap(seg, x.copy()), 0
    mask = np.abs(x - mu) > cfg.clip_sigma * sd
    y = np.where(mask, 0.0, x)
    return _rewrap(seg, y), int(mask.sum())


def preprocess(seg, cfg, fs=None):
    """Filter and clip in the configured order."""
    fs = seg.fs if fs is None else fs
    if cfg.clip_before_filter:
        seg, _ = clip_artifacts(seg, cfg)
        return bandpass(seg, cfg, fs)
    seg = bandpass(seg, cfg, fs)
    seg, _ = clip_artifacts(seg, cfg)
    return seg
