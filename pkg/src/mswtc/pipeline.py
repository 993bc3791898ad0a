"""Segment -> preprocessing -> feature tensor, plus the binary feature dump."""
from __future__ import annotations

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import fft as sp_fft

from . import dsp_preprocess as dsp
from . import spectral_features as sf
from .temporal_features import EmdConfig, emd_features

METHOD_ALIASES = {
    "ms": sf.MS_WTC, "ms_wtc": sf.MS_WTC, "ms-wtc": sf.MS_WTC,
    "m": sf.M_WTC, "m_wtc": sf.M_WTC, "m-wtc": sf.M_WTC,
    "s": sf.S_WTC, "s_wtc": sf.S_WTC, "s-wtc": sf.S_WTC,
    "fft": sf.FFT_PSD, "f": sf.FFT_PSD, "fft_psd": sf.FFT_PSD,
    "emd": sf.EMD, "e": sf.EMD,
}


def resolve_method(name):
    key = str(name).strip().lower()
    if key in METHOD_ALIASES:
        return METHOD_ALIASES[key]
    raise ValueError(f"unknown feature method {name!r}; choose from {sorted(set(METHOD_ALIASES))}")


@dataclass(frozen=True)
class FeatureConfig:
    f_min: float = 0.1
    f_max: float = 35.0
    voices_per_octave: int = 12
    gamma: float = 3.0
    beta: float = 20.0
    power_mode: str = "squared"
    fft_band: tuple = (0.1, 35.0)
    emd: EmdConfig = field(default_factory=EmdConfig)
    preprocess: dsp.PreprocessConfig = field(default_factory=dsp.PreprocessConfig)

    @property
    def grid(self):
        return sf.make_grid(self.f_min, self.f_max, self.voices_per_octave)

    @property
    def morse(self):
        return sf.MorseParams(self.gamma, self.beta)

    def as_dict(self):
        d = asdict(self)
        d["fft_band"] = list(self.fft_band)
        d["emd"]["weights"] = list(self.emd.weights)
        return d


@dataclass(frozen=True)
class _CwtPlan:
    bank: np.ndarray          # retained scales only
    mask: np.ndarray          # in-COI columns per retained scale
    counts: np.ndarray
    freqs: np.ndarray


@lru_cache(maxsize=16)
def cwt_plan(grid, params, fs, n):
    """Immutable wavelet bank restricted to scales whose COI leaves >= 8 samples."""
    margins = sf.coi_margins(grid, params, fs)
    keep = n - 2 * margins >= sf.MIN_COI_SAMPLES
    if not keep.any():
        raise sf.SpectralError("cone of influence leaves no scale with enough samples")
    bank = np.ascontiguousarray(sf.wavelet_bank(grid, params, fs, n)[keep])
    cols = np.arange(n)
    m = margins[keep][:, None]
    mask = (cols >= m) & (cols < n - m)
    for arr in (bank, mask):
        arr.setflags(write=False)
    return _CwtPlan(bank, mask, mask.sum(axis=1), np.asarray(grid.freqs)[keep])


def _wtc_fast(x, fs, cfg):
    plan = cwt_plan(cfg.grid, cfg.morse, float(fs), x.size)
    w = sp_fft.ifft(sp_fft.fft(x)[None, :] * plan.bank, axis=1)
    power = w.real ** 2 + w.imag ** 2
    if cfg.power_mode == "magnitude":
        power = np.sqrt(power)
    mu = np.where(plan.mask, power, 0.0).sum(axis=1) / plan.counts
    dev = np.where(plan.mask, power - mu[:, None], 0.0)
    sd = np.sqrt((dev * dev).sum(axis=1) / plan.counts)
    return mu, sd, plan.freqs


def featurize(segment, method, cfg=FeatureConfig(), fs=None, preprocessed=False):
    """Preprocess one segment and extract the requested feature tensor."""
    method = resolve_method(method)
    fs = segment.fs if fs is None else fs
    x = np.asarray(getattr(segment, "samples", segment), dtype=np.float64)
    if not preprocessed:
        x = dsp.preprocess(x, cfg.preprocess, fs)
    if method == sf.EMD:
        return emd_features(x, cfg.emd)
    if method == sf.FFT_PSD:
        return sf.fft_psd(x, cfg.fft_band, fs)
    mu, sd, freqs = _wtc_fast(x, fs, cfg)
    if method == sf.MS_WTC:
        return sf.FeatureTensor(method, np.vstack([mu, sd]), freqs)
    return sf.FeatureTensor(method, (mu if method == sf.M_WTC else sd)[None, :], freqs)


def _featurize_chunk(args):
    segs, method, cfg = args
    return [featurize(s, method, cfg).data for s in segs]


def featurize_many(segments, method, cfg=FeatureConfig(), jobs=1):
    """Stack features of all segments into an (n, channels, length) array.

    Returns
    -------
    (ndarray, ndarray)
        Features and the ``meta`` axis (grid or bin frequencies; empty for EMD).
    """
    method = resolve_method(method)
    if not segments:
        raise ValueError("no segments to featurize")
    meta = featurize(segments[0], method, cfg).meta
    if jobs > 1 and len(segments) > jobs:
        chunks = np.array_split(np.arange(len(segments)), jobs)
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = ex.map(_featurize_chunk, [([segments[i] for i in c], method, cfg) for c in chunks])
            rows = [r for part in parts for r in part]
    else:
        rows = [featurize(s, method, cfg).data for s in segments]
    return np.stack(rows), meta


# --------------------------------------------------------------------------
# MSWTC1 feature dump

DUMP_MAGIC = b"MSWTC1"
_DUMP_HEADER = struct.Struct("<6s8sIII")


class DumpError(ValueError):
    pass


def write_feature_dump(path, method, features, meta=None):
    """Header (magic, 8-byte method tag, channels, length, count) then float32 rows.

    A sidecar ``<path>.freqs.txt`` lists the grid or bin frequencies.
    """
    method = resolve_method(method)
    arr = np.ascontiguousarray(features, dtype="<f4")
    if arr.ndim != 3:
        raise DumpError("features must be (count, channels, length)")
    count, channels, length = arr.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_DUMP_HEADER.pack(DUMP_MAGIC, method.encode("ascii").ljust(8, b"\0"),
                                   channels, length, count))
        fh.write(arr.tobytes())
    freqs = np.empty(0) if meta is None else np.asarray(meta, dtype=np.float64)
    with open(str(path) + ".freqs.txt", "w") as fh:
        for f in freqs:
            fh.write(f"{float(f)!r}\n")


def read_feature_dump(path):
    """Return ``(method, features, freqs)`` from a dump written by write_feature_dump."""
    raw = Path(path).read_bytes()
    if len(raw) < _DUMP_HEADER.size:
        raise DumpError(f"{path}: truncated header")
    magic, tag, channels, length, count = _DUMP_HEADER.unpack_from(raw)
    if magic != DUMP_MAGIC:
        raise DumpError(f"{path}: bad magic {magic!r}")
    body = raw[_DUMP_HEADER.size:]
    expected = 4 * channels * length * count
    if len(body) != expected:
        raise DumpError(f"{path}: payload has {len(body)} bytes, expected {expected}")
    feats = np.frombuffer(body, dtype="<f4").reshape(count, channels, length).copy()
    side = Path(str(path) + ".freqs.txt")
    freqs = np.loadtxt(side, ndmin=1) if side.exists() and side.stat().st_size else np.empty(0)
    return tag.rstrip(b"\0").decode("ascii"), feats, freqs
