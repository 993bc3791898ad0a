"""Empirical mode decomposition and the 4-channel IMF feature baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .spectral_features import EMD, FeatureTensor


@dataclass(frozen=True)
class EmdConfig:
    max_imfs: int = 3
    sd_threshold: float = 0.2
    max_sift_iters: int = 10
    boundary: str = "mirror"
    weights: tuple = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self):
        if self.max_imfs < 1 or self.sd_threshold <= 0 or self.max_sift_iters < 1:
            raise ValueError("EMD settings must be positive")
        if self.boundary != "mirror":
            raise ValueError(f"unsupported boundary {self.boundary!r}")


@dataclass
class Imf:
    values: np.ndarray
    index: int


def local_extrema(x):
    """Indices of local maxima and minima (plateaus count once, at their centre)."""
    x = np.asarray(x)
    d = np.diff(x)
    # drop flat steps so plateaus behave like single points
    nz = np.flatnonzero(d != 0)
    if nz.size < 2:
        return np.empty(0, int), np.empty(0, int)
    s = np.sign(d[nz])
    turn = np.flatnonzero(s[1:] != s[:-1])
    left = nz[turn] + 1
    right = nz[turn + 1]
    idx = (left + right) // 2
    is_max = s[turn] > 0
    return idx[is_max], idx[~is_max]


def zero_crossings(x):
    x = np.asarray(x)
    sgn = np.sign(x)
    sgn = sgn[sgn != 0]
    return int(np.count_nonzero(sgn[1:] != sgn[:-1]))


def _mirror_knots(idx, x, n, n_side=2):
    # reflect the first/last `n_side` extrema about the signal ends
    t = idx.astype(float)
    left = -t[:n_side][::-1]
    right = 2 * (n - 1) - t[-n_side:][::-1]
    knots = np.concatenate([left, t, right])
    vals = np.concatenate([x[idx[:n_side]][::-1], x[idx], x[idx[-n_side:]][::-1]])
    knots, keep = np.unique(knots, return_index=True)
    return knots, vals[keep]


def envelope(idx, x):
    n = x.size
    knots, vals = _mirror_knots(idx, x, n)
    return CubicSpline(knots, vals, bc_type="not-a-knot")(np.arange(n))


def _can_sift(x):
    mx, mn = local_extrema(x)
    return mx.size >= 2 and mn.size >= 2 and mx.size + mn.size >= 4


def sift(x, cfg):
    h = x.copy()
    for _ in range(cfg.max_sift_iters):
        mx, mn = local_extrema(h)
        if mx.size < 2 or mn.size < 2:
            break
        mean = 0.5 * (envelope(mx, h) + envelope(mn, h))
        h_new = h - mean
        denom = np.sum(h ** 2)
        sd = np.sum((h - h_new) ** 2) / denom if denom > 0 else 0.0
        h = h_new
        if sd < cfg.sd_threshold:
            break
    return h


def emd(segment, cfg=EmdConfig()):
    """Decompose a segment into at most ``cfg.max_imfs`` IMFs plus a residual.

    Envelopes are cubic splines through the extrema, with two extrema
    mirrored past each end. Sifting stops on the Cauchy SD criterion or after
    ``max_sift_iters``; decomposition stops at ``max_imfs`` or when the
    residual has too few extrema to sift.

    Returns
    -------
    (list of Imf, ndarray)
    """
    x = np.asarray(getattr(segment, "samples", segment), dtype=np.float64)
    residual = x.copy()
    imfs = []
    while len(imfs) < cfg.max_imfs and _can_sift(residual):
        h = sift(residual, cfg)
        imfs.append(Imf(h, len(imfs) + 1))
        residual = residual - h
    return imfs, residual


def emd_features(segment, cfg=EmdConfig()):
    """Channels: IMF1, IMF2, IMF3 (zeros when missing) and their weighted sum."""
    x = np.asarray(getattr(segment, "samples", segment), dtype=np.float64)
    imfs, _ = emd(x, cfg)
    out = np.zeros((4, x.size))
    for imf in imfs[:3]:
        out[imf.index - 1] = imf.values
    w = np.asarray(cfg.weights, dtype=np.float64)
    out[3] = w @ out[:3]
    return FeatureTensor(EMD, out)


def imf_energies(imfs):
    """Per-IMF energy, used only for plotting."""
    return np.array([np.sum(imf.values ** 2) for imf in imfs])
