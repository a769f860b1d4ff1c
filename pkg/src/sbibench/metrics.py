"""Accuracy metrics comparing a computed background against a reference.

All eight metrics score a (reference, estimate) image pair.  Gray-level
metrics (AGE, error-pixel counts, PSNR, MS-SSIM) are computed on the
luminance channel when given color input; CQM is defined for color pairs
only.  Integer quantities are accumulated exactly and divided once, so
every metric is deterministic regardless of pixel visiting order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .seqio import channels_of, luminance, rct_forward, validate_image

# The classic five-scale similarity weights sum to 1.0001 as printed; they
# are normalized here so the weight vector sums to exactly 1.
_RAW_MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
DEFAULT_MSSSIM_WEIGHTS = tuple(w / sum(_RAW_MSSSIM_WEIGHTS) for w in _RAW_MSSSIM_WEIGHTS)

GRAY_LEVELS = 256  # L; peak signal level is L - 1


@dataclass(frozen=True)
class MetricConfig:
    """Tunables shared by the metric suite.

    tau is the gray-level error threshold; the msssim_* fields configure the
    multiscale similarity (scales, per-scale exponent weights, Gaussian
    window side and sigma, stabilizers); cqm_rw/cqm_cw weight the luminance
    and chrominance band PSNRs and must sum to 1.
    """

    tau: int = 20
    msssim_scales: int = 5
    msssim_weights: tuple = DEFAULT_MSSSIM_WEIGHTS
    msssim_window: int = 11
    msssim_sigma: float = 1.5
    msssim_k1: float = 0.01
    msssim_k2: float = 0.03
    cqm_rw: float = 0.9449
    cqm_cw: float = 0.0551
    band_peak: int = 255

    def __post_init__(self):
        if not 0 <= self.tau <= 255:
            raise ValueError(f"tau must lie in [0, 255], got {self.tau}")
        if self.msssim_scales < 1:
            raise ValueError("need at least one similarity scale")
        if len(self.msssim_weights) != self.msssim_scales:
            raise ValueError("msssim_weights must have one entry per scale")
        if abs(sum(self.msssim_weights) - 1.0) > 1e-9:
            raise ValueError("msssim_weights must sum to 1")
        if abs(self.cqm_rw + self.cqm_cw - 1.0) > 1e-9:
            raise ValueError("cqm_rw + cqm_cw must equal 1")
        if self.msssim_window < 1 or self.msssim_sigma <= 0:
            raise ValueError("bad similarity window")


DEFAULT_CONFIG = MetricConfig()


@dataclass(frozen=True)
class MetricReport:
    """The eight metric values for one (reference, estimate) pair.

    cqm is None when the pair is 1-channel.  psnr and cqm may be +inf for
    perfect (sub)bands.
    """

    age: float
    eps: int
    p_eps: float
    ceps: int
    p_ceps: float
    psnr: float
    ms_ssim: float
    cqm: float | None


def _pair(gt, cb) -> tuple[np.ndarray, np.ndarray]:
    gt, cb = validate_image(gt), validate_image(cb)
    if gt.shape != cb.shape:
        raise ValueError(f"image shapes differ: {gt.shape} vs {cb.shape}")
    return gt, cb


# ---------------------------------------------------------------------------
# gray-level difference metrics

def age(gt, cb) -> float:
    """Average absolute gray-level difference, in [0, 255]."""
    gt, cb = _pair(gt, cb)
    return _age_lum(luminance(gt), luminance(cb))


def _age_lum(a, b) -> float:
    diff = np.abs(a.astype(np.int64) - b.astype(np.int64))
    return int(diff.sum()) / diff.size


def error_mask(gt, cb, tau: int = DEFAULT_CONFIG.tau) -> np.ndarray:
    """Boolean mask of pixels whose luminance differs by strictly more
    than tau gray levels."""
    gt, cb = _pair(gt, cb)
    return _error_mask_lum(luminance(gt), luminance(cb), tau)


def _error_mask_lum(a, b, tau) -> np.ndarray:
    return np.abs(a.astype(np.int16) - b.astype(np.int16)) > tau


def eps(gt, cb, tau: int = DEFAULT_CONFIG.tau) -> int:
    """Number of error pixels."""
    return int(error_mask(gt, cb, tau).sum())


def p_eps(gt, cb, tau: int = DEFAULT_CONFIG.tau) -> float:
    """Error pixels as a fraction of all pixels."""
    mask = error_mask(gt, cb, tau)
    return int(mask.sum()) / mask.size


def _ceps_from_mask(mask: np.ndarray) -> int:
    # A clustered error pixel has all four 4-neighbors in bounds and in
    # error; border pixels therefore never qualify.
    if mask.shape[0] < 3 or mask.shape[1] < 3:
        return 0
    core = mask[1:-1, 1:-1]
    clustered = (core
                 & mask[:-2, 1:-1] & mask[2:, 1:-1]
                 & mask[1:-1, :-2] & mask[1:-1, 2:])
    return int(clustered.sum())


def ceps(gt, cb, tau: int = DEFAULT_CONFIG.tau) -> int:
    """Number of clustered error pixels (error pixels whose four neighbors
    are all error pixels)."""
    return _ceps_from_mask(error_mask(gt, cb, tau))


def p_ceps(gt, cb, tau: int = DEFAULT_CONFIG.tau) -> float:
    """Clustered error pixels as a fraction of all pixels."""
    mask = error_mask(gt, cb, tau)
    return _ceps_from_mask(mask) / mask.size


# ---------------------------------------------------------------------------
# PSNR

def psnr(gt, cb) -> float:
    """Peak signal-to-noise ratio over luminance, in dB; +inf when equal."""
    gt, cb = _pair(gt, cb)
    return _psnr_lum(luminance(gt), luminance(cb))


def _mse_int(a, b) -> float:
    diff = a.astype(np.int64) - b.astype(np.int64)
    return int((diff * diff).sum()) / diff.size


def _psnr_of_mse(mse: float, peak: int) -> float:
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _psnr_lum(a, b) -> float:
    return _psnr_of_mse(_mse_int(a, b), GRAY_LEVELS - 1)


# ---------------------------------------------------------------------------
# multiscale structural similarity

def _gaussian_window(side: int, sigma: float) -> np.ndarray:
    offsets = np.arange(side) - (side - 1) / 2.0
    g = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    win = np.outer(g, g)
    return win / win.sum()


def _ssim_maps(x, y, window, c1, c2):
    """Luminance and contrast-structure maps over all fully covered window
    positions (valid-mode windowing)."""
    mu_x = convolve2d(x, window, mode="valid")
    mu_y = convolve2d(y, window, mode="valid")
    var_x = convolve2d(x * x, window, mode="valid") - mu_x * mu_x
    var_y = convolve2d(y * y, window, mode="valid") - mu_y * mu_y
    cov = convolve2d(x * y, window, mode="valid") - mu_x * mu_y
    lum = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    cs = (2.0 * cov + c2) / (var_x + var_y + c2)
    return lum, cs


def _halve(x: np.ndarray) -> np.ndarray:
    """Low-pass (2x2 box) and 2x subsample; odd trailing rows/cols drop."""
    h, w = x.shape
    x = x[:h - h % 2, :w - w % 2]
    return 0.25 * (x[0::2, 0::2] + x[0::2, 1::2] + x[1::2, 0::2] + x[1::2, 1::2])


def feasible_scales(height: int, width: int, window: int, max_scales: int) -> int:
    """How many dyadic scales keep the image at least one window wide."""
    m = 0
    while m < max_scales and min(height, width) >= window:
        m += 1
        height //= 2
        width //= 2
    return m


def ms_ssim(gt, cb, cfg: MetricConfig = DEFAULT_CONFIG) -> float:
    """Multiscale structural similarity on luminance, in [0, 1].

    Contrast/structure terms are averaged at every scale and the luminance
    term at the coarsest; the per-scale means are combined with exponent
    weights.  When the image is too small for the configured scale count,
    the scale count drops to the largest feasible one and the weights are
    renormalized.  Negative per-scale means clamp to 0 before weighting and
    the result clamps into [0, 1].
    """
    gt, cb = _pair(gt, cb)
    return _ms_ssim_lum(luminance(gt), luminance(cb), cfg)


def _ms_ssim_lum(a, b, cfg: MetricConfig) -> float:
    x = a.astype(np.float64)
    y = b.astype(np.float64)
    if min(x.shape) < cfg.msssim_window:
        raise ValueError(
            f"image {x.shape} is smaller than one {cfg.msssim_window}-pixel window")
    m = feasible_scales(x.shape[0], x.shape[1], cfg.msssim_window, cfg.msssim_scales)
    weights = np.asarray(cfg.msssim_weights[:m], dtype=np.float64)
    weights = weights / weights.sum()
    window = _gaussian_window(cfg.msssim_window, cfg.msssim_sigma)
    peak = GRAY_LEVELS - 1
    c1 = (cfg.msssim_k1 * peak) ** 2
    c2 = (cfg.msssim_k2 * peak) ** 2

    means = []
    for scale in range(m):
        lum, cs = _ssim_maps(x, y, window, c1, c2)
        if scale == m - 1:
            means.append(float(np.mean(lum * cs)))
        else:
            means.append(float(np.mean(cs)))
            x = _halve(x)
            y = _halve(y)
    value = 1.0
    for mean, w in zip(means, weights):
        value *= max(mean, 0.0) ** w
    return min(max(value, 0.0), 1.0)


# ---------------------------------------------------------------------------
# color quality (band-PSNR combination over the reversible transform)

def cqm(gt, cb, cfg: MetricConfig = DEFAULT_CONFIG) -> float:
    """Weighted combination of PSNRs over the reversible Y/U/V bands, in dB.

    +inf when every band is identical (and, by IEEE arithmetic, whenever a
    positively weighted band is identical).
    """
    gt, cb = _pair(gt, cb)
    if channels_of(gt) != 3:
        raise ValueError("color quality metric needs 3-channel images")
    return _cqm_planes(rct_forward(gt), rct_forward(cb), cfg)


def _cqm_planes(pa, pb, cfg: MetricConfig) -> float:
    peak = cfg.band_peak
    psnr_y = _psnr_of_mse(_mse_int(pa.y, pb.y), peak)
    total = 0.0
    if cfg.cqm_rw:
        total += cfg.cqm_rw * psnr_y
    if cfg.cqm_cw:
        psnr_u = _psnr_of_mse(_mse_int(pa.u, pb.u), peak)
        psnr_v = _psnr_of_mse(_mse_int(pa.v, pb.v), peak)
        total += cfg.cqm_cw * 0.5 * (psnr_u + psnr_v)
    return total


# ---------------------------------------------------------------------------
# the full report

def compute_all(gt, cb, cfg: MetricConfig = DEFAULT_CONFIG) -> MetricReport:
    """Evaluate all eight metrics on one pair (luminance computed once)."""
    gt, cb = _pair(gt, cb)
    if channels_of(gt) != channels_of(cb):
        raise ValueError("images must have the same channel count")
    a, b = luminance(gt), luminance(cb)
    mask = _error_mask_lum(a, b, cfg.tau)
    n = mask.size
    n_eps = int(mask.sum())
    n_ceps = _ceps_from_mask(mask)
    return MetricReport(
        age=_age_lum(a, b),
        eps=n_eps,
        p_eps=n_eps / n,
        ceps=n_ceps,
        p_ceps=n_ceps / n,
        psnr=_psnr_lum(a, b),
        ms_ssim=_ms_ssim_lum(a, b, cfg),
        cqm=_cqm_planes(rct_forward(gt), rct_forward(cb), cfg) if channels_of(gt) == 3 else None,
    )
