"""Sketch similarity and quality measures.

Six measures compare a generated sketch against a reference: PSNR,
multi-scale SSIM, information entropy (of the generated sketch alone),
pixel-domain visual information fidelity, MSE, and the universal image
quality index. Corpus comparison averages each measure over all paired
sketches and emits one CSV row per sketch-generation method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ImageTooSmall, MissingReference
from .image import GrayImage, as_gray, check_same_shape

PEAK_SQ = 255.0 * 255.0

# Multi-scale SSIM constants: 11x11 Gaussian window, sigma 1.5, the usual
# five relative scale weights, stabilizers from the 255 dynamic range.
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
_C1 = (0.01 * 255.0) ** 2
_C2 = (0.03 * 255.0) ** 2

_VIF_SIGMA_N_SQ = 2.0
_VIF_EPS = 1e-10

_UQI_WINDOW = 8


@dataclass(frozen=True)
class MetricReport:
    """One row of measures; conversion_time is wall-clock seconds."""

    psnr: float
    ms_ssim: float
    ie: float
    vif: float
    mse: float
    uqi: float
    conversion_time: float = float("nan")


@dataclass(frozen=True)
class CorpusAverages:
    """Per-method averages plus bookkeeping for excluded PSNR pairs."""

    report: MetricReport
    pair_count: int
    identical_pairs: int  # pairs with MSE 0, excluded from the PSNR mean


def mse(a: GrayImage, b: GrayImage) -> float:
    a = as_gray(a)
    b = as_gray(b)
    check_same_shape(a, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr_from_mse(mse_value: float) -> float:
    """10 * log10(255^2 / mse); +inf when mse is 0."""
    if mse_value < 0:
        raise ValueError(f"mse cannot be negative, got {mse_value}")
    if mse_value == 0:
        return math.inf
    return 10.0 * math.log10(PEAK_SQ / mse_value)


def psnr(a: GrayImage, b: GrayImage) -> float:
    return psnr_from_mse(mse(a, b))


def entropy(img: GrayImage) -> float:
    """Shannon entropy in bits of the 256-bin intensity histogram."""
    hist = np.bincount(as_gray(img).ravel(), minlength=256)
    p = hist[hist > 0] / hist.sum()
    return float(-np.sum(p * np.log2(p)))


def _gaussian_1d(k: int, sigma: float) -> np.ndarray:
    x = np.arange(k, dtype=np.float64) - (k - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable correlation, valid region only."""
    k = len(g)
    h, w = img.shape
    if h < k or w < k:
        raise ImageTooSmall(f"image {img.shape} smaller than {k}x{k} window")
    rows = np.zeros((h, w - k + 1))
    for t, wgt in enumerate(g):
        rows += wgt * img[:, t:t + w - k + 1]
    out = np.zeros((h - k + 1, w - k + 1))
    for t, wgt in enumerate(g):
        out += wgt * rows[t:t + h - k + 1, :]
    return out


def _ssim_terms(a: np.ndarray, b: np.ndarray, win: np.ndarray):
    """Mean luminance and contrast-structure terms of one SSIM scale."""
    mu1 = _filter_valid(a, win)
    mu2 = _filter_valid(b, win)
    mu1_sq = mu1 * mu1
    mu2_sq = mu2 * mu2
    mu1_mu2 = mu1 * mu2
    sigma1_sq = _filter_valid(a * a, win) - mu1_sq
    sigma2_sq = _filter_valid(b * b, win) - mu2_sq
    sigma12 = _filter_valid(a * b, win) - mu1_mu2
    lum = (2.0 * mu1_mu2 + _C1) / (mu1_sq + mu2_sq + _C1)
    cs = (2.0 * sigma12 + _C2) / (sigma1_sq + sigma2_sq + _C2)
    return float(np.mean(lum)), float(np.mean(cs))


def _downsample2(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    img = img[: h - h % 2, : w - w % 2]
    return img.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def ms_ssim(a: GrayImage, b: GrayImage) -> float:
    """Five-scale structural similarity; luminance enters only at the
    coarsest scale. Requires both dimensions >= 176 so the 11-px window
    fits after four 2x downscales."""
    a = as_gray(a)
    b = as_gray(b)
    check_same_shape(a, b)
    if min(a.shape) < _SSIM_WINDOW * 2 ** (len(_MSSSIM_WEIGHTS) - 1):
        raise ImageTooSmall(
            f"ms_ssim needs at least "
            f"{_SSIM_WINDOW * 2 ** (len(_MSSSIM_WEIGHTS) - 1)} px per side, got {a.shape}"
        )
    win = _gaussian_1d(_SSIM_WINDOW, _SSIM_SIGMA)
    fa = a.astype(np.float64)
    fb = b.astype(np.float64)
    result = 1.0
    for level, weight in enumerate(_MSSSIM_WEIGHTS):
        lum, cs = _ssim_terms(fa, fb, win)
        last = level == len(_MSSSIM_WEIGHTS) - 1
        term = lum * cs if last else cs
        result *= max(term, 0.0) ** weight
        if not last:
            fa = _downsample2(fa)
            fb = _downsample2(fb)
    return float(result)


def _box_means(img: np.ndarray, k: int) -> np.ndarray:
    """Means of all k x k sliding windows via summed-area tables."""
    s = np.cumsum(np.cumsum(img, axis=0), axis=1)
    s = np.pad(s, ((1, 0), (1, 0)))
    total = s[k:, k:] - s[:-k, k:] - s[k:, :-k] + s[:-k, :-k]
    return total / (k * k)


def uqi(a: GrayImage, b: GrayImage) -> float:
    """Universal image quality index over sliding 8x8 windows."""
    a = as_gray(a)
    b = as_gray(b)
    check_same_shape(a, b)
    if min(a.shape) < _UQI_WINDOW:
        raise ImageTooSmall(f"uqi needs at least 8x8 images, got {a.shape}")
    fa = a.astype(np.float64)
    fb = b.astype(np.float64)
    k = _UQI_WINDOW
    mu1 = _box_means(fa, k)
    mu2 = _box_means(fb, k)
    sigma1 = _box_means(fa * fa, k) - mu1 * mu1
    sigma2 = _box_means(fb * fb, k) - mu2 * mu2
    sigma12 = _box_means(fa * fb, k) - mu1 * mu2
    lum_den = mu1 * mu1 + mu2 * mu2
    con_den = sigma1 + sigma2
    q = np.ones_like(mu1)
    lum_only = (con_den == 0) & (lum_den != 0)
    q[lum_only] = 2.0 * mu1[lum_only] * mu2[lum_only] / lum_den[lum_only]
    con_only = (lum_den == 0) & (con_den != 0)
    q[con_only] = 2.0 * sigma12[con_only] / con_den[con_only]
    both = (lum_den != 0) & (con_den != 0)
    # Grouped so that identical inputs give exactly 1 in floating point.
    q[both] = (4.0 * sigma12[both]) * (mu1[both] * mu2[both]) \
        / (con_den[both] * lum_den[both])
    return float(np.mean(q))


def vif(reference: GrayImage, distorted: GrayImage) -> float:
    """Pixel-domain visual information fidelity (reference first).

    Four scales; at each, Gaussian-window local statistics feed a
    gain/noise decomposition whose information totals are ratioed.
    """
    ref = as_gray(reference).astype(np.float64)
    dist = as_gray(distorted).astype(np.float64)
    check_same_shape(ref, dist)
    num = 0.0
    den = 0.0
    for scale in range(1, 5):
        k = 2 ** (4 - scale + 1) + 1
        win = _gaussian_1d(k, k / 5.0)
        if scale > 1:
            ref = _filter_valid(ref, win)[::2, ::2]
            dist = _filter_valid(dist, win)[::2, ::2]
        mu1 = _filter_valid(ref, win)
        mu2 = _filter_valid(dist, win)
        sigma1_sq = np.maximum(_filter_valid(ref * ref, win) - mu1 * mu1, 0.0)
        sigma2_sq = np.maximum(_filter_valid(dist * dist, win) - mu2 * mu2, 0.0)
        sigma12 = _filter_valid(ref * dist, win) - mu1 * mu2

        g = sigma12 / (sigma1_sq + _VIF_EPS)
        sv_sq = sigma2_sq - g * sigma12

        flat_ref = sigma1_sq < _VIF_EPS
        g[flat_ref] = 0.0
        sv_sq[flat_ref] = sigma2_sq[flat_ref]
        flat_dist = sigma2_sq < _VIF_EPS
        g[flat_dist] = 0.0
        sv_sq[flat_dist] = 0.0
        neg = g < 0.0
        sv_sq[neg] = sigma2_sq[neg]
        g[neg] = 0.0
        sv_sq = np.maximum(sv_sq, _VIF_EPS)

        num += float(np.sum(np.log2(
            1.0 + g * g * sigma1_sq / (sv_sq + _VIF_SIGMA_N_SQ))))
        den += float(np.sum(np.log2(1.0 + sigma1_sq / _VIF_SIGMA_N_SQ)))
    if den == 0.0:
        return 0.0
    return num / den


def compare_pair(generated: GrayImage, reference: GrayImage,
                 conversion_time: float = float("nan")) -> MetricReport:
    """All six measures for one generated/reference sketch pair."""
    return MetricReport(
        psnr=psnr(generated, reference),
        ms_ssim=ms_ssim(generated, reference),
        ie=entropy(generated),
        vif=vif(reference, generated),
        mse=mse(generated, reference),
        uqi=uqi(generated, reference),
        conversion_time=conversion_time,
    )


def average_metrics(generated, reference, conversion_times=None) -> CorpusAverages:
    """Average each measure over all model-id-paired sketches.

    generated / reference map model_id to image. Every generated id must
    have a reference. Pairs with MSE 0 are excluded from the PSNR mean
    (their PSNR is the +inf sentinel) and counted separately.
    """
    missing = set(generated) - set(reference)
    if missing:
        raise MissingReference(missing)
    if not generated:
        raise ValueError("no generated sketches to compare")
    times = conversion_times or {}
    sums = {"ms_ssim": 0.0, "ie": 0.0, "vif": 0.0, "mse": 0.0, "uqi": 0.0}
    psnr_sum = 0.0
    psnr_n = 0
    identical = 0
    time_sum = 0.0
    time_n = 0
    for model_id in sorted(generated):
        rep = compare_pair(generated[model_id], reference[model_id])
        if math.isinf(rep.psnr):
            identical += 1
        else:
            psnr_sum += rep.psnr
            psnr_n += 1
        sums["ms_ssim"] += rep.ms_ssim
        sums["ie"] += rep.ie
        sums["vif"] += rep.vif
        sums["mse"] += rep.mse
        sums["uqi"] += rep.uqi
        if model_id in times:
            time_sum += times[model_id]
            time_n += 1
    n = len(generated)
    report = MetricReport(
        psnr=psnr_sum / psnr_n if psnr_n else math.inf,
        ms_ssim=sums["ms_ssim"] / n,
        ie=sums["ie"] / n,
        vif=sums["vif"] / n,
        mse=sums["mse"] / n,
        uqi=sums["uqi"] / n,
        conversion_time=time_sum / time_n if time_n else float("nan"),
    )
    return CorpusAverages(report=report, pair_count=n, identical_pairs=identical)


def compare_corpus(methods, reference, conversion_times=None):
    """Per-method averages: methods maps method name to its generated
    sketch set; conversion_times (optional) maps method name to a
    per-model timing dict. Returns {method: CorpusAverages}."""
    table = {}
    for name in sorted(methods):
        times = (conversion_times or {}).get(name)
        table[name] = average_metrics(methods[name], reference, times)
    return table


METRICS_CSV_HEADER = ("Sketch-generation method,PSNR,MS-SSIM,IE,VIF,MSE,UQI,"
                      "Conversion time (Per image in sec)")


def metrics_csv(table) -> str:
    """Render a {method: CorpusAverages} table as CSV text."""
    lines = [METRICS_CSV_HEADER]
    for name in sorted(table):
        r = table[name].report
        psnr_txt = "inf" if math.isinf(r.psnr) else f"{r.psnr:.4f}"
        time_txt = "" if math.isnan(r.conversion_time) else f"{r.conversion_time:.4f}"
        lines.append(
            f"{name},{psnr_txt},{r.ms_ssim:.4f},{r.ie:.4f},{r.vif:.4f},"
            f"{r.mse:.4f},{r.uqi:.4f},{time_txt}"
        )
    return "\n".join(lines) + "\n"
