"""Restoration quality metrics on [0, 1]-normalized depth.

Reference metrics (mse/psnr) are evaluated over pixels valid in both frames;
ssim and the no-reference score operate on the raw normalized data. The
temporal metric is reported both as mean absolute inter-frame difference
(ranks stability) and as the signed mean (oscillations cancel; emitted for
transparency).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError
from .frames import NormalizedFrame

SSIM_C1 = 0.01 ** 2  # (k1 L)^2 for unit dynamic range
SSIM_C2 = 0.03 ** 2
SSIM_WINDOW = 8
NMID_BLOCK = 8


def _check_pair(a: NormalizedFrame, b: NormalizedFrame):
    if a.data.shape != b.data.shape:
        raise DataError(f"frame dims differ: {a.data.shape} vs {b.data.shape}")


def mse(a: NormalizedFrame, b: NormalizedFrame) -> float:
    """Mean squared difference over jointly-valid pixels."""
    _check_pair(a, b)
    joint = a.mask & b.mask
    if not joint.any():
        raise DataError("mse undefined: no jointly-valid pixels")
    d = a.data.astype(np.float64)[joint] - b.data.astype(np.float64)[joint]
    return float(np.mean(d * d))


def psnr(a: NormalizedFrame, b: NormalizedFrame) -> float:
    """Peak signal-to-noise ratio in dB for unit range; +inf when mse == 0."""
    m = mse(a, b)
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / m)


def _ssim_stats(a: np.ndarray, b: np.ndarray, window: int):
    """Per-window means/variances/covariance over sliding windows."""
    wa = sliding_window_view(a, (window, window))
    wb = sliding_window_view(b, (window, window))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = (wa * wa).mean(axis=(-2, -1)) - mu_a * mu_a
    var_b = (wb * wb).mean(axis=(-2, -1)) - mu_b * mu_b
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    return mu_a, mu_b, var_a, var_b, cov


def _ssim_formula(mu_a, mu_b, var_a, var_b, cov):
    return ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)) / (
        (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    )


def ssim(a: NormalizedFrame, b: NormalizedFrame, window: int = SSIM_WINDOW) -> float:
    """Mean local structural similarity over sliding square windows."""
    _check_pair(a, b)
    if a.data.shape[0] < window or a.data.shape[1] < window:
        raise DataError(f"image smaller than one {window}x{window} window")
    stats = _ssim_stats(a.data.astype(np.float64), b.data.astype(np.float64), window)
    return float(np.mean(_ssim_formula(*stats)))


def nmid(noisy: NormalizedFrame, restored: NormalizedFrame, block: int = NMID_BLOCK) -> float:
    """No-reference denoising score.

    Non-overlapping blocks of the noisy input are classified by local
    variance into homogeneous (bottom quartile) and highly-structured (top
    quartile); the score is the mean noisy-vs-restored block SSIM over
    structured blocks minus the mean over homogeneous blocks. Identity
    restoration scores 0; negative values are possible. Degenerate
    classification (no variance spread) returns 0 with a warning.
    """
    _check_pair(noisy, restored)
    h, w = noisy.data.shape
    nb_r, nb_c = h // block, w // block
    if nb_r == 0 or nb_c == 0:
        raise DataError(f"image smaller than one {block}x{block} block")

    x = noisy.data.astype(np.float64)[: nb_r * block, : nb_c * block]
    y = restored.data.astype(np.float64)[: nb_r * block, : nb_c * block]
    bx = x.reshape(nb_r, block, nb_c, block).transpose(0, 2, 1, 3)
    by = y.reshape(nb_r, block, nb_c, block).transpose(0, 2, 1, 3)

    mu_x = bx.mean(axis=(-2, -1))
    mu_y = by.mean(axis=(-2, -1))
    var_x = (bx * bx).mean(axis=(-2, -1)) - mu_x * mu_x
    var_y = (by * by).mean(axis=(-2, -1)) - mu_y * mu_y
    cov = (bx * by).mean(axis=(-2, -1)) - mu_x * mu_y

    lo, hi = np.quantile(var_x, [0.25, 0.75])
    if lo == hi:
        warnings.warn("nmid: degenerate block classification, returning 0")
        return 0.0
    homogeneous = var_x <= lo
    structured = var_x >= hi
    block_ssim = _ssim_formula(mu_x, mu_y, var_x, var_y, cov)
    return float(np.mean(block_ssim[structured]) - np.mean(block_ssim[homogeneous]))


def temporal(frames: Sequence[NormalizedFrame]) -> float:
    """Mean absolute per-pixel inter-frame difference, averaged over pairs."""
    if len(frames) < 2:
        raise DataError("temporal metric needs at least 2 frames")
    vals = []
    for prev, cur in zip(frames[:-1], frames[1:]):
        _check_pair(prev, cur)
        vals.append(
            float(np.mean(np.abs(cur.data.astype(np.float64) - prev.data.astype(np.float64))))
        )
    return float(np.mean(vals))


def temporal_signed(frames: Sequence[NormalizedFrame]) -> float:
    """Signed variant: mean(I_{t+1} - I_t) averaged over pairs."""
    if len(frames) < 2:
        raise DataError("temporal metric needs at least 2 frames")
    vals = []
    for prev, cur in zip(frames[:-1], frames[1:]):
        _check_pair(prev, cur)
        vals.append(float(np.mean(cur.data.astype(np.float64) - prev.data.astype(np.float64))))
    return float(np.mean(vals))


@dataclass
class FrameMetrics:
    frame_index: int
    mse: Optional[float] = None
    psnr_db: Optional[float] = None
    ssim: Optional[float] = None
    nmid: Optional[float] = None
    temporal_abs: Optional[float] = None
    temporal_signed: Optional[float] = None
    holes_in: Optional[int] = None
    holes_out: Optional[int] = None


@dataclass
class MetricReport:
    """Per-frame values plus their mean for one method on one dataset."""

    method: str
    dataset: str
    frames: list = field(default_factory=list)

    def aggregate(self) -> FrameMetrics:
        agg = FrameMetrics(frame_index=-1)
        for name in ("mse", "psnr_db", "ssim", "nmid", "temporal_abs", "temporal_signed"):
            vals = [getattr(f, name) for f in self.frames if getattr(f, name) is not None]
            if vals:
                setattr(agg, name, float(np.mean(vals)))
        for name in ("holes_in", "holes_out"):
            vals = [getattr(f, name) for f in self.frames if getattr(f, name) is not None]
            if vals:
                setattr(agg, name, int(np.mean(vals)))
        return agg


REPORT_COLUMNS = (
    "method", "dataset", "frame_index", "mse", "psnr_db", "ssim", "nmid",
    "temporal_abs", "temporal_signed", "holes_in", "holes_out",
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def write_report_csv(reports: Sequence[MetricReport], path, seed: Optional[int] = None) -> None:
    """Emit the benchmark-shaped CSV: per-frame rows plus a mean row per
    method (frame_index column = 'mean')."""
    with open(path, "w", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for rep in reports:
            for fm in rep.frames:
                writer.writerow(
                    [rep.method, rep.dataset, fm.frame_index]
                    + [_fmt(getattr(fm, k)) for k in REPORT_COLUMNS[3:]]
                )
            agg = rep.aggregate()
            writer.writerow(
                [rep.method, rep.dataset, "mean"]
                + [_fmt(getattr(agg, k)) for k in REPORT_COLUMNS[3:]]
            )
