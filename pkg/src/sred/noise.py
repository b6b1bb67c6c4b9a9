"""Synthetic sensor-style corruption of clean rendered depth.

Three seeded stages: (1) drop pixels whose surface normal is nearly
perpendicular to the view direction, (2) resample at Gaussian-jittered
subpixel positions, (3) add Gaussian noise in inverse-depth (disparity)
space and quantize, which makes errors grow quadratically with distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import DepthFrame
from .registration import CameraRig


@dataclass(frozen=True)
class NoiseConfig:
    sigma_base: float = 0.5  # disparity-noise standard deviation
    q_step: float = 1.0 / 8.0  # disparity quantization step
    sigma_s: float = 0.5  # resampling jitter, px
    theta_max_deg: float = 80.0  # dropout angle threshold
    k_disparity: float = 35130.0  # disparity = k / depth_mm
    seed: int = 0

    def __post_init__(self):
        if self.sigma_base < 0:
            raise ValueError("sigma_base must be >= 0")
        if self.q_step <= 0:
            raise ValueError("q_step must be > 0")
        if self.sigma_s < 0:
            raise ValueError("sigma_s must be >= 0")
        if not (0.0 < self.theta_max_deg < 90.0):
            raise ValueError("theta_max_deg must be in (0, 90)")
        if self.k_disparity <= 0:
            raise ValueError("k_disparity must be > 0")


def _backproject_grid(depth: DepthFrame, rig: CameraRig):
    h, w = depth.data.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    z = depth.data.astype(np.float64)
    fx, fy = rig.f_d
    cx, cy = rig.c_d
    pts = np.stack([(xs - cx) * z / fx, (ys - cy) * z / fy, z], axis=-1)
    return pts, z > 0


def estimate_normals(depth: DepthFrame, rig: CameraRig):
    """Per-pixel unit normals oriented toward the camera.

    Computed from the cross product of central-difference tangents of the
    back-projected surface; pixels whose four axial neighbors are not all
    valid (holes or image border) are marked invalid.

    Returns (normals, valid): (H, W, 3) float64 and a bool mask.
    """
    pts, pvalid = _backproject_grid(depth, rig)
    h, w = pvalid.shape
    normals = np.zeros((h, w, 3), dtype=np.float64)
    valid = np.zeros((h, w), dtype=bool)
    if h < 3 or w < 3:
        return normals, valid

    inner = np.zeros_like(pvalid)
    inner[1:-1, 1:-1] = (
        pvalid[1:-1, 1:-1]
        & pvalid[1:-1, 2:] & pvalid[1:-1, :-2] & pvalid[2:, 1:-1] & pvalid[:-2, 1:-1]
    )
    tx = np.zeros_like(pts)
    ty = np.zeros_like(pts)
    tx[1:-1, 1:-1] = pts[1:-1, 2:] - pts[1:-1, :-2]
    ty[1:-1, 1:-1] = pts[2:, 1:-1] - pts[:-2, 1:-1]

    n = np.cross(tx.reshape(-1, 3), ty.reshape(-1, 3)).reshape(h, w, 3)
    length = np.linalg.norm(n, axis=-1)
    ok = inner & (length > 0)
    n[ok] /= length[ok][..., None]
    # Face the camera: flip normals pointing away from it.
    away = (n * pts).sum(axis=-1) > 0
    n[ok & away] *= -1.0
    normals[ok] = n[ok]
    valid = ok
    return normals, valid


def view_angles(depth: DepthFrame, rig: CameraRig):
    """Angle (degrees) between each surface normal and the direction from the
    surface point back to the camera; NaN where the normal is invalid."""
    normals, nvalid = estimate_normals(depth, rig)
    pts, _ = _backproject_grid(depth, rig)
    length = np.linalg.norm(pts, axis=-1)
    length = np.where(length > 0, length, 1.0)
    to_cam = -pts / length[..., None]
    cosang = np.clip((normals * to_cam).sum(axis=-1), -1.0, 1.0)
    ang = np.degrees(np.arccos(cosang))
    ang[~nvalid] = np.nan
    return ang, nvalid


def _bilinear_resample_depth(z: np.ndarray, valid: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Bilinear depth lookup at continuous positions; a sample is valid only
    if every corner carrying nonzero weight is a valid in-bounds pixel."""
    h, w = z.shape
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0

    out = np.zeros_like(z)
    ok = np.ones_like(valid)
    weights = ((1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy)
    offsets = ((0, 0), (0, 1), (1, 0), (1, 1))
    for (oy, ox), wgt in zip(offsets, weights):
        cx = x0 + ox
        cy = y0 + oy
        used = wgt > 0
        inb = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        cxc = np.clip(cx, 0, w - 1)
        cyc = np.clip(cy, 0, h - 1)
        ok &= ~used | (inb & valid[cyc, cxc])
        out += np.where(used & inb, wgt * z[cyc, cxc], 0.0)
    return out, ok


def corrupt(depth: DepthFrame, rig: CameraRig, cfg: NoiseConfig = NoiseConfig()) -> DepthFrame:
    """Apply the full corruption model; deterministic under cfg.seed.

    Input holes always stay holes; new holes come only from the
    normal-angle dropout (and from jittered samples straddling invalid
    pixels when sigma_s > 0).
    """
    rng = np.random.default_rng(cfg.seed)
    h, w = depth.data.shape
    z = depth.data.astype(np.float64)
    valid = z > 0

    # 1. Drop grazing-angle pixels.
    ang, nvalid = view_angles(depth, rig)
    drop = nvalid & (ang > cfg.theta_max_deg)
    valid = valid & ~drop
    z = np.where(valid, z, 0.0)

    # 2. Subpixel jitter via bilinear resampling.
    jitter = rng.normal(0.0, cfg.sigma_s, size=(2, h, w))
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    z, ok = _bilinear_resample_depth(z, valid, xs + jitter[0], ys + jitter[1])
    valid = valid & ok
    z = np.where(valid, z, 0.0)

    # 3. Disparity-space noise and quantization.
    noise = rng.normal(0.0, cfg.sigma_base, size=(h, w))
    disp = np.where(valid, cfg.k_disparity / np.where(valid, z, 1.0), 0.0)
    disp = disp + noise
    disp = np.rint(disp / cfg.q_step) * cfg.q_step
    good = valid & (disp > 0)
    z_out = np.where(good, cfg.k_disparity / np.where(good, disp, 1.0), 0.0)

    out = np.clip(np.rint(z_out), 0, 65535).astype(np.uint16)
    out[~good] = 0
    return DepthFrame(out)
