"""RGB-D registration: map depth pixels into the color camera and build a
color image resampled onto the depth grid, with hole smoothing.

Pipeline per valid depth pixel: back-project to a 3-D point in the depth
camera, apply the inverse rigid transform into the color camera, perspective
project, and sample the color image bilinearly. Pixels with no projected
color (depth holes, out-of-FoV, degenerate z) are filled from their nearest
covered neighbor and blurred for smooth transitions.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import cv2
import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import DataError, FormatError
from .frames import ColorFrame, DepthFrame

# Projection depth guard: points closer than this to the color image plane
# are discarded rather than divided through.
EPS_Z_MM = 1.0

# Hole-fill smoothing: box blur size and number of passes.
FILL_BLUR_SIZE = 5
FILL_BLUR_PASSES = 2


@dataclass(frozen=True)
class CameraRig:
    """Intrinsics of the depth and color cameras plus the rigid transform
    between them (rotation R, translation T in mm)."""

    f_d: tuple  # (fx, fy) depth focal lengths, px
    c_d: tuple  # (cx, cy) depth principal point, px
    f_rgb: tuple
    c_rgb: tuple
    R: np.ndarray  # (3, 3) rotation, color -> depth orientation
    T: np.ndarray  # (3,) translation, mm
    depth_size: tuple  # (W_d, H_d)
    rgb_size: tuple  # (W_rgb, H_rgb)

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        T = np.asarray(self.T, dtype=np.float64).reshape(3)
        if np.abs(R.T @ R - np.eye(3)).max() >= 1e-6:
            raise DataError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) >= 1e-6:
            raise DataError("rotation matrix determinant must be 1")
        for f in (*self.f_d, *self.f_rgb):
            if f <= 0:
                raise DataError("focal lengths must be strictly positive")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "T", T)

    @cached_property
    def R_inv(self) -> np.ndarray:
        return np.linalg.inv(self.R)

    @classmethod
    def identity(cls, width: int, height: int, f: float = 500.0) -> "CameraRig":
        """Degenerate rig with coincident cameras; registration becomes the
        identity on color wherever depth is valid."""
        c = ((width - 1) / 2.0, (height - 1) / 2.0)
        return cls(
            f_d=(f, f), c_d=c, f_rgb=(f, f), c_rgb=c,
            R=np.eye(3), T=np.zeros(3),
            depth_size=(width, height), rgb_size=(width, height),
        )


@dataclass(frozen=True)
class RegisteredColor:
    """Color resampled onto the depth grid; coverage is True where the value
    came from projection (False where it was hole-filled)."""

    color: ColorFrame
    coverage: np.ndarray  # (H_d, W_d) bool

    def __post_init__(self):
        cov = np.asarray(self.coverage, dtype=bool)
        if cov.shape != (self.color.height, self.color.width):
            raise DataError("coverage mask must match color dimensions")
        object.__setattr__(self, "coverage", cov)


def backproject(pixel, depth_mm, rig: CameraRig) -> np.ndarray:
    """Lift depth pixel(s) (x_d, y_d) with depth z_d to 3-D points
    ((x - cx) z / fx, (y - cy) z / fy, z) in the depth camera frame."""
    x, y = np.asarray(pixel[0], dtype=np.float64), np.asarray(pixel[1], dtype=np.float64)
    z = np.asarray(depth_mm, dtype=np.float64)
    if np.any(z <= 0):
        raise ValueError("backproject requires strictly positive depth")
    fx, fy = rig.f_d
    cx, cy = rig.c_d
    return np.stack([(x - cx) * z / fx, (y - cy) * z / fy, z], axis=-1)


def to_rgb_camera(points, rig: CameraRig) -> np.ndarray:
    """Rigid transform from the depth camera frame into the color camera
    frame: X'_rgb = R^-1 (X'_d - T)."""
    pts = np.asarray(points, dtype=np.float64)
    return (pts - rig.T) @ rig.R_inv.T


def project_rgb(points, rig: CameraRig, eps_z: float = EPS_Z_MM):
    """Perspective-project color-camera points to pixel coordinates.

    Returns (coords, valid): coords[..., :2] are (x_rgb, y_rgb) with z passed
    through as coords[..., 2]; valid is False where z <= eps_z (those points
    are discarded, their coordinates are meaningless).
    """
    pts = np.asarray(points, dtype=np.float64)
    z = pts[..., 2]
    valid = z > eps_z
    safe_z = np.where(valid, z, 1.0)
    fx, fy = rig.f_rgb
    cx, cy = rig.c_rgb
    out = np.stack(
        [pts[..., 0] * fx / safe_z + cx, pts[..., 1] * fy / safe_z + cy, z],
        axis=-1,
    )
    return out, valid


def project_depth_pixels(depth: DepthFrame, rig: CameraRig):
    """Project every valid depth pixel into color image space.

    Returns (x_rgb, y_rgb, z_rgb, covered): full-size float64 grids plus the
    coverage mask (valid depth, z beyond the guard, landing inside the color
    image). Coordinates are meaningless outside the mask.
    """
    h, w = depth.data.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    z = depth.data.astype(np.float64)
    valid = z > 0

    fx, fy = rig.f_d
    cx, cy = rig.c_d
    pts = np.stack([(xs - cx) * z / fx, (ys - cy) * z / fy, z], axis=-1)
    pts = to_rgb_camera(pts, rig)
    coords, zok = project_rgb(pts, rig)

    wr, hr = rig.rgb_size
    x_rgb, y_rgb = coords[..., 0], coords[..., 1]
    # Tolerate one-ulp drift so identity rigs keep edge pixels covered.
    tol = 1e-6
    inb = (
        (x_rgb > -tol) & (x_rgb < wr - 1 + tol)
        & (y_rgb > -tol) & (y_rgb < hr - 1 + tol)
    )
    covered = valid & zok & inb
    return x_rgb, y_rgb, coords[..., 2], covered


def _bilinear_sample(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample (H, W, C) uint8 image at continuous (x, y); inputs must be
    within [0, W-1] x [0, H-1] up to clipping."""
    h, w = img.shape[:2]
    x = np.clip(x, 0.0, w - 1.0)
    y = np.clip(y, 0.0, h - 1.0)
    x0 = np.clip(np.floor(x).astype(np.int64), 0, w - 2) if w > 1 else np.zeros_like(x, np.int64)
    y0 = np.clip(np.floor(y).astype(np.int64), 0, h - 2) if h > 1 else np.zeros_like(y, np.int64)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    v = (
        img[y0, x0] * (1 - fx) * (1 - fy)
        + img[y0, x1] * fx * (1 - fy)
        + img[y1, x0] * (1 - fx) * fy
        + img[y1, x1] * fx * fy
    )
    return v


def build_registered_color(
    depth: DepthFrame, color: ColorFrame, rig: CameraRig
) -> RegisteredColor:
    """Build a W_d x H_d color image in the depth camera's grid.

    Covered pixels sample the color image bilinearly at their projected
    position; everything else is filled by fill_color_holes. With zero
    coverage (e.g. an all-hole depth frame) the color is left black and the
    mask is all False.
    """
    if (depth.width, depth.height) != tuple(rig.depth_size):
        raise DataError(
            f"depth dims {(depth.width, depth.height)} != rig {tuple(rig.depth_size)}"
        )
    if (color.width, color.height) != tuple(rig.rgb_size):
        raise DataError(
            f"color dims {(color.width, color.height)} != rig {tuple(rig.rgb_size)}"
        )

    x_rgb, y_rgb, _, covered = project_depth_pixels(depth, rig)
    out = np.zeros((depth.height, depth.width, 3), dtype=np.uint8)
    if covered.any():
        sampled = _bilinear_sample(
            color.data.astype(np.float64), x_rgb[covered], y_rgb[covered]
        )
        out[covered] = np.clip(np.rint(sampled), 0, 255).astype(np.uint8)
        rc = RegisteredColor(ColorFrame(out), covered)
        rc = fill_color_holes(rc)
        return rc
    return RegisteredColor(ColorFrame(out), covered)


def fill_color_holes(rc: RegisteredColor) -> RegisteredColor:
    """Give every uncovered pixel a color: copy from the nearest covered
    pixel, then blur the uncovered region for smooth transitions.

    Covered pixels pass through untouched; the blur (box filter, two passes)
    is written back only over uncovered pixels.
    """
    if not rc.coverage.any():
        raise DataError("cannot fill color holes: zero covered pixels")
    if rc.coverage.all():
        return rc

    uncovered = ~rc.coverage
    _, (ir, ic) = distance_transform_edt(uncovered, return_indices=True)
    filled = rc.color.data[ir, ic].astype(np.float32)

    blurred = filled
    for _ in range(FILL_BLUR_PASSES):
        blurred = cv2.blur(blurred, (FILL_BLUR_SIZE, FILL_BLUR_SIZE))
    out = filled.copy()
    out[uncovered] = blurred[uncovered]
    out[rc.coverage] = rc.color.data[rc.coverage]
    return RegisteredColor(
        ColorFrame(np.clip(np.rint(out), 0, 255).astype(np.uint8)), rc.coverage
    )


_RIG_SCALAR_KEYS = (
    "fd_x", "fd_y", "cd_x", "cd_y",
    "frgb_x", "frgb_y", "crgb_x", "crgb_y",
    "depth_w", "depth_h", "rgb_w", "rgb_h",
)


def load_rig(path) -> CameraRig:
    """Parse a plain-text calibration file (key value... lines)."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise DataError(f"rig file not found: {path}")
    values = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace("=", " ").split()
            key, vals = parts[0], parts[1:]
            try:
                values[key] = [float(v) for v in vals]
            except ValueError:
                raise FormatError(f"{path}:{ln}: non-numeric value for {key}") from None

    missing = [k for k in (*_RIG_SCALAR_KEYS, "R", "T") if k not in values]
    if missing:
        raise FormatError(f"{path}: missing rig keys: {', '.join(missing)}")
    for k in _RIG_SCALAR_KEYS:
        if len(values[k]) != 1:
            raise FormatError(f"{path}: key {k} expects a single value")
    if len(values["R"]) != 9:
        raise FormatError(f"{path}: R expects 9 row-major values")
    if len(values["T"]) != 3:
        raise FormatError(f"{path}: T expects 3 values")

    g = {k: values[k][0] for k in _RIG_SCALAR_KEYS}
    return CameraRig(
        f_d=(g["fd_x"], g["fd_y"]),
        c_d=(g["cd_x"], g["cd_y"]),
        f_rgb=(g["frgb_x"], g["frgb_y"]),
        c_rgb=(g["crgb_x"], g["crgb_y"]),
        R=np.array(values["R"]).reshape(3, 3),
        T=np.array(values["T"]),
        depth_size=(int(g["depth_w"]), int(g["depth_h"])),
        rgb_size=(int(g["rgb_w"]), int(g["rgb_h"])),
    )


def save_rig(rig: CameraRig, path) -> None:
    lines = [
        f"fd_x = {float(rig.f_d[0])!r}",
        f"fd_y = {float(rig.f_d[1])!r}",
        f"cd_x = {float(rig.c_d[0])!r}",
        f"cd_y = {float(rig.c_d[1])!r}",
        f"frgb_x = {float(rig.f_rgb[0])!r}",
        f"frgb_y = {float(rig.f_rgb[1])!r}",
        f"crgb_x = {float(rig.c_rgb[0])!r}",
        f"crgb_y = {float(rig.c_rgb[1])!r}",
        "R = " + " ".join(repr(float(v)) for v in rig.R.ravel()),
        "T = " + " ".join(repr(float(v)) for v in rig.T.ravel()),
        f"depth_w = {rig.depth_size[0]}",
        f"depth_h = {rig.depth_size[1]}",
        f"rgb_w = {rig.rgb_size[0]}",
        f"rgb_h = {rig.rgb_size[1]}",
    ]
    with open(os.fspath(path), "w") as fh:
        fh.write("\n".join(lines) + "\n")
