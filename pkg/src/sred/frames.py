"""Depth/color frame types, 16-bit PNG I/O, normalization, and
sliding-window assembly of self-supervised training samples.

Depth encoding everywhere: unsigned 16-bit millimeters, 0 = invalid (hole).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import cv2
import numpy as np

from .errors import DataError, FormatError

# Default network-range scale: covers Kinect v2 extended range.
DEFAULT_MAX_DEPTH_MM = 8000.0


def _freeze(obj, name, arr):
    arr.flags.writeable = False
    object.__setattr__(obj, name, arr)


@dataclass(frozen=True)
class DepthFrame:
    """Single-channel depth grid in millimeters; 0 marks a hole."""

    data: np.ndarray  # (H, W) uint16

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise FormatError(f"depth frame must be 2-D, got shape {arr.shape}")
        if arr.dtype != np.uint16:
            if not np.issubdtype(arr.dtype, np.integer):
                raise FormatError(f"depth frame must be integer-typed, got {arr.dtype}")
            if arr.min() < 0 or arr.max() > 65535:
                raise FormatError("depth values outside [0, 65535]")
            arr = arr.astype(np.uint16)
        _freeze(self, "data", arr.copy() if arr is self.data else arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def hole_mask(self) -> np.ndarray:
        """Boolean grid, True where depth is invalid."""
        return self.data == 0

    def valid_mask(self) -> np.ndarray:
        return self.data != 0


@dataclass(frozen=True)
class ColorFrame:
    """3-channel 8-bit color grid (RGB channel order in memory)."""

    data: np.ndarray  # (H, W, 3) uint8

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise FormatError(f"color frame must be (H, W, 3), got shape {arr.shape}")
        if arr.dtype != np.uint8:
            raise FormatError(f"color frame must be uint8, got {arr.dtype}")
        _freeze(self, "data", arr.copy() if arr is self.data else arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class NormalizedFrame:
    """Depth scaled to [0, 1] for network I/O, with a validity mask.

    Masked-out (invalid) pixels carry the value 0.0.
    """

    data: np.ndarray  # (H, W) float64 in [0, 1]
    mask: np.ndarray  # (H, W) bool, True = valid

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        if data.shape != mask.shape or data.ndim != 2:
            raise FormatError("normalized frame data/mask shape mismatch")
        _freeze(self, "data", data)
        _freeze(self, "mask", mask)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def load_depth_png(path) -> DepthFrame:
    """Read a 16-bit single-channel PNG as a DepthFrame (values verbatim)."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise DataError(f"depth file not found: {path}")
    arr = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise FormatError(f"unreadable image file: {path}")
    if arr.ndim != 2:
        raise FormatError(
            f"{path}: expected single-channel depth, got {arr.shape[2]} channels"
        )
    if arr.dtype != np.uint16:
        raise FormatError(f"{path}: expected 16-bit depth, got dtype {arr.dtype}")
    return DepthFrame(arr)


def save_depth_png(frame: DepthFrame, path) -> None:
    """Write a DepthFrame as 16-bit grayscale PNG; exact round trip."""
    path = os.fspath(path)
    if not cv2.imwrite(path, frame.data):
        raise DataError(f"failed to write depth png: {path}")


def load_color_png(path) -> ColorFrame:
    """Read an 8-bit 3-channel PNG as a ColorFrame (RGB order)."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise DataError(f"color file not found: {path}")
    arr = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise FormatError(f"unreadable image file: {path}")
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise FormatError(f"{path}: expected 3-channel color image")
    if arr.dtype != np.uint8:
        raise FormatError(f"{path}: expected 8-bit color, got dtype {arr.dtype}")
    return ColorFrame(cv2.cvtColor(arr, cv2.COLOR_BGR2RGB))


def save_color_png(frame: ColorFrame, path) -> None:
    path = os.fspath(path)
    if not cv2.imwrite(path, cv2.cvtColor(frame.data, cv2.COLOR_RGB2BGR)):
        raise DataError(f"failed to write color png: {path}")


def normalize(frame: DepthFrame, max_depth_mm: float = DEFAULT_MAX_DEPTH_MM) -> NormalizedFrame:
    """Map valid depth to min(depth / max_depth_mm, 1); holes -> 0.0, masked."""
    if max_depth_mm <= 0:
        raise ValueError(f"max_depth_mm must be positive, got {max_depth_mm}")
    mask = frame.data != 0
    data = np.minimum(frame.data.astype(np.float64) / max_depth_mm, 1.0)
    data[~mask] = 0.0
    return NormalizedFrame(data, mask)


def denormalize(frame: NormalizedFrame, max_depth_mm: float = DEFAULT_MAX_DEPTH_MM) -> DepthFrame:
    """Invert normalize(): round(v * max_depth_mm) clamped to [0, 65535]."""
    if max_depth_mm <= 0:
        raise ValueError(f"max_depth_mm must be positive, got {max_depth_mm}")
    mm = np.rint(frame.data.astype(np.float64) * max_depth_mm)
    mm = np.clip(mm, 0, 65535).astype(np.uint16)
    mm[~frame.mask] = 0
    return DepthFrame(mm)


@dataclass(frozen=True)
class FrameSequence:
    """Ordered depth stream with optional per-frame color."""

    depths: tuple
    colors: tuple  # ColorFrame or None per entry
    fps: float = 30.0

    def __post_init__(self):
        depths = tuple(self.depths)
        colors = tuple(self.colors)
        if len(depths) != len(colors):
            raise DataError("depth/color list length mismatch")
        if depths:
            dh, dw = depths[0].height, depths[0].width
            for d in depths:
                if (d.height, d.width) != (dh, dw):
                    raise DataError("all depth frames must share dimensions")
            dims = {(c.height, c.width) for c in colors if c is not None}
            if len(dims) > 1:
                raise DataError("all color frames must share dimensions")
        object.__setattr__(self, "depths", depths)
        object.__setattr__(self, "colors", colors)

    def __len__(self) -> int:
        return len(self.depths)

    def depth(self, t: int) -> DepthFrame:
        return self.depths[t]

    def color(self, t: int) -> Optional[ColorFrame]:
        return self.colors[t]

    @property
    def has_color(self) -> bool:
        return all(c is not None for c in self.colors)


@dataclass(frozen=True)
class TrainingWindow:
    """Index view of one dilated training sample: input (t-4, t-2, t),
    target t-1."""

    t: int

    @property
    def input_indices(self) -> tuple:
        return (self.t - 4, self.t - 2, self.t)

    @property
    def target_index(self) -> int:
        return self.t - 1


@dataclass(frozen=True)
class TrainingSample:
    """Materialized training pair: three dilated input frames plus the
    inpainted target for the hidden in-between frame."""

    inputs: tuple  # 3 DepthFrames (t-4, t-2, t)
    target: DepthFrame  # d*_{t-1}

    def __post_init__(self):
        if len(self.inputs) != 3:
            raise DataError("training sample needs exactly 3 input frames")
        dims = {(f.height, f.width) for f in (*self.inputs, self.target)}
        if len(dims) != 1:
            raise DataError("training sample frames must share dimensions")


def window_training_samples(seq: FrameSequence) -> list:
    """Enumerate dilated training windows: one per t in [4, len-1]."""
    n = len(seq)
    if n < 5:
        raise DataError(f"sequence too short for windowing: {n} < 5 frames")
    return [TrainingWindow(t) for t in range(4, n)]


def load_manifest(path) -> FrameSequence:
    """Read a sequence manifest: per line `index depth_path [color_path]`,
    ascending index, paths relative to the manifest location."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    root = path.parent
    depths, colors = [], []
    last_idx = None
    for ln, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise FormatError(f"{path}:{ln}: expected `index depth [color]`")
        try:
            idx = int(parts[0])
        except ValueError:
            raise FormatError(f"{path}:{ln}: bad frame index {parts[0]!r}") from None
        if last_idx is not None and idx <= last_idx:
            raise FormatError(f"{path}:{ln}: frame indices must ascend")
        last_idx = idx
        depths.append(load_depth_png(root / parts[1]))
        colors.append(load_color_png(root / parts[2]) if len(parts) == 3 else None)
    if not depths:
        raise DataError(f"manifest is empty: {path}")
    return FrameSequence(tuple(depths), tuple(colors))


def save_manifest(path, depth_paths: Sequence, color_paths: Optional[Sequence] = None) -> None:
    """Write a manifest referencing already-saved frame files."""
    path = Path(path)
    lines = []
    for i, dp in enumerate(depth_paths):
        cp = color_paths[i] if color_paths is not None else None
        rel_d = os.path.relpath(os.fspath(dp), path.parent)
        if cp is not None:
            lines.append(f"{i} {rel_d} {os.path.relpath(os.fspath(cp), path.parent)}")
        else:
            lines.append(f"{i} {rel_d}")
    path.write_text("\n".join(lines) + "\n")
