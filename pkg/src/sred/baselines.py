"""Deterministic restoration baselines: total-variation denoising (dual
projection), edge-preserving bilateral filtering, and their composition with
classic FMM inpainting (FMM+BF)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import DepthFrame, NormalizedFrame, denormalize, normalize, DEFAULT_MAX_DEPTH_MM
from .inpaint import inpaint_classic


@dataclass(frozen=True)
class TVConfig:
    weight: float = 0.4
    max_iters: int = 200
    tol: float = 2e-4

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError(f"tv weight must be positive, got {self.weight}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class BilateralConfig:
    sigma_spatial: float = 3.0  # px
    sigma_range: float = 0.05  # normalized depth units
    radius: int = 7  # px

    def __post_init__(self):
        if self.sigma_spatial <= 0 or self.sigma_range <= 0 or self.radius <= 0:
            raise ValueError("bilateral parameters must all be positive")


def _forward_grad(u: np.ndarray) -> np.ndarray:
    """Forward differences with Neumann boundary (zero at the far edge)."""
    g = np.zeros((2,) + u.shape, dtype=u.dtype)
    g[0, :-1, :] = u[1:, :] - u[:-1, :]
    g[1, :, :-1] = u[:, 1:] - u[:, :-1]
    return g


def _divergence(p: np.ndarray) -> np.ndarray:
    """Adjoint of -_forward_grad (backward differences)."""
    d = np.zeros(p.shape[1:], dtype=p.dtype)
    d[0, :] += p[0, 0, :]
    d[1:-1, :] += p[0, 1:-1, :] - p[0, :-2, :]
    d[-1, :] += -p[0, -2, :]
    d[:, 0] += p[1, :, 0]
    d[:, 1:-1] += p[1, :, 1:-1] - p[1, :, :-2]
    d[:, -1] += -p[1, :, -2]
    return d


def tv_functional(u: np.ndarray) -> float:
    """Discrete isotropic total variation (forward differences)."""
    g = _forward_grad(np.asarray(u, dtype=np.float64))
    return float(np.sqrt(g[0] ** 2 + g[1] ** 2).sum())


def tv_denoise(frame: NormalizedFrame, cfg: TVConfig = TVConfig()) -> NormalizedFrame:
    """Rudin-Osher-Fatemi denoising by projection onto the dual ball.

    Iterates p <- (p + tau grad(div p - f/w)) / (1 + tau |grad(...)|) and
    returns f - w div p. Stops at max_iters or when the dual variable's
    max-abs change drops below tol.
    """
    f = frame.data.astype(np.float64)
    w = cfg.weight
    tau = 0.25
    p = np.zeros((2,) + f.shape, dtype=np.float64)
    for _ in range(cfg.max_iters):
        g = _forward_grad(_divergence(p) - f / w)
        norm = np.sqrt(g[0] ** 2 + g[1] ** 2)
        p_new = (p + tau * g) / (1.0 + tau * norm)
        change = np.abs(p_new - p).max()
        p = p_new
        if change < cfg.tol:
            break
    out = f - w * _divergence(p)
    return NormalizedFrame(np.clip(out, 0.0, 1.0), frame.mask.copy())


def bilateral(frame: NormalizedFrame, cfg: BilateralConfig = BilateralConfig()) -> NormalizedFrame:
    """Joint spatial/range Gaussian smoothing over a square window.

    Invalid pixels contribute to neither the numerator nor the
    normalization; holes stay holes.
    """
    data = frame.data.astype(np.float64)
    valid = frame.mask.astype(np.float64)
    h, w = data.shape
    num = np.zeros_like(data)
    den = np.zeros_like(data)
    inv2ss = 1.0 / (2.0 * cfg.sigma_spatial ** 2)
    inv2sr = 1.0 / (2.0 * cfg.sigma_range ** 2)
    rad = cfg.radius
    for dr in range(-rad, rad + 1):
        for dc in range(-rad, rad + 1):
            ws = np.exp(-(dr * dr + dc * dc) * inv2ss)
            sv = np.zeros_like(data)
            sm = np.zeros_like(data)
            rs = slice(max(0, dr), h + min(0, dr))
            rd = slice(max(0, -dr), h + min(0, -dr))
            cs = slice(max(0, dc), w + min(0, dc))
            cd = slice(max(0, -dc), w + min(0, -dc))
            sv[rd, cd] = data[rs, cs]
            sm[rd, cd] = valid[rs, cs]
            wr = np.exp(-((sv - data) ** 2) * inv2sr)
            contrib = ws * wr * sm
            num += contrib * sv
            den += contrib
    out = np.where((den > 0) & frame.mask, num / np.where(den > 0, den, 1.0), 0.0)
    return NormalizedFrame(out, frame.mask.copy())


def fmm_bf(
    depth: DepthFrame,
    inpaint_radius: int = 5,
    bf_cfg: BilateralConfig = BilateralConfig(),
    max_depth_mm: float = DEFAULT_MAX_DEPTH_MM,
) -> DepthFrame:
    """Classic-FMM hole filling followed by bilateral smoothing, in mm."""
    filled = inpaint_classic(depth, radius=inpaint_radius)
    smoothed = bilateral(normalize(filled, max_depth_mm), bf_cfg)
    return denormalize(smoothed, max_depth_mm)
