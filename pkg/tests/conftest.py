"""Shared fixtures: synthetic RGB-D scenes and camera rigs."""

import numpy as np
import pytest

from sred.frames import ColorFrame, DepthFrame, FrameSequence
from sred.noise import NoiseConfig, corrupt
from sred.registration import CameraRig


def make_clean_scene(width=64, height=64, n_frames=60, seed=7):
    """Clean depth video: a square object sliding over a sloped background,
    with color tied to geometry so guided inpainting has a usable guide.

    Returns a FrameSequence of (DepthFrame, ColorFrame) pairs.
    """
    rng = np.random.default_rng(seed)
    base = 2500.0 + 12.0 * np.arange(height)[:, None] + np.zeros((height, width))
    obj_w = max(8, width // 3)
    obj_h = max(8, height // 3)
    depths, colors = [], []
    for t in range(n_frames):
        depth = base.copy()
        x0 = (4 + t) % max(1, width - obj_w)
        y0 = height // 4
        depth[y0 : y0 + obj_h, x0 : x0 + obj_w] = 1500.0 + 3.0 * t
        depth = np.clip(np.rint(depth), 1, 65535).astype(np.uint16)

        # Guide color: channels follow depth plus a stable texture pattern.
        d01 = depth.astype(np.float64) / 4000.0
        tex = 0.5 + 0.5 * np.sin(np.arange(width)[None, :] / 5.0)
        rgb = np.stack(
            [
                np.clip(d01 * 255, 0, 255),
                np.clip((1 - d01) * 255, 0, 255),
                np.clip(tex * 255, 0, 255) * np.ones_like(d01),
            ],
            axis=-1,
        ).astype(np.uint8)
        depths.append(DepthFrame(depth))
        colors.append(ColorFrame(rgb))
    return FrameSequence(tuple(depths), tuple(colors))


def corrupt_scene(seq, rig, base_seed=100, **noise_kwargs):
    """Per-frame corruption with a derived seed per frame."""
    kwargs = dict(sigma_base=1.5, q_step=0.125, sigma_s=0.4, theta_max_deg=80.0)
    kwargs.update(noise_kwargs)
    noisy = []
    for t in range(len(seq)):
        cfg = NoiseConfig(seed=base_seed + t, **kwargs)
        noisy.append(corrupt(seq.depth(t), rig, cfg))
    return FrameSequence(tuple(noisy), seq.colors)


@pytest.fixture(scope="session")
def small_rig():
    return CameraRig.identity(64, 64, f=80.0)


@pytest.fixture(scope="session")
def clean_scene():
    return make_clean_scene(64, 64, 60, seed=7)


@pytest.fixture(scope="session")
def noisy_scene(clean_scene, small_rig):
    return corrupt_scene(clean_scene, small_rig, base_seed=100)
