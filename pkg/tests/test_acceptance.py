"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete. The end-to-end criteria (4, 5) share one smoke
training run via a module fixture.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
import torch

from conftest import corrupt_scene, make_clean_scene
from oracles import guided_fmm_reference, naive_mse, naive_ssim, naive_temporal_abs
from sred.baselines import TVConfig, tv_denoise, tv_functional, fmm_bf
from sred.cli import run_bench
from sred.frames import (
    ColorFrame,
    DepthFrame,
    FrameSequence,
    NormalizedFrame,
    normalize,
)
from sred.inpaint import InpaintConfig, inpaint_classic, inpaint_guided
from sred.metrics import mse, nmid, psnr, ssim, temporal
from sred.model import NetworkConfig, build_model, filter_count, parameter_count
from sred.registration import CameraRig, backproject, build_registered_color, to_rgb_camera
from sred.training import TrainConfig, restore_sequence, train


@contextmanager
def criterion(n: int, title: str):
    t0 = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"[ACCEPTANCE] criterion {n}: FAIL - {title}")
        raise
    print(f"[ACCEPTANCE] criterion {n}: PASS - {title} ({time.perf_counter() - t0:.1f}s)")


@pytest.fixture(scope="module")
def smoke_run():
    """64x64, 60-frame corrupted sequence; 200 optimizer steps; last 5
    frames held out of training."""
    rig = CameraRig.identity(64, 64, f=80.0)
    clean = make_clean_scene(64, 64, 60, seed=7)
    noisy = corrupt_scene(clean, rig, base_seed=100)
    train_seq = FrameSequence(noisy.depths[:55], noisy.colors[:55])
    tcfg = TrainConfig(batch=16, epochs=100, lr=1e-3, seed=0, max_steps=200)
    model = build_model(NetworkConfig.for_mode("sred"), seed=0)
    t0 = time.perf_counter()
    model, history = train(model, [train_seq], tcfg, rig=rig, mode="sred")
    wall = time.perf_counter() - t0
    return rig, clean, noisy, model, history, wall


def test_criterion_1_architecture_calibration():
    with criterion(1, "architecture: 1729 filters, 1,260,865 parameters"):
        t0 = time.perf_counter()
        model = build_model(NetworkConfig(filters=(32, 32, 48, 48, 64, 128)), seed=0)
        build_s = time.perf_counter() - t0
        assert filter_count(model) == 1729
        assert parameter_count(model) == 1_260_865  # exact, no tolerance needed
        assert build_s < 1.0


def test_criterion_2_inpainting_oracle_equivalence():
    with criterion(2, "guided inpainting bit-identical to brute force on 20 fixtures"):
        rng = np.random.default_rng(202)
        for trial in range(20):
            data = rng.integers(700, 4200, size=(16, 16)).astype(np.uint16)
            n_holes = int(rng.integers(1, 21))  # holes <= 20 px
            idx = rng.choice(256, size=n_holes, replace=False)
            data.flat[idx] = 0
            guide = rng.random((16, 16, 3))
            lam = float(rng.choice([0.0, 0.3, 0.5, 0.8, 1.0]))
            out = inpaint_guided(
                DepthFrame(data), guide, InpaintConfig(sigma_g=0.2, lam=lam, radius=5)
            )
            ref = guided_fmm_reference(data, guide, d0=1.0, sigma_g=0.2, lam=lam, radius=5)
            assert np.array_equal(out.data, ref), f"fixture {trial} not bit-identical"


def test_criterion_3_registration():
    with criterion(3, "identity-rig idempotence exact; round trip < 1e-5 px"):
        rng = np.random.default_rng(303)
        rig_id = CameraRig.identity(32, 32, f=45.0)
        depth = DepthFrame(rng.integers(400, 6000, size=(32, 32)).astype(np.uint16))
        color = ColorFrame(rng.integers(0, 256, size=(32, 32, 3)).astype(np.uint8))
        rc = build_registered_color(depth, color, rig_id)
        assert np.array_equal(rc.color.data, color.data)
        assert rc.coverage.all()

        # synthetic rig round trip over 1e4 random points at float32 inputs
        def rotation(rx, ry, rz):
            cx, sx = math.cos(rx), math.sin(rx)
            cy, sy = math.cos(ry), math.sin(ry)
            cz, sz = math.cos(rz), math.sin(rz)
            rx_m = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
            ry_m = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
            rz_m = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
            return rz_m @ ry_m @ rx_m

        rig = CameraRig(
            f_d=(365.0, 368.0), c_d=(255.5, 211.5),
            f_rgb=(1054.0, 1052.0), c_rgb=(959.5, 539.5),
            R=rotation(0.015, -0.01, 0.02), T=np.array([52.0, -3.0, 8.0]),
            depth_size=(512, 424), rgb_size=(1920, 1080),
        )
        n = 10_000
        xs = rng.uniform(0, 511, n).astype(np.float32).astype(np.float64)
        ys = rng.uniform(0, 423, n).astype(np.float32).astype(np.float64)
        zs = rng.uniform(500, 8000, n).astype(np.float32).astype(np.float64)
        pts_rgb = to_rgb_camera(backproject((xs, ys), zs, rig), rig)
        pts_d = pts_rgb @ rig.R.T + rig.T  # analytic inverse of the rigid step
        x_rec = pts_d[:, 0] * rig.f_d[0] / pts_d[:, 2] + rig.c_d[0]
        y_rec = pts_d[:, 1] * rig.f_d[1] / pts_d[:, 2] + rig.c_d[1]
        err = np.maximum(np.abs(x_rec - xs), np.abs(y_rec - ys))
        assert err.max() < 1e-5


def test_criterion_4_training_smoke(smoke_run):
    with criterion(4, "200 steps halve training L1; restored beats noisy MSE on held-out frames"):
        rig, clean, noisy, model, history, wall = smoke_run
        assert wall < 600.0  # well under the 10-minute budget
        initial, final = history[0].train_l1, history[-1].train_l1
        assert final <= 0.5 * initial, f"L1 {initial:.4g} -> {final:.4g}"
        for t in range(55, 60):  # held-out frames
            from sred.training import infer

            restored = infer(model, noisy.depth(t - 2), noisy.depth(t - 1), noisy.depth(t))
            clean_n = normalize(clean.depth(t))
            m_noisy = mse(normalize(noisy.depth(t)), clean_n)
            m_restored = mse(normalize(restored), clean_n)
            assert m_restored < m_noisy, f"frame {t}: {m_restored:.4g} !< {m_noisy:.4g}"


def test_criterion_5_temporal_coherence_direction(smoke_run):
    with criterion(5, "temporal_abs(restored) < temporal_abs(noisy)"):
        _, _, noisy, model, _, _ = smoke_run
        restored, _ = restore_sequence(model, noisy)
        restored_n = [normalize(f) for f in restored]
        noisy_n = [normalize(noisy.depth(t)) for t in range(2, len(noisy))]
        t_restored = temporal(restored_n)
        t_noisy = temporal(noisy_n)
        assert t_restored < t_noisy, f"{t_restored:.4g} !< {t_noisy:.4g}"


def test_criterion_6_scaling_law():
    with criterion(6, "inference time ~ pixel count: exponent in [0.8, 1.3], doubling <= 4.5x"):
        model = build_model(NetworkConfig(), seed=0)
        stats = run_bench(model, frames=25, seed=0)
        kinect = [r for r in stats["rows"] if (r["width"], r["height"]) == (512, 424)][0]
        # the absolute per-frame figure is hardware-bound: report, don't assert
        print(
            f"    512x424 inference: mean {kinect['mean_s'] * 1e3:.1f} ms "
            f"(min {kinect['min_s'] * 1e3:.1f} ms) on this host"
        )
        assert 0.8 <= stats["exponent"] <= 1.3, f"exponent {stats['exponent']:.3f}"
        assert stats["doubling_ratio"] <= 4.5, f"doubling {stats['doubling_ratio']:.2f}"


def test_criterion_7_tv_baseline_sanity():
    with criterion(7, "TV at weight 0.4 reduces MSE to clean and never raises TV"):
        rng = np.random.default_rng(707)
        clean = np.full((48, 48), 0.3)
        clean[10:38, 10:38] = 0.7
        noisy = np.clip(clean + rng.normal(0, 0.1, clean.shape), 0.0, 1.0)
        frame = NormalizedFrame(noisy, np.ones_like(noisy, dtype=bool))
        out = tv_denoise(frame, TVConfig(weight=0.4))
        mse_before = float(np.mean((noisy - clean) ** 2))
        mse_after = float(np.mean((out.data - clean) ** 2))
        assert mse_after < mse_before
        assert tv_functional(out.data) <= tv_functional(noisy) + 1e-9


def test_criterion_8_metric_unit_suite():
    with criterion(8, "metric unit values and naive-oracle agreement"):
        rng = np.random.default_rng(808)
        a = NormalizedFrame(np.full((16, 16), 0.2), np.ones((16, 16), dtype=bool))
        b = NormalizedFrame(np.full((16, 16), 0.3), np.ones((16, 16), dtype=bool))
        assert abs(psnr(a, b) - 20.0) < 1e-9  # mse = 0.01 -> 20 dB

        x = NormalizedFrame(rng.random((24, 24)), np.ones((24, 24), dtype=bool))
        assert abs(ssim(x, x) - 1.0) < 1e-12
        assert abs(nmid(x, x)) < 1e-12
        static = [x, x, x]
        assert temporal(static) == 0.0

        y = NormalizedFrame(rng.random((24, 24)), np.ones((24, 24), dtype=bool))
        assert abs(
            mse(x, y) - naive_mse(x.data, y.data, np.ones((24, 24), dtype=bool))
        ) < 1e-9
        assert abs(ssim(x, y) - naive_ssim(x.data, y.data)) < 1e-9
        frames = [NormalizedFrame(rng.random((12, 12)), np.ones((12, 12), dtype=bool)) for _ in range(4)]
        assert abs(temporal(frames) - naive_temporal_abs([f.data for f in frames])) < 1e-9


def test_criterion_9_completeness():
    with criterion(9, "no holes remain after guided, classic, or FMM+BF restoration"):
        rng = np.random.default_rng(909)
        for trial in range(6):
            h, w = int(rng.integers(12, 24)), int(rng.integers(12, 24))
            hole_frac = 0.9 if trial >= 4 else float(rng.uniform(0.1, 0.6))
            data = rng.integers(600, 5000, size=(h, w)).astype(np.uint16)
            holes = rng.random((h, w)) < hole_frac
            data[holes] = 0
            if (data != 0).sum() == 0:
                data[0, 0] = 1000
            frame = DepthFrame(data)
            guide = rng.random((h, w, 3))
            for name, out in (
                ("guided", inpaint_guided(frame, guide, InpaintConfig(sigma_g=0.2))),
                ("classic", inpaint_classic(frame, radius=5)),
                ("fmm_bf", fmm_bf(frame)),
            ):
                n_holes = int(np.count_nonzero(out.data == 0))
                assert n_holes == 0, f"{name} left {n_holes} holes (trial {trial})"
