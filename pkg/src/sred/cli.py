"""Command-line orchestration: registration runs, target generation,
training, restoration, evaluation, synthetic noise, and inference timing.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure. All randomness derives from one top-level seed, recorded in every
output header (CSV comment lines / run_info.txt for image outputs).
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .baselines import fmm_bf, tv_denoise
from .config import SCHEMA, PipelineConfig, load_config
from .errors import ConfigError, DataError, SredError, TrainingDivergence
from .frames import (
    denormalize,
    load_manifest,
    normalize,
    save_color_png,
    save_depth_png,
    save_manifest,
)
from .inpaint import inpaint_classic
from .metrics import (
    FrameMetrics,
    MetricReport,
    mse,
    nmid,
    psnr,
    ssim,
    temporal,
    temporal_signed,
    write_report_csv,
)
from .model import NetworkConfig, build_model, load_weights, save_weights
from .noise import NoiseConfig, corrupt
from .registration import build_registered_color, load_rig as _load_rig


def load_rig_checked(path):
    """Rig location is configuration: a missing file is a config error."""
    import os

    if path is None or not os.path.exists(path):
        raise ConfigError(f"rig file not found: {path}")
    return _load_rig(path)
from .training import make_target, restore_sequence, train, write_training_log

BENCH_RESOLUTIONS = ((128, 128), (256, 256), (512, 512), (512, 424))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sred", description="Self-supervised depth-video restoration toolkit"
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", metavar="PATH", help="key = value configuration file")
    parser.add_argument("--seed", type=int, default=None, help="top-level seed override")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for per-frame work")
    parser.add_argument("--out", metavar="DIR", default="out", help="output directory")
    for key in SCHEMA:
        typ = SCHEMA[key][0]
        parser.add_argument(f"--{key}", type=typ, default=None, help=argparse.SUPPRESS)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="write registered color images + coverage masks")
    p.add_argument("--manifest", required=True)
    p.add_argument("--rig", required=True)

    p = sub.add_parser("make-targets", help="write inpainted training targets")
    p.add_argument("--manifest", required=True)
    p.add_argument("--rig", required=True)

    p = sub.add_parser("train", help="train the denoiser, write weights + log")
    p.add_argument("--manifest", required=True, action="append")
    p.add_argument("--rig")

    p = sub.add_parser("restore", help="restore a sequence (one output per frame t >= 2)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--weights")
    p.add_argument(
        "--method",
        default="sred",
        choices=("sred", "n2n", "n2stack", "fmm_bf", "tv"),
    )

    p = sub.add_parser("evaluate", help="emit the benchmark CSV + temporal series")
    p.add_argument("--noisy-manifest", required=True)
    p.add_argument("--clean-manifest")
    p.add_argument(
        "--method",
        action="append",
        default=[],
        metavar="NAME=DIR",
        help="restored-frame directory per method (repeatable)",
    )
    p.add_argument("--dataset", default="dataset")
    p.add_argument("--plot", action="store_true", help="also render temporal_series.png")

    p = sub.add_parser("synth-noise", help="corrupt a clean sequence")
    p.add_argument("--manifest", required=True)
    p.add_argument("--rig", required=True)

    p = sub.add_parser("bench", help="measure inference time vs resolution")
    p.add_argument("--weights")
    p.add_argument("--frames", type=int, default=None)

    return parser


def _apply_overrides(cfg: PipelineConfig, ns) -> PipelineConfig:
    for key in SCHEMA:
        val = getattr(ns, key, None)
        if val is not None:
            cfg.set(key, val)
    if ns.seed is not None:
        cfg.set("noise.seed", ns.seed)
        cfg.set("train.seed", ns.seed)
    return cfg


def _seed(cfg: PipelineConfig, ns) -> int:
    return ns.seed if ns.seed is not None else cfg["train.seed"]


def _write_run_info(out: Path, ns, seed: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_info.txt").write_text(
        f"command = {ns.command}\nseed = {seed}\nargv = {' '.join(sys.argv[1:])}\n"
    )


def cmd_register(ns, cfg: PipelineConfig, out: Path) -> int:
    seq = load_manifest(ns.manifest)
    rig = load_rig_checked(ns.rig)
    if not seq.has_color:
        raise DataError("register needs a color frame for every depth frame")
    for t in range(len(seq)):
        rc = build_registered_color(seq.depth(t), seq.color(t), rig)
        save_color_png(rc.color, out / f"registered_{t:04d}.png")
        cov = (rc.coverage.astype(np.uint8)) * 255
        import cv2

        cv2.imwrite(str(out / f"coverage_{t:04d}.png"), cov)
    print(f"registered {len(seq)} frames -> {out}")
    return 0


def _target_task(args):
    depth_data, color_data, rig, icfg = args
    from .frames import ColorFrame, DepthFrame

    tgt = make_target(DepthFrame(depth_data), ColorFrame(color_data), rig, icfg)
    return tgt.data


def cmd_make_targets(ns, cfg: PipelineConfig, out: Path) -> int:
    seq = load_manifest(ns.manifest)
    rig = load_rig_checked(ns.rig)
    from .frames import window_training_samples

    windows = window_training_samples(seq)
    target_idx = sorted({w.target_index for w in windows})
    for t in target_idx:
        if seq.color(t) is None:
            raise DataError(f"target frame {t} has no color frame")
    icfg = cfg.inpaint_config()
    tasks = [(seq.depth(t).data, seq.color(t).data, rig, icfg) for t in target_idx]
    if ns.jobs > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            results = list(pool.map(_target_task, tasks))
    else:
        results = [_target_task(t) for t in tasks]
    from .frames import DepthFrame

    for t, data in zip(target_idx, results):
        save_depth_png(DepthFrame(data), out / f"target_{t:04d}.png")
    print(f"wrote {len(target_idx)} targets -> {out}")
    return 0


def cmd_train(ns, cfg: PipelineConfig, out: Path) -> int:
    sequences = [load_manifest(m) for m in ns.manifest]
    mode = cfg["train.mode"]
    rig = load_rig_checked(ns.rig) if ns.rig else None
    if mode == "sred" and rig is None:
        raise ConfigError("train mode 'sred' requires --rig for target generation")
    tcfg = cfg.train_config()
    model = build_model(NetworkConfig.for_mode(mode), seed=tcfg.seed)
    model, history = train(
        model, sequences, tcfg, rig=rig, inpaint_cfg=cfg.inpaint_config(), mode=mode
    )
    save_weights(model, out / "weights.sredw")
    write_training_log(history, out / "train_log.csv")
    print(
        f"trained {mode}: {len(history) - 1} epochs, "
        f"final train_l1={history[-1].train_l1:.6g} -> {out / 'weights.sredw'}"
    )
    return 0


def cmd_restore(ns, cfg: PipelineConfig, out: Path) -> int:
    seq = load_manifest(ns.manifest)
    max_depth = cfg["core.max_depth_mm"]
    times = []
    if ns.method in ("sred", "n2n", "n2stack"):
        if not ns.weights:
            raise DataError(f"method {ns.method} needs --weights")
        model = load_weights(ns.weights)
        restored, times = restore_sequence(model, seq, max_depth)
    else:
        restored = []
        for t in range(2, len(seq)):
            t0 = time.perf_counter()
            if ns.method == "fmm_bf":
                res = fmm_bf(
                    seq.depth(t),
                    inpaint_radius=cfg["inpaint.radius"],
                    bf_cfg=cfg.bilateral_config(),
                    max_depth_mm=max_depth,
                )
            else:  # tv
                res = denormalize(
                    tv_denoise(normalize(seq.depth(t), max_depth), cfg.tv_config()),
                    max_depth,
                )
            times.append(time.perf_counter() - t0)
            restored.append(res)
    for i, frame in enumerate(restored):
        save_depth_png(frame, out / f"restored_{i + 2:04d}.png")
    with open(out / "restore_times.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_index", "seconds"])
        for i, s in enumerate(times):
            writer.writerow([i + 2, repr(s)])
    print(f"restored {len(restored)} frames ({ns.method}) -> {out}")
    return 0


def _method_frames(dir_path: str):
    from .frames import load_depth_png

    files = sorted(Path(dir_path).glob("*.png"))
    if not files:
        raise DataError(f"no PNG outputs found in {dir_path}")
    return [load_depth_png(f) for f in files]


def cmd_evaluate(ns, cfg: PipelineConfig, out: Path) -> int:
    noisy_seq = load_manifest(ns.noisy_manifest)
    clean_seq = load_manifest(ns.clean_manifest) if ns.clean_manifest else None
    if clean_seq is not None and len(clean_seq) != len(noisy_seq):
        raise DataError("clean/noisy manifests must have equal frame counts")
    max_depth = cfg["core.max_depth_mm"]

    methods = {"noisy": [noisy_seq.depth(t) for t in range(len(noisy_seq))]}
    for spec_str in ns.method:
        name, _, dir_path = spec_str.partition("=")
        if not dir_path:
            raise ConfigError(f"--method expects NAME=DIR, got {spec_str!r}")
        methods[name] = _method_frames(dir_path)

    n = len(noisy_seq)
    reports = []
    series = {}
    for name, frames in methods.items():
        m = len(frames)
        if m > n:
            raise DataError(f"method {name}: {m} outputs for {n} sequence frames")
        offset = n - m  # outputs align to the sequence tail
        rep = MetricReport(method=name, dataset=ns.dataset)
        norm_frames = [normalize(f, max_depth) for f in frames]
        abs_series, signed_series = [], []
        for j, frame in enumerate(frames):
            t = j + offset
            fm = FrameMetrics(frame_index=t)
            noisy_n = normalize(noisy_seq.depth(t), max_depth)
            fm.nmid = nmid(noisy_n, norm_frames[j])
            fm.holes_in = int(np.count_nonzero(noisy_seq.depth(t).data == 0))
            fm.holes_out = int(np.count_nonzero(frame.data == 0))
            if clean_seq is not None:
                clean_n = normalize(clean_seq.depth(t), max_depth)
                fm.mse = mse(norm_frames[j], clean_n)
                fm.psnr_db = psnr(norm_frames[j], clean_n)
                fm.ssim = ssim(norm_frames[j], clean_n)
            if j > 0:
                pair = [norm_frames[j - 1], norm_frames[j]]
                fm.temporal_abs = temporal(pair)
                fm.temporal_signed = temporal_signed(pair)
                abs_series.append((t, fm.temporal_abs))
                signed_series.append((t, fm.temporal_signed))
            rep.frames.append(fm)
        reports.append(rep)
        series[name] = (abs_series, signed_series)

    seed = _seed(cfg, ns)
    write_report_csv(reports, out / "report.csv", seed=seed)
    with open(out / "temporal_series.csv", "w", newline="") as fh:
        fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh)
        names = list(series)
        writer.writerow(
            ["frame_index"]
            + [f"{n}_abs" for n in names]
            + [f"{n}_signed" for n in names]
        )
        all_t = sorted({t for n in names for t, _ in series[n][0]})
        for t in all_t:
            row = [t]
            for kind in (0, 1):
                for n_ in names:
                    d = dict(series[n_][kind])
                    row.append(repr(d[t]) if t in d else "")
            writer.writerow(row)
    if ns.plot:
        _render_temporal_plot(series, out / "temporal_series.png")
    print(f"evaluated {len(methods)} methods -> {out / 'report.csv'}")
    return 0


def _render_temporal_plot(series, path) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigError("--plot requires matplotlib (pip install sred[plot])") from None

    fig, ax = plt.subplots(figsize=(8, 4))
    for name, (abs_series, _) in series.items():
        if abs_series:
            ts, vals = zip(*abs_series)
            ax.plot(ts, vals, label=name)
    ax.set_xlabel("frame")
    ax.set_ylabel("mean |depth(t) - depth(t-1)|")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _noise_task(args):
    depth_data, rig, ncfg = args
    from .frames import DepthFrame

    return corrupt(DepthFrame(depth_data), rig, ncfg).data


def cmd_synth_noise(ns, cfg: PipelineConfig, out: Path) -> int:
    seq = load_manifest(ns.manifest)
    rig = load_rig_checked(ns.rig)
    base = cfg["noise.seed"] if ns.seed is None else ns.seed
    tasks = []
    for t in range(len(seq)):
        ncfg = cfg.noise_config(seed=base + t)  # per-frame stream from the top seed
        tasks.append((seq.depth(t).data, rig, ncfg))
    if ns.jobs > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            results = list(pool.map(_noise_task, tasks))
    else:
        results = [_noise_task(t) for t in tasks]
    from .frames import DepthFrame

    depth_paths, color_paths = [], []
    for t, data in enumerate(results):
        dp = out / f"noisy_{t:04d}.png"
        save_depth_png(DepthFrame(data), dp)
        depth_paths.append(dp)
        if seq.color(t) is not None:
            cp = out / f"color_{t:04d}.png"
            save_color_png(seq.color(t), cp)
            color_paths.append(cp)
    save_manifest(
        out / "noisy_manifest.txt",
        depth_paths,
        color_paths if len(color_paths) == len(depth_paths) else None,
    )
    print(f"corrupted {len(seq)} frames (seed {base}) -> {out}")
    return 0


def run_bench(model, frames: int, seed: int = 0, resolutions=BENCH_RESOLUTIONS):
    """Time per-frame inference at each resolution via the fused restoration
    engine; fit time ~ pixels^alpha on the square resolutions.

    The scaling fit uses the per-resolution minimum, the estimator least
    contaminated by scheduler noise on shared machines; mean/std/median are
    reported alongside. Returns a stats dict.
    """
    from .model import InferenceEngine, tune_allocator

    tune_allocator()
    rng = np.random.default_rng(seed)
    rows = []
    for w, h in resolutions:
        engine = InferenceEngine(model, h, w)
        x = torch.from_numpy(
            rng.random((1, model.cfg.in_channels, h, w), dtype=np.float64).astype(np.float32)
        )
        for _ in range(3):  # warmup
            engine(x)
        times = []
        for _ in range(frames):
            t0 = time.perf_counter()
            engine(x)
            times.append(time.perf_counter() - t0)
        times = np.asarray(times)
        rows.append(
            {
                "width": w,
                "height": h,
                "pixels": w * h,
                "mean_s": float(times.mean()),
                "std_s": float(times.std()),
                "median_s": float(np.median(times)),
                "min_s": float(times.min()),
            }
        )
    squares = [r for r in rows if r["width"] == r["height"]]
    exponent = math.nan
    doubling = math.nan
    if len(squares) >= 2:
        logs = np.log([r["pixels"] for r in squares])
        logt = np.log([r["min_s"] for r in squares])
        exponent = float(np.polyfit(logs, logt, 1)[0])
    by_px = {r["pixels"]: r["min_s"] for r in squares}
    if 512 * 512 in by_px and 256 * 256 in by_px:
        doubling = by_px[512 * 512] / by_px[256 * 256]
    return {"rows": rows, "exponent": exponent, "doubling_ratio": float(doubling)}


def cmd_bench(ns, cfg: PipelineConfig, out: Path) -> int:
    if ns.weights:
        model = load_weights(ns.weights)
    else:
        model = build_model(NetworkConfig(), seed=_seed(cfg, ns))
    frames = ns.frames if ns.frames is not None else cfg["bench.frames"]
    stats = run_bench(model, frames, seed=_seed(cfg, ns))
    with open(out / "bench.csv", "w", newline="") as fh:
        fh.write(f"# seed={_seed(cfg, ns)}\n")
        writer = csv.writer(fh)
        writer.writerow(["width", "height", "pixels", "mean_s", "std_s", "median_s", "min_s"])
        for r in stats["rows"]:
            writer.writerow(
                [
                    r["width"], r["height"], r["pixels"],
                    repr(r["mean_s"]), repr(r["std_s"]), repr(r["median_s"]), repr(r["min_s"]),
                ]
            )
        writer.writerow([])
        writer.writerow(["fitted_exponent", repr(stats["exponent"])])
        writer.writerow(["doubling_ratio_256_to_512", repr(stats["doubling_ratio"])])
    for r in stats["rows"]:
        print(
            f"{r['width']}x{r['height']}: mean {r['mean_s'] * 1e3:.2f} ms "
            f"(std {r['std_s'] * 1e3:.2f}, median {r['median_s'] * 1e3:.2f})"
        )
    print(f"scaling exponent (time vs pixels): {stats['exponent']:.3f}")
    print(f"256^2 -> 512^2 time ratio: {stats['doubling_ratio']:.2f}")
    return 0


_COMMANDS = {
    "register": cmd_register,
    "make-targets": cmd_make_targets,
    "train": cmd_train,
    "restore": cmd_restore,
    "evaluate": cmd_evaluate,
    "synth-noise": cmd_synth_noise,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    from .model import tune_allocator

    tune_allocator()
    try:
        cfg = _apply_overrides(load_config(ns.config), ns)
        out = Path(ns.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_run_info(out, ns, _seed(cfg, ns))
        return _COMMANDS[ns.command](ns, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except TrainingDivergence as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except SredError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
