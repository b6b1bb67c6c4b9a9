"""Self-supervised training on dilated frame triples, target generation via
registration + guided inpainting, and inference on consecutive triples.

Training pairs hide the target frame from the input: inputs are
(d_{t-4}, d_{t-2}, d_t) and the target is the inpainted d*_{t-1}, so the
network cannot learn the identity. Two comparison modes reuse the same
architecture with raw (non-inpainted) next-frame targets: `n2n` trains a
single-frame denoiser (d_{t-1} -> d_t), `n2stack` a consecutive-triple one
((d_{t-3}, d_{t-2}, d_{t-1}) -> d_t).
"""

from __future__ import annotations

import copy
import csv
import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from .errors import DataError, TrainingDivergence
from .frames import (
    DEFAULT_MAX_DEPTH_MM,
    DepthFrame,
    FrameSequence,
    denormalize,
    normalize,
    window_training_samples,
)
from .inpaint import InpaintConfig, inpaint_guided
from .model import DepthDenoiser
from .registration import CameraRig, build_registered_color


@dataclass(frozen=True)
class TrainConfig:
    batch: int = 16
    epochs: int = 200
    lr: float = 1e-4
    seed: int = 0
    val_split: float = 0.1
    test_split: float = 0.04
    max_depth_mm: float = DEFAULT_MAX_DEPTH_MM
    max_steps: Optional[int] = None  # hard cap on optimizer steps (smoke runs)

    def __post_init__(self):
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if not (0.0 < self.val_split < 1.0) or not (0.0 < self.test_split < 1.0):
            raise ValueError("splits must lie in (0, 1)")
        if self.val_split + self.test_split >= 1.0:
            raise ValueError("val_split + test_split must leave training data")


@dataclass
class EpochStats:
    epoch: int
    train_l1: float
    val_l1: float
    wall_seconds: float


def make_target(
    depth_tm1: DepthFrame,
    color_tm1,
    rig: CameraRig,
    inpaint_cfg: InpaintConfig = InpaintConfig(),
) -> DepthFrame:
    """Inpainted target d*_{t-1}: register color onto the depth grid, then
    guide the hole fill with it."""
    if color_tm1 is None:
        raise DataError("target generation needs the color frame for d_{t-1}")
    registered = build_registered_color(depth_tm1, color_tm1, rig)
    return inpaint_guided(depth_tm1, registered, inpaint_cfg)


def _mode_windows(seq: FrameSequence, mode: str):
    """(input_indices, target_index) tuples for one sequence."""
    n = len(seq)
    if mode == "sred":
        return [(w.input_indices, w.target_index) for w in window_training_samples(seq)]
    if mode == "n2n":
        if n < 2:
            raise DataError("n2n windowing needs at least 2 frames")
        return [((t - 1,), t) for t in range(1, n)]
    if mode == "n2stack":
        if n < 4:
            raise DataError("n2stack windowing needs at least 4 frames")
        return [((t - 3, t - 2, t - 1), t) for t in range(3, n)]
    raise ValueError(f"unknown training mode {mode!r}")


def split_samples(n_samples: int, tcfg: TrainConfig):
    """Shuffle sample indices with the seeded generator, then carve off the
    validation and test splits (in that order); the rest trains."""
    if n_samples < 1:
        raise DataError("no training samples")
    rng = np.random.default_rng(tcfg.seed)
    order = rng.permutation(n_samples)
    n_val = int(round(tcfg.val_split * n_samples))
    n_test = int(round(tcfg.test_split * n_samples))
    val = order[:n_val]
    test = order[n_val : n_val + n_test]
    train = order[n_val + n_test :]
    if len(train) == 0:
        raise DataError("splits leave no training samples")
    return train, val, test


def build_training_set(
    sequences: Sequence[FrameSequence],
    mode: str,
    tcfg: TrainConfig,
    rig: Optional[CameraRig] = None,
    inpaint_cfg: InpaintConfig = InpaintConfig(),
):
    """Materialize normalized (input_stack, target, target_mask) triples.

    For the dilated mode the targets are generated on the fly (registration +
    guided inpainting, requires rig and per-frame color); the comparison
    modes use raw next frames and need neither.
    """
    inputs, targets, masks = [], [], []
    for seq in sequences:
        for in_idx, tgt_idx in _mode_windows(seq, mode):
            if mode == "sred":
                if rig is None:
                    raise DataError("sred mode needs a camera rig for target generation")
                tgt = make_target(seq.depth(tgt_idx), seq.color(tgt_idx), rig, inpaint_cfg)
            else:
                tgt = seq.depth(tgt_idx)
            tgt_n = normalize(tgt, tcfg.max_depth_mm)
            stack = np.stack(
                [normalize(seq.depth(i), tcfg.max_depth_mm).data for i in in_idx]
            )
            inputs.append(stack)
            targets.append(tgt_n.data)
            masks.append(tgt_n.mask)
    if not inputs:
        raise DataError("empty dataset")
    return (
        np.asarray(inputs, dtype=np.float32),
        np.asarray(targets, dtype=np.float32),
        np.asarray(masks, dtype=bool),
    )


def _masked_l1(pred: torch.Tensor, target: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    denom = mask.sum()
    if denom.item() == 0:
        return torch.zeros((), dtype=pred.dtype)
    return (torch.abs(pred - target) * mask).sum() / denom


def _eval_l1(model, inputs, targets, masks, idx, batch) -> float:
    if len(idx) == 0:
        return math.nan
    total = 0.0
    weight = 0.0
    with torch.no_grad():
        for s in range(0, len(idx), batch):
            sel = idx[s : s + batch]
            x = torch.from_numpy(inputs[sel])
            y = torch.from_numpy(targets[sel]).unsqueeze(1)
            m = torch.from_numpy(masks[sel]).unsqueeze(1).float()
            pred = model(x)
            n = float(m.sum().item())
            if n > 0:
                total += float((torch.abs(pred - y) * m).sum().item())
                weight += n
    return total / weight if weight > 0 else math.nan


def train(
    model: DepthDenoiser,
    sequences: Sequence[FrameSequence],
    tcfg: TrainConfig = TrainConfig(),
    rig: Optional[CameraRig] = None,
    inpaint_cfg: InpaintConfig = InpaintConfig(),
    mode: str = "sred",
    log_path=None,
):
    """Minimize masked L1 between predictions and targets with Adam.

    Returns (model, history); the model carries the best-validation-loss
    parameters seen during training (final-epoch parameters when there is no
    validation split content). History row 0 is the pre-training evaluation.
    """
    inputs, targets, masks = build_training_set(sequences, mode, tcfg, rig, inpaint_cfg)
    train_idx, val_idx, _ = split_samples(len(inputs), tcfg)

    torch.manual_seed(tcfg.seed)
    rng = np.random.default_rng(tcfg.seed + 1)
    opt = torch.optim.Adam(model.parameters(), lr=tcfg.lr)

    t0 = time.perf_counter()
    history = [
        EpochStats(
            0,
            _eval_l1(model, inputs, targets, masks, train_idx, tcfg.batch),
            _eval_l1(model, inputs, targets, masks, val_idx, tcfg.batch),
            time.perf_counter() - t0,
        )
    ]
    best_val = history[0].val_l1
    best_state = copy.deepcopy(model.state_dict())
    steps = 0
    done = False

    for epoch in range(1, tcfg.epochs + 1):
        order = rng.permutation(train_idx)
        model.train()
        loss_sum = 0.0
        loss_n = 0
        for s in range(0, len(order), tcfg.batch):
            sel = order[s : s + tcfg.batch]
            x = torch.from_numpy(inputs[sel])
            y = torch.from_numpy(targets[sel]).unsqueeze(1)
            m = torch.from_numpy(masks[sel]).unsqueeze(1).float()
            opt.zero_grad()
            loss = _masked_l1(model(x), y, m)
            if not torch.isfinite(loss):
                raise TrainingDivergence(
                    f"non-finite loss at epoch {epoch}, step {steps}"
                )
            loss.backward()
            opt.step()
            loss_sum += float(loss.item())
            loss_n += 1
            steps += 1
            if tcfg.max_steps is not None and steps >= tcfg.max_steps:
                done = True
                break
        model.eval()
        val_l1 = _eval_l1(model, inputs, targets, masks, val_idx, tcfg.batch)
        history.append(
            EpochStats(
                epoch,
                loss_sum / max(loss_n, 1),
                val_l1,
                time.perf_counter() - t0,
            )
        )
        if not math.isnan(val_l1) and (math.isnan(best_val) or val_l1 < best_val):
            best_val = val_l1
            best_state = copy.deepcopy(model.state_dict())
        if done:
            break

    if not math.isnan(best_val):
        model.load_state_dict(best_state)
    if log_path is not None:
        write_training_log(history, log_path)
    return model, history


def write_training_log(history: Sequence[EpochStats], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_l1", "val_l1", "wall_seconds"])
        for row in history:
            writer.writerow([row.epoch, repr(row.train_l1), repr(row.val_l1), repr(row.wall_seconds)])


def infer(
    model: DepthDenoiser,
    d_tm2: DepthFrame,
    d_tm1: DepthFrame,
    d_t: DepthFrame,
    max_depth_mm: float = DEFAULT_MAX_DEPTH_MM,
) -> DepthFrame:
    """Restore d_t from the consecutive triple (d_{t-2}, d_{t-1}, d_t)."""
    frames = (d_tm2, d_tm1, d_t)
    dims = {(f.height, f.width) for f in frames}
    if len(dims) != 1:
        raise DataError("inference frames must share dimensions")
    if model.cfg.in_channels != 3:
        raise DataError(
            f"triple-frame inference needs a 3-channel model, got {model.cfg.in_channels}"
        )
    stack = np.stack([normalize(f, max_depth_mm).data for f in frames])
    return _run(model, stack, max_depth_mm)


def infer_single(
    model: DepthDenoiser, d_t: DepthFrame, max_depth_mm: float = DEFAULT_MAX_DEPTH_MM
) -> DepthFrame:
    """Single-frame restoration (n2n-mode models)."""
    if model.cfg.in_channels != 1:
        raise DataError(
            f"single-frame inference needs a 1-channel model, got {model.cfg.in_channels}"
        )
    stack = normalize(d_t, max_depth_mm).data[None]
    return _run(model, stack, max_depth_mm)


def infer_variant(
    mode: str,
    model: DepthDenoiser,
    frames: Sequence[DepthFrame],
    max_depth_mm: float = DEFAULT_MAX_DEPTH_MM,
) -> DepthFrame:
    """Comparison-mode inference: `n2n_single` restores the newest frame from
    itself alone; `n2stack_adjacent` from the consecutive triple ending at it."""
    if mode in ("n2n_single", "n2n"):
        if len(frames) < 1:
            raise DataError("n2n inference needs one frame")
        return infer_single(model, frames[-1], max_depth_mm)
    if mode in ("n2stack_adjacent", "n2stack"):
        if len(frames) < 3:
            raise DataError("n2stack inference needs three consecutive frames")
        return infer(model, frames[-3], frames[-2], frames[-1], max_depth_mm)
    raise ValueError(f"unknown variant mode {mode!r}")


def _run(model: DepthDenoiser, stack: np.ndarray, max_depth_mm: float) -> DepthFrame:
    model.eval()
    with torch.no_grad():
        x = torch.from_numpy(stack.astype(np.float32)).unsqueeze(0)
        pred = model(x)[0, 0].numpy()
    from .frames import NormalizedFrame

    out = NormalizedFrame(np.clip(pred, 0.0, 1.0), np.ones_like(pred, dtype=bool))
    return denormalize(out, max_depth_mm)


def restore_sequence(
    model: DepthDenoiser,
    seq: FrameSequence,
    max_depth_mm: float = DEFAULT_MAX_DEPTH_MM,
):
    """Restore every frame with t >= 2; returns (frames, per-frame seconds).

    Uses the fused shape-specialized inference engine (all frames in a
    sequence share one shape); per-frame times exclude the one-off engine
    build.
    """
    if len(seq) < 3:
        raise DataError("restoration needs at least 3 frames")
    from .frames import NormalizedFrame
    from .model import InferenceEngine

    h, w = seq.depth(0).height, seq.depth(0).width
    engine = InferenceEngine(model, h, w)
    out, times = [], []
    for t in range(2, len(seq)):
        t0 = time.perf_counter()
        if model.cfg.in_channels == 3:
            frames = (seq.depth(t - 2), seq.depth(t - 1), seq.depth(t))
        else:
            frames = (seq.depth(t),)
        stack = np.stack([normalize(f, max_depth_mm).data for f in frames]).astype(np.float32)
        pred = engine(torch.from_numpy(stack).unsqueeze(0))[0, 0].numpy()
        restored = denormalize(
            NormalizedFrame(np.clip(pred, 0.0, 1.0), np.ones_like(pred, dtype=bool)),
            max_depth_mm,
        )
        times.append(time.perf_counter() - t0)
        out.append(restored)
    return out, times
