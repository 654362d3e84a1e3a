"""Joint training of the detection and semantic-matching heads.

Loss = mean BCE over labeled positions + sm_weight * mean (1 - cosine)
over corrupted positions, where the cosine compares the predicted
embedding against the hidden ground-truth sentence's embedding. Embedding
providers are frozen; backprop covers everything else. Deterministic under
a fixed seed in single-threaded mode.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .. import evalkit
from ..embedder import EmbeddingProvider
from .data import Batch, Vocab, iter_batches
from .model import DetectorModel, TransformerConfig, sigmoid

__all__ = [
    "TrainConfig",
    "DivergenceError",
    "compute_loss",
    "Adam",
    "train",
    "save_history",
    "predict",
    "predict_scores",
    "save_checkpoint",
    "load_checkpoint",
]


class DivergenceError(RuntimeError):
    def __init__(self, message: str, epoch: int, step: int, parts: dict):
        super().__init__(f"{message} (epoch {epoch}, step {step}, parts {parts})")
        self.epoch = epoch
        self.step = step
        self.parts = parts


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 20
    sm_weight: float = 1.0  # 0 recovers detection-only training
    threshold: float = 0.5
    seed: int = 0
    optimizer: str = "adam"  # "adam" | "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def to_dict(self) -> dict:
        return asdict(self)


def compute_loss(
    model: DetectorModel,
    batch: Batch,
    sm_weight: float = 1.0,
    train_rng=None,
    want_grads: bool = True,
):
    """Forward + (optionally) backward on one batch.

    Returns (parts, grads); parts carries the bce/sm/total breakdown and a
    counter of zero-norm SM predictions (treated as cosine 0)."""
    s, cache = model.forward(batch.x, batch.mask, train_rng)
    z, det_cache = model.detect_logits(s)
    y = batch.labels
    lm = batch.label_mask
    n_lab = lm.sum()
    if n_lab == 0:
        raise ValueError("batch has no labeled positions")
    # stable BCE from logits: max(z,0) - z*y + log(1+exp(-|z|))
    bce_terms = (np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))) * lm
    bce = float(bce_terms.sum() / n_lab)

    sm_loss = 0.0
    zero_sm = 0
    dh_hat = None
    sm_cache = None
    n_sm = batch.sm_mask.sum()
    if sm_weight > 0.0 and n_sm > 0:
        h_hat, sm_cache = model.sm_forward(s)
        norms = np.sqrt((h_hat * h_hat).sum(axis=-1))
        safe = (norms > 1e-8) & (batch.sm_mask > 0)
        zero_sm = int(((norms <= 1e-8) & (batch.sm_mask > 0)).sum())
        cos = np.zeros_like(norms)
        dots = (h_hat * batch.sm_targets).sum(axis=-1)
        np.divide(dots, norms, out=cos, where=safe)  # targets are unit norm
        sm_loss = float(((1.0 - cos) * batch.sm_mask).sum() / n_sm)
        if want_grads:
            # d(1-cos)/dh = -(t - cos * h/|h|) / |h| at safe positions
            inv = np.zeros_like(norms)
            np.divide(1.0, norms, out=inv, where=safe)
            unit = h_hat * inv[..., None]
            dh_hat = -(batch.sm_targets - cos[..., None] * unit) * inv[..., None]
            dh_hat *= (safe.astype(h_hat.dtype) * (sm_weight / n_sm))[..., None]

    total = bce + sm_weight * sm_loss
    parts = {"bce": bce, "sm": sm_loss, "total": total, "zero_sm": zero_sm}
    if not want_grads:
        return parts, None

    grads = model.zero_grads()
    dz = (sigmoid(z) - y) * lm / n_lab
    ds = model.detect_logits_backward(dz.astype(z.dtype), det_cache, grads)
    if dh_hat is not None:
        ds = ds + model.sm_backward(dh_hat.astype(s.dtype), sm_cache, grads)
    model.backward(ds, cache, grads)
    return parts, grads


class Adam:
    def __init__(self, model: DetectorModel, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in model.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in model.params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        cfg = self.cfg
        self.t += 1
        bc1 = 1.0 - cfg.beta1**self.t
        bc2 = 1.0 - cfg.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * g
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * g * g
            p -= cfg.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + cfg.adam_eps)


class Sgd:
    def __init__(self, model: DetectorModel, cfg: TrainConfig):
        self.cfg = cfg

    def step(self, params, grads):
        for k, p in params.items():
            p -= self.cfg.lr * grads[k]


def train(
    instances: Sequence,
    model: DetectorModel,
    cfg: TrainConfig,
    provider: EmbeddingProvider,
    vocab: Vocab | None = None,
    dev_instances: Sequence | None = None,
) -> list[dict]:
    """Train in place; returns per-epoch history rows
    (epoch, bce, sm, total, dev_auc)."""
    if not instances:
        raise ValueError("no training instances")
    frozen = provider.checksum()
    mode = model.config.mode
    dtype = model.config.np_dtype
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    opt = Adam(model, cfg) if cfg.optimizer == "adam" else Sgd(model, cfg)
    dropout_rng = (
        np.random.Generator(np.random.PCG64(cfg.seed + 1))
        if model.config.dropout > 0.0
        else None
    )
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(instances))
        sums = {"bce": 0.0, "sm": 0.0, "total": 0.0}
        n_batches = 0
        for step, batch in enumerate(
            iter_batches(instances, cfg.batch_size, provider, mode, vocab, dtype, order)
        ):
            parts, grads = compute_loss(model, batch, cfg.sm_weight, dropout_rng)
            if not math.isfinite(parts["total"]):
                raise DivergenceError("non-finite loss", epoch, step, parts)
            opt.step(model.params, grads)
            for k in sums:
                sums[k] += parts[k]
            n_batches += 1
        row = {
            "epoch": epoch,
            "bce": sums["bce"] / n_batches,
            "sm": sums["sm"] / n_batches,
            "total": sums["total"] / n_batches,
            "dev_auc": float("nan"),
        }
        if dev_instances:
            preds = predict_scores(dev_instances, model, provider, vocab)
            try:
                row["dev_auc"], _ = evalkit.auc([(p["score"], p["gold"]) for p in preds])
            except evalkit.DegenerateClassError:
                pass
        history.append(row)
    if provider.checksum() != frozen:
        raise RuntimeError("embedding provider changed during training")
    return history


def save_history(history: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["epoch", "bce", "sm", "total", "dev_auc"])
        w.writeheader()
        for row in history:
            w.writerow(row)


def predict_scores(
    instances: Sequence,
    model: DetectorModel,
    provider: EmbeddingProvider,
    vocab: Vocab | None = None,
    batch_size: int = 64,
) -> list[dict]:
    """Pooled per-position scores: {"instance", "position", "score", "gold"}."""
    mode = model.config.mode
    dtype = model.config.np_dtype
    out = []
    for batch in iter_batches(instances, batch_size, provider, mode, vocab, dtype):
        s, _ = model.forward(batch.x, batch.mask)
        z, _ = model.detect_logits(s)
        p = sigmoid(z)
        for bi, (inst_id, positions) in enumerate(batch.meta):
            for seq_pos, task_pos, gold in positions:
                out.append(
                    {
                        "instance": inst_id,
                        "position": task_pos,
                        "score": float(p[bi, seq_pos]),
                        "gold": gold,
                    }
                )
    return out


def predict(
    instance,
    model: DetectorModel,
    provider: EmbeddingProvider,
    vocab: Vocab | None = None,
    threshold: float = 0.5,
) -> tuple[list[int], list[float]]:
    """Binary labels (score >= threshold) plus the raw scores."""
    recs = predict_scores([instance], model, provider, vocab)
    recs.sort(key=lambda r: r["position"])
    scores = [r["score"] for r in recs]
    return [1 if s >= threshold else 0 for s in scores], scores


# -- checkpoints -------------------------------------------------------------

_MAGIC = b"INCOCKPT"
_VERSION = 1


def save_checkpoint(model: DetectorModel, path, extra: dict | None = None) -> None:
    """Versioned header (config + named shapes + extra JSON) followed by the
    parameters as one flat little-endian float32 block."""
    names = sorted(model.params)
    header = {
        "config": model.config.to_dict(),
        "params": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
        "extra": extra or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, len(header_bytes)))
        f.write(header_bytes)
        for n in names:
            f.write(np.ascontiguousarray(model.params[n], dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[DetectorModel, dict]:
    with open(path, "rb") as f:
        if f.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not a detector checkpoint")
        version, header_len = struct.unpack("<II", f.read(8))
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        header = json.loads(f.read(header_len).decode("utf-8"))
        config = TransformerConfig(**header["config"])
        model = DetectorModel.__new__(DetectorModel)
        model.config = config
        model.params = {}
        for spec in header["params"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(count * 4)
            arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
            model.params[spec["name"]] = arr.astype(config.np_dtype)
    return model, header["extra"]
