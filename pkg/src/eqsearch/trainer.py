"""Training: discounted joint loss, Adam, epoch loop, metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .model import Model, batch_embed, classify

log = logging.getLogger(__name__)


class DomainError(Exception):
    pass


@dataclass
class TrainConfig:
    epochs: int = 5
    batch_size: int = 128
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True
    clip_norm: float = None  # divergence guard, off by default

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        for name in ("lr", "beta1", "beta2", "eps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class MetricRow:
    epoch: int
    split: str
    mae: float
    accuracy: float
    dmse: float
    dce: float


METRICS_HEADER = "epoch,split,mae,accuracy,dmse,dce"


def metrics_csv(rows) -> str:
    lines = [METRICS_HEADER]
    for r in rows:
        lines.append(f"{r.epoch},{r.split},{r.mae!r},{r.accuracy!r},"
                     f"{r.dmse!r},{r.dce!r}")
    return "\n".join(lines) + "\n"


class Adam:
    """Adam with the usual bias-corrected moment estimates."""

    def __init__(self, params, cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self):
        cfg = self.cfg
        self.t += 1
        if cfg.clip_norm is not None:
            norm = math.sqrt(sum(
                float((p.grad ** 2).sum()) for p in self.params
                if p.grad is not None))
            if norm > cfg.clip_norm:
                factor = cfg.clip_norm / norm
                for p in self.params:
                    if p.grad is not None:
                        p.grad *= factor
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = cfg.beta1 * self.m[i] + (1 - cfg.beta1) * g
            self.v[i] = cfg.beta2 * self.v[i] + (1 - cfg.beta2) * g * g
            m_hat = self.m[i] / (1 - cfg.beta1 ** self.t)
            v_hat = self.v[i] / (1 - cfg.beta2 ** self.t)
            p.data -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def loss_scalar(p, logits, d, c):
    """Single-example discounted loss from plain floats; test surface."""
    if d < 1:
        raise DomainError("discount undefined for distance < 1")
    logits = np.asarray(logits, dtype=np.float64)
    m = logits.max()
    lse = m + math.log(np.exp(logits - m).sum())
    return ((p - d) ** 2 + (lse - logits[c])) / math.sqrt(d)


def batch_forward(examples, model: Model):
    """Loss Tensor plus raw predictions for a batch of Examples."""
    distances = np.array([e.distance for e in examples], dtype=np.float64)
    if np.any(distances < 1):
        raise DomainError("discount undefined for distance < 1")
    classes = np.array([int(e.first) for e in examples])
    h_s = batch_embed([e.source for e in examples], model)
    h_t = batch_embed([e.target for e in examples], model)
    p = ad.manhattan(h_s, h_t, axis=1)
    logits = classify(h_s, h_t, model)
    ce = ad.sub(ad.logsumexp(logits, axis=1), ad.gather_cols(logits, classes))
    err = ad.sub(p, ad.constant(distances))
    mse = ad.mul(err, err)
    per = ad.mul(ad.add(mse, ce), ad.constant(1.0 / np.sqrt(distances)))
    return ad.mean(per), p, logits


def evaluate(dataset, model: Model, batch_size=256):
    """MAE, strict first-transformation accuracy, discounted MSE/CE.

    Returns (summary dict, per-distance list of dicts).
    """
    if not dataset.examples:
        raise ValueError("dataset is empty")
    n = len(dataset.examples)
    abs_err = np.zeros(n)
    correct = np.zeros(n)
    dmse = np.zeros(n)
    dce = np.zeros(n)
    dist = np.array([e.distance for e in dataset.examples], dtype=np.float64)
    with ad.no_grad():
        for lo in range(0, n, batch_size):
            chunk = dataset.examples[lo:lo + batch_size]
            _, p, logits = batch_forward(chunk, model)
            d = dist[lo:lo + len(chunk)]
            c = np.array([int(e.first) for e in chunk])
            abs_err[lo:lo + len(chunk)] = np.abs(p.data - d)
            correct[lo:lo + len(chunk)] = (logits.data.argmax(axis=1) == c)
            m = logits.data.max(axis=1, keepdims=True)
            lse = (m + np.log(np.exp(logits.data - m)
                              .sum(axis=1, keepdims=True)))[:, 0]
            ce = lse - logits.data[np.arange(len(chunk)), c]
            dmse[lo:lo + len(chunk)] = (p.data - d) ** 2 / np.sqrt(d)
            dce[lo:lo + len(chunk)] = ce / np.sqrt(d)
    summary = {
        "mae": float(abs_err.mean()),
        "accuracy": float(correct.mean()),
        "dmse": float(dmse.mean()),
        "dce": float(dce.mean()),
    }
    per_distance = []
    for d in sorted(set(int(v) for v in dist)):
        mask = dist == d
        per_distance.append({
            "distance": d,
            "count": int(mask.sum()),
            "mae": float(abs_err[mask].mean()),
            "accuracy": float(correct[mask].mean()),
        })
    return summary, per_distance


class DivergenceError(Exception):
    """Training produced non-finite values; .checkpoint holds last good params."""

    def __init__(self, checkpoint):
        self.checkpoint = checkpoint
        super().__init__("training diverged (non-finite loss)")


def _snapshot(model: Model):
    return {name: p.data.copy() for name, p in model.params.items()}


def train(train_set, val_set, cfg: TrainConfig, model: Model):
    """Adam epochs over shuffled batches; returns (model, metric rows)."""
    if not train_set.examples or not val_set.examples:
        raise ValueError("datasets must be nonempty")
    params = model.param_list()
    opt = Adam(params, cfg)
    rng = np.random.default_rng(cfg.seed)
    rows = []

    def record(epoch):
        for split, ds in (("train", train_set), ("validation", val_set)):
            summary, _ = evaluate(ds, model)
            rows.append(MetricRow(epoch, split, summary["mae"],
                                  summary["accuracy"], summary["dmse"],
                                  summary["dce"]))

    if cfg.epochs == 0:
        record(0)
        return model, rows

    checkpoint = _snapshot(model)
    n = len(train_set.examples)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n, cfg.batch_size):
            batch = [train_set.examples[i] for i in order[lo:lo + cfg.batch_size]]
            ad.zero_grads(params)
            loss, _, _ = batch_forward(batch, model)
            value = float(loss.data)
            if not math.isfinite(value):
                raise DivergenceError(checkpoint)
            loss.backward()
            opt.step()
            epoch_loss += value
            n_batches += 1
        checkpoint = _snapshot(model)
        record(epoch)
        log.info("epoch %d: mean batch loss %.4f, val mae %.3f, val acc %.3f",
                 epoch, epoch_loss / n_batches, rows[-1].mae, rows[-1].accuracy)
    return model, rows


def any_valid_first_accuracy(dataset, model: Model, max_depth, batch_size=256):
    """Accuracy where a prediction counts if it is any shortest-path first.

    Needs BFS per example; intended for small report runs only.
    """
    from .oracle import shortest_first_transformations

    n = len(dataset.examples)
    hits = 0
    with ad.no_grad():
        for lo in range(0, n, batch_size):
            chunk = dataset.examples[lo:lo + batch_size]
            _, _, logits = batch_forward(chunk, model)
            pred = logits.data.argmax(axis=1)
            for e, guess in zip(chunk, pred):
                valid = shortest_first_transformations(
                    e.source, e.target, max_depth)
                hits += int(guess in {int(t) for t in valid})
    return hits / n
