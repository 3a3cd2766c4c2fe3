"""Mini-batch SGD-with-momentum training over a split manifest."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import model as M
from .dataset import label_matrix
from .errors import EmptySplitError
from .imaging import PipelineConfig, load_images, prepare_batch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


def augment_seed(seed: int, epoch: int, index: int) -> int:
    """Per-(epoch, image) augmentation seed derived from the run seed."""
    ss = np.random.SeedSequence([int(seed), int(epoch), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def evaluate_loss(model, inputs, labels, batch_size=256) -> float:
    total = 0.0
    for start in range(0, len(inputs), batch_size):
        p = M.forward(model, inputs[start : start + batch_size])
        total += M.loss(p, labels[start : start + batch_size]) * len(p)
    return total / len(inputs)


def train(model, split_manifest, config: PipelineConfig, hp: M.Hyperparams, images=None, callback=None):
    """Train ``model`` in place on the split's train part.

    Runs ``epochs * ceil(N / batch_size)`` SGDM steps with a fresh seeded
    shuffle each epoch. Training images are augmented (if enabled); the
    validation loss is computed once per epoch on un-augmented inputs.
    ``images`` may map entry paths to preloaded arrays. Returns
    ``(model, history)``.
    """
    train_entries = list(split_manifest.train)
    val_entries = list(split_manifest.validation)
    if not train_entries or not val_entries:
        raise EmptySplitError("training needs non-empty train and validation splits")

    images = dict(images or {})
    missing = [e.path for e in train_entries + val_entries if e.path not in images]
    images.update(zip(missing, load_images(missing, config.workers)))

    train_imgs = [images[e.path] for e in train_entries]
    y_train = label_matrix(train_entries)
    x_val = prepare_batch(config, [images[e.path] for e in val_entries])
    y_val = label_matrix(val_entries)

    opt = M.init_optimizer(model)
    rng = np.random.default_rng(hp.seed)
    n = len(train_entries)
    steps = math.ceil(n / hp.batch_size)
    history = []
    for epoch in range(hp.epochs):
        lr = hp.rate_for_epoch(epoch)
        order = rng.permutation(n)
        running = 0.0
        for step in range(steps):
            idx = order[step * hp.batch_size : (step + 1) * hp.batch_size]
            seeds = [augment_seed(hp.seed, epoch, int(i)) for i in idx] if config.augment else None
            xb = prepare_batch(config, [train_imgs[i] for i in idx], seeds)
            grads, value = M.backward(model, xb, y_train[idx])
            M.sgdm_step(model, opt, grads, hp, learning_rate=lr)
            running += value * len(idx)
        record = EpochRecord(epoch + 1, running / n, evaluate_loss(model, x_val, y_val))
        history.append(record)
        log.info("epoch %d  train_loss %.6f  val_loss %.6f", record.epoch, record.train_loss, record.val_loss)
        if callback is not None:
            callback(record)
    return model, history


def write_history(history, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for r in history:
            w.writerow([r.epoch, repr(r.train_loss), repr(r.val_loss)])


def read_history(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return [EpochRecord(int(r["epoch"]), float(r["train_loss"]), float(r["val_loss"])) for r in csv.DictReader(fh)]
