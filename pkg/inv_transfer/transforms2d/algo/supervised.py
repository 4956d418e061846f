import logging
import time
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import pandas as pd
import torch
import torch.nn as nn
import torch.nn.functional as F
import torch.optim as optim

from inv_transfer.transforms2d.errors import BadInputError, BadParameterError, DivergenceError
from inv_transfer.transforms2d.model import ModelState, prepare, representation_fn
from inv_transfer.transforms2d.utils import (batch_indices, init, kaiming_uniform,
                                             update_linear_schedule, zeros)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 128
    schedule: str = 'constant'
    seed: int = 0
    log_path: str = None

    def __post_init__(self):
        if self.lr <= 0:
            raise BadParameterError('learning rate must be positive, got {}'.format(self.lr))
        if self.schedule not in ('constant', 'linear'):
            raise BadParameterError('schedule must be constant or linear, got {!r}'.format(
                self.schedule))
        if self.epochs < 0 or self.batch_size < 1:
            raise BadParameterError('epochs must be >= 0 and batch_size >= 1')
        object.__setattr__(self, 'betas', tuple(self.betas))

    def replace(self, **changes):
        return replace(self, **changes)


class DataSplits(NamedTuple):
    train: object
    val: object = None
    test: object = None


class SupervisedLearner():
    """Adam on cross-entropy for any module mapping inputs to logits."""

    def __init__(self,
                 module,
                 parameters,
                 lr=None,
                 betas=(0.9, 0.999),
                 eps=None):

        self.module = module
        self.lr = lr
        self.optimizer = optim.Adam(parameters, lr=lr, betas=betas, eps=eps)

    @staticmethod
    def loss(logits, labels):
        """Batch cross-entropy, reduced in float64."""
        return F.cross_entropy(logits.double(), labels)

    def update(self, inputs, labels, batches, epoch):
        loss_epoch = 0.0
        correct = 0

        for idx in batches:
            logits = self.module(inputs(idx))
            loss = self.loss(logits, labels[idx])
            if not torch.isfinite(loss):
                raise DivergenceError(epoch, loss.item())

            self.optimizer.zero_grad()
            loss.backward()
            self.optimizer.step()

            loss_epoch += loss.item() * len(idx)
            correct += (logits.argmax(dim=1) == labels[idx]).sum().item()

        n = sum(len(idx) for idx in batches)
        return loss_epoch / n, correct / float(n)


def _labels(archive, class_count):
    labels = torch.from_numpy(np.asarray(archive.labels, dtype=np.int64))
    if labels.numel() and int(labels.max()) >= class_count:
        raise BadInputError('label {} exceeds class count {}'.format(int(labels.max()), class_count))
    return labels


def _accuracy(module, inputs, labels, n, batch_size=1024):
    if n == 0:
        return float('nan')
    correct = 0
    with torch.no_grad():
        for i in range(0, n, batch_size):
            idx = torch.arange(i, min(n, i + batch_size))
            correct += (module(inputs(idx)).argmax(dim=1) == labels[idx]).sum().item()
    return correct / float(n)


def _fit(module, params, inputs, labels, n, val_acc_fn, cfg, tag):
    """Train `module`; return the history and the state dict with best validation accuracy."""
    learner = SupervisedLearner(module, params, lr=cfg.lr, betas=cfg.betas, eps=cfg.eps)
    generator = torch.Generator().manual_seed(cfg.seed)
    best_acc, best_state = -1.0, None
    history = []
    start = time.time()
    for epoch in range(cfg.epochs):
        if cfg.schedule == 'linear':
            update_linear_schedule(learner.optimizer, epoch, cfg.epochs, learner.lr)
        module.train()
        loss, train_acc = learner.update(inputs, labels, batch_indices(n, cfg.batch_size, generator),
                                         epoch)
        module.eval()
        val_acc = val_acc_fn()
        if np.isnan(val_acc):
            val_acc = train_acc
        history.append({'epoch': epoch + 1, 'train_loss': loss, 'train_acc': train_acc,
                        'val_acc': val_acc})
        logger.info('%s epoch %d/%d, loss %.4f, train acc %.3f, val acc %.3f, %.1fs',
                    tag, epoch + 1, cfg.epochs, loss, train_acc, val_acc, time.time() - start)
        if val_acc > best_acc:
            best_acc = val_acc
            best_state = {k: v.detach().clone() for k, v in module.state_dict().items()}
    if cfg.log_path and history:
        pd.DataFrame(history, columns=['epoch', 'train_loss', 'train_acc', 'val_acc']).to_csv(
            cfg.log_path, index=False)
    return history, best_acc, best_state


def _image_source(m, archive):
    images = archive.images
    return lambda idx: prepare(m, images[idx.numpy()])


def train(m, data, cfg):
    """Cross-entropy training of all parameters; returns the best-validation checkpoint."""
    if not isinstance(data, DataSplits):
        data = DataSplits(*data) if isinstance(data, tuple) else DataSplits(data)
    if cfg.epochs == 0 or len(data.train) == 0:
        return m.clone()
    state = m.clone()
    net = state.net
    labels = _labels(data.train, state.config.class_count)
    inputs = _image_source(state, data.train)

    def logits(x):
        return net(x)[1]

    if data.val is not None and len(data.val):
        val_labels = _labels(data.val, state.config.class_count)
        val_inputs = _image_source(state, data.val)
        val_acc_fn = lambda: _accuracy(logits, val_inputs, val_labels, len(data.val))
    else:
        val_acc_fn = lambda: float('nan')

    history, best_acc, best_state = _fit(net, net.parameters(), inputs, labels, len(data.train),
                                         val_acc_fn, cfg, 'train')
    net.load_state_dict(best_state)
    state.epochs_seen += cfg.epochs
    state.best_val_acc = best_acc
    state.history = state.history + history
    return state


def evaluate(m, archive, batch_size=1024):
    labels = _labels(archive, m.config.class_count)
    inputs = _image_source(m, archive)
    m.net.eval()
    return _accuracy(lambda x: m.net(x)[1], inputs, labels, len(archive), batch_size)


def new_head(rep_dim, class_count, seed=0):
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return init(nn.Linear(rep_dim, class_count), kaiming_uniform, zeros)


def fit_linear_head(reps_train, y_train, class_count, cfg, reps_val=None, y_val=None):
    """Linear classifier on fixed representations (rows of `reps_*`)."""
    x = torch.as_tensor(np.asarray(reps_train), dtype=torch.float32)
    y = torch.as_tensor(np.asarray(y_train), dtype=torch.int64)
    head = new_head(x.shape[1], class_count, cfg.seed)
    if cfg.epochs == 0 or len(y) == 0:
        return head, float('nan')
    if reps_val is not None and len(y_val):
        xv = torch.as_tensor(np.asarray(reps_val), dtype=torch.float32)
        yv = torch.as_tensor(np.asarray(y_val), dtype=torch.int64)
        val_acc_fn = lambda: _accuracy(head, lambda idx: xv[idx], yv, len(yv))
    else:
        val_acc_fn = lambda: float('nan')
    _, best_acc, best_state = _fit(head, head.parameters(), lambda idx: x[idx], y, len(y),
                                   val_acc_fn, cfg, 'probe')
    head.load_state_dict(best_state)
    return head, best_acc


def head_accuracy(head, reps, labels):
    x = torch.as_tensor(np.asarray(reps), dtype=torch.float32)
    y = torch.as_tensor(np.asarray(labels), dtype=torch.int64)
    head.eval()
    return _accuracy(head, lambda idx: x[idx], y, len(y))


def linear_probe(m, data, cfg):
    """Train a new head on frozen representations; returns (head, test accuracy)."""
    rep_fn = representation_fn(m)
    reps = lambda archive: rep_fn(archive.images) if archive is not None else None
    class_count = data.train.class_count
    val = data.val if data.val is not None and len(data.val) else None
    head, _ = fit_linear_head(reps(data.train), data.train.labels, class_count, cfg,
                              reps(val), val.labels if val is not None else None)
    target = data.test if data.test is not None else (val if val is not None else data.train)
    return head, head_accuracy(head, reps(target), target.labels)


def attach_head(m, head):
    """Copy of `m` with its classifier replaced by `head`."""
    state = m.clone()
    state.net.head = type(head)(head.in_features, head.out_features)
    state.net.head.load_state_dict(head.state_dict())
    state.net.head.to(next(state.net.base.parameters()).dtype)
    state.config = state.config.replace(class_count=head.out_features)
    state.best_val_acc = None
    return state


def fine_tune_full(m, data, cfg, n_finetune):
    """Train every parameter on the first `n_finetune` target records, linear decay."""
    if n_finetune == 0:
        return m
    if not isinstance(data, DataSplits):
        data = DataSplits(*data)
    n = min(n_finetune, len(data.train))
    return train(m, DataSplits(data.train.subset(np.arange(n)), data.val, data.test),
                 cfg.replace(schedule='linear'))
