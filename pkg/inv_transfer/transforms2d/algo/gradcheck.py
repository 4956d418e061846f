"""
Central finite-difference check of the backward pass.

The model is rebuilt in float64; a random subsample of parameter entries is
perturbed by +-h and the loss difference is compared with autograd.  Entries
whose perturbation flips a ReLU or max-pool decision are skipped, since the
loss is not differentiable across those kinks.
"""
import logging
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from inv_transfer.transforms2d.model import init_model
from inv_transfer.transforms2d.rng import RngStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    n_checked: int
    passed: bool
    n_skipped: int = 0


class _KinkRecorder(object):
    """Records which side of every ReLU and max-pool decision the batch falls on."""

    def __init__(self, net):
        self.pattern = []
        self.handles = []
        for module in net.modules():
            if isinstance(module, nn.ReLU):
                self.handles.append(module.register_forward_hook(self._relu))
            elif isinstance(module, nn.MaxPool2d):
                self.handles.append(module.register_forward_hook(self._pool))

    def _relu(self, module, inputs, output):
        self.pattern.append(inputs[0] > 0)

    def _pool(self, module, inputs, output):
        _, idx = F.max_pool2d(inputs[0], module.kernel_size, module.stride, return_indices=True)
        self.pattern.append(idx)

    def run(self, fn):
        self.pattern = []
        value = fn()
        return value, self.pattern

    def close(self):
        for h in self.handles:
            h.remove()


def _same(a, b):
    return len(a) == len(b) and all(torch.equal(x, y) for x, y in zip(a, b))


def _loss(net, x, y):
    return F.cross_entropy(net(x)[1], y)


def gradient_check(cfg, tolerance=1e-4, batch=8, n_params=64, step=1e-6, seed=0, grad_hook=None):
    """`grad_hook(grads)` may rewrite the analytic gradients before comparison."""
    state = init_model(cfg)
    net = state.net.double()
    rng = RngStream(seed)
    x = torch.from_numpy(rng.uniform(0.0, 1.0, (batch,) + tuple(cfg.input_shape)))
    y = torch.from_numpy(rng.integers(0, cfg.class_count, batch).astype(np.int64))

    params = list(net.parameters())
    net.zero_grad()
    _loss(net, x, y).backward()
    grads = [p.grad.detach().clone() for p in params]
    if grad_hook is not None:
        grads = grad_hook(grads)

    sizes = np.array([p.numel() for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    recorder = _KinkRecorder(net)
    worst, checked, skipped = 0.0, 0, 0
    with torch.no_grad():
        _, base = recorder.run(lambda: _loss(net, x, y))
        for flat in rng.permutation(int(offsets[-1])):
            if checked == n_params:
                break
            k = int(np.searchsorted(offsets, flat, side='right') - 1)
            j = int(flat - offsets[k])
            entry = params[k].view(-1)
            orig = entry[j].item()
            entry[j] = orig + step
            plus, p_plus = recorder.run(lambda: _loss(net, x, y).item())
            entry[j] = orig - step
            minus, p_minus = recorder.run(lambda: _loss(net, x, y).item())
            entry[j] = orig
            if not (_same(base, p_plus) and _same(base, p_minus)):
                skipped += 1
                continue
            numeric = (plus - minus) / (2 * step)
            analytic = grads[k].view(-1)[j].item()
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-4)
            worst = max(worst, err)
            checked += 1
    recorder.close()
    # nothing compared is a failure, not a pass
    report = GradCheckReport(worst, tolerance, checked, checked > 0 and worst < tolerance, skipped)
    logger.info('gradient check: max rel error %.2e over %d entries, %d skipped at kinks (%s)',
                worst, checked, skipped, 'pass' if report.passed else 'FAIL')
    return report
