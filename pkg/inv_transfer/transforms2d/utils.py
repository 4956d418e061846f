import hashlib

import numpy as np
import torch
import torch.nn as nn

from inv_transfer.transforms2d.errors import BadInputError


def update_linear_schedule(optimizer, epoch, total_num_epochs, initial_lr):
    """Decreases the learning rate linearly"""
    lr = initial_lr - (initial_lr * (epoch / float(total_num_epochs)))
    for param_group in optimizer.param_groups:
        param_group['lr'] = lr


def init(module, weight_init, bias_init):
    weight_init(module.weight.data)
    bias_init(module.bias.data)
    return module


def kaiming_uniform(w):
    return nn.init.kaiming_uniform_(w, nonlinearity='relu')


def zeros(b):
    return nn.init.constant_(b, 0)


def parameters_digest(parameters):
    h = hashlib.sha256()
    for p in parameters:
        h.update(p.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def to_input(images, dtype=torch.float32):
    """uint8 NxHxWxC pixels (numpy or torch) -> float NxCxHxW in [0, 1].

    Float tensors are taken to be normalized NCHW batches already.
    """
    if isinstance(images, np.ndarray):
        images = torch.from_numpy(np.ascontiguousarray(images))
    if not torch.is_tensor(images):
        raise BadInputError('expected an image batch, got {}'.format(type(images).__name__))
    if images.dtype == torch.uint8:
        if images.dim() != 4:
            raise BadInputError('expected NxHxWxC pixels, got shape {}'.format(tuple(images.shape)))
        return images.permute(0, 3, 1, 2).to(dtype) / 255.0
    return images.to(dtype)


def batch_indices(n, batch_size, generator=None):
    order = torch.randperm(n, generator=generator) if generator is not None else torch.arange(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]
