import copy
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

from inv_transfer.transforms2d.errors import BadInputError, BadParameterError, FormatError
from inv_transfer.transforms2d.storage import read_param_blocks, write_param_blocks
from inv_transfer.transforms2d.utils import (init, kaiming_uniform, parameters_digest,
                                             to_input, zeros)


class Flatten(nn.Module):
    def forward(self, x):
        return x.reshape(x.size(0), -1)


@dataclass(frozen=True)
class SmallCnn:
    blocks: int = 2
    channels: tuple = (32, 64)

    def to_dict(self):
        return {'type': 'cnn', 'blocks': self.blocks, 'channels': list(self.channels)}


@dataclass(frozen=True)
class Mlp:
    hidden: tuple = (256,)

    def to_dict(self):
        return {'type': 'mlp', 'hidden': list(self.hidden)}


def arch_from_dict(d):
    if d['type'] == 'cnn':
        return SmallCnn(int(d['blocks']), tuple(d['channels']))
    if d['type'] == 'mlp':
        return Mlp(tuple(d['hidden']))
    raise BadParameterError('unknown architecture type {!r}'.format(d['type']))


ARCHITECTURES = {
    'mlp-small': Mlp((256,)),
    'mlp-wide': Mlp((1024,)),
    'cnn-32': SmallCnn(2, (32, 64)),
    'cnn-64': SmallCnn(2, (64, 128)),
}


@dataclass(frozen=True)
class ModelConfig:
    arch: object = field(default_factory=SmallCnn)
    rep_dim: int = 128
    class_count: int = 10
    init_seed: int = 0
    input_shape: tuple = (3, 32, 32)

    def __post_init__(self):
        if isinstance(self.arch, str):
            if self.arch not in ARCHITECTURES:
                raise BadParameterError('unknown architecture {!r}; choose from {}'.format(
                    self.arch, sorted(ARCHITECTURES)))
            object.__setattr__(self, 'arch', ARCHITECTURES[self.arch])
        if self.rep_dim < 1 or self.class_count < 1:
            raise BadParameterError('rep_dim and class_count must be positive')
        object.__setattr__(self, 'input_shape', tuple(self.input_shape))

    def replace(self, **changes):
        d = dict(arch=self.arch, rep_dim=self.rep_dim, class_count=self.class_count,
                 init_seed=self.init_seed, input_shape=self.input_shape)
        d.update(changes)
        return ModelConfig(**d)

    def to_dict(self):
        return {'arch': self.arch.to_dict(), 'rep_dim': self.rep_dim,
                'class_count': self.class_count, 'init_seed': self.init_seed,
                'input_shape': list(self.input_shape)}

    @classmethod
    def from_dict(cls, d):
        return cls(arch_from_dict(d['arch']), d['rep_dim'], d['class_count'], d['init_seed'],
                   tuple(d['input_shape']))


class RepBase(nn.Module):
    """Representation body; its output is the penultimate activation."""

    def __init__(self, rep_dim):
        super(RepBase, self).__init__()
        self._rep_dim = rep_dim

    @property
    def output_size(self):
        return self._rep_dim


class CNNBase(RepBase):
    def __init__(self, num_inputs, rep_dim=128, blocks=2, channels=(32, 64)):
        super(CNNBase, self).__init__(rep_dim)

        init_ = lambda m: init(m, kaiming_uniform, zeros)

        layers = []
        width = num_inputs
        for b in range(blocks):
            out = channels[min(b, len(channels) - 1)]
            layers += [init_(nn.Conv2d(width, out, 3, padding=1)), nn.ReLU(), nn.MaxPool2d(2)]
            width = out

        self.main = nn.Sequential(
            *layers,
            nn.AdaptiveAvgPool2d(1),
            Flatten(),
            init_(nn.Linear(width, rep_dim)),
            nn.ReLU()
        )

    def forward(self, inputs):
        return self.main(inputs)


class MLPBase(RepBase):
    def __init__(self, num_inputs, rep_dim=128, hidden=(256,)):
        super(MLPBase, self).__init__(rep_dim)

        init_ = lambda m: init(m, kaiming_uniform, zeros)

        layers = [Flatten()]
        width = num_inputs
        for h in hidden:
            layers += [init_(nn.Linear(width, h)), nn.ReLU()]
            width = h

        self.main = nn.Sequential(
            *layers,
            init_(nn.Linear(width, rep_dim)),
            nn.ReLU()
        )

    def forward(self, inputs):
        return self.main(inputs)


class Classifier(nn.Module):
    """Representation body followed by a linear classifier head."""

    def __init__(self, cfg):
        super(Classifier, self).__init__()
        c, h, w = cfg.input_shape
        if isinstance(cfg.arch, SmallCnn):
            self.base = CNNBase(c, cfg.rep_dim, cfg.arch.blocks, cfg.arch.channels)
        elif isinstance(cfg.arch, Mlp):
            self.base = MLPBase(c * h * w, cfg.rep_dim, cfg.arch.hidden)
        else:
            raise NotImplementedError

        init_ = lambda m: init(m, kaiming_uniform, zeros)
        self.head = init_(nn.Linear(self.base.output_size, cfg.class_count))

    def forward(self, inputs):
        rep = self.base(inputs)
        return rep, self.head(rep)


@dataclass(eq=False)
class ModelState:
    net: Classifier
    config: ModelConfig
    epochs_seen: int = 0
    best_val_acc: float = None
    history: list = field(default_factory=list)

    def clone(self):
        return copy.deepcopy(self)

    def body_digest(self):
        return parameters_digest(self.net.base.parameters())

    def digest(self):
        return parameters_digest(self.net.parameters())

    def all_finite(self):
        return all(bool(torch.isfinite(p).all()) for p in self.net.parameters())


def init_model(cfg):
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.init_seed)
        net = Classifier(cfg)
    return ModelState(net, cfg)


def _check_shape(m, x):
    expected = tuple(m.config.input_shape)
    if tuple(x.shape[1:]) != expected:
        raise BadInputError('model expects inputs of shape {}, got {}'.format(
            expected, tuple(x.shape[1:])))


def prepare(m, batch):
    dtype = next(m.net.parameters()).dtype
    x = to_input(batch, dtype)
    _check_shape(m, x)
    return x


def forward(m, batch):
    """(representations, logits) of a uint8 NHWC or normalized float NCHW batch."""
    x = prepare(m, batch)
    m.net.eval()
    with torch.no_grad():
        return m.net(x)


def representation_fn(m, batch_size=512):
    """Callable mapping image batches to float64 penultimate representations."""
    def rep_fn(images):
        n = len(images)
        if n == 0:
            return np.zeros((0, m.config.rep_dim))
        out = [forward(m, images[i:i + batch_size])[0].double().numpy()
               for i in range(0, n, batch_size)]
        return np.concatenate(out, axis=0)
    return rep_fn


def save_checkpoint(state, path):
    header = {'config': state.config.to_dict(), 'epochs_seen': state.epochs_seen,
              'best_val_acc': state.best_val_acc, 'history': state.history}
    blocks = [(name, t.detach().cpu().numpy()) for name, t in state.net.state_dict().items()]
    write_param_blocks(path, header, blocks)


def load_checkpoint(path):
    header, blocks = read_param_blocks(path)
    cfg = ModelConfig.from_dict(header['config'])
    state = init_model(cfg)
    expected = state.net.state_dict()
    if [n for n, _ in blocks] != list(expected):
        raise FormatError('{}: parameter blocks do not match the declared architecture'.format(path))
    state.net.load_state_dict({n: torch.from_numpy(a) for n, a in blocks})
    state.epochs_seen = header.get('epochs_seen', 0)
    state.best_val_acc = header.get('best_val_acc')
    state.history = header.get('history', [])
    return state
