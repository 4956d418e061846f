import enum
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from inv_transfer.transforms2d.dataset import AssetConfig
from inv_transfer.transforms2d.errors import AssetIOError, BadParameterError
from inv_transfer.transforms2d.transforms import KernelOptions


class ExperimentKind(enum.Enum):
    FACTOR_COMPARISON = 'factor_comparison'
    IRRELEVANT_FEATURES = 'irrelevant_features'
    RELEVANCE_AVAILABILITY = 'relevance_availability'
    OOD_INVARIANCE = 'ood_invariance'
    NESTED_MISMATCH = 'nested_mismatch'
    FULL_FINETUNE = 'full_finetune'


FACTORS = ('sample_count', 'architecture', 'class_relationship')
ALPHA_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 0.85, 0.9, 0.95, 1.0)
BETA_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)

SCALES = {
    'desk': dict(classes=10, n_train=5000, n_val=1000, n_test=1000, pretrain_epochs=20,
                 probe_epochs=40, finetune_epochs=20, sens_pairs=2000, seeds=(0, 1, 2),
                 sample_grid=(1000, 2500, 5000), nested_max_k=5),
    'full': dict(classes=30, n_train=50000, n_val=10000, n_test=10000, pretrain_epochs=50,
                 probe_epochs=200, finetune_epochs=50, sens_pairs=10000, seeds=tuple(range(10)),
                 sample_grid=(1000, 10000, 50000, 100000, 500000), nested_max_k=8),
}

# alternative names accepted wherever a scale is given
SCALE_ALIASES = {'paper': 'full'}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: ExperimentKind
    scale: str = 'desk'
    seeds: tuple = (0, 1, 2)
    classes: int = 10
    n_train: int = 5000
    n_val: int = 1000
    n_test: int = 1000
    pretrain_epochs: int = 20
    probe_epochs: int = 40
    finetune_epochs: int = 20
    sens_pairs: int = 2000
    sample_grid: tuple = (1000, 2500, 5000)
    nested_max_k: int = 5
    factor: str = 'sample_count'
    grid: tuple = ()
    arch: str = 'cnn-32'
    rep_dim: int = 128
    n_transforms: int = 3
    domain: str = 'transforms2d'
    alpha_grid: tuple = ALPHA_GRID
    beta_grid: tuple = BETA_GRID
    finetune_sizes: tuple = (200, 2000)
    lr: float = 1e-3
    batch_size: int = 128
    cifar_dir: str = None
    out: str = 'results'
    workers: int = 1
    assets: AssetConfig = field(default_factory=AssetConfig)
    kernel: KernelOptions = field(default_factory=KernelOptions)

    def __post_init__(self):
        object.__setattr__(self, 'kind', ExperimentKind(self.kind))
        object.__setattr__(self, 'scale', SCALE_ALIASES.get(self.scale, self.scale))
        for name in ('seeds', 'sample_grid', 'grid', 'alpha_grid', 'beta_grid', 'finetune_sizes'):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.seeds:
            raise BadParameterError('an experiment needs at least one seed')
        if self.scale not in SCALES:
            raise BadParameterError('scale must be one of {}, got {!r}'.format(
                sorted(SCALES), self.scale))
        if self.factor not in FACTORS:
            raise BadParameterError('factor must be one of {}, got {!r}'.format(FACTORS, self.factor))
        if self.domain not in ('transforms2d', 'cifar'):
            raise BadParameterError('domain must be transforms2d or cifar, got {!r}'.format(
                self.domain))

    @classmethod
    def from_scale(cls, kind, scale='desk', **overrides):
        scale = SCALE_ALIASES.get(scale, scale)
        if scale not in SCALES:
            raise BadParameterError('unknown scale {!r}'.format(scale))
        values = dict(SCALES[scale])
        values.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(values) - {f.name for f in fields(cls)}
        if unknown:
            raise BadParameterError('unknown experiment config keys: {}'.format(sorted(unknown)))
        return cls(kind=kind, scale=scale, **values)

    def replace(self, **changes):
        return replace(self, **changes)

    def factor_grid(self):
        if self.grid:
            return self.grid
        if self.factor == 'sample_count':
            return self.sample_grid
        if self.factor == 'architecture':
            return ('mlp-small', 'mlp-wide', 'cnn-32', 'cnn-64')
        return ('sub', 'disj', 'same', 'sup')

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d['kind'] = self.kind.value
        d['assets'] = self.assets.to_dict()
        d['kernel'] = asdict(self.kernel)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if 'assets' in d:
            d['assets'] = AssetConfig.from_dict(d['assets'])
        if 'kernel' in d:
            d['kernel'] = KernelOptions(**d['kernel'])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise BadParameterError('unknown experiment config keys: {}'.format(sorted(unknown)))
        return cls(**d)


def load_yaml(path):
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise AssetIOError(path, e)
    if not isinstance(data, dict):
        raise BadParameterError('{}: config must be a mapping'.format(path))
    return data


def build_config(kind, path=None, scale=None, **overrides):
    """Scale preset, then config file values, then explicit overrides."""
    values = load_yaml(path) if path else {}
    file_scale = values.pop('scale', None)
    scale = scale or file_scale or 'desk'
    values.pop('kind', None)
    if 'assets' in values:
        values['assets'] = AssetConfig.from_dict(values['assets'])
    if 'kernel' in values:
        values['kernel'] = KernelOptions(**values['kernel'])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_scale(kind, scale, **values)
