"""
Transforms-2D dataset construction.

A sample is an object prototype, transformed and pasted on a background:
x = b(t(o)).  Every sample owns an RngStream derived from (seed, split, index)
so datasets are byte-identical regardless of generation order or thread count.
"""
import enum
import functools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from inv_transfer.transforms2d import assets
from inv_transfer.transforms2d.errors import BadParameterError, EmptyCatalogError
from inv_transfer.transforms2d.rng import RngStream, StreamId
from inv_transfer.transforms2d.storage import DatasetArchive
from inv_transfer.transforms2d.transforms import (ALL_KINDS, DEFAULT_OPTIONS, KernelOptions,
                                                  Mode, Sprite, TransformSet, apply_to_image,
                                                  apply_to_sprite, quantize, sample_transform)

logger = logging.getLogger(__name__)


class Split(enum.Enum):
    TRAIN = 'train'
    VAL = 'val'
    TEST = 'test'

    @property
    def stream(self):
        return {Split.TRAIN: StreamId.TRAIN, Split.VAL: StreamId.VAL, Split.TEST: StreamId.TEST}[self]


@dataclass(frozen=True)
class AssetConfig:
    """Where prototypes and backgrounds come from.

    `sprites` is 'procedural', 'random_pattern' or a directory of PNGs;
    `backgrounds` is 'smooth_noise', 'uniform_random' or a directory.
    """
    sprites: str = 'procedural'
    sprite_count: int = 61
    sprite_seed: int = 7
    size_fraction: float = 0.7
    backgrounds: str = 'smooth_noise'
    background_count: int = 867
    background_seed: int = 1

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@functools.lru_cache(maxsize=16)
def load_catalog(asset_cfg, resolution=32):
    if asset_cfg.sprites == 'procedural':
        protos = assets.generate_procedural_sprites(asset_cfg.sprite_count, asset_cfg.sprite_seed,
                                                    size=resolution)
    elif asset_cfg.sprites == 'random_pattern':
        protos = assets.generate_random_pattern_sprites(
            asset_cfg.sprite_count, asset_cfg.size_fraction, asset_cfg.sprite_seed, size=resolution)
    else:
        protos = assets.import_assets(asset_cfg.sprites, assets.AssetKind.SPRITES, size=resolution)

    if asset_cfg.backgrounds in ('smooth_noise', 'uniform_random'):
        pool = assets.generate_backgrounds(asset_cfg.background_count, asset_cfg.backgrounds,
                                           asset_cfg.background_seed, size=resolution)
    else:
        pool = assets.import_assets(asset_cfg.backgrounds, assets.AssetKind.BACKGROUNDS,
                                    size=resolution)
    return tuple(protos), pool


@dataclass(frozen=True)
class DatasetConfig:
    objects: tuple
    transforms: TransformSet = None
    n_train: int = 50000
    n_val: int = 10000
    n_test: int = 10000
    resolution: int = 32
    seed: int = 0
    assets: AssetConfig = field(default_factory=AssetConfig)
    kernel: KernelOptions = DEFAULT_OPTIONS

    def __post_init__(self):
        objects = tuple(int(o) for o in self.objects)
        if not objects:
            raise EmptyCatalogError('a dataset needs at least one object')
        if len(set(objects)) != len(objects):
            raise BadParameterError('object ids must be distinct')
        if min(self.n_train, self.n_val, self.n_test) < 0:
            raise BadParameterError('sample counts must be non-negative')
        if not 1 <= self.resolution <= 128:
            raise BadParameterError('resolution {} outside 1..128'.format(self.resolution))
        object.__setattr__(self, 'objects', objects)

    @property
    def class_count(self):
        return len(self.objects)

    def count(self, split):
        return {Split.TRAIN: self.n_train, Split.VAL: self.n_val,
                Split.TEST: self.n_test}[Split(split)]

    def replace(self, **changes):
        d = dict(objects=self.objects, transforms=self.transforms, n_train=self.n_train,
                 n_val=self.n_val, n_test=self.n_test, resolution=self.resolution,
                 seed=self.seed, assets=self.assets, kernel=self.kernel)
        d.update(changes)
        return DatasetConfig(**d)

    def canonical(self):
        if self.transforms is None:
            return self
        return self.replace(transforms=self.transforms.canonical())

    def transform_names(self):
        return self.transforms.names() if self.transforms is not None else []

    def to_dict(self):
        return {
            'objects': list(self.objects),
            'transforms': self.transforms.to_dict() if self.transforms else None,
            'n_train': self.n_train,
            'n_val': self.n_val,
            'n_test': self.n_test,
            'resolution': self.resolution,
            'seed': self.seed,
            'assets': self.assets.to_dict(),
            'kernel': asdict(self.kernel),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d['objects'] = tuple(d['objects'])
        d['transforms'] = TransformSet.from_dict(d['transforms']) if d.get('transforms') else None
        d['assets'] = AssetConfig.from_dict(d.get('assets', {}))
        d['kernel'] = KernelOptions(**d.get('kernel', {}))
        return cls(**d)


def _on_canvas(pixels, shape):
    h, w = shape
    if pixels.shape[:2] == (h, w):
        return pixels
    sh, sw = pixels.shape[:2]
    if sh > h or sw > w:
        raise BadParameterError('sprite {}x{} larger than canvas {}x{}'.format(sh, sw, h, w))
    canvas = np.zeros((h, w, 4), dtype=np.uint8)
    top, left = (h - sh) // 2, (w - sw) // 2
    canvas[top:top + sh, left:left + sw] = pixels
    return canvas


def alpha_blend(fg_rgba, bg):
    a = fg_rgba[..., 3:4].astype(np.float64) / 255.0
    return quantize(a * fg_rgba[..., :3] + (1.0 - a) * bg.astype(np.float64))


def compose_scene(o, specs, b, opts=DEFAULT_OPTIONS):
    sprite = Sprite(_on_canvas(o.pixels, b.shape[:2]))
    fg = apply_to_sprite(specs, sprite, opts).pixels
    return alpha_blend(fg, b)


def _draw_specs(cfg, rng, sampler):
    """Untransformed datasets (transforms=None) draw nothing."""
    return sampler(cfg.transforms, rng) if cfg.transforms is not None else ()


def _sample_scene(cfg, protos, pool, rng, sampler=sample_transform):
    label = int(rng.integers(0, cfg.class_count))
    specs = _draw_specs(cfg, rng, sampler)
    b = int(rng.integers(0, len(pool)))
    return compose_scene(protos[cfg.objects[label]].sprite, specs, pool[b], cfg.kernel), label


def _check_objects(cfg, protos):
    if max(cfg.objects) >= len(protos) or min(cfg.objects) < 0:
        raise BadParameterError('object ids {} exceed catalog of {}'.format(
            list(cfg.objects), len(protos)))


def _fill(n, shape, make, workers):
    images = np.empty((n,) + tuple(shape), dtype=np.uint8)
    labels = np.empty(n, dtype=np.int64)

    def one(i):
        images[i], labels[i] = make(i)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(n)))
    else:
        for i in range(n):
            one(i)
    return images, labels


def generate_dataset(cfg, split=Split.TRAIN, workers=1):
    split = Split(split)
    protos, pool = load_catalog(cfg.assets, cfg.resolution)
    _check_objects(cfg, protos)
    canonical = cfg.canonical()
    n = cfg.count(split)

    def make(i):
        return _sample_scene(canonical, protos, pool, RngStream.for_sample(cfg.seed, split.stream, i))

    images, labels = _fill(n, (cfg.resolution, cfg.resolution, 3), make, workers)
    manifest = {'kind': 'transforms2d', 'split': split.value, 'seed': cfg.seed,
                'config': cfg.to_dict()}
    logger.info('generated %s split: %d samples, %d classes, transforms %s',
                split.value, n, cfg.class_count, cfg.transform_names())
    return DatasetArchive(images, labels, cfg.class_count, cfg.seed, manifest)


def generate_splits(cfg, workers=1):
    return tuple(generate_dataset(cfg, s, workers) for s in Split)


@dataclass(frozen=True)
class SplitProtocol:
    o_train: tuple
    o_eval: tuple
    t_train: TransformSet
    t_eval: TransformSet
    o_sub: tuple
    o_disj: tuple
    o_sup: tuple

    @property
    def o_same(self):
        return self.o_train

    def relationship(self, name):
        return {'sub': self.o_sub, 'disj': self.o_disj, 'same': self.o_same,
                'sup': self.o_sup}[name]

    def to_dict(self):
        return {'o_train': list(self.o_train), 'o_eval': list(self.o_eval),
                't_train': self.t_train.names(), 't_eval': self.t_eval.names(),
                'o_sub': list(self.o_sub), 'o_disj': list(self.o_disj), 'o_sup': list(self.o_sup)}


def derive_split(master_seed, available_objects, available_transforms=18, n_objects=30,
                 n_transforms=3):
    if available_objects < 2 * n_objects:
        raise BadParameterError('{} objects cannot hold two disjoint sets of {}'.format(
            available_objects, n_objects))
    if not 2 * n_transforms <= available_transforms <= len(ALL_KINDS):
        raise BadParameterError('{} transforms cannot hold two disjoint sets of {}'.format(
            available_transforms, n_transforms))
    rng = RngStream(master_seed, StreamId.SPLIT)
    perm = [int(i) for i in rng.permutation(available_objects)]
    o_train, rest = perm[:n_objects], perm[n_objects:]
    o_eval = rest[:n_objects]
    extra = [rest[int(i)] for i in rng.permutation(len(rest))[:n_objects]]
    o_sub = o_train[:max(1, n_objects // 3)]

    kinds = [ALL_KINDS[int(i)] for i in rng.permutation(available_transforms)]
    return SplitProtocol(
        o_train=tuple(sorted(o_train)),
        o_eval=tuple(sorted(o_eval)),
        t_train=TransformSet(tuple(kinds[:n_transforms])).canonical(),
        t_eval=TransformSet(tuple(kinds[n_transforms:2 * n_transforms])).canonical(),
        o_sub=tuple(sorted(o_sub)),
        o_disj=tuple(sorted(extra)),
        o_sup=tuple(sorted(o_train + extra)),
    )


def nested_transform_sets(max_k, seed, mode=Mode.OBJECT):
    if not 1 <= max_k <= len(ALL_KINDS):
        raise BadParameterError('max_k must lie in 1..{}, got {}'.format(len(ALL_KINDS), max_k))
    rng = RngStream(seed, StreamId.NESTED)
    kinds = [ALL_KINDS[int(i)] for i in rng.permutation(len(ALL_KINDS))]
    return [TransformSet(tuple(kinds[:k]), mode) for k in range(1, max_k + 1)]


class LabelTarget(enum.Enum):
    BASE_CLASSES = 'base'
    OBJECT_CLASSES = 'object'


class PastePosition(enum.Enum):
    UNIFORM_RANDOM = 'uniform'
    UPPER_RIGHT = 'upper_right'


@dataclass(frozen=True, eq=False)
class HybridConfig:
    base: assets.LabeledImageSet
    prototypes: tuple
    alpha: float = 0.0
    beta: float = 1.0
    label_target: LabelTarget = LabelTarget.BASE_CLASSES
    paste_position: PastePosition = PastePosition.UNIFORM_RANDOM
    black_background: bool = False
    paste_size: int = 14

    def __post_init__(self):
        if self.base is None:
            raise BadParameterError('hybrid dataset needs a base image set')
        if not self.prototypes:
            raise EmptyCatalogError('hybrid dataset needs object prototypes')
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise BadParameterError('alpha and beta must lie in [0, 1], got {} and {}'.format(
                self.alpha, self.beta))
        object.__setattr__(self, 'label_target', LabelTarget(self.label_target))
        object.__setattr__(self, 'paste_position', PastePosition(self.paste_position))
        if self.label_target is LabelTarget.OBJECT_CLASSES and self.beta != 1.0:
            raise BadParameterError('object labels need an object in every image (beta=1)')
        h, w = self.base.images.shape[1:3]
        if not 1 <= self.paste_size <= min(h, w):
            raise BadParameterError('paste size {} does not fit {}x{}'.format(self.paste_size, h, w))
        sprites = tuple(p.sprite if isinstance(p, assets.SpritePrototype) else p
                        for p in self.prototypes)
        object.__setattr__(self, 'prototypes', sprites)

    @property
    def class_count(self):
        if self.label_target is LabelTarget.OBJECT_CLASSES:
            return len(self.prototypes)
        return self.base.class_count

    def replace(self, **changes):
        d = dict(base=self.base, prototypes=self.prototypes, alpha=self.alpha, beta=self.beta,
                 label_target=self.label_target, paste_position=self.paste_position,
                 black_background=self.black_background, paste_size=self.paste_size)
        d.update(changes)
        return HybridConfig(**d)

    def describe(self):
        return {'alpha': self.alpha, 'beta': self.beta, 'label_target': self.label_target.value,
                'paste_position': self.paste_position.value,
                'black_background': self.black_background, 'paste_size': self.paste_size,
                'prototypes': len(self.prototypes), 'base_count': len(self.base),
                'base_synthetic': bool(self.base.synthetic)}


def _small_sprites(prototypes, size):
    stack = np.stack([s.pixels for s in prototypes])
    return tuple(Sprite(p) for p in assets.resize_images(stack, size))


def _position(cfg, rng):
    h, w = cfg.base.images.shape[1:3]
    s = cfg.paste_size
    top, left = int(rng.integers(0, h - s + 1)), int(rng.integers(0, w - s + 1))
    if cfg.paste_position is PastePosition.UPPER_RIGHT:
        return 0, w - s
    return top, left


def hybrid_placement(cfg, seed, i):
    """(pasted, object id, top, left) for record `i`."""
    rng = RngStream.for_sample(seed, StreamId.HYBRID, i)
    pasted = rng.uniform() < cfg.beta
    linked = rng.uniform() < cfg.alpha
    uniform = int(rng.integers(0, len(cfg.prototypes)))
    obj = int(cfg.base.labels[i]) % len(cfg.prototypes) if linked else uniform
    top, left = _position(cfg, rng)
    return pasted, obj, top, left


def paste(img, sprite, top, left):
    out = img.copy()
    s = sprite.pixels.shape[0]
    out[top:top + s, left:left + s] = alpha_blend(sprite.pixels, img[top:top + s, left:left + s])
    return out


def _hybrid_canvas(cfg, i):
    if cfg.black_background:
        return np.zeros_like(cfg.base.images[i])
    return cfg.base.images[i]


def build_hybrid(cfg, seed, workers=1):
    small = _small_sprites(cfg.prototypes, cfg.paste_size)

    def make(i):
        pasted, obj, top, left = hybrid_placement(cfg, seed, i)
        img = _hybrid_canvas(cfg, i)
        if pasted:
            img = paste(img, small[obj], top, left)
        label = obj if cfg.label_target is LabelTarget.OBJECT_CLASSES else int(cfg.base.labels[i])
        return img, label

    images, labels = _fill(len(cfg.base), cfg.base.images.shape[1:], make, workers)
    manifest = {'kind': 'hybrid', 'seed': seed, 'config': cfg.describe()}
    return DatasetArchive(images, labels, cfg.class_count, seed, manifest)


def class_subset(base, classes):
    """Records of `classes`, relabelled 0..len(classes)-1 in the given order."""
    classes = [int(c) for c in classes]
    remap = np.full(base.class_count, -1, dtype=np.int64)
    remap[classes] = np.arange(len(classes))
    index = np.flatnonzero(remap[base.labels] >= 0)
    return assets.LabeledImageSet(base.images[index], remap[base.labels[index]], len(classes),
                                  synthetic=base.synthetic)


def augment_dataset(base, tset, seed, opts=DEFAULT_OPTIONS, workers=1):
    """Apply one augmentation draw from `tset` to every record of `base`."""
    tset = tset.with_mode(Mode.AUGMENTATION).canonical()

    def make(i):
        rng = RngStream.for_sample(seed, StreamId.AUGMENT, i)
        return apply_to_image(sample_transform(tset, rng), base.images[i], opts), int(base.labels[i])

    images, labels = _fill(len(base), base.images.shape[1:], make, workers)
    manifest = {'kind': 'augmented', 'seed': seed, 'transforms': tset.to_dict(),
                'base_synthetic': bool(base.synthetic)}
    return DatasetArchive(images, labels, base.class_count, seed, manifest)


@dataclass(eq=False)
class SensPairs:
    """Matched pairs differ only in the transformation; free pairs are independent."""
    matched_a: np.ndarray
    matched_b: np.ndarray
    free_a: np.ndarray
    free_b: np.ndarray

    def __post_init__(self):
        n = len(self.matched_a)
        if not (len(self.matched_b) == n and len(self.free_a) == len(self.free_b)):
            raise BadParameterError('pair streams must have matching lengths')

    def __len__(self):
        return len(self.matched_a)


def _pair_stream(n_pairs, shape, make, workers):
    if n_pairs < 1:
        raise BadParameterError('n_pairs must be at least 1, got {}'.format(n_pairs))
    a = np.empty((n_pairs,) + tuple(shape), dtype=np.uint8)
    b = np.empty_like(a)

    def one(i):
        a[i], b[i] = make(i)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(n_pairs)))
    else:
        for i in range(n_pairs):
            one(i)
    return a, b


def generate_sens_pairs(cfg, n_pairs=10000, seed=0, sampler=sample_transform, workers=1):
    protos, pool = load_catalog(cfg.assets, cfg.resolution)
    _check_objects(cfg, protos)
    cfg = cfg.canonical()
    shape = (cfg.resolution, cfg.resolution, 3)

    def matched(i):
        rng = RngStream.for_sample(seed, StreamId.SENS_MATCHED, i)
        label = int(rng.integers(0, cfg.class_count))
        bg = pool[int(rng.integers(0, len(pool)))]
        o = protos[cfg.objects[label]].sprite
        t1 = _draw_specs(cfg, rng, sampler)
        t2 = _draw_specs(cfg, rng, sampler)
        return compose_scene(o, t1, bg, cfg.kernel), compose_scene(o, t2, bg, cfg.kernel)

    def free(i):
        rng = RngStream.for_sample(seed, StreamId.SENS_FREE, i)
        return (_sample_scene(cfg, protos, pool, rng, sampler)[0],
                _sample_scene(cfg, protos, pool, rng, sampler)[0])

    return SensPairs(*(_pair_stream(n_pairs, shape, matched, workers)
                       + _pair_stream(n_pairs, shape, free, workers)))


class Vary(enum.Enum):
    BASE = 'base'
    OBJECT = 'object'


def generate_hybrid_sens_pairs(cfg, n_pairs=10000, seed=0, vary=Vary.BASE, workers=1):
    """Pairs that differ only in the base image (object fixed) or only in the object."""
    vary = Vary(vary)
    small = _small_sprites(cfg.prototypes, cfg.paste_size)
    n_base, n_obj = len(cfg.base), len(small)

    def canvas(k):
        return _hybrid_canvas(cfg, k)

    def matched(i):
        rng = RngStream.for_sample(seed, StreamId.SENS_MATCHED, i)
        top, left = _position(cfg, rng)
        if vary is Vary.BASE:
            obj = small[int(rng.integers(0, n_obj))]
            k1, k2 = int(rng.integers(0, n_base)), int(rng.integers(0, n_base))
            return paste(canvas(k1), obj, top, left), paste(canvas(k2), obj, top, left)
        k = int(rng.integers(0, n_base))
        o1, o2 = int(rng.integers(0, n_obj)), int(rng.integers(0, n_obj))
        return paste(canvas(k), small[o1], top, left), paste(canvas(k), small[o2], top, left)

    def free(i):
        rng = RngStream.for_sample(seed, StreamId.SENS_FREE, i)
        out = []
        for _ in range(2):
            k = int(rng.integers(0, n_base))
            obj = small[int(rng.integers(0, n_obj))]
            top, left = _position(cfg, rng)
            out.append(paste(canvas(k), obj, top, left))
        return tuple(out)

    shape = cfg.base.images.shape[1:]
    return SensPairs(*(_pair_stream(n_pairs, shape, matched, workers)
                       + _pair_stream(n_pairs, shape, free, workers)))


def generate_augmented_sens_pairs(base, tset, n_pairs=10000, seed=0, opts=DEFAULT_OPTIONS,
                                  workers=1):
    """Matched pairs share a base image and differ in two augmentation draws."""
    tset = tset.with_mode(Mode.AUGMENTATION).canonical()
    n = len(base)

    def matched(i):
        rng = RngStream.for_sample(seed, StreamId.SENS_MATCHED, i)
        img = base.images[int(rng.integers(0, n))]
        return (apply_to_image(sample_transform(tset, rng), img, opts),
                apply_to_image(sample_transform(tset, rng), img, opts))

    def free(i):
        rng = RngStream.for_sample(seed, StreamId.SENS_FREE, i)
        out = []
        for _ in range(2):
            img = base.images[int(rng.integers(0, n))]
            out.append(apply_to_image(sample_transform(tset, rng), img, opts))
        return tuple(out)

    shape = base.images.shape[1:]
    return SensPairs(*(_pair_stream(n_pairs, shape, matched, workers)
                       + _pair_stream(n_pairs, shape, free, workers)))


def archive_path(directory, split):
    return os.path.join(directory, '{}.t2d'.format(Split(split).value))
