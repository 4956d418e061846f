"""
Foreground prototypes, background pools and labeled base image sets.
"""
import enum
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from matplotlib.path import Path
from scipy import ndimage
from torchvision.io import ImageReadMode, read_image

from inv_transfer.transforms2d.errors import (AssetIOError, BadInputError,
                                              BadParameterError, EmptyCatalogError,
                                              FormatError)
from inv_transfer.transforms2d.rng import RngStream, StreamId
from inv_transfer.transforms2d.transforms import Sprite, quantize

logger = logging.getLogger(__name__)

CIFAR_PIXELS = 3 * 32 * 32
IMAGE_SUFFIXES = ('.png',)


class Provenance(enum.Enum):
    PROCEDURAL = 'procedural'
    RANDOM_PATTERN = 'random_pattern'
    IMPORTED = 'imported'


class BackgroundMode(enum.Enum):
    SMOOTH_NOISE = 'smooth_noise'
    UNIFORM_RANDOM = 'uniform_random'


class AssetKind(enum.Enum):
    SPRITES = 'sprites'
    BACKGROUNDS = 'backgrounds'
    CIFAR_BINARY = 'cifar_binary'


@dataclass(frozen=True)
class SpritePrototype:
    id: int
    sprite: Sprite
    provenance: Provenance


@dataclass(frozen=True, eq=False)
class BackgroundPool:
    images: np.ndarray

    def __post_init__(self):
        images = np.array(self.images)
        if images.ndim != 4 or images.shape[0] == 0:
            raise EmptyCatalogError('background pool is empty')
        if images.shape[3] != 3 or images.dtype != np.uint8:
            raise BadInputError('backgrounds must be NxHxWx3 uint8, got {} {}'.format(
                images.shape, images.dtype))
        images.setflags(write=False)
        object.__setattr__(self, 'images', images)

    def __len__(self):
        return self.images.shape[0]

    def __getitem__(self, i):
        return self.images[i]

    @property
    def resolution(self):
        return self.images.shape[1:3]


@dataclass(frozen=True, eq=False)
class LabeledImageSet:
    images: np.ndarray
    labels: np.ndarray
    class_count: int
    coarse_labels: np.ndarray = None
    synthetic: bool = False
    names: tuple = field(default=())

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.uint8)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 4 or images.shape[3] != 3:
            raise BadInputError('images must be NxHxWx3, got {}'.format(images.shape))
        if images.shape[0] != labels.shape[0]:
            raise BadInputError('{} images but {} labels'.format(images.shape[0], labels.shape[0]))
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise BadInputError('labels must lie in 0..{}'.format(self.class_count - 1))
        object.__setattr__(self, 'images', images)
        object.__setattr__(self, 'labels', labels)
        if self.coarse_labels is not None:
            object.__setattr__(self, 'coarse_labels', np.asarray(self.coarse_labels, dtype=np.int64))

    def __len__(self):
        return self.labels.shape[0]

    def select(self, index):
        coarse = None if self.coarse_labels is None else self.coarse_labels[index]
        return LabeledImageSet(self.images[index], self.labels[index], self.class_count,
                               coarse, self.synthetic, self.names)


def _unit_grid(size):
    c = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    return np.meshgrid(c, c, indexing='ij')


def _rotate_coords(yy, xx, theta):
    c, s = np.cos(theta), np.sin(theta)
    return c * yy - s * xx, s * yy + c * xx


def _superellipse(yy, xx, cy, cx, ry, rx, exponent, theta):
    v, u = _rotate_coords(yy - cy, xx - cx, theta)
    return np.abs(v / ry) ** exponent + np.abs(u / rx) ** exponent <= 1.0


def _polygon(yy, xx, vertices):
    points = np.stack([yy.ravel(), xx.ravel()], axis=1)
    return Path(vertices).contains_points(points).reshape(yy.shape)


class _Shape(object):
    """A random silhouette in unit coordinates plus its colored layers."""

    def __init__(self, rng):
        self.body = (rng.uniform(0.5, 0.9), rng.uniform(0.5, 0.9),
                     rng.uniform(1.2, 4.0), rng.uniform(0, np.pi))
        self.limbs = []
        for _ in range(int(rng.integers(1, 4))):
            angle = rng.uniform(0, 2 * np.pi)
            self.limbs.append((0.7 * np.sin(angle), 0.7 * np.cos(angle),
                               rng.uniform(0.15, 0.4), rng.uniform(0.15, 0.4),
                               rng.uniform(1.5, 3.0), rng.uniform(0, np.pi)))
        self.base_color = rng.integers(0, 256, 3)
        self.layers = []
        for _ in range(int(rng.integers(3, 6))):
            color = rng.integers(0, 256, 3)
            if rng.bernoulli(0.5):
                n = int(rng.integers(3, 7))
                angles = np.sort(rng.uniform(0, 2 * np.pi, n))
                radii = rng.uniform(0.2, 0.9, n)
                center = rng.uniform(-0.4, 0.4, 2)
                vertices = np.stack([center[0] + radii * np.sin(angles),
                                     center[1] + radii * np.cos(angles)], axis=1)
                self.layers.append(('polygon', vertices, color))
            else:
                self.layers.append(('ellipse', (rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                                                rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5),
                                                2.0, rng.uniform(0, np.pi)), color))

    def mask(self, yy, xx):
        ry, rx, exponent, theta = self.body
        m = _superellipse(yy, xx, 0.0, 0.0, ry, rx, exponent, theta)
        for limb in self.limbs:
            m |= _superellipse(yy, xx, *limb)
        return m

    def render(self, size, scale):
        yy, xx = _unit_grid(size)
        yy, xx = yy / scale, xx / scale
        mask = self.mask(yy, xx)
        rgba = np.zeros((size, size, 4), dtype=np.uint8)
        rgba[mask, :3] = self.base_color
        for kind, geometry, color in self.layers:
            if kind == 'polygon':
                region = _polygon(yy, xx, geometry)
            else:
                region = _superellipse(yy, xx, *geometry)
            rgba[region & mask, :3] = color
        rgba[mask, 3] = 255
        return rgba


def _fit_coverage(shape, size, target, low=0.5, high=0.8):
    yy, xx = _unit_grid(size)
    lo_s, hi_s = 0.05, 4.0
    scale = 1.0
    for _ in range(40):
        scale = 0.5 * (lo_s + hi_s)
        cov = shape.mask(yy / scale, xx / scale).mean()
        if low <= cov <= high and abs(cov - target) < 0.02:
            break
        if cov < target:
            lo_s = scale
        else:
            hi_s = scale
    return scale


def generate_procedural_sprites(count, seed, size=32):
    if count < 1:
        raise EmptyCatalogError('cannot generate {} sprites'.format(count))
    root = RngStream(seed, StreamId.SPRITES)
    protos = []
    for i in range(count):
        rng = root.child(i)
        shape = _Shape(rng)
        scale = _fit_coverage(shape, size, rng.uniform(0.55, 0.75))
        protos.append(SpritePrototype(i, Sprite(shape.render(size, scale)), Provenance.PROCEDURAL))
    logger.debug('generated %d procedural sprites (seed %d)', count, seed)
    return protos


def generate_random_pattern_sprites(count, size_fraction=0.7, seed=0, size=32):
    if not 0.0 < size_fraction <= 1.0:
        raise BadParameterError('size_fraction must lie in (0, 1], got {}'.format(size_fraction))
    side = int(np.floor(size_fraction * size))
    if side < 1:
        raise BadParameterError('pattern side {} is empty at resolution {}'.format(side, size))
    if count < 1:
        raise EmptyCatalogError('cannot generate {} patterns'.format(count))
    root = RngStream(seed, StreamId.PATTERNS)
    start = (size - side) // 2
    protos = []
    for i in range(count):
        rgba = np.zeros((size, size, 4), dtype=np.uint8)
        rgba[start:start + side, start:start + side, :3] = root.child(i).integers(0, 256, (side, side, 3))
        rgba[start:start + side, start:start + side, 3] = 255
        protos.append(SpritePrototype(i, Sprite(rgba), Provenance.RANDOM_PATTERN))
    return protos


def generate_backgrounds(count, mode=BackgroundMode.SMOOTH_NOISE, seed=0, size=32):
    if count < 1:
        raise EmptyCatalogError('cannot generate {} backgrounds'.format(count))
    mode = BackgroundMode(mode)
    root = RngStream(seed, StreamId.BACKGROUNDS)
    images = np.empty((count, size, size, 3), dtype=np.uint8)
    if mode is BackgroundMode.SMOOTH_NOISE:
        axis = np.linspace(0.0, 3.0, size)
        coords = np.meshgrid(axis, axis, indexing='ij')
    for i in range(count):
        rng = root.child(i)
        if mode is BackgroundMode.UNIFORM_RANDOM:
            images[i] = rng.integers(0, 256, (size, size, 3))
            continue
        lattice = rng.uniform(0.0, 255.0, (4, 4, 3))
        for c in range(3):
            images[i, ..., c] = quantize(ndimage.map_coordinates(lattice[..., c], coords, order=1))
    return BackgroundPool(images)


def resize_images(images, size):
    """Bilinear, antialiased resize of a NxHxWxC uint8 stack."""
    images = np.asarray(images, dtype=np.uint8)
    if images.shape[1:3] == (size, size):
        return images.copy()
    x = torch.from_numpy(images).permute(0, 3, 1, 2).double()
    x = F.interpolate(x, size=(size, size), mode='bilinear', align_corners=False, antialias=True)
    return quantize(x.permute(0, 2, 3, 1).numpy())


def _read_png(path, mode):
    try:
        tensor = read_image(path, mode=mode)
    except (RuntimeError, OSError) as e:
        raise AssetIOError(path, e)
    return tensor.permute(1, 2, 0).numpy()


def _image_files(directory):
    return sorted(f for f in os.listdir(directory)
                  if f.lower().endswith(IMAGE_SUFFIXES) and os.path.isfile(os.path.join(directory, f)))


def _category_files(path):
    """One file per category: flat files, or the first file of each subdirectory."""
    subdirs = sorted(d for d in os.listdir(path) if os.path.isdir(os.path.join(path, d)))
    if subdirs:
        files = []
        for d in subdirs:
            candidates = _image_files(os.path.join(path, d))
            if candidates:
                files.append(os.path.join(path, d, candidates[0]))
        return files
    return [os.path.join(path, f) for f in _image_files(path)]


def _import_sprites(path, size):
    files = _category_files(path)
    if not files:
        raise EmptyCatalogError('no PNG sprites under {}'.format(path))
    stack = np.stack([resize_images(_read_png(f, ImageReadMode.RGB_ALPHA)[None], size)[0]
                      for f in files])
    return [SpritePrototype(i, Sprite(pixels), Provenance.IMPORTED) for i, pixels in enumerate(stack)]


def _import_backgrounds(path, size):
    files = [os.path.join(path, f) for f in _image_files(path)]
    if not files:
        raise EmptyCatalogError('no PNG backgrounds under {}'.format(path))
    return BackgroundPool(np.stack([
        resize_images(_read_png(f, ImageReadMode.RGB)[None], size)[0] for f in files]))


def cifar_variant(path):
    name = os.path.basename(path)
    return 'cifar100' if name in ('train.bin', 'test.bin') else 'cifar10'


def read_cifar_batch(path, variant=None):
    variant = variant or cifar_variant(path)
    label_bytes = 2 if variant == 'cifar100' else 1
    record = label_bytes + CIFAR_PIXELS
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as e:
        raise AssetIOError(path, e)
    if len(data) == 0 or len(data) % record != 0:
        raise FormatError('{}: length {} is not a multiple of the {} record size {}'.format(
            path, len(data), variant, record))
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, record)
    images = raw[:, label_bytes:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    if variant == 'cifar100':
        return LabeledImageSet(images, raw[:, 1], 100, coarse_labels=raw[:, 0])
    return LabeledImageSet(images, raw[:, 0], 10)


def write_cifar_batch(dataset, path):
    if dataset.images.shape[1:] != (32, 32, 3):
        raise BadInputError('CIFAR records are 32x32x3, got {}'.format(dataset.images.shape[1:]))
    planes = dataset.images.transpose(0, 3, 1, 2).reshape(len(dataset), CIFAR_PIXELS)
    labels = [dataset.labels.astype(np.uint8)[:, None]]
    if dataset.coarse_labels is not None:
        labels.insert(0, dataset.coarse_labels.astype(np.uint8)[:, None])
    with open(path, 'wb') as f:
        f.write(np.concatenate(labels + [planes], axis=1).tobytes())


def _import_cifar(path):
    if os.path.isfile(path):
        return read_cifar_batch(path)
    names = sorted(f for f in os.listdir(path) if f.endswith('.bin'))
    if not names:
        raise EmptyCatalogError('no CIFAR .bin batches under {}'.format(path))
    parts = [read_cifar_batch(os.path.join(path, f)) for f in names]
    if len({p.class_count for p in parts}) != 1:
        raise FormatError('{} mixes CIFAR-10 and CIFAR-100 batches'.format(path))
    coarse = None
    if parts[0].coarse_labels is not None:
        coarse = np.concatenate([p.coarse_labels for p in parts])
    return LabeledImageSet(np.concatenate([p.images for p in parts]),
                           np.concatenate([p.labels for p in parts]),
                           parts[0].class_count, coarse_labels=coarse)


def import_assets(path, kind, size=32):
    if not os.path.exists(path):
        raise AssetIOError(path, 'no such file or directory')
    kind = AssetKind(kind)
    if kind is AssetKind.CIFAR_BINARY:
        data = _import_cifar(path)
        logger.info('loaded %d CIFAR records (%d classes) from %s', len(data), data.class_count, path)
        return data
    if not os.path.isdir(path):
        raise AssetIOError(path, 'expected a directory')
    if kind is AssetKind.SPRITES:
        return _import_sprites(path, size)
    return _import_backgrounds(path, size)


def generate_synthetic_base(n, seed, class_count=10, size=32):
    """Textured class-conditional stand-in for CIFAR: one grating and palette per class."""
    if n < 1 or class_count < 1:
        raise EmptyCatalogError('synthetic base needs samples and classes')
    root = RngStream(seed, StreamId.SYNTHETIC_BASE)
    classes = []
    for c in range(class_count):
        rng = root.child(0, c)
        classes.append((rng.uniform(0, np.pi), rng.uniform(1.0, 4.0),
                        rng.uniform(0, 255, 3), rng.uniform(0, 255, 3)))
    yy, xx = _unit_grid(size)
    images = np.empty((n, size, size, 3), dtype=np.uint8)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        rng = root.child(1, i)
        label = int(rng.integers(0, class_count))
        theta, freq, c0, c1 = classes[label]
        theta = theta + rng.uniform(-0.2, 0.2)
        wave = np.cos(np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + rng.uniform(0, 2 * np.pi))
        mix = (0.5 * (wave + 1.0))[..., None]
        x = c0 * (1.0 - mix) + c1 * mix + rng.normal(0.0, 20.0, (size, size, 3))
        images[i] = quantize(x)
        labels[i] = label
    return LabeledImageSet(images, labels, class_count, synthetic=True)
