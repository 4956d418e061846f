"""
Packed on-disk formats.

`.t2d` dataset archive:

    header   "<4sHHHHIIQ"  magic "T2D1", version, width, height, channels,
                           sample count, class count, seed
    records  count x (label "<u2", height*width*channels raw uint8, row-major)

plus a YAML manifest next to it (`<archive>.yaml`) carrying the full config.

Model checkpoints use magic "T2DM": version, a YAML block with the model
config and training metadata, then named float32 little-endian blocks.
"""
import hashlib
import logging
import os
import struct
from dataclasses import dataclass, field

import numpy as np
import torch
import yaml
from torchvision.io import write_png

from inv_transfer.transforms2d.errors import AssetIOError, BadInputError, FormatError

logger = logging.getLogger(__name__)

ARCHIVE_MAGIC = b'T2D1'
ARCHIVE_VERSION = 1
HEADER = struct.Struct('<4sHHHHIIQ')

CHECKPOINT_MAGIC = b'T2DM'
CHECKPOINT_VERSION = 1


def record_dtype(height, width, channels):
    return np.dtype([('label', '<u2'), ('pixels', 'u1', (height * width * channels,))])


def manifest_path(path):
    return path + '.yaml'


@dataclass(eq=False)
class DatasetArchive:
    images: np.ndarray
    labels: np.ndarray
    class_count: int
    seed: int = 0
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        self.images = np.ascontiguousarray(self.images, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise BadInputError('archive images must be NxHxWxC, got {}'.format(self.images.shape))
        if self.images.shape[0] != self.labels.shape[0]:
            raise BadInputError('{} images but {} labels'.format(
                self.images.shape[0], self.labels.shape[0]))
        if not 0 < self.class_count <= 0xFFFF:
            raise BadInputError('class count {} out of range'.format(self.class_count))
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise BadInputError('labels must lie in 0..{}'.format(self.class_count - 1))
        if not 0 <= self.seed < 2 ** 64:
            raise BadInputError('seed {} does not fit the unsigned 64-bit header field'.format(
                self.seed))

    def __len__(self):
        return self.labels.shape[0]

    @property
    def height(self):
        return self.images.shape[1]

    @property
    def width(self):
        return self.images.shape[2]

    @property
    def channels(self):
        return self.images.shape[3]

    def to_bytes(self):
        header = HEADER.pack(ARCHIVE_MAGIC, ARCHIVE_VERSION, self.width, self.height,
                             self.channels, len(self), self.class_count, self.seed)
        records = np.empty(len(self), dtype=record_dtype(self.height, self.width, self.channels))
        records['label'] = self.labels
        records['pixels'] = self.images.reshape(len(self), -1)
        return header + records.tobytes()

    @classmethod
    def from_bytes(cls, data, manifest=None):
        if len(data) < HEADER.size:
            raise FormatError('archive shorter than its header')
        magic, version, width, height, channels, count, classes, seed = HEADER.unpack_from(data)
        if magic != ARCHIVE_MAGIC:
            raise FormatError('bad archive magic {!r}'.format(magic))
        if version != ARCHIVE_VERSION:
            raise FormatError('unsupported archive version {}'.format(version))
        dtype = record_dtype(height, width, channels)
        if len(data) - HEADER.size != count * dtype.itemsize:
            raise FormatError('header declares {} records but payload holds {} bytes'.format(
                count, len(data) - HEADER.size))
        records = np.frombuffer(data, dtype=dtype, offset=HEADER.size)
        if count and records['label'].max() >= classes:
            raise FormatError('record label exceeds class count {}'.format(classes))
        images = records['pixels'].reshape(count, height, width, channels).copy()
        return cls(images, records['label'].astype(np.int64), classes, seed, manifest or {})

    def save(self, path):
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        with open(path, 'wb') as f:
            f.write(self.to_bytes())
        with open(manifest_path(path), 'w') as f:
            yaml.safe_dump(self.manifest, f, sort_keys=True)
        logger.info('wrote %d records to %s', len(self), path)

    @classmethod
    def load(cls, path):
        try:
            with open(path, 'rb') as f:
                data = f.read()
        except OSError as e:
            raise AssetIOError(path, e)
        manifest = {}
        if os.path.exists(manifest_path(path)):
            with open(manifest_path(path)) as f:
                manifest = yaml.safe_load(f) or {}
        return cls.from_bytes(data, manifest)

    def sha256(self):
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def subset(self, index):
        index = np.asarray(index)
        manifest = dict(self.manifest, parent_count=len(self))
        return DatasetArchive(self.images[index], self.labels[index], self.class_count,
                              self.seed, manifest)

    def tensors(self):
        """(uint8 NxHxWxC images, int64 labels) as torch tensors sharing memory."""
        return torch.from_numpy(self.images), torch.from_numpy(self.labels)

    def export_png(self, directory):
        for i in range(len(self)):
            class_dir = os.path.join(directory, 'class_{}'.format(int(self.labels[i])))
            os.makedirs(class_dir, exist_ok=True)
            img = torch.from_numpy(np.ascontiguousarray(self.images[i].transpose(2, 0, 1)))
            write_png(img, os.path.join(class_dir, '{}.png'.format(i)))


def write_param_blocks(path, header, blocks):
    """`blocks` is an ordered list of (name, ndarray)."""
    meta = yaml.safe_dump(header, sort_keys=True).encode('utf-8')
    with open(path, 'wb') as f:
        f.write(struct.pack('<4sHI', CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(meta)))
        f.write(meta)
        f.write(struct.pack('<I', len(blocks)))
        for name, array in blocks:
            array = np.ascontiguousarray(array, dtype='<f4')
            encoded = name.encode('utf-8')
            f.write(struct.pack('<HB', len(encoded), array.ndim))
            f.write(encoded)
            f.write(struct.pack('<{}I'.format(array.ndim), *array.shape))
            f.write(array.tobytes())


def read_param_blocks(path):
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as e:
        raise AssetIOError(path, e)
    try:
        magic, version, meta_len = struct.unpack_from('<4sHI', data)
        if magic != CHECKPOINT_MAGIC or version != CHECKPOINT_VERSION:
            raise FormatError('{}: not a version {} checkpoint'.format(path, CHECKPOINT_VERSION))
        pos = struct.calcsize('<4sHI')
        header = yaml.safe_load(data[pos:pos + meta_len].decode('utf-8'))
        pos += meta_len
        (count,) = struct.unpack_from('<I', data, pos)
        pos += 4
        blocks = []
        for _ in range(count):
            name_len, ndim = struct.unpack_from('<HB', data, pos)
            pos += 3
            name = data[pos:pos + name_len].decode('utf-8')
            pos += name_len
            shape = struct.unpack_from('<{}I'.format(ndim), data, pos)
            pos += 4 * ndim
            n = int(np.prod(shape, dtype=np.int64))
            array = np.frombuffer(data, dtype='<f4', count=n, offset=pos).reshape(shape)
            pos += 4 * n
            blocks.append((name, array.copy()))
    except (struct.error, ValueError) as e:
        raise FormatError('{}: truncated checkpoint ({})'.format(path, e))
    if pos != len(data):
        raise FormatError('{}: {} trailing bytes'.format(path, len(data) - pos))
    return header, blocks
