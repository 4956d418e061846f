"""
The 18 Transforms-2D image transformations.

Every kernel takes an HxWxC uint8 array (C = 3 for scene images, 4 for
sprites) and returns a new uint8 array of the same shape.  Geometric kernels
warp all channels, photometric and corruption kernels touch color only, except
Erasing which also clears alpha.  Each kernel quantizes its own output, so a
composition of kernels is reproducible bit for bit.
"""
import enum
from dataclasses import dataclass, field

import numpy as np
from matplotlib import colors as mcolors
from scipy import ndimage

from inv_transfer.transforms2d.errors import BadInputError, BadParameterError
from inv_transfer.transforms2d.rng import RngStream, StreamId


class Category(enum.Enum):
    GEOMETRIC = 'geometric'
    PHOTOMETRIC = 'photometric'
    CORRUPTION = 'corruption'


class Mode(enum.Enum):
    OBJECT = 'object'
    AUGMENTATION = 'augmentation'


class TransformKind(enum.Enum):
    TRANSLATE = 'translate'
    ROTATE = 'rotate'
    SCALE = 'scale'
    SHEAR = 'shear'
    VFLIP = 'vflip'
    HFLIP = 'hflip'
    HUE = 'hue'
    BRIGHTNESS = 'brightness'
    GRAYSCALE = 'grayscale'
    POSTERIZE = 'posterize'
    INVERT = 'invert'
    SHARPEN = 'sharpen'
    BLUR = 'blur'
    NOISE = 'noise'
    PIXELATE = 'pixelate'
    ELASTIC = 'elastic'
    ERASING = 'erasing'
    CONTRAST = 'contrast'

    @property
    def index(self):
        return ALL_KINDS.index(self)

    @property
    def category(self):
        return (Category.GEOMETRIC, Category.PHOTOMETRIC, Category.CORRUPTION)[self.index // 6]

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise BadParameterError('unknown transform kind {!r}'.format(name))


ALL_KINDS = tuple(TransformKind)


def _apply_order(kind):
    return (kind.index // 6, kind is TransformKind.TRANSLATE, kind.index)


# Parameter ranges as (low, high); booleans are listed separately.
_RANGES = {
    TransformKind.ROTATE: {'angle': (0.0, 360.0)},
    TransformKind.SCALE: {'factor': (0.4, 1.0)},
    TransformKind.SHEAR: {'x': (-50.0, 50.0), 'y': (-50.0, 50.0)},
    TransformKind.HUE: {'offset': (-0.5, 0.5)},
    TransformKind.BRIGHTNESS: {'delta': (-1.0, 1.0)},
    TransformKind.BLUR: {'sigma': (0.1, 1.5)},
    TransformKind.CONTRAST: {'delta': (-1.0, 1.0)},
    TransformKind.ERASING: {'x': (0.0, 1.0), 'y': (0.0, 1.0)},
}
_OBJECT_TRANSLATE = {'x': (0.0, 1.0), 'y': (0.0, 1.0)}
_AUGMENT_TRANSLATE = {'dx': (-0.3, 0.3), 'dy': (-0.3, 0.3)}
_BERNOULLI = frozenset([
    TransformKind.VFLIP, TransformKind.HFLIP, TransformKind.GRAYSCALE,
    TransformKind.POSTERIZE, TransformKind.INVERT, TransformKind.SHARPEN,
    TransformKind.NOISE, TransformKind.PIXELATE, TransformKind.ELASTIC,
    TransformKind.ERASING,
])
_SEEDED = frozenset([TransformKind.NOISE, TransformKind.ELASTIC])


def _schema(kind, params):
    if kind is TransformKind.TRANSLATE:
        return _AUGMENT_TRANSLATE if 'dx' in params or 'dy' in params else _OBJECT_TRANSLATE
    return _RANGES.get(kind, {})


@dataclass(frozen=True)
class TransformSpec:
    """One concrete draw of a transformation type."""
    kind: TransformKind
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = TransformKind.parse(self.kind)
        object.__setattr__(self, 'kind', kind)
        params = dict(self.params)
        expected = set(_schema(kind, params))
        if kind in _BERNOULLI:
            expected.add('apply')
        if kind in _SEEDED:
            expected.add('seed')
        if set(params) != expected:
            raise BadParameterError('{} expects parameters {}, got {}'.format(
                kind.value, sorted(expected), sorted(params)))
        for name, (low, high) in _schema(kind, params).items():
            value = float(params[name])
            upper_ok = value < high if kind is TransformKind.ROTATE else value <= high
            if not (low <= value and upper_ok):
                raise BadParameterError('{}.{}={} outside [{}, {}]'.format(
                    kind.value, name, value, low, high))
            params[name] = value
        if 'apply' in params:
            params['apply'] = bool(params['apply'])
        if 'seed' in params:
            params['seed'] = int(params['seed'])
        object.__setattr__(self, 'params', params)

    def to_dict(self):
        return {'kind': self.kind.value, 'params': dict(self.params)}


@dataclass(frozen=True)
class TransformSet:
    kinds: tuple
    mode: Mode = Mode.OBJECT

    def __post_init__(self):
        kinds = tuple(TransformKind.parse(k) for k in self.kinds)
        if not kinds:
            raise BadParameterError('a transform set needs at least one kind')
        if len(set(kinds)) != len(kinds):
            raise BadParameterError('transform kinds must be distinct: {}'.format(
                [k.value for k in kinds]))
        object.__setattr__(self, 'kinds', kinds)
        object.__setattr__(self, 'mode', Mode(self.mode))

    def __len__(self):
        return len(self.kinds)

    def __contains__(self, kind):
        return TransformKind.parse(kind) in self.kinds

    def canonical(self):
        """Geometric, then photometric, then corruption kinds.

        Translate runs last among the geometric kinds: the other warps act about the
        canvas centre, so placement has to see the final footprint.
        """
        return TransformSet(tuple(sorted(self.kinds, key=_apply_order)), self.mode)

    def with_mode(self, mode):
        return TransformSet(self.kinds, mode)

    def names(self):
        return [k.value for k in self.kinds]

    def to_dict(self):
        return {'kinds': self.names(), 'mode': self.mode.value}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d['kinds']), Mode(d.get('mode', 'object')))


@dataclass(frozen=True)
class KernelOptions:
    noise_scale: str = 'normalized'
    elastic_alpha: float = 150.0
    elastic_sigma: float = 5.0
    reference_size: int = 224
    erase_size: int = 14
    erase_reference: int = 32
    sharpness: float = 7.0
    blur_kernel: int = 7

    def __post_init__(self):
        if self.noise_scale not in ('normalized', 'uint8'):
            raise BadParameterError('noise_scale must be normalized or uint8, got {!r}'.format(
                self.noise_scale))
        if self.blur_kernel < 1 or self.blur_kernel % 2 == 0:
            raise BadParameterError('blur_kernel must be a positive odd size')


DEFAULT_OPTIONS = KernelOptions()


@dataclass(frozen=True, eq=False)
class Sprite:
    """RGBA object prototype; color of fully transparent pixels is zero."""
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 4 or pixels.dtype != np.uint8:
            raise BadInputError('sprite must be an HxWx4 uint8 array, got {} {}'.format(
                pixels.shape, pixels.dtype))
        pixels = pixels.copy()
        pixels[pixels[..., 3] == 0, :3] = 0
        pixels.setflags(write=False)
        object.__setattr__(self, 'pixels', pixels)

    def __eq__(self, other):
        return isinstance(other, Sprite) and np.array_equal(self.pixels, other.pixels)

    @property
    def size(self):
        return self.pixels.shape[:2]

    @property
    def alpha(self):
        return self.pixels[..., 3]

    @property
    def coverage(self):
        return float(np.mean(self.alpha > 0))


def quantize(x):
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def _on_color(arr, fn):
    out = arr.copy()
    out[..., :3] = fn(arr[..., :3])
    return out


def _luma(rgb):
    rgb = rgb.astype(np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def _warp(arr, forward):
    if np.array_equal(forward, np.eye(2)):
        return arr.copy()
    h, w = arr.shape[:2]
    center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    inverse = np.linalg.inv(forward)
    offset = center - inverse.dot(center)
    out = np.empty(arr.shape, dtype=np.float64)
    for c in range(arr.shape[2]):
        out[..., c] = ndimage.affine_transform(
            arr[..., c].astype(np.float64), inverse, offset=offset,
            order=1, mode='constant', cval=0.0)
    return quantize(out)


def _shift(arr, dy, dx):
    h, w = arr.shape[:2]
    out = np.zeros_like(arr)
    if abs(dy) >= h or abs(dx) >= w:
        return out
    src_r = slice(max(0, -dy), h - max(0, dy))
    dst_r = slice(max(0, dy), h - max(0, -dy))
    src_c = slice(max(0, -dx), w - max(0, dx))
    dst_c = slice(max(0, dx), w - max(0, -dx))
    out[dst_r, dst_c] = arr[src_r, src_c]
    return out


def _round(v):
    return int(np.floor(v + 0.5))


def _translate(arr, p, opts, has_alpha):
    h, w = arr.shape[:2]
    if 'dx' in p:
        return _shift(arr, _round(p['dy'] * h), _round(p['dx'] * w))
    mask = arr[..., 3] > 0 if has_alpha else np.any(arr > 0, axis=2)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return arr.copy()
    # feasible shifts keep the occupied bounding box inside the canvas
    lo_r, hi_r = -rows[0], h - 1 - rows[-1]
    lo_c, hi_c = -cols[0], w - 1 - cols[-1]
    dy = _round(lo_r + p['y'] * (hi_r - lo_r))
    dx = _round(lo_c + p['x'] * (hi_c - lo_c))
    return _shift(arr, dy, dx)


def _rotate(arr, p, opts, has_alpha):
    theta = np.deg2rad(p['angle'])
    c, s = np.cos(theta), np.sin(theta)
    return _warp(arr, np.array([[c, -s], [s, c]]))


def _scale(arr, p, opts, has_alpha):
    return _warp(arr, p['factor'] * np.eye(2))


def _shear(arr, p, opts, has_alpha):
    shear_x = np.array([[1.0, 0.0], [np.tan(np.deg2rad(p['x'])), 1.0]])
    shear_y = np.array([[1.0, np.tan(np.deg2rad(p['y']))], [0.0, 1.0]])
    return _warp(arr, shear_y.dot(shear_x))


def _vflip(arr, p, opts, has_alpha):
    return np.flip(arr, axis=0).copy() if p['apply'] else arr.copy()


def _hflip(arr, p, opts, has_alpha):
    return np.flip(arr, axis=1).copy() if p['apply'] else arr.copy()


def _hue(arr, p, opts, has_alpha):
    if p['offset'] == 0.0:
        return arr.copy()

    def shift(rgb):
        hsv = mcolors.rgb_to_hsv(rgb.astype(np.float64) / 255.0)
        hsv[..., 0] = np.mod(hsv[..., 0] + p['offset'], 1.0)
        return quantize(mcolors.hsv_to_rgb(hsv) * 255.0)
    return _on_color(arr, shift)


def _brightness(arr, p, opts, has_alpha):
    return _on_color(arr, lambda rgb: quantize(rgb.astype(np.float64) + p['delta'] * 255.0))


def _grayscale(arr, p, opts, has_alpha):
    if not p['apply']:
        return arr.copy()
    return _on_color(arr, lambda rgb: np.repeat(quantize(_luma(rgb))[..., None], 3, axis=2))


def _posterize(arr, p, opts, has_alpha):
    if not p['apply']:
        return arr.copy()
    return _on_color(arr, lambda rgb: rgb & np.uint8(0x80))


def _invert(arr, p, opts, has_alpha):
    if not p['apply']:
        return arr.copy()
    return _on_color(arr, lambda rgb: np.uint8(255) - rgb)


def _sharpen(arr, p, opts, has_alpha):
    if not p['apply']:
        return arr.copy()

    def enhance(rgb):
        x = rgb.astype(np.float64)
        smooth = ndimage.uniform_filter(x, size=(3, 3, 1), mode='reflect')
        return quantize(smooth + opts.sharpness * (x - smooth))
    return _on_color(arr, enhance)


def gaussian_kernel(sigma, size):
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-0.5 * (r / sigma) ** 2)
    return k / k.sum()


def _blur(arr, p, opts, has_alpha):
    k = gaussian_kernel(p['sigma'], opts.blur_kernel)

    def blur(rgb):
        x = ndimage.correlate1d(rgb.astype(np.float64), k, axis=0, mode='reflect')
        x = ndimage.correlate1d(x, k, axis=1, mode='reflect')
        return quantize(x)
    return _on_color(arr, blur)


def _noise(arr, p, opts, has_alpha):
    if not p['apply']:
        return arr.copy()
    scale = 255.0 if opts.noise_scale == 'normalized' else 1.0
    rng = RngStream(p['seed'], StreamId.KERNEL_NOISE)
    return _on_color(arr, lambda rgb: quantize(
        rgb.astype(np.float64) + scale * rng.normal(size=rgb.shape)))


def _pixelate(arr, p, opts, has_alpha):
    if not p['apply']:
        return arr.copy()

    def blocks(rgb):
        h, w = rgb.shape[:2]
        padded = np.pad(rgb.astype(np.float64), ((0, h % 2), (0, w % 2), (0, 0)), mode='edge')
        ph, pw = padded.shape[:2]
        coarse = padded.reshape(ph // 2, 2, pw // 2, 2, -1).mean(axis=(1, 3))
        fine = np.repeat(np.repeat(coarse, 2, axis=0), 2, axis=1)
        return quantize(fine[:h, :w])
    return _on_color(arr, blocks)


def _elastic(arr, p, opts, has_alpha):
    if not p['apply']:
        return arr.copy()
    h, w = arr.shape[:2]
    rng = RngStream(p['seed'], StreamId.KERNEL_ELASTIC)
    dy = ndimage.gaussian_filter(rng.uniform(-1.0, 1.0, (h, w)), opts.elastic_sigma, mode='reflect')
    dx = ndimage.gaussian_filter(rng.uniform(-1.0, 1.0, (h, w)), opts.elastic_sigma, mode='reflect')
    peak = np.sqrt(dy ** 2 + dx ** 2).max()
    if peak > 0:
        gain = opts.elastic_alpha * w / float(opts.reference_size) / peak
        dy, dx = dy * gain, dx * gain
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing='ij')
    coords = [rows + dy, cols + dx]

    def deform(rgb):
        out = np.empty(rgb.shape, dtype=np.float64)
        for c in range(rgb.shape[2]):
            out[..., c] = ndimage.map_coordinates(
                rgb[..., c].astype(np.float64), coords, order=1, mode='constant', cval=0.0)
        return quantize(out)
    return _on_color(arr, deform)


def erase_size(opts, width):
    return max(1, _round(opts.erase_size * width / float(opts.erase_reference)))


def _erasing(arr, p, opts, has_alpha):
    out = arr.copy()
    if not p['apply']:
        return out
    h, w = arr.shape[:2]
    e = min(erase_size(opts, w), h, w)
    top = _round(p['y'] * (h - e))
    left = _round(p['x'] * (w - e))
    out[top:top + e, left:left + e, :] = 0
    return out


def _contrast(arr, p, opts, has_alpha):
    luma = _luma(arr[..., :3])
    if has_alpha:
        opaque = arr[..., 3] > 0
        if not opaque.any():
            return arr.copy()
        mean = luma[opaque].mean()
    else:
        mean = luma.mean()
    gain = 1.0 + p['delta']
    return _on_color(arr, lambda rgb: quantize(mean + gain * (rgb.astype(np.float64) - mean)))


_KERNELS = {
    TransformKind.TRANSLATE: _translate,
    TransformKind.ROTATE: _rotate,
    TransformKind.SCALE: _scale,
    TransformKind.SHEAR: _shear,
    TransformKind.VFLIP: _vflip,
    TransformKind.HFLIP: _hflip,
    TransformKind.HUE: _hue,
    TransformKind.BRIGHTNESS: _brightness,
    TransformKind.GRAYSCALE: _grayscale,
    TransformKind.POSTERIZE: _posterize,
    TransformKind.INVERT: _invert,
    TransformKind.SHARPEN: _sharpen,
    TransformKind.BLUR: _blur,
    TransformKind.NOISE: _noise,
    TransformKind.PIXELATE: _pixelate,
    TransformKind.ELASTIC: _elastic,
    TransformKind.ERASING: _erasing,
    TransformKind.CONTRAST: _contrast,
}


def sample_params(kind, mode, rng):
    if kind is TransformKind.TRANSLATE:
        if mode is Mode.AUGMENTATION:
            return {'dx': rng.uniform(-0.3, 0.3), 'dy': rng.uniform(-0.3, 0.3)}
        return {'x': rng.uniform(), 'y': rng.uniform()}
    params = {name: rng.uniform(low, high) for name, (low, high) in _RANGES.get(kind, {}).items()}
    if kind in _BERNOULLI:
        params['apply'] = rng.bernoulli(0.5)
    if kind in _SEEDED:
        params['seed'] = rng.seed_word()
    return params


def sample_transform(tset, rng):
    return tuple(TransformSpec(kind, sample_params(kind, tset.mode, rng)) for kind in tset.kinds)


def apply_kernels(specs, arr, opts=DEFAULT_OPTIONS):
    has_alpha = arr.shape[2] == 4
    out = arr
    for spec in specs:
        out = _KERNELS[spec.kind](out, spec.params, opts, has_alpha)
        if has_alpha:
            out[out[..., 3] == 0, :3] = 0
    return out if out is not arr else arr.copy()


def apply_to_sprite(specs, sprite, opts=DEFAULT_OPTIONS):
    return Sprite(apply_kernels(specs, sprite.pixels, opts))


def apply_to_image(specs, img, opts=DEFAULT_OPTIONS):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise BadInputError('scene image must be an HxWx3 uint8 array, got {} {}'.format(
            img.shape, img.dtype))
    return apply_kernels(specs, img, opts)


def identity_spec(kind, mode=Mode.OBJECT):
    """Parameters under which `kind` leaves its input unchanged."""
    kind = TransformKind.parse(kind)
    if kind is TransformKind.TRANSLATE:
        if mode is Mode.AUGMENTATION:
            return TransformSpec(kind, {'dx': 0.0, 'dy': 0.0})
        raise BadParameterError('object-mode translation has no identity placement')
    if kind is TransformKind.BLUR:
        raise BadParameterError('blur has no identity parameter')
    params = {
        TransformKind.ROTATE: {'angle': 0.0},
        TransformKind.SCALE: {'factor': 1.0},
        TransformKind.SHEAR: {'x': 0.0, 'y': 0.0},
        TransformKind.HUE: {'offset': 0.0},
        TransformKind.BRIGHTNESS: {'delta': 0.0},
        TransformKind.CONTRAST: {'delta': 0.0},
    }.get(kind)
    if params is None:
        params = {'apply': False}
        if kind in _SEEDED:
            params['seed'] = 0
        if kind is TransformKind.ERASING:
            params.update(x=0.0, y=0.0)
    return TransformSpec(kind, params)
