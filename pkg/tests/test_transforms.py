import numpy as np
import pytest

from inv_transfer.transforms2d.errors import BadInputError, BadParameterError
from inv_transfer.transforms2d.rng import RngStream
from inv_transfer.transforms2d.transforms import (ALL_KINDS, Category, KernelOptions, Mode, Sprite,
                                                  TransformKind, TransformSet, TransformSpec,
                                                  apply_kernels, apply_to_image, apply_to_sprite,
                                                  identity_spec, sample_transform)


def _image(seed=0, size=16):
    return np.random.RandomState(seed).randint(0, 256, (size, size, 3)).astype(np.uint8)


def test_eighteen_kinds_six_per_category():
    assert len(ALL_KINDS) == 18
    for category in Category:
        assert sum(k.category is category for k in ALL_KINDS) == 6
    assert TransformKind.SHEAR.category is Category.GEOMETRIC
    assert TransformKind.SHARPEN.category is Category.PHOTOMETRIC
    assert TransformKind.CONTRAST.category is Category.CORRUPTION


def test_transform_set_validation():
    with pytest.raises(BadParameterError):
        TransformSet(())
    with pytest.raises(BadParameterError):
        TransformSet(('rotate', 'rotate'))
    with pytest.raises(BadParameterError):
        TransformSet(('spin',))
    tset = TransformSet(('contrast', 'hue', 'rotate'))
    assert len(tset) == 3 and 'hue' in tset
    assert tset.canonical().names() == ['rotate', 'hue', 'contrast']
    assert TransformSet.from_dict(tset.to_dict()) == tset
    assert TransformSet(('hue', 'translate', 'scale', 'rotate')).canonical().names() == \
        ['rotate', 'scale', 'translate', 'hue']


@pytest.mark.parametrize('warp', [TransformSpec('rotate', {'angle': 45.0}),
                                  TransformSpec('scale', {'factor': 0.5}),
                                  TransformSpec('shear', {'x': 30.0, 'y': -20.0})])
@pytest.mark.parametrize('corner', [(0.0, 0.0), (1.0, 1.0)])
def test_translate_places_the_warped_object(opaque_sprite, warp, corner):
    canvas = np.zeros((32, 32, 4), dtype=np.uint8)
    canvas[12:20, 12:20] = opaque_sprite.pixels
    sprite = Sprite(canvas)
    place = TransformSpec('translate', {'x': corner[0], 'y': corner[1]})
    by_kind = {warp.kind: warp, place.kind: place}
    order = TransformSet((place.kind, warp.kind)).canonical().kinds
    assert order[-1] is TransformKind.TRANSLATE
    warped = apply_to_sprite([warp], sprite).pixels[..., 3]
    placed = apply_to_sprite([by_kind[k] for k in order], sprite).pixels[..., 3]
    # no opaque mass leaves the canvas
    assert placed.astype(int).sum() == warped.astype(int).sum()
    rows = np.flatnonzero(placed.any(axis=1))
    cols = np.flatnonzero(placed.any(axis=0))
    edge = 0 if corner == (0.0, 0.0) else 31
    assert edge in (rows[0], rows[-1]) and edge in (cols[0], cols[-1])


def test_spec_parameter_ranges():
    with pytest.raises(BadParameterError):
        TransformSpec('rotate', {'angle': 360.0})
    with pytest.raises(BadParameterError):
        TransformSpec('scale', {'factor': 0.3})
    with pytest.raises(BadParameterError):
        TransformSpec('hflip', {})
    TransformSpec('scale', {'factor': 1.0})


def test_sampled_parameters_stay_in_range():
    rng = RngStream(11)
    tset = TransformSet(ALL_KINDS)
    for _ in range(200):
        specs = sample_transform(tset, rng)
        assert [s.kind for s in specs] == list(ALL_KINDS)
        params = {s.kind: s.params for s in specs}
        assert 0.0 <= params[TransformKind.ROTATE]['angle'] < 360.0
        assert 0.4 <= params[TransformKind.SCALE]['factor'] <= 1.0
        assert 0.1 <= params[TransformKind.BLUR]['sigma'] <= 1.5


def test_augmentation_translate_offsets():
    specs = sample_transform(TransformSet(('translate',), Mode.AUGMENTATION), RngStream(2))
    assert set(specs[0].params) == {'dx', 'dy'}
    assert abs(specs[0].params['dx']) <= 0.3


def test_hflip_frequency():
    rng = RngStream(5)
    tset = TransformSet(('hflip',))
    n = 20000
    hits = sum(sample_transform(tset, rng)[0].params['apply'] for _ in range(n))
    # 5 sigma of Bernoulli(0.5)
    assert abs(hits / float(n) - 0.5) < 5 * 0.5 / np.sqrt(n)


def test_sampling_is_deterministic():
    tset = TransformSet(('rotate', 'noise', 'erasing'))
    a = sample_transform(tset, RngStream(9, 4))
    b = sample_transform(tset, RngStream(9, 4))
    assert a == b


def test_hflip_mirrors_columns():
    pixels = np.zeros((2, 2, 4), dtype=np.uint8)
    pixels[..., 3] = 255
    pixels[0, 0, 0], pixels[0, 1, 0], pixels[1, 0, 0], pixels[1, 1, 0] = 1, 2, 3, 4
    out = apply_to_sprite([TransformSpec('hflip', {'apply': True})], Sprite(pixels))
    assert out.pixels[..., 0].tolist() == [[2, 1], [4, 3]]


@pytest.mark.parametrize('kind', ['invert', 'hflip', 'vflip'])
def test_involutions(kind, opaque_sprite):
    spec = TransformSpec(kind, {'apply': True})
    assert apply_to_sprite([spec, spec], opaque_sprite) == opaque_sprite
    img = _image()
    assert np.array_equal(apply_to_image([spec, spec], img), img)


@pytest.mark.parametrize('kind', ['grayscale', 'posterize'])
def test_idempotents(kind):
    spec = TransformSpec(kind, {'apply': True})
    img = _image(1)
    once = apply_to_image([spec], img)
    assert np.array_equal(apply_to_image([spec, spec], img), once)


@pytest.mark.parametrize('kind', ['rotate', 'scale', 'shear', 'brightness', 'contrast', 'hue'])
def test_identity_parameters(kind, opaque_sprite):
    spec = identity_spec(kind)
    img = _image(2)
    assert np.array_equal(apply_to_image([spec], img), img)
    assert apply_to_sprite([spec], opaque_sprite) == opaque_sprite


def test_translate_zero_offset_is_identity():
    img = _image(3)
    spec = identity_spec('translate', Mode.AUGMENTATION)
    assert np.array_equal(apply_to_image([spec], img), img)


def test_translate_fills_black():
    img = np.full((10, 10, 3), 200, dtype=np.uint8)
    out = apply_to_image([TransformSpec('translate', {'dx': 0.3, 'dy': 0.0})], img)
    assert (out[:, :3] == 0).all() and (out[:, 3:] == 200).all()


def test_object_translate_keeps_sprite_inside():
    pixels = np.zeros((16, 16, 4), dtype=np.uint8)
    pixels[6:10, 6:10] = 255
    sprite = Sprite(pixels)
    for x, y in ((0.0, 0.0), (1.0, 1.0), (0.3, 0.8)):
        out = apply_to_sprite([TransformSpec('translate', {'x': x, 'y': y})], sprite)
        assert int((out.alpha > 0).sum()) == 16
    corner = apply_to_sprite([TransformSpec('translate', {'x': 0.0, 'y': 0.0})], sprite)
    assert corner.alpha[0, 0] == 255


def test_posterize_keeps_top_bit():
    img = np.full((2, 2, 3), 200, dtype=np.uint8)
    out = apply_to_image([TransformSpec('posterize', {'apply': True})], img)
    assert (out == 128).all()


def test_grayscale_equal_channels():
    out = apply_to_image([TransformSpec('grayscale', {'apply': True})], _image(4))
    assert (out[..., 0] == out[..., 1]).all() and (out[..., 1] == out[..., 2]).all()


def test_blur_does_not_increase_variance():
    rng = np.random.RandomState(11)
    for seed in range(100):
        img = _image(seed, 24)
        sigma = rng.uniform(0.1, 1.5)
        out = apply_to_image([TransformSpec('blur', {'sigma': sigma})], img)
        for c in range(3):
            # slack for rounding back to uint8
            assert out[..., c].astype(float).var() <= img[..., c].astype(float).var() + 1.0


def test_photometric_preserves_alpha(opaque_sprite):
    pixels = opaque_sprite.pixels.copy()
    pixels[:4, :, 3] = 0
    sprite = Sprite(pixels)
    rng = RngStream(6)
    kinds = [k for k in ALL_KINDS if k.category is not Category.GEOMETRIC
             and k is not TransformKind.ERASING]
    specs = sample_transform(TransformSet(kinds), rng)
    out = apply_to_sprite(specs, sprite)
    assert np.array_equal(out.alpha, sprite.alpha)
    assert (out.pixels[out.alpha == 0, :3] == 0).all()


def test_erasing_clears_alpha(opaque_sprite):
    big = np.full((32, 32, 4), 255, dtype=np.uint8)
    out = apply_to_sprite([TransformSpec('erasing', {'apply': True, 'x': 0.0, 'y': 0.0})],
                          Sprite(big))
    assert (out.alpha[:14, :14] == 0).all()
    assert int((out.alpha == 0).sum()) == 14 * 14


def test_rotation_moves_content_and_keeps_range():
    img = np.zeros((9, 9, 3), dtype=np.uint8)
    img[0, 4] = 255
    out = apply_to_image([TransformSpec('rotate', {'angle': 180.0})], img)
    assert out[8, 4, 0] == 255 and out[0, 4, 0] == 0


def test_noise_scale_option():
    img = np.full((16, 16, 3), 128, dtype=np.uint8)
    spec = TransformSpec('noise', {'apply': True, 'seed': 7})
    normalized = apply_kernels([spec], img)
    raw = apply_kernels([spec], img, KernelOptions(noise_scale='uint8'))
    assert np.abs(normalized.astype(int) - 128).mean() > np.abs(raw.astype(int) - 128).mean()
    assert np.array_equal(normalized, apply_kernels([spec], img))


def test_elastic_is_seeded():
    img = _image(7, 32)
    a = apply_to_image([TransformSpec('elastic', {'apply': True, 'seed': 1})], img)
    b = apply_to_image([TransformSpec('elastic', {'apply': True, 'seed': 1})], img)
    c = apply_to_image([TransformSpec('elastic', {'apply': True, 'seed': 2})], img)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_sprite_canonical_form():
    pixels = np.full((4, 4, 4), 90, dtype=np.uint8)
    pixels[..., 3] = 0
    sprite = Sprite(pixels)
    assert (sprite.pixels[..., :3] == 0).all()
    with pytest.raises(ValueError):
        sprite.pixels[0, 0, 0] = 1
    with pytest.raises(BadInputError):
        Sprite(np.zeros((4, 4, 3), dtype=np.uint8))


def test_apply_to_image_rejects_rgba():
    with pytest.raises(BadInputError):
        apply_to_image([], np.zeros((4, 4, 4), dtype=np.uint8))
