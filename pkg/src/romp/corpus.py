"""Deterministic synthetic photo corpus.

Images are built from 1/f-spectrum noise fields, soft gradients, and blob
highlights so their quantized-DCT statistics resemble natural photographs
(energy concentrated at low frequencies, plenty of +/-1 high-frequency
coefficients at quality 75). Mid-range luminance keeps reconstructions away
from the [0, 255] clip rails.
"""

import io
from pathlib import Path

import numpy as np
from PIL import Image

DEFAULT_COUNT = 12
DEFAULT_SIZE = (2048, 1536)  # width, height
DEFAULT_QUALITY = 75
DEFAULT_SEED = 20240817


def _spectral_noise(rng, shape, alpha):
    """Random field with a 1/f^alpha amplitude spectrum, unit std."""
    h, w = shape
    white = rng.standard_normal((h, w))
    f = np.fft.rfft2(white)
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    radius = np.hypot(fy, fx)
    radius[0, 0] = radius[0, 1]
    f *= radius ** -alpha
    field = np.fft.irfft2(f, s=shape)
    field -= field.mean()
    std = field.std()
    return field / std if std > 0 else field


def _blobs(rng, shape, count):
    h, w = shape
    y, x = np.mgrid[0:h, 0:w]
    out = np.zeros(shape)
    for _ in range(count):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        sy = rng.uniform(h / 20, h / 4)
        sx = rng.uniform(w / 20, w / 4)
        amp = rng.uniform(-1.0, 1.0)
        out += amp * np.exp(-(((y - cy) / sy) ** 2 + ((x - cx) / sx) ** 2))
    return out


def synth_photo(rng, width, height):
    """One natural-looking RGB frame as uint8 [height, width, 3]."""
    shape = (height, width)
    base = _spectral_noise(rng, shape, rng.uniform(1.6, 2.2)) * rng.uniform(28, 45)
    gy, gx = rng.uniform(-1, 1, 2)
    yy, xx = np.mgrid[0:height, 0:width]
    gradient = gy * (yy / height - 0.5) + gx * (xx / width - 0.5)
    field = base + 35 * gradient + 18 * _blobs(rng, shape, rng.integers(2, 6))
    # mid-frequency texture plus film-like grain: the grain quantizes to the
    # scattered +/-1 high-frequency coefficients typical of camera output
    texture = _spectral_noise(rng, shape, 1.2) * 2.4
    grain_sigma = np.clip(_spectral_noise(rng, shape, 2.0) * 0.4 + 1.6, 1.0, 2.2)
    grain = rng.standard_normal(shape) * grain_sigma
    luma = 128 + field + texture + grain
    luma = np.clip(luma, 36, 220)
    # mild, smooth chroma variation around the luma
    tint_r = _spectral_noise(rng, shape, 2.0) * rng.uniform(4, 12)
    tint_b = _spectral_noise(rng, shape, 2.0) * rng.uniform(4, 12)
    r = np.clip(luma + tint_r, 30, 226)
    g = np.clip(luma - 0.3 * tint_r - 0.3 * tint_b, 30, 226)
    b = np.clip(luma + tint_b, 30, 226)
    return np.stack([r, g, b], axis=-1).astype(np.uint8)


def generate_corpus(directory, count=DEFAULT_COUNT, size=DEFAULT_SIZE,
                    quality=DEFAULT_QUALITY, seed=DEFAULT_SEED):
    """Write `count` baseline JPEGs into `directory`; returns the paths.

    Subsampling cycles through 4:2:0 (most), 4:2:2, 4:4:4, and the last
    image is grayscale, exercising every supported layout.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width, height = size
    paths = []
    for i in range(count):
        rng = np.random.default_rng(seed + 1000 * i)
        arr = synth_photo(rng, width, height)
        path = directory / f"photo{i:02d}.jpg"
        if i == count - 1:
            gray = (0.299 * arr[..., 0] + 0.587 * arr[..., 1]
                    + 0.114 * arr[..., 2]).astype(np.uint8)
            Image.fromarray(gray, "L").save(path, "JPEG", quality=quality)
        else:
            if i % 5 == 3:
                sub = 1    # 4:2:2
            elif i % 5 == 4:
                sub = 0    # 4:4:4
            else:
                sub = 2    # 4:2:0
            Image.fromarray(arr, "RGB").save(path, "JPEG", quality=quality,
                                             subsampling=sub)
        paths.append(path)
    return paths


def encode_jpeg(arr, **save_kwargs):
    """uint8 array -> JPEG bytes (helper for tests and benchmarks)."""
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode).save(buf, "JPEG", **save_kwargs)
    return buf.getvalue()
