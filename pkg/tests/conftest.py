import io
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))  # for reference_jpeg

from romp import codec, jpeg_io, training

CORPUS_DIR = Path(__file__).resolve().parent.parent / "corpus"


def make_jpeg(arr, **save_kwargs):
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode).save(buf, "JPEG", **save_kwargs)
    return buf.getvalue()


def random_sparse_block(rng, max_abs=1023, density=None):
    """A plausible 64-coefficient zigzag block (denser at low positions)."""
    block = np.zeros(64, dtype=np.int32)
    block[0] = rng.integers(-1024, 1024)
    density = rng.uniform(0.03, 0.5) if density is None else density
    for pos in range(1, 64):
        p = density * (1.0 if pos < 12 else 0.35 if pos < 32 else 0.12)
        if rng.random() < p:
            mag = int(rng.integers(1, max_abs + 1) ** 0.5) + \
                (int(rng.integers(1, 4)) if pos < 8 else 0)
            block[pos] = mag if rng.random() < 0.5 else -mag
    return block


@pytest.fixture(scope="session")
def corpus_paths():
    paths = sorted(CORPUS_DIR.glob("*.jpg"))
    assert len(paths) >= 10, (
        "bundled corpus missing; regenerate with "
        "python -c 'from romp.corpus import generate_corpus; generate_corpus(\"corpus\")'")
    return paths


@pytest.fixture(scope="session")
def corpus_data(corpus_paths):
    return [p.read_bytes() for p in corpus_paths]


@pytest.fixture(scope="session")
def corpus_files(corpus_data):
    return [jpeg_io.parse_jpeg(d) for d in corpus_data]


@pytest.fixture(scope="session")
def corpus_images(corpus_files):
    return [jpeg_io.entropy_decode(f) for f in corpus_files]


@pytest.fixture(scope="session")
def full_tables(corpus_images):
    """Tables trained on the whole corpus (for training-independent tests)."""
    tables, skipped = training.train_tables(corpus_images, seed=1)
    assert not skipped
    return tables


@pytest.fixture(scope="session")
def loo_tables(corpus_images):
    """Leave-one-out table sets: loo_tables[k] excludes corpus image k."""
    out = []
    for k in range(len(corpus_images)):
        rest = [img for j, img in enumerate(corpus_images) if j != k]
        tables, skipped = training.train_tables(rest, seed=1)
        assert not skipped
        out.append(tables)
    return out


@pytest.fixture(scope="session")
def tiny_tables():
    """Small table set trained on two tiny synthetic images (fast tests)."""
    rng = np.random.default_rng(5)
    imgs = []
    for _ in range(2):
        arr = (rng.normal(128, 18, (64, 96)) +
               np.linspace(0, 40, 96)[None, :]).clip(30, 225).astype(np.uint8)
        data = make_jpeg(arr, quality=75)
        imgs.append(jpeg_io.entropy_decode(jpeg_io.parse_jpeg(data)))
    tables, _ = training.train_tables(imgs, seed=3)
    return tables
