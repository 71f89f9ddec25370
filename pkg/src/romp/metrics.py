"""Size and quality metrics, plus the minimal dequantize+IDCT needed to
reach the pixel domain for verification.

Metrics operate per component plane at native (subsampled) resolution; no
chroma upsampling or color conversion happens here.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroBaseline
from .jpegtables import ZIGZAG

PSNR_IDENTICAL = math.inf

# orthonormal 8-point DCT-II basis; pixels = T.T @ coeffs @ T
_T = np.zeros((8, 8))
for _k in range(8):
    _a = math.sqrt(0.125) if _k == 0 else 0.5
    for _n in range(8):
        _T[_k, _n] = _a * math.cos(math.pi * (2 * _n + 1) * _k / 16)

# zigzag index for each raster position
_INV_ZIGZAG = np.zeros(64, dtype=np.int64)
_INV_ZIGZAG[ZIGZAG] = np.arange(64)


@dataclass
class CompressionStats:
    s: int
    s_prime: int

    @property
    def ratio(self):
        return compression_ratio(self.s, self.s_prime)


def compression_ratio(s, s_prime):
    """Saved storage over old storage: (s - s') / s."""
    if s <= 0:
        raise ZeroBaseline("baseline size must be positive")
    return (s - s_prime) / s


def block_pixels(block, qtable):
    """One block to the pixel domain: dequantize, IDCT, +128 level shift.

    block and qtable are 64-vectors in zigzag order; the result is an
    unclipped float 8x8 array (callers clip for display comparisons).
    """
    d = (np.asarray(block, dtype=np.float64) * np.asarray(qtable, dtype=np.float64))
    d = d[_INV_ZIGZAG].reshape(8, 8)
    return _T.T @ d @ _T + 128.0


def reconstruct_pixels(img, f, clip=True):
    """Per-component pixel planes over the full coded block grid.

    Planes cover every coded block (including edge padding blocks); use
    crop_plane() with the component's true size for display-level
    comparisons. Values are clipped to [0, 255] unless clip=False.
    """
    planes = []
    for ci, comp in enumerate(f.components):
        q = f.quant_tables[comp.tq].astype(np.float64)
        grid = img.component_blocks(ci).astype(np.float64)
        bh, bw = grid.shape[:2]
        d = (grid * q)[:, :, _INV_ZIGZAG].reshape(bh, bw, 8, 8)
        px = np.einsum("kj,xyjl,lm->xykm", _T.T, d, _T, optimize=True) + 128.0
        plane = px.transpose(0, 2, 1, 3).reshape(bh * 8, bw * 8)
        if clip:
            np.clip(plane, 0.0, 255.0, out=plane)
        planes.append(plane)
    return planes


def crop_plane(plane, size):
    w, h = size
    return plane[:h, :w]


def psnr(plane_a, plane_b):
    """Peak signal-to-noise ratio in dB; +inf sentinel for identical planes."""
    a = np.asarray(plane_a, dtype=np.float64)
    b = np.asarray(plane_b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_IDENTICAL
    return 10.0 * math.log10(255.0 ** 2 / mse)


_C1 = (0.01 * 255.0) ** 2
_C2 = (0.03 * 255.0) ** 2


def block_ssim_map(plane_a, plane_b):
    """SSIM per aligned 8x8 window (population moments, standard constants)."""
    a = np.asarray(plane_a, dtype=np.float64)
    b = np.asarray(plane_b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    if a.shape[0] % 8 or a.shape[1] % 8:
        h, w = (a.shape[0] // 8) * 8, (a.shape[1] // 8) * 8
        a, b = a[:h, :w], b[:h, :w]
    bh, bw = a.shape[0] // 8, a.shape[1] // 8
    ab = a.reshape(bh, 8, bw, 8).transpose(0, 2, 1, 3).reshape(bh, bw, 64)
    bb = b.reshape(bh, 8, bw, 8).transpose(0, 2, 1, 3).reshape(bh, bw, 64)
    mu_a = ab.mean(axis=2)
    mu_b = bb.mean(axis=2)
    var_a = ab.var(axis=2)
    var_b = bb.var(axis=2)
    cov = (ab * bb).mean(axis=2) - mu_a * mu_b
    lum = (2 * mu_a * mu_b + _C1) / (mu_a ** 2 + mu_b ** 2 + _C1)
    cs = (2 * cov + _C2) / (var_a + var_b + _C2)
    return lum * cs


def block_ssim(plane_a, plane_b, block_index):
    """SSIM of one aligned 8x8 window; block_index is raster order."""
    m = block_ssim_map(plane_a, plane_b)
    bh, bw = m.shape
    return float(m[block_index // bw, block_index % bw])
