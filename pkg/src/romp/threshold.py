"""Perceptually-bounded coefficient thresholding (the lossy pass).

Only coefficients of size 1 (values +1/-1) are candidates. A candidate is
zeroed when the bits saved by merging its zero runs exceeds the rate
threshold, subject to two per-block caps: at most floor(Tp * nonzero_count)
removals, and cumulative removed dequantized energy at most Tp times the
block's total AC energy. The second cap is what makes the block-SSIM floor
1 - Tp/(2 - Tp) hold regardless of how the quantization table weights
frequencies; with a flat table it is implied by the count cap.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, jpegtables
from .errors import NotCandidate, RompError
from .jpeg_io import QuantizedImage


@dataclass
class ThresholdParams:
    rate_threshold: float = 2.0
    perceptual_threshold: float = 0.4

    def __post_init__(self):
        if self.rate_threshold < 0:
            raise RompError("rate threshold must be non-negative")
        if not 0 <= self.perceptual_threshold < 1:
            raise RompError("perceptual threshold must be in [0, 1)")

    @property
    def ssim_floor(self):
        return ssim_floor(self.perceptual_threshold)


def ssim_floor(tp):
    """Guaranteed lower bound on block-wise SSIM after thresholding at tp."""
    if not 0 <= tp < 1:
        raise RompError("perceptual threshold must be in [0, 1)")
    return 1.0 - tp / (2.0 - tp)


def mse_increase(value, step):
    """Per-block squared-error increase from zeroing one coefficient.

    Divide by 64 for the per-pixel MSE contribution (DCT orthogonality)."""
    return float(step * value) ** 2


def bits_saved(block, pos, code_lengths):
    """Bits saved by zeroing the size-1 coefficient at zigzag `pos`.

    code_lengths: per-runsize-symbol code length array (the JPEG default AC
    table lengths in the standard configuration). Counts the replaced
    runsizes, the freed amplitude bit, ZRL bookkeeping, and the tail
    collapsing to a single EOB when the block's last nonzero is removed.
    """
    v = int(block[pos])
    if v not in (1, -1):
        raise NotCandidate(f"coefficient at {pos} has SIZE != 1")
    lens = np.asarray(code_lengths)
    prev = pos - 1
    while prev >= 1 and block[prev] == 0:
        prev -= 1
    r1 = pos - prev - 1
    z1, k1 = r1 >> 4, r1 & 15
    len_zrl = int(lens[0xF0])
    len_eob = int(lens[0x00])
    old = z1 * len_zrl + int(lens[(k1 << 4) | 1]) + 1
    nxt = pos + 1
    while nxt <= 63 and block[nxt] == 0:
        nxt += 1
    if nxt > 63:
        if pos < 63:
            old += len_eob
        return float(old - len_eob)
    s2 = int(abs(int(block[nxt]))).bit_length()
    r2 = nxt - pos - 1
    z2, k2 = r2 >> 4, r2 & 15
    rm = r1 + 1 + r2
    zm, km = rm >> 4, rm & 15
    old += z2 * len_zrl + int(lens[(k2 << 4) | s2])
    new = zm * len_zrl + int(lens[(km << 4) | s2])
    return float(old - new)


@dataclass
class BlockThresholdEntry:
    candidates: int
    zeroed: int
    bits_saved: float
    fraction_zeroed: float


def threshold_block(block, params, code_lengths, quant_steps=None):
    """Threshold one block; returns (new block, BlockThresholdEntry).

    quant_steps (zigzag dequantization steps) enables the energy cap; with
    None all steps are treated as equal, in which case the count cap already
    implies it.
    """
    block = np.asarray(block)
    nonzero = int(np.count_nonzero(block[1:]))
    out = block.copy()
    if nonzero == 0:
        return out, BlockThresholdEntry(0, 0, 0.0, 0.0)
    cap = int(params.perceptual_threshold * nonzero + 1e-9)
    steps2 = (np.ones(64) if quant_steps is None
              else np.asarray(quant_steps, dtype=np.float64) ** 2)
    total_energy = float(np.sum(block[1:].astype(np.float64) ** 2 * steps2[1:]))
    budget = params.perceptual_threshold * total_energy
    cands = []
    considered = 0
    for pos in range(1, 64):
        if block[pos] in (1, -1):
            considered += 1
            saved = bits_saved(block, pos, code_lengths)
            if saved > params.rate_threshold:
                cands.append((saved, pos))
    cands.sort(key=lambda t: (t[0], t[1]), reverse=True)
    removed = 0
    e_removed = 0.0
    bits_total = 0.0
    for saved, pos in cands:
        if removed >= cap:
            break
        e = steps2[pos]
        if e_removed + e > budget:
            continue
        out[pos] = 0
        removed += 1
        e_removed += e
        bits_total += saved
    return out, BlockThresholdEntry(considered, removed, bits_total,
                                    removed / nonzero)


@dataclass
class ThresholdReport:
    """Per-block and aggregate accounting of a thresholding pass."""

    candidates: np.ndarray       # int32[n_blocks]
    zeroed: np.ndarray           # int32[n_blocks]
    bits_saved: np.ndarray       # float64[n_blocks]
    nonzeros: np.ndarray         # int32[n_blocks], before thresholding
    blk_comp: np.ndarray

    @property
    def fraction_zeroed(self):
        nz = np.maximum(self.nonzeros, 1)
        return self.zeroed / nz

    def component_totals(self):
        out = []
        ncomp = int(self.blk_comp.max()) + 1 if self.blk_comp.size else 0
        for c in range(ncomp):
            m = self.blk_comp == c
            out.append({
                "component": c,
                "candidates": int(self.candidates[m].sum()),
                "zeroed": int(self.zeroed[m].sum()),
                "bits_saved_estimate": float(self.bits_saved[m].sum()),
            })
        return out

    def summary(self):
        return {
            "blocks": int(self.candidates.size),
            "candidates": int(self.candidates.sum()),
            "zeroed": int(self.zeroed.sum()),
            "bits_saved_estimate": float(self.bits_saved.sum()),
            "max_fraction_zeroed": float(self.fraction_zeroed.max())
            if self.candidates.size else 0.0,
            "per_component": self.component_totals(),
        }


def threshold_image(img, f, params):
    """Threshold every block of `img`; returns (new image, ThresholdReport).

    Candidates whose merged runsize has no code in the file's own AC table
    are skipped so the result always re-encodes to a valid JPEG.
    """
    out = img.copy()
    comp_class = img.comp_classes
    ncomp = img.n_components
    def_len = np.stack([jpegtables.default_ac_lengths(False),
                        jpegtables.default_ac_lengths(True)])
    file_len = np.zeros((ncomp, 256), dtype=np.uint8)
    qstep2 = np.zeros((ncomp, 64), dtype=np.float64)
    for ci, comp in enumerate(f.components):
        bits, values = f.huff_tables[(1, comp.ta)]
        _, lengths = jpegtables.encode_arrays(bits, values)
        file_len[ci] = lengths
        qstep2[ci] = f.quant_tables[comp.tq].astype(np.float64) ** 2
    nb = img.coefs.shape[0]
    nonzeros = np.count_nonzero(img.coefs[:, 1:], axis=1).astype(np.int32)
    rep_candidates = np.zeros(nb, dtype=np.int32)
    rep_zeroed = np.zeros(nb, dtype=np.int32)
    rep_bits = np.zeros(nb, dtype=np.float64)
    _kernels.threshold_image(out.coefs, img.blk_comp, comp_class,
                             float(params.rate_threshold),
                             float(params.perceptual_threshold),
                             def_len, file_len, qstep2,
                             rep_candidates, rep_zeroed, rep_bits)
    report = ThresholdReport(rep_candidates, rep_zeroed, rep_bits,
                             nonzeros, img.blk_comp)
    return out, report
