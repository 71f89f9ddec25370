"""Context triple <position, intra bucket, inter bucket> for AC runsizes.

The energies are normalized averages of coefficient SIZEs: within the current
block prefix (intra) and over a small window of the previous blocks of the
same component (inter). Both depend only on data the decoder has already
reconstructed, so encoder and decoder derive identical contexts.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import RompError

AC_POSITIONS = 63


def coefficient_size(c):
    """Amplitude bit count: minimal l with |c| < 2**l (SIZE(0) == 0)."""
    return int(abs(int(c))).bit_length()


@dataclass
class ContextParams:
    """Per-component-class context parameters.

    max_size holds the largest SIZE observed per zigzag position during
    training (fallback 1 for never-seen positions); intra_bounds/inter_bounds
    are the U-1 ascending bucket boundaries.
    """

    F: int = 5
    B: int = 3
    U: int = 20
    max_size: np.ndarray = field(default_factory=lambda: np.ones(64, dtype=np.uint8))
    intra_bounds: np.ndarray = field(default_factory=lambda: np.zeros(0))
    inter_bounds: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.F < 1 or self.B < 1 or self.U < 2:
            raise RompError("require F >= 1, B >= 1, U >= 2")
        self.max_size = np.asarray(self.max_size, dtype=np.uint8)
        if self.max_size.shape != (64,) or self.max_size.min() < 1 or self.max_size.max() > 15:
            raise RompError("max_size must be 64 entries in 1..15")
        for name in ("intra_bounds", "inter_bounds"):
            b = np.asarray(getattr(self, name), dtype=np.float64)
            setattr(self, name, b)
            if b.size and (np.any(np.diff(b) <= 0) or b[0] < 0 or b[-1] > 1):
                raise RompError(f"{name} must be strictly ascending within [0, 1]")

    @property
    def inv_max(self):
        return 1.0 / self.max_size.astype(np.float64)

    def n_contexts(self):
        return AC_POSITIONS * self.U * self.U


@dataclass(frozen=True)
class ContextTriple:
    p: int
    i: int
    e: int

    def index(self, U):
        return ((self.p - 1) * U + self.i) * U + self.e


def context_index(p, i, e, U):
    """Flat table index for <p, i, e> with p in 1..63 and buckets in 0..U-1."""
    return ((p - 1) * U + i) * U + e


def intra_energy(block, p, params):
    """Normalized average SIZE over positions 1..p-1 of the current block.

    Returns 0.0 for p == 1 (empty prefix). Each SIZE/max_size ratio is
    clamped to 1 so test-set coefficients larger than anything seen in
    training cannot push the energy outside [0, 1].
    """
    if p == 1:
        return 0.0
    inv = params.inv_max
    total = 0.0
    for i in range(1, p):
        r = coefficient_size(block[i]) * inv[i]
        total += r if r < 1.0 else 1.0
    return total / (p - 1)


def inter_energy(grid, n, p, params):
    """Normalized average SIZE over positions p..p+F-1 of the B prior blocks.

    grid: blocks of one component in scan order, shape (nblocks, 64). Prior
    blocks that do not exist (n < B at an image or segment start) and window
    positions past 63 contribute zero; the divisor remains B*F.

    Computed from cumulative per-block energies, the same float path the
    codec uses, so encoder, decoder, and this function agree bit for bit.
    """
    hi = min(p + params.F - 1, 63)
    total = 0.0
    for bi in range(max(0, n - params.B), n):
        pre = block_prefix_energy(grid[bi], params)
        total += pre[hi] - pre[p - 1]
    return total / (params.B * params.F)


def block_prefix_energy(block, params):
    """Cumulative clamped SIZE/max_size over positions 1..63 (index 0 == 0).

    P[j] - P[p-1] gives a prior block's contribution to inter_energy for the
    window p..j; the codec keeps one of these per history slot.
    """
    inv = params.inv_max
    out = np.zeros(64, dtype=np.float64)
    acc = 0.0
    for j in range(1, 64):
        r = coefficient_size(block[j]) * inv[j]
        acc += r if r < 1.0 else 1.0
        out[j] = acc
    return out


def bucketize(value, bounds):
    """Bucket index: the count of boundaries <= value (ties go up)."""
    lo, hi = 0, len(bounds)
    while lo < hi:
        mid = (lo + hi) // 2
        if bounds[mid] <= value:
            lo = mid + 1
        else:
            hi = mid
    return lo
