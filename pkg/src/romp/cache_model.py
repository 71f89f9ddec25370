"""Analytical estimator of deployment benefits on a photo caching stack.

Pure arithmetic over user-supplied hit rates, latency histograms, and
compression ratios: effective cache size, request-share redistribution,
bandwidth reductions, replication-factor savings, and the mixed download
latency distribution.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, RompError

DEFAULT_HORIZON_MS = 5000


def effective_cache_size(x):
    """Capacity multiplier from storing compressed objects: 1 / (1 - x)."""
    if not 0 <= x < 1:
        raise RompError("compression ratio must be in [0, 1)")
    return 1.0 / (1.0 - x)


def request_shares(h_e, h_o):
    """(S_e, S_o, S_b): request fractions served by edge, origin, backend.

    S_b is computed as the exact complement so the three sum to 1.0.
    """
    if not (0 <= h_e <= 1 and 0 <= h_o <= 1):
        raise RompError("hit rates must be in [0, 1]")
    s_e = h_e
    s_o = (1.0 - h_e) * h_o
    s_b = 1.0 - s_e - s_o
    return s_e, s_o, s_b


def replication_savings(r, x):
    """New effective replication factor after deploying compression: R(1-x)."""
    if r <= 0:
        raise RompError("replication factor must be positive")
    if not 0 <= x < 1:
        raise RompError("compression ratio must be in [0, 1)")
    return r * (1.0 - x)


def hit_rate_from_curve(points, relative_size):
    """Linear interpolation of a monotone (relative cache size -> hit rate)
    table, clamped at both ends."""
    pts = sorted((float(s), float(h)) for s, h in points)
    if not pts:
        raise RompError("empty hit curve")
    sizes = np.array([p[0] for p in pts])
    hits = np.array([p[1] for p in pts])
    if np.any(np.diff(hits) < 0):
        raise RompError("hit curve must be non-decreasing")
    return float(np.interp(relative_size, sizes, hits))


@dataclass
class LatencyHistogram:
    """Latency distribution in 1 ms buckets 0..horizon; overflow mass is
    folded into the last bucket."""

    probs: np.ndarray
    horizon: int = DEFAULT_HORIZON_MS

    @classmethod
    def from_points(cls, pairs, horizon=DEFAULT_HORIZON_MS):
        probs = np.zeros(horizon + 1)
        for ms, p in pairs:
            b = min(int(round(ms)), horizon)
            if b < 0:
                raise RompError("negative latency bucket")
            probs[b] += p
        return cls(probs, horizon)

    @classmethod
    def point_mass(cls, ms, horizon=DEFAULT_HORIZON_MS):
        return cls.from_points([(ms, 1.0)], horizon)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.size != self.horizon + 1:
            raise DimensionMismatch("histogram length must be horizon + 1")
        if abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise RompError("histogram mass must sum to 1")

    def shift(self, ms):
        """Uniform translation by `ms` (rounded to 1 ms buckets)."""
        k = int(round(ms))
        if k == 0:
            return self
        probs = np.zeros_like(self.probs)
        if k > 0:
            probs[k:] = self.probs[:-k] if k < probs.size else 0
            probs[-1] += self.probs[max(0, self.probs.size - k):].sum()
            if k >= probs.size:
                probs[-1] = 1.0
        else:
            probs[:k] = self.probs[-k:]
            probs[0] += self.probs[:-k].sum()
        return LatencyHistogram(probs, self.horizon)

    def percentile(self, q):
        """Smallest latency whose cumulative mass reaches q (0 < q <= 1)."""
        cdf = np.cumsum(self.probs)
        idx = int(np.searchsorted(cdf, q - 1e-12))
        return min(idx, self.horizon)

    def mean(self):
        return float(np.arange(self.probs.size) @ self.probs)


def combined_latency(shares, l_e, l_o, l_b, decode_shift=0):
    """Mixture S_e*L_e + S_o*L_o + S_b*L_b after shifting every layer by the
    decode latency."""
    s_e, s_o, s_b = shares
    if abs(s_e + s_o + s_b - 1.0) > 1e-9:
        raise RompError("request shares must sum to 1")
    layers = [h.shift(decode_shift) for h in (l_e, l_o, l_b)]
    if len({h.horizon for h in layers}) != 1:
        raise DimensionMismatch("latency histograms use different horizons")
    probs = s_e * layers[0].probs + s_o * layers[1].probs + s_b * layers[2].probs
    return LatencyHistogram(probs, layers[0].horizon)


@dataclass
class BandwidthReport:
    backend_request_reduction: float
    bytes_to_edge_reduction: float
    external_bandwidth_reduction: float


def bandwidth_reductions(shares_before, shares_after, x, lossy_x=0.0):
    """Reductions in backend requests, bytes to the edge, and external
    bandwidth.

    Bytes to the edge combine the edge miss-rate change with the size factor
    (1 - x); external bandwidth only shrinks by the lossy component."""
    sb_before = shares_before[2]
    sb_after = shares_after[2]
    backend = 0.0 if sb_before == 0 else 1.0 - sb_after / sb_before
    miss_before = 1.0 - shares_before[0]
    miss_after = 1.0 - shares_after[0]
    if miss_before == 0:
        bytes_edge = x
    else:
        bytes_edge = 1.0 - (miss_after * (1.0 - x)) / miss_before
    return BandwidthReport(backend, bytes_edge, lossy_x)


@dataclass
class CacheModelInputs:
    """Everything the estimator consumes; hit_curve entries are optional
    per-layer (relative size -> hit rate) tables."""

    h_e: float
    h_o: float
    x: float
    lossy_x: float = 0.0
    r_factors: tuple = (3.6, 2.1)
    decode_shift: float = 0.0
    hit_curve_edge: list = field(default_factory=list)
    hit_curve_origin: list = field(default_factory=list)
    l_e: LatencyHistogram | None = None
    l_o: LatencyHistogram | None = None
    l_b: LatencyHistogram | None = None

    def __post_init__(self):
        if not (0 <= self.h_e <= 1 and 0 <= self.h_o <= 1):
            raise RompError("hit rates must be in [0, 1]")
        if not 0 <= self.x < 1:
            raise RompError("compression ratio must be in [0, 1)")


def estimate(inputs):
    """Full benefit report mirroring the deployment tables."""
    size_factor = effective_cache_size(inputs.x)
    h_e2 = (hit_rate_from_curve(inputs.hit_curve_edge, size_factor)
            if inputs.hit_curve_edge else inputs.h_e)
    h_o2 = (hit_rate_from_curve(inputs.hit_curve_origin, size_factor)
            if inputs.hit_curve_origin else inputs.h_o)
    before = request_shares(inputs.h_e, inputs.h_o)
    after = request_shares(h_e2, h_o2)
    bw = bandwidth_reductions(before, after, inputs.x, inputs.lossy_x)
    report = {
        "compression_ratio": inputs.x,
        "effective_cache_size": size_factor,
        "hit_rates": {
            "edge": {"before": inputs.h_e, "after": h_e2},
            "origin": {"before": inputs.h_o, "after": h_o2},
        },
        "request_shares": {
            "before": {"edge": before[0], "origin": before[1], "backend": before[2]},
            "after": {"edge": after[0], "origin": after[1], "backend": after[2]},
        },
        "reductions": {
            "backend_requests": bw.backend_request_reduction,
            "bytes_to_edge": bw.bytes_to_edge_reduction,
            "external_bandwidth": bw.external_bandwidth_reduction,
        },
        "replication": [
            {"base": r, "new": replication_savings(r, inputs.x)}
            for r in inputs.r_factors
        ],
    }
    if inputs.l_e and inputs.l_o and inputs.l_b:
        base = combined_latency(before, inputs.l_e, inputs.l_o, inputs.l_b, 0)
        new = combined_latency(after, inputs.l_e, inputs.l_o, inputs.l_b,
                               inputs.decode_shift)
        report["latency_ms"] = {
            "before": {f"p{p}": base.percentile(p / 100) for p in (50, 90, 99)},
            "after": {f"p{p}": new.percentile(p / 100) for p in (50, 90, 99)},
            "mean_before": base.mean(),
            "mean_after": new.mean(),
        }
    return report
