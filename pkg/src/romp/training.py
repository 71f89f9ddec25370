"""Learning the context table set from a corpus of JPEG images.

Training is two corpus passes. Pass 1 collects per-position size maxima and
raw (intra, inter) energy samples (each file's samples normalized by its own
maxima, which keeps per-file statistics order-independent and mergeable).
Boundaries are then fitted as equal-occupancy quantiles. Pass 2 replays the
corpus and counts every AC runsize under its final <p,i,e> context plus DC
size categories per component class. One canonical Huffman table is built
per populated context; never-seen contexts share a fallback table derived
from the default JPEG AC table.
"""

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels, jpegtables
from .context import AC_POSITIONS, ContextParams
from .errors import (CorruptTableSet, InsufficientSamples, RompError,
                     VersionMismatch)
from .huffman import PrefixTable
from .jpeg_io import JpegFile, QuantizedImage, entropy_decode

ESCAPE = 256                 # reserved symbol: next 8 raw bits carry run<<4|size
ESCAPE_PSEUDO_COUNT = 1     # fixed probability mass for all unseen symbols
TABLE_MAGIC = b"RMPT"
TABLE_VERSION = 1
N_CLASSES = 2                # 0 = luma, 1 = chroma


class SymbolHistogram:
    """Accumulated training statistics, mergeable across workers."""

    def __init__(self, F=5, B=3, U=20, seed=0, reservoir_cap=1 << 20):
        self.F, self.B, self.U = F, B, U
        n_ctx = AC_POSITIONS * U * U
        self.ac_counts = np.zeros((N_CLASSES, n_ctx, 257), dtype=np.int32)
        self.dc_counts = np.zeros((N_CLASSES, 17), dtype=np.int64)
        self.size_max = np.zeros((N_CLASSES, 64), dtype=np.uint8)
        self.reservoir_cap = reservoir_cap
        self.res_intra = [np.empty(reservoir_cap) for _ in range(N_CLASSES)]
        self.res_inter = [np.empty(reservoir_cap) for _ in range(N_CLASSES)]
        self.res_fill = [0, 0]
        self.res_seen = [0, 0]
        self.intra_bounds = None
        self.inter_bounds = None
        self._rng = np.random.default_rng(seed)
        self.files_seen = 0
        self.skipped = []    # (name, error) pairs for files that failed

    @property
    def counts_phase(self):
        return self.intra_bounds is not None

    def total_symbols(self):
        return int(self.ac_counts.sum())

    def _add_samples(self, K, intra, inter):
        """Reservoir update (vectorized algorithm R) for one class."""
        cap = self.reservoir_cap
        m = intra.size
        fill, seen = self.res_fill[K], self.res_seen[K]
        take = min(m, cap - fill)
        if take:
            self.res_intra[K][fill:fill + take] = intra[:take]
            self.res_inter[K][fill:fill + take] = inter[:take]
            fill += take
        if m > take:
            rest_i = intra[take:]
            rest_e = inter[take:]
            t = seen + take + np.arange(rest_i.size)
            accept = self._rng.random(rest_i.size) < cap / (t + 1)
            slots = self._rng.integers(0, cap, size=int(accept.sum()))
            self.res_intra[K][slots] = rest_i[accept]
            self.res_inter[K][slots] = rest_e[accept]
        self.res_fill[K] = fill
        self.res_seen[K] = seen + m

    def add_stats(self, img):
        """Pass 1: size maxima plus energy samples (file-local maxima)."""
        file_max = np.zeros((N_CLASSES, 64), dtype=np.uint8)
        _kernels.size_maxima(img.coefs, img.blk_comp, img.comp_classes, file_max)
        np.maximum(self.size_max, file_max, out=self.size_max)
        inv = 1.0 / np.maximum(file_max, 1).astype(np.float64)
        n = int(_kernels.count_ac_symbols(img.coefs))
        out_class = np.empty(n, dtype=np.int8)
        out_intra = np.empty(n, dtype=np.float64)
        out_inter = np.empty(n, dtype=np.float64)
        wrote = _kernels.train_energy_pass(img.coefs, img.blk_comp, img.comp_classes,
                                           inv, self.F, self.B,
                                           out_class, out_intra, out_inter)
        for K in range(N_CLASSES):
            mask = out_class[:wrote] == K
            if mask.any():
                self._add_samples(K, out_intra[:wrote][mask], out_inter[:wrote][mask])

    def finalize_bounds(self):
        """Fit bucket boundaries from the reservoirs; enters the count phase."""
        self.intra_bounds = np.zeros((N_CLASSES, self.U - 1))
        self.inter_bounds = np.zeros((N_CLASSES, self.U - 1))
        for K in range(N_CLASSES):
            fill = self.res_fill[K]
            if fill == 0 and K == 1:
                # grayscale-only corpus: reuse the luma boundaries
                self.intra_bounds[K] = self.intra_bounds[0]
                self.inter_bounds[K] = self.inter_bounds[0]
                continue
            self.intra_bounds[K] = fit_buckets(self.res_intra[K][:fill], self.U)
            self.inter_bounds[K] = fit_buckets(self.res_inter[K][:fill], self.U)

    def add_counts(self, img):
        """Pass 2: contexted runsize counts and DC size categories."""
        if not self.counts_phase:
            raise RompError("finalize_bounds() must run before counting")
        inv = 1.0 / np.maximum(self.size_max, 1).astype(np.float64)
        status = _kernels.train_count_pass(img.coefs, img.blk_comp, img.comp_classes,
                                           inv, self.intra_bounds, self.inter_bounds,
                                           self.U, self.F, self.B,
                                           self.ac_counts, self.dc_counts)
        if status < 0:
            raise RompError("coefficient out of range while counting")
        self.files_seen += 1


def accumulate(corpus_file, hist):
    """Add one file's statistics to the histogram (phase-aware).

    Before finalize_bounds() this collects size maxima and energy samples;
    afterwards it counts runsizes under their final contexts. Accepts a
    parsed JpegFile or an already-decoded QuantizedImage.
    """
    img = corpus_file if isinstance(corpus_file, QuantizedImage) else entropy_decode(corpus_file)
    if hist.counts_phase:
        hist.add_counts(img)
    else:
        hist.add_stats(img)
    return hist


def fit_buckets(samples, U):
    """Equal-occupancy boundaries: the 1/U .. (U-1)/U empirical quantiles.

    Duplicate quantiles are perturbed upward by the minimum representable
    increment so boundaries stay strictly ascending (and strictly positive,
    so a zero energy always lands in bucket 0).
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < U:
        raise InsufficientSamples(f"need at least {U} samples, got {samples.size}")
    if samples.min() == samples.max():
        raise InsufficientSamples("energy samples are a point mass")
    qs = np.quantile(samples, np.arange(1, U) / U)
    bounds = np.empty(U - 1)
    prev = 0.0
    for i, q in enumerate(qs):
        b = q if q > prev else np.nextafter(prev, np.inf)
        bounds[i] = b
        prev = b
    # duplicate quantiles at the top (energies saturate at 1.0) cascade down
    ceiling = 1.0
    for i in range(U - 2, -1, -1):
        if bounds[i] > ceiling:
            bounds[i] = ceiling
        ceiling = np.nextafter(bounds[i], -np.inf)
    if bounds[0] <= 0.0:
        raise InsufficientSamples("boundary perturbation escaped [0, 1]")
    return bounds


# ---------------------------------------------------------------------------
# table set
# ---------------------------------------------------------------------------

@dataclass
class ClassTables:
    params: ContextParams
    ac_table_ids: np.ndarray   # int32[n_contexts] -> index into set.tables
    dc_table_id: int


@dataclass
class ContextTableSet:
    """The trained codec: one prefix table per context, shared off-file."""

    tables: list               # PrefixTable pool shared by both classes
    classes: list              # ClassTables per component class
    fallback_ids: list         # per class: pool id of the never-seen-context table
    set_id: bytes = b""

    def __post_init__(self):
        if not self.set_id:
            self.set_id = hashlib.sha256(self._body()).digest()

    @property
    def U(self):
        return self.classes[0].params.U

    @property
    def F(self):
        return self.classes[0].params.F

    @property
    def B(self):
        return self.classes[0].params.B

    def __eq__(self, other):
        return isinstance(other, ContextTableSet) and self.set_id == other.set_id \
            and self._body() == other._body()

    def _body(self):
        out = bytearray()
        out += TABLE_MAGIC
        out += struct.pack("<HBHHH", TABLE_VERSION, len(self.classes),
                           self.F, self.B, self.U)
        for K, ct in enumerate(self.classes):
            p = ct.params
            out += bytes(p.max_size)
            out += p.intra_bounds.astype("<f8").tobytes()
            out += p.inter_bounds.astype("<f8").tobytes()
            out += _pack_table(self.tables[ct.dc_table_id])
            fallback = self.fallback_ids[K]
            for tid in ct.ac_table_ids:
                if tid == fallback:
                    out += struct.pack("<H", 0xFFFF)
                else:
                    out += _pack_table(self.tables[tid])
        return bytes(out)

    def serialize(self):
        body = self._body()
        return body + hashlib.sha256(body).digest()


def _pack_table(pt):
    out = struct.pack("<H", len(pt.symbols))
    for s, l in zip(pt.symbols, pt.lengths):
        out += struct.pack("<HB", s, l)
    return out


def _default_table_counts(bits, values, extra_escape=True):
    """Dyadic pseudo-counts reproducing a default table's length ordering."""
    counts = {}
    for sym, (_, length) in jpegtables.expand_dht(bits, values).items():
        counts[sym] = 1 << (24 - length)
    if extra_escape:
        counts[ESCAPE] = ESCAPE_PSEUDO_COUNT
    return counts


def fallback_ac_table(K):
    """Table for contexts never seen in training: default JPEG AC + ESCAPE."""
    bits, values = jpegtables.AC_CHROMA if K else jpegtables.AC_LUMA
    return PrefixTable.from_counts(_default_table_counts(bits, values))


def fallback_dc_table(K):
    bits, values = jpegtables.DC_CHROMA if K else jpegtables.DC_LUMA
    return PrefixTable.from_counts(_default_table_counts(bits, values))


def build_tables(hist):
    """Canonical Huffman tables per populated context, plus fallbacks."""
    if not hist.counts_phase:
        raise RompError("histogram bounds are not finalized")
    pool = []
    index = {}

    def intern(pt):
        key = (pt.symbols, pt.lengths)
        tid = index.get(key)
        if tid is None:
            tid = len(pool)
            index[key] = tid
            pool.append(pt)
        return tid

    classes = []
    fallback_ids = []
    for K in range(N_CLASSES):
        fallback = intern(fallback_ac_table(K))
        fallback_ids.append(fallback)
        n_ctx = hist.ac_counts.shape[1]
        ids = np.full(n_ctx, fallback, dtype=np.int32)
        counts_K = hist.ac_counts[K]
        for ctx in np.nonzero(counts_K.sum(axis=1))[0]:
            row = counts_K[ctx]
            counts = {int(s): int(row[s]) for s in np.nonzero(row)[0]}
            counts[0] = max(counts.get(0, 0), 1)      # EOB always codable
            counts[ESCAPE] = ESCAPE_PSEUDO_COUNT
            ids[ctx] = intern(PrefixTable.from_counts(counts))
        dc_row = hist.dc_counts[K]
        if dc_row.sum() == 0:
            dc_id = intern(fallback_dc_table(K))
        else:
            counts = {int(s): int(dc_row[s]) for s in np.nonzero(dc_row)[0]}
            counts[ESCAPE] = ESCAPE_PSEUDO_COUNT
            dc_id = intern(PrefixTable.from_counts(counts))
        params = ContextParams(hist.F, hist.B, hist.U,
                               np.maximum(hist.size_max[K], 1),
                               hist.intra_bounds[K], hist.inter_bounds[K])
        classes.append(ClassTables(params, ids, dc_id))
    return ContextTableSet(pool, classes, fallback_ids)


def train_tables(sources, F=5, B=3, U=20, seed=0, progress=None):
    """Two-pass training over JPEG paths / bytes / decoded images.

    Returns (ContextTableSet, skipped) where skipped lists (source, error)
    for files that failed to decode; failures never abort the run.
    """
    hist = SymbolHistogram(F=F, B=B, U=U, seed=seed)
    decoded = []
    for src in sources:
        name = str(src)
        try:
            img = _load_source(src)
        except RompError as exc:
            hist.skipped.append((name, str(exc)))
            continue
        decoded.append(img)
        accumulate(img, hist)
        if progress:
            progress(f"pass 1: {name}")
    if not decoded:
        raise InsufficientSamples("no decodable files in the corpus")
    hist.finalize_bounds()
    for img in decoded:
        accumulate(img, hist)
    if progress:
        progress("building tables")
    return build_tables(hist), hist.skipped


def _load_source(src):
    from .jpeg_io import parse_jpeg
    if isinstance(src, QuantizedImage):
        return src
    if isinstance(src, JpegFile):
        return entropy_decode(src)
    if isinstance(src, (bytes, bytearray)):
        return entropy_decode(parse_jpeg(bytes(src)))
    with open(src, "rb") as fh:
        return entropy_decode(parse_jpeg(fh.read()))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_table_set(table_set, path):
    data = table_set.serialize()
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def load_table_set(path):
    with open(path, "rb") as fh:
        data = fh.read()
    return deserialize_table_set(data)


def deserialize_table_set(data):
    if len(data) < 45 or data[:4] != TABLE_MAGIC:
        raise CorruptTableSet("not a table-set file")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptTableSet("content hash mismatch")
    version, n_classes, F, B, U = struct.unpack_from("<HBHHH", data, 4)
    if version != TABLE_VERSION:
        raise VersionMismatch(f"table-set version {version} not supported")
    if n_classes != N_CLASSES:
        raise CorruptTableSet(f"unsupported class count {n_classes}")
    pos = 13
    pool = []
    index = {}

    def intern(pt):
        key = (pt.symbols, pt.lengths)
        tid = index.get(key)
        if tid is None:
            tid = len(pool)
            index[key] = tid
            pool.append(pt)
        return tid

    def read_table():
        nonlocal pos
        (nsym,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if nsym == 0xFFFF:
            return None
        if nsym == 0 or nsym > 257:
            raise CorruptTableSet("bad table symbol count")
        lengths = {}
        for _ in range(nsym):
            s, l = struct.unpack_from("<HB", data, pos)
            pos += 3
            if s > ESCAPE or not (1 <= l <= 24):
                raise CorruptTableSet("bad symbol/length entry")
            lengths[s] = l
        try:
            return PrefixTable.from_lengths(lengths)
        except ValueError as exc:
            raise CorruptTableSet(str(exc)) from None

    try:
        classes = []
        fallback_ids = []
        n_ctx = AC_POSITIONS * U * U
        for K in range(N_CLASSES):
            max_size = np.frombuffer(data, dtype=np.uint8, count=64, offset=pos).copy()
            pos += 64
            intra = np.frombuffer(data, dtype="<f8", count=U - 1, offset=pos).copy()
            pos += 8 * (U - 1)
            inter = np.frombuffer(data, dtype="<f8", count=U - 1, offset=pos).copy()
            pos += 8 * (U - 1)
            dc_table = read_table()
            if dc_table is None:
                raise CorruptTableSet("missing DC table")
            dc_id = intern(dc_table)
            fallback = intern(fallback_ac_table(K))
            fallback_ids.append(fallback)
            ids = np.full(n_ctx, fallback, dtype=np.int32)
            for ctx in range(n_ctx):
                pt = read_table()
                if pt is not None:
                    ids[ctx] = intern(pt)
            try:
                params = ContextParams(F, B, U, max_size, intra, inter)
            except RompError as exc:
                raise CorruptTableSet(str(exc)) from None
            classes.append(ClassTables(params, ids, dc_id))
    except struct.error:
        raise CorruptTableSet("truncated table-set file") from None
    if pos != len(body):
        raise CorruptTableSet("trailing bytes in table-set file")
    ts = ContextTableSet(pool, classes, fallback_ids, set_id=digest)
    _validate_tables(ts)
    return ts


def _validate_tables(ts):
    for pt in ts.tables:
        if ESCAPE not in pt.symbols:
            raise CorruptTableSet("table lacks an ESCAPE codeword")
        # canonical assignment doubles as the prefix-free/Kraft check
        try:
            pt.codes()
        except ValueError as exc:
            raise CorruptTableSet(str(exc)) from None
    for K, ct in enumerate(ts.classes):
        for tid in np.unique(ct.ac_table_ids):
            if 0 not in ts.tables[tid].symbols:
                raise CorruptTableSet("AC table lacks an EOB codeword")
