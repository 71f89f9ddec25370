"""Transcoding between JPEG coefficients and the ROMP container.

A container holds the file's non-entropy bytes verbatim plus N independent
context-coded payloads, each covering a contiguous MCU range. History (DC
prediction, inter-block energy) resets at segment starts, so every payload
decodes with no data from its neighbours.
"""

import struct
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .context import bucketize, context_index
from .errors import (CoefficientOutOfRange, CorruptPayload, RompError,
                     TableSetMismatch, VersionMismatch)
from .huffman import MAX_CODE_LENGTH
from .jpeg_io import (QuantizedImage, amplitude_bits, amplitude_value,
                      entropy_encode, parse_jpeg, runsize_scan)
from .training import ESCAPE

CONTAINER_MAGIC = b"ROMP"
CONTAINER_VERSION = 1
FLAG_THRESHOLDED = 0x0001


class RuntimeTables:
    """Flat-array view of a ContextTableSet for the kernels."""

    def __init__(self, ts):
        pool = ts.tables
        T = len(pool)
        self.enc_code = np.zeros((T, 257), dtype=np.uint32)
        self.enc_len = np.zeros((T, 257), dtype=np.uint8)
        self.dec_min = np.zeros((T, MAX_CODE_LENGTH + 1), dtype=np.int32)
        self.dec_max = np.full((T, MAX_CODE_LENGTH + 1), -1, dtype=np.int32)
        self.dec_val = np.zeros((T, MAX_CODE_LENGTH + 1), dtype=np.int32)
        self.dec_base = np.zeros(T, dtype=np.int32)
        syms = []
        base = 0
        for t, pt in enumerate(pool):
            for sym, (code, length) in pt.codes().items():
                self.enc_code[t, sym] = code
                self.enc_len[t, sym] = length
            mn, mx, vp = pt.decode_arrays()
            self.dec_min[t] = mn
            self.dec_max[t] = mx
            self.dec_val[t] = vp
            self.dec_base[t] = base
            syms.append(np.array(pt.symbols, dtype=np.int16))
            base += len(pt.symbols)
        self.dec_sym = np.concatenate(syms) if syms else np.zeros(0, dtype=np.int16)
        n_classes = len(ts.classes)
        n_ctx = ts.classes[0].ac_table_ids.size
        self.ctx_tid = np.zeros((n_classes, n_ctx), dtype=np.int32)
        self.dc_tid = np.zeros(n_classes, dtype=np.int32)
        self.inv_max = np.zeros((n_classes, 64), dtype=np.float64)
        self.intra_bounds = np.zeros((n_classes, ts.U - 1), dtype=np.float64)
        self.inter_bounds = np.zeros((n_classes, ts.U - 1), dtype=np.float64)
        for K, ct in enumerate(ts.classes):
            self.ctx_tid[K] = ct.ac_table_ids
            self.dc_tid[K] = ct.dc_table_id
            self.inv_max[K] = ct.params.inv_max
            self.intra_bounds[K] = ct.params.intra_bounds
            self.inter_bounds[K] = ct.params.inter_bounds
        self.U, self.F, self.B = ts.U, ts.F, ts.B
        assert (self.enc_len[:, ESCAPE] > 0).all(), "every table must code ESCAPE"


def runtime_tables(ts):
    rt = getattr(ts, "_runtime", None)
    if rt is None:
        rt = RuntimeTables(ts)
        ts._runtime = rt
    return rt


@dataclass
class RompContainer:
    """The stored artifact: preserved JPEG framing plus N entropy payloads."""

    flags: int
    table_set_id: bytes
    prefix: bytes             # SOI .. end of SOS header, verbatim
    suffix: bytes             # EOI onward (plus any trailer), verbatim
    segments: list            # (start MCU offset, payload bytes)

    @property
    def thresholded(self):
        return bool(self.flags & FLAG_THRESHOLDED)

    def serialize(self):
        out = bytearray()
        out += CONTAINER_MAGIC
        out += struct.pack("<HH", CONTAINER_VERSION, self.flags)
        out += self.table_set_id
        out += struct.pack("<H", len(self.segments))
        blob = struct.pack("<I", len(self.prefix)) + self.prefix \
            + struct.pack("<I", len(self.suffix)) + self.suffix
        out += struct.pack("<I", len(blob)) + blob
        for start, payload in self.segments:
            out += struct.pack("<QQ", start, len(payload))
        for _, payload in self.segments:
            out += payload
        return bytes(out)

    @classmethod
    def deserialize(cls, data):
        if len(data) < 44 or data[:4] != CONTAINER_MAGIC:
            raise CorruptPayload("not a ROMP container")
        version, flags = struct.unpack_from("<HH", data, 4)
        if version != CONTAINER_VERSION:
            raise VersionMismatch(f"container version {version} not supported")
        set_id = data[8:40]
        (nseg,) = struct.unpack_from("<H", data, 40)
        pos = 42
        try:
            (blob_len,) = struct.unpack_from("<I", data, pos)
            pos += 4
            blob_end = pos + blob_len
            (plen,) = struct.unpack_from("<I", data, pos)
            pos += 4
            prefix = data[pos:pos + plen]
            pos += plen
            (slen,) = struct.unpack_from("<I", data, pos)
            pos += 4
            suffix = data[pos:pos + slen]
            pos += slen
            if pos != blob_end or len(prefix) != plen or len(suffix) != slen:
                raise CorruptPayload("bad preserved-JPEG blob")
            offsets = []
            for _ in range(nseg):
                start, length = struct.unpack_from("<QQ", data, pos)
                pos += 16
                offsets.append((start, length))
        except struct.error:
            raise CorruptPayload("truncated container header") from None
        segments = []
        for start, length in offsets:
            payload = data[pos:pos + length]
            if len(payload) != length:
                raise CorruptPayload("truncated payload")
            segments.append((start, payload))
            pos += length
        if pos != len(data):
            raise CorruptPayload("trailing bytes after payloads")
        return cls(flags, set_id, prefix, suffix, segments)


def _segment_ranges(mcu_count, n):
    n = max(1, min(n, mcu_count))
    base, rem = divmod(mcu_count, n)
    ranges = []
    start = 0
    for k in range(n):
        size = base + (1 if k < rem else 0)
        ranges.append((start, start + size))
        start += size
    return ranges


_ROMP_ERRORS = {
    -1: "bit pattern matches no code",
    -2: "payload truncated",
    -3: "invalid symbol",
    -4: "coefficient index past end of block",
}


def romp_encode(img, f, tables, threads=1, thresholded=False):
    """Context-code `img` into a container; threads = payload segment count."""
    rt = runtime_tables(tables)
    comp_class = img.comp_classes
    bpm = img.blocks_per_mcu
    ranges = _segment_ranges(img.mcu_count, threads)

    def encode_range(m0, m1):
        nblk = (m1 - m0) * bpm
        out = np.empty(400 * nblk + 64, dtype=np.uint8)
        no_trace = np.empty(0, dtype=np.int64)
        no_trace_e = np.empty((0, 2), dtype=np.float64)
        nbits = _kernels.romp_encode_segment(
            img.coefs, img.blk_comp, comp_class, m0 * bpm, m1 * bpm,
            rt.ctx_tid, rt.dc_tid, rt.enc_code, rt.enc_len,
            rt.inv_max, rt.intra_bounds, rt.inter_bounds, rt.U, rt.F, rt.B,
            out, no_trace, no_trace_e)
        if nbits < 0:
            raise CoefficientOutOfRange("coefficient amplitude needs more than 15 bits")
        return out[:(nbits + 7) // 8].tobytes()

    if len(ranges) == 1:
        payloads = [encode_range(*ranges[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
            payloads = list(pool.map(lambda r: encode_range(*r), ranges))
    prefix = b"".join(s.raw for s in f.segments[:f.scan_index + 1])
    suffix = b"".join(s.raw for s in f.segments[f.scan_index + 1:]) + f.trailer
    flags = FLAG_THRESHOLDED if thresholded else 0
    segments = [(ranges[k][0], payloads[k]) for k in range(len(ranges))]
    return RompContainer(flags, tables.set_id, prefix, suffix, segments)


def romp_decode(container, tables, threads=1):
    """Reverse the context code and re-emit a standard JPEG byte string."""
    if container.table_set_id != tables.set_id:
        raise TableSetMismatch("container was encoded with a different table set")
    rt = runtime_tables(tables)
    skeleton = parse_jpeg(container.prefix + container.suffix)
    mcu_count, pattern, dims = skeleton.geometry()
    bpm = len(pattern)
    starts = [s for s, _ in container.segments]
    if not starts or starts[0] != 0 or sorted(starts) != starts \
            or any(s >= mcu_count for s in starts) or len(set(starts)) != len(starts):
        raise CorruptPayload("segment offsets do not tile the MCU range")
    bounds = starts + [mcu_count]
    coefs = np.zeros((mcu_count * bpm, 64), dtype=np.int32)
    blk_comp = np.tile(pattern, mcu_count)
    comp_class = np.array([0] + [1] * (len(skeleton.components) - 1), dtype=np.int8)

    def decode_range(k):
        m0, m1 = bounds[k], bounds[k + 1]
        payload = np.frombuffer(container.segments[k][1], dtype=np.uint8)
        status = _kernels.romp_decode_segment(
            payload, coefs, blk_comp, comp_class, m0 * bpm, m1 * bpm,
            rt.ctx_tid, rt.dc_tid,
            rt.dec_min, rt.dec_max, rt.dec_val, rt.dec_sym, rt.dec_base,
            rt.inv_max, rt.intra_bounds, rt.inter_bounds, rt.U, rt.F, rt.B)
        if status < 0:
            raise CorruptPayload(
                f"segment {k}: " + _ROMP_ERRORS.get(status, str(status)))

    nseg = len(container.segments)
    if nseg == 1 or threads <= 1:
        for k in range(nseg):
            decode_range(k)
    else:
        with ThreadPoolExecutor(max_workers=min(threads, nseg)) as pool:
            list(pool.map(decode_range, range(nseg)))
    img = QuantizedImage(coefs, blk_comp, pattern, mcu_count, dims,
                         skeleton.component_sizes(),
                         [(c.h, c.v) for c in skeleton.components],
                         skeleton.width, skeleton.height)
    return entropy_encode(img, skeleton, threads=threads)


def romp_decode_image(container, tables, threads=1):
    """Like romp_decode but stops at the coefficient level (for metrics)."""
    if container.table_set_id != tables.set_id:
        raise TableSetMismatch("container was encoded with a different table set")
    rt = runtime_tables(tables)
    skeleton = parse_jpeg(container.prefix + container.suffix)
    mcu_count, pattern, dims = skeleton.geometry()
    bpm = len(pattern)
    bounds = [s for s, _ in container.segments] + [mcu_count]
    coefs = np.zeros((mcu_count * bpm, 64), dtype=np.int32)
    blk_comp = np.tile(pattern, mcu_count)
    comp_class = np.array([0] + [1] * (len(skeleton.components) - 1), dtype=np.int8)
    for k in range(len(container.segments)):
        payload = np.frombuffer(container.segments[k][1], dtype=np.uint8)
        status = _kernels.romp_decode_segment(
            payload, coefs, blk_comp, comp_class,
            bounds[k] * bpm, bounds[k + 1] * bpm,
            rt.ctx_tid, rt.dc_tid,
            rt.dec_min, rt.dec_max, rt.dec_val, rt.dec_sym, rt.dec_base,
            rt.inv_max, rt.intra_bounds, rt.inter_bounds, rt.U, rt.F, rt.B)
        if status < 0:
            raise CorruptPayload(f"segment {k}: " + _ROMP_ERRORS.get(status, str(status)))
    img = QuantizedImage(coefs, blk_comp, pattern, mcu_count, dims,
                         skeleton.component_sizes(),
                         [(c.h, c.v) for c in skeleton.components],
                         skeleton.width, skeleton.height)
    return img, skeleton


# ---------------------------------------------------------------------------
# single-block reference coder (mirrors the kernels bit for bit)
# ---------------------------------------------------------------------------

class CodingHistory:
    """Per-component coding state: DC predictor and the last B block energies."""

    def __init__(self, params, comp_class=0):
        self.params = params
        self.comp_class = comp_class
        self.dc_pred = 0
        self._prefixes = deque(maxlen=params.B)

    def push(self, block):
        from .context import block_prefix_energy
        self._prefixes.append(block_prefix_energy(block, self.params))

    def inter(self, p):
        hi = min(p + self.params.F - 1, 63)
        total = 0.0
        for pre in self._prefixes:  # oldest first, same order as the kernels
            total += pre[hi] - pre[p - 1]
        return total / (self.params.B * self.params.F)


def _code_maps(tables, tid):
    cache = getattr(tables, "_code_maps", None)
    if cache is None:
        cache = {}
        tables._code_maps = cache
    maps = cache.get(tid)
    if maps is None:
        pt = tables.tables[tid]
        enc = pt.codes()
        dec = {(length, code): sym for sym, (code, length) in enc.items()}
        maps = (enc, dec)
        cache[tid] = maps
    return maps


def _emit(sink, enc, sym):
    entry = enc.get(sym)
    if entry is not None:
        sink.put(*entry)
    else:
        sink.put(*enc[ESCAPE])
        sink.put(sym, 8)


def encode_block(block, history, tables, sink):
    """Context-code one block (DC diff + AC runsizes) into a BitSink."""
    params = history.params
    K = history.comp_class
    ct = tables.classes[K]
    v = int(block[0])
    diff = v - history.dc_pred
    history.dc_pred = v
    s = abs(diff).bit_length()
    if s > 15:
        raise CoefficientOutOfRange("DC difference needs more than 15 bits")
    enc, _ = _code_maps(tables, ct.dc_table_id)
    _emit(sink, enc, s)
    if s:
        sink.put(amplitude_bits(diff, s), s)
    pos = 1
    intra_sum = 0.0
    inv = params.inv_max
    for sym, amp in runsize_scan(block):
        iv = 0.0 if pos == 1 else intra_sum / (pos - 1)
        ib = bucketize(iv, params.intra_bounds)
        eb = bucketize(history.inter(pos), params.inter_bounds)
        ctx = context_index(pos, ib, eb, params.U)
        enc, _ = _code_maps(tables, int(ct.ac_table_ids[ctx]))
        _emit(sink, enc, sym.byte)
        if sym.kind == "ZRL":
            pos += 16
        elif sym.kind == "EOB":
            pos = 64
        else:
            sink.put(amp, sym.size)
            cpos = pos + sym.run
            r = sym.size * inv[cpos]
            intra_sum += r if r < 1.0 else 1.0
            pos = cpos + 1
    history.push(block)


def _read_symbol(source, dec):
    code = 0
    for length in range(1, MAX_CODE_LENGTH + 1):
        code = (code << 1) | source.read_bit()
        sym = dec.get((length, code))
        if sym is not None:
            return sym
    raise CorruptPayload("bit pattern matches no code")


def decode_block(source, history, tables):
    """Inverse of encode_block; returns a fresh 64-coefficient block."""
    params = history.params
    K = history.comp_class
    ct = tables.classes[K]
    block = np.zeros(64, dtype=np.int32)
    _, dec = _code_maps(tables, ct.dc_table_id)
    sym = _read_symbol(source, dec)
    if sym == ESCAPE:
        sym = source.read(8)
    if sym > 15:
        raise CorruptPayload("invalid DC size category")
    if sym:
        history.dc_pred += amplitude_value(source.read(sym), sym)
    block[0] = history.dc_pred
    pos = 1
    intra_sum = 0.0
    inv = params.inv_max
    while pos <= 63:
        iv = 0.0 if pos == 1 else intra_sum / (pos - 1)
        ib = bucketize(iv, params.intra_bounds)
        eb = bucketize(history.inter(pos), params.inter_bounds)
        ctx = context_index(pos, ib, eb, params.U)
        _, dec = _code_maps(tables, int(ct.ac_table_ids[ctx]))
        sym = _read_symbol(source, dec)
        if sym == ESCAPE:
            sym = source.read(8)
        if sym == 0:
            break
        if sym == 0xF0:
            pos += 16
            if pos > 63:
                raise CorruptPayload("ZRL past end of block")
            continue
        run, size = sym >> 4, sym & 15
        pos += run
        if pos > 63:
            raise CorruptPayload("coefficient index past end of block")
        block[pos] = amplitude_value(source.read(size), size)
        r = size * inv[pos]
        intra_sum += r if r < 1.0 else 1.0
        pos += 1
    history.push(block)
    return block
