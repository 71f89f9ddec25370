"""Baseline JPEG parsing and entropy-level transcoding.

Non-entropy segments are preserved verbatim (raw bytes); only the
entropy-coded scan data is decoded to quantized coefficients and
regenerated. Re-encoding an unmodified image with the file's own tables
reproduces the input byte for byte (same Huffman codes, same byte stuffing,
same restart markers, same 1-bit padding).
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, jpegtables
from .errors import (CoefficientOutOfRange, HuffmanDecodeError,
                     MalformedStream, RompError, UnsupportedMode)

M_SOI = 0xD8
M_EOI = 0xD9
M_SOS = 0xDA
M_DQT = 0xDB
M_DRI = 0xDD
M_DHT = 0xC4
M_DAC = 0xCC
M_SOF0 = 0xC0
M_COM = 0xFE
M_TEM = 0x01

_SOF_ALL = {0xC0, 0xC1, 0xC2, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF}
_STANDALONE = {M_SOI, M_EOI, M_TEM} | set(range(0xD0, 0xD8))

# (luma h, v) -> chroma must be 1x1; covers 4:4:4, 4:2:2, 4:2:0
_SUPPORTED_LUMA_FACTORS = {(1, 1), (2, 1), (2, 2)}


@dataclass
class Segment:
    marker: int       # second marker byte (0xD8 for SOI, ...)
    payload: bytes    # body without marker/length; b"" for standalone markers
    raw: bytes        # exact original bytes, used for re-serialization


@dataclass
class ComponentInfo:
    cid: int
    h: int
    v: int
    tq: int
    td: int = 0
    ta: int = 0


@dataclass
class JpegFile:
    segments: list            # all non-entropy segments in file order
    scan_index: int           # index of the SOS segment in `segments`
    scan_data: bytes          # raw entropy bytes (stuffed, with RST markers)
    trailer: bytes            # bytes after EOI, if any
    width: int
    height: int
    components: list          # ComponentInfo per SOF order
    restart_interval: int
    quant_tables: dict        # tq -> int32[64] steps in zigzag order
    huff_tables: dict         # (tc, th) -> (bits bytes[16], values bytes)

    def serialize(self, scan_data=None):
        """Rebuild the full file; scan_data overrides the stored scan bytes."""
        scan = self.scan_data if scan_data is None else scan_data
        parts = [seg.raw for seg in self.segments[:self.scan_index + 1]]
        parts.append(scan)
        parts.extend(seg.raw for seg in self.segments[self.scan_index + 1:])
        parts.append(self.trailer)
        return b"".join(parts)

    @property
    def n_components(self):
        return len(self.components)

    def geometry(self):
        """(mcu_count, comp_of_slot, per-component padded block grid dims)."""
        comps = self.components
        if len(comps) == 1:
            bw = -(-self.width // 8)
            bh = -(-self.height // 8)
            return bw * bh, np.zeros(1, dtype=np.int8), [(bw, bh)]
        hmax = max(c.h for c in comps)
        vmax = max(c.v for c in comps)
        mcux = -(-self.width // (8 * hmax))
        mcuy = -(-self.height // (8 * vmax))
        pattern = []
        dims = []
        for ci, c in enumerate(comps):
            pattern.extend([ci] * (c.h * c.v))
            dims.append((mcux * c.h, mcuy * c.v))
        return mcux * mcuy, np.array(pattern, dtype=np.int8), dims

    def component_sizes(self):
        """True sampled pixel dims per component (before block padding)."""
        comps = self.components
        if len(comps) == 1:
            return [(self.width, self.height)]
        hmax = max(c.h for c in comps)
        vmax = max(c.v for c in comps)
        return [(-(-self.width * c.h // hmax), -(-self.height * c.v // vmax))
                for c in comps]


@dataclass
class QuantizedImage:
    """Quantized DCT coefficients of every coded block, zigzag order.

    coefs rows follow the scan (MCU) order of the interleaved stream;
    blk_comp gives each row's component. Padding blocks at the right/bottom
    edges are real coded blocks and are kept.
    """

    coefs: np.ndarray         # int32[n_blocks, 64]
    blk_comp: np.ndarray      # int8[n_blocks]
    comp_of_slot: np.ndarray  # int8[blocks per MCU]
    mcu_count: int
    comp_grid: list           # per component (blocks_wide, blocks_high), padded
    comp_sizes: list          # per component true (width, height) in pixels
    comp_hv: list             # per component (h, v) sampling factors
    width: int
    height: int

    @property
    def n_components(self):
        return len(self.comp_grid)

    @property
    def blocks_per_mcu(self):
        return len(self.comp_of_slot)

    @property
    def comp_classes(self):
        """Component class per component: 0 = luma, 1 = chroma."""
        return np.array([0] + [1] * (self.n_components - 1), dtype=np.int8)

    def copy(self):
        return QuantizedImage(self.coefs.copy(), self.blk_comp, self.comp_of_slot,
                              self.mcu_count, self.comp_grid, self.comp_sizes,
                              self.comp_hv, self.width, self.height)

    def component_blocks(self, ci):
        """Blocks of component ci as a (blocks_high, blocks_wide, 64) grid,
        raster order (undoes the MCU interleave)."""
        bw, bh = self.comp_grid[ci]
        rows = self.coefs[self.blk_comp == ci]
        h, v = self.comp_hv[ci]
        if self.n_components == 1 or (h == 1 and v == 1):
            return rows.reshape(bh, bw, 64)
        mcux, mcuy = bw // h, bh // v
        g = rows.reshape(mcuy, mcux, v, h, 64)
        return g.transpose(0, 2, 1, 3, 4).reshape(bh, bw, 64)


def _u16(data, pos):
    if pos + 2 > len(data):
        raise MalformedStream("truncated segment length")
    return (data[pos] << 8) | data[pos + 1]


def parse_jpeg(data):
    """Parse a baseline JPEG into a JpegFile.

    Raises UnsupportedMode for anything outside baseline sequential 8-bit
    Huffman with a single interleaved scan, MalformedStream for corrupt
    input.
    """
    if len(data) < 4 or data[0] != 0xFF or data[1] != M_SOI:
        raise MalformedStream("input does not begin with an SOI marker")
    segments = [Segment(M_SOI, b"", data[0:2])]
    pos = 2
    width = height = 0
    components = []
    restart_interval = 0
    quant_tables = {}
    huff_tables = {}
    scan_index = -1
    scan_data = b""
    trailer = b""
    sof_seen = False
    while True:
        seg_start = pos
        if pos >= len(data):
            raise MalformedStream("unexpected end of file before EOI")
        if data[pos] != 0xFF:
            raise MalformedStream(f"expected marker at offset {pos}")
        while pos < len(data) and data[pos] == 0xFF:
            pos += 1  # fill bytes allowed before a marker
        if pos >= len(data):
            raise MalformedStream("dangling 0xFF at end of file")
        marker = data[pos]
        pos += 1
        if marker == 0x00:
            raise MalformedStream("stuffed byte outside entropy-coded data")
        if marker in _STANDALONE:
            if marker == M_EOI:
                segments.append(Segment(M_EOI, b"", data[seg_start:pos]))
                trailer = data[pos:]
                break
            raise MalformedStream(f"unexpected standalone marker 0x{marker:02X}")
        length = _u16(data, pos)
        if length < 2 or pos + length > len(data):
            raise MalformedStream("segment length out of bounds")
        payload = data[pos + 2:pos + length]
        pos += length
        if marker in _SOF_ALL:
            if marker != M_SOF0:
                raise UnsupportedMode(f"SOF{marker - 0xC0} frames are not supported")
            if sof_seen:
                raise MalformedStream("multiple SOF segments")
            sof_seen = True
            width, height, components = _parse_sof(payload)
        elif marker == M_DAC:
            raise UnsupportedMode("arithmetic-coded JPEG is not supported")
        elif marker == M_DHT:
            _parse_dht(payload, huff_tables)
        elif marker == M_DQT:
            _parse_dqt(payload, quant_tables)
        elif marker == M_DRI:
            if len(payload) != 2:
                raise MalformedStream("bad DRI payload")
            restart_interval = (payload[0] << 8) | payload[1]
        elif marker == M_SOS:
            if scan_index >= 0:
                raise UnsupportedMode("multi-scan baseline files are not supported")
            if not sof_seen:
                raise MalformedStream("SOS before SOF")
            _parse_sos(payload, components)
            segments.append(Segment(marker, payload, data[seg_start:pos]))
            scan_index = len(segments) - 1
            end = _scan_end(data, pos)
            scan_data = data[pos:end]
            pos = end
            continue
        segments.append(Segment(marker, payload, data[seg_start:pos]))
    if scan_index < 0:
        raise MalformedStream("no scan in file")
    f = JpegFile(segments, scan_index, scan_data, trailer, width, height,
                 components, restart_interval, quant_tables, huff_tables)
    _validate_references(f)
    return f


def _parse_sof(payload):
    if len(payload) < 6:
        raise MalformedStream("short SOF payload")
    precision = payload[0]
    if precision != 8:
        raise UnsupportedMode(f"{precision}-bit samples are not supported")
    height = (payload[1] << 8) | payload[2]
    width = (payload[3] << 8) | payload[4]
    ncomp = payload[5]
    if height == 0:
        raise UnsupportedMode("DNL-deferred height is not supported")
    if width == 0:
        raise MalformedStream("zero image width")
    if len(payload) != 6 + 3 * ncomp:
        raise MalformedStream("bad SOF payload size")
    if ncomp not in (1, 3):
        raise UnsupportedMode(f"{ncomp}-component images are not supported")
    comps = []
    for i in range(ncomp):
        cid, hv, tq = payload[6 + 3 * i:9 + 3 * i]
        comps.append(ComponentInfo(cid, hv >> 4, hv & 15, tq))
    if ncomp == 3:
        luma = (comps[0].h, comps[0].v)
        if luma not in _SUPPORTED_LUMA_FACTORS or any(
                (c.h, c.v) != (1, 1) for c in comps[1:]):
            raise UnsupportedMode("only 4:4:4, 4:2:2 and 4:2:0 sampling is supported")
    else:
        if (comps[0].h, comps[0].v) != (1, 1):
            comps[0].h = comps[0].v = 1  # sampling is meaningless for one component
    return width, height, comps


def _parse_dht(payload, huff_tables):
    pos = 0
    while pos < len(payload):
        if pos + 17 > len(payload):
            raise MalformedStream("truncated DHT")
        tc, th = payload[pos] >> 4, payload[pos] & 15
        if tc > 1:
            raise UnsupportedMode("arithmetic conditioning table in DHT slot")
        bits = payload[pos + 1:pos + 17]
        n = sum(bits)
        if pos + 17 + n > len(payload):
            raise MalformedStream("truncated DHT values")
        huff_tables[(tc, th)] = (bits, payload[pos + 17:pos + 17 + n])
        pos += 17 + n


def _parse_dqt(payload, quant_tables):
    pos = 0
    while pos < len(payload):
        pq, tq = payload[pos] >> 4, payload[pos] & 15
        pos += 1
        n = 64 * (2 if pq else 1)
        if pos + n > len(payload):
            raise MalformedStream("truncated DQT")
        if pq:
            table = np.frombuffer(payload[pos:pos + n], dtype=">u2").astype(np.int32)
        else:
            table = np.frombuffer(payload[pos:pos + n], dtype=np.uint8).astype(np.int32)
        quant_tables[tq] = table
        pos += n


def _parse_sos(payload, components):
    if len(payload) < 1:
        raise MalformedStream("empty SOS payload")
    ns = payload[0]
    if len(payload) != 1 + 2 * ns + 3:
        raise MalformedStream("bad SOS payload size")
    if ns != len(components):
        raise UnsupportedMode("non-interleaved or partial scans are not supported")
    by_id = {c.cid: c for c in components}
    for i in range(ns):
        cs, tt = payload[1 + 2 * i], payload[2 + 2 * i]
        if cs not in by_id:
            raise MalformedStream(f"scan references unknown component {cs}")
        by_id[cs].td = tt >> 4
        by_id[cs].ta = tt & 15
    ss, se, a = payload[-3], payload[-2], payload[-1]
    if (ss, se, a) != (0, 63, 0):
        raise UnsupportedMode("non-baseline spectral selection in SOS")


def _scan_end(data, pos):
    """Offset of the marker terminating the entropy-coded segment."""
    i = pos
    n = len(data)
    while True:
        j = data.find(0xFF, i)
        if j < 0 or j + 1 >= n:
            raise MalformedStream("entropy data not terminated by a marker")
        nxt = data[j + 1]
        if nxt == 0x00 or 0xD0 <= nxt <= 0xD7:
            i = j + 2
            continue
        if nxt == 0xFF:
            i = j + 1  # fill byte
            continue
        return j


def _validate_references(f):
    for c in f.components:
        if c.tq not in f.quant_tables:
            raise MalformedStream(f"component {c.cid} references missing DQT {c.tq}")
        if (0, c.td) not in f.huff_tables:
            raise MalformedStream(f"component {c.cid} references missing DC DHT {c.td}")
        if (1, c.ta) not in f.huff_tables:
            raise MalformedStream(f"component {c.cid} references missing AC DHT {c.ta}")


# ---------------------------------------------------------------------------
# scan data <-> coefficients
# ---------------------------------------------------------------------------

_RST_FIRST, _RST_LAST = 0xD0, 0xD7


def _split_restart_runs(scan_data):
    """Split raw scan bytes at restart markers; returns destuffed runs."""
    arr = np.frombuffer(scan_data, dtype=np.uint8)
    if arr.size == 0:
        return [arr]
    is_ff = arr[:-1] == 0xFF
    nxt = arr[1:]
    rst_pos = np.nonzero(is_ff & (nxt >= _RST_FIRST) & (nxt <= _RST_LAST))[0]
    runs = []
    markers = []
    start = 0
    for p in rst_pos:
        runs.append(arr[start:p])
        markers.append(arr[p + 1] - _RST_FIRST)
        start = p + 2
    runs.append(arr[start:])
    return [_destuff(r) for r in runs], markers


def _destuff(arr):
    if arr.size == 0:
        return np.zeros(0, dtype=np.uint8)
    prev_ff = np.concatenate(([False], arr[:-1] == 0xFF))
    drop = prev_ff & (arr == 0x00)
    if not drop.any():
        return np.ascontiguousarray(arr)
    return np.ascontiguousarray(arr[~drop])


def _stuff(arr, nbits):
    """Byte-stuff an encoded run (insert 0x00 after every 0xFF)."""
    nbytes = (nbits + 7) // 8
    arr = arr[:nbytes]
    ff = arr == 0xFF
    count = int(ff.sum())
    if count == 0:
        return arr.tobytes()
    ins = np.cumsum(ff)
    out = np.zeros(arr.size + count, dtype=np.uint8)
    out[np.arange(arr.size) + ins - ff] = arr
    return out.tobytes()


def _decode_luts(f):
    """Stacked 16-bit-peek LUTs plus per-component table indices."""
    keys = sorted({(0, c.td) for c in f.components} | {(1, c.ta) for c in f.components})
    idx = {k: i for i, k in enumerate(keys)}
    lut_sym = np.zeros((len(keys), 1 << 16), dtype=np.int16)
    lut_len = np.zeros((len(keys), 1 << 16), dtype=np.uint8)
    for k, i in idx.items():
        bits, values = f.huff_tables[k]
        s, l = jpegtables.decode_lut(bits, values)
        lut_sym[i] = s
        lut_len[i] = l
    dc_t = np.array([idx[(0, c.td)] for c in f.components], dtype=np.int64)
    ac_t = np.array([idx[(1, c.ta)] for c in f.components], dtype=np.int64)
    return lut_sym, lut_len, dc_t, ac_t


def _encode_arrays(f, tables=None):
    """Stacked per-symbol (code, length) arrays for the file's tables.

    `tables` optionally overrides the file's DHT map (same key structure);
    used to price coefficients under the standard Annex K tables.
    """
    src = f.huff_tables if tables is None else tables
    keys = sorted({(0, c.td) for c in f.components} | {(1, c.ta) for c in f.components})
    idx = {k: i for i, k in enumerate(keys)}
    enc_code = np.zeros((len(keys), 256), dtype=np.uint32)
    enc_len = np.zeros((len(keys), 256), dtype=np.uint8)
    for k, i in idx.items():
        bits, values = src[k]
        code, length = jpegtables.encode_arrays(bits, values)
        enc_code[i] = code
        enc_len[i] = length
    dc_t = np.array([idx[(0, c.td)] for c in f.components], dtype=np.int64)
    ac_t = np.array([idx[(1, c.ta)] for c in f.components], dtype=np.int64)
    return enc_code, enc_len, dc_t, ac_t


_DECODE_ERRORS = {
    -1: "bit pattern matches no Huffman code",
    -2: "entropy data truncated",
    -3: "invalid runsize symbol",
    -4: "coefficient index past end of block",
}


def entropy_decode(f):
    """Decode the scan into a QuantizedImage (cumulative DC values)."""
    mcu_count, pattern, dims = f.geometry()
    bpm = len(pattern)
    coefs = np.zeros((mcu_count * bpm, 64), dtype=np.int32)
    blk_comp = np.tile(pattern, mcu_count)
    lut_sym, lut_len, dc_t, ac_t = _decode_luts(f)
    runs, markers = _split_restart_runs(f.scan_data)
    dri = f.restart_interval
    if dri == 0:
        expected_runs = 1
    else:
        expected_runs = -(-mcu_count // dri)
    if len(runs) != expected_runs:
        raise MalformedStream(
            f"expected {expected_runs} restart intervals, found {len(runs)}")
    if any(m != i % 8 for i, m in enumerate(markers)):
        raise MalformedStream("restart markers out of sequence")
    ncomp = f.n_components
    mcu0 = 0
    for ri, run in enumerate(runs):
        n = min(dri, mcu_count - mcu0) if dri else mcu_count
        status = _kernels.jpeg_decode_run(run, coefs, mcu0 * bpm, n, pattern,
                                          ncomp, lut_sym, lut_len, dc_t, ac_t)
        if status < 0:
            raise HuffmanDecodeError(
                f"scan decode failed in restart interval {ri}: "
                + _DECODE_ERRORS.get(status, str(status)))
        mcu0 += n
    return QuantizedImage(coefs, blk_comp, pattern, mcu_count, dims,
                          f.component_sizes(), [(c.h, c.v) for c in f.components],
                          f.width, f.height)


def _check_consistent(img, f):
    mcu_count, pattern, _ = f.geometry()
    if img.mcu_count != mcu_count or list(img.comp_of_slot) != list(pattern):
        raise RompError("image structure does not match the file's layout")


def _prev_dc_inits(img, mcu0):
    """DC predictor seeds for a chunk starting at MCU mcu0 (cumulative DCs)."""
    ncomp = img.n_components
    init = np.zeros(ncomp, dtype=np.int64)
    if mcu0 == 0:
        return init
    bpm = img.blocks_per_mcu
    pattern = img.comp_of_slot
    for c in range(ncomp):
        last_slot = int(np.nonzero(pattern == c)[0][-1])
        init[c] = img.coefs[(mcu0 - 1) * bpm + last_slot, 0]
    return init


def concat_bitstreams(parts):
    """Join (uint8 buffer, exact bit count) chunks; final byte 1-padded."""
    total = sum(p[1] for p in parts)
    out = np.zeros((total + 7) // 8, dtype=np.uint8)
    bitpos = 0
    for buf, nbits in parts:
        if nbits == 0:
            continue
        nbytes = (nbits + 7) // 8
        chunk = buf[:nbytes].copy()
        if nbits & 7:
            chunk[-1] &= (0xFF << (8 - (nbits & 7))) & 0xFF  # clear pad bits
        base, shift = bitpos >> 3, bitpos & 7
        if shift == 0:
            out[base:base + nbytes] |= chunk
        else:
            ext = np.zeros(nbytes + 1, dtype=np.uint8)
            ext[0] = chunk[0] >> shift
            if nbytes > 1:
                ext[1:nbytes] = (chunk[1:] >> shift) | (chunk[:-1] << (8 - shift))
            ext[nbytes] = chunk[-1] << (8 - shift)
            out[base:base + ext.size] |= ext[:out.size - base]
        bitpos += nbits
    if total & 7:
        out[-1] |= (1 << (8 - (total & 7))) - 1
    return out, total


_ENCODE_ERRORS = {
    -5: "runsize has no code in the file's Huffman table",
    -6: "coefficient amplitude needs more than 15 bits",
}


def encode_scan(img, f, threads=1, tables=None):
    """Re-encode coefficients into raw scan bytes (stuffed, with restarts)."""
    _check_consistent(img, f)
    enc_code, enc_len, dc_t, ac_t = _encode_arrays(f, tables)
    pattern = img.comp_of_slot
    bpm = img.blocks_per_mcu
    ncomp = img.n_components
    dri = f.restart_interval
    mcu_count = img.mcu_count

    def encode_range(mcu0, n, dc_init):
        out = np.empty(300 * n * bpm + 64, dtype=np.uint8)
        nbits = _kernels.jpeg_encode_run(img.coefs, mcu0 * bpm, n, pattern, ncomp,
                                         enc_code, enc_len, dc_t, ac_t, dc_init, out)
        if nbits < 0:
            raise CoefficientOutOfRange(_ENCODE_ERRORS.get(nbits, str(nbits)))
        return out, nbits

    if dri:
        # restart runs are byte aligned; join with cycling RST markers
        parts = []
        mcu0 = 0
        i = 0
        zero = np.zeros(ncomp, dtype=np.int64)
        while mcu0 < mcu_count:
            n = min(dri, mcu_count - mcu0)
            out, nbits = encode_range(mcu0, n, zero)
            if mcu0 > 0:
                parts.append(bytes([0xFF, _RST_FIRST + ((i - 1) % 8)]))
            parts.append(_stuff(out, nbits))
            mcu0 += n
            i += 1
        return b"".join(parts)

    if threads <= 1 or mcu_count < 4 * threads:
        out, nbits = encode_range(0, mcu_count, np.zeros(ncomp, dtype=np.int64))
        return _stuff(out, nbits)

    # chunked encode with bit-level concatenation; DC predictors are seeded
    # from the cumulative coefficients so chunks are independent
    from concurrent.futures import ThreadPoolExecutor
    bounds = np.linspace(0, mcu_count, threads + 1).astype(np.int64)
    jobs = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for k in range(threads):
            m0, m1 = int(bounds[k]), int(bounds[k + 1])
            jobs.append(pool.submit(encode_range, m0, m1 - m0, _prev_dc_inits(img, m0)))
        parts = [j.result() for j in jobs]
    joined, nbits = concat_bitstreams(parts)
    return _stuff(joined, nbits)


def entropy_encode(img, f, threads=1):
    """Full JPEG bytes for `img` using the file's own tables and segments."""
    return f.serialize(scan_data=encode_scan(img, f, threads=threads))


# ---------------------------------------------------------------------------
# runsize scan of a single block
# ---------------------------------------------------------------------------

KIND_NORMAL = "NORMAL"
KIND_EOB = "EOB"
KIND_ZRL = "ZRL"


@dataclass(frozen=True)
class RunsizeSymbol:
    """A JPEG AC symbol: `run` zeros followed by a `size`-bit coefficient."""

    run: int
    size: int

    def __post_init__(self):
        if not (0 <= self.run <= 15 and 0 <= self.size <= 15):
            raise RompError("runsize fields must be in 0..15")
        if self.size == 0 and self.run not in (0, 15):
            raise RompError("size 0 is only legal for EOB and ZRL")

    @property
    def kind(self):
        if (self.run, self.size) == (0, 0):
            return KIND_EOB
        if (self.run, self.size) == (15, 0):
            return KIND_ZRL
        return KIND_NORMAL

    @property
    def byte(self):
        return (self.run << 4) | self.size


EOB_SYMBOL = RunsizeSymbol(0, 0)
ZRL_SYMBOL = RunsizeSymbol(15, 0)


def amplitude_bits(value, size):
    """JPEG sign-magnitude amplitude pattern for a nonzero coefficient."""
    return value + (1 << size) - 1 if value < 0 else value


def amplitude_value(bits, size):
    """Inverse of amplitude_bits."""
    return bits - (1 << size) + 1 if bits < (1 << (size - 1)) else bits


def runsize_scan(block):
    """AC run-length pass over a 64-coefficient zigzag block.

    Returns [(RunsizeSymbol, amplitude bit pattern)]; EOB/ZRL carry
    amplitude 0. Trailing zeros collapse into one EOB; a block whose last
    nonzero sits at position 63 ends without EOB.
    """
    out = []
    last = 63
    while last >= 1 and block[last] == 0:
        last -= 1
    pos = 1
    while pos <= last:
        run = 0
        while block[pos + run] == 0:
            run += 1
        while run >= 16:
            out.append((ZRL_SYMBOL, 0))
            pos += 16
            run -= 16
        value = int(block[pos + run])
        size = abs(value).bit_length()
        if size > 15:
            raise CoefficientOutOfRange(f"|{value}| needs more than 15 amplitude bits")
        out.append((RunsizeSymbol(run, size), amplitude_bits(value, size)))
        pos += run + 1
    if last < 63:
        out.append((EOB_SYMBOL, 0))
    return out


def inverse_runsize_scan(pairs):
    """Rebuild the 63 AC coefficients from runsize_scan output."""
    block = np.zeros(64, dtype=np.int32)
    pos = 1
    for sym, amp in pairs:
        if sym.kind == KIND_EOB:
            pos = 64
            break
        if sym.kind == KIND_ZRL:
            pos += 16
            continue
        pos += sym.run
        if pos > 63:
            raise RompError("runsize sequence overruns the block")
        block[pos] = amplitude_value(amp, sym.size)
        pos += 1
    return block[1:]
