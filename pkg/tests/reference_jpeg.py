"""Independent baseline-JPEG coefficient decoder used as a test oracle.

Deliberately written from the standard's decoding procedures with its own
marker walk, tree-based Huffman decoding, and bit reader; shares no code
with the package under test. Slow and simple on purpose.
"""

import numpy as np


class RefError(Exception):
    pass


def _u16(b, i):
    return (b[i] << 8) | b[i + 1]


class _Bits:
    def __init__(self, data):
        self.data = data
        self.i = 0
        self.bit = 0

    def align(self):
        if self.bit:
            self.bit = 0
            self.i += 1

    def next_marker(self):
        self.align()
        if self.i + 1 >= len(self.data):
            raise RefError("truncated at marker")
        m = self.data[self.i:self.i + 2]
        self.i += 2
        return m

    def read_bit(self):
        if self.i >= len(self.data):
            raise RefError("out of data")
        byte = self.data[self.i]
        if byte == 0xFF:
            nxt = self.data[self.i + 1]
            if nxt != 0x00:
                raise RefError(f"marker 0x{nxt:02X} inside entropy data")
        b = (byte >> (7 - self.bit)) & 1
        self.bit += 1
        if self.bit == 8:
            self.bit = 0
            self.i += 1
            if self.i < len(self.data) and self.data[self.i - 1] == 0xFF:
                self.i += 1  # skip the stuffed zero
        return b

    def read(self, n):
        v = 0
        for _ in range(n):
            v = (v << 1) | self.read_bit()
        return v


class _Tree:
    def __init__(self, counts, values):
        self.root = {}
        code = 0
        k = 0
        for length in range(1, 17):
            for _ in range(counts[length - 1]):
                node = self.root
                for d in range(length - 1, -1, -1):
                    bit = (code >> d) & 1
                    if d == 0:
                        node[bit] = values[k]
                    else:
                        node = node.setdefault(bit, {})
                code += 1
                k += 1
            code <<= 1

    def decode(self, bits):
        node = self.root
        while True:
            node = node.get(bits.read_bit())
            if node is None:
                raise RefError("invalid Huffman code")
            if not isinstance(node, dict):
                return node


def _extend(v, t):
    return v - (1 << t) + 1 if t and v < (1 << (t - 1)) else v


def decode_coefficients(data):
    """Decode a baseline JPEG into per-component coefficient grids.

    Returns (per-component list of int arrays [blocks_high, blocks_wide, 64]
    in zigzag order, image width, image height).
    """
    if data[0:2] != b"\xff\xd8":
        raise RefError("no SOI")
    i = 2
    qt = {}
    huff = {}
    comps = []
    width = height = 0
    dri = 0
    scan_at = None
    scan_order = []
    while i < len(data):
        if data[i] != 0xFF:
            raise RefError("expected marker")
        marker = data[i + 1]
        i += 2
        if marker == 0xD9:
            break
        if marker == 0x01 or 0xD0 <= marker <= 0xD7:
            continue
        length = _u16(data, i)
        seg = data[i + 2:i + length]
        if marker == 0xC0:
            height, width = _u16(seg, 1), _u16(seg, 3)
            n = seg[5]
            comps = [dict(cid=seg[6 + 3 * j], h=seg[7 + 3 * j] >> 4,
                          v=seg[7 + 3 * j] & 15, tq=seg[8 + 3 * j])
                     for j in range(n)]
        elif marker in (0xC1, 0xC2, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB):
            raise RefError("not baseline")
        elif marker == 0xC4:
            p = 0
            while p < len(seg):
                tc, th = seg[p] >> 4, seg[p] & 15
                counts = seg[p + 1:p + 17]
                n = sum(counts)
                huff[(tc, th)] = _Tree(counts, seg[p + 17:p + 17 + n])
                p += 17 + n
        elif marker == 0xDB:
            p = 0
            while p < len(seg):
                pq, tq = seg[p] >> 4, seg[p] & 15
                if pq:
                    qt[tq] = [_u16(seg, p + 1 + 2 * j) for j in range(64)]
                    p += 129
                else:
                    qt[tq] = list(seg[p + 1:p + 65])
                    p += 65
        elif marker == 0xDD:
            dri = _u16(seg, 0)
        elif marker == 0xDA:
            ns = seg[0]
            by_id = {c["cid"]: c for c in comps}
            for j in range(ns):
                c = by_id[seg[1 + 2 * j]]
                c["td"] = seg[2 + 2 * j] >> 4
                c["ta"] = seg[2 + 2 * j] & 15
                scan_order.append(c)
            scan_at = i + length
            break
        i += length
    if scan_at is None:
        raise RefError("no scan")

    hmax = max(c["h"] for c in comps)
    vmax = max(c["v"] for c in comps)
    if len(scan_order) == 1:
        c = scan_order[0]
        cw = -(-width * c["h"] // hmax)
        ch = -(-height * c["v"] // vmax)
        bw, bh = -(-cw // 8), -(-ch // 8)
        mcud = [(c, 0, 0)]
        mcux, mcuy = bw, bh
        grids = {id(c): np.zeros((bh, bw, 64), dtype=np.int64)}
    else:
        mcux = -(-width // (8 * hmax))
        mcuy = -(-height // (8 * vmax))
        grids = {}
        mcud = []
        for c in scan_order:
            grids[id(c)] = np.zeros((mcuy * c["v"], mcux * c["h"], 64), dtype=np.int64)
            for sy in range(c["v"]):
                for sx in range(c["h"]):
                    mcud.append((c, sy, sx))

    bits = _Bits(data[scan_at:])
    preds = {id(c): 0 for c in comps}
    n_mcus = mcux * mcuy
    for m in range(n_mcus):
        if dri and m and m % dri == 0:
            marker = bits.next_marker()
            if not (marker[0] == 0xFF and 0xD0 <= marker[1] <= 0xD7):
                raise RefError("missing restart marker")
            preds = {id(c): 0 for c in comps}
        my, mx = divmod(m, mcux)
        for c, sy, sx in mcud:
            block = np.zeros(64, dtype=np.int64)
            t = huff[(0, c["td"])].decode(bits)
            diff = _extend(bits.read(t), t)
            preds[id(c)] += diff
            block[0] = preds[id(c)]
            k = 1
            while k <= 63:
                rs = huff[(1, c["ta"])].decode(bits)
                r, s = rs >> 4, rs & 15
                if s == 0:
                    if r == 15:
                        k += 16
                        continue
                    break
                k += r
                block[k] = _extend(bits.read(s), s)
                k += 1
            if len(scan_order) == 1:
                by, bx = divmod(m, mcux)
            else:
                by, bx = my * c["v"] + sy, mx * c["h"] + sx
            grids[id(c)][by, bx] = block
    return [grids[id(c)] for c in comps], width, height
