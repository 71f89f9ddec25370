"""Canonical, length-limited prefix code construction.

Codes are built with deterministic tie-breaking so that identical histograms
always yield bit-identical tables (and therefore identical serialized sets).
"""

import heapq
from dataclasses import dataclass, field

import numpy as np

MAX_CODE_LENGTH = 24


def huffman_code_lengths(counts, max_length=MAX_CODE_LENGTH):
    """Code length per symbol for a Huffman code over `counts`.

    counts: {symbol ordinal: positive count}. Ties in merging are broken by
    (weight, symbol ordinal); merged nodes order after all leaves, in creation
    order. Lengths longer than `max_length` are rebalanced (JPEG K.2-style
    BITS adjustment), which preserves the Kraft inequality.
    """
    items = sorted((sym, c) for sym, c in counts.items() if c > 0)
    if not items:
        raise ValueError("cannot build a code over an empty histogram")
    if len(items) == 1:
        return {items[0][0]: 1}

    # heap entries: (weight, order, [symbols...])
    heap = [(c, sym, [sym]) for sym, c in items]
    heapq.heapify(heap)
    next_order = max(sym for sym, _ in items) + 1
    depth = {sym: 0 for sym, _ in items}
    while len(heap) > 1:
        w1, _, s1 = heapq.heappop(heap)
        w2, _, s2 = heapq.heappop(heap)
        for s in s1:
            depth[s] += 1
        for s in s2:
            depth[s] += 1
        heapq.heappush(heap, (w1 + w2, next_order, s1 + s2))
        next_order += 1

    if max(depth.values()) > max_length:
        depth = _limit_lengths(depth, max_length)
    return depth


def _limit_lengths(lengths, max_length):
    """Rebalance a length assignment so no code exceeds max_length."""
    maxlen = max(lengths.values())
    bits = [0] * (maxlen + 1)
    for l in lengths.values():
        bits[l] += 1
    i = maxlen
    while i > max_length:
        while bits[i] > 0:
            j = i - 2
            while bits[j] == 0:
                j -= 1
            # move a pair up one level, pulling one shorter code down
            bits[i] -= 2
            bits[i - 1] += 1
            bits[j + 1] += 2
            bits[j] -= 1
        i -= 1
    new_lengths = []
    for l in range(1, max_length + 1):
        new_lengths.extend([l] * bits[l])
    order = sorted(lengths, key=lambda s: (lengths[s], s))
    assert len(order) == len(new_lengths)
    return dict(zip(order, sorted(new_lengths)))


def canonical_codes(lengths):
    """Assign canonical codes: symbols sorted by (length, ordinal).

    Returns {symbol: (code, length)}.
    """
    code = 0
    prev_len = 0
    out = {}
    for sym in sorted(lengths, key=lambda s: (lengths[s], s)):
        length = lengths[sym]
        code <<= length - prev_len
        if code >> length:
            raise ValueError("code space overflow (Kraft inequality violated)")
        out[sym] = (code, length)
        code += 1
        prev_len = length
    return out


def kraft_sum(lengths):
    """Sum of 2**-length; must be <= 1 for a decodable prefix code."""
    return sum(2.0 ** -l for l in lengths)


@dataclass(frozen=True)
class PrefixTable:
    """A canonical prefix code: symbols and lengths in canonical order."""

    symbols: tuple    # symbol ordinals, sorted by (length, ordinal)
    lengths: tuple    # code length per symbol, same order

    @classmethod
    def from_counts(cls, counts, max_length=MAX_CODE_LENGTH):
        lengths = huffman_code_lengths(counts, max_length)
        order = sorted(lengths, key=lambda s: (lengths[s], s))
        return cls(tuple(order), tuple(lengths[s] for s in order))

    @classmethod
    def from_lengths(cls, lengths):
        order = sorted(lengths, key=lambda s: (lengths[s], s))
        return cls(tuple(order), tuple(lengths[s] for s in order))

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("empty prefix table")
        if kraft_sum(self.lengths) > 1.0 + 1e-12:
            raise ValueError("prefix table violates the Kraft inequality")

    def codes(self):
        """{symbol: (code, length)}"""
        return canonical_codes(dict(zip(self.symbols, self.lengths)))

    def encode_arrays(self, n_symbols):
        code_arr = np.zeros(n_symbols, dtype=np.uint32)
        len_arr = np.zeros(n_symbols, dtype=np.uint8)
        for sym, (code, length) in self.codes().items():
            code_arr[sym] = code
            len_arr[sym] = length
        return code_arr, len_arr

    def decode_arrays(self):
        """Annex-F style per-length (mincode, maxcode, valptr) arrays.

        maxcode is -1 for lengths with no codes. Symbols are indexed in
        canonical order (self.symbols).
        """
        mincode = np.zeros(MAX_CODE_LENGTH + 1, dtype=np.int32)
        maxcode = np.full(MAX_CODE_LENGTH + 1, -1, dtype=np.int32)
        valptr = np.zeros(MAX_CODE_LENGTH + 1, dtype=np.int32)
        code = 0
        k = 0
        for length in range(1, MAX_CODE_LENGTH + 1):
            first = k
            while k < len(self.lengths) and self.lengths[k] == length:
                k += 1
            if k > first:
                valptr[length] = first
                mincode[length] = code
                maxcode[length] = code + (k - first) - 1
                code += k - first
            code <<= 1
        return mincode, maxcode, valptr
