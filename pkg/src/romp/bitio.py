"""MSB-first bit sink/source used by the block-level reference coders.

The hot paths in _kernels.py carry their own inlined bit state; these classes
exist for the readable single-block operations and for tests that audit the
kernels bit for bit.
"""

from .errors import CorruptPayload


class BitSink:
    """Accumulates bits most-significant-first into a growing byte buffer."""

    def __init__(self):
        self._bytes = bytearray()
        self._acc = 0
        self._nacc = 0
        self.bit_length = 0

    def put(self, code, nbits):
        if nbits == 0:
            return
        self._acc = (self._acc << nbits) | (code & ((1 << nbits) - 1))
        self._nacc += nbits
        self.bit_length += nbits
        while self._nacc >= 8:
            self._nacc -= 8
            self._bytes.append((self._acc >> self._nacc) & 0xFF)
        self._acc &= (1 << self._nacc) - 1

    def getvalue(self, pad_bit=1):
        """Bytes written so far, final partial byte padded with pad_bit."""
        out = bytearray(self._bytes)
        if self._nacc:
            pad = (1 << (8 - self._nacc)) - 1 if pad_bit else 0
            out.append(((self._acc << (8 - self._nacc)) | pad) & 0xFF)
        return bytes(out)


class BitSource:
    """Reads bits most-significant-first from a byte string."""

    def __init__(self, data):
        self._data = data
        self._pos = 0
        self._acc = 0
        self._nacc = 0
        self.nbits = 8 * len(data)
        self.consumed = 0

    def read(self, nbits):
        if nbits == 0:
            return 0
        while self._nacc < nbits:
            if self._pos >= len(self._data):
                raise CorruptPayload("bit source exhausted")
            self._acc = (self._acc << 8) | self._data[self._pos]
            self._pos += 1
            self._nacc += 8
        self._nacc -= nbits
        self.consumed += nbits
        val = (self._acc >> self._nacc) & ((1 << nbits) - 1)
        self._acc &= (1 << self._nacc) - 1
        return val

    def read_bit(self):
        return self.read(1)
