"""JPEG constants: zigzag order and the Annex K default Huffman tables.

Tables are stored in DHT form: 16 per-length code counts followed by the
symbol values in canonical order. Helpers expand them to per-symbol
(code, length) maps and flat lookup arrays used by the kernels.
"""

import numpy as np

# Zigzag index -> raster index within an 8x8 block.
ZIGZAG = np.array([
     0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63], dtype=np.int32)

EOB = 0x00
ZRL = 0xF0

# Annex K.3 default tables as (bits, values): bits[i] = number of codes of
# length i+1.
DC_LUMA = (
    bytes([0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0]),
    bytes([0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11]),
)
DC_CHROMA = (
    bytes([0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0]),
    bytes([0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11]),
)
AC_LUMA = (
    bytes([0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 125]),
    bytes([
          1,   2,   3,   0,   4,  17,   5,  18,  33,  49,  65,   6,  19,  81,  97,   7,  34, 113,
         20,  50, 129, 145, 161,   8,  35,  66, 177, 193,  21,  82, 209, 240,  36,  51,  98, 114,
        130,   9,  10,  22,  23,  24,  25,  26,  37,  38,  39,  40,  41,  42,  52,  53,  54,  55,
         56,  57,  58,  67,  68,  69,  70,  71,  72,  73,  74,  83,  84,  85,  86,  87,  88,  89,
         90,  99, 100, 101, 102, 103, 104, 105, 106, 115, 116, 117, 118, 119, 120, 121, 122, 131,
        132, 133, 134, 135, 136, 137, 138, 146, 147, 148, 149, 150, 151, 152, 153, 154, 162, 163,
        164, 165, 166, 167, 168, 169, 170, 178, 179, 180, 181, 182, 183, 184, 185, 186, 194, 195,
        196, 197, 198, 199, 200, 201, 202, 210, 211, 212, 213, 214, 215, 216, 217, 218, 225, 226,
        227, 228, 229, 230, 231, 232, 233, 234, 241, 242, 243, 244, 245, 246, 247, 248, 249, 250]),
)
AC_CHROMA = (
    bytes([0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 119]),
    bytes([
          0,   1,   2,   3,  17,   4,   5,  33,  49,   6,  18,  65,  81,   7,  97, 113,  19,  34,
         50, 129,   8,  20,  66, 145, 161, 177, 193,   9,  35,  51,  82, 240,  21,  98, 114, 209,
         10,  22,  36,  52, 225,  37, 241,  23,  24,  25,  26,  38,  39,  40,  41,  42,  53,  54,
         55,  56,  57,  58,  67,  68,  69,  70,  71,  72,  73,  74,  83,  84,  85,  86,  87,  88,
         89,  90,  99, 100, 101, 102, 103, 104, 105, 106, 115, 116, 117, 118, 119, 120, 121, 122,
        130, 131, 132, 133, 134, 135, 136, 137, 138, 146, 147, 148, 149, 150, 151, 152, 153, 154,
        162, 163, 164, 165, 166, 167, 168, 169, 170, 178, 179, 180, 181, 182, 183, 184, 185, 186,
        194, 195, 196, 197, 198, 199, 200, 201, 202, 210, 211, 212, 213, 214, 215, 216, 217, 218,
        226, 227, 228, 229, 230, 231, 232, 233, 234, 242, 243, 244, 245, 246, 247, 248, 249, 250]),
)


def expand_dht(bits, values):
    """Expand DHT (bits, values) into {symbol: (code, length)} canonically."""
    codes = {}
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(bits[length - 1]):
            codes[values[k]] = (code, length)
            code += 1
            k += 1
        code <<= 1
    return codes


def encode_arrays(bits, values, n_symbols=256):
    """Per-symbol (code, length) flat arrays; length 0 marks absent symbols."""
    code_arr = np.zeros(n_symbols, dtype=np.uint32)
    len_arr = np.zeros(n_symbols, dtype=np.uint8)
    for sym, (code, length) in expand_dht(bits, values).items():
        code_arr[sym] = code
        len_arr[sym] = length
    return code_arr, len_arr


def decode_lut(bits, values):
    """16-bit-peek lookup tables (symbol, code length) for scan decoding.

    Entry i holds the symbol whose code is a prefix of the 16-bit pattern i.
    Length 0 marks an invalid pattern.
    """
    lut_sym = np.zeros(1 << 16, dtype=np.int16)
    lut_len = np.zeros(1 << 16, dtype=np.uint8)
    for sym, (code, length) in expand_dht(bits, values).items():
        lo = code << (16 - length)
        hi = lo + (1 << (16 - length))
        lut_sym[lo:hi] = sym
        lut_len[lo:hi] = length
    return lut_sym, lut_len


def default_ac_lengths(chroma=False):
    """Code length per runsize symbol under the Annex K AC table (0 = absent)."""
    bits, values = AC_CHROMA if chroma else AC_LUMA
    _, lengths = encode_arrays(bits, values)
    return lengths
