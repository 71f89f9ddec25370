"""numba kernels for the bit-level hot paths.

All entropy coding loops live here: JPEG scan decode/encode, context-coded
segment encode/decode, and the per-block thresholding pass. Everything is
plain int64/float64 register code over flat numpy arrays so the kernels
compile once (disk cache) and release the GIL for segment-level threading.

Error returns are negative status codes; wrappers in jpeg_io/codec map them
onto the package exceptions:
  -1 invalid Huffman code        -2 bitstream truncated
  -3 invalid symbol              -4 coefficient position overflow
  -5 symbol missing from table   -6 amplitude out of range
"""

import numpy as np
from numba import njit

JIT = dict(cache=True, nogil=True)


# ---------------------------------------------------------------------------
# bit primitives
# ---------------------------------------------------------------------------

@njit(inline="always")
def _bitlen(v):
    if v < 0:
        v = -v
    n = 0
    while v:
        v >>= 1
        n += 1
    return n


@njit(inline="always")
def _amp_bits(v, s):
    # JPEG amplitude: negative values are stored as v + 2**s - 1
    if v < 0:
        return v + (1 << s) - 1
    return v


@njit(inline="always")
def _extend(amp, s):
    if amp < (1 << (s - 1)):
        return amp - (1 << s) + 1
    return amp


@njit(inline="always")
def _wput(buf, bpos, acc, nacc, code, nbits):
    acc = (acc << nbits) | (code & ((np.int64(1) << nbits) - 1))
    nacc += nbits
    while nacc >= 8:
        nacc -= 8
        buf[bpos] = (acc >> nacc) & 0xFF
        bpos += 1
    acc &= (np.int64(1) << nacc) - 1
    return bpos, acc, nacc


@njit(inline="always")
def _wfinish(buf, bpos, acc, nacc):
    # flush the partial byte, padding with 1-bits; returns (bytes, exact bits)
    nbits = bpos * 8 + nacc
    if nacc > 0:
        pad = 8 - nacc
        buf[bpos] = ((acc << pad) | ((1 << pad) - 1)) & 0xFF
        bpos += 1
    return bpos, nbits


@njit(inline="always")
def _rfill(data, dpos, acc, nacc, need):
    # virtual 0xFF bytes past the end keep peeks legal; the caller checks
    # afterwards that no virtual bit was actually consumed
    while nacc < need:
        if dpos < data.shape[0]:
            acc = (acc << 8) | data[dpos]
        else:
            acc = (acc << 8) | 0xFF
        dpos += 1
        nacc += 8
    return dpos, acc, nacc


@njit(inline="always")
def _rbits(data, dpos, acc, nacc, n):
    dpos, acc, nacc = _rfill(data, dpos, acc, nacc, n)
    nacc -= n
    val = (acc >> nacc) & ((np.int64(1) << n) - 1)
    acc &= (np.int64(1) << nacc) - 1
    return dpos, acc, nacc, val


@njit(inline="always")
def _bucket(v, bounds):
    lo = 0
    hi = bounds.shape[0]
    while lo < hi:
        mid = (lo + hi) >> 1
        if bounds[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# JPEG scan coding (one restart run at a time; `data` is destuffed)
# ---------------------------------------------------------------------------

@njit(**JIT)
def jpeg_decode_run(data, coefs, start_blk, n_mcus, comp_of_slot, ncomp,
                    lut_sym, lut_len, comp_dc_t, comp_ac_t):
    """Decode n_mcus MCUs from a destuffed restart run into coefs[start_blk:].

    lut_sym/lut_len: stacked 16-bit-peek tables, indexed by comp_dc_t /
    comp_ac_t. DC predictors start at zero (restart semantics). Returns 0 or
    a negative status.
    """
    bpm = comp_of_slot.shape[0]
    dcpred = np.zeros(ncomp, dtype=np.int64)
    dpos = np.int64(0)
    acc = np.int64(0)
    nacc = np.int64(0)
    blk = start_blk
    for _m in range(n_mcus):
        for slot in range(bpm):
            c = comp_of_slot[slot]
            # DC
            t = comp_dc_t[c]
            dpos, acc, nacc = _rfill(data, dpos, acc, nacc, 16)
            idx = (acc >> (nacc - 16)) & 0xFFFF
            L = lut_len[t, idx]
            if L == 0:
                return -1
            s = lut_sym[t, idx]
            nacc -= L
            acc &= (np.int64(1) << nacc) - 1
            if s > 15:
                return -3
            if s > 0:
                dpos, acc, nacc, amp = _rbits(data, dpos, acc, nacc, s)
                dcpred[c] += _extend(amp, s)
            coefs[blk, 0] = dcpred[c]
            # AC
            t = comp_ac_t[c]
            pos = 1
            while pos <= 63:
                dpos, acc, nacc = _rfill(data, dpos, acc, nacc, 16)
                idx = (acc >> (nacc - 16)) & 0xFFFF
                L = lut_len[t, idx]
                if L == 0:
                    return -1
                sym = lut_sym[t, idx]
                nacc -= L
                acc &= (np.int64(1) << nacc) - 1
                run = sym >> 4
                size = sym & 15
                if size == 0:
                    if run == 15:
                        pos += 16
                        if pos > 63:
                            return -4
                        continue
                    if run != 0:
                        return -3
                    break  # EOB
                pos += run
                if pos > 63:
                    return -4
                dpos, acc, nacc, amp = _rbits(data, dpos, acc, nacc, size)
                coefs[blk, pos] = _extend(amp, size)
                pos += 1
            blk += 1
    consumed = dpos * 8 - nacc
    if consumed > data.shape[0] * 8:
        return -2
    return 0


@njit(**JIT)
def jpeg_encode_run(coefs, start_blk, n_mcus, comp_of_slot, ncomp,
                    enc_code, enc_len, comp_dc_t, comp_ac_t, dc_init, out):
    """Encode n_mcus MCUs to `out` (unstuffed, final byte 1-padded).

    enc_code/enc_len: stacked per-symbol (code, length) arrays; length 0
    means the symbol has no code in that table. Returns exact bit count or a
    negative status.
    """
    bpm = comp_of_slot.shape[0]
    dcpred = np.empty(ncomp, dtype=np.int64)
    for c in range(ncomp):
        dcpred[c] = dc_init[c]
    bpos = np.int64(0)
    acc = np.int64(0)
    nacc = np.int64(0)
    blk = start_blk
    for _m in range(n_mcus):
        for slot in range(bpm):
            c = comp_of_slot[slot]
            t = comp_dc_t[c]
            v = coefs[blk, 0]
            diff = v - dcpred[c]
            dcpred[c] = v
            s = _bitlen(diff)
            if s > 15:
                return -6
            L = enc_len[t, s]
            if L == 0:
                return -5
            bpos, acc, nacc = _wput(out, bpos, acc, nacc, np.int64(enc_code[t, s]), L)
            if s > 0:
                bpos, acc, nacc = _wput(out, bpos, acc, nacc, _amp_bits(diff, s), s)
            t = comp_ac_t[c]
            last = 63
            while last >= 1 and coefs[blk, last] == 0:
                last -= 1
            pos = 1
            while pos <= last:
                run = 0
                while coefs[blk, pos + run] == 0:
                    run += 1
                while run >= 16:
                    L = enc_len[t, 0xF0]
                    if L == 0:
                        return -5
                    bpos, acc, nacc = _wput(out, bpos, acc, nacc, np.int64(enc_code[t, 0xF0]), L)
                    pos += 16
                    run -= 16
                cval = coefs[blk, pos + run]
                s = _bitlen(cval)
                if s > 15:
                    return -6
                sym = (run << 4) | s
                L = enc_len[t, sym]
                if L == 0:
                    return -5
                bpos, acc, nacc = _wput(out, bpos, acc, nacc, np.int64(enc_code[t, sym]), L)
                bpos, acc, nacc = _wput(out, bpos, acc, nacc, _amp_bits(cval, s), s)
                pos += run + 1
            if last < 63:
                L = enc_len[t, 0]
                if L == 0:
                    return -5
                bpos, acc, nacc = _wput(out, bpos, acc, nacc, np.int64(enc_code[t, 0]), L)
            blk += 1
    bpos, nbits = _wfinish(out, bpos, acc, nacc)
    return nbits


# ---------------------------------------------------------------------------
# context-coded segments
# ---------------------------------------------------------------------------

@njit(inline="always")
def _inter_from_history(hist_c, hcount, B, F, pos):
    hi = pos + F - 1
    if hi > 63:
        hi = 63
    nb = hcount if hcount < B else B
    total = 0.0
    for k in range(nb):
        row = hist_c[(hcount - nb + k) % B]
        total += row[hi] - row[pos - 1]
    return total / (B * F)


@njit(inline="always")
def _push_history(hist_c, hcount, B, coefs, blk, inv_max, K):
    row = hist_c[hcount % B]
    acc = 0.0
    row[0] = 0.0
    for j in range(1, 64):
        v = coefs[blk, j]
        if v != 0:
            r = _bitlen(v) * inv_max[K, j]
            if r > 1.0:
                r = 1.0
            acc += r
        row[j] = acc


@njit(inline="always")
def _cdecode(data, dpos, acc, nacc, dec_min, dec_max, dec_val, dec_sym, dec_base, t):
    # canonical prefix decode, codes capped at 24 bits
    dpos, acc, nacc = _rfill(data, dpos, acc, nacc, 24)
    window = (acc >> (nacc - 24)) & 0xFFFFFF
    code = np.int64(0)
    for l in range(1, 25):
        code = (code << 1) | ((window >> (24 - l)) & 1)
        if code <= dec_max[t, l]:
            sym = dec_sym[dec_base[t] + dec_val[t, l] + (code - dec_min[t, l])]
            nacc -= l
            acc &= (np.int64(1) << nacc) - 1
            return dpos, acc, nacc, np.int64(sym)
    return dpos, acc, nacc, np.int64(-1)


@njit(**JIT)
def romp_encode_segment(coefs, blk_comp, comp_class, blk_start, blk_end,
                        ctx_tid, dc_tid, enc_code, enc_len,
                        inv_max, intra_bounds, inter_bounds, U, F, B,
                        out, trace_ctx, trace_energy):
    """Context-code blocks [blk_start, blk_end) into `out`.

    History (DC prediction and inter-block energy) starts empty: the first B
    blocks of a segment see zero inter energy. When trace arrays are
    non-empty, every AC symbol's context index and raw (intra, inter)
    energies are recorded. Returns exact bit count or a negative status.
    """
    ncomp = comp_class.shape[0]
    dcpred = np.zeros(ncomp, dtype=np.int64)
    hist = np.zeros((ncomp, B, 64), dtype=np.float64)
    hcount = np.zeros(ncomp, dtype=np.int64)
    bpos = np.int64(0)
    acc = np.int64(0)
    nacc = np.int64(0)
    tix = 0
    do_trace = trace_ctx.shape[0] > 0
    for blk in range(blk_start, blk_end):
        c = blk_comp[blk]
        K = comp_class[c]
        # DC difference against the previous block of this component
        t = dc_tid[K]
        v = coefs[blk, 0]
        diff = v - dcpred[c]
        dcpred[c] = v
        s = _bitlen(diff)
        if s > 15:
            return -6
        L = enc_len[t, s]
        if L > 0:
            bpos, acc, nacc = _wput(out, bpos, acc, nacc, np.int64(enc_code[t, s]), L)
        else:
            bpos, acc, nacc = _wput(out, bpos, acc, nacc, np.int64(enc_code[t, 256]), enc_len[t, 256])
            bpos, acc, nacc = _wput(out, bpos, acc, nacc, np.int64(s), 8)
        if s > 0:
            bpos, acc, nacc = _wput(out, bpos, acc, nacc, _amp_bits(diff, s), s)
        # AC symbols under <p, i, e> context tables
        last = 63
        while last >= 1 and coefs[blk, last] == 0:
            last -= 1
        pos = 1
        intra_sum = 0.0
        while pos <= 63:
            if pos == 1:
                iv = 0.0
            else:
                iv = intra_sum / (pos - 1)
            ev = _inter_from_history(hist[c], hcount[c], B, F, pos)
            ib = _bucket(iv, intra_bounds[K])
            eb = _bucket(ev, inter_bounds[K])
            ctx = ((pos - 1) * U + ib) * U + eb
            t = ctx_tid[K, ctx]
            if pos > last:
                sym = 0  # EOB
            else:
                run = 0
                while coefs[blk, pos + run] == 0:
                    run += 1
                if run >= 16:
                    sym = 0xF0
                else:
                    cval = coefs[blk, pos + run]
                    s = _bitlen(cval)
                    if s > 15:
                        return -6
                    sym = (run << 4) | s
            if do_trace:
                trace_ctx[tix] = ctx
                trace_energy[tix, 0] = iv
                trace_energy[tix, 1] = ev
                tix += 1
            L = enc_len[t, sym]
            if L > 0:
                bpos, acc, nacc = _wput(out, bpos, acc, nacc, np.int64(enc_code[t, sym]), L)
            else:
                bpos, acc, nacc = _wput(out, bpos, acc, nacc, np.int64(enc_code[t, 256]), enc_len[t, 256])
                bpos, acc, nacc = _wput(out, bpos, acc, nacc, np.int64(sym), 8)
            if sym == 0:
                break
            if sym == 0xF0:
                pos += 16
                continue
            size = sym & 15
            cpos = pos + (sym >> 4)
            bpos, acc, nacc = _wput(out, bpos, acc, nacc, _amp_bits(coefs[blk, cpos], size), size)
            r = size * inv_max[K, cpos]
            if r > 1.0:
                r = 1.0
            intra_sum += r
            pos = cpos + 1
        _push_history(hist[c], hcount[c], B, coefs, blk, inv_max, K)
        hcount[c] += 1
    bpos, nbits = _wfinish(out, bpos, acc, nacc)
    if do_trace:
        trace_ctx[tix] = -1  # terminator for tests
    return nbits


@njit(**JIT)
def romp_decode_segment(data, coefs, blk_comp, comp_class, blk_start, blk_end,
                        ctx_tid, dc_tid,
                        dec_min, dec_max, dec_val, dec_sym, dec_base,
                        inv_max, intra_bounds, inter_bounds, U, F, B):
    """Inverse of romp_encode_segment; coefs rows must be pre-zeroed."""
    ncomp = comp_class.shape[0]
    dcpred = np.zeros(ncomp, dtype=np.int64)
    hist = np.zeros((ncomp, B, 64), dtype=np.float64)
    hcount = np.zeros(ncomp, dtype=np.int64)
    dpos = np.int64(0)
    acc = np.int64(0)
    nacc = np.int64(0)
    for blk in range(blk_start, blk_end):
        c = blk_comp[blk]
        K = comp_class[c]
        t = dc_tid[K]
        dpos, acc, nacc, sym = _cdecode(data, dpos, acc, nacc,
                                        dec_min, dec_max, dec_val, dec_sym, dec_base, t)
        if sym < 0:
            return -1
        if sym == 256:
            dpos, acc, nacc, sym = _rbits(data, dpos, acc, nacc, 8)
        if sym > 15:
            return -3
        s = sym
        if s > 0:
            dpos, acc, nacc, amp = _rbits(data, dpos, acc, nacc, s)
            dcpred[c] += _extend(amp, s)
        coefs[blk, 0] = dcpred[c]
        pos = 1
        intra_sum = 0.0
        while pos <= 63:
            if pos == 1:
                iv = 0.0
            else:
                iv = intra_sum / (pos - 1)
            ev = _inter_from_history(hist[c], hcount[c], B, F, pos)
            ib = _bucket(iv, intra_bounds[K])
            eb = _bucket(ev, inter_bounds[K])
            ctx = ((pos - 1) * U + ib) * U + eb
            t = ctx_tid[K, ctx]
            dpos, acc, nacc, sym = _cdecode(data, dpos, acc, nacc,
                                            dec_min, dec_max, dec_val, dec_sym, dec_base, t)
            if sym < 0:
                return -1
            if sym == 256:
                dpos, acc, nacc, sym = _rbits(data, dpos, acc, nacc, 8)
            if sym == 0:
                break  # EOB
            if sym == 0xF0:
                pos += 16
                if pos > 63:
                    return -4
                continue
            run = sym >> 4
            size = sym & 15
            pos += run
            if pos > 63:
                return -4
            dpos, acc, nacc, amp = _rbits(data, dpos, acc, nacc, size)
            coefs[blk, pos] = _extend(amp, size)
            r = size * inv_max[K, pos]
            if r > 1.0:
                r = 1.0
            intra_sum += r
            pos += 1
        _push_history(hist[c], hcount[c], B, coefs, blk, inv_max, K)
        hcount[c] += 1
    consumed = dpos * 8 - nacc
    if consumed > data.shape[0] * 8:
        return -2
    return 0


# ---------------------------------------------------------------------------
# training passes
# ---------------------------------------------------------------------------

@njit(**JIT)
def size_maxima(coefs, blk_comp, comp_class, out):
    """Max SIZE per (class, zigzag position) over all blocks -> out uint8[2,64]."""
    for blk in range(coefs.shape[0]):
        K = comp_class[blk_comp[blk]]
        for j in range(64):
            v = coefs[blk, j]
            if v != 0:
                s = _bitlen(v)
                if s > out[K, j]:
                    out[K, j] = s
    return 0


@njit(**JIT)
def count_ac_symbols(coefs):
    """Total runsize symbols (EOB/ZRL included) emitted over all blocks."""
    total = np.int64(0)
    for blk in range(coefs.shape[0]):
        last = 63
        while last >= 1 and coefs[blk, last] == 0:
            last -= 1
        pos = 1
        while pos <= last:
            run = 0
            while coefs[blk, pos + run] == 0:
                run += 1
            total += run >> 4          # ZRLs
            total += 1
            pos += run + 1
        if last < 63:
            total += 1                 # EOB
    return total


@njit(**JIT)
def train_energy_pass(coefs, blk_comp, comp_class, inv_max, F, B,
                      out_class, out_intra, out_inter):
    """Record raw (intra, inter) energies for every AC symbol occurrence.

    Whole-image history (training is single-segment). Returns the number of
    samples written.
    """
    ncomp = comp_class.shape[0]
    hist = np.zeros((ncomp, B, 64), dtype=np.float64)
    hcount = np.zeros(ncomp, dtype=np.int64)
    n = 0
    for blk in range(coefs.shape[0]):
        c = blk_comp[blk]
        K = comp_class[c]
        last = 63
        while last >= 1 and coefs[blk, last] == 0:
            last -= 1
        pos = 1
        intra_sum = 0.0
        while pos <= 63:
            if pos == 1:
                iv = 0.0
            else:
                iv = intra_sum / (pos - 1)
            ev = _inter_from_history(hist[c], hcount[c], B, F, pos)
            out_class[n] = K
            out_intra[n] = iv
            out_inter[n] = ev
            n += 1
            if pos > last:
                break
            run = 0
            while coefs[blk, pos + run] == 0:
                run += 1
            if run >= 16:
                pos += 16
                continue
            cpos = pos + run
            s = _bitlen(coefs[blk, cpos])
            r = s * inv_max[K, cpos]
            if r > 1.0:
                r = 1.0
            intra_sum += r
            pos = cpos + 1
        _push_history(hist[c], hcount[c], B, coefs, blk, inv_max, K)
        hcount[c] += 1
    return n


@njit(**JIT)
def train_count_pass(coefs, blk_comp, comp_class, inv_max,
                     intra_bounds, inter_bounds, U, F, B,
                     ac_counts, dc_counts):
    """Count runsizes per context and DC size categories per class.

    Context computation is identical to the encoder's (same helpers, same
    float path), so trained tables key exactly like encode-time contexts.
    """
    ncomp = comp_class.shape[0]
    dcpred = np.zeros(ncomp, dtype=np.int64)
    hist = np.zeros((ncomp, B, 64), dtype=np.float64)
    hcount = np.zeros(ncomp, dtype=np.int64)
    for blk in range(coefs.shape[0]):
        c = blk_comp[blk]
        K = comp_class[c]
        diff = coefs[blk, 0] - dcpred[c]
        dcpred[c] = coefs[blk, 0]
        s = _bitlen(diff)
        if s > 15:
            return -6
        dc_counts[K, s] += 1
        last = 63
        while last >= 1 and coefs[blk, last] == 0:
            last -= 1
        pos = 1
        intra_sum = 0.0
        while pos <= 63:
            if pos == 1:
                iv = 0.0
            else:
                iv = intra_sum / (pos - 1)
            ev = _inter_from_history(hist[c], hcount[c], B, F, pos)
            ib = _bucket(iv, intra_bounds[K])
            eb = _bucket(ev, inter_bounds[K])
            ctx = ((pos - 1) * U + ib) * U + eb
            if pos > last:
                ac_counts[K, ctx, 0] += 1
                break
            run = 0
            while coefs[blk, pos + run] == 0:
                run += 1
            if run >= 16:
                ac_counts[K, ctx, 0xF0] += 1
                pos += 16
                continue
            cpos = pos + run
            s = _bitlen(coefs[blk, cpos])
            if s > 15:
                return -6
            ac_counts[K, ctx, (run << 4) | s] += 1
            r = s * inv_max[K, cpos]
            if r > 1.0:
                r = 1.0
            intra_sum += r
            pos = cpos + 1
        _push_history(hist[c], hcount[c], B, coefs, blk, inv_max, K)
        hcount[c] += 1
    return 0


# ---------------------------------------------------------------------------
# thresholding pass
# ---------------------------------------------------------------------------

@njit(inline="always")
def _local_bits_saved(coefs, blk, pos, lens):
    """Bits saved by zeroing the size-1 coefficient at `pos` (zigzag), under
    the fixed per-symbol code length table `lens`. Returns (saved, merged
    symbol, extra ZRLs needed flag) with saved < 0 when not computable."""
    prev = pos - 1
    while prev >= 1 and coefs[blk, prev] == 0:
        prev -= 1
    r1 = pos - prev - 1
    z1 = r1 >> 4
    k1 = r1 & 15
    len_zrl = lens[0xF0]
    len_eob = lens[0x00]
    self_sym = (k1 << 4) | 1
    if lens[self_sym] == 0:
        return -1.0, -1, 0
    nxt = pos + 1
    while nxt <= 63 and coefs[blk, nxt] == 0:
        nxt += 1
    if nxt > 63:
        # tail collapses to a single EOB
        old = z1 * len_zrl + lens[self_sym] + 1
        if pos < 63:
            old += len_eob
        saved = old - float(len_eob)
        return saved, 0, 0
    s2 = _bitlen(coefs[blk, nxt])
    r2 = nxt - pos - 1
    z2 = r2 >> 4
    k2 = r2 & 15
    old_sym = (k2 << 4) | s2
    rm = r1 + 1 + r2
    zm = rm >> 4
    km = rm & 15
    new_sym = (km << 4) | s2
    if lens[old_sym] == 0 or lens[new_sym] == 0:
        return -1.0, -1, 0
    if (z1 + z2 + zm) > 0 and len_zrl == 0:
        return -1.0, -1, 0
    old = z1 * len_zrl + lens[self_sym] + 1 + z2 * len_zrl + lens[old_sym]
    new = zm * len_zrl + lens[new_sym]
    needs_new_zrl = 1 if (zm > 0 and z1 == 0 and z2 == 0) else 0
    return old - float(new), new_sym, needs_new_zrl


@njit(**JIT)
def threshold_image(coefs, blk_comp, comp_class, rate_threshold, perceptual,
                    def_len, file_len, qstep2,
                    rep_candidates, rep_zeroed, rep_bits):
    """Zero eligible size-1 AC coefficients block by block, in place.

    Eligibility: bits saved (under def_len, the class's default-table
    lengths) strictly above rate_threshold, the resulting symbols still
    representable under the file's own AC table (file_len, per component),
    and two caps: at most floor(perceptual * nonzero_count) removals and
    cumulative removed dequantized energy at most perceptual * the block's
    total AC energy (this second cap is what makes the block SSIM floor
    1 - Tp/(2-Tp) hold for arbitrary quantization tables).
    """
    nb = coefs.shape[0]
    cand_pos = np.empty(63, dtype=np.int64)
    cand_key = np.empty(63, dtype=np.int64)
    cand_saved = np.empty(63, dtype=np.float64)
    rm_pos = np.empty(63, dtype=np.int64)
    rm_val = np.empty(63, dtype=np.int64)
    for blk in range(nb):
        c = blk_comp[blk]
        K = comp_class[c]
        m = 0
        total_energy = 0.0
        for j in range(1, 64):
            v = coefs[blk, j]
            if v != 0:
                m += 1
                total_energy += (v * v) * qstep2[c, j]
        if m == 0:
            continue
        cap = int(perceptual * m + 1e-9)
        budget = perceptual * total_energy
        ncand = 0
        considered = 0
        for j in range(1, 64):
            v = coefs[blk, j]
            if v != 1 and v != -1:
                continue
            considered += 1
            saved, new_sym, needs_zrl = _local_bits_saved(coefs, blk, j, def_len[K])
            if saved <= rate_threshold:
                continue
            # representability under the file's own table
            if new_sym == 0:
                if j == 63 and file_len[c, 0] == 0:
                    continue
            else:
                if file_len[c, new_sym] == 0:
                    continue
                if needs_zrl == 1 and file_len[c, 0xF0] == 0:
                    continue
            cand_pos[ncand] = j
            cand_saved[ncand] = saved
            # integer-valued key: (saved desc, position desc)
            cand_key[ncand] = np.int64(saved) * 64 + j
            ncand += 1
        rep_candidates[blk] = considered
        if ncand == 0 or cap == 0:
            continue
        order = np.argsort(cand_key[:ncand])
        removed = 0
        e_removed = 0.0
        bits_est = 0.0
        for oi in range(ncand - 1, -1, -1):
            if removed >= cap:
                break
            idx = order[oi]
            j = cand_pos[idx]
            e = qstep2[c, j]
            if e_removed + e > budget:
                continue
            rm_pos[removed] = j
            rm_val[removed] = coefs[blk, j]
            coefs[blk, j] = 0
            e_removed += e
            removed += 1
            bits_est += cand_saved[idx]
        if removed > 0:
            # combined removals can merge runs into symbols the per-candidate
            # check never saw; validate the whole block against the file's
            # table and revert if anything became unrepresentable
            ok = True
            last = 63
            while last >= 1 and coefs[blk, last] == 0:
                last -= 1
            pos = 1
            while pos <= last:
                run = 0
                while coefs[blk, pos + run] == 0:
                    run += 1
                if run >= 16:
                    if file_len[c, 0xF0] == 0:
                        ok = False
                        break
                    pos += 16
                    continue
                s = _bitlen(coefs[blk, pos + run])
                if s > 15 or file_len[c, (run << 4) | s] == 0:
                    ok = False
                    break
                pos += run + 1
            if ok and last < 63 and file_len[c, 0x00] == 0:
                ok = False
            if not ok:
                for k in range(removed):
                    coefs[blk, rm_pos[k]] = rm_val[k]
                removed = 0
                bits_est = 0.0
        rep_zeroed[blk] = removed
        rep_bits[blk] = bits_est
    return 0
