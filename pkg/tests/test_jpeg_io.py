import numpy as np
import pytest

import reference_jpeg
from conftest import make_jpeg, random_sparse_block
from romp import jpeg_io
from romp.bitio import BitSink
from romp.errors import MalformedStream, UnsupportedMode
from romp.jpeg_io import (EOB_SYMBOL, ZRL_SYMBOL, RunsizeSymbol,
                          concat_bitstreams, inverse_runsize_scan, parse_jpeg,
                          runsize_scan)


class TestParse:
    def test_minimal_grayscale_single_block(self):
        data = make_jpeg(np.full((8, 8), 129, dtype=np.uint8), quality=90)
        f = parse_jpeg(data)
        assert f.n_components == 1
        assert (f.width, f.height) == (8, 8)
        mcus, pattern, dims = f.geometry()
        assert mcus == 1 and list(pattern) == [0] and dims == [(1, 1)]
        img = jpeg_io.entropy_decode(f)
        assert img.coefs.shape == (1, 64)

    def test_progressive_rejected(self):
        data = make_jpeg(np.zeros((16, 16), dtype=np.uint8) + 100, progressive=True)
        with pytest.raises(UnsupportedMode):
            parse_jpeg(data)

    def test_serialize_is_identity(self, corpus_data, corpus_files):
        for raw, f in zip(corpus_data, corpus_files):
            assert f.serialize() == raw

    def test_not_a_jpeg(self):
        with pytest.raises(MalformedStream):
            parse_jpeg(b"PNG\r\n not a jpeg")

    def test_truncated(self):
        data = make_jpeg(np.full((8, 8), 40, dtype=np.uint8))
        with pytest.raises(MalformedStream):
            parse_jpeg(data[:40])

    def test_trailing_garbage_preserved(self):
        data = make_jpeg(np.full((8, 8), 40, dtype=np.uint8)) + b"CANON-TRAILER"
        f = parse_jpeg(data)
        assert f.trailer == b"CANON-TRAILER"
        assert f.serialize() == data
        img = jpeg_io.entropy_decode(f)
        assert jpeg_io.entropy_encode(img, f) == data

    def test_multi_scan_rejected(self):
        data = make_jpeg(np.full((8, 8), 77, dtype=np.uint8))
        f = parse_jpeg(data)
        sos = f.segments[f.scan_index]
        # splice a second scan before EOI
        patched = data[:-2] + sos.raw + f.scan_data + data[-2:]
        with pytest.raises(UnsupportedMode, match="multi-scan"):
            parse_jpeg(patched)

    def test_twelve_bit_rejected(self):
        data = bytearray(make_jpeg(np.full((8, 8), 77, dtype=np.uint8)))
        at = data.find(b"\xff\xc0")
        data[at + 4] = 12  # precision byte of the SOF payload
        with pytest.raises(UnsupportedMode):
            parse_jpeg(bytes(data))

    def test_arithmetic_rejected(self):
        data = bytearray(make_jpeg(np.full((8, 8), 77, dtype=np.uint8)))
        at = data.find(b"\xff\xc0")
        data[at + 1] = 0xC9
        with pytest.raises(UnsupportedMode):
            parse_jpeg(bytes(data))


class TestRoundTrip:
    def test_corpus_byte_identity(self, corpus_data, corpus_files):
        for raw, f in zip(corpus_data, corpus_files):
            img = jpeg_io.entropy_decode(f)
            assert jpeg_io.entropy_encode(img, f) == raw

    @pytest.mark.parametrize("seed", range(4))
    def test_pil_fuzz_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        for trial in range(25):
            w, h = int(rng.integers(8, 81)), int(rng.integers(8, 81))
            mode = "L" if trial % 4 == 0 else "RGB"
            arr = np.clip(rng.normal(128, 30, (h, w, 3)), 20, 235).astype(np.uint8)
            if mode == "L":
                arr = arr[..., 0]
            kw = dict(quality=int(rng.integers(25, 96)))
            if mode == "RGB":
                kw["subsampling"] = int(rng.integers(0, 3))
            if trial % 3 == 0:
                kw["optimize"] = True
            if trial % 5 == 0:
                kw["restart_marker_blocks"] = int(rng.integers(1, 7))
            data = make_jpeg(arr, **kw)
            f = parse_jpeg(data)
            img = jpeg_io.entropy_decode(f)
            assert jpeg_io.entropy_encode(img, f) == data, kw

    def test_threaded_scan_encode_matches(self, corpus_data, corpus_files,
                                          corpus_images):
        f, img, raw = corpus_files[0], corpus_images[0], corpus_data[0]
        assert jpeg_io.entropy_encode(img, f, threads=3) == raw
        assert jpeg_io.entropy_encode(img, f, threads=8) == raw

    def test_hand_assembled_bitstream(self):
        """Two-block grayscale checked against hand-coded Annex K bits:
        DC cat4 code '101', DC cat2 '011', AC EOB '1010'."""
        arr = np.zeros((8, 16), dtype=np.uint8)
        data = make_jpeg(arr, quality=75)
        f = parse_jpeg(data)
        img = jpeg_io.entropy_decode(f)
        img.coefs[:] = 0
        img.coefs[0, 0] = 10   # diff +10 -> cat 4, amplitude 1010
        img.coefs[1, 0] = 13   # diff +3  -> cat 2, amplitude 11
        sink = BitSink()
        sink.put(0b101, 3)
        sink.put(10, 4)
        sink.put(0b1010, 4)    # EOB
        sink.put(0b011, 3)
        sink.put(3, 2)
        sink.put(0b1010, 4)
        expected = sink.getvalue(pad_bit=1)
        assert jpeg_io.encode_scan(img, f) == expected
        decoded = jpeg_io.entropy_decode(
            parse_jpeg(jpeg_io.entropy_encode(img, f)))
        assert decoded.coefs[0, 0] == 10 and decoded.coefs[1, 0] == 13
        assert not decoded.coefs[:, 1:].any()

    def test_against_reference_decoder(self, corpus_data):
        """Coefficients match an independently written JPEG decoder."""
        for raw in corpus_data[:2]:
            f = parse_jpeg(raw)
            img = jpeg_io.entropy_decode(f)
            grids, w, h = reference_jpeg.decode_coefficients(raw)
            assert (w, h) == (f.width, f.height)
            for ci in range(f.n_components):
                ours = img.component_blocks(ci)
                assert np.array_equal(ours, grids[ci])

    def test_reference_decoder_on_fuzz(self):
        rng = np.random.default_rng(99)
        for trial in range(6):
            arr = np.clip(rng.normal(120, 40, (24, 40, 3)), 0, 255).astype(np.uint8)
            kw = dict(quality=60, subsampling=trial % 3)
            if trial % 2:
                kw["restart_marker_blocks"] = 2
            data = make_jpeg(arr, **kw)
            f = parse_jpeg(data)
            img = jpeg_io.entropy_decode(f)
            grids, _, _ = reference_jpeg.decode_coefficients(data)
            for ci in range(f.n_components):
                assert np.array_equal(img.component_blocks(ci), grids[ci])


class TestRunsize:
    def test_all_zero_ac(self):
        block = np.zeros(64, dtype=np.int32)
        assert runsize_scan(block) == [(EOB_SYMBOL, 0)]

    def test_hand_traced_example(self):
        # AC = [5, 0x17, -1, 0x44]: (0,3)+amp(5), ZRL, (1,1)+amp(-1), EOB
        block = np.zeros(64, dtype=np.int32)
        block[1] = 5
        block[19] = -1
        out = runsize_scan(block)
        assert out == [
            (RunsizeSymbol(0, 3), 5),
            (ZRL_SYMBOL, 0),
            (RunsizeSymbol(1, 1), 0),   # amplitude bits of -1 are 0
            (EOB_SYMBOL, 0),
        ]

    def test_no_eob_when_position_63_nonzero(self):
        block = np.zeros(64, dtype=np.int32)
        block[63] = 2
        out = runsize_scan(block)
        assert out[-1][0].kind == "NORMAL"

    def test_inverse_property(self):
        rng = np.random.default_rng(1234)
        for _ in range(10_000):
            block = random_sparse_block(rng)
            pairs = runsize_scan(block)
            assert np.array_equal(inverse_runsize_scan(pairs), block[1:])

    def test_size_table(self):
        from romp.context import coefficient_size
        assert coefficient_size(0) == 0
        for v in (1, -1):
            assert coefficient_size(v) == 1
        for v in (2, 3, -2, -3):
            assert coefficient_size(v) == 2
        for v in (4, 7, -4, -7):
            assert coefficient_size(v) == 3
        assert coefficient_size(1023) == 10


class TestBitPlumbing:
    def test_stuff_destuff_inverse(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(1, 400))
            raw = rng.integers(0, 256, n, dtype=np.uint8)
            raw[rng.random(n) < 0.2] = 0xFF
            stuffed = jpeg_io._stuff(raw.copy(), n * 8)
            back = jpeg_io._destuff(np.frombuffer(stuffed, dtype=np.uint8))
            assert np.array_equal(back, raw)

    def test_concat_bitstreams_matches_reference(self):
        rng = np.random.default_rng(8)
        for _ in range(40):
            ref = BitSink()
            parts = []
            for _ in range(int(rng.integers(1, 6))):
                nbits = int(rng.integers(0, 70))
                sink = BitSink()
                for _ in range(nbits):
                    sink.put(int(rng.integers(0, 2)), 1)
                buf = np.frombuffer(sink.getvalue(pad_bit=1), dtype=np.uint8)
                parts.append((buf.copy(), nbits))
                for k in range(nbits):
                    byte = buf[k // 8]
                    ref.put((byte >> (7 - k % 8)) & 1, 1)
            joined, total = concat_bitstreams(parts)
            assert total == ref.bit_length
            assert joined.tobytes() == ref.getvalue(pad_bit=1)
