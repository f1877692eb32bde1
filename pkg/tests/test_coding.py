import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sthq import coding
from sthq.coding import huffman
from sthq.coding.freq import MAX_TOTAL, freq_table, model_cross_entropy_bits


def _random_stream(rng, L, n):
    p = rng.dirichlet(np.ones(L) * rng.uniform(0.1, 2))
    return rng.choice(L, size=n, p=p)


def type_class_stream(counts, seed=0):
    """A random permutation of a stream with exactly the given symbol counts."""
    symbols = np.repeat(np.arange(len(counts)), counts)
    return np.random.default_rng(seed).permutation(symbols)


class TestFreqTable:
    def test_add_one(self):
        np.testing.assert_array_equal(freq_table([2, 1, 3]), [3, 2, 4])

    def test_unseen_symbol(self):
        assert freq_table([0, 5, 0]).min() == 1

    def test_from_stream(self):
        np.testing.assert_array_equal(freq_table([0, 0, 2], L=4), [3, 1, 2, 1])

    def test_rescaled_ratios(self):
        counts = np.array([4_000_000, 1_000_000, 2_500_000, 37])
        table = freq_table(counts)
        assert table.sum() <= MAX_TOTAL and table.min() >= 1
        big = counts[:3]
        np.testing.assert_allclose(table[:3] / table[:3].sum(), big / big.sum(), rtol=1e-2)

    @given(st.lists(st.integers(0, 2**32 - 1), min_size=1, max_size=300))
    @settings(max_examples=200, deadline=None)
    def test_bounds(self, counts):
        table = freq_table(counts)
        assert table.min() >= 1 and table.sum() <= MAX_TOTAL

    def test_negative(self):
        with pytest.raises(ValueError):
            freq_table([1, -1])


@pytest.mark.parametrize("coder", ["arith", "huffman"])
class TestRoundTrip:
    @pytest.mark.parametrize("L,n", [(1, 50), (2, 1000), (75, 3000), (1000, 5000), (3, 0)])
    def test_extremes(self, coder, L, n):
        rng = np.random.default_rng(L)
        symbols = _random_stream(rng, L, n)
        stream = coding.encode(symbols, coder=coder, L=L)
        np.testing.assert_array_equal(coding.decode(stream), symbols)
        np.testing.assert_array_equal(coding.decode(stream.to_bytes()), symbols)

    def test_random_streams(self, coder):
        rng = np.random.default_rng(99)
        for _ in range(100):
            L = int(rng.integers(2, 300))
            symbols = _random_stream(rng, L, int(rng.integers(1, 2000)))
            np.testing.assert_array_equal(coding.decode(coding.encode(symbols, L=L, coder=coder)), symbols)

    def test_external_table(self, coder):
        rng = np.random.default_rng(1)
        symbols = rng.integers(0, 5, 400)
        counts = np.array([10, 0, 3, 900, 1])  # unrelated to the stream
        stream = coding.encode(symbols, counts=counts, coder=coder)
        np.testing.assert_array_equal(coding.decode(stream), symbols)

    def test_deterministic(self, coder):
        symbols = np.random.default_rng(4).integers(0, 9, 2000)
        a = coding.encode(symbols, coder=coder).to_bytes()
        b = coding.encode(symbols.copy(), coder=coder).to_bytes()
        assert a == b

    def test_centers_travel(self, coder):
        C = np.array([[0.5, -1.0], [2.25, 3.0], [7.0, 8.0]])
        stream = coding.encode([0, 2, 2, 1], centers=C, coder=coder)
        back, _ = coding.Bitstream.from_bytes(stream.to_bytes())
        assert back.dim == 2 and back.centers.dtype == np.float32
        np.testing.assert_array_equal(back.centers, C.astype(np.float32))


class TestArithmeticBounds:
    def test_type_class_window(self):
        symbols = type_class_stream([5000, 2500, 2500])
        stream = coding.arith_encode(symbols)
        assert 15000 <= stream.payload_bits <= 15064

    def test_within_32_bits_of_model_cross_entropy(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            L = int(rng.integers(2, 200))
            symbols = _random_stream(rng, L, int(rng.integers(1, 3000)))
            stream = coding.arith_encode(symbols, L=L)
            ideal = model_cross_entropy_bits(symbols, stream.table())
            assert ideal <= stream.payload_bits <= ideal + 32

    def test_single_symbol_stream(self):
        stream = coding.arith_encode(np.zeros(10_000, dtype=int), L=1)
        assert stream.payload_bits <= 32

    def test_dominant_symbol(self):
        symbols = np.zeros(10_000, dtype=int)
        symbols[17] = 1
        stream = coding.arith_encode(symbols)
        assert stream.payload_bits <= model_cross_entropy_bits(symbols, stream.table()) + 32

    def test_never_beaten_by_huffman_on_non_dyadic(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            symbols = rng.choice(3, size=5000, p=[0.6, 0.3, 0.1])
            a = coding.arith_encode(symbols).payload_bits
            h = coding.huffman_encode(symbols).payload_bits
            assert a <= h


class TestHuffman:
    def test_example(self):
        counts = np.array([2, 1, 1])
        assert huffman.code_lengths(freq_table(counts)) == [1, 2, 2]
        stream = coding.huffman_encode([0, 1, 2, 0])
        assert stream.payload_bits == 6

    def test_single_symbol(self):
        stream = coding.huffman_encode([0] * 9, L=1)
        assert stream.payload_bits == 9

    def test_canonical_prefix_free(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            freqs = rng.integers(1, 1000, size=int(rng.integers(2, 60)))
            lengths = huffman.code_lengths(freqs)
            assert sum(2.0 ** -l for l in lengths) == pytest.approx(1.0)  # complete code
            words = [format(c, f"0{l}b") for c, l in huffman.canonical_codes(lengths)]
            for a in words:
                for b in words:
                    assert a == b or not b.startswith(a)

    def test_within_one_bit_per_symbol(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            L = int(rng.integers(2, 100))
            symbols = _random_stream(rng, L, 2000)
            stream = coding.huffman_encode(symbols, L=L)
            ideal = model_cross_entropy_bits(symbols, stream.table())
            assert stream.payload_bits <= ideal + len(symbols)


class TestCorruption:
    def _blob(self, coder):
        symbols = np.random.default_rng(2).integers(0, 6, 3000)
        return symbols, coding.encode(symbols, coder=coder).to_bytes()

    @pytest.mark.parametrize("coder", ["arith", "huffman"])
    def test_truncated(self, coder):
        _, blob = self._blob(coder)
        for cut in (3, 20, len(blob) // 2, len(blob) - 1):
            with pytest.raises(coding.DecodeError):
                coding.decode(blob[:cut])

    @pytest.mark.parametrize("coder", ["arith", "huffman"])
    def test_bad_magic_version_and_trailing(self, coder):
        _, blob = self._blob(coder)
        for bad in (b"XTHQ" + blob[4:], blob[:4] + b"\x09" + blob[5:],
                    blob[:5] + b"\x07" + blob[6:], blob + b"\x00"):
            with pytest.raises(coding.DecodeError):
                coding.decode(bad)

    @pytest.mark.parametrize("coder", ["arith", "huffman"])
    def test_flipped_payload_bits(self, coder):
        # without a checksum a flip can land on another valid code word sequence;
        # what decode must guarantee is that anything it returns re-encodes to
        # exactly the bytes it was given
        _, blob = self._blob(coder)
        rng = np.random.default_rng(11)
        payload_start = len(blob) - (coding.Bitstream.from_bytes(blob)[0].payload_bits + 7) // 8
        for _ in range(200):
            corrupt = bytearray(blob)
            i = int(rng.integers(payload_start, len(blob)))
            corrupt[i] ^= 1 << int(rng.integers(0, 8))
            try:
                out = coding.decode(bytes(corrupt))
            except coding.DecodeError:
                continue
            stream, _ = coding.Bitstream.from_bytes(bytes(corrupt))
            again = coding.encode(out, counts=stream.counts, coder=coder)
            assert again.to_bytes() == bytes(corrupt)

    def test_corrupt_counts(self):
        symbols, blob = self._blob("arith")
        corrupt = bytearray(blob)
        counts_at = 18  # header is 18 bytes and there are no centers
        corrupt[counts_at:counts_at + 4] = struct.pack("<I", 7)
        with pytest.raises(coding.DecodeError):
            coding.decode(bytes(corrupt))

    def test_symbol_out_of_table(self):
        with pytest.raises(ValueError):
            coding.encode([0, 5], counts=[1, 1])


class TestContainerLayout:
    def test_header_fields(self):
        C = np.arange(6, dtype=np.float32).reshape(3, 2)
        stream = coding.huffman_encode([0, 1, 2, 2], centers=C)
        blob = stream.to_bytes()
        magic, version, coder, L, dim, m = struct.unpack_from("<4sBBHHQ", blob)
        assert (magic, version, coder, L, dim, m) == (b"STHQ", 1, 1, 3, 2, 4)
        np.testing.assert_array_equal(np.frombuffer(blob, "<f4", 6, 18), C.ravel())
        np.testing.assert_array_equal(np.frombuffer(blob, "<u4", 3, 42), [1, 1, 2])
        (nbits,) = struct.unpack_from("<Q", blob, 54)
        assert nbits == stream.payload_bits
        assert len(blob) == 62 + math.ceil(nbits / 8)
        assert stream.total_bits == 8 * len(blob)


class TestReport:
    def test_identity_factor(self):
        assert coding.coded_size_report(10**9, 2, 32 * 10**9) == pytest.approx(1.0, rel=1e-8)

    def test_table_value(self):
        w = 464_154
        total = w * 32 / 20.15
        factor = coding.coded_size_report(w, 75, total - 75 * 32)
        assert factor == pytest.approx(20.15, rel=1e-12)

    def test_doubling_payload(self):
        f1 = coding.coded_size_report(10**8, 4, 10**8)
        f2 = coding.coded_size_report(10**8, 4, 2 * 10**8)
        assert f1 / f2 == pytest.approx(2.0, rel=1e-5)

    def test_invalid(self):
        with pytest.raises(ValueError):
            coding.coded_size_report(0, 4, 100)
