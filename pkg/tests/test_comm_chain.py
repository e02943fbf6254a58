"""Encoder, interleaver and BPSK mapping of the transmit chain."""

import numpy as np
import pytest

from conftest import next_edge_table
from turbobw.channel import ChannelSpec
from turbobw.comm_chain import (
    ConvCode,
    InterleaverSpec,
    bpsk_map,
    build_frame,
    conv_encode,
    deinterleave,
    interleave,
    random_frame,
    soft_demap,
    soft_map,
)
from turbobw.errors import ConfigError, InputError


def encode_by_trellis_walk(code, bits):
    trellis = code.trellis
    nxt = next_edge_table(trellis)
    state, out = 0, []
    for b in list(bits) + [0] * code.constraint_registers:
        e = nxt[(state, int(b))]
        out.extend(trellis.outputs[e])
        state = int(trellis.to_state[e])
    return np.array(out), state


class TestConvEncode:
    def test_worked_example(self):
        np.testing.assert_array_equal(conv_encode([1, 0, 0], (0o7, 0o5), 2, terminate=False), [1, 1, 1, 0, 1, 1])

    def test_terminated_length(self):
        code = ConvCode((0o7, 0o5), 2)
        assert code.encode(np.ones(10, dtype=int)).size == code.coded_length(10) == 24

    def test_all_zero_input(self):
        np.testing.assert_array_equal(ConvCode().encode(np.zeros(8, dtype=int)), np.zeros(20))

    def test_matches_trellis_walk(self, rng):
        code = ConvCode(("15", "17"), 3)
        bits = rng.integers(0, 2, size=40)
        expected, final_state = encode_by_trellis_walk(code, bits)
        np.testing.assert_array_equal(code.encode(bits), expected)
        assert final_state == 0

    def test_linear_over_gf2(self, rng):
        code = ConvCode()
        a = rng.integers(0, 2, size=30)
        b = rng.integers(0, 2, size=30)
        np.testing.assert_array_equal(code.encode(a ^ b), code.encode(a) ^ code.encode(b))

    def test_uncoded(self):
        np.testing.assert_array_equal(conv_encode([1, 0, 1], (1,), 0), [1, 0, 1])

    def test_rejects_non_binary(self):
        with pytest.raises(InputError):
            conv_encode([0, 2, 1], (0o7, 0o5), 2)

    def test_rejects_bad_generator(self):
        with pytest.raises(ConfigError):
            conv_encode([0, 1], (0o17,), 2)

    def test_empty_frame_is_just_the_flush(self):
        assert ConvCode().encode([]).size == 4


class TestInterleaver:
    def test_identity(self):
        values = np.arange(6)
        np.testing.assert_array_equal(interleave(values, InterleaverSpec.identity(6)), values)

    def test_round_trip(self, rng):
        spec = InterleaverSpec.random(50, seed=4)
        values = rng.normal(size=50)
        np.testing.assert_array_equal(deinterleave(interleave(values, spec), spec), values)
        np.testing.assert_array_equal(interleave(deinterleave(values, spec), spec), values)

    def test_seeded(self):
        a = InterleaverSpec.random(100, seed=1)
        b = InterleaverSpec.random(100, seed=1)
        c = InterleaverSpec.random(100, seed=2)
        np.testing.assert_array_equal(a.permutation, b.permutation)
        assert not np.array_equal(a.permutation, c.permutation)

    def test_is_a_bijection(self):
        for seed in range(5):
            perm = InterleaverSpec.random(64, seed).permutation
            np.testing.assert_array_equal(np.sort(perm), np.arange(64))

    def test_soft_rows_move_with_their_bits(self, rng):
        spec = InterleaverSpec.random(20, seed=0)
        bits = rng.integers(0, 2, size=20)
        table = np.eye(2)[bits]
        np.testing.assert_array_equal(interleave(table, spec), np.eye(2)[interleave(bits, spec)])

    def test_worked_example(self):
        spec = InterleaverSpec([2, 0, 1])
        np.testing.assert_array_equal(interleave(["a", "b", "c"], spec), ["c", "a", "b"])
        np.testing.assert_array_equal(deinterleave(["c", "a", "b"], spec), ["a", "b", "c"])

    def test_rejects_non_bijection(self):
        with pytest.raises(InputError):
            InterleaverSpec([0, 0, 1])

    def test_rejects_length_mismatch(self):
        with pytest.raises(InputError):
            interleave(np.zeros(4), InterleaverSpec.identity(5))


class TestMapping:
    def test_bpsk(self):
        np.testing.assert_array_equal(bpsk_map([0, 1, 1, 0]), [1.0, -1.0, -1.0, 1.0])

    def test_soft_relabelling(self):
        table = np.array([[0.9, 0.1], [0.25, 0.75]])
        np.testing.assert_array_equal(soft_map(table), table)
        np.testing.assert_array_equal(soft_demap(soft_map(table)), table)

    def test_soft_map_returns_a_copy(self):
        table = np.array([[0.5, 0.5]])
        soft_map(table)[0, 0] = 0.0
        assert table[0, 0] == 0.5

    def test_rejects_unnormalised_rows(self):
        with pytest.raises(InputError):
            soft_map([[0.9, 0.3]])
        with pytest.raises(InputError):
            soft_demap([[0.5, 0.5, 0.0]])


class TestFrames:
    def test_frame_invariants(self, rng):
        code = ConvCode()
        interleaver = InterleaverSpec.random(code.coded_length(16), seed=0)
        frame = random_frame(16, code, interleaver, ChannelSpec(noise_variance=0.1), rng, rng)
        assert frame.n_info == 16
        assert frame.n_symbols == 2 * (16 + 2)
        np.testing.assert_array_equal(frame.coded_bits, code.encode(frame.info_bits))
        np.testing.assert_array_equal(frame.interleaved_bits, interleave(frame.coded_bits, interleaver))
        np.testing.assert_array_equal(frame.symbols, bpsk_map(frame.interleaved_bits))
        assert frame.received.shape == frame.noiseless.shape == (36,)

    def test_interleaver_size_must_match(self):
        with pytest.raises(InputError):
            build_frame(np.zeros(8, dtype=int), ConvCode(), InterleaverSpec.identity(10), ChannelSpec())
