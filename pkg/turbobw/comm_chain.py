# turbobw/comm_chain.py
"""
Transmit chain (convolutional encoder -> bit interleaver -> BPSK mapper) and
the soft relabelling used on the receive side.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelSpec, apply_channel
from .constants import DEFAULT_CONSTRAINT_REGISTERS, DEFAULT_GENERATORS, NORM_TOL
from .errors import InputError
from .trellis import TrellisSpec, build_conv_trellis, check_prob_table, parse_generator

logger = logging.getLogger(__name__)


def _as_bits(bits, name: str = "bits") -> np.ndarray:
    arr = np.asarray(bits).reshape(-1)
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise InputError(f"{name} must contain only 0/1, got {np.unique(arr)}")
    return arr.astype(np.int64)


# ---------- Convolutional code ----------


@dataclass(frozen=True)
class ConvCode:
    generators: tuple = DEFAULT_GENERATORS
    constraint_registers: int = DEFAULT_CONSTRAINT_REGISTERS

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(parse_generator(g) for g in self.generators))

    @cached_property
    def trellis(self) -> TrellisSpec:
        return build_conv_trellis(self.generators, self.constraint_registers)

    @property
    def n_outputs(self) -> int:
        return len(self.generators)

    def coded_length(self, n_info: int) -> int:
        return self.n_outputs * (n_info + self.constraint_registers)

    def encode(self, info_bits, terminate: bool = True) -> np.ndarray:
        return conv_encode(info_bits, self.generators, self.constraint_registers, terminate)


def conv_encode(info_bits, generators: Sequence, constraint_registers: int, terminate: bool = True) -> np.ndarray:
    """
    Rate-1/n feedforward encoding; with ``terminate`` L_c zero flush bits are
    appended first, giving n*(K + L_c) output bits, grouped per input bit.
    """
    bits = _as_bits(info_bits, "info_bits")
    trellis = build_conv_trellis(generators, constraint_registers)  # validates generators
    L_c = trellis.memory
    if terminate:
        bits = np.concatenate([bits, np.zeros(L_c, dtype=np.int64)])
    outputs = []
    for g in (parse_generator(g) for g in generators):
        # tap i multiplies the input delayed by i; the MSB taps the current bit
        taps = np.array([(g >> (L_c - i)) & 1 for i in range(L_c + 1)], dtype=np.int64)
        outputs.append(np.convolve(bits, taps)[: bits.size] % 2)
    return np.stack(outputs, axis=1).reshape(-1) if outputs else np.zeros(0, dtype=np.int64)


# ---------- Interleaver ----------


@dataclass(frozen=True, eq=False)
class InterleaverSpec:
    """Bit-level permutation: interleaved[i] = values[permutation[i]]."""

    permutation: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        perm = np.array(self.permutation, dtype=np.int64).reshape(-1)
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise InputError("interleaver permutation is not a bijection")
        perm.setflags(write=False)
        object.__setattr__(self, "permutation", perm)

    def __len__(self) -> int:
        return int(self.permutation.size)

    @classmethod
    def random(cls, size: int, seed: int) -> "InterleaverSpec":
        """Seeded uniform random permutation (Fisher-Yates via numpy)."""
        return cls(np.random.default_rng(seed).permutation(int(size)), seed)

    @classmethod
    def identity(cls, size: int) -> "InterleaverSpec":
        return cls(np.arange(int(size)))

    @cached_property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(self.permutation.size)
        inv.setflags(write=False)
        return inv


def _check_length(values: np.ndarray, spec: InterleaverSpec):
    if values.shape[0] != len(spec):
        raise InputError(f"length {values.shape[0]} does not match interleaver size {len(spec)}")


def interleave(values, spec: InterleaverSpec) -> np.ndarray:
    """Permute along the first axis, so (N, 2) soft tables move exactly like bits."""
    values = np.asarray(values)
    _check_length(values, spec)
    return values[spec.permutation]


def deinterleave(values, spec: InterleaverSpec) -> np.ndarray:
    values = np.asarray(values)
    _check_length(values, spec)
    return values[spec.inverse]


# ---------- BPSK mapping ----------


def bpsk_map(bits) -> np.ndarray:
    """0 -> +1, 1 -> -1."""
    return 1.0 - 2.0 * _as_bits(bits)


def soft_map(bit_prob_table) -> np.ndarray:
    """[p(d=0), p(d=1)] rows become [p(x=+1), p(x=-1)] rows."""
    return check_prob_table(bit_prob_table, 2, tol=NORM_TOL).copy()


def soft_demap(symbol_prob_table) -> np.ndarray:
    """Inverse of soft_map: [p(x=+1), p(x=-1)] rows become [p(d=0), p(d=1)] rows."""
    return check_prob_table(symbol_prob_table, 2, tol=NORM_TOL).copy()


# ---------- Frames ----------


@dataclass
class TxFrame:
    info_bits: np.ndarray
    coded_bits: np.ndarray
    interleaved_bits: np.ndarray
    symbols: np.ndarray
    noiseless: np.ndarray
    received: np.ndarray

    @property
    def n_info(self) -> int:
        return int(self.info_bits.size)

    @property
    def n_symbols(self) -> int:
        return int(self.symbols.size)


def build_frame(
    info_bits,
    code: ConvCode,
    interleaver: InterleaverSpec,
    channel: ChannelSpec,
    noise_rng: Optional[np.random.Generator] = None,
) -> TxFrame:
    coded = code.encode(info_bits)
    interleaved = interleave(coded, interleaver)
    symbols = bpsk_map(interleaved)
    noiseless, received = apply_channel(symbols, channel, noise_rng)
    return TxFrame(
        info_bits=_as_bits(info_bits, "info_bits"),
        coded_bits=coded,
        interleaved_bits=interleaved,
        symbols=symbols,
        noiseless=noiseless,
        received=received,
    )


def random_frame(
    n_info: int,
    code: ConvCode,
    interleaver: InterleaverSpec,
    channel: ChannelSpec,
    bits_rng: np.random.Generator,
    noise_rng: Optional[np.random.Generator] = None,
) -> TxFrame:
    info = bits_rng.integers(0, 2, size=int(n_info))
    return build_frame(info, code, interleaver, channel, noise_rng)
