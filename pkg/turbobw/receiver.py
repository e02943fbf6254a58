# turbobw/receiver.py
"""
Joint turbo-BW-equalization receiver.

One turbo iteration: BW estimation on the reduced trellis with the current
symbol priors -> ISI equalizer -> demap / deinterleave -> convolutional
decoder -> interleave / map the decoder extrinsics into the symbol priors
used by both the equalizer and the estimator in the next iteration.

The standalone (separate) design runs BW with uniform priors only and
decodes once at the end; the conventional design does the same on the
|X|^L-state trellis.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import List, Optional

import numpy as np

from .baum_welch import VARIANCE_FIXED, VARIANCE_MODES, InitSpec, channel_mse, run_em
from .bcjr import Diagnostics, branch_metrics, extrinsic_divide, output_joint, run_bcjr, symbol_joint
from .comm_chain import ConvCode, InterleaverSpec, TxFrame, deinterleave, interleave, soft_demap, soft_map
from .constants import ALPHABET_SIZE, PRIOR_FLOOR, PROB_FLOOR
from .errors import ConfigError, InputError
from .trellis import (
    EdgeGaussianTable,
    HmmParams,
    TrellisSpec,
    build_isi_trellis_conventional,
    build_isi_trellis_reduced,
)

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    JOINT = "joint"
    STANDALONE = "standalone"
    CONVENTIONAL = "conventional"

    @classmethod
    def parse(cls, value) -> "Mode":
        text = str(getattr(value, "value", value)).strip().lower()
        if text == "conventional_bw":
            text = cls.CONVENTIONAL.value
        try:
            return cls(text)
        except ValueError:
            raise ConfigError(
                f"unknown mode {value!r}, expected one of {[m.value for m in cls]}", key="modes"
            ) from None


@dataclass
class ReceiverConfig:
    mode: Mode = Mode.JOINT
    n_turbo_iters: int = 20
    em_iters_per_turbo: int = 1
    variance_mode: str = VARIANCE_FIXED
    warm_start: bool = True
    prior_floor: float = PRIOR_FLOOR

    def __post_init__(self):
        self.mode = Mode.parse(self.mode)
        if self.n_turbo_iters < 1:
            raise ConfigError(f"must be >= 1, got {self.n_turbo_iters}", key="n_turbo_iters")
        if self.em_iters_per_turbo < 0:
            raise ConfigError(f"must be >= 0, got {self.em_iters_per_turbo}", key="em_iters_per_turbo")
        if self.variance_mode not in VARIANCE_MODES:
            raise ConfigError(f"expected one of {VARIANCE_MODES}", key="variance_mode")
        if not 0.0 <= self.prior_floor < 1.0 / ALPHABET_SIZE:
            raise ConfigError(f"must lie in [0, 0.5), got {self.prior_floor}", key="prior_floor")

    @property
    def total_em_iters(self) -> int:
        """EM budget of the separate designs, matched to the joint schedule."""
        return self.n_turbo_iters * max(self.em_iters_per_turbo, 1)


@dataclass
class IterationRecord:
    turbo_iter: int
    em_iter: int
    mse: float
    ber: float
    log_evidence: float
    extrinsic_entropy: float


@dataclass
class IterationTrace:
    mode: Mode
    records: List[IterationRecord] = field(default_factory=list)
    emissions: Optional[EdgeGaussianTable] = None
    decisions: Optional[np.ndarray] = None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def mse(self) -> np.ndarray:
        return np.array([r.mse for r in self.records])

    @property
    def ber(self) -> np.ndarray:
        return np.array([r.ber for r in self.records])

    @property
    def em_iters(self) -> np.ndarray:
        return np.array([r.em_iter for r in self.records])


@dataclass
class EqualizerOutput:
    extrinsic: np.ndarray     # p(y | x_t), (T, 2)
    joint: np.ndarray         # p(x_t, y), (T, 2)
    log_evidence: float


@dataclass
class DecoderOutput:
    info_bits: np.ndarray         # hard decisions on the K info bits
    info_posterior: np.ndarray    # p(b_k, y), (K, 2)
    coded_extrinsic: np.ndarray   # p(c_k), (N, 2)
    coded_joint: np.ndarray       # p(c_k, y), (N, 2)


def uniform_priors(length: int) -> np.ndarray:
    return np.full((int(length), ALPHABET_SIZE), 1.0 / ALPHABET_SIZE)


def floor_priors(priors, floor: float) -> np.ndarray:
    p = np.maximum(np.asarray(priors, dtype=np.float64), floor)
    return p / p.sum(axis=1, keepdims=True)


def mean_entropy_bits(table) -> float:
    p = np.asarray(table, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    return float(terms.sum(axis=1).mean())


class TurboReceiver:
    """Processes one frame at a time; holds only immutable structure between calls."""

    def __init__(
        self,
        code: ConvCode,
        interleaver: InterleaverSpec,
        channel_memory: int,
        config: Optional[ReceiverConfig] = None,
    ):
        self.code = code
        self.interleaver = interleaver
        self.channel_memory = int(channel_memory)
        self.config = config or ReceiverConfig()
        self.reduced = build_isi_trellis_reduced(self.channel_memory)

    @cached_property
    def conventional(self) -> TrellisSpec:
        return build_isi_trellis_conventional(self.channel_memory)

    @property
    def estimation_trellis(self) -> TrellisSpec:
        if self.config.mode == Mode.CONVENTIONAL:
            return self.conventional
        return self.reduced

    # ---------- Building blocks ----------

    def equalize(
        self,
        received,
        emissions: EdgeGaussianTable,
        symbol_priors=None,
        diagnostics: Optional[Diagnostics] = None,
    ) -> EqualizerOutput:
        y = np.asarray(received, dtype=np.float64)
        priors = uniform_priors(y.size) if symbol_priors is None else np.asarray(symbol_priors, dtype=np.float64)
        params = HmmParams(self.reduced, emissions, priors)
        soft = run_bcjr(branch_metrics(y, params), self.reduced)
        joint = symbol_joint(soft.edge_posterior, self.reduced)
        extrinsic = extrinsic_divide(joint, priors, diagnostics)
        return EqualizerOutput(extrinsic=extrinsic, joint=joint, log_evidence=soft.log_evidence)

    def decode(self, coded_bit_table, diagnostics: Optional[Diagnostics] = None) -> DecoderOutput:
        """
        MAP decoding of p(y | c_k) rows. Info steps use p(b) = 1/2; the L_c
        flush steps are known zeros, which is how the termination knowledge
        reaches the coded-bit extrinsics of the frame tail.
        """
        table = np.asarray(coded_bit_table, dtype=np.float64)
        trellis = self.code.trellis
        n = self.code.n_outputs
        L_c = self.code.constraint_registers
        if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] % n:
            raise InputError(f"coded-bit table must be (N, 2) with N divisible by {n}, got {table.shape}")
        steps = table.shape[0] // n
        n_info = steps - L_c
        if n_info < 0:
            raise InputError(f"{steps} trellis steps cannot hold {L_c} flush bits")

        log_obs = np.log(np.maximum(table, PROB_FLOOR)).reshape(steps, n, 2)
        # metric[k, e] = sum_j log p(y | c_{k,j} = outputs[e, j])
        log_gamma = log_obs[:, np.arange(n)[None, :], trellis.outputs].sum(axis=2)
        log_prior = np.full((steps, 2), np.log(0.5))
        log_prior[n_info:] = (0.0, -np.inf)
        log_gamma = log_gamma + log_prior[:, trellis.input_index]

        soft = run_bcjr(log_gamma, trellis)
        post = soft.edge_posterior
        info_posterior = symbol_joint(post, trellis)[:n_info]
        coded_joint = output_joint(post, trellis).reshape(steps * n, 2)
        coded_extrinsic = extrinsic_divide(coded_joint, table, diagnostics)
        return DecoderOutput(
            info_bits=np.argmax(info_posterior, axis=1).astype(np.int64),
            info_posterior=info_posterior,
            coded_extrinsic=coded_extrinsic,
            coded_joint=coded_joint,
        )

    def _turbo_pass(self, frame: TxFrame, emissions, priors, diagnostics):
        """Equalize, decode and turn decoder extrinsics into the next symbol priors."""
        eq = self.equalize(frame.received, emissions, priors, diagnostics)
        coded_table = deinterleave(soft_demap(eq.extrinsic), self.interleaver)
        dec = self.decode(coded_table, diagnostics)
        feedback = soft_map(interleave(dec.coded_extrinsic, self.interleaver))
        ber = float(np.mean(dec.info_bits != frame.info_bits)) if frame.n_info else 0.0
        return eq, dec, feedback, ber

    # ---------- Receivers ----------

    def run(self, frame: TxFrame, init: InitSpec, truth=None, emissions=None) -> IterationTrace:
        if self.config.mode == Mode.JOINT:
            return self.run_joint(frame, init, truth, emissions)
        return self.run_standalone(frame, init, truth, emissions)

    def run_joint(
        self,
        frame: TxFrame,
        init: InitSpec,
        truth=None,
        emissions: Optional[EdgeGaussianTable] = None,
    ) -> IterationTrace:
        cfg = self.config
        initial = emissions.copy() if emissions is not None else init.initial_emissions(self.reduced.num_params)
        current = initial
        priors = uniform_priors(frame.n_symbols)
        trace = IterationTrace(mode=cfg.mode)
        em_done = 0

        for turbo_iter in range(1, cfg.n_turbo_iters + 1):
            if cfg.em_iters_per_turbo > 0:
                start = current if cfg.warm_start else initial
                estimate = run_em(
                    frame.received, self.reduced, init, priors, cfg.em_iters_per_turbo, emissions=start
                )
                current = estimate.emissions
                trace.diagnostics.merge(estimate.diagnostics)
                em_done += cfg.em_iters_per_turbo

            eq, dec, feedback, ber = self._turbo_pass(frame, current, priors, trace.diagnostics)
            priors = floor_priors(feedback, cfg.prior_floor)
            mse = channel_mse(current.means, truth) if truth is not None else float("nan")
            trace.records.append(
                IterationRecord(
                    turbo_iter=turbo_iter,
                    em_iter=em_done,
                    mse=mse,
                    ber=ber,
                    log_evidence=eq.log_evidence,
                    extrinsic_entropy=mean_entropy_bits(priors),
                )
            )
            trace.decisions = dec.info_bits
            logger.debug("turbo iteration %d: mse=%.3e ber=%.3e", turbo_iter, mse, ber)

        trace.emissions = current
        if trace.diagnostics.clamped_divisions:
            logger.debug("%d clamped divisions in joint run", trace.diagnostics.clamped_divisions)
        return trace

    def run_standalone(
        self,
        frame: TxFrame,
        init: InitSpec,
        truth=None,
        emissions: Optional[EdgeGaussianTable] = None,
    ) -> IterationTrace:
        """BW with fixed uniform priors; one equalize + decode pass at the end for the BER."""
        cfg = self.config
        trellis = self.estimation_trellis
        estimate = run_em(
            frame.received, trellis, init, None, cfg.total_em_iters, emissions=emissions, truth=truth
        )
        trace = IterationTrace(mode=cfg.mode, emissions=estimate.emissions)
        trace.diagnostics.merge(estimate.diagnostics)

        priors = uniform_priors(frame.n_symbols)
        _, dec, _, ber = self._turbo_pass(frame, estimate.emissions, priors, trace.diagnostics)
        trace.decisions = dec.info_bits
        last = estimate.iterations - 1
        for i, step in enumerate(estimate.history):
            trace.records.append(
                IterationRecord(
                    turbo_iter=1,
                    em_iter=i + 1,
                    mse=float("nan") if step.mse is None else step.mse,
                    ber=ber if i == last else float("nan"),
                    log_evidence=step.log_evidence,
                    extrinsic_entropy=mean_entropy_bits(priors),
                )
            )
        return trace
