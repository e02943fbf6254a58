# turbobw/__init__.py
"""
Joint blind channel estimation and turbo equalization over ISI/AWGN channels.

This package contains:
- trellis: conventional / reduced-state ISI trellises, code trellises, HMM parameters
- bcjr: log-domain forward-backward inference and extrinsic division
- baum_welch: state- or edge-tied Baum-Welch estimation of Gaussian emissions
- comm_chain / channel: transmitter chain and the ISI + AWGN channel
- receiver: the joint turbo-BW-equalization receiver and the standalone baseline
- experiments: seeded SNR sweeps written to CSV
"""

from .baum_welch import EmEstimate, InitSpec, run_em
from .bcjr import SoftSequence, run_bcjr
from .channel import ChannelSpec, apply_channel
from .comm_chain import ConvCode, InterleaverSpec, TxFrame
from .experiments import ExperimentConfig, parse_config, run_experiment
from .receiver import IterationTrace, Mode, ReceiverConfig, TurboReceiver
from .trellis import EdgeGaussianTable, HmmParams, TrellisSpec

__all__ = [
    "ChannelSpec",
    "ConvCode",
    "EdgeGaussianTable",
    "EmEstimate",
    "ExperimentConfig",
    "HmmParams",
    "InitSpec",
    "InterleaverSpec",
    "IterationTrace",
    "Mode",
    "ReceiverConfig",
    "SoftSequence",
    "TrellisSpec",
    "TurboReceiver",
    "TxFrame",
    "apply_channel",
    "parse_config",
    "run_bcjr",
    "run_em",
    "run_experiment",
]
