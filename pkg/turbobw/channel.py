# turbobw/channel.py
"""Linear time-invariant ISI channel with AWGN: y_t = sum_l h_l x_{t-l+1} + w_t."""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .constants import DEFAULT_TAPS
from .errors import ConfigError, InputError
from .trellis import TrellisSpec, param_symbol_tuples

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """Taps are normalised to unit energy on construction."""

    taps: np.ndarray = DEFAULT_TAPS
    noise_variance: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64).reshape(-1)
        if taps.size < 1:
            raise ConfigError("at least one tap is required", key="taps")
        energy = float(np.sum(taps**2))
        if not np.isfinite(energy) or energy == 0.0:
            raise ConfigError("taps must be finite with nonzero energy", key="taps")
        taps = taps / np.sqrt(energy)
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        if not self.noise_variance > 0:
            raise ConfigError(f"must be > 0, got {self.noise_variance}", key="noise_variance")

    @property
    def memory(self) -> int:
        return int(self.taps.size)

    @classmethod
    def at_snr(cls, snr_db: float, taps=DEFAULT_TAPS, rng_seed: int = 0) -> "ChannelSpec":
        return cls(taps=taps, noise_variance=snr_to_variance(snr_db), rng_seed=rng_seed)


def noiseless_output(symbols, taps) -> np.ndarray:
    """
    z_t with the symbols before the frame fixed to +1.

    Linear in the symbols from t = L-1 on; the first L-1 outputs carry the
    fixed +1 history and are only affine.
    """
    x = np.asarray(symbols, dtype=np.float64)
    h = np.asarray(taps, dtype=np.float64)
    history = np.concatenate([np.ones(h.size - 1), x])
    return np.convolve(history, h, mode="valid")


def apply_channel(
    symbols, spec: ChannelSpec, rng: Optional[np.random.Generator] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (noiseless z, received y); noise drawn from ``rng`` or the spec's seed."""
    x = np.asarray(symbols, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InputError("channel input must be a non-empty 1-D symbol sequence")
    if not np.all(np.abs(x) == 1.0):
        raise InputError("channel input must be BPSK symbols (+1/-1)")
    z = noiseless_output(x, spec.taps)
    if rng is None:
        rng = np.random.default_rng(spec.rng_seed)
    y = z + np.sqrt(spec.noise_variance) * rng.standard_normal(z.size)
    return z, y


def true_param_table(spec: ChannelSpec, trellis: TrellisSpec) -> np.ndarray:
    """Noiseless output z_l of the L-symbol tuple behind each trellis parameter."""
    if trellis.memory != spec.memory:
        raise ConfigError(
            f"trellis memory {trellis.memory} does not match {spec.memory} channel taps", key="taps"
        )
    return param_symbol_tuples(trellis) @ spec.taps


def snr_to_variance(snr_db: float) -> float:
    """Unit symbol energy and unit-norm taps: sigma_w^2 = 10^(-snr/10)."""
    snr_db = float(snr_db)
    if not np.isfinite(snr_db):
        raise ConfigError(f"SNR must be finite, got {snr_db}", key="snr_db")
    return 10.0 ** (-snr_db / 10.0)
