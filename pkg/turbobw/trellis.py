# turbobw/trellis.py
"""
Trellis structures and the HMM parameter containers.

Three finite-state machines are built here:
  - the conventional ISI trellis (|X|^L states, Gaussian parameters tied to
    the destination state),
  - the reduced-state ISI trellis (|X|^(L-1) states, parameters tied to the
    edges, i.e. to pairs of consecutive states),
  - the convolutional-code trellis (2^L_c states, edges labelled with the
    coded output bits).

ISI states are integers whose binary digits are the symbol history with the
most recent symbol in the lowest digit. The parameter index of an ISI edge is
the integer whose digits are the L symbols (x_t, ..., x_{t-L+1}) in the same
order, so param_index of a reduced edge equals the conventional state index.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .constants import ALPHABET_SIZE, BPSK_SYMBOLS, INIT_TOL, NORM_TOL, VARIANCE_FLOOR
from .errors import ConfigError, InputError

logger = logging.getLogger(__name__)

KIND_CONVENTIONAL = "conventional"
KIND_REDUCED = "reduced"
KIND_CODE = "code"


class Edge(NamedTuple):
    from_state: int
    to_state: int
    input_symbol_index: int
    param_index: int


def _readonly(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TrellisSpec:
    """
    Time-invariant trellis stored as parallel edge arrays.

    ``outputs`` is only set for code trellises (one row of coded bits per
    edge). ``terminated`` trellises end in state 0; the others end anywhere.
    """

    num_states: int
    from_state: np.ndarray
    to_state: np.ndarray
    input_index: np.ndarray
    param_index: np.ndarray
    initial_distribution: np.ndarray
    memory: int
    kind: str
    outputs: Optional[np.ndarray] = None
    terminated: bool = False
    alphabet_size: int = ALPHABET_SIZE

    def __post_init__(self):
        if self.num_states < 1:
            raise ConfigError("trellis needs at least one state", key="num_states")
        for name in ("from_state", "to_state", "input_index", "param_index"):
            object.__setattr__(self, name, _readonly(getattr(self, name), np.int64))
        object.__setattr__(
            self, "initial_distribution", _readonly(self.initial_distribution, np.float64)
        )
        if self.outputs is not None:
            object.__setattr__(self, "outputs", _readonly(self.outputs, np.int64))

        n_edges = self.from_state.shape[0]
        for name in ("to_state", "input_index", "param_index"):
            if getattr(self, name).shape != (n_edges,):
                raise ConfigError(f"expected {n_edges} entries", key=name)
        if n_edges == 0:
            raise ConfigError("trellis has no edges", key="edges")
        if self.from_state.min() < 0 or self.from_state.max() >= self.num_states:
            raise ConfigError("state index out of range", key="from_state")
        if self.to_state.min() < 0 or self.to_state.max() >= self.num_states:
            raise ConfigError("state index out of range", key="to_state")
        if self.input_index.min() < 0 or self.input_index.max() >= self.alphabet_size:
            raise ConfigError("symbol index out of range", key="input_index")

        # deterministic next-state function: one edge per (from_state, input)
        pairs = self.from_state * self.alphabet_size + self.input_index
        if np.unique(pairs).size != n_edges or n_edges != self.num_states * self.alphabet_size:
            raise ConfigError("every (state, input) pair needs exactly one edge", key="edges")

        params = np.unique(self.param_index)
        if params[0] != 0 or params[-1] != params.size - 1:
            raise ConfigError("parameter indices must form a contiguous range", key="param_index")

        init = self.initial_distribution
        if init.shape != (self.num_states,) or np.any(init < 0) or abs(init.sum() - 1.0) > INIT_TOL:
            raise ConfigError("initial distribution must be a probability vector", key="initial_distribution")

    # ---------- Shape ----------

    @property
    def num_edges(self) -> int:
        return int(self.from_state.shape[0])

    @property
    def num_params(self) -> int:
        return int(self.param_index.max()) + 1

    @property
    def num_outputs(self) -> int:
        return 0 if self.outputs is None else int(self.outputs.shape[1])

    @property
    def edges(self) -> Tuple[Edge, ...]:
        return tuple(
            Edge(int(f), int(t), int(u), int(p))
            for f, t, u, p in zip(self.from_state, self.to_state, self.input_index, self.param_index)
        )

    # ---------- Lookup tables used by the recursions ----------

    def _padded(self, keys: np.ndarray) -> np.ndarray:
        """(num_states, k) edge indices grouped by ``keys``; padding points at num_edges."""
        counts = np.bincount(keys, minlength=self.num_states)
        table = np.full((self.num_states, max(int(counts.max()), 1)), self.num_edges, dtype=np.int64)
        fill = np.zeros(self.num_states, dtype=np.int64)
        for e, s in enumerate(keys):
            table[s, fill[s]] = e
            fill[s] += 1
        table.setflags(write=False)
        return table

    @cached_property
    def incoming(self) -> np.ndarray:
        return self._padded(self.to_state)

    @cached_property
    def outgoing(self) -> np.ndarray:
        return self._padded(self.from_state)

    @cached_property
    def symbol_indicator(self) -> np.ndarray:
        """(num_edges, alphabet) one-hot of the symbol driving each edge."""
        ind = np.zeros((self.num_edges, self.alphabet_size))
        ind[np.arange(self.num_edges), self.input_index] = 1.0
        ind.setflags(write=False)
        return ind

    @cached_property
    def param_indicator(self) -> np.ndarray:
        """(num_edges, num_params) one-hot of the emission parameter of each edge."""
        ind = np.zeros((self.num_edges, self.num_params))
        ind[np.arange(self.num_edges), self.param_index] = 1.0
        ind.setflags(write=False)
        return ind

    @cached_property
    def terminal_log_weights(self) -> np.ndarray:
        """log beta_T: zeros when unterminated, log one-hot at state 0 otherwise."""
        weights = np.zeros(self.num_states)
        if self.terminated:
            weights[1:] = -np.inf
        weights.setflags(write=False)
        return weights

    def transition_matrix(self, symbol_prior: Sequence[float]) -> np.ndarray:
        """p(s_t | s_{t-1}) for one time step: the prior of the driving symbol on each edge."""
        prior = np.asarray(symbol_prior, dtype=np.float64)
        if prior.shape != (self.alphabet_size,):
            raise InputError(f"symbol prior must have {self.alphabet_size} entries")
        matrix = np.zeros((self.num_states, self.num_states))
        np.add.at(matrix, (self.from_state, self.to_state), prior[self.input_index])
        return matrix


@dataclass
class EdgeGaussianTable:
    """Gaussian emission parameters (mean, variance) indexed by param_index."""

    means: np.ndarray
    variances: np.ndarray
    variance_floor: float = VARIANCE_FLOOR

    def __post_init__(self):
        self.means = np.array(self.means, dtype=np.float64)
        self.variances = np.array(self.variances, dtype=np.float64)
        if self.means.ndim != 1 or self.means.shape != self.variances.shape:
            raise InputError(
                f"means {self.means.shape} and variances {self.variances.shape} must be equal-length vectors"
            )
        if not np.all(np.isfinite(self.means)) or not np.all(np.isfinite(self.variances)):
            raise InputError("emission parameters must be finite")
        self.variances = np.maximum(self.variances, self.variance_floor)

    def __len__(self) -> int:
        return int(self.means.shape[0])

    @classmethod
    def with_common_variance(cls, means, variance: float) -> "EdgeGaussianTable":
        means = np.asarray(means, dtype=np.float64)
        return cls(means=means, variances=np.full(means.shape, float(variance)))

    def copy(self) -> "EdgeGaussianTable":
        return EdgeGaussianTable(self.means.copy(), self.variances.copy(), self.variance_floor)

    def log_likelihood(self, observations: np.ndarray) -> np.ndarray:
        """(T, num_params) table of log N(y_t; mu_l, sigma_l^2)."""
        y = np.asarray(observations, dtype=np.float64)[:, None]
        return -0.5 * np.log(2.0 * np.pi * self.variances) - (y - self.means) ** 2 / (2.0 * self.variances)


@dataclass
class HmmParams:
    """Everything the forward-backward pass needs: structure, emissions, symbol priors."""

    trellis: TrellisSpec
    emissions: EdgeGaussianTable
    symbol_priors: np.ndarray = field(default=None)

    def __post_init__(self):
        if len(self.emissions) != self.trellis.num_params:
            raise InputError(
                f"{len(self.emissions)} emission parameters for a trellis with {self.trellis.num_params}"
            )
        if self.symbol_priors is None:
            self.symbol_priors = np.full(self.trellis.alphabet_size, 1.0 / self.trellis.alphabet_size)
        self.symbol_priors = check_prob_table(self.symbol_priors, self.trellis.alphabet_size, tol=INIT_TOL)


def check_prob_table(table, width: int, tol: float = NORM_TOL) -> np.ndarray:
    """Validate a (T, width) or (width,) table of probability rows."""
    arr = np.asarray(table, dtype=np.float64)
    if arr.shape[-1:] != (width,) or arr.ndim > 2:
        raise InputError(f"probability table must have {width} columns, got shape {arr.shape}")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InputError("probabilities must be finite and nonnegative")
    if np.any(np.abs(arr.sum(axis=-1) - 1.0) > tol):
        raise InputError(f"probability rows must sum to 1 within {tol:g}")
    return arr


# ---------- Builders ----------


def _check_memory(channel_memory: int):
    if int(channel_memory) != channel_memory or channel_memory < 1:
        raise ConfigError(f"channel memory must be an integer >= 1, got {channel_memory}", key="channel_memory")


def build_isi_trellis_conventional(channel_memory: int, alphabet_size: int = ALPHABET_SIZE) -> TrellisSpec:
    """|X|^L states; every edge emits with the parameter of its destination state."""
    _check_memory(channel_memory)
    if alphabet_size != ALPHABET_SIZE:
        raise ConfigError(f"only BPSK (alphabet size 2) is supported, got {alphabet_size}", key="alphabet_size")
    L = int(channel_memory)
    n_states = 2**L
    mask = n_states - 1
    from_state, to_state, inputs = [], [], []
    for s in range(n_states):
        for u in range(alphabet_size):
            from_state.append(s)
            to_state.append(((s << 1) | u) & mask)
            inputs.append(u)
    return TrellisSpec(
        num_states=n_states,
        from_state=from_state,
        to_state=to_state,
        input_index=inputs,
        param_index=to_state,
        initial_distribution=np.full(n_states, 1.0 / n_states),
        memory=L,
        kind=KIND_CONVENTIONAL,
    )


def build_isi_trellis_reduced(channel_memory: int) -> TrellisSpec:
    """|X|^(L-1) states; each edge carries the full L-symbol tuple as its parameter."""
    _check_memory(channel_memory)
    L = int(channel_memory)
    n_states = 2 ** (L - 1)
    state_mask = n_states - 1
    from_state, to_state, inputs, params = [], [], [], []
    for s in range(n_states):
        for u in range(ALPHABET_SIZE):
            full = (s << 1) | u
            from_state.append(s)
            to_state.append(full & state_mask)
            inputs.append(u)
            params.append(full)
    return TrellisSpec(
        num_states=n_states,
        from_state=from_state,
        to_state=to_state,
        input_index=inputs,
        param_index=params,
        initial_distribution=np.full(n_states, 1.0 / n_states),
        memory=L,
        kind=KIND_REDUCED,
    )


def parse_generator(value) -> int:
    """Generators are written in octal: ``"7"``, ``"0o7"`` and ``0o7`` are all 111b."""
    if isinstance(value, (int, np.integer)):
        return int(value)
    text = str(value).strip().lower()
    if text.startswith("0o"):
        text = text[2:]
    try:
        return int(text, 8)
    except ValueError:
        raise ConfigError(f"not an octal generator: {value!r}", key="generators") from None


def build_conv_trellis(generators: Sequence, constraint_registers: int) -> TrellisSpec:
    """
    Feedforward rate-1/n convolutional code with L_c shift registers.

    The state holds the L_c previous input bits, newest in the most
    significant position; a generator's MSB taps the current input bit.
    Frames start and end (after L_c flush bits) in state 0.
    """
    gens = [parse_generator(g) for g in (generators or [])]
    if not gens:
        raise ConfigError("at least one generator polynomial is required", key="generators")
    L_c = int(constraint_registers)
    if L_c < 0:
        raise ConfigError(f"must be >= 0, got {constraint_registers}", key="constraint_registers")
    for g in gens:
        if g <= 0 or g >= 2 ** (L_c + 1):
            raise ConfigError(
                f"generator {g:o} (octal) does not fit {L_c} shift registers", key="generators"
            )

    n_states = 2**L_c
    from_state, to_state, inputs, outputs = [], [], [], []
    for s in range(n_states):
        for u in range(ALPHABET_SIZE):
            register = (u << L_c) | s
            from_state.append(s)
            to_state.append(register >> 1)
            inputs.append(u)
            outputs.append([bin(register & g).count("1") & 1 for g in gens])
    init = np.zeros(n_states)
    init[0] = 1.0
    return TrellisSpec(
        num_states=n_states,
        from_state=from_state,
        to_state=to_state,
        input_index=inputs,
        param_index=np.arange(len(from_state)),
        initial_distribution=init,
        memory=L_c,
        kind=KIND_CODE,
        outputs=outputs,
        terminated=True,
    )


# ---------- Reduced <-> conventional correspondence ----------


def param_symbol_tuples(trellis: TrellisSpec) -> np.ndarray:
    """(num_params, L) BPSK values; column i holds x_{t-i} for each ISI parameter."""
    if trellis.kind not in (KIND_CONVENTIONAL, KIND_REDUCED):
        raise ConfigError("symbol tuples are only defined for ISI trellises", key="kind")
    params = np.arange(trellis.num_params)[:, None]
    digits = (params >> np.arange(trellis.memory)[None, :]) & 1
    return np.asarray(BPSK_SYMBOLS)[digits]


def state_mapping(reduced: TrellisSpec, conventional: TrellisSpec) -> np.ndarray:
    """Conventional state index of each reduced edge (both enumerate L-symbol tuples)."""
    if reduced.kind != KIND_REDUCED or conventional.kind != KIND_CONVENTIONAL:
        raise InputError("expected a reduced and a conventional ISI trellis")
    if reduced.memory != conventional.memory or reduced.num_edges != conventional.num_states:
        raise InputError(
            f"trellises built for different memories ({reduced.memory} vs {conventional.memory})"
        )
    return np.array(reduced.param_index)


def edge_posterior_to_state_posterior(reduced_edge_posteriors, mapping) -> np.ndarray:
    """Permute (T, reduced edges) posteriors into (T, conventional states) order."""
    post = np.asarray(reduced_edge_posteriors, dtype=np.float64)
    mapping = np.asarray(mapping)
    if post.ndim != 2 or post.shape[1] != mapping.shape[0]:
        raise InputError(f"posterior shape {post.shape} does not match mapping of {mapping.shape[0]}")
    out = np.empty_like(post)
    out[:, mapping] = post
    return out


def state_posterior_to_edge_posterior(conventional_state_posteriors, mapping) -> np.ndarray:
    post = np.asarray(conventional_state_posteriors, dtype=np.float64)
    mapping = np.asarray(mapping)
    if post.ndim != 2 or post.shape[1] != mapping.shape[0]:
        raise InputError(f"posterior shape {post.shape} does not match mapping of {mapping.shape[0]}")
    return post[:, mapping]
