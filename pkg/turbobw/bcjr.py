# turbobw/bcjr.py
"""
Log-domain forward-backward (BCJR) inference over any TrellisSpec.

Row t of a log_gamma table holds the branch metrics of the edges taken
between time t-1 and t. log_alpha and log_beta carry T+1 rows: log_alpha[0]
is the initial distribution and log_beta[T] the terminal weights. Each row of
both recursions is shifted by its maximum; the shifts are kept in
``alpha_scales`` / ``beta_scales`` so that the unscaled quantities are

    log alpha_t = log_alpha[t] + sum(alpha_scales[:t])
    log beta_t  = log_beta[t]  + sum(beta_scales[t:])
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from .constants import PROB_FLOOR
from .errors import InferenceError, InputError
from .trellis import HmmParams, TrellisSpec

logger = logging.getLogger(__name__)


@dataclass
class Diagnostics:
    """Counters for recoverable numerical events."""

    clamped_divisions: int = 0
    skipped_updates: int = 0

    def merge(self, other: "Diagnostics"):
        self.clamped_divisions += other.clamped_divisions
        self.skipped_updates += other.skipped_updates


@dataclass
class SoftSequence:
    log_alpha: np.ndarray
    log_beta: np.ndarray
    log_edge_posterior: np.ndarray
    alpha_scales: np.ndarray
    beta_scales: np.ndarray
    log_evidence: float

    @property
    def edge_posterior(self) -> np.ndarray:
        return np.exp(self.log_edge_posterior)


def _check_gamma(log_gamma: np.ndarray, trellis: TrellisSpec) -> np.ndarray:
    log_gamma = np.asarray(log_gamma, dtype=np.float64)
    if log_gamma.ndim != 2 or log_gamma.shape[1] != trellis.num_edges:
        raise InputError(f"log_gamma must be (T, {trellis.num_edges}), got {log_gamma.shape}")
    return log_gamma


def _logsumexp_rows(values: np.ndarray) -> np.ndarray:
    """Row-wise logsumexp; binary trellises take the two-column logaddexp path."""
    if values.shape[1] == 2:
        return np.logaddexp(values[:, 0], values[:, 1])
    return logsumexp(values, axis=1)


def _rescale(row: np.ndarray) -> Tuple[np.ndarray, float]:
    peak = row.max()
    if not np.isfinite(peak):
        return row, 0.0
    return row - peak, float(peak)


def branch_metrics(observations, params: HmmParams) -> np.ndarray:
    """log gamma_t(edge) = log p(y_t | param(edge)) + log p(x_t = symbol(edge))."""
    y = np.asarray(observations, dtype=np.float64)
    if y.ndim != 1:
        raise InputError(f"observations must be a 1-D sequence, got shape {y.shape}")
    if np.isnan(y).any():
        raise InputError(f"observation is NaN at t={int(np.flatnonzero(np.isnan(y))[0])}")
    trellis = params.trellis
    priors = np.asarray(params.symbol_priors, dtype=np.float64)
    if priors.ndim == 2 and priors.shape[0] != y.shape[0]:
        raise InputError(f"{priors.shape[0]} prior rows for {y.shape[0]} observations")

    log_lik = params.emissions.log_likelihood(y)
    with np.errstate(divide="ignore"):
        log_prior = np.log(priors)
    if log_prior.ndim == 1:
        log_prior = np.broadcast_to(log_prior, (y.shape[0], trellis.alphabet_size))
    return log_lik[:, trellis.param_index] + log_prior[:, trellis.input_index]


def forward(log_gamma, trellis: TrellisSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns (log_alpha with T+1 rows, per-row log scale constants).

    Raises InferenceError(t) at the first step where no path survives.
    """
    log_gamma = _check_gamma(log_gamma, trellis)
    T = log_gamma.shape[0]
    log_alpha = np.empty((T + 1, trellis.num_states))
    scales = np.zeros(T)
    with np.errstate(divide="ignore"):
        log_alpha[0] = np.log(trellis.initial_distribution)

    incoming = trellis.incoming
    padded = np.full(trellis.num_edges + 1, -np.inf)
    with np.errstate(invalid="ignore", divide="ignore"):
        for t in range(T):
            padded[:-1] = log_alpha[t, trellis.from_state] + log_gamma[t]
            row = _logsumexp_rows(padded[incoming])
            if not np.isfinite(row.max()):
                raise InferenceError(t)
            log_alpha[t + 1], scales[t] = _rescale(row)
    return log_alpha, scales


def backward(log_gamma, trellis: TrellisSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (log_beta with T+1 rows, per-row log scale constants)."""
    log_gamma = _check_gamma(log_gamma, trellis)
    T = log_gamma.shape[0]
    log_beta = np.empty((T + 1, trellis.num_states))
    scales = np.zeros(T)
    log_beta[T] = trellis.terminal_log_weights

    outgoing = trellis.outgoing
    padded = np.full(trellis.num_edges + 1, -np.inf)
    with np.errstate(invalid="ignore", divide="ignore"):
        for t in range(T - 1, -1, -1):
            padded[:-1] = log_beta[t + 1, trellis.to_state] + log_gamma[t]
            row = _logsumexp_rows(padded[outgoing])
            log_beta[t], scales[t] = _rescale(row)
    return log_beta, scales


def edge_posteriors(log_alpha, log_beta, log_gamma, trellis: TrellisSpec) -> np.ndarray:
    """log p(s_{t-1}, s_t | y) per edge, each row normalised."""
    log_gamma = _check_gamma(log_gamma, trellis)
    T = log_gamma.shape[0]
    if log_alpha.shape != (T + 1, trellis.num_states) or log_beta.shape != (T + 1, trellis.num_states):
        raise InputError("alpha/beta tables do not match log_gamma")
    joint = log_alpha[:-1, trellis.from_state] + log_gamma + log_beta[1:, trellis.to_state]
    with np.errstate(divide="ignore"):
        norm = logsumexp(joint, axis=1, keepdims=True)
    bad = ~np.isfinite(norm[:, 0])
    if bad.any():
        raise InferenceError(int(np.flatnonzero(bad)[0]))
    return joint - norm


def run_bcjr(log_gamma, trellis: TrellisSpec) -> SoftSequence:
    log_gamma = _check_gamma(log_gamma, trellis)
    log_alpha, alpha_scales = forward(log_gamma, trellis)
    log_beta, beta_scales = backward(log_gamma, trellis)
    log_post = edge_posteriors(log_alpha, log_beta, log_gamma, trellis)
    with np.errstate(divide="ignore"):
        tail = logsumexp(log_alpha[-1] + trellis.terminal_log_weights)
    return SoftSequence(
        log_alpha=log_alpha,
        log_beta=log_beta,
        log_edge_posterior=log_post,
        alpha_scales=alpha_scales,
        beta_scales=beta_scales,
        log_evidence=float(alpha_scales.sum() + tail),
    )


def state_posteriors(edge_posterior, trellis: TrellisSpec) -> np.ndarray:
    """p(s_t | y): edge posteriors summed into their destination state."""
    post = np.asarray(edge_posterior, dtype=np.float64)
    return post @ np.eye(trellis.num_states)[trellis.to_state]


def symbol_joint(edge_posterior, trellis: TrellisSpec) -> np.ndarray:
    """p(x_t, y) up to the common normalisation: sum over the edges each symbol drives."""
    post = np.asarray(edge_posterior, dtype=np.float64)
    if post.ndim != 2 or post.shape[1] != trellis.num_edges:
        raise InputError(f"edge posterior must be (T, {trellis.num_edges}), got {post.shape}")
    return post @ trellis.symbol_indicator


def output_joint(edge_posterior, trellis: TrellisSpec) -> np.ndarray:
    """(T, n, 2) table p(c_{t,j} = c, y) for the coded outputs of a code trellis."""
    if trellis.outputs is None:
        raise InputError("trellis has no coded outputs")
    post = np.asarray(edge_posterior, dtype=np.float64)
    ones = post @ trellis.outputs.astype(np.float64)
    zeros = post.sum(axis=1, keepdims=True) - ones
    return np.stack([np.clip(zeros, 0.0, None), ones], axis=2)


def extrinsic_divide(joint, prior, diagnostics: Optional[Diagnostics] = None) -> np.ndarray:
    """
    Divide a prior out of a joint table and renormalise each row.

    Prior entries below PROB_FLOOR are clamped to it; each clamp is counted.
    """
    joint = np.asarray(joint, dtype=np.float64)
    prior = np.broadcast_to(np.asarray(prior, dtype=np.float64), joint.shape)
    low = prior < PROB_FLOOR
    n_low = int(low.sum())
    if n_low:
        logger.debug("clamped %d prior entries below %g", n_low, PROB_FLOOR)
        if diagnostics is not None:
            diagnostics.clamped_divisions += n_low
    ratio = joint / np.where(low, PROB_FLOOR, prior)
    total = ratio.sum(axis=-1, keepdims=True)
    width = joint.shape[-1]
    return np.divide(ratio, total, out=np.full_like(ratio, 1.0 / width), where=total > 0)
