# turbobw/baum_welch.py
"""
Baum-Welch learning of the Gaussian emission parameters.

The same code serves the conventional estimator (parameters tied to states)
and the modified one (parameters tied to edges of the reduced trellis): the
E-step always returns responsibilities per param_index, which for the
conventional trellis are the state posteriors and for the reduced trellis the
edge posteriors. Transition probabilities are never learned; they are the
symbol priors handed in by the caller.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .bcjr import Diagnostics, branch_metrics, run_bcjr
from .constants import OCCUPANCY_FLOOR, VARIANCE_FLOOR
from .errors import ConfigError, InputError
from .trellis import EdgeGaussianTable, HmmParams, TrellisSpec

logger = logging.getLogger(__name__)

VARIANCE_FIXED = "fixed_true"
VARIANCE_ESTIMATED = "estimated"
VARIANCE_MODES = (VARIANCE_FIXED, VARIANCE_ESTIMATED)


@dataclass
class InitSpec:
    """
    Initial emissions: true noiseless outputs plus uniform error on [-eps, +eps].

    ``noise_variance`` is the known sigma_w^2 used for every parameter's
    starting variance (and kept fixed in ``fixed_true`` mode).
    """

    true_means: Optional[np.ndarray]
    perturbation_magnitude: float = 0.2
    variance_mode: str = VARIANCE_FIXED
    rng_seed: int = 0
    noise_variance: float = 1.0

    def __post_init__(self):
        if self.perturbation_magnitude < 0:
            raise ConfigError(f"must be >= 0, got {self.perturbation_magnitude}", key="init_error")
        if self.variance_mode not in VARIANCE_MODES:
            raise ConfigError(f"expected one of {VARIANCE_MODES}, got {self.variance_mode!r}", key="variance_mode")

    def initial_emissions(self, num_params: int) -> EdgeGaussianTable:
        if self.true_means is None:
            base = np.zeros(num_params)
        else:
            base = np.asarray(self.true_means, dtype=np.float64)
            if base.shape != (num_params,):
                raise InputError(f"{base.shape[0]} reference means for {num_params} parameters")
        rng = np.random.default_rng(self.rng_seed)
        eps = self.perturbation_magnitude
        means = base + rng.uniform(-eps, eps, size=num_params)
        return EdgeGaussianTable.with_common_variance(means, self.noise_variance)


@dataclass
class EmIteration:
    means: np.ndarray
    variances: np.ndarray
    log_evidence: float
    mse: Optional[float] = None


@dataclass
class EmEstimate:
    emissions: EdgeGaussianTable
    history: List[EmIteration] = field(default_factory=list)
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def log_evidence(self) -> np.ndarray:
        return np.array([h.log_evidence for h in self.history])

    @property
    def mse(self) -> np.ndarray:
        return np.array([np.nan if h.mse is None else h.mse for h in self.history])


def e_step(observations, params: HmmParams) -> Tuple[np.ndarray, float]:
    """(T, num_params) responsibilities and the log-evidence of the current parameters."""
    log_gamma = branch_metrics(observations, params)
    soft = run_bcjr(log_gamma, params.trellis)
    return soft.edge_posterior @ params.trellis.param_indicator, soft.log_evidence


def _occupancy(responsibilities: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    occupancy = responsibilities.sum(axis=0)
    active = occupancy >= OCCUPANCY_FLOOR * responsibilities.shape[0]
    return occupancy, active


def _check(observations, responsibilities) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(observations, dtype=np.float64)
    r = np.asarray(responsibilities, dtype=np.float64)
    if y.ndim != 1 or r.ndim != 2 or r.shape[0] != y.shape[0]:
        raise InputError(f"responsibilities {r.shape} do not match {y.shape[0]} observations")
    return y, r


def m_step_means(
    observations,
    responsibilities,
    previous=None,
    diagnostics: Optional[Diagnostics] = None,
) -> np.ndarray:
    """mu_l = sum_t r_t(l) y_t / sum_t r_t(l); starved parameters keep ``previous`` (0 if absent)."""
    y, r = _check(observations, responsibilities)
    occupancy, active = _occupancy(r)
    means = np.zeros(r.shape[1]) if previous is None else np.array(previous, dtype=np.float64)
    means[active] = (r[:, active].T @ y) / occupancy[active]
    _report_skipped(~active, "mean", diagnostics)
    return means


def m_step_variances(
    observations,
    responsibilities,
    updated_means,
    previous=None,
    variance_floor: float = VARIANCE_FLOOR,
    diagnostics: Optional[Diagnostics] = None,
) -> np.ndarray:
    """sigma_l^2 = sum_t r_t(l) (y_t - mu_l)^2 / sum_t r_t(l), floored."""
    y, r = _check(observations, responsibilities)
    mu = np.asarray(updated_means, dtype=np.float64)
    occupancy, active = _occupancy(r)
    variances = np.ones(r.shape[1]) if previous is None else np.array(previous, dtype=np.float64)
    sq = (y[:, None] - mu[None, :]) ** 2
    variances[active] = (r[:, active] * sq[:, active]).sum(axis=0) / occupancy[active]
    _report_skipped(~active, "variance", diagnostics)
    return np.maximum(variances, variance_floor)


def _report_skipped(skipped: np.ndarray, what: str, diagnostics: Optional[Diagnostics]):
    n = int(skipped.sum())
    if not n:
        return
    logger.debug("%s update skipped for params %s (low occupancy)", what, np.flatnonzero(skipped).tolist())
    if diagnostics is not None:
        diagnostics.skipped_updates += n


def run_em(
    observations,
    trellis: TrellisSpec,
    init: InitSpec,
    priors=None,
    n_iters: int = 1,
    emissions: Optional[EdgeGaussianTable] = None,
    truth=None,
) -> EmEstimate:
    """
    Alternate E and M steps ``n_iters`` times.

    ``emissions`` overrides the starting point drawn from ``init`` (used for
    warm starts across turbo iterations). ``truth`` holds the noiseless output
    per parameter and turns on MSE tracking.
    """
    if n_iters < 1:
        raise ConfigError(f"must be >= 1, got {n_iters}", key="n_iters")
    current = emissions.copy() if emissions is not None else init.initial_emissions(trellis.num_params)
    y = np.asarray(observations, dtype=np.float64)
    estimate = EmEstimate(emissions=current)

    for it in range(n_iters):
        params = HmmParams(trellis=trellis, emissions=current, symbol_priors=priors)
        responsibilities, log_evidence = e_step(y, params)
        means = m_step_means(y, responsibilities, current.means, estimate.diagnostics)
        variances = current.variances
        if init.variance_mode == VARIANCE_ESTIMATED:
            variances = m_step_variances(
                y, responsibilities, means, current.variances, current.variance_floor, estimate.diagnostics
            )
        current = EdgeGaussianTable(means, variances, current.variance_floor)
        mse = channel_mse(means, truth) if truth is not None else None
        estimate.history.append(EmIteration(means.copy(), current.variances.copy(), log_evidence, mse))
        logger.debug("EM iteration %d: log-evidence %.6f mse %s", it + 1, log_evidence, mse)

    if estimate.diagnostics.skipped_updates:
        logger.warning(
            "%d parameter updates skipped for low occupancy over %d iterations",
            estimate.diagnostics.skipped_updates,
            n_iters,
        )
    estimate.emissions = current
    return estimate


def channel_mse(estimated_means, true_noiseless_outputs) -> float:
    """Mean over parameters of (mu_l - z_l)^2."""
    est = np.asarray(estimated_means, dtype=np.float64)
    ref = np.asarray(true_noiseless_outputs, dtype=np.float64)
    if est.shape != ref.shape:
        raise InputError(f"length mismatch: {est.shape} vs {ref.shape}")
    return float(np.mean((est - ref) ** 2))
