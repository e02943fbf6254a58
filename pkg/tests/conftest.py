"""Shared fixtures and brute-force oracles for the inference tests."""

import itertools

import numpy as np
import pytest

from turbobw.bcjr import branch_metrics
from turbobw.trellis import EdgeGaussianTable, HmmParams


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def next_edge_table(trellis):
    return {(int(f), int(u)): e for e, (f, u) in enumerate(zip(trellis.from_state, trellis.input_index))}


def enumerate_paths(trellis, log_gamma):
    """
    Exhaustive sum over every start state and input sequence.

    Returns a dict with the normalised edge posteriors, the log-evidence,
    the unscaled forward values of the last step (alpha_T) and the unscaled
    backward values of the first step (beta_0).
    """
    log_gamma = np.asarray(log_gamma, dtype=np.float64)
    T = log_gamma.shape[0]
    nxt = next_edge_table(trellis)
    terminal = np.exp(trellis.terminal_log_weights)
    edge_mass = np.zeros((T, trellis.num_edges))
    alpha_T = np.zeros(trellis.num_states)
    beta_0 = np.zeros(trellis.num_states)
    total = 0.0
    for s0 in range(trellis.num_states):
        for inputs in itertools.product(range(trellis.alphabet_size), repeat=T):
            s = s0
            weight = 1.0
            path = []
            for t, u in enumerate(inputs):
                e = nxt[(s, u)]
                weight *= np.exp(log_gamma[t, e])
                path.append(e)
                s = int(trellis.to_state[e])
            beta_0[s0] += weight * terminal[s]
            weight *= trellis.initial_distribution[s0]
            alpha_T[s] += weight
            weight *= terminal[s]
            total += weight
            for t, e in enumerate(path):
                edge_mass[t, e] += weight
    return {
        "edge_posterior": edge_mass / total,
        "log_evidence": float(np.log(total)),
        "alpha_T": alpha_T,
        "beta_0": beta_0,
    }


def random_log_gamma(trellis, rng, T, variance=0.5):
    """Branch metrics of a random Gaussian model on random observations."""
    means = rng.normal(size=trellis.num_params)
    emissions = EdgeGaussianTable.with_common_variance(means, variance)
    y = rng.normal(size=T)
    priors = rng.dirichlet([2.0, 2.0], size=T)
    return branch_metrics(y, HmmParams(trellis, emissions, priors))


def codebook_posteriors(code, coded_table):
    """
    Info-bit posteriors by enumerating every terminated codeword.

    ``coded_table`` holds p(y | c_k = 0/1) per coded bit.
    """
    table = np.asarray(coded_table, dtype=np.float64)
    n_info = table.shape[0] // code.n_outputs - code.constraint_registers
    info_mass = np.zeros((n_info, 2))
    coded_mass = np.zeros((table.shape[0], 2))
    for bits in itertools.product((0, 1), repeat=n_info):
        codeword = code.encode(np.array(bits))
        weight = float(np.prod(table[np.arange(codeword.size), codeword]))
        info_mass[np.arange(n_info), list(bits)] += weight
        coded_mass[np.arange(codeword.size), codeword] += weight
    total = info_mass[0].sum()
    return info_mass / total, coded_mass / total
