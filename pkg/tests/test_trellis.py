"""Trellis construction, HMM containers and the reduced <-> conventional mapping."""

import numpy as np
import pytest

from turbobw.errors import ConfigError, InputError
from turbobw.trellis import (
    EdgeGaussianTable,
    HmmParams,
    build_conv_trellis,
    build_isi_trellis_conventional,
    build_isi_trellis_reduced,
    check_prob_table,
    edge_posterior_to_state_posterior,
    param_symbol_tuples,
    parse_generator,
    state_mapping,
    state_posterior_to_edge_posterior,
)


class TestConventionalTrellis:
    @pytest.mark.parametrize("L, states, edges", [(1, 2, 4), (2, 4, 8), (3, 8, 16)])
    def test_sizes(self, L, states, edges):
        trellis = build_isi_trellis_conventional(L)
        assert trellis.num_states == states
        assert trellis.num_edges == edges
        assert trellis.num_params == states

    def test_edges_shift_in_the_new_symbol(self):
        trellis = build_isi_trellis_conventional(2)
        expected = {(s, ((s << 1) | u) & 3, u, ((s << 1) | u) & 3) for s in range(4) for u in range(2)}
        assert set(trellis.edges) == expected

    def test_params_follow_destination_state(self):
        trellis = build_isi_trellis_conventional(3)
        np.testing.assert_array_equal(trellis.param_index, trellis.to_state)

    def test_every_state_has_full_in_and_out_degree(self):
        trellis = build_isi_trellis_conventional(3)
        assert np.all(np.bincount(trellis.to_state) == 2)
        assert np.all(np.bincount(trellis.from_state) == 2)
        assert np.all(trellis.incoming < trellis.num_edges)

    def test_initial_distribution_uniform(self):
        trellis = build_isi_trellis_conventional(2)
        np.testing.assert_allclose(trellis.initial_distribution, 0.25)

    @pytest.mark.parametrize("L", [0, -1, 1.5])
    def test_rejects_bad_memory(self, L):
        with pytest.raises(ConfigError):
            build_isi_trellis_conventional(L)

    def test_rejects_non_binary_alphabet(self):
        with pytest.raises(ConfigError) as info:
            build_isi_trellis_conventional(2, alphabet_size=4)
        assert info.value.key == "alphabet_size"

    def test_deterministic(self):
        a = build_isi_trellis_conventional(3)
        b = build_isi_trellis_conventional(3)
        assert a.edges == b.edges

    def test_arrays_are_read_only(self):
        trellis = build_isi_trellis_conventional(2)
        with pytest.raises(ValueError):
            trellis.to_state[0] = 1


class TestReducedTrellis:
    @pytest.mark.parametrize("L, states, edges", [(1, 1, 2), (2, 2, 4), (3, 4, 8), (4, 8, 16)])
    def test_sizes(self, L, states, edges):
        trellis = build_isi_trellis_reduced(L)
        assert trellis.num_states == states
        assert trellis.num_edges == edges
        assert trellis.num_params == edges

    def test_one_parameter_per_edge(self):
        trellis = build_isi_trellis_reduced(3)
        np.testing.assert_array_equal(np.sort(trellis.param_index), np.arange(trellis.num_edges))

    def test_same_parameter_count_as_conventional(self):
        for L in (1, 2, 3, 4):
            assert build_isi_trellis_reduced(L).num_params == build_isi_trellis_conventional(L).num_params

    def test_edge_label_is_full_symbol_tuple(self):
        """from_state carries the older L-1 symbols, the input is x_t."""
        trellis = build_isi_trellis_reduced(3)
        np.testing.assert_array_equal(trellis.input_index, trellis.param_index & 1)
        np.testing.assert_array_equal(trellis.from_state, trellis.param_index >> 1)
        np.testing.assert_array_equal(trellis.to_state, trellis.param_index & 3)

    def test_rejects_zero_memory(self):
        with pytest.raises(ConfigError):
            build_isi_trellis_reduced(0)


class TestConvTrellis:
    def test_75_code_shape(self):
        trellis = build_conv_trellis((0o7, 0o5), 2)
        assert trellis.num_states == 4
        assert trellis.num_edges == 8
        assert trellis.outputs.shape == (8, 2)
        assert trellis.terminated
        np.testing.assert_array_equal(np.bincount(trellis.input_index), [4, 4])

    def test_75_code_outputs(self):
        """From state 0 input 1 emits (1, 1); from state 0 input 0 emits (0, 0)."""
        trellis = build_conv_trellis((0o7, 0o5), 2)
        for e, edge in enumerate(trellis.edges):
            if edge.from_state == 0:
                expected = [1, 1] if edge.input_symbol_index == 1 else [0, 0]
                np.testing.assert_array_equal(trellis.outputs[e], expected)

    def test_uncoded_generator(self):
        trellis = build_conv_trellis((1,), 0)
        assert trellis.num_states == 1
        np.testing.assert_array_equal(trellis.outputs[:, 0], trellis.input_index)

    def test_starts_and_ends_in_zero_state(self):
        trellis = build_conv_trellis((0o7, 0o5), 2)
        np.testing.assert_array_equal(trellis.initial_distribution, [1, 0, 0, 0])
        assert trellis.terminal_log_weights[0] == 0.0
        assert np.all(np.isneginf(trellis.terminal_log_weights[1:]))

    def test_empty_generators(self):
        with pytest.raises(ConfigError) as info:
            build_conv_trellis((), 2)
        assert info.value.key == "generators"

    def test_generator_too_wide(self):
        with pytest.raises(ConfigError):
            build_conv_trellis((0o17,), 2)

    @pytest.mark.parametrize("text, value", [("7", 7), ("5", 5), ("0o15", 13), (" 17 ", 15), (0o7, 7)])
    def test_parse_generator_octal(self, text, value):
        assert parse_generator(text) == value

    def test_parse_generator_rejects_non_octal(self):
        with pytest.raises(ConfigError):
            parse_generator("9")


class TestTrellisInvariants:
    @pytest.mark.parametrize(
        "builder",
        [
            lambda: build_isi_trellis_conventional(3),
            lambda: build_isi_trellis_reduced(3),
            lambda: build_conv_trellis((0o7, 0o5), 2),
        ],
    )
    def test_transition_rows_sum_to_one(self, builder, rng):
        trellis = builder()
        prior = rng.dirichlet([1.0, 1.0])
        matrix = trellis.transition_matrix(prior)
        np.testing.assert_allclose(matrix.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(matrix >= 0)

    def test_transition_matrix_rejects_bad_prior(self):
        with pytest.raises(InputError):
            build_isi_trellis_reduced(2).transition_matrix([1.0, 0.0, 0.0])

    def test_padded_tables_cover_each_edge_once(self):
        trellis = build_isi_trellis_reduced(3)
        for table in (trellis.incoming, trellis.outgoing):
            real = table[table < trellis.num_edges]
            np.testing.assert_array_equal(np.sort(real), np.arange(trellis.num_edges))

    def test_indicators(self):
        trellis = build_isi_trellis_reduced(2)
        np.testing.assert_allclose(trellis.symbol_indicator.sum(axis=1), 1.0)
        np.testing.assert_allclose(trellis.param_indicator.sum(axis=0), 1.0)


class TestSymbolTuples:
    def test_memory_two(self):
        tuples = param_symbol_tuples(build_isi_trellis_reduced(2))
        np.testing.assert_array_equal(tuples, [[1, 1], [-1, 1], [1, -1], [-1, -1]])

    def test_conventional_and_reduced_agree(self):
        np.testing.assert_array_equal(
            param_symbol_tuples(build_isi_trellis_reduced(3)),
            param_symbol_tuples(build_isi_trellis_conventional(3)),
        )

    def test_code_trellis_has_no_tuples(self):
        with pytest.raises(ConfigError):
            param_symbol_tuples(build_conv_trellis((0o7, 0o5), 2))


class TestPosteriorMapping:
    def setup_method(self):
        self.reduced = build_isi_trellis_reduced(3)
        self.conventional = build_isi_trellis_conventional(3)
        self.mapping = state_mapping(self.reduced, self.conventional)

    def test_mapping_is_a_bijection(self):
        np.testing.assert_array_equal(np.sort(self.mapping), np.arange(self.conventional.num_states))

    def test_uniform_stays_uniform(self):
        post = np.full((5, 8), 1.0 / 8)
        np.testing.assert_allclose(edge_posterior_to_state_posterior(post, self.mapping), 1.0 / 8)

    def test_one_hot_lands_on_mapped_state(self):
        post = np.zeros((1, 8))
        post[0, 5] = 1.0
        out = edge_posterior_to_state_posterior(post, self.mapping)
        assert out[0, self.mapping[5]] == 1.0
        assert out.sum() == 1.0

    def test_both_directions_invert(self, rng):
        post = rng.dirichlet(np.ones(8), size=6)
        states = edge_posterior_to_state_posterior(post, self.mapping)
        np.testing.assert_array_equal(state_posterior_to_edge_posterior(states, self.mapping), post)

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            edge_posterior_to_state_posterior(np.ones((2, 4)), self.mapping)

    def test_memory_mismatch(self):
        with pytest.raises(InputError):
            state_mapping(build_isi_trellis_reduced(2), self.conventional)


class TestContainers:
    def test_variance_floor(self):
        table = EdgeGaussianTable([0.0, 1.0], [0.0, 2.0])
        np.testing.assert_allclose(table.variances, [1e-6, 2.0])

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            EdgeGaussianTable([0.0, 1.0], [1.0])

    def test_log_likelihood_peak(self):
        table = EdgeGaussianTable.with_common_variance([0.5, -0.5], 0.25)
        ll = table.log_likelihood([0.5])
        assert ll[0, 0] == pytest.approx(-0.5 * np.log(2 * np.pi * 0.25))
        assert ll[0, 1] < ll[0, 0]

    def test_hmm_params_default_priors(self):
        trellis = build_isi_trellis_reduced(2)
        params = HmmParams(trellis, EdgeGaussianTable.with_common_variance(np.zeros(4), 1.0))
        np.testing.assert_allclose(params.symbol_priors, [0.5, 0.5])

    def test_hmm_params_param_count(self):
        with pytest.raises(InputError):
            HmmParams(build_isi_trellis_reduced(2), EdgeGaussianTable.with_common_variance(np.zeros(3), 1.0))

    def test_hmm_params_rejects_unnormalised_priors(self):
        trellis = build_isi_trellis_reduced(2)
        with pytest.raises(InputError):
            HmmParams(trellis, EdgeGaussianTable.with_common_variance(np.zeros(4), 1.0), [0.7, 0.7])

    def test_check_prob_table(self):
        assert check_prob_table([[0.2, 0.8]], 2).shape == (1, 2)
        with pytest.raises(InputError):
            check_prob_table([[-0.2, 1.2]], 2)
        with pytest.raises(InputError):
            check_prob_table([[0.5, 0.5, 0.0]], 2)
