import numpy as np
import pytest

from astrosnn.core import (
    NetworkConfig,
    NeuronParams,
    NeuronState,
    SynapseMatrix,
    instantiate,
    run_window,
    step_network,
    step_neuron,
)
from astrosnn.core import _step_layer
from astrosnn.events import SpikeRaster


def make_raster(counts, bin_width_us=1000):
    counts = np.asarray(counts, dtype=np.int64)
    return SpikeRaster(
        bin_width_us=bin_width_us,
        downsample=1,
        n_cols=counts.shape[1],
        n_rows=1,
        counts=counts,
    )


class TestNeuronParams:
    def test_defaults(self):
        p = NeuronParams()
        assert p.tau_mem_ms == 20.0 and p.v_th == 1.0 and p.refractory_steps == 2

    def test_validation(self):
        with pytest.raises(ValueError):
            NeuronParams(tau_mem_ms=0)
        with pytest.raises(ValueError):
            NeuronParams(v_reset=1.0, v_th=1.0)
        with pytest.raises(ValueError):
            NeuronParams(refractory_steps=-1)


class TestStepNeuron:
    def test_threshold_exactly_reached(self):
        state, spiked = step_neuron(NeuronState(v=0.0), NeuronParams(), 1.0, 1.0)
        assert spiked
        assert state.v == 0.0
        assert state.refractory_remaining == 2

    def test_exponential_decay(self):
        state, spiked = step_neuron(NeuronState(v=0.5), NeuronParams(), 0.0, 1.0)
        assert not spiked
        # closed form: 0.5 * exp(-1/20), evaluated independently
        assert state.v == pytest.approx(0.475614712250357, rel=1e-12)

    def test_silenced_is_frozen(self):
        before = NeuronState(v=0.7, refractory_remaining=1, silenced=True)
        state, spiked = step_neuron(before, NeuronParams(), 99.0, 1.0)
        assert not spiked
        assert state.v == 0.7 and state.refractory_remaining == 1 and state.silenced

    def test_refractory_holds_and_counts_down(self):
        params = NeuronParams(refractory_steps=2)
        state, spiked = step_neuron(NeuronState(v=0.0), params, 5.0, 1.0)
        assert spiked
        seen = []
        for _ in range(3):
            state, spiked = step_neuron(state, params, 5.0, 1.0)
            seen.append((state.v, state.refractory_remaining, spiked))
        # two held steps at v_reset, then integration resumes (and re-fires)
        assert seen[0] == (0.0, 1, False)
        assert seen[1] == (0.0, 0, False)
        assert seen[2][2] is True


class TestInstantiate:
    def test_deterministic(self):
        cfg = NetworkConfig(layer_sizes=(8, 4, 2), seed=123)
        a, b = instantiate(cfg), instantiate(cfg)
        assert np.array_equal(a.w1.weights, b.w1.weights)
        assert np.array_equal(a.w2.weights, b.w2.weights)

    def test_reference_capacity(self):
        cfg = NetworkConfig(layer_sizes=(512, 128, 40))
        assert cfg.neuron_count == 680
        assert cfg.synapse_count == 70656

    def test_invalid_layer_size(self):
        with pytest.raises(ValueError, match="layer size"):
            NetworkConfig(layer_sizes=(4, 0, 2))

    def test_weights_respect_bounds(self):
        state = instantiate(NetworkConfig(layer_sizes=(20, 10, 5), seed=1))
        assert np.all(state.w1.weights >= 0)
        assert np.all(state.w1.weights <= 0.5)


class TestSynapseMatrix:
    def test_bounds_enforced(self):
        with pytest.raises(ValueError, match="outside"):
            SynapseMatrix(np.array([[2.0]]), 0.0, 1.0)
        with pytest.raises(ValueError, match="w_min"):
            SynapseMatrix(np.zeros((1, 1)), 1.0, 0.0)


class TestStepNetwork:
    def test_zero_input_zero_spikes(self):
        state = instantiate(NetworkConfig(layer_sizes=(3, 4, 2), seed=0))
        hidden, output = step_network(state, np.zeros(3))
        assert hidden.sum() == 0 and output.sum() == 0

    def test_zero_weights_no_propagation(self):
        cfg = NetworkConfig(layer_sizes=(3, 4, 2), init_scale_hidden=0.0, seed=0)
        state = instantiate(cfg)
        hidden, _ = step_network(state, np.array([5.0, 0.0, 0.0]))
        assert hidden.sum() == 0
        assert np.all(state.v_hidden == 0.0)

    def test_hand_built_2_2_1(self):
        # unit weights, one input spike drives every layer past threshold
        cfg = NetworkConfig(layer_sizes=(2, 2, 1), seed=0)
        state = instantiate(cfg)
        state.w1.weights[:] = 1.0
        state.w2.weights[:] = 1.0
        hidden, output = step_network(state, np.array([1.0, 0.0]))
        assert hidden.tolist() == [True, True]
        assert output.sum() == 1

    def test_dimension_mismatch(self):
        state = instantiate(NetworkConfig(layer_sizes=(3, 4, 2), seed=0))
        with pytest.raises(ValueError, match="shape"):
            step_network(state, np.zeros(5))

    def test_mac_counter_exact(self):
        cfg = NetworkConfig(layer_sizes=(7, 5, 3), seed=0)
        state = instantiate(cfg)
        for _ in range(13):
            step_network(state, np.zeros(7))
        assert state.mac_count == 13 * (7 * 5 + 5 * 3)
        assert state.step_count == 13


class TestVectorizedMatchesScalar:
    def test_random_states(self):
        rng = np.random.default_rng(99)
        params = NeuronParams(tau_mem_ms=15.0, v_th=0.8, v_reset=-0.1, refractory_steps=3)
        for _ in range(50):
            n = 16
            v = rng.uniform(-1, 1, n)
            refrac = rng.integers(0, 4, n)
            silenced = rng.random(n) < 0.2
            currents = rng.uniform(-0.5, 1.5, n)
            expected = []
            for i in range(n):
                s, spike = step_neuron(
                    NeuronState(v[i], int(refrac[i]), bool(silenced[i])),
                    params,
                    currents[i],
                    1.0,
                )
                expected.append((s.v, s.refractory_remaining, spike))
            v_vec, refrac_vec = v.copy(), refrac.copy().astype(np.int64)
            spikes = _step_layer(v_vec, refrac_vec, currents, params, 1.0, silenced=silenced)
            for i in range(n):
                assert v_vec[i] == expected[i][0]
                assert refrac_vec[i] == expected[i][1]
                assert bool(spikes[i]) == expected[i][2]


class TestInvariants:
    def test_silenced_never_spikes(self):
        cfg = NetworkConfig(layer_sizes=(4, 6, 2), init_scale_hidden=1.0, seed=5)
        state = instantiate(cfg)
        state.silenced_hidden[[1, 4]] = True
        counts = np.zeros(6, dtype=int)
        rng = np.random.default_rng(0)
        for _ in range(200):
            hidden, _ = step_network(state, rng.integers(0, 5, 4))
            counts += hidden
        assert counts[1] == 0 and counts[4] == 0
        assert counts.sum() > 0

    def test_no_spike_while_refractory(self):
        params = NeuronParams(refractory_steps=4)
        state = NeuronState(v=0.0)
        spikes = []
        for _ in range(12):
            state, spiked = step_neuron(state, params, 2.0, 1.0)
            spikes.append(spiked)
            if state.refractory_remaining > 0 and not spiked:
                pass
        # a spike every refractory_steps + 1 steps
        assert spikes == [i % 5 == 0 for i in range(12)]

    def test_subthreshold_linearity_power_of_two(self):
        cfg = NetworkConfig(layer_sizes=(3, 5, 2), init_scale_hidden=0.01, seed=3)
        a, b = instantiate(cfg), instantiate(cfg)
        x = np.array([0.5, 0.25, 0.125])
        for _ in range(20):
            step_network(a, x)
            step_network(b, 2.0 * x)
        assert not np.any(a.v_hidden >= cfg.hidden.v_th)
        assert np.array_equal(b.v_hidden, 2.0 * a.v_hidden)

    def test_subthreshold_linearity_general(self):
        cfg = NetworkConfig(layer_sizes=(3, 5, 2), init_scale_hidden=0.01, seed=3)
        a, b = instantiate(cfg), instantiate(cfg)
        x = np.array([0.5, 0.25, 0.125])
        c = 1.7
        for _ in range(20):
            step_network(a, x)
            step_network(b, c * x)
        np.testing.assert_allclose(b.v_hidden, c * a.v_hidden, rtol=1e-12)

    def test_determinism_across_runs(self):
        cfg = NetworkConfig(layer_sizes=(6, 8, 3), init_scale_hidden=0.2, seed=11)
        raster = make_raster(np.random.default_rng(2).integers(0, 3, (40, 6)))
        results = []
        for _ in range(2):
            state = instantiate(cfg)
            result = run_window(state, raster, (0, 40), record_trains=True)
            results.append(result)
        assert np.array_equal(results[0].output_train, results[1].output_train)
        assert np.array_equal(results[0].hidden_train, results[1].hidden_train)


class TestRunWindow:
    def test_empty_window_rejected(self):
        state = instantiate(NetworkConfig(layer_sizes=(2, 2, 1), seed=0))
        raster = make_raster(np.zeros((5, 2)))
        with pytest.raises(ValueError, match="empty window"):
            run_window(state, raster, (3, 3))

    def test_channel_mismatch(self):
        state = instantiate(NetworkConfig(layer_sizes=(3, 2, 1), seed=0))
        raster = make_raster(np.zeros((5, 2)))
        with pytest.raises(ValueError, match="channels"):
            run_window(state, raster, (0, 5))

    def test_zero_raster_zero_rates(self):
        state = instantiate(NetworkConfig(layer_sizes=(2, 2, 1), seed=0))
        result = run_window(state, make_raster(np.zeros((5, 2))), (0, 5))
        assert result.hidden_counts.sum() == 0
        assert np.all(result.hidden_rates_hz == 0)

    def test_rate_arithmetic(self):
        # no refractory period, constant suprathreshold drive: 1 spike per
        # 1 ms bin over 10 bins -> 1000 Hz
        params = NeuronParams(refractory_steps=0)
        cfg = NetworkConfig(layer_sizes=(1, 1, 1), hidden=params, output=params, seed=0)
        state = instantiate(cfg)
        state.w1.weights[:] = 1.0
        result = run_window(state, make_raster(np.ones((10, 1))), (0, 10))
        assert result.hidden_counts[0] == 10
        assert result.hidden_rates_hz[0] == pytest.approx(1000.0)

    def test_counts_match_single_steps(self):
        cfg = NetworkConfig(layer_sizes=(4, 5, 3), init_scale_hidden=0.5, seed=9)
        raster = make_raster(np.random.default_rng(1).integers(0, 4, (20, 4)))
        whole = run_window(instantiate(cfg), raster, (0, 20))
        state = instantiate(cfg)
        hidden = np.zeros(5, dtype=int)
        output = np.zeros(3, dtype=int)
        for b in range(20):
            h, o = step_network(state, raster.counts[b])
            hidden += h
            output += o
        assert np.array_equal(whole.hidden_counts, hidden)
        assert np.array_equal(whole.output_counts, output)
