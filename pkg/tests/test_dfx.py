import numpy as np
import pytest

from astrosnn.astro import AstroParams
from astrosnn.core import NetworkConfig
from astrosnn.dfx import AdaptiveSchedule, adaptive_loop, probe_fault_set
from astrosnn.events import SpikeRaster
from astrosnn.runtime import SimulationRuntime


def make_raster(counts, bin_width_us=1000):
    counts = np.asarray(counts, dtype=np.int64)
    return SpikeRaster(
        bin_width_us=bin_width_us,
        downsample=1,
        n_cols=counts.shape[1],
        n_rows=1,
        counts=counts,
    )


def small_setup(n_bins=200, seed=4, scale=0.25):
    cfg = NetworkConfig(layer_sizes=(3, 6, 2), init_scale_hidden=scale, init_scale_output=0.8, seed=seed)
    raster = make_raster(np.random.default_rng(seed).integers(0, 3, (n_bins, 3)))
    astro = AstroParams(enabled=True, eta=0.25, target_rate_hz=60.0, window_ms=20.0, group_size=3)
    return cfg, raster, astro


class TestSwapQueue:
    def test_request_and_depth(self):
        cfg, raster, astro = small_setup()
        rt = SimulationRuntime(cfg, astro, raster)
        req = rt.request_swap({"astro.eta": 0.5})
        assert req.request_id == 1
        assert rt.queue_depth == 1

    def test_non_swappable_key_rejected(self):
        cfg, raster, astro = small_setup()
        rt = SimulationRuntime(cfg, astro, raster)
        with pytest.raises(ValueError, match="non-swappable"):
            rt.request_swap({"network.layer_sizes": (1, 1, 1)})
        with pytest.raises(ValueError, match="empty"):
            rt.request_swap({})

    def test_terminated_runtime_rejects(self):
        cfg, raster, astro = small_setup(n_bins=40)
        rt = SimulationRuntime(cfg, astro, raster)
        rt.run()
        with pytest.raises(RuntimeError, match="terminated"):
            rt.request_swap({"astro.eta": 0.5})

    def test_fifo_one_per_boundary(self):
        cfg, raster, astro = small_setup(n_bins=200)
        rt = SimulationRuntime(cfg, astro, raster)
        for eta in (0.30, 0.35, 0.40):
            rt.request_swap({"astro.eta": eta})
        result = rt.run()
        assert [rid for _, rid in result.applied_swaps] == [1, 2, 3]
        windows = [w for w, _ in result.applied_swaps]
        assert windows == sorted(windows)
        assert len(set(windows)) == 3  # one application per boundary
        assert rt.astro.eta == 0.40

    def test_apply_pending_empty_queue_is_noop(self):
        cfg, raster, astro = small_setup()
        rt = SimulationRuntime(cfg, astro, raster)
        before = rt.hyperparams()
        assert rt.apply_pending() == before


class TestSwapSemantics:
    def test_identity_swap_bit_exact(self):
        cfg, raster, astro = small_setup(n_bins=400)
        plain = SimulationRuntime(cfg, astro, raster, record_trains=True).run()
        rt = SimulationRuntime(cfg, astro, raster, record_trains=True)
        identity = {"astro.eta": astro.eta, "astro.target_rate_hz": astro.target_rate_hz}
        for _ in range(5):
            rt.request_swap(dict(identity))
        swapped = rt.run()
        assert len(swapped.applied_swaps) == 5
        assert np.array_equal(swapped.output_train, plain.output_train)
        assert np.array_equal(swapped.output_counts, plain.output_counts)

    def test_event_conservation_across_swaps(self):
        cfg, raster, astro = small_setup(n_bins=300)
        plain = SimulationRuntime(cfg, astro, raster).run()
        rt = SimulationRuntime(cfg, astro, raster)
        rt.request_swap({"astro.eta": 0.05})
        rt.request_swap({"astro.window_ms": 40.0})
        swapped = rt.run()
        assert swapped.events_consumed == plain.events_consumed
        assert swapped.events_consumed == int(np.abs(raster.counts).sum())

    def test_divergence_only_after_boundary(self):
        cfg, raster, astro = small_setup(n_bins=400)
        plain = SimulationRuntime(cfg, astro, raster, record_trains=True)
        plain_result = plain.run()
        rt = SimulationRuntime(cfg, astro, raster, record_trains=True)
        boundary_window = 5  # swap lands at the end of window index 5
        rt.run(max_windows=boundary_window + 1)
        rt.request_swap({"astro.eta": 0.9})
        rt.apply_pending()
        swapped = rt.run()
        window_bins = 20
        split = (boundary_window + 1) * window_bins
        assert np.array_equal(
            swapped.output_train[:split], plain_result.output_train[:split]
        )
        assert not np.array_equal(swapped.output_train, plain_result.output_train)

    def test_atomicity_via_window_hashes(self):
        cfg, raster, astro = small_setup(n_bins=200)
        rt = SimulationRuntime(cfg, astro, raster)
        rt.request_swap({"astro.eta": 0.5})
        result = rt.run()
        hashes = result.window_hashes
        assert len(set(hashes)) == 2
        first_new = hashes.index(hashes[-1])
        assert all(h == hashes[0] for h in hashes[:first_new])
        assert all(h == hashes[-1] for h in hashes[first_new:])

    def test_neuron_param_swap(self):
        cfg, raster, astro = small_setup()
        rt = SimulationRuntime(cfg, astro, raster)
        rt.request_swap({"network.hidden.v_th": 0.7})
        rt.run(max_windows=1)
        assert rt.config.hidden.v_th == 0.7
        assert rt.state.config.hidden.v_th == 0.7


class TestAdaptiveLoop:
    def test_singleton_grid_single_round(self):
        cfg, raster, astro = small_setup(n_bins=300)
        schedule = AdaptiveSchedule(
            grid={"astro.eta": (0.25,)}, boundary_ms=20.0, max_rounds=5, probe_faults=2
        )
        report = adaptive_loop(cfg, astro, raster, schedule)
        assert len(report.rounds) == 1
        assert report.best_overlay == {"astro.eta": 0.25}

    def test_plateau_stops_after_round_one(self):
        # saturated hidden layer: spiking is refractory-limited, so the
        # membrane time constant has no effect and the objective is flat
        cfg = NetworkConfig(layer_sizes=(3, 4, 2), init_scale_hidden=1.0, init_scale_output=0.9, seed=2)
        raster = make_raster(np.full((200, 3), 4))
        astro = AstroParams(enabled=False, eta=0.25, target_rate_hz=50.0, window_ms=20.0, group_size=4)
        schedule = AdaptiveSchedule(
            grid={"network.hidden.tau_mem_ms": (20.0, 25.0)},
            boundary_ms=20.0,
            max_rounds=6,
            probe_faults=2,
        )
        report = adaptive_loop(cfg, astro, raster, schedule)
        assert len(report.rounds) == 1
        assert report.best_overlay == {"network.hidden.tau_mem_ms": 20.0}
        objectives = set(report.evaluations.values())
        assert len(objectives) == 1

    def test_two_point_eta_grid_prefers_astro(self):
        cfg, raster, astro = small_setup(n_bins=600, scale=0.02)
        schedule = AdaptiveSchedule(
            grid={"astro.eta": (0.0, 0.25)}, boundary_ms=20.0, max_rounds=6, probe_faults=2
        )
        report = adaptive_loop(cfg, astro, raster, schedule)
        assert len(report.evaluations) == 2  # greedy visited the whole grid
        assert report.rounds[0].overlay == {"astro.eta": 0.0}
        assert report.best_overlay == {"astro.eta": 0.25}
        assert len(report.applied_swaps) == 1

    def test_boundary_below_window_rejected(self):
        cfg, raster, astro = small_setup()
        schedule = AdaptiveSchedule(grid={"astro.eta": (0.1,)}, boundary_ms=5.0)
        with pytest.raises(ValueError, match="boundary_ms"):
            adaptive_loop(cfg, astro, raster, schedule)

    def test_schedule_validation(self):
        with pytest.raises(ValueError, match="grid"):
            AdaptiveSchedule(grid={})
        with pytest.raises(ValueError, match="swappable"):
            AdaptiveSchedule(grid={"network.layer_sizes": ((1, 1, 1),)})
        with pytest.raises(ValueError, match="at least one value"):
            AdaptiveSchedule(grid={"astro.eta": ()})

    def test_probe_set_is_deterministic(self):
        cfg = NetworkConfig(layer_sizes=(4, 16, 2))
        probes = probe_fault_set(cfg, 4)
        assert [p.target for p in probes] == [0, 4, 8, 12]
        assert all(p.kind == "silence_neuron" for p in probes)

    def test_zero_output_objective_aborts(self):
        cfg = NetworkConfig(layer_sizes=(3, 4, 2), init_scale_hidden=0.0, seed=2)
        raster = make_raster(np.ones((100, 3)))
        astro = AstroParams(enabled=True, window_ms=20.0)
        schedule = AdaptiveSchedule(grid={"astro.eta": (0.0,)}, boundary_ms=20.0)
        with pytest.raises(ValueError, match="objective undefined"):
            adaptive_loop(cfg, astro, raster, schedule)
