import numpy as np
import pytest

from astrosnn.core import NetworkConfig, instantiate, step_network
from astrosnn.perf import (
    BASELINE_MEASUREMENTS,
    PerfReport,
    baseline_reports,
    count_macs,
    emit_comparison,
    operational_latency,
    throughput,
)


class TestCountMacs:
    def test_single_matrix(self):
        assert count_macs((10, 5, 0), 2) == 100

    def test_reference_config(self):
        assert count_macs(NetworkConfig(layer_sizes=(512, 128, 40)), 1) == 70656

    def test_zero_steps(self):
        with pytest.raises(ValueError, match="num_steps"):
            count_macs((10, 5, 2), 0)

    def test_live_counter_agreement(self):
        cfg = NetworkConfig(layer_sizes=(6, 4, 3), seed=0)
        state = instantiate(cfg)
        for _ in range(17):
            step_network(state, np.zeros(6))
        assert state.mac_count == count_macs(cfg, 17)


class TestLatency:
    def test_division(self):
        assert operational_latency(0.046, 10) == pytest.approx(0.0046)

    def test_identity(self):
        assert operational_latency(1.0, 1) == 1.0

    def test_zero_iterations(self):
        with pytest.raises(ValueError, match="loader_iterations"):
            operational_latency(1.0, 0)

    def test_non_positive_time(self):
        with pytest.raises(ValueError, match="inference_time"):
            operational_latency(0.0, 3)


class TestThroughput:
    def test_cpu_row(self):
        assert throughput(int(0.269e9), 0.084) == pytest.approx(3.2e9, abs=0.05e9)

    def test_fpga_row(self):
        assert throughput(int(0.269e9), 0.0046) == pytest.approx(58.5e9, abs=0.1e9)

    def test_zero_macs(self):
        assert throughput(0, 0.5) == 0.0

    def test_bad_latency(self):
        with pytest.raises(ValueError, match="latency"):
            throughput(100, 0.0)

    def test_gpu_row_is_inconsistent(self):
        # the quoted 24.5 GOP/s does not follow from 0.269 G / 11.6 ms
        computed = throughput(int(0.269e9), 0.0116)
        assert computed == pytest.approx(23.19e9, abs=0.01e9)
        assert abs(computed - 24.5e9) > 1e9


class TestPerfReport:
    def test_from_measurement_closure(self):
        report = PerfReport.from_measurement(70656 * 100, 0.25, 5)
        assert report.operational_latency_s == pytest.approx(0.05)
        product = report.throughput_ops_per_s * report.operational_latency_s
        assert product == pytest.approx(report.mac_count, rel=1e-9)

    def test_inconsistent_fields_rejected(self):
        with pytest.raises(ValueError, match="reproduce"):
            PerfReport(
                mac_count=1000,
                inference_time_s=1.0,
                loader_iterations=1,
                operational_latency_s=1.0,
                throughput_ops_per_s=5000.0,
            )

    def test_validation(self):
        with pytest.raises(ValueError):
            PerfReport.from_measurement(-1, 1.0, 1)
        with pytest.raises(ValueError):
            PerfReport.from_measurement(10, 1.0, 0)


class TestComparison:
    def test_single_row(self):
        text, rows = emit_comparison([("only", PerfReport.from_measurement(10**9, 0.5, 1))])
        assert len(rows) == 1
        assert text.splitlines()[0].startswith("name")
        assert "only" in text

    def test_baseline_rows_reproduce_quoted_throughput(self):
        text, rows = emit_comparison(baseline_reports())
        by_name = {r["name"]: r for r in rows}
        assert float(by_name["cpu-i9-12900h"]["throughput_gops"]) == pytest.approx(3.2, abs=0.05)
        assert float(by_name["fpga-vck190"]["throughput_gops"]) == pytest.approx(58.5, abs=0.1)
        assert float(by_name["cpu-i9-12900h"]["macs_g"]) == pytest.approx(0.269)
        assert float(by_name["cpu-i9-12900h"]["latency_ms"]) == pytest.approx(84.0)

    def test_duplicate_names_rejected(self):
        report = PerfReport.from_measurement(10**9, 0.5, 1)
        with pytest.raises(ValueError, match="unique"):
            emit_comparison([("a", report), ("a", report)])

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            emit_comparison([])

    def test_deterministic_text(self):
        reports = baseline_reports()
        assert emit_comparison(reports)[0] == emit_comparison(reports)[0]

    def test_baseline_constants(self):
        assert set(BASELINE_MEASUREMENTS) == {"cpu-i9-12900h", "fpga-vck190"}
