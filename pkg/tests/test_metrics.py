"""Metric definitions, exactness, export/import round-trips."""

import csv
import json

import pytest

from sfcsim.engine import CompletionRecord, DropRecord
from sfcsim.metrics import MetricsBundle, MetricsError, import_summary, nearest_rank_p95


def completed(bundle, tag, name, e2e, deadline=10_000):
    bundle.record_completion(CompletionRecord(tag, name, e2e), deadline)


class TestCounting:
    def test_all_accepted(self):
        b = MetricsBundle()
        for i in range(10):
            b.record_generated("CG")
            completed(b, i, "CG", 100)
        assert b.acceptance_ratio() == 1.0

    def test_mixed_ratio_is_exact(self):
        b = MetricsBundle()
        for name, accept in (("CG", 5), ("VoIP", 5)):
            for i in range(10):
                b.record_generated(name)
        for i in range(5):
            completed(b, i, "CG", 100)
            completed(b, 100 + i, "VoIP", 100)
        for i in range(5):
            b.record_drop(DropRecord(200 + i, "CG", 1, 1))
            b.record_drop(DropRecord(300 + i, "VoIP", 1, 1))
        assert b.acceptance_ratio() == 0.5
        assert b.per_type_ratio() == {"CG": 0.5, "VoIP": 0.5}
        b.check_conservation()

    def test_big_mixed_bundle(self):
        gen = {"CG": 40, "AugR": 2, "VoIP": 150, "VS": 60, "MIoT": 12, "Ind4.0": 3}
        acc = {"CG": 40, "AugR": 1, "VoIP": 150, "VS": 60, "MIoT": 8, "Ind4.0": 1}
        b = MetricsBundle()
        tag = 0
        for name, n in gen.items():
            for i in range(n):
                b.record_generated(name)
                if i < acc[name]:
                    completed(b, tag, name, 50)
                else:
                    b.record_drop(DropRecord(tag, name, 9, 0))
                tag += 1
        assert b.total_generated() == 267
        assert b.total_accepted() == 260
        assert b.acceptance_ratio() == 260 / 267
        b.check_conservation()

    def test_double_finalization_trapped(self):
        b = MetricsBundle()
        b.record_generated("CG")
        completed(b, 0, "CG", 10)
        with pytest.raises(MetricsError):
            completed(b, 0, "CG", 10)
        with pytest.raises(MetricsError):
            b.record_drop(DropRecord(0, "CG", 1, 0))

    def test_late_completion_rejected(self):
        b = MetricsBundle()
        b.record_generated("MIoT")
        with pytest.raises(MetricsError):
            b.record_completion(CompletionRecord(0, "MIoT", 501), 500)

    def test_no_requests(self):
        b = MetricsBundle()
        assert b.acceptance_ratio() is None
        assert b.summary_dict()["no_requests"] is True


class TestE2eStats:
    def test_stats_cover_accepted_only(self):
        b = MetricsBundle()
        for i in range(4):
            b.record_generated("CG")
        for i, e2e in enumerate([100, 300, 200]):
            completed(b, i, "CG", e2e)
        b.record_drop(DropRecord(9, "CG", 1, 2))
        stats = b.e2e_stats_ms()["CG"]
        assert stats["count"] == 3
        assert stats["mean_ms"] == pytest.approx(2.0)
        assert stats["median_ms"] == pytest.approx(2.0)

    def test_p95_nearest_rank(self):
        values = list(range(1, 101))
        assert nearest_rank_p95(values) == 95
        assert nearest_rank_p95([7]) == 7
        assert nearest_rank_p95([1, 2]) == 2
        assert nearest_rank_p95([]) is None


class TestResourceSampling:
    class FakeDc:
        def __init__(self, dc_id, storage, compute):
            self.dc_id = dc_id
            self._s, self._c = storage, compute

        def storage_used_frac(self):
            return self._s

        def compute_used_frac(self):
            return self._c

    def test_rows_and_means(self):
        b = MetricsBundle()
        dcs = [self.FakeDc(0, 0.0, 0.0), self.FakeDc(1, 0.5, 0.25)]
        b.sample_resources(0, dcs)
        b.sample_resources(1500, dcs)
        assert len(b.resource_rows) == 4
        assert [r[0] for r in b.resource_rows] == [0, 0, 1500, 1500]
        means = b.mean_resource_fracs()
        assert means["1"]["storage"] == 0.5
        assert means["all"]["compute"] == pytest.approx((0 + 0.25) / 2)


class TestExport:
    def fill(self, b):
        b.config_hash = "cafe"
        b.seed = 7
        for i in range(3):
            b.record_generated("CG")
        completed(b, 0, "CG", 120)
        completed(b, 1, "CG", 80)
        b.record_drop(DropRecord(2, "CG", 5, 1))
        b.sample_resources(0, [self_dc := TestResourceSampling.FakeDc(0, 0.1, 0.2)])

    def test_export_files_and_roundtrip(self, tmp_path):
        b = MetricsBundle()
        self.fill(b)
        paths = b.export(str(tmp_path))
        with open(paths["acceptance"]) as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["sfc_type"] == "CG"
        assert rows[0]["generated"] == "3"
        assert rows[0]["accepted"] == "2"
        summary = import_summary(paths["summary"])
        assert summary["acceptance_ratio"] == b.acceptance_ratio()
        assert summary["generated"] == {"CG": 3}
        assert summary["e2e_ms"]["CG"]["count"] == 2
        assert summary["config_hash"] == "cafe"

    def test_empty_episode_export(self, tmp_path):
        b = MetricsBundle()
        paths = b.export(str(tmp_path))
        with open(paths["acceptance"]) as fh:
            assert len(list(csv.DictReader(fh))) == 0
        summary = import_summary(paths["summary"])
        assert summary["no_requests"] is True
        assert summary["acceptance_ratio"] is None

    def test_resources_csv_row_count(self, tmp_path):
        b = MetricsBundle()
        dcs = [TestResourceSampling.FakeDc(i, 0.0, 0.0) for i in range(5)]
        for step in (0, 1500, 3000):
            b.sample_resources(step, dcs)
        paths = b.export(str(tmp_path))
        with open(paths["resources"]) as fh:
            assert len(list(csv.DictReader(fh))) == 3 * 5

    def test_unconserved_export_rejected(self, tmp_path):
        b = MetricsBundle()
        b.record_generated("CG")
        with pytest.raises(MetricsError):
            b.export(str(tmp_path))

    def test_unexpected_schema_rejected(self, tmp_path):
        path = tmp_path / "summary.json"
        path.write_text(json.dumps({"schema": "other"}))
        with pytest.raises(MetricsError):
            import_summary(str(path))
