"""Config parsing, the per-run metric pipeline, and CSV aggregation."""

import csv
import io

import numpy as np
import pytest

from spawncphd.config import CSV_HEADER, ExperimentConfig, load_config
from spawncphd.errors import ConfigError
from spawncphd.experiment import run_experiment, run_one, summarize

EXPECTED_COUNTS = [2] * 15 + [4] * 10 + [7] * 51 + [5] * 10 + [2] * 14


def small_config(**overrides) -> ExperimentConfig:
    cfg = load_config(None)
    scenario = cfg.scenario.__class__(n_scans=30)
    base = dict(
        scenario=scenario,
        models=("zip", "birth"),
        n_runs=2,
        seed=1234,
    )
    base.update(overrides)
    return cfg.__class__(**{**cfg.__dict__, **base})


class TestLoadConfig:
    def test_defaults_without_file(self):
        cfg = load_config(None)
        assert cfg.scenario.n_scans == 100
        assert cfg.scenario.clutter_rate == 50.0
        assert cfg.scenario.p_s == 0.99
        assert cfg.models == ("bernoulli", "poisson", "zip", "birth")
        assert cfg.n_runs == 50
        assert cfg.bernoulli_prob == 0.01
        assert cfg.poisson_rate == 0.025
        assert cfg.zip_prob == 0.01 and cfg.zip_rate == 2.5
        assert cfg.ospa_cutoff_pos == 100.0 and cfg.ospa_cutoff_vel == 100.0
        assert cfg.reduction.trunc_threshold == 1e-5
        assert cfg.reduction.merge_threshold == 4.0
        assert cfg.reduction.max_components == 100

    def test_file_overrides(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text(
            "[scenario]\nn_scans = 40\nn_max = 15\n"
            "[sensor]\np_d = 0.9\nclutter_rate = 10\n"
            "[motion]\np_s = 0.95\n"
            "[spawn.zip]\nprob = 0.2\nrate = 1.5\n"
            "[birth]\nrate = 0.05\n"
            "[metrics]\nospa_cutoff_pos = 60\n"
            "[experiment]\nruns = 7\nseed = 99\nmodels = zip, birth\n"
        )
        cfg = load_config(str(ini))
        assert cfg.scenario.n_scans == 40
        assert cfg.scenario.n_max == 15
        assert cfg.scenario.p_d == 0.9
        assert cfg.scenario.clutter_rate == 10.0
        assert cfg.scenario.p_s == 0.95
        assert cfg.zip_prob == 0.2 and cfg.zip_rate == 1.5
        assert cfg.scenario.birth_rate == 0.05
        assert cfg.ospa_cutoff_pos == 60.0
        assert cfg.n_runs == 7 and cfg.seed == 99
        assert cfg.models == ("zip", "birth")

    def test_unknown_key_rejected(self, tmp_path):
        ini = tmp_path / "bad.ini"
        ini.write_text("[sensor]\np_dd = 0.9\n")
        with pytest.raises(ConfigError):
            load_config(str(ini))

    def test_unknown_section_rejected(self, tmp_path):
        ini = tmp_path / "bad.ini"
        ini.write_text("[sensors]\np_d = 0.9\n")
        with pytest.raises(ConfigError):
            load_config(str(ini))

    def test_bad_value_rejected(self, tmp_path):
        ini = tmp_path / "bad.ini"
        ini.write_text("[sensor]\np_d = very\n")
        with pytest.raises(ConfigError):
            load_config(str(ini))

    def test_unknown_model_rejected(self, tmp_path):
        ini = tmp_path / "bad.ini"
        ini.write_text("[experiment]\nmodels = zip, teleport\n")
        with pytest.raises(ConfigError):
            load_config(str(ini))

    def test_missing_file_rejected(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/exp.ini")


class TestRunOne:
    def test_row_shape_and_truth_column(self):
        cfg = small_config(models=("zip",))
        rows = run_one(cfg, 0)
        assert len(rows) == 30
        parsed = [r.split(",") for r in rows]
        assert all(len(p) == 9 for p in parsed)
        assert [int(p[3]) for p in parsed] == EXPECTED_COUNTS[:30]
        assert all(p[0] == "0" and p[2] == "zip" for p in parsed)
        assert [int(p[1]) for p in parsed] == list(range(30))
        for p in parsed:
            assert 0.0 <= float(p[7]) <= 1.0 and 0.0 <= float(p[8]) <= 1.0
            assert 0.0 <= float(p[5]) <= 100.0 and 0.0 <= float(p[6]) <= 100.0

    def test_models_share_measurements(self):
        # adding a second model must not perturb the first model's rows
        only = run_one(small_config(models=("zip",)), 1)
        both = run_one(small_config(models=("zip", "birth")), 1)
        assert both[:30] == only
        assert {r.split(",")[2] for r in both[30:]} == {"birth"}

    def test_runs_differ(self):
        cfg = small_config(models=("zip",))
        assert run_one(cfg, 0) != run_one(cfg, 1)

    def test_filters_lock_onto_truth(self):
        # by the last scans the spawn-aware filter should track the count
        cfg = small_config(models=("poisson",), seed=7)
        rows = [r.split(",") for r in run_one(cfg, 0)]
        tail = rows[-5:]
        err = np.mean([abs(int(p[4]) - int(p[3])) for p in tail])
        assert err <= 2.0


class TestRunExperiment:
    def test_csv_layout_and_accounting(self, tmp_path):
        cfg = small_config()
        out = run_experiment(cfg, tmp_path, jobs=1)
        assert out.name == "scans.csv"
        lines = out.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 1 + cfg.n_runs * len(cfg.models) * cfg.scenario.n_scans
        # parts are merged in run order and removed
        assert sorted(tmp_path.iterdir()) == [out]
        runs = [int(l.split(",")[0]) for l in lines[1:]]
        assert runs == sorted(runs)

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = small_config()
        a = run_experiment(cfg, tmp_path / "a", jobs=1).read_bytes()
        b = run_experiment(cfg, tmp_path / "b", jobs=1).read_bytes()
        assert a == b

    def test_parallel_matches_serial_bytes(self, tmp_path):
        cfg = small_config()
        a = run_experiment(cfg, tmp_path / "serial", jobs=1).read_bytes()
        b = run_experiment(cfg, tmp_path / "par", jobs=2).read_bytes()
        assert a == b


class TestSummarize:
    @staticmethod
    def write_scans(path, rows):
        path.write_text(CSV_HEADER + "\n" + "\n".join(rows) + "\n")

    def test_means_by_model_and_scan(self, tmp_path):
        rows = [
            "0,0,zip,2,2,10,4,0.5,0.25",
            "0,1,zip,2,3,20,6,0.4,0.2",
            "1,0,zip,2,2,30,8,0.3,0.15",
            "1,1,zip,2,1,40,10,0.2,0.1",
        ]
        self.write_scans(tmp_path / "scans.csv", rows)
        out = summarize(tmp_path, tmp_path / "summary.csv")
        got = list(csv.DictReader(io.StringIO(out.read_text())))
        assert len(got) == 2
        r0 = got[0]
        assert r0["model"] == "zip" and r0["scan"] == "0" and r0["n_runs"] == "2"
        assert float(r0["ospa_pos"]) == 20.0
        assert float(r0["hellinger_upd"]) == 0.2
        r1 = got[1]
        assert float(r1["ospa_pos"]) == 30.0
        assert float(r1["map_n"]) == 2.0

    def test_reads_every_csv_except_output(self, tmp_path):
        self.write_scans(tmp_path / "part_a.csv", ["0,0,zip,2,2,10,4,0.5,0.25"])
        self.write_scans(tmp_path / "part_b.csv", ["1,0,zip,2,2,30,8,0.3,0.15"])
        out = summarize(tmp_path, tmp_path / "summary.csv")
        got = list(csv.DictReader(io.StringIO(out.read_text())))
        assert len(got) == 1 and got[0]["n_runs"] == "2"
        assert float(got[0]["ospa_pos"]) == 20.0
        # re-running with the summary file present must not ingest it
        out2 = summarize(tmp_path, tmp_path / "summary.csv")
        assert out2.read_text() == out.read_text()

    def test_bad_header_rejected(self, tmp_path):
        (tmp_path / "scans.csv").write_text("run,scan,model\n0,0,zip\n")
        with pytest.raises(ConfigError):
            summarize(tmp_path, tmp_path / "summary.csv")

    def test_malformed_row_rejected(self, tmp_path):
        self.write_scans(tmp_path / "scans.csv", ["0,0,zip,2,2,10,4,0.5"])
        with pytest.raises(ConfigError):
            summarize(tmp_path, tmp_path / "summary.csv")

    def test_non_numeric_field_rejected(self, tmp_path):
        self.write_scans(tmp_path / "scans.csv", ["0,0,zip,2,2,ten,4,0.5,0.25"])
        with pytest.raises(ConfigError):
            summarize(tmp_path, tmp_path / "summary.csv")

    def test_empty_dir_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            summarize(tmp_path, tmp_path / "summary.csv")

    def test_summarize_of_real_run(self, tmp_path):
        cfg = small_config()
        scans = run_experiment(cfg, tmp_path, jobs=1)
        out = summarize(tmp_path, tmp_path / "summary.csv")
        got = list(csv.DictReader(io.StringIO(out.read_text())))
        assert len(got) == len(cfg.models) * cfg.scenario.n_scans
        # independent mean for one cell, straight from the scans file
        want = np.mean(
            [
                float(l.split(",")[5])
                for l in scans.read_text().splitlines()[1:]
                if l.split(",")[2] == "zip" and l.split(",")[1] == "3"
            ]
        )
        cell = [r for r in got if r["model"] == "zip" and r["scan"] == "3"]
        assert float(cell[0]["ospa_pos"]) == pytest.approx(want, rel=1e-9)
