"""Tests for slackreclaim.experiment."""
import json

import pytest

from slackreclaim import experiment
from slackreclaim.errors import ConfigError, ScheduleViolationError
from slackreclaim.experiment import (
    OPT_GAP_LIMIT,
    RECORD_COLUMNS,
    ExperimentConfig,
    Family,
    check_orderings,
    config_from_dict,
    config_from_profile,
    graph_seed,
    load_config,
    load_result,
    run,
)
from slackreclaim.reclaim import Algorithm
from slackreclaim.report import ReportFormat, write_report
from slackreclaim.taskgraph import save


def small_config(**overrides):
    base = dict(
        families=["random"],
        sizes=[20],
        processor_counts=[2, 4],
        repetitions=3,
        schedulers=["fifo"],
        algorithms=["none", "rdvfs", "mfs"],
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfig:
    def test_defaults(self):
        config = ExperimentConfig()
        assert config.sizes == [100, 200, 300, 400, 500]
        assert config.processor_counts == [2, 4, 8, 16, 32]
        assert config.cpu == "transmeta_crusoe"
        assert config.algorithms == list(Algorithm)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            config_from_dict({"bogus": 1})

    def test_empty_lists_and_ranges(self):
        with pytest.raises(ConfigError):
            config_from_dict({"sizes": []})
        with pytest.raises(ConfigError):
            config_from_dict({"repetitions": 0})
        with pytest.raises(ConfigError):
            config_from_dict({"cycle_lo": 10, "cycle_hi": 5})

    def test_file_family_needs_files(self):
        with pytest.raises(ConfigError, match="graph_files"):
            config_from_dict({"families": ["file"]})

    def test_load_config(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"sizes": [10], "processor_counts": [2], "seed": 9}), encoding="utf-8")
        config = load_config(path)
        assert config.seed == 9 and config.sizes == [10]
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="line 1"):
            load_config(path)

    def test_profiles(self):
        quick = config_from_profile("quick", seed=5, workers=None)
        assert quick.seed == 5 and quick.workers == 1
        assert quick.sizes == [100, 200]
        assert set(quick.families) == {Family.RANDOM, Family.LU, Family.GAUSS_JORDAN}
        with pytest.raises(ConfigError):
            config_from_profile("huge")

    def test_unknown_cpu_aborts_before_work(self, tmp_path):
        output = tmp_path / "records.csv"
        with pytest.raises(ConfigError):
            run(small_config(cpu="pentium_m", output_csv=str(output)))
        assert not output.exists()


class TestSeeds:
    def test_graph_seed_is_stable_and_distinct(self):
        assert graph_seed(0, Family.RANDOM, 100, 0) == graph_seed(0, Family.RANDOM, 100, 0)
        seeds = {
            graph_seed(0, Family.RANDOM, 100, 0),
            graph_seed(0, Family.RANDOM, 100, 1),
            graph_seed(0, Family.RANDOM, 200, 0),
            graph_seed(0, Family.LU, 100, 0),
            graph_seed(1, Family.RANDOM, 100, 0),
        }
        assert len(seeds) == 5

    def test_family_order_does_not_change_graphs(self):
        forward = run(small_config(families=["random", "lu"], processor_counts=[2]))
        backward = run(small_config(families=["lu", "random"], processor_counts=[2]))
        key = lambda r: (r.family, r.graph, r.algorithm.value)  # noqa: E731
        assert sorted(forward.records, key=key) == sorted(backward.records, key=key)


class TestRun:
    def test_none_only_is_self_normalized(self):
        result = run(small_config(algorithms=["none"]))
        assert len(result.records) == 3 * 2
        assert all(r.normalized_energy == 1.0 and r.savings_pct == 0.0 for r in result.records)

    def test_record_shape(self):
        result = run(small_config())
        assert len(result.records) == 3 * 2 * 3
        first = result.records[0]
        assert (first.family, first.graph, first.n_tasks) == ("random", "random-20-0", 20)
        assert list(result.to_frame().columns) == RECORD_COLUMNS
        baselines = [r for r in result.records if r.algorithm is Algorithm.NONE]
        assert all(r.normalized_energy == 1.0 for r in baselines)

    def test_output_csv_is_byte_identical(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        run(small_config(output_csv=str(first)))
        run(small_config(output_csv=str(second)))
        assert first.read_bytes() == second.read_bytes()
        assert first.read_text(encoding="utf-8").splitlines()[0] == ",".join(RECORD_COLUMNS)

    def test_workers_keep_canonical_order(self):
        config = small_config(families=["random", "lu"], schedulers=["fifo", "lpt"])
        assert run(config).records == run(config.model_copy(update={"workers": 3})).records

    def test_streamed_csv_matches_records(self, tmp_path):
        output = tmp_path / "records.csv"
        result = run(small_config(output_csv=str(output)))
        assert load_result(output).records == result.records

    @pytest.mark.parametrize("scheduler", ["fifo", "lpt", "spt"])
    def test_every_cell_is_ordered(self, scheduler):
        config = small_config(
            families=["random", "lu", "gauss_jordan"],
            sizes=[15, 28],
            processor_counts=[2, 4, 8],
            schedulers=[scheduler],
            algorithms=list(Algorithm),
        )
        report = check_orderings(run(config))
        assert report.chain_violations == []
        assert report.makespan_mismatches == []

    def test_failed_cell_is_recorded_and_skipped(self, monkeypatch):
        real = experiment.list_schedule

        def flaky(graph, n_processors, model, priority):
            if n_processors == 4:
                raise ScheduleViolationError("no room")
            return real(graph, n_processors, model, priority)

        monkeypatch.setattr(experiment, "list_schedule", flaky)
        result = run(small_config())
        assert len(result.failures) == 3
        assert {f.code for f in result.failures} == {"SCHEDULE_VIOLATION"}
        assert {r.n_processors for r in result.records} == {2}

    def test_file_family(self, tmp_path, diamond):
        path = tmp_path / "diamond.json"
        save(diamond, path)
        result = run(small_config(families=["file"], graph_files=[str(path)], processor_counts=[2]))
        assert {r.graph for r in result.records} == {"diamond"}
        assert {r.size for r in result.records} == {4}
        mfs = next(r for r in result.records if r.algorithm is Algorithm.MFS)
        assert mfs.savings_pct > 0

    def test_unreadable_graph_file(self, tmp_path):
        with pytest.raises(ConfigError):
            run(small_config(families=["file"], graph_files=[str(tmp_path / "nope.json")]))


class TestTrends:
    def test_gauss_jordan_has_almost_nothing_to_reclaim(self):
        # 7 levels (28 tasks) on 8 processors
        config = small_config(
            families=["random", "lu", "gauss_jordan"],
            sizes=[28],
            processor_counts=[8],
            repetitions=5,
            algorithms=list(Algorithm),
        )
        result = run(config)
        gj = [r for r in result.records if r.family == "gauss_jordan" and r.algorithm is Algorithm.MFS]
        assert gj and all(r.savings_pct < 1.0 for r in gj)

        report = check_orderings(result)
        assert report.ok
        for algorithm in ("rdvfs", "mmf", "mfs", "opt"):
            savings = report.family_savings[algorithm]
            assert savings["gauss_jordan"] < savings["random"]
            assert savings["gauss_jordan"] < savings["lu"]
        assert set(report.opt_gap) == {"random", "lu", "gauss_jordan"}

    def test_more_processors_leave_more_slack(self):
        config = small_config(
            sizes=[100],
            processor_counts=[2, 8],
            repetitions=30,
            schedulers=["fifo", "lpt", "spt"],
            algorithms=["none", "mfs"],
        )
        by_procs = check_orderings(run(config)).savings_by_procs["mfs"]
        assert by_procs[8] >= by_procs[2]


class TestLoadResult:
    def test_json_and_csv_agree(self, tmp_path):
        result = run(small_config(families=["random", "lu"]))
        write_report(result, ReportFormat.JSON, tmp_path)
        write_report(result, ReportFormat.CSV, tmp_path)
        from_json = load_result(tmp_path / "result.json")
        from_csv = load_result(tmp_path / "records.csv")
        assert from_json == result
        assert from_csv.records == result.records
        assert from_csv.config.families == [Family.RANDOM, Family.LU]

    def test_csv_missing_columns(self, tmp_path):
        path = tmp_path / "records.csv"
        path.write_text("family,graph\nrandom,g\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="lacks columns"):
            load_result(path)


@pytest.fixture(scope="module")
def quick_report():
    result = run(config_from_profile("quick"))
    return result, check_orderings(result)


@pytest.mark.slow
class TestQuickProfile:
    """The desk-scale sweep over random, LU and Gauss-Jordan graphs."""

    FAMILIES = ("gauss_jordan", "random", "lu")
    RECLAIMING = ("rdvfs", "mmf", "mfs", "opt")

    def test_every_cell_is_ordered(self, quick_report):
        result, report = quick_report
        assert not result.failures
        assert report.ok

    def test_families_ordered_for_every_algorithm(self, quick_report):
        _, report = quick_report
        for algorithm in self.RECLAIMING:
            savings = report.family_savings[algorithm]
            assert savings["gauss_jordan"] < savings["random"] < savings["lu"], algorithm
        assert report.family_order_ok == {algorithm: True for algorithm in self.RECLAIMING}

    def test_algorithms_ordered_within_each_family(self, quick_report):
        _, report = quick_report
        for family in self.FAMILIES:
            means = [report.family_savings[algorithm][family] for algorithm in self.RECLAIMING]
            assert all(a <= b + 1e-9 for a, b in zip(means, means[1:])), family

    def test_opt_gap_is_small(self, quick_report):
        _, report = quick_report
        assert set(report.opt_gap) == set(self.FAMILIES)
        for family, gap in report.opt_gap.items():
            assert -1e-9 <= gap <= OPT_GAP_LIMIT, family

    def test_gauss_jordan_below_one_percent_everywhere(self, quick_report):
        result, _ = quick_report
        cells = [r for r in result.records if r.family == "gauss_jordan" and r.algorithm is Algorithm.MFS]
        assert len(cells) == 2 * 4 * 3
        assert max(r.savings_pct for r in cells) < 1.0

    def test_random_savings_grow_with_processors(self, quick_report):
        _, report = quick_report
        by_procs = report.savings_by_procs["mfs"]
        assert by_procs[8] >= by_procs[2]
