"""Tests for the slackreclaim command line."""
import json

import pytest

from slackreclaim.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from slackreclaim.experiment import load_result
from slackreclaim.taskgraph import load, save


@pytest.fixture
def graph_file(tmp_path, diamond):
    path = tmp_path / "diamond.json"
    save(diamond, path)
    return path


class TestGenerate:
    def test_single_structured_graph(self, tmp_path):
        out = tmp_path / "lu.json"
        assert main(["generate", "--family", "lu", "--size", "15", "--out", str(out)]) == EXIT_OK
        assert len(load(out).tasks) == 15

    def test_many_random_graphs(self, tmp_path):
        out = tmp_path / "graphs"
        assert main(["generate", "--size", "30", "--count", "3", "--seed", "4", "--out", str(out)]) == EXIT_OK
        names = sorted(p.name for p in out.iterdir())
        assert names == ["random-0.json", "random-1.json", "random-2.json"]
        assert load(out / "random-0.json") != load(out / "random-1.json")


class TestScheduleAndReclaim:
    def test_schedule(self, tmp_path, graph_file, capsys):
        out = tmp_path / "schedule.csv"
        assert main(["schedule", str(graph_file), "--procs", "2", "--out", str(out)]) == EXIT_OK
        assert out.read_text(encoding="utf-8").splitlines()[0] == "task_id,processor,start,finish,T"
        assert "makespan 6.000000" in capsys.readouterr().out

    def test_reclaim_given_schedule(self, tmp_path, graph_file, capsys):
        schedule = tmp_path / "schedule.csv"
        main(["schedule", str(graph_file), "--procs", "2", "--out", str(schedule)])
        out = tmp_path / "assign.csv"
        code = main(["reclaim", str(graph_file), "--schedule", str(schedule), "--alg", "mfs", "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "task_id,freq,duration,idle_tail,energy"
        assert "mfs:" in capsys.readouterr().out

    def test_reclaim_schedules_when_no_file(self, tmp_path, graph_file):
        out = tmp_path / "assign.csv"
        assert main(["reclaim", str(graph_file), "--procs", "2", "--alg", "rdvfs", "--out", str(out)]) == EXIT_OK
        assert out.exists()

    def test_reclaim_needs_procs_or_schedule(self, tmp_path, graph_file):
        assert main(["reclaim", str(graph_file), "--out", str(tmp_path / "a.csv")]) == EXIT_CONFIG

    def test_missing_graph_is_runtime_error(self, tmp_path):
        code = main(["schedule", str(tmp_path / "nope.json"), "--procs", "2", "--out", str(tmp_path / "s.csv")])
        assert code == EXIT_RUNTIME

    def test_unknown_cpu_is_config_error(self, tmp_path, graph_file):
        code = main(["schedule", str(graph_file), "--procs", "2", "--cpu", "pentium_m", "--out", str(tmp_path / "s.csv")])
        assert code == EXIT_CONFIG


class TestExperimentAndReport:
    def write_config(self, tmp_path, **values):
        data = {"sizes": [12], "processor_counts": [2], "repetitions": 2, "schedulers": ["fifo"]}
        data.update(values)
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    def test_experiment_writes_all_outputs(self, tmp_path):
        config = self.write_config(tmp_path)
        out = tmp_path / "results"
        code = main(["experiment", "--config", str(config), "--procs", "2,4", "--alg", "none,mfs", "--out", str(out)])
        assert code == EXIT_OK
        for name in ("records.csv", "result.json", "summary.md", "table_savings.csv"):
            assert (out / name).exists()
        result = json.loads((out / "result.json").read_text(encoding="utf-8"))
        assert result["config"]["processor_counts"] == [2, 4]
        assert len(result["records"]) == 2 * 2 * 2

    def test_bad_config_exits_one(self, tmp_path):
        config = self.write_config(tmp_path, bogus=True)
        assert main(["experiment", "--config", str(config), "--out", str(tmp_path / "r")]) == EXIT_CONFIG

    def test_unknown_profile_is_rejected_by_parser(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["experiment", "--profile", "huge", "--out", str(tmp_path / "r")])

    def test_report_from_result(self, tmp_path):
        config = self.write_config(tmp_path, algorithms=["none", "rdvfs"])
        results = tmp_path / "results"
        main(["experiment", "--config", str(config), "--out", str(results)])
        out = tmp_path / "report"
        assert main(["report", str(results / "result.json"), "--format", "csv", "--out", str(out)]) == EXIT_OK
        assert load_result(out / "records.csv").records == load_result(results / "records.csv").records

    def test_report_of_missing_file(self, tmp_path):
        assert main(["report", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == EXIT_RUNTIME
