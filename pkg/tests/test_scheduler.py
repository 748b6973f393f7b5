"""Tests for slackreclaim.scheduler."""
import pytest

from slackreclaim.errors import ParameterError, ScheduleViolationError
from slackreclaim.scheduler import (
    Priority,
    Schedule,
    ScheduleEntry,
    list_schedule,
    read_schedule_csv,
    slack_windows,
    stretch,
    validate_schedule,
    write_schedule_csv,
)
from slackreclaim.taskgraph import Task, TaskGraph, gen_gauss_jordan, gen_lu, gen_random


def independent(t_os_values, f_n=667.0):
    return TaskGraph(tasks=tuple(Task(id=i, cycles=t * f_n) for i, t in enumerate(t_os_values)))


class TestListSchedule:
    def test_single_task(self, transmeta):
        schedule = list_schedule(independent([3.0]), 4, transmeta)
        assert schedule.entries[0].start == 0
        assert schedule.makespan == pytest.approx(3.0)

    def test_empty_graph(self, transmeta):
        schedule = list_schedule(TaskGraph(tasks=()), 2, transmeta)
        assert schedule.entries == () and schedule.makespan == 0

    def test_lpt_hand_oracle(self, transmeta):
        schedule = list_schedule(independent([8, 6, 4, 2]), 2, transmeta, Priority.LPT)
        lanes = {p: [e.task_id for e in lane] for p, lane in schedule.by_processor().items()}
        assert lanes == {0: [0, 3], 1: [1, 2]}
        assert schedule.makespan == pytest.approx(10.0)

    def test_spt_hand_oracle(self, transmeta):
        schedule = list_schedule(independent([8, 6, 4, 2]), 2, transmeta, "spt")
        lanes = {p: [e.task_id for e in lane] for p, lane in schedule.by_processor().items()}
        assert lanes == {0: [3, 1], 1: [2, 0]}
        assert schedule.makespan == pytest.approx(12.0)

    def test_comm_delay_only_across_processors(self, diamond, transmeta):
        schedule = list_schedule(diamond, 2, transmeta)
        placed = schedule.by_task()
        assert (placed[1].processor, placed[1].start) == (0, pytest.approx(1.0))
        assert (placed[2].processor, placed[2].start) == (1, pytest.approx(1.5))
        assert (placed[3].processor, placed[3].start) == (0, pytest.approx(5.0))
        assert schedule.makespan == pytest.approx(6.0)

    def test_invalid_arguments(self, diamond, transmeta):
        with pytest.raises(ParameterError):
            list_schedule(diamond, 0, transmeta)
        with pytest.raises(ParameterError):
            list_schedule(diamond, 2, transmeta, "random")

    @pytest.mark.parametrize("priority", list(Priority))
    @pytest.mark.parametrize("procs", [1, 3, 8])
    def test_generated_schedules_are_feasible(self, transmeta, priority, procs):
        for graph in (gen_random(80, seed=procs), gen_lu(8, comm=0.003, seed=1), gen_gauss_jordan(6)):
            schedule = list_schedule(graph, procs, transmeta, priority)
            validate_schedule(schedule, graph, transmeta)

    def test_deterministic(self, transmeta):
        graph = gen_random(120, seed=7)
        assert list_schedule(graph, 4, transmeta, "lpt") == list_schedule(graph, 4, transmeta, "lpt")


class TestSlackWindows:
    def test_diamond_windows(self, diamond, transmeta):
        windows = {w.task_id: w for w in slack_windows(list_schedule(diamond, 2, transmeta), diamond)}
        assert windows[0].T == pytest.approx(1.0)
        assert windows[1].T == pytest.approx(4.0)
        # short branch may stretch until its output must leave for task 3
        assert windows[2].T == pytest.approx(3.0)
        assert windows[2].slack == pytest.approx(1.0)
        assert windows[3].T == pytest.approx(1.0)

    def test_last_task_runs_to_makespan(self, transmeta):
        schedule = list_schedule(independent([5, 1]), 2, transmeta)
        windows = {w.task_id: w for w in slack_windows(schedule, independent([5, 1]))}
        assert windows[1].T == pytest.approx(schedule.makespan - schedule.by_task()[1].start)

    def test_execution_time_is_conserved(self, transmeta):
        graph = gen_random(150, seed=11)
        windows = slack_windows(list_schedule(graph, 4, transmeta), graph)
        assert sum(w.t_OS for w in windows) == pytest.approx(graph.total_cycles() / transmeta.f_max, rel=1e-9)
        assert all(w.T >= w.t_OS for w in windows)

    @pytest.mark.parametrize("priority", list(Priority))
    def test_filling_every_window_keeps_makespan(self, transmeta, priority):
        graph = gen_random(150, seed=12)
        schedule = list_schedule(graph, 4, transmeta, priority)
        windows = slack_windows(schedule, graph)
        stretched = stretch(schedule, {w.task_id: w.start + w.T for w in windows})
        validate_schedule(stretched, graph)
        assert stretched.makespan == pytest.approx(schedule.makespan, rel=1e-12)

    @pytest.mark.parametrize("procs", [3, 4])
    def test_gauss_jordan_three_levels(self, transmeta, procs):
        """
        List scheduling puts (3,3) on the processor of (2,2), not of (2,3).
        (3,3) then waits one comm delay for the remote output of (2,3), so
        (2,2) is the only task with slack and that slack equals comm.
        """
        graph = gen_gauss_jordan(3, comm=10)
        schedule = list_schedule(graph, procs, transmeta)
        windows = {w.task_id: w for w in slack_windows(schedule, graph)}
        with_slack = [task_id for task_id, w in windows.items() if w.slack > 1e-9]
        assert with_slack == [3]
        assert windows[3].slack == pytest.approx(10.0)

    def test_gauss_jordan_wide_machine(self, transmeta):
        graph = gen_gauss_jordan(6, comm=10)
        windows = slack_windows(list_schedule(graph, 6, transmeta), graph)
        with_slack = [w.task_id for w in windows if w.slack > 1e-9]
        assert with_slack == [len(graph.tasks) - 3]


class TestValidation:
    def test_detects_overlap(self, transmeta):
        graph = independent([1, 1])
        schedule = Schedule(
            entries=(
                ScheduleEntry(task_id=0, processor=0, start=0, finish=1),
                ScheduleEntry(task_id=1, processor=0, start=0.5, finish=1.5),
            ),
            n_processors=1,
            makespan=1.5,
        )
        with pytest.raises(ScheduleViolationError, match="overlap"):
            validate_schedule(schedule, graph)

    def test_detects_precedence_violation(self, diamond, transmeta):
        schedule = list_schedule(diamond, 2, transmeta)
        early = tuple(
            e.model_copy(update={"start": 0.0, "finish": e.duration}) if e.task_id == 2 else e
            for e in schedule.entries
        )
        broken = Schedule(entries=early, n_processors=2, makespan=schedule.makespan)
        with pytest.raises(ScheduleViolationError, match="before its input"):
            validate_schedule(broken, diamond)

    def test_detects_wrong_duration(self, diamond, transmeta):
        schedule = list_schedule(diamond, 2, transmeta)
        longer = stretch(schedule, {3: schedule.makespan + 1})
        with pytest.raises(ScheduleViolationError, match="cycles / f_N"):
            validate_schedule(longer, diamond, transmeta)

    def test_makespan_must_match(self):
        with pytest.raises(ValueError):
            Schedule(entries=(ScheduleEntry(task_id=0, processor=0, start=0, finish=1),), n_processors=1, makespan=2)


class TestScheduleCsv:
    def test_write_then_read(self, tmp_path, diamond, transmeta):
        schedule = list_schedule(diamond, 2, transmeta)
        path = tmp_path / "schedule.csv"
        write_schedule_csv(schedule, slack_windows(schedule, diamond), path)
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert header == "task_id,processor,start,finish,T"
        assert read_schedule_csv(path, n_processors=2) == schedule

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("task_id,start\n0,0\n", encoding="utf-8")
        with pytest.raises(ParameterError):
            read_schedule_csv(path)
