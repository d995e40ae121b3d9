import pytest
from hypothesis import given, strategies as st

from coassembly import sim
from coassembly import trace as tr
from coassembly.errors import EmptySample, MalformedTrace, ZeroBaseline
from coassembly.metrics import (
    MetricsReport,
    QuestionnaireRecord,
    aggregate_questionnaire,
    compare,
    compute_metrics,
    csv_row,
    render_table,
)


def rec(seq, t_ms, kind, payload):
    return tr.TraceRecord(seq=seq, t_ms=t_ms, kind=kind, payload=payload)


def hand_trace():
    """Idle [0,5), executing [5,15), faulted [15,22), end 22; robot work pending."""
    records = [
        rec(0, 0, tr.ROBOT_EVENT, {"event": "mode_change", "mode": "idle"}),
        rec(1, 0, tr.STEP_STATUS, {"step": "r1", "status": "pending", "actor": "robot"}),
        rec(2, 5000, tr.ROBOT_EVENT, {"event": "mode_change", "mode": "executing"}),
        rec(3, 15000, tr.ROBOT_EVENT, {"event": "mode_change", "mode": "faulted"}),
        rec(4, 22000, tr.SIM_END, {"reason": "completed", "dropped_events": 0}),
    ]
    return tr.Trace(records=records)


class TestComputeMetrics:
    def test_empty_body_trace_all_zeros(self):
        trace = tr.Trace(records=[rec(0, 0, tr.SIM_END, {"reason": "completed"})])
        report = compute_metrics(trace)
        assert report.execution_time == 0.0
        assert report.robot_busy == 0.0
        assert report.robot_downtime == 0.0
        assert report.user_turns == 0

    def test_hand_built_three_interval_trace(self):
        report = compute_metrics(hand_trace())
        assert report.robot_downtime == 12.0
        assert report.robot_busy == 10.0
        assert report.execution_time == 22.0

    def test_idle_after_work_done_is_not_downtime(self):
        records = [
            rec(0, 0, tr.ROBOT_EVENT, {"event": "mode_change", "mode": "executing"}),
            rec(1, 0, tr.STEP_STATUS, {"step": "r1", "status": "ready", "actor": "robot"}),
            rec(2, 8000, tr.STEP_STATUS, {"step": "r1", "status": "done", "actor": "robot"}),
            rec(3, 8000, tr.ROBOT_EVENT, {"event": "mode_change", "mode": "idle"}),
            rec(4, 20000, tr.SIM_END, {"reason": "completed"}),
        ]
        report = compute_metrics(tr.Trace(records=records))
        assert report.robot_downtime == 0.0
        assert report.robot_busy == 8.0
        assert report.non_accountable_idle == 12.0

    def test_human_steps_do_not_count_as_robot_work(self):
        records = [
            rec(0, 0, tr.ROBOT_EVENT, {"event": "mode_change", "mode": "idle"}),
            rec(1, 0, tr.STEP_STATUS, {"step": "h1", "status": "pending", "actor": "human"}),
            rec(2, 9000, tr.SIM_END, {"reason": "completed"}),
        ]
        assert compute_metrics(tr.Trace(records=records)).robot_downtime == 0.0

    def test_malformed_trace_rejected(self):
        with pytest.raises(MalformedTrace):
            compute_metrics(tr.Trace(records=[]))
        with pytest.raises(MalformedTrace):
            compute_metrics(
                tr.Trace(records=[rec(0, 0, tr.UTTERANCE, {"speaker": "user", "text": "x"})])
            )

    def test_conservation_on_reference_runs(self, reference_config):
        for mode in ("conversational", "baseline"):
            trace = sim.run_scenario(reference_config, mode=mode)
            report = compute_metrics(trace)
            total = (
                round(report.robot_busy * 1000)
                + round(report.robot_downtime * 1000)
                + round(report.non_accountable_idle * 1000)
            )
            assert total == round(report.execution_time * 1000)

    def test_recompute_from_serialized_equals_live(self, reference_config, tmp_path):
        trace = sim.run_scenario(reference_config, mode="conversational")
        live = compute_metrics(trace)
        path = tmp_path / "t.jsonl"
        trace.save(path)
        reloaded = compute_metrics(tr.Trace.load(path))
        assert reloaded == live


def report_with(execution=100.0, busy=0.0, downtime=0.0):
    return MetricsReport(
        execution_time=execution,
        robot_busy=busy,
        robot_downtime=downtime,
        non_accountable_idle=execution - busy - downtime,
        user_turns=0,
        robot_turns=0,
        slot_prompts=0,
        failures=0,
        dropped_events=0,
    )


class TestCompare:
    def test_paper_magnitude_execution(self):
        base = report_with(execution=100.0, downtime=50.0)
        prop = report_with(execution=78.0, downtime=50.0)
        assert compare(base, prop).execution_time_reduction_pct == 22.0

    def test_paper_magnitude_downtime(self):
        base = report_with(execution=100.0, downtime=60.0)
        prop = report_with(execution=100.0, downtime=16.2)
        assert compare(base, prop).downtime_reduction_pct == 73.0

    def test_equal_reports_zero(self):
        base = report_with(execution=10.0, downtime=5.0)
        assert compare(base, base).execution_time_reduction_pct == 0.0
        assert compare(base, base).downtime_reduction_pct == 0.0

    def test_zero_baseline_rejected(self):
        with pytest.raises(ZeroBaseline):
            compare(report_with(execution=0.0, downtime=5.0), report_with())
        with pytest.raises(ZeroBaseline):
            compare(report_with(execution=5.0, downtime=0.0), report_with())

    def test_half_up_rounding(self):
        base = report_with(execution=1000.0, downtime=1000.0)
        prop = report_with(execution=999.5 - 0.5, downtime=1000.0 - 0.45)
        result = compare(base, prop)
        assert result.execution_time_reduction_pct == 0.1

    @given(
        st.floats(min_value=1.0, max_value=1e4),
        st.floats(min_value=0.01, max_value=1e4),
        st.floats(min_value=1.0, max_value=1e4),
        st.floats(min_value=0.01, max_value=1e4),
    )
    def test_sign_antisymmetry(self, be, bd, pe, pd):
        base = report_with(execution=be + bd, downtime=bd)
        prop = report_with(execution=pe + pd, downtime=pd)
        forward = compare(base, prop)
        backward = compare(prop, base)
        for fwd, back in (
            (forward.execution_time_reduction_pct, backward.execution_time_reduction_pct),
            (forward.downtime_reduction_pct, backward.downtime_reduction_pct),
        ):
            if abs(fwd) > 0.2:  # away from rounding boundaries
                assert (fwd > 0) != (back > 0)


class TestQuestionnaire:
    def test_single_record_identity(self):
        record = QuestionnaireRecord(8, 9, 7, 6, 8)
        means = aggregate_questionnaire([record])
        assert means["clarity"] == 8.0
        assert means["overall"] == 8.0

    def test_two_record_mean(self):
        records = [
            QuestionnaireRecord(8, 5, 5, 5, 5),
            QuestionnaireRecord(9, 5, 5, 5, 5),
        ]
        assert aggregate_questionnaire(records)["clarity"] == 8.5

    def test_empty_rejected(self):
        with pytest.raises(EmptySample):
            aggregate_questionnaire([])

    def test_rating_bounds_enforced(self):
        with pytest.raises(ValueError):
            QuestionnaireRecord(11, 5, 5, 5, 5)
        with pytest.raises(ValueError):
            QuestionnaireRecord(5, 5, 5, 5, -1)

    def test_grand_mean(self):
        records = [QuestionnaireRecord(10, 10, 10, 10, 10), QuestionnaireRecord(0, 0, 0, 0, 0)]
        assert aggregate_questionnaire(records)["mean"] == 5.0


class TestRendering:
    def test_table_contains_all_fields(self):
        text = render_table(report_with(execution=5.0, busy=2.0, downtime=1.0))
        assert "execution time" in text and "5.000 s" in text

    def test_csv_row_field_count(self):
        from coassembly.metrics import CSV_HEADER

        row = csv_row(report_with(), scenario="s", mode="conversational")
        assert len(row.split(",")) == len(CSV_HEADER.split(","))
