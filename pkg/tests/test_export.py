from datetime import datetime, timedelta, timezone

import pytest

from mailmine.errors import ContractError, PhaseOrderError
from mailmine.export import (
    DirectlyFollowsGraph,
    EventLog,
    EventRecord,
    build_event_log,
    mine_dfg,
    read_csv,
    validate_xes,
    write_csv,
    write_xes,
    xes_string,
)

from conftest import GOLDEN_DOT, GOLDEN_EVENTS, GOLDEN_XES, PAPER_LABELS

T0 = datetime(2016, 4, 19, 9, 51, tzinfo=timezone.utc)


def record(case, activity, minutes, email_id, resource="someone@example.org"):
    return EventRecord(
        case_id=case,
        activity=activity,
        timestamp=T0 + timedelta(minutes=minutes),
        resource=resource,
        email_id=email_id,
    )


class TestBuildEventLog:
    def test_fixture_mission_traces(self, labeled_run):
        log = build_event_log(labeled_run, 0)
        cases = log.cases()
        assert len(cases) == 2
        assert len(log.records) == 9
        trace1 = [r.activity for r in cases[1]]
        assert trace1 == [
            "submit demand",
            "request information",
            "respond information",
            "accept demand or refuse demand",
        ]
        trace0 = [r.activity for r in cases[0]]
        assert trace0 == [
            "submit demand",
            "request information",
            "respond information",
            "accept demand or refuse demand",
            "accept demand or refuse demand",
        ]
        assert [r.email_id for r in cases[0]] == [1, 2, 3, 4, 16]

    def test_lifecycle_always_complete(self, labeled_run):
        log = build_event_log(labeled_run, 0)
        assert all(r.lifecycle == "complete" for r in log.records)

    def test_timestamps_match_source_emails(self, labeled_run):
        log = build_event_log(labeled_run, 0)
        for r in log.records:
            assert r.timestamp == labeled_run.corpus.by_id(r.email_id).timestamp
            assert r.resource == labeled_run.corpus.by_id(r.email_id).sender

    def test_one_record_per_topic_email(self, labeled_run):
        log = build_event_log(labeled_run, 0)
        assert sorted(r.email_id for r in log.records) == sorted(
            labeled_run.topic_by_id(0).email_ids
        )

    def test_within_case_timestamps_non_decreasing(self, labeled_run):
        for events in build_event_log(labeled_run, 0).cases().values():
            stamps = [e.timestamp for e in events]
            assert stamps == sorted(stamps)

    def test_unlabeled_cluster_error_names_ids(self, labeled_run):
        import copy

        run = copy.deepcopy(labeled_run)
        del run.activity_labels[2]
        with pytest.raises(ContractError, match="2"):
            build_event_log(run, 0)

    def test_unclustered_topic_errors(self, labeled_run):
        with pytest.raises(PhaseOrderError):
            build_event_log(labeled_run, 1)


class TestEventCsv:
    def test_single_event_two_lines(self, tmp_path):
        log = EventLog(records=(record(0, "do it", 0, 1),))
        p = tmp_path / "one.csv"
        write_csv(log, p)
        lines = p.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0] == "case_id,activity,timestamp,resource,lifecycle,email_id"

    def test_comma_in_activity_quoted(self, tmp_path):
        log = EventLog(records=(record(0, "accept, or refuse", 0, 1),))
        p = tmp_path / "quoted.csv"
        write_csv(log, p)
        assert '"accept, or refuse"' in p.read_text()
        assert read_csv(p).records[0].activity == "accept, or refuse"

    def test_fixture_log_matches_golden_file(self, labeled_run, tmp_path):
        log = build_event_log(labeled_run, 0)
        p = tmp_path / "mission.csv"
        write_csv(log, p)
        assert p.read_bytes() == GOLDEN_EVENTS.read_bytes()

    def test_roundtrip_byte_identical(self, labeled_run, tmp_path):
        log = build_event_log(labeled_run, 0)
        p1 = tmp_path / "a.csv"
        write_csv(log, p1)
        back = read_csv(p1)
        p2 = tmp_path / "b.csv"
        write_csv(back, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert back.records == log.records


class TestXes:
    def test_empty_log_is_valid(self):
        xml = xes_string(EventLog(records=()))
        assert validate_xes(xml) == []
        assert "<trace>" not in xml

    def test_fixture_log_two_traces_nine_events(self, labeled_run):
        xml = xes_string(build_event_log(labeled_run, 0), labeled_run.corpus)
        assert xml.count("<trace>") == 2
        assert xml.count("<event>") == 9
        assert validate_xes(xml) == []

    def test_fixture_matches_golden(self, labeled_run, tmp_path):
        p = tmp_path / "mission.xes"
        write_xes(build_event_log(labeled_run, 0), p, labeled_run.corpus)
        assert p.read_bytes() == GOLDEN_XES.read_bytes()

    def test_attributes_escaped(self):
        log = EventLog(records=(record(0, 'say "<hello> & goodbye"', 0, 1),))
        xml = xes_string(log)
        assert validate_xes(xml) == []
        assert "&lt;hello&gt;" in xml

    def test_validator_catches_defects(self):
        assert validate_xes("<notlog/>") != []
        assert validate_xes("not xml at all <<<") != []
        bad_date = (
            '<?xml version="1.0"?><log xes.version="1849-2016"><trace><event>'
            '<date key="time:timestamp" value="yesterday"/></event></trace></log>'
        )
        assert any("dateTime" in e for e in validate_xes(bad_date))
        missing_key = (
            '<?xml version="1.0"?><log xes.version="1849-2016"><trace><event>'
            "<string value=\"x\"/></event></trace></log>"
        )
        assert any("key" in e for e in validate_xes(missing_key))

    def test_lifecycle_attribute_present_on_every_event(self, labeled_run):
        xml = xes_string(build_event_log(labeled_run, 0), labeled_run.corpus)
        assert xml.count('key="lifecycle:transition" value="complete"') >= 9


class TestDfg:
    def test_single_event_case(self):
        log = EventLog(records=(record(0, "solo", 0, 1),))
        dfg = mine_dfg(log)
        assert dfg.nodes == {"solo": 1}
        assert dfg.edges == {}
        assert dfg.start_counts == {"solo": 1}
        assert dfg.end_counts == {"solo": 1}

    def test_fixture_chain_with_self_loop(self, labeled_run):
        dfg = mine_dfg(build_event_log(labeled_run, 0))
        submit, request, respond, accept = (PAPER_LABELS[i] for i in range(4))
        assert dfg.edges == {
            (submit, request): 2,
            (request, respond): 2,
            (respond, accept): 2,
            (accept, accept): 1,
        }
        assert dfg.start_counts == {submit: 2}
        assert dfg.end_counts == {accept: 2}

    def test_two_identical_cases_double_counts(self):
        rec = [
            record(0, "a", 0, 1),
            record(0, "b", 1, 2),
            record(1, "a", 2, 3),
            record(1, "b", 3, 4),
        ]
        doubled = mine_dfg(EventLog(records=tuple(rec)))
        assert doubled.edges == {("a", "b"): 2}
        single = mine_dfg(EventLog(records=tuple(rec[:2])))
        assert {k: v * 2 for k, v in single.edges.items()} == doubled.edges

    def test_empty_log_rejected(self):
        with pytest.raises(ContractError):
            mine_dfg(EventLog(records=()))

    def test_start_counts_sum_to_case_count(self, labeled_run):
        log = build_event_log(labeled_run, 0)
        dfg = mine_dfg(log)
        assert sum(dfg.start_counts.values()) == len(log.cases())

    def test_outgoing_counts_identity(self, labeled_run):
        # outgoing edge counts of an activity = occurrences - end-of-case count
        log = build_event_log(labeled_run, 0)
        dfg = mine_dfg(log)
        for activity, occurrences in dfg.nodes.items():
            outgoing = sum(c for (src, _), c in dfg.edges.items() if src == activity)
            assert outgoing == occurrences - dfg.end_counts.get(activity, 0)

    def test_dot_output_matches_golden(self, labeled_run):
        dot = mine_dfg(build_event_log(labeled_run, 0)).to_dot()
        assert dot == GOLDEN_DOT.read_text()
        assert dot.startswith("digraph dfg {")
