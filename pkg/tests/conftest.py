from pathlib import Path

import pytest

from mailmine.config import PipelineConfig
from mailmine.runstate import RunState

DATA = Path(__file__).parent / "data"
FIXTURE_CSV = DATA / "student_log.csv"
LABELS_CSV = DATA / "mission_labels.csv"
GOLDEN_EVENTS = DATA / "golden_mission_events.csv"
GOLDEN_XES = DATA / "golden_mission.xes"
GOLDEN_DOT = DATA / "golden_mission.dot"

PAPER_LABELS = {
    0: "submit demand",
    1: "request information",
    2: "respond information",
    3: "accept demand or refuse demand",
}

MEETING_IDS = list(range(5, 16))
MISSION_IDS = [1, 2, 3, 4, 16, 20, 21, 22, 23]


@pytest.fixture(scope="session")
def fixture_corpus():
    from mailmine import parse_csv

    return parse_csv(FIXTURE_CSV)


@pytest.fixture()
def fresh_run(tmp_path):
    """A new RunState over the fixture corpus, not yet clustered."""
    return RunState.create(FIXTURE_CSV, PipelineConfig())


@pytest.fixture(scope="session")
def labeled_run(tmp_path_factory):
    """Full batch pipeline on the fixture: topics k=2, instances, activities k=4, labels."""
    run = RunState.create(FIXTURE_CSV, PipelineConfig())
    run.run_topics(k=2)
    run.run_instances(topic_id=0, k=2)
    run.run_instances(topic_id=1, k=4)
    run.run_activities(0, k=4)
    for activity_id, label in PAPER_LABELS.items():
        run.assign_label(activity_id, label, labeled_by="file")
    return run
