from datetime import datetime, timezone

import pytest

from mailmine.config import PipelineConfig
from mailmine.errors import ContractError, PhaseOrderError
from mailmine.ingest import Email
from mailmine.labeling import (
    apply_labels_file,
    classify,
    label_store,
    load_labels_csv,
    propose_medoids,
    vectorize_email,
)
from mailmine.runstate import RunState

from conftest import FIXTURE_CSV, LABELS_CSV, PAPER_LABELS


def mk_email(subject, body, email_id=999):
    return Email(
        id=email_id,
        sender="someone@example.org",
        receivers=("other@example.org",),
        subject=subject,
        body=body,
        timestamp=datetime(2016, 7, 1, 9, 0, tzinfo=timezone.utc),
    )


class TestProposeMedoids:
    def test_fixture_medoids_one_per_activity(self, labeled_run):
        proposals = propose_medoids(labeled_run)
        assert len(proposals) == 4
        clusters = {c.activity_id: set(c.email_ids) for c in labeled_run.all_activities()}
        for activity_id, email in proposals:
            assert email.id in clusters[activity_id]

    def test_run_without_activities_errors(self, fresh_run):
        with pytest.raises(PhaseOrderError):
            propose_medoids(fresh_run)


class TestAssignLabel:
    def test_paper_labels_inherited_by_members(self, labeled_run):
        for cluster in labeled_run.all_activities():
            label = labeled_run.label_of(cluster.activity_id)
            assert label == PAPER_LABELS[cluster.activity_id]
            for email_id in cluster.email_ids:
                assert labeled_run.email_label(email_id) == label

    def test_whitespace_label_rejected(self, labeled_run):
        with pytest.raises(ContractError):
            labeled_run.assign_label(0, "   ")

    def test_unknown_activity_rejected(self, labeled_run):
        with pytest.raises(KeyError):
            labeled_run.assign_label(777, "nope")

    def test_relabel_overwrites_and_keeps_audit(self, tmp_path):
        run = RunState.create(FIXTURE_CSV, PipelineConfig())
        run.run_topics(k=2)
        run.run_instances(topic_id=0, k=2)
        run.run_activities(0, k=4)
        run.assign_label(0, "first name")
        run.assign_label(0, "second name")
        assert run.label_of(0) == "second name"
        assert run.label_audit == [
            {"activity_id": 0, "previous": "first name", "new": "second name"}
        ]

    def test_totality_after_labeling_all_clusters(self, labeled_run):
        mission_ids = labeled_run.topic_by_id(0).email_ids
        labels = [labeled_run.email_label(i) for i in mission_ids]
        assert all(label is not None for label in labels)


class TestLabelsFile:
    def test_load_csv(self):
        pairs = load_labels_csv(LABELS_CSV)
        assert dict(pairs) == PAPER_LABELS

    def test_apply_marks_labeled_by_file(self, tmp_path):
        run = RunState.create(FIXTURE_CSV, PipelineConfig())
        run.run_topics(k=2)
        run.run_instances(topic_id=0, k=2)
        run.run_activities(0, k=4)
        count = apply_labels_file(run, LABELS_CSV)
        assert count == 4
        store = label_store(run)
        assert all(entry.labeled_by == "file" for entry in store.values())
        assert store[0].medoid_email_id in run.activity_by_id(0).email_ids
        assert store[0].centroid.shape == run.activities[0].centroids[0].shape

    def test_bad_row_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("justonecolumn\n")
        with pytest.raises(ContractError):
            load_labels_csv(p)


class TestClassify:
    def test_medoid_body_maps_to_own_label(self, labeled_run):
        medoid = labeled_run.corpus.by_id(labeled_run.activity_by_id(1).medoid_id)
        result = classify(
            mk_email(medoid.subject, medoid.body), labeled_run, topic_id=0
        )
        assert result.predicted_label == PAPER_LABELS[1]
        assert result.distance_to_centroid < 0.75

    def test_empty_email_unclassifiable(self, labeled_run):
        result = classify(mk_email("", ""), labeled_run, topic_id=0)
        assert result.unclassifiable
        assert result.predicted_label is None

    def test_out_of_vocabulary_terms_dropped(self, labeled_run):
        # words unseen in the corpus contribute nothing, classification still works
        result = classify(
            mk_email("mission demand", "mission zzz qqq xyzzy demand"), labeled_run, 0
        )
        assert not result.unclassifiable

    def test_single_labeled_activity_confidence_one(self, tmp_path):
        run = RunState.create(FIXTURE_CSV, PipelineConfig())
        run.run_topics(k=2)
        run.run_instances(topic_id=0, k=2)
        run.run_activities(0, k=2)
        run.assign_label(0, "only one labeled")
        run.assign_label(1, "the other")
        # restrict store to one entry by deleting the other label
        del run.activity_labels[1]
        result = classify(mk_email("mission demand", "mission demand cost"), run, 0)
        assert result.confidence == 1.0

    def test_confidence_monotone_in_nearest_distance(self):
        # 1 - d1/(d1+d2) decreases as d1 grows for fixed d2
        d2 = 0.8
        conf = [1 - d1 / (d1 + d2) for d1 in (0.1, 0.3, 0.5, 0.7)]
        assert conf == sorted(conf, reverse=True)

    def test_classify_before_labels_errors(self, fresh_run):
        with pytest.raises(PhaseOrderError):
            classify(mk_email("a", "b"), fresh_run)

    def test_deterministic(self, labeled_run):
        email = mk_email("mission demand", "please find attached the detailed cost")
        r1 = classify(email, labeled_run, 0)
        r2 = classify(email, labeled_run, 0)
        assert r1 == r2

    def test_leave_one_out_email_22(self, tmp_path):
        """Hold email 22 out, retrain, classify it: the oracle is the full-run
        assignment, which puts 22 in the same activity as email 3."""
        from mailmine.ingest import parse_csv, write_csv

        corpus = parse_csv(FIXTURE_CSV)
        loo = corpus.subset([i for i in corpus.ids() if i != 22])
        loo_csv = tmp_path / "loo.csv"
        write_csv(loo, loo_csv)
        run = RunState.create(loo_csv, PipelineConfig())
        run.run_topics(k=2)
        run.run_instances(topic_id=0, k=2)
        # seed from what remains of the demand thread (20,21,23), the same
        # user choice the activity walkthrough makes on the full corpus
        run.run_activities(0, k=4, seed_override=1)
        # label clusters by membership so names line up with the paper's
        for cluster in run.activities[0].clusters:
            if 3 in cluster.email_ids:
                run.assign_label(cluster.activity_id, "respond information")
            elif 2 in cluster.email_ids:
                run.assign_label(cluster.activity_id, "request information")
            elif 1 in cluster.email_ids:
                run.assign_label(cluster.activity_id, "submit demand")
            else:
                run.assign_label(cluster.activity_id, "accept demand or refuse demand")
        held_out = corpus.by_id(22)
        result = classify(held_out, run, topic_id=0)
        assert result.predicted_label == "respond information"


class TestVectorize:
    def test_vector_matches_training_row(self, labeled_run):
        # a corpus email re-vectorized through the stored model must land on
        # its own training composite vector
        import numpy as np

        space = labeled_run.activity_space()
        email = labeled_run.corpus.by_id(22)
        fresh = vectorize_email(email, labeled_run, 0)
        trained = space.rows_for([22])[0]
        assert np.allclose(fresh, trained, atol=1e-9)
