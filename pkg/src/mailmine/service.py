"""HTTP JSON service backing the labeling UI.

The run file is the single source of truth: every mutation persists it via
write-then-rename before responding. Mutations serialize through one lock;
labeling while a recut is in flight is refused with 409.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import ContractError, MailMineError, PhaseOrderError
from .export import build_event_log, mine_dfg, write_csv, xes_string
from .ingest import Email, parse_timestamp
from .labeling import classify as classify_email
from .runstate import RunState


class LabelBody(BaseModel):
    label: str


class RecutBody(BaseModel):
    phase: str
    k: int
    topic_id: int | None = None


class ClassifyBody(BaseModel):
    subject: str = ""
    body: str = ""
    sender: str = "unknown@local"
    receivers: list[str] = ["unknown@local"]
    timestamp: str | None = None
    topic_id: int | None = None


def _email_payload(email: Email) -> dict:
    return {
        "id": email.id,
        "sender": email.sender,
        "receivers": list(email.receivers),
        "subject": email.subject,
        "body": email.body,
        "timestamp": email.timestamp.isoformat(),
    }


def create_app(state: RunState, run_path: str, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="mailmine labeling service", version="1")
    write_lock = threading.Lock()
    recut_in_flight = threading.Event()

    def persist() -> None:
        state.save(run_path)

    api = "/api/v1"

    @app.get(api + "/run")
    def run_summary():
        return {
            "corpus_path": state.corpus_path,
            "corpus_size": len(state.corpus),
            "config": state.config.to_dict(),
            "phases": {
                "topics": state.topics is not None,
                "instances": sorted(state.instances),
                "activities": sorted(state.activities),
            },
            "unlabeled_activities": state.unlabeled_activities(),
        }

    @app.get(api + "/topics")
    def topics():
        if state.topics is None:
            raise HTTPException(status_code=404, detail="topics phase has not run")
        return [
            {
                "cluster_id": tc.cluster_id,
                "email_ids": list(tc.email_ids),
                "size": len(tc.email_ids),
                "label": state.topic_labels.get(tc.cluster_id),
                "has_instances": tc.cluster_id in state.instances,
                "has_activities": tc.cluster_id in state.activities,
            }
            for tc in state.topics.clusters
        ]

    def _topic_or_404(topic_id: int):
        try:
            return state.topic_by_id(topic_id)
        except (KeyError, PhaseOrderError):
            raise HTTPException(status_code=404, detail=f"unknown topic {topic_id}")

    @app.get(api + "/topics/{topic_id}/dendrogram")
    def topic_dendrogram(topic_id: int, phase: str = "topics"):
        _topic_or_404(topic_id)
        if phase == "topics":
            tree = state.topics.dendrogram.to_json_tree()
        elif phase == "instances":
            if topic_id not in state.instances:
                raise HTTPException(status_code=404, detail="instances phase has not run")
            tree = state.instances[topic_id].dendrogram.to_json_tree()
        else:
            raise HTTPException(status_code=404, detail=f"no dendrogram for phase {phase!r}")
        return {"phase": phase, "tree": tree}

    @app.get(api + "/topics/{topic_id}/instances")
    def topic_instances(topic_id: int):
        _topic_or_404(topic_id)
        if topic_id not in state.instances:
            raise HTTPException(status_code=404, detail="instances phase has not run")
        payload = []
        for inst in state.instances[topic_id].instances:
            emails = [state.corpus.by_id(i) for i in inst.email_ids]
            payload.append(
                {
                    "instance_id": inst.instance_id,
                    "email_ids": list(inst.email_ids),
                    "start": emails[0].timestamp.isoformat(),
                    "end": emails[-1].timestamp.isoformat(),
                }
            )
        return payload

    @app.get(api + "/topics/{topic_id}/activities")
    def topic_activities(topic_id: int):
        _topic_or_404(topic_id)
        if topic_id not in state.activities:
            raise HTTPException(status_code=404, detail="activities phase has not run")
        entry = state.activities[topic_id]
        return {
            "stats": {
                "average_size": entry.stats_average,
                "sizes": entry.stats_sizes,
                "initial_k": entry.stats_initial_k,
            },
            "chosen_k": entry.chosen_k,
            "seed_instance_id": entry.seed_instance_id,
            "sweep": entry.sweep,
            "clusters": [
                {
                    "activity_id": c.activity_id,
                    "email_ids": list(c.email_ids),
                    "medoid": _email_payload(state.corpus.by_id(c.medoid_id)),
                    "members": [_email_payload(state.corpus.by_id(i)) for i in c.email_ids],
                    "label": state.label_of(c.activity_id),
                }
                for c in entry.clusters
            ],
        }

    @app.put(api + "/activities/{activity_id}/label")
    def put_label(activity_id: int, body: LabelBody):
        if recut_in_flight.is_set():
            raise HTTPException(status_code=409, detail="a recut is in flight; retry")
        if not body.label.strip():
            raise HTTPException(status_code=422, detail="label must be non-empty")
        with write_lock:
            try:
                state.assign_label(activity_id, body.label, labeled_by="user")
            except KeyError:
                raise HTTPException(status_code=404, detail=f"unknown activity {activity_id}")
            except ContractError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            persist()
        return {"activity_id": activity_id, "label": body.label.strip()}

    @app.post(api + "/recut")
    def recut(body: RecutBody):
        if body.phase not in ("topics", "instances", "activities"):
            raise HTTPException(status_code=422, detail=f"unknown phase {body.phase!r}")
        recut_in_flight.set()
        try:
            with write_lock:
                try:
                    if body.phase == "topics":
                        state.run_topics(k=body.k)
                    elif body.phase == "instances":
                        if body.topic_id is None:
                            raise HTTPException(status_code=422, detail="instances recut needs topic_id")
                        _topic_or_404(body.topic_id)
                        state.run_instances(topic_id=body.topic_id, k=body.k)
                    else:
                        if body.topic_id is None:
                            raise HTTPException(status_code=422, detail="activities recut needs topic_id")
                        _topic_or_404(body.topic_id)
                        state.run_activities(body.topic_id, k=body.k)
                except PhaseOrderError as exc:
                    raise HTTPException(status_code=409, detail=str(exc))
                except ContractError as exc:
                    raise HTTPException(status_code=422, detail=str(exc))
                persist()
        finally:
            recut_in_flight.clear()
        return run_summary()

    @app.post(api + "/classify")
    def classify(body: ClassifyBody):
        if not state.activity_labels:
            raise HTTPException(status_code=409, detail="no labeled activities yet")
        ts = parse_timestamp(body.timestamp) if body.timestamp else state.corpus.emails[-1].timestamp
        email = Email(
            id=max(state.corpus.ids()) + 1,
            sender=body.sender,
            receivers=tuple(body.receivers) or ("unknown@local",),
            subject=body.subject,
            body=body.body,
            timestamp=ts,
        )
        try:
            result = classify_email(email, state, body.topic_id)
        except PhaseOrderError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {
            "predicted_activity_id": result.predicted_activity_id,
            "predicted_label": result.predicted_label,
            "distance_to_centroid": result.distance_to_centroid,
            "confidence": result.confidence,
            "unclassifiable": result.unclassifiable,
        }

    @app.get(api + "/export/{fmt}")
    def export(fmt: str, topic: int):
        _topic_or_404(topic)
        try:
            log = build_event_log(state, topic)
        except (PhaseOrderError, ContractError) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        if fmt == "xes":
            return PlainTextResponse(
                xes_string(log, state.corpus),
                media_type="application/xml",
                headers={"Content-Disposition": f"attachment; filename=topic_{topic}.xes"},
            )
        if fmt == "csv":
            import io

            buf = io.StringIO()
            import csv as _csv

            from .export import EVENT_CSV_COLUMNS
            from .ingest import format_timestamp

            writer = _csv.writer(buf, lineterminator="\n")
            writer.writerow(EVENT_CSV_COLUMNS)
            for r in log.records:
                writer.writerow(
                    [r.case_id, r.activity, format_timestamp(r.timestamp), r.resource,
                     r.lifecycle, r.email_id]
                )
            return PlainTextResponse(
                buf.getvalue(),
                media_type="text/csv",
                headers={"Content-Disposition": f"attachment; filename=topic_{topic}.csv"},
            )
        if fmt == "dot":
            return PlainTextResponse(mine_dfg(log).to_dot(), media_type="text/vnd.graphviz")
        raise HTTPException(status_code=404, detail=f"unknown export format {fmt!r}")

    @app.exception_handler(MailMineError)
    def mailmine_error(_request, exc: MailMineError):
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
