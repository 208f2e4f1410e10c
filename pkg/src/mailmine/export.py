"""Event-log export (CSV, IEEE 1849 XES) and a directly-follows graph miner.

Every labeled email becomes exactly one event with lifecycle "complete";
repeated activities inside a case stay separate events so loops remain
visible in the directly-follows graph.
"""

from __future__ import annotations

import csv
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

from .errors import ContractError, PhaseOrderError
from .ingest import Corpus, format_timestamp, parse_timestamp
from .runstate import RunState

EVENT_CSV_COLUMNS = ["case_id", "activity", "timestamp", "resource", "lifecycle", "email_id"]


@dataclass(frozen=True)
class EventRecord:
    case_id: int
    activity: str
    timestamp: datetime
    resource: str
    email_id: int
    lifecycle: str = "complete"


@dataclass(frozen=True)
class EventLog:
    records: tuple[EventRecord, ...]
    topic_cluster_id: int | None = None

    def cases(self) -> dict[int, list[EventRecord]]:
        grouped: dict[int, list[EventRecord]] = {}
        for record in self.records:
            grouped.setdefault(record.case_id, []).append(record)
        return grouped


def build_event_log(run: RunState, topic_id: int) -> EventLog:
    """One record per labeled email of the topic; case_id = local instance id."""
    if topic_id not in run.instances or topic_id not in run.activities:
        raise PhaseOrderError("instances and activities phases must run before export")
    unlabeled = run.unlabeled_activities(topic_id)
    if unlabeled:
        raise ContractError(f"unlabeled activity clusters: {sorted(unlabeled)}")

    label_by_email: dict[int, str] = {}
    for cluster in run.activities[topic_id].clusters:
        label = run.label_of(cluster.activity_id)
        for email_id in cluster.email_ids:
            label_by_email[email_id] = label

    records: list[EventRecord] = []
    for instance in run.instances[topic_id].instances:
        for email_id in instance.email_ids:
            email = run.corpus.by_id(email_id)
            records.append(
                EventRecord(
                    case_id=instance.instance_id,
                    activity=label_by_email[email_id],
                    timestamp=email.timestamp,
                    resource=email.sender,
                    email_id=email_id,
                )
            )
    records.sort(key=lambda r: (r.case_id, r.timestamp, r.email_id))
    return EventLog(records=tuple(records), topic_cluster_id=topic_id)


# ---------------------------------------------------------------------------
# CSV


def write_csv(log: EventLog, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_CSV_COLUMNS)
        for r in log.records:
            writer.writerow(
                [r.case_id, r.activity, format_timestamp(r.timestamp), r.resource, r.lifecycle, r.email_id]
            )


def read_csv(path: str | Path) -> EventLog:
    records = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in EVENT_CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ContractError(f"event CSV missing columns: {missing}")
        for row in reader:
            records.append(
                EventRecord(
                    case_id=int(row["case_id"]),
                    activity=row["activity"],
                    timestamp=parse_timestamp(row["timestamp"]),
                    resource=row["resource"],
                    lifecycle=row["lifecycle"],
                    email_id=int(row["email_id"]),
                )
            )
    return EventLog(records=tuple(records))


# ---------------------------------------------------------------------------
# XES (IEEE 1849-2016)

_XES_EXTENSIONS = [
    ("Concept", "concept", "http://www.xes-standard.org/concept.xesext"),
    ("Time", "time", "http://www.xes-standard.org/time.xesext"),
    ("Organizational", "org", "http://www.xes-standard.org/org.xesext"),
    ("Lifecycle", "lifecycle", "http://www.xes-standard.org/lifecycle.xesext"),
]


def _xes_timestamp(ts: datetime) -> str:
    return ts.isoformat()


def xes_string(log: EventLog, corpus: Corpus | None = None) -> str:
    """Deterministic XES serialization: one trace per case, events in order."""
    receivers_of = {}
    if corpus is not None:
        receivers_of = {e.id: ";".join(e.receivers) for e in corpus.emails}

    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    lines.append('<log xes.version="1849-2016" xes.features="">')
    for name, prefix, uri in _XES_EXTENSIONS:
        lines.append(f'  <extension name="{name}" prefix="{prefix}" uri="{uri}"/>')
    lines.append('  <global scope="trace">')
    lines.append('    <string key="concept:name" value="UNKNOWN"/>')
    lines.append("  </global>")
    lines.append('  <global scope="event">')
    lines.append('    <string key="concept:name" value="UNKNOWN"/>')
    lines.append('    <date key="time:timestamp" value="1970-01-01T00:00:00+00:00"/>')
    lines.append('    <string key="lifecycle:transition" value="complete"/>')
    lines.append("  </global>")
    lines.append('  <classifier name="Activity" keys="concept:name"/>')
    lines.append('  <string key="concept:name" value="mailmine event log"/>')
    for case_id, events in sorted(log.cases().items()):
        lines.append("  <trace>")
        lines.append(f'    <string key="concept:name" value="case_{case_id}"/>')
        for r in events:
            lines.append("    <event>")
            lines.append(f"      <string key=\"concept:name\" value={quoteattr(r.activity)}/>")
            lines.append(f"      <string key=\"org:resource\" value={quoteattr(r.resource)}/>")
            lines.append(f'      <date key="time:timestamp" value="{_xes_timestamp(r.timestamp)}"/>')
            lines.append(f"      <string key=\"lifecycle:transition\" value={quoteattr(r.lifecycle)}/>")
            lines.append(f'      <int key="email:id" value="{r.email_id}"/>')
            if r.email_id in receivers_of:
                lines.append(
                    f"      <string key=\"email:receivers\" value={quoteattr(receivers_of[r.email_id])}/>"
                )
            lines.append("    </event>")
        lines.append("  </trace>")
    lines.append("</log>")
    return "\n".join(lines) + "\n"


def write_xes(log: EventLog, path: str | Path, corpus: Corpus | None = None) -> None:
    Path(path).write_text(xes_string(log, corpus), "utf-8")


_XES_ATTRIBUTE_TAGS = {"string", "date", "int", "float", "boolean", "id", "list"}


def validate_xes(source: str | Path) -> list[str]:
    """Structural validation against the IEEE 1849 grammar; [] means valid.

    Checks the element hierarchy (log > extension/global/classifier/attr/trace,
    trace > attr/event, event > attr), required attributes of each element and
    the datatype lexical forms for date/int/float/boolean values.
    """
    errors: list[str] = []
    text = Path(source).read_text("utf-8") if isinstance(source, Path) else source
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        return [f"not well-formed XML: {exc}"]

    if root.tag != "log":
        return [f"root element must be <log>, got <{root.tag}>"]
    if "xes.version" not in root.attrib:
        errors.append("<log> lacks the xes.version attribute")

    def check_attribute(elem: ET.Element, where: str) -> None:
        if elem.tag == "list":
            if "key" not in elem.attrib:
                errors.append(f"{where}: <list> needs a key")
            for child in elem:
                if child.tag == "values":
                    for sub in child:
                        check_attribute(sub, where)
                else:
                    check_attribute(child, where)
            return
        if "key" not in elem.attrib or "value" not in elem.attrib:
            errors.append(f"{where}: <{elem.tag}> needs key and value attributes")
            return
        value = elem.attrib["value"]
        if elem.tag == "date":
            try:
                datetime.fromisoformat(value)
            except ValueError:
                errors.append(f"{where}: bad xs:dateTime {value!r}")
        elif elem.tag == "int":
            try:
                int(value)
            except ValueError:
                errors.append(f"{where}: bad xs:long {value!r}")
        elif elem.tag == "float":
            try:
                float(value)
            except ValueError:
                errors.append(f"{where}: bad xs:double {value!r}")
        elif elem.tag == "boolean":
            if value not in ("true", "false"):
                errors.append(f"{where}: bad xs:boolean {value!r}")
        for child in elem:  # nested attributes are legal
            check_attribute(child, where)

    for child in root:
        if child.tag == "extension":
            for needed in ("name", "prefix", "uri"):
                if needed not in child.attrib:
                    errors.append(f"<extension> lacks {needed}")
        elif child.tag == "global":
            if child.attrib.get("scope") not in ("trace", "event"):
                errors.append("<global> scope must be trace or event")
            for attr in child:
                check_attribute(attr, "global")
        elif child.tag == "classifier":
            for needed in ("name", "keys"):
                if needed not in child.attrib:
                    errors.append(f"<classifier> lacks {needed}")
        elif child.tag == "trace":
            for sub in child:
                if sub.tag == "event":
                    for attr in sub:
                        check_attribute(attr, "event")
                elif sub.tag in _XES_ATTRIBUTE_TAGS:
                    check_attribute(sub, "trace")
                else:
                    errors.append(f"unexpected <{sub.tag}> inside <trace>")
        elif child.tag in _XES_ATTRIBUTE_TAGS:
            check_attribute(child, "log")
        else:
            errors.append(f"unexpected <{child.tag}> inside <log>")
    return errors


# ---------------------------------------------------------------------------
# directly-follows graph


@dataclass(frozen=True)
class DirectlyFollowsGraph:
    nodes: dict[str, int]  # activity -> total occurrences
    edges: dict[tuple[str, str], int]  # (from, to) -> adjacency count
    start_counts: dict[str, int]
    end_counts: dict[str, int]

    def to_dot(self) -> str:
        lines = ["digraph dfg {", "  rankdir=LR;"]
        for activity in sorted(self.nodes):
            label = f"{activity}\\n{self.nodes[activity]}"
            lines.append(f'  "{activity}" [label="{label}"];')
        lines.append('  "__start__" [shape=circle, label="start"];')
        lines.append('  "__end__" [shape=doublecircle, label="end"];')
        for activity in sorted(self.start_counts):
            lines.append(f'  "__start__" -> "{activity}" [label="{self.start_counts[activity]}"];')
        for (src, dst) in sorted(self.edges):
            lines.append(f'  "{src}" -> "{dst}" [label="{self.edges[(src, dst)]}"];')
        for activity in sorted(self.end_counts):
            lines.append(f'  "{activity}" -> "__end__" [label="{self.end_counts[activity]}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def mine_dfg(log: EventLog) -> DirectlyFollowsGraph:
    """Count adjacent activity pairs per case; self-loops mark repetitions."""
    if not log.records:
        raise ContractError("cannot mine an empty event log")
    nodes: dict[str, int] = {}
    edges: dict[tuple[str, str], int] = {}
    starts: dict[str, int] = {}
    ends: dict[str, int] = {}
    for _case_id, events in sorted(log.cases().items()):
        sequence = [e.activity for e in events]
        starts[sequence[0]] = starts.get(sequence[0], 0) + 1
        ends[sequence[-1]] = ends.get(sequence[-1], 0) + 1
        for activity in sequence:
            nodes[activity] = nodes.get(activity, 0) + 1
        for a, b in zip(sequence, sequence[1:]):
            edges[(a, b)] = edges.get((a, b), 0) + 1
    return DirectlyFollowsGraph(nodes=nodes, edges=edges, start_counts=starts, end_counts=ends)
