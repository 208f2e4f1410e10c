"""Email corpus ingestion from CSV files and mbox archives.

Threading metadata (References / In-Reply-To) is parsed and dropped on
purpose: every downstream stage treats emails as unrelated documents.
"""

from __future__ import annotations

import csv
import mailbox
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from email.utils import parsedate_to_datetime
from pathlib import Path
from typing import Sequence

from .errors import CorpusError, RowError, SchemaError

CSV_COLUMNS = ["EmailID", "Sender", "Receiver", "Subject", "Timestamp", "Body"]
TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"

_EPOCH_MIN = datetime(1970, 1, 1, tzinfo=timezone.utc)
_EPOCH_MAX = datetime(2100, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class Email:
    """One parsed message. Receivers are kept in file order."""

    id: int
    sender: str
    receivers: tuple[str, ...]
    subject: str
    body: str
    timestamp: datetime

    def participants(self) -> frozenset[str]:
        return frozenset((self.sender, *self.receivers))


@dataclass(frozen=True)
class Corpus:
    emails: tuple[Email, ...]
    source_descriptor: str = ""
    warnings: int = 0

    def __post_init__(self) -> None:
        if not self.emails:
            raise CorpusError("empty corpus")
        ids = [e.id for e in self.emails]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise CorpusError(f"duplicate email ids: {dupes}")

    def __len__(self) -> int:
        return len(self.emails)

    def ids(self) -> list[int]:
        return [e.id for e in self.emails]

    def by_id(self, email_id: int) -> Email:
        for e in self.emails:
            if e.id == email_id:
                return e
        raise KeyError(email_id)

    def subset(self, keep_ids: Sequence[int]) -> "Corpus":
        wanted = set(keep_ids)
        return replace(self, emails=tuple(e for e in self.emails if e.id in wanted))


def _validate_email(email: Email, where: str) -> Email:
    if email.id <= 0:
        raise RowError(f"{where}: email id must be a positive integer, got {email.id}")
    if email.sender.count("@") != 1:
        raise RowError(f"{where}: implausible sender address {email.sender!r}")
    if not email.receivers:
        raise RowError(f"{where}: at least one receiver is required")
    if email.timestamp.tzinfo is None:
        raise RowError(f"{where}: timestamp lost its timezone")
    if not (_EPOCH_MIN <= email.timestamp < _EPOCH_MAX):
        raise RowError(f"{where}: timestamp {email.timestamp} outside [1970, 2100)")
    return email


def parse_timestamp(raw: str, where: str = "timestamp") -> datetime:
    """Parse `YYYY-MM-DD HH:MM:SS` (assumed UTC) with ISO-8601 fallback."""
    text = raw.strip()
    try:
        return datetime.strptime(text, TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)
    except ValueError:
        pass
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError as exc:
        raise RowError(f"{where}: unparseable timestamp {raw!r}") from exc
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime(TIMESTAMP_FORMAT)


def parse_csv(
    path: str | Path,
    receiver_delimiter: str = ";",
    schema: dict[str, str] | None = None,
) -> Corpus:
    """Read a corpus from CSV. `schema` may remap logical to actual column names."""
    path = Path(path)
    colmap = {name: name for name in CSV_COLUMNS}
    if schema:
        colmap.update(schema)

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [col for logical, col in colmap.items() if col not in header]
        if missing:
            raise SchemaError(f"missing column(s): {', '.join(sorted(missing))}")
        emails = []
        for row_no, row in enumerate(reader, start=2):
            where = f"row {row_no}"
            raw_id = (row[colmap["EmailID"]] or "").strip()
            try:
                email_id = int(raw_id)
            except ValueError as exc:
                raise RowError(f"{where}: bad EmailID {raw_id!r}") from exc
            receivers = tuple(
                part.strip()
                for part in (row[colmap["Receiver"]] or "").split(receiver_delimiter)
                if part.strip()
            )
            email = Email(
                id=email_id,
                sender=(row[colmap["Sender"]] or "").strip(),
                receivers=receivers,
                subject=row[colmap["Subject"]] or "",
                body=row[colmap["Body"]] or "",
                timestamp=parse_timestamp(row[colmap["Timestamp"]] or "", where),
            )
            emails.append(_validate_email(email, where))

    return Corpus(emails=tuple(emails), source_descriptor=str(path))


def write_csv(corpus: Corpus, path: str | Path) -> None:
    """Serialize a corpus so that parse_csv(write_csv(c)) == c, byte-stable."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for e in corpus.emails:
            writer.writerow(
                [
                    e.id,
                    e.sender,
                    ";".join(e.receivers),
                    e.subject,
                    format_timestamp(e.timestamp),
                    e.body,
                ]
            )


def _mbox_body(message) -> str:
    if message.is_multipart():
        chunks = []
        for part in message.walk():
            if part.get_content_type() == "text/plain":
                payload = part.get_payload(decode=True)
                if payload:
                    chunks.append(payload.decode("utf-8", errors="replace"))
        return "\n".join(chunks)
    payload = message.get_payload(decode=True)
    if payload is None:
        return str(message.get_payload() or "")
    return payload.decode("utf-8", errors="replace")


def parse_mbox(path: str | Path) -> Corpus:
    """Read an RFC-4155 mbox; ids are sequential, threading headers dropped."""
    path = Path(path)
    box = mailbox.mbox(str(path))
    emails = []
    skipped = 0
    next_id = 1
    for message in box:
        try:
            sender = str(message.get("From", "")).strip()
            # addresses may come as "Name <addr@host>"
            if "<" in sender and ">" in sender:
                sender = sender[sender.index("<") + 1 : sender.index(">")]
            raw_to = str(message.get("To", "")).strip()
            receivers = []
            for part in raw_to.split(","):
                addr = part.strip()
                if "<" in addr and ">" in addr:
                    addr = addr[addr.index("<") + 1 : addr.index(">")]
                if addr:
                    receivers.append(addr)
            ts = parsedate_to_datetime(str(message.get("Date")))
            if ts.tzinfo is None:
                ts = ts.replace(tzinfo=timezone.utc)
            email = Email(
                id=next_id,
                sender=sender,
                receivers=tuple(receivers),
                subject=str(message.get("Subject", "") or ""),
                body=_mbox_body(message),
                timestamp=ts.astimezone(timezone.utc),
            )
            emails.append(_validate_email(email, f"message {next_id}"))
            next_id += 1
        except Exception:
            skipped += 1
    if not emails:
        raise CorpusError("empty corpus")
    return Corpus(
        emails=tuple(emails), source_descriptor=str(path), warnings=skipped
    )
