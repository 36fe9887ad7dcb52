"""Corpus record stream: newline-delimited JSON with base64 content.

One record per line:
    {"id": <str>, "names": [[<str>, <int>], ...], "content": <base64>, "lang": <str>?}
Lines starting with '#' are comments; blank lines are ignored. Parsing is
streaming: records are yielded as lines are consumed and errors carry the
1-based physical line number.
"""

import base64
import binascii
import json
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .errors import CorpusDecodeError, CorpusParseError, CorpusSchemaError


@dataclass(slots=True)
class CorpusRecord:
    """One content object plus the filename evidence attached to it."""

    content_id: str
    filename_candidates: list[tuple[str, int]]
    content: bytes
    language: str | None = None

    def validate(self) -> None:
        if not self.content_id:
            raise CorpusSchemaError("content id must be nonempty")
        if not self.filename_candidates:
            raise CorpusSchemaError("at least one filename candidate required")
        for name, count in self.filename_candidates:
            if count < 0:
                raise CorpusSchemaError(f"negative count for candidate {name!r}")


def canonical_filename(candidates: list[tuple[str, int]]) -> str:
    """Most frequent candidate name; ties broken by byte-lexicographic order."""
    if not candidates:
        raise CorpusSchemaError("cannot pick a canonical name from no candidates")
    return min(candidates, key=lambda nc: (-nc[1], nc[0].encode("utf-8")))[0]


def _record_from_obj(obj, line_no: int) -> CorpusRecord:
    if not isinstance(obj, dict):
        raise CorpusSchemaError("record is not a JSON object", line_no)
    for field in ("id", "names", "content"):
        if field not in obj:
            raise CorpusSchemaError(f"missing required field {field!r}", line_no)
    content_id = obj["id"]
    if not isinstance(content_id, str) or not content_id:
        raise CorpusSchemaError("'id' must be a nonempty string", line_no)
    names_raw = obj["names"]
    if not isinstance(names_raw, list) or not names_raw:
        raise CorpusSchemaError("'names' must be a nonempty list", line_no)
    candidates: list[tuple[str, int]] = []
    for item in names_raw:
        if (
            not isinstance(item, (list, tuple))
            or len(item) != 2
            or not isinstance(item[0], str)
            or not isinstance(item[1], int)
            or item[1] < 0
        ):
            raise CorpusSchemaError(f"bad name candidate {item!r}", line_no)
        candidates.append((item[0], item[1]))
    if not isinstance(obj["content"], str):
        raise CorpusSchemaError("'content' must be a base64 string", line_no)
    try:
        content = base64.b64decode(obj["content"], validate=True)
    except (binascii.Error, ValueError) as exc:
        raise CorpusDecodeError(f"invalid base64 content: {exc}", line_no) from exc
    language = obj.get("lang")
    if language is not None and not isinstance(language, str):
        raise CorpusSchemaError("'lang' must be a string when present", line_no)
    return CorpusRecord(content_id, candidates, content, language)


def parse_record_stream(stream: IO[bytes] | Iterable[bytes]) -> Iterator[CorpusRecord]:
    """Yield records in stream order, stopping at the first malformed line."""
    for line_no, raw_line in enumerate(stream, start=1):
        line = raw_line.strip()
        if not line or line.startswith(b"#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusParseError(f"malformed JSON: {exc.msg}", line_no) from exc
        yield _record_from_obj(obj, line_no)


def serialize_record(record: CorpusRecord) -> bytes:
    """One JSONL line (with trailing newline); inverse of parsing."""
    record.validate()
    obj = {
        "id": record.content_id,
        "names": [[name, count] for name, count in record.filename_candidates],
        "content": base64.b64encode(record.content).decode("ascii"),
    }
    if record.language is not None:
        obj["lang"] = record.language
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8") + b"\n"


def write_corpus(path, records: Iterable[CorpusRecord]) -> int:
    """Write records as a JSONL corpus file; returns the record count."""
    count = 0
    with open(path, "wb") as out:
        for record in records:
            out.write(serialize_record(record))
            count += 1
    return count
