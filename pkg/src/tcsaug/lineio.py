"""Line-delimited JSON records and checksums.

All pipeline artifacts are UTF-8 JSON-lines files. Decoding is strict:
invalid byte sequences abort with the offending line number instead of
being replaced, so artifacts stay byte-stable across machines.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import InputError


def read_records(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_no, record) for every non-blank line of a JSONL file.

    Line numbers are 1-based. Raises InputError on undecodable bytes,
    unparseable JSON, or a record that is not a JSON object.
    """
    path = Path(path)
    if not path.exists():
        raise InputError("file does not exist", path=str(path))
    with open(path, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise InputError(f"invalid UTF-8: {exc}", line_no=line_no, path=str(path)) from exc
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                raise InputError(f"invalid JSON: {exc.msg}", line_no=line_no, path=str(path)) from exc
            if not isinstance(record, dict):
                raise InputError("record is not a JSON object", line_no=line_no, path=str(path))
            yield line_no, record


def load_records(path: str | Path) -> list[dict]:
    return [record for _, record in read_records(path)]


def dumps_record(record: dict) -> str:
    """Canonical single-line encoding: no ASCII escaping, fixed separators."""
    return json.dumps(record, ensure_ascii=False, separators=(", ", ": "))


def write_records(path: str | Path, records: Iterable[dict]) -> str:
    """Write records as JSONL atomically and return the sha256 of the bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = "".join(dumps_record(r) + "\n" for r in records).encode("utf-8")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)
    return hashlib.sha256(payload).hexdigest()


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_json(path: str | Path, obj: Any) -> None:
    """Atomic pretty-printed JSON write for sidecar files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def read_json(path: str | Path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
