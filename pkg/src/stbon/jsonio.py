"""Canonical JSON-lines helpers.

Records are serialized with sorted keys and compact separators so that
reruns of a seeded experiment produce byte-identical files. Floats go
through Python's shortest-round-trip repr, which parses back to the
exact same double.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

SCHEMA_VERSION = 1


def dumps_canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dumps_canonical(record))
            fh.write("\n")


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


class JsonlWriter:
    """Incremental writer; one serialized record per line, flushed eagerly."""

    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self._path.open("w", encoding="utf-8")

    def write(self, record: dict) -> None:
        self._fh.write(dumps_canonical(record))
        self._fh.write("\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "JsonlWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
