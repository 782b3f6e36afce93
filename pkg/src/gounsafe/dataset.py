"""Labelled-usage records: taxonomies, JSONL wire format and a column-mapping importer."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

from gounsafe.errors import DatasetValidationError

WHAT_LABELS = (
    "cast-basic", "cast-bytes", "cast-header", "cast-pointer", "cast-struct", "definition",
    "delegate", "memory-access", "pointer-arithmetic", "syscall", "unused",
)
WHY_LABELS = (
    "atomic", "avoid-gc", "efficiency", "ffi", "generics", "hide-escape-analysis",
    "memory-layout-control", "reflection", "serialization", "types", "unused",
)
FILE_REF = "file"


@dataclass(frozen=True)
class DatasetRecord:
    project: str
    file: str
    line: int
    what: str
    why: str
    context_source: str = FILE_REF  # "file" or an inline Go snippet

    @property
    def inline(self) -> bool:
        return self.context_source != FILE_REF and bool(self.context_source.strip())

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.project, self.file, self.line)

    def to_json(self) -> dict:
        return asdict(self)


def what_index(label: str) -> int:
    return WHAT_LABELS.index(label)


def why_index(label: str) -> int:
    return WHY_LABELS.index(label)


def validate_record(rec: DatasetRecord, where: str = "") -> DatasetRecord:
    tag = where or f"{rec.project}:{rec.file}:{rec.line}"
    if rec.what not in WHAT_LABELS:
        raise DatasetValidationError(f"record {tag}: WHAT label {rec.what!r} is not in the taxonomy")
    if rec.why not in WHY_LABELS:
        raise DatasetValidationError(f"record {tag}: WHY label {rec.why!r} is not in the taxonomy")
    if not isinstance(rec.line, int) or rec.line < 1:
        raise DatasetValidationError(f"record {tag}: line must be a positive integer")
    if not rec.file:
        raise DatasetValidationError(f"record {tag}: missing file")
    return rec


def _from_mapping(d: Mapping, where: str) -> DatasetRecord:
    missing = [f for f in ("project", "file", "line", "what", "why") if f not in d]
    if missing:
        raise DatasetValidationError(f"record {where}: missing fields {missing}")
    try:
        line = int(d["line"])
    except (TypeError, ValueError):
        raise DatasetValidationError(f"record {where}: line {d['line']!r} is not an integer") from None
    rec = DatasetRecord(str(d["project"]), str(d["file"]), line, str(d["what"]), str(d["why"]),
                        str(d.get("context_source") or FILE_REF))
    return validate_record(rec, where)


def read_jsonl(path: str) -> list[DatasetRecord]:
    """Parse and validate every line; the first bad record aborts with its position."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                d = json.loads(raw)
            except json.JSONDecodeError as e:
                raise DatasetValidationError(f"record {path}:{n}: {e.msg}") from None
            records.append(_from_mapping(d, f"{path}:{n}"))
    keys = [r.key for r in records]
    if len(set(keys)) != len(keys):
        dup = next(k for k in keys if keys.count(k) > 1)
        raise DatasetValidationError(f"duplicate record for {dup}")
    return records


def write_jsonl(path: str, records: Iterable[DatasetRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


# columns of the published labelled-usage table; override with a custom mapping
DEFAULT_COLUMNS = {
    "project": "module_path", "file": "file_name", "line": "line_number",
    "what": "label", "why": "label2", "context_source": "",
}


@dataclass
class ImporterAdapter:
    """Maps an external CSV's columns onto ``DatasetRecord`` fields."""
    columns: Mapping[str, str]

    @classmethod
    def default(cls) -> ImporterAdapter:
        return cls(DEFAULT_COLUMNS)

    def convert(self, row: Mapping[str, str], where: str = "") -> DatasetRecord:
        d = {}
        for field, col in self.columns.items():
            if not col:
                continue
            if col not in row:
                raise DatasetValidationError(f"record {where}: column {col!r} missing")
            d[field] = row[col]
        return _from_mapping(d, where)

    def read_csv(self, path: str) -> list[DatasetRecord]:
        with open(path, newline="", encoding="utf-8") as fh:
            return [self.convert(row, f"{path}:{n}") for n, row in enumerate(csv.DictReader(fh), 2)]


def joint_labels(records: Sequence[DatasetRecord]) -> list[str]:
    return [f"{r.what}|{r.why}" for r in records]
