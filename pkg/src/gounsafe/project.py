"""Project walking, usage inventory and linking of labelled records to graphs."""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import Sequence

from gounsafe.cfg import EnrichedCfg, extract_cfg
from gounsafe.dataset import DatasetRecord, what_index, why_index
from gounsafe.errors import DatasetValidationError, GoUnsafeError, ParseError
from gounsafe.frontend import SourceUnit, find_unsafe_usages, parse_source

SKIP_DIRS = {".git", "testdata"}
VENDOR = "vendor"


@dataclass
class UsageInstance:
    """All usage sites on one source line, with the graph of their context."""
    file: str
    line: int
    context_kind: str
    members: list[str]
    cfg: EnrichedCfg | None = None
    usage_vertex: int = 0
    error: str = ""

    @property
    def id(self) -> str:
        return f"{self.file}:{self.line}"


@dataclass
class Inventory:
    root: str
    module_path: str
    usages: list[UsageInstance] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)
    files_parsed: int = 0

    def by_line(self) -> dict[tuple[str, int], UsageInstance]:
        return {(u.file, u.line): u for u in self.usages}


def read_module_path(root: str) -> str:
    path = os.path.join(root, "go.mod")
    if not os.path.isfile(path):
        return ""
    with open(path, encoding="utf-8") as fh:
        m = re.search(r"^\s*module\s+(\S+)", fh.read(), re.M)
    return m.group(1).strip('"') if m else ""


def go_files(root: str, include_vendored: bool = False) -> list[str]:
    """Relative paths of the project's Go files in a stable order."""
    out = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d not in SKIP_DIRS and not d.startswith(".")
                             and (include_vendored or d != VENDOR))
        for f in sorted(filenames):
            if f.endswith(".go"):
                out.append(os.path.relpath(os.path.join(dirpath, f), root).replace(os.sep, "/"))
    return sorted(out)


def extract_source(unit: SourceUnit) -> list[UsageInstance]:
    """Usage instances of one file; sites on the same line form one instance."""
    root = parse_source(unit)
    sites = find_unsafe_usages(root, unit)
    by_line: dict[int, list] = {}
    for s in sites:
        by_line.setdefault(s.line, []).append(s)
    by_context: dict[int, list] = {}
    for s in sites:
        if s.context is not None:
            by_context.setdefault(id(s.context.node), []).append(s)
    graphs: dict[int, EnrichedCfg | str] = {}
    out = []
    for line in sorted(by_line):
        group = by_line[line]
        head = group[0]
        members = [s.api_member for s in group]
        if head.context is None:
            out.append(UsageInstance(unit.path, line, "", members,
                                     error="usage outside any function, type or variable"))
            continue
        key = id(head.context.node)
        if key not in graphs:
            try:
                graphs[key] = extract_cfg(head.context, by_context[key])
            except GoUnsafeError as e:
                graphs[key] = str(e)
        g = graphs[key]
        if isinstance(g, str):
            out.append(UsageInstance(unit.path, line, head.context.kind, members, error=g))
        else:
            out.append(UsageInstance(unit.path, line, head.context.kind, members, g,
                                     g.usage_vertices[head]))
    return out


def _package_path(module: str, rel_file: str) -> str:
    d = os.path.dirname(rel_file)
    if not module:
        return d
    return module if not d else f"{module}/{d}"


def extract_project(root: str, include_vendored: bool = False) -> Inventory:
    """Parse every Go file; per-file failures are collected, not raised."""
    if not os.path.isdir(root):
        raise FileNotFoundError(root)
    inv = Inventory(root, read_module_path(root))
    for rel in go_files(root, include_vendored):
        with open(os.path.join(root, rel), encoding="utf-8", errors="replace") as fh:
            text = fh.read()
        unit = SourceUnit(rel, text, module_path=inv.module_path,
                          package_path=_package_path(inv.module_path, rel))
        try:
            inv.usages.extend(extract_source(unit))
        except ParseError as e:
            inv.errors.append((rel, str(e)))
            continue
        inv.files_parsed += 1
    inv.usages.sort(key=lambda u: (u.file, u.line))
    return inv


@dataclass
class LabeledUsage:
    usage: UsageInstance
    record: DatasetRecord
    what: int
    why: int

    @property
    def id(self) -> str:
        return f"{self.record.project}/{self.usage.id}"


def link_records(records: Sequence[DatasetRecord], projects_dir: str,
                 include_vendored: bool = False) -> list[LabeledUsage]:
    """Attach each record to its extracted usage graph."""
    inventories: dict[str, dict[tuple[str, int], UsageInstance]] = {}
    out = []
    for rec in records:
        if rec.inline:
            unit = SourceUnit(rec.file, rec.context_source)
            try:
                found = {(u.file, u.line): u for u in extract_source(unit)}
            except ParseError as e:
                raise DatasetValidationError(f"record {rec.key}: inline source: {e}") from None
        else:
            if rec.project not in inventories:
                inventories[rec.project] = extract_project(
                    os.path.join(projects_dir, rec.project), include_vendored).by_line()
            found = inventories[rec.project]
        u = found.get((rec.file, rec.line))
        if u is None:
            raise DatasetValidationError(f"record {rec.key}: no unsafe usage on that line")
        if u.cfg is None:
            raise DatasetValidationError(f"record {rec.key}: {u.error}")
        out.append(LabeledUsage(u, rec, what_index(rec.what), why_index(rec.why)))
    return out
