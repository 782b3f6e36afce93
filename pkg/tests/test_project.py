import os
import shutil

import pytest

from gounsafe.dataset import DatasetRecord, read_jsonl
from gounsafe.errors import DatasetValidationError
from gounsafe.project import extract_project, extract_source, go_files, link_records
from gounsafe.frontend import SourceUnit
from gounsafe.cfg import validate_cfg

from conftest import DATA_DIR, TOY_DATASET, TOY_PROJECT

VENDORED = """package v

import "unsafe"

func Addr(p *int) uintptr {
	return uintptr(unsafe.Pointer(p))
}
"""


@pytest.fixture
def vendored_project(tmp_path):
    root = tmp_path / "proj"
    shutil.copytree(TOY_PROJECT, root)
    (root / "vendor" / "lib").mkdir(parents=True)
    (root / "vendor" / "lib" / "v.go").write_text(VENDORED)
    (root / ".hidden").mkdir()
    (root / ".hidden" / "x.go").write_text(VENDORED)
    return str(root)


def test_toy_inventory():
    inv = extract_project(TOY_PROJECT)
    assert inv.module_path == "example.com/toyproject"
    assert inv.files_parsed == 8 and not inv.errors
    assert len(inv.usages) == 38
    keys = [(u.file, u.line) for u in inv.usages]
    assert keys == sorted(keys)
    assert all(u.cfg is not None and not u.error for u in inv.usages)
    for u in inv.usages:
        validate_cfg(u.cfg)


def test_pointer_package_sites_in_two_files():
    inv = extract_project(TOY_PROJECT)
    files = {u.file for u in inv.usages if u.file.startswith("pointer/")}
    assert files == {"pointer/pointer_unsafe.go", "pointer/marshal.go"}
    line16 = inv.by_line()[("pointer/pointer_unsafe.go", 16)]
    assert line16.members == ["Pointer", "uintptr-conversion", "Pointer"]
    assert line16.context_kind == "function-body"


def test_vendor_skipped_unless_requested(vendored_project):
    base = go_files(vendored_project)
    assert not any(p.startswith(("vendor/", ".hidden/")) for p in base)
    with_vendor = go_files(vendored_project, include_vendored=True)
    assert set(with_vendor) - set(base) == {"vendor/lib/v.go"}
    assert len(extract_project(vendored_project, include_vendored=True).usages) == 39
    assert len(extract_project(vendored_project).usages) == 38


def test_unparseable_file_collected_not_raised(tmp_path):
    (tmp_path / "ok.go").write_text(VENDORED)
    (tmp_path / "bad.go").write_text("package p\nfunc {{{\n")
    inv = extract_project(str(tmp_path))
    assert inv.files_parsed == 1 and len(inv.usages) == 1
    assert [p for p, _ in inv.errors] == ["bad.go"]


def test_empty_project(tmp_path):
    inv = extract_project(str(tmp_path))
    assert inv.usages == [] and inv.files_parsed == 0 and inv.module_path == ""


def test_missing_project():
    with pytest.raises(FileNotFoundError):
        extract_project("/nonexistent/project/dir")


def test_opaque_context_reported_per_usage():
    src = "package p\n\nimport \"unsafe\"\n\nvar x unsafe.Pointer = = nil\n"
    (u,) = extract_source(SourceUnit("a.go", src))
    assert u.cfg is None and u.context_kind == "global-variable"
    assert "line 5" in u.error


def test_link_toy_records():
    recs = read_jsonl(TOY_DATASET)
    linked = link_records(recs, DATA_DIR)
    assert len(linked) == 30
    for lu in linked:
        assert (lu.usage.file, lu.usage.line) == (lu.record.file, lu.record.line)
        assert lu.id == f"toyproject/{lu.record.file}:{lu.record.line}"


def test_link_inline_snippet():
    rec = DatasetRecord("snip", "s.go", 6, "cast-basic", "types", VENDORED)
    (lu,) = link_records([rec], "/nonexistent")
    assert lu.usage.members == ["uintptr-conversion", "Pointer"]
    assert lu.usage.context_kind == "function-body"


def test_link_rejects_line_without_usage():
    rec = DatasetRecord("toyproject", "pointer/marshal.go", 1, "unused", "unused")
    with pytest.raises(DatasetValidationError, match="no unsafe usage"):
        link_records([rec], DATA_DIR)
