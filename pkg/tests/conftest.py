import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from gounsafe.evaluation import encode_usages  # noqa: E402
from gounsafe.features import build_vocabulary  # noqa: E402
from gounsafe.synthetic import separable_corpus  # noqa: E402


@pytest.fixture(scope="session")
def separable50():
    return separable_corpus(50, seed=0)


@pytest.fixture(scope="session")
def encoded50(separable50):
    vocab = build_vocabulary([u.usage.cfg for u in separable50])
    return vocab, encode_usages(separable50, vocab)


DATA_DIR = os.path.join(os.path.dirname(__import__("gounsafe").__file__), "data")
TOY_PROJECT = os.path.join(DATA_DIR, "toyproject")
TOY_DATASET = os.path.join(DATA_DIR, "toy_dataset.jsonl")


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            name = rep.nodeid.rsplit("::", 1)[-1]
            if "test_acceptance.py" in rep.nodeid and name.startswith("test_criterion_"):
                if rep.when == "call" or status != "passed":
                    outcomes[name] = "PASS" if status == "passed" else "FAIL"
    if not outcomes:
        return
    details = getattr(sys.modules.get("test_acceptance"), "RESULTS", {})
    terminalreporter.section("acceptance criteria")
    for name in sorted(outcomes):
        n = int(name.split("_")[2])
        detail = details.get(n, (None, ""))[1]
        terminalreporter.write_line(f"criterion {n:2d} {name[18:]:<20} {outcomes[name]}  {detail}")
