"""Synthetic corpora with known structure, for sanity checks of the learning stack."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from gounsafe.dataset import WHAT_LABELS, WHY_LABELS, DatasetRecord
from gounsafe.frontend import SourceUnit
from gounsafe.project import LabeledUsage, extract_source

# joint classes of the separable corpus; each owns one struct type
SEPARABLE_CLASSES = (
    ("cast-struct", "serialization"),
    ("cast-bytes", "efficiency"),
    ("pointer-arithmetic", "memory-layout-control"),
    ("cast-header", "avoid-gc"),
    ("memory-access", "atomic"),
)

_FIELD_TYPES = ("uint8", "uint16", "uint32", "uint64", "int32", "float64")
_FILLERS = (
    "total := 0\n\tfor i := 0; i < n; i++ {\n\t\ttotal += i\n\t}",
    "if n > 8 {\n\t\tn = 8\n\t}",
    "count := len(buf)\n\t_ = count",
    "for _, b := range buf {\n\t\tn += int(b)\n\t}",
    "switch n {\n\tcase 0:\n\t\tn = 1\n\tdefault:\n\t\tn++\n\t}",
)
_PARAM_NAMES = ("buf", "data", "raw", "mem")


def _snippet(cls: int, rng: np.random.Generator) -> tuple[str, int]:
    """Go source whose only class-dependent part is the converted-to struct type."""
    name = f"Rec{cls}"
    fields = "\n".join(f"\tf{j} {_FIELD_TYPES[(cls + j) % len(_FIELD_TYPES)]}"
                       for j in range(1 + cls % 3))
    param = _PARAM_NAMES[int(rng.integers(len(_PARAM_NAMES)))]
    picks = rng.choice(len(_FILLERS), size=int(rng.integers(0, 4)), replace=False)
    body = [_FILLERS[i].replace("buf", param) for i in sorted(picks)]
    head = f"package p\n\nimport \"unsafe\"\n\ntype {name} struct {{\n{fields}\n}}\n\n" \
           f"func view({param} []byte, n int) *{name} {{\n"
    pre = "".join(f"\t{b}\n" for b in body)
    line = head.count("\n") + pre.count("\n") + 1
    src = head + pre + f"\tv := (*{name})(unsafe.Pointer(&{param}[0]))\n\treturn v\n}}\n"
    return src, line


def separable_corpus(n: int, seed: int = 0, n_classes: int = len(SEPARABLE_CLASSES)
                     ) -> list[LabeledUsage]:
    """``n`` labelled usages whose joint class is decided by type labels alone."""
    if not 1 <= n_classes <= len(SEPARABLE_CLASSES):
        raise ValueError(f"n_classes must lie in [1, {len(SEPARABLE_CLASSES)}]")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        cls = i % n_classes
        src, line = _snippet(cls, rng)
        what, why = SEPARABLE_CLASSES[cls]
        fname = f"synthetic/s{i:04d}.go"
        usages = {u.line: u for u in extract_source(SourceUnit(fname, src, module_path="example.com/syn",
                                                               package_path="example.com/syn/p"))}
        rec = DatasetRecord("synthetic", fname, line, what, why, src)
        out.append(LabeledUsage(usages[line], rec, WHAT_LABELS.index(what), WHY_LABELS.index(why)))
    return out


def stratification_labels(n: int, seed: int = 0) -> list[str]:
    """Joint labels with a skewed class distribution, including rare classes."""
    rng = np.random.default_rng(seed)
    weights = np.array([40, 25, 15, 8, 5, 3, 2, 1, 1], dtype=float)
    classes = [f"{WHAT_LABELS[i]}|{WHY_LABELS[(3 * i) % len(WHY_LABELS)]}" for i in range(len(weights))]
    return [classes[j] for j in rng.choice(len(classes), size=n, p=weights / weights.sum())]


@dataclass
class OracleSample:
    logits: np.ndarray  # (n, C) logits whose softmax is the true conditional
    labels: np.ndarray  # (n,) drawn from that conditional
    low_entropy: np.ndarray  # (n,) bool


def oracle_head(n: int, rng: np.random.Generator, n_classes: int = 3) -> OracleSample:
    """Points whose model probabilities equal the label distribution they are drawn from.

    High-entropy points use standard-normal logits: the deterministic score reaches 1 whenever
    the gold label ranks last, so that event must stay rarer than the significance level.
    """
    low = rng.random(n) < 0.5
    scale = np.where(low, 6.0, 1.0)
    logits = rng.normal(size=(n, n_classes)) * scale[:, None]
    p = softmax(logits, axis=1)
    u = rng.random(n)[:, None]
    labels = np.minimum((u > np.cumsum(p, axis=1)).sum(1), n_classes - 1)
    return OracleSample(logits, labels, low)
