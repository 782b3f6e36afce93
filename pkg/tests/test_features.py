import os
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfg_golden import graph_of
from gounsafe.cfg import Edge, EnrichedCfg, Vertex
from gounsafe.errors import UnknownFiniteLabel
from gounsafe.features import (
    ALL, INFINITE_CATEGORIES, NONE, ONLY_FUNCS, ONLY_TYPES, EncodedInstance, build_vocabulary,
    encode_graph, feature_subsets, load_manifest, top_k,
)

FINITE = load_manifest()["categories"]
STMT = "stmt:" + FINITE["stmt"][0]


def _graph(label_sets, var_names=()) -> EnrichedCfg:
    vs = [Vertex(0, "statement", {"stmt:entry"})]
    vs += [Vertex(i + 1, "statement", {STMT, *labs}) for i, labs in enumerate(label_sets)]
    n = len(vs)
    vs.append(Vertex(n, "statement", {"stmt:exit"}))
    edges = [Edge(i, i + 1, "flow") for i in range(n)]
    for j, name in enumerate(var_names):
        vs.append(Vertex(n + 1 + j, "variable", {f"var:{name}"}))
        edges.append(Edge(1, n + 1 + j, "dir-use"))
    return EnrichedCfg(vs, edges, "function")


def test_finite_manifest_gives_594_features():
    vocab = build_vocabulary([_graph([])], k=127)
    assert vocab.n_finite == 82
    assert vocab.n == 4 * 128 + 82 == 594
    assert len(vocab.labels) == 594 == len(set(vocab.labels))


def test_top_k_tie_break():
    # frequencies 5/3/3 with k=2: the top label plus the lexicographically smaller tied label
    counts = Counter({"zeta": 5, "beta": 3, "alpha": 3})
    assert top_k(counts, 2) == ["zeta", "alpha"]


def _oracle_top_k(counts: Counter, k: int) -> list[str]:
    out = []
    remaining = dict(counts)
    while remaining and len(out) < k:
        best = max(remaining.values())
        pick = min(lab for lab, c in remaining.items() if c == best)
        out.append(pick)
        del remaining[pick]
    return out


@given(st.dictionaries(st.text("abcdef", min_size=1, max_size=3), st.integers(1, 6), max_size=12),
       st.integers(1, 8))
def test_top_k_matches_selection_oracle(d, k):
    assert top_k(Counter(d), k) == _oracle_top_k(Counter(d), k)


def test_frequency_counts_vertex_occurrences():
    g = _graph([{"type:A"}, {"type:A"}, {"type:A"}, {"type:B", "type:C"}, {"type:B"}])
    vocab = build_vocabulary([g], k=2)
    assert vocab.infinite["type"] == ["A", "B"]


def test_small_category_keeps_other_slot():
    vocab = build_vocabulary([_graph([{"type:A"}])], k=4)
    assert vocab.infinite["type"] == ["A"]
    assert vocab.n == 4 * 5 + vocab.n_finite
    assert vocab.lookup("type:Zzz") == vocab.other_index("type")


def test_common_and_rare_variable_names():
    train = _graph([{}], var_names=["err", "err", "n"])
    vocab = build_vocabulary([train], k=1)
    enc = encode_graph(_graph([{}], var_names=["err", "zx9q"]), vocab)
    err_row, rare_row = enc.features[-2], enc.features[-1]
    assert err_row[vocab.index["var:err"]] == 1
    assert rare_row[vocab.other_index("var")] == 1
    assert rare_row.sum() == 1


def test_empty_label_set_encodes_to_zero_row():
    vocab = build_vocabulary([_graph([])], k=2)
    g = _graph([])
    g.vertices[0].labels = set()
    assert encode_graph(g, vocab, usage_vertex=1).features[0].sum() == 0


def test_unknown_finite_label_raises():
    vocab = build_vocabulary([_graph([])], k=2)
    with pytest.raises(UnknownFiniteLabel):
        encode_graph(_graph([{"stmt:teleport"}]), vocab, usage_vertex=1)


def test_none_mask_drops_variables_and_infinite_labels():
    g = _graph([{"type:A", "func:f", "selfref:module"}], var_names=["x"])
    vocab = build_vocabulary([g], k=3)
    enc = encode_graph(g, vocab, NONE, usage_vertex=1)
    assert enc.num_vertices == len(g.statements())
    kept = {vocab.categories[i] for i in np.flatnonzero(enc.features.any(axis=0))}
    assert kept == {"stmt", "selfref"}
    assert all(len(e) == 0 for k, e in enc.edges.items() if k != "flow")


def test_feature_subsets():
    subs = feature_subsets()
    assert [s.name for s in subs] == ["ALL", "NONE", "ONLY_VARS", "ONLY_TYPES", "ONLY_FUNCS", "ONLY_PKGS"]
    assert ONLY_TYPES.categories == NONE.categories | {"type"}
    assert {"func", "op"} <= ONLY_FUNCS.categories
    assert all(s.categories <= ALL.categories for s in subs)


def test_usage_row_has_statement_type_and_context_is_onehot():
    for name in ("01_pointer_function.go", "02_pointer_type.go", "03_global_variable.go"):
        g = graph_of(os.path.join(os.path.dirname(__file__), "testdata", "cfg", name))
        vocab = build_vocabulary([g], k=127)
        enc = encode_graph(g, vocab)
        stmt_cols = vocab.category_columns({"stmt"})
        assert enc.features[enc.usage_vertex, stmt_cols].sum() == 1
        assert enc.context_onehot.sum() == 1.0
        back = EncodedInstance.from_json(enc.to_json())
        assert np.array_equal(back.features, enc.features)


_LABELS = [f"{c}:{v}" for c in INFINITE_CATEGORIES for v in ("a", "b", "c", "d")]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sets(st.sampled_from(_LABELS), max_size=5), min_size=2, max_size=8),
       st.integers(1, 3))
def test_encoding_is_injective_on_projected_labels_and_deterministic(sets, k):
    g = _graph(sets)
    vocab = build_vocabulary([g], k=k)
    enc = encode_graph(g, vocab, usage_vertex=1)
    again = encode_graph(g, vocab, usage_vertex=1)
    assert enc.features.tobytes() == again.features.tobytes()

    def projected(labs):
        return frozenset(vocab.lookup(lab) for lab in labs)

    for i, a in enumerate(g.vertices):
        for j, b in enumerate(g.vertices):
            same_row = np.array_equal(enc.features[i], enc.features[j])
            assert same_row == (projected(a.labels) == projected(b.labels))
