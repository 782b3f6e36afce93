"""Small hand-made graphs and colour-refinement oracles for expressiveness checks."""
from __future__ import annotations

from collections import Counter

import numpy as np

from gounsafe.cfg import EDGE_KINDS
from gounsafe.features import EncodedInstance


def cycle(n: int) -> list[tuple[int, int]]:
    return [(i, (i + 1) % n) for i in range(n)]


def two_triangles() -> list[tuple[int, int]]:
    return cycle(3) + [(a + 3, b + 3) for a, b in cycle(3)]


def star(leaves: int = 3) -> list[tuple[int, int]]:
    return [(0, i) for i in range(1, leaves + 1)]


def path(n: int = 4) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def instance(nv: int, edges, n_features: int = 8, kinds=None, usage: int = 0,
             x: np.ndarray | None = None, context: int = 0) -> EncodedInstance:
    """Graph with uniform features unless ``x`` is given; ``kinds`` maps edge index to kind."""
    per_kind = {k: [] for k in EDGE_KINDS}
    for i, e in enumerate(edges):
        per_kind[(kinds or {}).get(i, "flow")].append(e)
    arrays = {k: np.array(v, dtype=np.int64).reshape(-1, 2) for k, v in per_kind.items()}
    feats = np.ones((nv, n_features)) if x is None else x
    return EncodedInstance(feats, arrays, usage, np.eye(3)[context], 0, 0)


def wl1_colours(nv: int, edges, rounds: int = 4) -> Counter:
    """Multiset of 1-WL colours after ``rounds`` refinements on the undirected graph."""
    nbrs = {i: [] for i in range(nv)}
    for a, b in edges:
        nbrs[a].append(b)
        nbrs[b].append(a)
    col = {i: 0 for i in range(nv)}
    for _ in range(rounds):
        col = {i: hash((col[i], tuple(sorted(col[j] for j in nbrs[i])))) for i in range(nv)}
    return Counter(col.values())


def fwl2_colours(nv: int, edges, rounds: int = 4) -> Counter:
    """Multiset of 2-FWL pair colours on the undirected graph."""
    adj = {(a, b) for a, b in edges} | {(b, a) for a, b in edges}
    col = {(i, j): (i == j, (i, j) in adj) for i in range(nv) for j in range(nv)}
    for _ in range(rounds):
        col = {(i, j): hash((col[i, j], tuple(sorted((col[i, k], col[k, j]) for k in range(nv)))))
               for i in range(nv) for j in range(nv)}
    return Counter(col.values())
