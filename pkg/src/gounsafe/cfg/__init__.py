"""Enriched control-flow graphs for usage contexts."""
from gounsafe.cfg.builder import build_cfg, extract_cfg, label_vertices, map_usage_vertex
from gounsafe.cfg.graph import (
    EDGE_KINDS, Edge, EnrichedCfg, Vertex, Violation, dump_cfg, load_cfg, validate_cfg,
)

__all__ = [
    "EDGE_KINDS", "Edge", "EnrichedCfg", "Vertex", "Violation", "build_cfg", "dump_cfg",
    "extract_cfg", "label_vertices", "load_cfg", "map_usage_vertex", "validate_cfg",
]
