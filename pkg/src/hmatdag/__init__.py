"""hmatdag: H-matrix arithmetic with task-graph construction and execution."""

from .trees import (
    BBox,
    Block,
    Cluster,
    Geometry,
    IndexSet,
    build_block_tree,
    build_cluster_tree,
    nd_admissible,
    standard_admissible,
)

__all__ = [
    "BBox",
    "Block",
    "Cluster",
    "Geometry",
    "IndexSet",
    "build_block_tree",
    "build_cluster_tree",
    "nd_admissible",
    "standard_admissible",
]
