"""Network analytics and opinion-softening simulation for stance-labeled page networks."""

from triarch.graph import (
    FollowEdge,
    PageNode,
    Snapshot,
    Stance,
    build_snapshot,
    degree_stats,
    stance_counts,
)

__version__ = "0.1.0"

__all__ = [
    "FollowEdge",
    "PageNode",
    "Snapshot",
    "Stance",
    "build_snapshot",
    "degree_stats",
    "stance_counts",
    "__version__",
]
