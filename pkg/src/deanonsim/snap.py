"""Reading and writing membership graphs as community files.

The text format is one community (group) per line: whitespace-separated
non-negative integer user ids, ``#``-prefixed comment lines ignored. This
is the layout of the SNAP community datasets, and it doubles as this
package's graph serialization.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .model import BipartiteGraph


@dataclass(frozen=True)
class IngestManifest:
    """Raw and filtered counts, so filter-order effects are explainable."""

    path: str
    raw_groups: int
    raw_users: int
    raw_edges: int
    min_group_size: int
    min_user_memberships: int
    groups_after_size_filter: int
    users_after_membership_filter: int
    final_groups: int
    final_users: int
    final_edges: int
    filter_order: str = "groups-by-size, then users-by-membership, then prune empty groups"

    def as_dict(self) -> dict:
        return asdict(self)


class SnapFormatError(ValueError):
    pass


def _parse_lines(path: Path) -> list[list[int]]:
    groups: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                ids = [int(tok) for tok in line.split()]
            except ValueError as exc:
                raise SnapFormatError(f"{path}:{lineno}: malformed community line") from exc
            if any(i < 0 for i in ids):
                raise SnapFormatError(f"{path}:{lineno}: negative user id")
            groups.append(sorted(set(ids)))  # duplicate ids within a line collapse
    return groups


def ingest_snap_communities(path: str | Path, min_group_size: int = 0,
                            min_user_memberships: int = 0,
                            ) -> tuple[BipartiteGraph, IngestManifest]:
    """Parse a community file into a graph with densely relabeled user ids.

    Filters apply in a fixed order: first drop groups below the size
    threshold, then drop users that belong to too few of the surviving
    groups, finally prune groups left empty. Surviving users are relabeled
    0..m-1 in increasing original-id order.
    """
    path = Path(path)
    raw_groups = _parse_lines(path)
    raw_user_ids = set()
    raw_edges = 0
    for g in raw_groups:
        raw_user_ids.update(g)
        raw_edges += len(g)

    sized = [g for g in raw_groups if len(g) >= min_group_size]

    membership_count: dict[int, int] = {}
    for g in sized:
        for uid in g:
            membership_count[uid] = membership_count.get(uid, 0) + 1
    kept_users = {uid for uid, c in membership_count.items() if c >= min_user_memberships}

    filtered = [[uid for uid in g if uid in kept_users] for g in sized]
    filtered = [g for g in filtered if g]
    if not filtered:
        raise SnapFormatError(f"{path}: filters left no communities")

    final_user_ids = sorted({uid for g in filtered for uid in g})
    relabel = {uid: k for k, uid in enumerate(final_user_ids)}
    members = [np.array([relabel[uid] for uid in g], dtype=np.int64) for g in filtered]
    graph = BipartiteGraph.from_group_members(members, num_users=len(final_user_ids))

    manifest = IngestManifest(
        path=str(path), raw_groups=len(raw_groups), raw_users=len(raw_user_ids),
        raw_edges=raw_edges, min_group_size=min_group_size,
        min_user_memberships=min_user_memberships,
        groups_after_size_filter=len(sized),
        users_after_membership_filter=len(kept_users),
        final_groups=graph.num_groups, final_users=graph.num_users,
        final_edges=graph.total_edges)
    return graph, manifest


def write_snap_communities(graph: BipartiteGraph, path: str | Path) -> None:
    """Serialize a graph in the community-per-line format (LF endings)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for j in range(graph.num_groups):
            fh.write(" ".join(str(int(k)) for k in graph.group_members[j]))
            fh.write("\n")
