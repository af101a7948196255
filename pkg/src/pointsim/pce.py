"""Path computation entity: rendezvous plus topology management."""
from __future__ import annotations

from collections import Counter, defaultdict, deque
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .errors import NoPath
from .fid import Fid, TagAssignment, encode_path
from .model import Topology, failover_groups


@dataclass(frozen=True)
class IcnName:
    segments: tuple

    def __post_init__(self):
        segs = tuple(bytes(s) for s in self.segments)
        if not 1 <= len(segs) <= 4:
            raise ValueError(f"name needs 1-4 segments, got {len(segs)}")
        for s in segs:
            if not 1 <= len(s) <= 32:
                raise ValueError(f"segment length {len(s)} outside 1-32")
        object.__setattr__(self, "segments", segs)

    def __str__(self):
        parts = []
        for s in self.segments:
            parts.append(s.decode("ascii") if s.isascii() and s.decode("ascii").isprintable() else s.hex())
        return "/" + "/".join(parts)


class RendezvousTable:
    def __init__(self):
        self.subs: dict[IcnName, set[int]] = {}
        self.pubs: dict[IcnName, set[int]] = {}

    def subscribe(self, name: IcnName, node: int):
        self.subs.setdefault(name, set()).add(node)

    def unsubscribe(self, name: IcnName, node: int):
        members = self.subs.get(name)
        if members is None:
            return
        members.discard(node)
        if not members:
            del self.subs[name]

    def publish(self, name: IcnName, node: int):
        self.pubs.setdefault(name, set()).add(node)

    def resolve(self, name: IcnName) -> set[int]:
        return set(self.subs.get(name, ()))

    def snapshot(self):
        return ({k: frozenset(v) for k, v in self.subs.items()},
                {k: frozenset(v) for k, v in self.pubs.items()})


@dataclass(frozen=True)
class PathCacheEntry:
    src: int
    dst: int
    path: tuple
    fid: Fid
    topo_version: int


def _logical_edges(topology: Topology) -> dict[int, list[tuple[int, int]]]:
    """node -> [(link id, next node)], failover groups collapsed to their primary."""
    edges: dict[int, list[tuple[int, int]]] = defaultdict(list)
    groups = failover_groups(topology)
    for link in topology.links.values():
        if link.failover_group is None and link.up:
            edges[link.src].append((link.id, link.dst))
    for members in groups.values():
        if any(topology.links[i].up for i in members):
            primary = topology.links[members[0]]
            edges[primary.src].append((primary.id, primary.dst))
    for lst in edges.values():
        lst.sort()
    return edges


def compute_path(src: int, dst: int, topology: Topology) -> list[int]:
    """Fewest-hop path; among equals, the lexicographically smallest link sequence."""
    if src not in topology.nodes or dst not in topology.nodes:
        raise NoPath(src, dst)
    if src == dst:
        return []
    edges = _logical_edges(topology)
    reverse: dict[int, list[int]] = defaultdict(list)
    for u, lst in edges.items():
        for _, v in lst:
            reverse[v].append(u)
    dist = {dst: 0}
    queue = deque([dst])
    while queue:
        v = queue.popleft()
        for u in reverse[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    if src not in dist:
        raise NoPath(src, dst)
    path = []
    node = src
    while node != dst:
        link_id, node = min((lid, v) for lid, v in edges[node] if dist.get(v) == dist[node] - 1)
        path.append(link_id)
    return path


class Pce:
    """Rendezvous and topology management combined.

    ``topology`` is the live topology; ``on_interaction`` (if given) is called
    with a short label for every request a NAP makes.
    """

    def __init__(self, topology: Topology, tags: TagAssignment,
                 on_interaction: Optional[Callable[[str], None]] = None):
        self.topology = topology
        self.tags = tags
        self.rv = RendezvousTable()
        self.cache: dict[tuple[int, int], PathCacheEntry] = {}
        self.counts: Counter = Counter()
        self._on_interaction = on_interaction

    def _touch(self, kind: str):
        self.counts[kind] += 1
        if self._on_interaction is not None:
            self._on_interaction(kind)

    @property
    def interactions(self) -> int:
        return sum(self.counts.values())

    def rv_subscribe(self, name: IcnName, node: int):
        self._touch("subscribe")
        self.rv.subscribe(name, node)

    def rv_unsubscribe(self, name: IcnName, node: int):
        self._touch("unsubscribe")
        self.rv.unsubscribe(name, node)

    def rv_resolve(self, name: IcnName) -> set[int]:
        self._touch("resolve")
        return self.rv.resolve(name)

    def get_fid(self, src: int, dst: int) -> tuple[Fid, int]:
        self._touch("get_fid")
        entry = self.cache.get((src, dst))
        if entry is None:
            path = tuple(compute_path(src, dst, self.topology))
            entry = PathCacheEntry(src, dst, path, encode_path(path, self.tags), self.topology.version)
            self.cache[(src, dst)] = entry
        return entry.fid, self.topology.version

    def notify_topology_change(self, changed_links: Iterable[int], new_version: int) -> set[PathCacheEntry]:
        """Drop and return the cached entries whose path uses a changed link.

        Backup members of a failover group never appear in computed paths, so
        their changes invalidate nothing.
        """
        backups = {i for members in failover_groups(self.topology).values() for i in members[1:]}
        changed = set(changed_links) - backups
        stale = {e for e in self.cache.values() if e.topo_version < new_version and changed.intersection(e.path)}
        for e in stale:
            del self.cache[(e.src, e.dst)]
        return stale
