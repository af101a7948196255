"""Legacy comparison network: spanning tree bridges with IGMP snooping.

Spanning tree is recomputed globally on any change that alters it, and every
bridge stops forwarding for ``t_conv`` while that happens. Snooping state is
flushed afterwards and rebuilt from the reports that answer the querier's
triggered general query.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional, Union

from .igmp import IgmpKind, IgmpMessage
from .model import GroupAddr, IpMulticastPacket, NodeKind, Topology

BRIDGE_KINDS = (NodeKind.SWITCH, NodeKind.SNAP, NodeKind.CNAP)

T_CONV_PRESETS_US = {"classic": 30_000_000, "fast": 1_000_000}

Port = Hashable


@dataclass(frozen=True)
class SpanningTree:
    active_links: frozenset
    root: Optional[int]
    version: int
    roots: tuple = ()


def build_spanning_tree(topology: Topology, bridges: Optional[Iterable[int]] = None,
                        version: int = 0) -> SpanningTree:
    """BFS from the lowest-id bridge of each component over cables that are up.

    At each expansion outgoing links are tried in ascending id order; both
    directions of a chosen cable become active.
    """
    if bridges is None:
        bridges = [n.id for n in topology.nodes.values() if n.kind in BRIDGE_KINDS]
    bridges = sorted(bridges)
    members = set(bridges)
    seen: set[int] = set()
    active: set[int] = set()
    roots = []
    for start in bridges:
        if start in seen:
            continue
        roots.append(start)
        seen.add(start)
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for link in topology.out_links(u):
                if link.dst not in members or link.dst in seen or not cable_up(topology, link.id):
                    continue
                seen.add(link.dst)
                active.update(topology.cable(link.id))
                queue.append(link.dst)
    return SpanningTree(frozenset(active), roots[0] if roots else None, version, tuple(roots))


def cable_up(topology: Topology, link_id: int) -> bool:
    return all(topology.links[i].up for i in topology.cable(link_id))


def tree_is_forest(topology: Topology, tree: SpanningTree) -> bool:
    """Union-find cycle check over active cables."""
    parent: dict[int, int] = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for cable in {topology.cable(i) for i in tree.active_links}:
        link = topology.links[cable[0]]
        a, b = find(link.src), find(link.dst)
        if a == b:
            return False
        parent[a] = b
    return True


@dataclass
class SnoopTable:
    entries: dict = field(default_factory=dict)
    router_ports: set = field(default_factory=set)
    # groups reported at least once; unregistered groups are flooded
    registered: set = field(default_factory=set)

    def flush(self):
        self.entries.clear()
        self.router_ports.clear()


def snoop(msg: IgmpMessage, port: Port, table: SnoopTable) -> SnoopTable:
    if msg.kind is IgmpKind.REPORT:
        table.entries.setdefault(msg.group, set()).add(port)
        table.registered.add(msg.group)
    elif msg.kind is IgmpKind.LEAVE:
        ports = table.entries.get(msg.group)
        if ports is not None:
            ports.discard(port)
            if not ports:
                del table.entries[msg.group]
    else:
        table.router_ports.add(port)
    return table


class Mode(enum.Enum):
    FORWARDING = "forwarding"
    RECONVERGING = "reconverging"


@dataclass
class BridgeState:
    table: SnoopTable = field(default_factory=SnoopTable)
    active_ports: set = field(default_factory=set)
    mode: Mode = Mode.FORWARDING
    until: Optional[int] = None


def l2_forward(packet: Union[IpMulticastPacket, IgmpMessage], in_port: Port, state: BridgeState) -> set:
    if state.mode is Mode.RECONVERGING:
        return set()
    others = state.active_ports - {in_port}
    table = state.table
    if isinstance(packet, IgmpMessage):
        if packet.is_query:
            return others
        if packet.kind is IgmpKind.LEAVE and packet.group in table.entries:
            # other members remain behind this bridge
            return set()
        return table.router_ports & others
    ports = table.entries.get(packet.group)
    if ports is not None:
        return ports & others
    if packet.group in table.registered:
        return set()
    return others


class L2Control:
    """Spanning tree and per-bridge state for one baseline network."""

    def __init__(self, topology: Topology, t_conv_us: int, local_ports: Optional[dict] = None):
        self.topology = topology
        self.t_conv_us = t_conv_us
        self.bridges = sorted(n.id for n in topology.nodes.values() if n.kind in BRIDGE_KINDS)
        self.local_ports = {b: set((local_ports or {}).get(b, ())) for b in self.bridges}
        self.tree = build_spanning_tree(topology, self.bridges)
        self.states = {b: BridgeState() for b in self.bridges}
        self.episodes: list[tuple[int, int]] = []
        self._refresh_ports()

    def link_port(self, link_id: int) -> Port:
        return ("link", link_id)

    def _refresh_ports(self):
        for b in self.bridges:
            ports = set(self.local_ports[b])
            for link in self.topology.out_links(b):
                if link.id in self.tree.active_links and cable_up(self.topology, link.id):
                    ports.add(self.link_port(link.id))
            self.states[b].active_ports = ports

    def on_link_change(self, link_id: int, now: int) -> Optional[int]:
        """Called after the topology already reflects the change.

        Returns the time reconvergence completes, or None if the spanning
        tree is unaffected.
        """
        candidate = build_spanning_tree(self.topology, self.bridges)
        if candidate.active_links == self.tree.active_links and not self.reconverging:
            self._refresh_ports()
            return None
        until = now + self.t_conv_us
        for st in self.states.values():
            st.mode = Mode.RECONVERGING
            st.until = until
        self.episodes.append((now, until))
        return until

    @property
    def reconverging(self) -> bool:
        return any(st.mode is Mode.RECONVERGING for st in self.states.values())

    def finish_reconvergence(self, now: int) -> bool:
        """Complete a pending episode. False if a later change extended it."""
        if not self.reconverging or any(st.until != now for st in self.states.values()):
            return False
        self.tree = build_spanning_tree(self.topology, self.bridges, self.tree.version + 1)
        self._refresh_ports()
        for st in self.states.values():
            st.table.flush()
            st.mode = Mode.FORWARDING
            st.until = None
        return True
