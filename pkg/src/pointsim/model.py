"""Shared domain types: nodes, directed links, topology, packets."""
from __future__ import annotations

import dataclasses
import enum
import ipaddress
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Optional, Union

from .errors import InvalidGroup

DEFAULT_HOP_LIMIT = 32

GroupAddr = ipaddress.IPv4Address


class NodeKind(enum.Enum):
    SWITCH = "switch"
    SNAP = "snap"
    CNAP = "cnap"
    SERVER = "server"
    CLIENT = "client"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    name: str = ""


@dataclass(frozen=True)
class Link:
    """One direction of a cable. ``peer`` is the id of the opposite direction."""

    id: int
    src: int
    dst: int
    delay_us: int = 0
    up: bool = True
    failover_group: Optional[int] = None
    peer: Optional[int] = None


@dataclass(frozen=True)
class Violation:
    target: str
    message: str

    def __str__(self):
        return f"{self.target}: {self.message}"


class Topology:
    """Directed multigraph of nodes and links.

    ``version`` is bumped once for every link state change or node/link
    membership change.
    """

    def __init__(self, version: int = 0):
        self.nodes: dict[int, Node] = {}
        self.links: dict[int, Link] = {}
        self.version = version
        self._out: dict[int, list[int]] = defaultdict(list)

    def add_node(self, node_id: int, kind: NodeKind, name: str = "") -> Node:
        node = Node(node_id, kind, name or f"n{node_id}")
        self.nodes[node_id] = node
        self.version += 1
        return node

    def add_link(self, link: Link) -> Link:
        self.links[link.id] = link
        self._out[link.src].append(link.id)
        self._out[link.src].sort()
        self.version += 1
        return link

    def add_cable(self, link_id: int, a: int, b: int, delay_us: int = 0,
                  groups: tuple[Optional[int], Optional[int]] = (None, None)) -> tuple[Link, Link]:
        """Add links ``link_id`` (a->b) and ``link_id + 1`` (b->a)."""
        fwd = Link(link_id, a, b, delay_us, True, groups[0], link_id + 1)
        rev = Link(link_id + 1, b, a, delay_us, True, groups[1], link_id)
        return self.add_link(fwd), self.add_link(rev)

    def set_link_state(self, link_id: int, up: bool) -> bool:
        """Set one direction's state. Returns True if it changed."""
        link = self.links[link_id]
        if link.up == up:
            return False
        self.links[link_id] = dataclasses.replace(link, up=up)
        self.version += 1
        return True

    def cable(self, link_id: int) -> tuple[int, ...]:
        link = self.links[link_id]
        if link.peer is None or link.peer not in self.links:
            return (link_id,)
        return tuple(sorted((link_id, link.peer)))

    def out_links(self, node_id: int) -> list[Link]:
        return [self.links[i] for i in self._out.get(node_id, ())]

    def neighbors(self, node_id: int) -> set[int]:
        return {link.dst for link in self.out_links(node_id)}

    def copy(self) -> "Topology":
        other = Topology(self.version)
        other.nodes = dict(self.nodes)
        other.links = dict(self.links)
        other._out = defaultdict(list, {k: list(v) for k, v in self._out.items()})
        return other


def validate_topology(topology: Topology) -> list[Violation]:
    """Scan every invariant of the model; return one violation per offence."""
    out = []
    for key, node in topology.nodes.items():
        if key != node.id or node.id < 0:
            out.append(Violation(f"node {key}", "bad node id"))
    for key, link in sorted(topology.links.items()):
        name = f"link {key}"
        if key != link.id or link.id < 0:
            out.append(Violation(name, "bad link id"))
        if link.src not in topology.nodes:
            out.append(Violation(name, f"unknown source node {link.src}"))
        if link.dst not in topology.nodes:
            out.append(Violation(name, f"unknown destination node {link.dst}"))
        if link.src == link.dst:
            out.append(Violation(name, "self-loop"))
        if link.delay_us < 0:
            out.append(Violation(name, "negative delay"))
        if link.peer is not None:
            peer = topology.links.get(link.peer)
            if peer is None or (peer.src, peer.dst) != (link.dst, link.src):
                out.append(Violation(name, f"peer {link.peer} is not the reverse direction"))
    groups: dict[int, list[Link]] = defaultdict(list)
    for link in topology.links.values():
        if link.failover_group is not None:
            groups[link.failover_group].append(link)
    for gid, members in sorted(groups.items()):
        if len({(l.src, l.dst) for l in members}) > 1:
            ids = sorted(l.id for l in members)
            out.append(Violation(f"failover group {gid}", f"members {ids} have different endpoints"))
    return out


def failover_groups(topology: Topology) -> dict[int, list[int]]:
    """Group id -> member link ids, primary (lowest id) first."""
    groups: dict[int, list[int]] = defaultdict(list)
    for link in topology.links.values():
        if link.failover_group is not None:
            groups[link.failover_group].append(link.id)
    return {gid: sorted(ids) for gid, ids in sorted(groups.items())}


def group_addr(value: Union[str, int, bytes, GroupAddr]) -> GroupAddr:
    try:
        addr = ipaddress.IPv4Address(value)
    except ValueError as exc:
        raise InvalidGroup(str(exc)) from None
    if not addr.is_multicast:
        raise InvalidGroup(f"{addr} is not in 224.0.0.0/4")
    return addr


@dataclass(frozen=True)
class IpMulticastPacket:
    group: GroupAddr
    seq: int
    payload_len: int
    send_time: int


@dataclass(frozen=True)
class IcnPacket:
    fid: Any  # fid.Fid; kept loose to avoid an import cycle
    name: Any  # pce.IcnName
    inner: Any
    hop_limit: int = DEFAULT_HOP_LIMIT

    def hop(self) -> "IcnPacket":
        return dataclasses.replace(self, hop_limit=self.hop_limit - 1)
