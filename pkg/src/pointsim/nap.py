"""Server-side and client-side NAP gateway state machines.

The cNAP turns IGMP from its local ports into implicit (un)subscriptions
published on a group's control channel. The sNAP keeps, per group, the
unicast FID to each subscribed cNAP and ORs them into the FID it stamps
on data packets published on the group's data channel.
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .errors import InvalidGroup, NoPath, UnconfiguredGroup
from .fid import Fid, merge
from .igmp import IgmpKind, IgmpMessage
from .model import GroupAddr, IcnPacket, IpMulticastPacket, group_addr
from .pce import IcnName

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

DEFAULT_QUERY_COUNT = 2
DEFAULT_QUERY_INTERVAL_US = 1_000_000


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True)
class NameMapping:
    root: bytes = b"IPMoverICN"
    control: bytes = b"C"
    data: bytes = b"D"

    def digest(self, group: GroupAddr) -> bytes:
        return fnv1a64(group.packed).to_bytes(8, "big")


def group_to_names(group, mapping: NameMapping = NameMapping()) -> tuple[IcnName, IcnName]:
    group = group_addr(group)
    h = mapping.digest(group)
    return IcnName((mapping.root, mapping.control, h)), IcnName((mapping.root, mapping.data, h))


def check_digest_collisions(groups: Iterable, mapping: NameMapping = NameMapping()):
    seen = {}
    for g in groups:
        g = group_addr(g)
        h = mapping.digest(g)
        if h in seen and seen[h] != g:
            raise InvalidGroup(f"digest collision between {seen[h]} and {g}")
        seen[h] = g


class ControlKind(enum.Enum):
    SUBSCRIBE = "implicit-subscribe"
    UNSUBSCRIBE = "implicit-unsubscribe"


@dataclass(frozen=True)
class ControlMessage:
    kind: ControlKind
    group: GroupAddr
    origin: int


# actions a NAP hands back to whoever drives it
@dataclass(frozen=True)
class Publish:
    name: IcnName
    message: ControlMessage


@dataclass(frozen=True)
class SendIgmp:
    port: int
    message: IgmpMessage


@dataclass(frozen=True)
class StartTimer:
    delay_us: int
    group: GroupAddr
    token: int


class Phase(enum.Enum):
    ACTIVE = "active"
    LEAVING = "leaving"


@dataclass
class CnapGroupState:
    group: GroupAddr
    data_name: IcnName
    member_ports: set = field(default_factory=set)
    phase: Phase = Phase.ACTIVE
    queries_remaining: int = 0
    # ports that sent a leave and have not re-reported yet
    leaving_ports: set = field(default_factory=set)
    token: int = 0


class Cnap:
    def __init__(self, node: int, mapping: NameMapping = NameMapping(),
                 query_count: int = DEFAULT_QUERY_COUNT,
                 query_interval_us: int = DEFAULT_QUERY_INTERVAL_US,
                 query_max_resp_ds: int = 10):
        self.node = node
        self.mapping = mapping
        self.query_count = query_count
        self.query_interval_us = query_interval_us
        self.query_max_resp_ds = query_max_resp_ds
        self.groups: dict[GroupAddr, CnapGroupState] = {}
        self._by_data_name: dict[IcnName, GroupAddr] = {}
        self._tokens = 0
        self.stats = Counter()
        self.episodes = Counter()

    def _publish(self, kind: ControlKind, group: GroupAddr) -> Publish:
        control, _ = group_to_names(group, self.mapping)
        self.stats[kind.value] += 1
        return Publish(control, ControlMessage(kind, group, self.node))

    def _next_token(self) -> int:
        self._tokens += 1
        return self._tokens

    def _queries(self, state: CnapGroupState) -> list:
        msg = IgmpMessage.group_query(state.group, self.query_max_resp_ds)
        state.queries_remaining -= 1
        actions: list = [SendIgmp(p, msg) for p in sorted(state.leaving_ports)]
        actions.append(StartTimer(self.query_interval_us, state.group, state.token))
        return actions

    def handle_igmp(self, msg: IgmpMessage, port: int) -> list:
        state = self.groups.get(msg.group)
        if msg.kind is IgmpKind.REPORT:
            if state is None:
                _, data = group_to_names(msg.group, self.mapping)
                state = CnapGroupState(msg.group, data, {port})
                self.groups[msg.group] = state
                self._by_data_name[data] = msg.group
                self.episodes[msg.group] += 1
                return [self._publish(ControlKind.SUBSCRIBE, msg.group)]
            state.member_ports.add(port)
            if state.phase is Phase.LEAVING:
                state.leaving_ports.discard(port)
                if not state.leaving_ports:
                    state.phase = Phase.ACTIVE
                    state.token = self._next_token()
            return []
        if msg.kind is IgmpKind.LEAVE:
            if state is None or port not in state.member_ports:
                self.stats["unexpected"] += 1
                return []
            state.phase = Phase.LEAVING
            state.leaving_ports.add(port)
            state.queries_remaining = self.query_count
            state.token = self._next_token()
            return self._queries(state)
        # queries from hosts: the cNAP is the only querier on its ports
        self.stats["unexpected"] += 1
        return []

    def on_timer(self, group: GroupAddr, token: int) -> list:
        state = self.groups.get(group)
        if state is None or state.token != token or state.phase is not Phase.LEAVING:
            return []
        if state.queries_remaining > 0:
            return self._queries(state)
        state.member_ports -= state.leaving_ports
        state.leaving_ports.clear()
        state.phase = Phase.ACTIVE
        if state.member_ports:
            return []
        del self.groups[group]
        del self._by_data_name[state.data_name]
        return [self._publish(ControlKind.UNSUBSCRIBE, group)]

    def general_query(self, ports: Iterable[int], max_resp_ds: int = 100) -> list:
        msg = IgmpMessage.general_query(max_resp_ds)
        return [SendIgmp(p, msg) for p in sorted(ports)]

    def handle_icn_data(self, pkt: IcnPacket) -> list[tuple[int, IpMulticastPacket]]:
        group = self._by_data_name.get(pkt.name)
        if group is None:
            self.stats["false_positive"] += 1
            return []
        return [(p, pkt.inner) for p in sorted(self.groups[group].member_ports)]


@dataclass
class SnapGroupState:
    group: GroupAddr
    width: int
    subscribed_cnaps: set = field(default_factory=set)
    cnap_fids: dict = field(default_factory=dict)  # cnap -> (Fid, topo_version)
    merged_fid: Optional[Fid] = None

    def recompute(self):
        if self.cnap_fids:
            self.merged_fid = merge(f for f, _ in self.cnap_fids.values())
        else:
            self.merged_fid = Fid.zero(self.width)

    def consistent(self) -> bool:
        if set(self.cnap_fids) != self.subscribed_cnaps:
            return False
        expected = merge(f for f, _ in self.cnap_fids.values()) if self.cnap_fids else Fid.zero(self.width)
        return self.merged_fid == expected


class Snap:
    """Server-side NAP.

    ``get_fid(src, dst)`` is the path lookup (normally ``Pce.get_fid``); the
    sNAP keeps its own cache of the results so that re-joins are served
    without asking again.
    """

    def __init__(self, node: int, groups: Iterable, get_fid: Callable[[int, int], tuple],
                 width: int, mapping: NameMapping = NameMapping()):
        self.node = node
        self.mapping = mapping
        self.configured = {group_addr(g) for g in groups}
        check_digest_collisions(self.configured, mapping)
        self.width = width
        self._get_fid = get_fid
        self.fid_cache: dict[int, tuple[Fid, int]] = {}
        self.groups: dict[GroupAddr, SnapGroupState] = {}
        # subscribers dropped for want of a path, retried on later topology news
        self.unreachable: dict[GroupAddr, set] = {}
        self.stats = Counter()

    def init(self, subscribe: Callable[[IcnName, int], None]) -> list[IcnName]:
        names = []
        for g in sorted(self.configured):
            control, _ = group_to_names(g, self.mapping)
            subscribe(control, self.node)
            names.append(control)
        return names

    def _fid_for(self, cnap: int) -> tuple[Fid, int]:
        hit = self.fid_cache.get(cnap)
        if hit is None:
            hit = self._get_fid(self.node, cnap)
            self.fid_cache[cnap] = hit
        return hit

    def handle_control(self, msg: ControlMessage):
        if msg.group not in self.configured:
            self.stats["unconfigured"] += 1
            raise UnconfiguredGroup(str(msg.group))
        state = self.groups.get(msg.group)
        if msg.kind is ControlKind.SUBSCRIBE:
            if state is not None and msg.origin in state.subscribed_cnaps:
                self.stats["duplicate"] += 1
                return
            try:
                entry = self._fid_for(msg.origin)
            except NoPath:
                self.stats["no_path"] += 1
                self.unreachable.setdefault(msg.group, set()).add(msg.origin)
                return
            self._add(msg.group, msg.origin, entry)
            return
        pending = self.unreachable.get(msg.group)
        if pending and msg.origin in pending:
            pending.discard(msg.origin)
            if not pending:
                del self.unreachable[msg.group]
            return
        if state is None or msg.origin not in state.subscribed_cnaps:
            self.stats["ignored_unsubscribe"] += 1
            return
        self._drop(state, msg.origin)

    def _add(self, group: GroupAddr, cnap: int, entry: tuple[Fid, int]):
        state = self.groups.get(group)
        if state is None:
            state = self.groups[group] = SnapGroupState(group, self.width)
        state.subscribed_cnaps.add(cnap)
        state.cnap_fids[cnap] = entry
        state.recompute()

    def retry_unreachable(self) -> int:
        """Ask again for paths to dropped subscribers; returns how many came back."""
        restored = 0
        for group in sorted(self.unreachable):
            pending = self.unreachable[group]
            for cnap in sorted(pending):
                try:
                    entry = self._fid_for(cnap)
                except NoPath:
                    continue
                pending.discard(cnap)
                self._add(group, cnap, entry)
                restored += 1
            if not pending:
                del self.unreachable[group]
        return restored

    def _drop(self, state: SnapGroupState, cnap: int):
        state.subscribed_cnaps.discard(cnap)
        state.cnap_fids.pop(cnap, None)
        if not state.subscribed_cnaps:
            del self.groups[state.group]
        else:
            state.recompute()

    def handle_ip_packet(self, pkt: IpMulticastPacket, hop_limit: int = 32) -> Optional[IcnPacket]:
        state = self.groups.get(pkt.group)
        if state is None or not state.subscribed_cnaps:
            return None
        _, data = group_to_names(pkt.group, self.mapping)
        return IcnPacket(state.merged_fid, data, pkt, hop_limit)

    def handle_invalidation(self, invalidated: Iterable[tuple[int, int]]):
        stale = {dst for src, dst in invalidated if src == self.node}
        for dst in stale:
            self.fid_cache.pop(dst, None)
        for state in list(self.groups.values()):
            hit = stale & state.subscribed_cnaps
            if not hit:
                continue
            for cnap in sorted(hit):
                try:
                    state.cnap_fids[cnap] = self._fid_for(cnap)
                except NoPath:
                    self.stats["lost_cnap"] += 1
                    self.unreachable.setdefault(state.group, set()).add(cnap)
                    self._drop(state, cnap)
                    if state.group not in self.groups:
                        break
            else:
                state.recompute()
