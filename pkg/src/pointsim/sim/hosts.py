"""Set-top boxes: scripted join/leave and IGMPv2 host behaviour."""
from __future__ import annotations

from ..errors import DecodeError
from ..igmp import IgmpKind, IgmpMessage, decode, encode
from ..model import IpMulticastPacket
from .engine import EventKind
from .metrics import Membership


class ClientHost:
    def __init__(self, sim, script):
        self.sim = sim
        self.name = script.name
        self.cnap = script.cnap
        self.port = script.port
        self.script = script
        self.active: dict = {}

    def act(self, action):
        if action.kind == "join":
            self.join(action.group)
        else:
            self.leave(action.group)

    def join(self, group):
        if group not in self.active:
            m = Membership(self.name, str(group), self.sim.engine.now)
            self.active[group] = m
            self.sim.metrics.memberships.append(m)
        self._send(IgmpMessage.report(group))

    def leave(self, group):
        m = self.active.pop(group, None)
        if m is None:
            return
        m.leave_us = self.sim.engine.now
        self._send(IgmpMessage.leave(group))

    def _send(self, msg: IgmpMessage):
        self.sim.metrics.counters[f"igmp_{msg.kind.value}"] += 1
        self.sim.net.client_igmp(self, encode(msg))

    def _report_if_member(self, group):
        if group in self.active:
            self._send(IgmpMessage.report(group))

    def deliver(self, payload):
        if isinstance(payload, IpMulticastPacket):
            self._receive(payload)
            return
        try:
            msg = decode(payload)
        except DecodeError:
            self.sim.metrics.counters["igmp_rejected"] += 1
            return
        if msg.kind is IgmpKind.QUERY_GENERAL:
            groups = sorted(self.active)
        elif msg.kind is IgmpKind.QUERY_GROUP and msg.group in self.active:
            groups = [msg.group]
        else:
            return
        for g in groups:
            delay = self.sim.rng.randint(0, msg.max_resp_time * 100_000)
            self.sim.engine.after(delay, EventKind.TIMER_FIRE, self._report_if_member, g)

    def _receive(self, pkt: IpMulticastPacket):
        m = self.active.get(pkt.group)
        if m is None:
            self.sim.metrics.counters["unsolicited"] += 1
            return
        if pkt.seq in m.seen:
            m.duplicates += 1
            return
        m.seen.add(pkt.seq)
        m.arrivals.append((pkt.seq, self.sim.engine.now))
