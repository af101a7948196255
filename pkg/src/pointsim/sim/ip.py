"""Baseline backend: spanning-tree bridges with IGMP snooping."""
from __future__ import annotations

from ..errors import DecodeError
from ..igmp import IgmpMessage, decode, encode
from ..l2 import L2Control, Mode, l2_forward, snoop
from ..model import IpMulticastPacket
from .engine import EventKind

ROUTER = ("router", 0)
IGMP_WIRE_BYTES = 32  # IP header with router alert + 8-byte IGMP


class IpNetwork:
    def __init__(self, sim):
        self.sim = sim
        sc = sim.scenario
        self.params = sc.params
        self.topo = sim.topology
        local = {c.node: {("local", p) for p in c.ports} for c in sc.cnaps}
        for s in sc.snaps:
            local.setdefault(s.node, set()).add(ROUTER)
        self.ctl = L2Control(self.topo, self.params.t_conv_us, local)
        # every sNAP bridge has the multicast router (source + querier) behind it
        self.queriers = sorted(s.node for s in sc.snaps)

    @property
    def engine(self):
        return self.sim.engine

    @property
    def metrics(self):
        return self.sim.metrics

    def start(self):
        for node in self.queriers:
            self.engine.schedule(0, EventKind.TIMER_FIRE, self._periodic_query, node)

    def _periodic_query(self, node):
        self._query(node, self.params.general_query_max_resp_ds)
        self.engine.after(self.params.general_query_interval_us, EventKind.TIMER_FIRE, self._periodic_query, node)

    def _query(self, node, max_resp_ds):
        self._bridge_rx(node, ROUTER, encode(IgmpMessage.general_query(max_resp_ds)))

    def source_send(self, pkt: IpMulticastPacket):
        node = self.sim.scenario.snap_for(pkt.group)
        self.engine.after(self.params.access_delay_us, EventKind.PACKET_ARRIVAL, self._bridge_rx, node, ROUTER, pkt)

    def client_igmp(self, client, frame):
        self.engine.after(self.params.access_delay_us, EventKind.PACKET_ARRIVAL,
                          self._bridge_rx, client.cnap, ("local", client.port), frame)

    def _bridge_rx(self, node, in_port, payload):
        state = self.ctl.states[node]
        if state.mode is Mode.RECONVERGING:
            self.metrics.counters["dropped_reconverging"] += 1
            return
        if isinstance(payload, bytes):
            try:
                msg = decode(payload)
            except DecodeError:
                self.metrics.counters["igmp_rejected"] += 1
                return
            snoop(msg, in_port, state.table)
            out = l2_forward(msg, in_port, state)
        else:
            out = l2_forward(payload, in_port, state)
        for port in sorted(out):
            self._tx(node, port, payload)

    def _tx(self, node, port, payload):
        kind, n = port
        if kind == "link":
            link = self.topo.links[n]
            if not link.up:
                self.metrics.counters["lost_on_down_link"] += 1
                return
            size = payload.payload_len + 28 if isinstance(payload, IpMulticastPacket) else IGMP_WIRE_BYTES
            bucket = self.params.bucket_us
            self.metrics.link_bytes[(self.engine.now // bucket * bucket, n)] += size
            self.engine.after(link.delay_us, EventKind.PACKET_ARRIVAL, self._bridge_rx, link.dst, ("link", link.peer), payload)
        elif kind == "local":
            client = self.sim.clients.get((node, n))
            if client is not None:
                self.engine.after(self.params.access_delay_us, EventKind.PACKET_ARRIVAL, client.deliver, payload)
        else:
            self.metrics.counters["to_router"] += 1

    def on_fault(self, links, up):
        until = self.ctl.on_link_change(links[0], self.engine.now)
        if until is not None:
            self.metrics.counters["reconvergences"] += 1
            self.engine.schedule(until, EventKind.TIMER_FIRE, self._finish, until)

    def _finish(self, at):
        if self.ctl.finish_reconvergence(at):
            for node in self.queriers:
                self._query(node, self.params.triggered_query_max_resp_ds)

    def audit(self):
        from ..l2 import tree_is_forest
        if not tree_is_forest(self.topo, self.ctl.tree):
            raise AssertionError("spanning tree has a cycle")
