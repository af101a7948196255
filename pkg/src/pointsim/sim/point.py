"""ICN backend: FID forwarding between NAPs, PCE for path lookups."""
from __future__ import annotations

from collections import defaultdict

from ..errors import DecodeError, NoPath, UnconfiguredGroup
from ..fid import assign_tags, forward_decision, merge
from ..igmp import decode, encode
from ..model import IcnPacket, IpMulticastPacket, NodeKind
from ..nap import Cnap, ControlMessage, Publish, SendIgmp, Snap, StartTimer, group_to_names
from ..pce import Pce
from .engine import EventKind

CONTROL_BYTES = 12
ICN_HEADER_BYTES = 12


class PointNetwork:
    def __init__(self, sim, trace=False):
        self.sim = sim
        sc = sim.scenario
        p = sc.params
        self.params = p
        self.topo = sim.topology
        # what switches believe about link state; lags reality by detection_delay
        self.view = self.topo.copy()
        self.tags = assign_tags(self.topo, p.m, p.k, p.seed)
        self.pce = Pce(self.topo, self.tags, self._log_pce)
        self.snaps = {s.node: Snap(s.node, s.groups, self.pce.get_fid, p.m) for s in sc.snaps}
        self.snap_names = {s.node: {group_to_names(g)[0] for g in s.groups} for s in sc.snaps}
        self.cnaps = {c.node: Cnap(c.node, query_count=p.query_count, query_interval_us=p.query_interval_us,
                                   query_max_resp_ds=p.query_max_resp_ds) for c in sc.cnaps}
        self.cnap_ports = {c.node: sorted(c.ports) for c in sc.cnaps}
        self.routes: dict = {}  # (cnap, control name) -> (fid, {(cnap, snap)})
        self.trace = trace
        self.published: dict = {}  # (group, seq) -> (subscribed cnaps, fid) at publication
        self.reached: dict = defaultdict(set)  # (group, seq) -> cnaps the packet arrived at

    @property
    def engine(self):
        return self.sim.engine

    @property
    def metrics(self):
        return self.sim.metrics

    def _log_pce(self, kind):
        self.metrics.pce_log.append((self.engine.now, kind))

    def start(self):
        for snap in self.snaps.values():
            snap.init(self.pce.rv_subscribe)
        for node in sorted(self.cnaps):
            self.engine.schedule(0, EventKind.TIMER_FIRE, self._general_query, node)

    def _general_query(self, node):
        actions = self.cnaps[node].general_query(self.cnap_ports[node], self.params.general_query_max_resp_ds)
        self._apply(node, actions)
        self.engine.after(self.params.general_query_interval_us, EventKind.TIMER_FIRE, self._general_query, node)

    # IP side
    def source_send(self, pkt: IpMulticastPacket):
        node = self.sim.scenario.snap_for(pkt.group)
        self.engine.after(self.params.access_delay_us, EventKind.PACKET_ARRIVAL, self._at_snap, node, pkt)

    def _at_snap(self, node, pkt):
        snap = self.snaps[node]
        icn = snap.handle_ip_packet(pkt, self.params.hop_limit)
        if icn is None:
            self.metrics.counters["snap_no_subscribers"] += 1
            return
        if self.trace:
            self.published[(pkt.group, pkt.seq)] = (frozenset(snap.groups[pkt.group].subscribed_cnaps), icn.fid)
        self._forward(node, icn)

    def client_igmp(self, client, frame):
        self.engine.after(self.params.access_delay_us, EventKind.PACKET_ARRIVAL,
                          self._cnap_igmp, client.cnap, client.port, frame)

    def _cnap_igmp(self, node, port, frame):
        try:
            msg = decode(frame)
        except DecodeError:
            self.metrics.counters["igmp_rejected"] += 1
            return
        self._apply(node, self.cnaps[node].handle_igmp(msg, port))

    def _timer(self, node, group, token):
        self._apply(node, self.cnaps[node].on_timer(group, token))

    def _apply(self, node, actions):
        for act in actions:
            if isinstance(act, Publish):
                self._publish(node, act)
            elif isinstance(act, SendIgmp):
                client = self.sim.clients.get((node, act.port))
                if client is not None:
                    self.engine.after(self.params.access_delay_us, EventKind.PACKET_ARRIVAL,
                                      client.deliver, encode(act.message))
            elif isinstance(act, StartTimer):
                self.engine.after(act.delay_us, EventKind.TIMER_FIRE, self._timer, node, act.group, act.token)

    def _publish(self, node, act: Publish):
        msg = act.message
        self.metrics.counters[msg.kind.value] += 1
        self.metrics.nap_groups[(node, str(msg.group))][msg.kind.value] += 1
        route = self.routes.get((node, act.name))
        if route is None:
            pairs, fids = set(), []
            for snap in sorted(self.pce.rv_resolve(act.name)):
                try:
                    fids.append(self.pce.get_fid(node, snap)[0])
                except NoPath:
                    continue
                pairs.add((node, snap))
            if not fids:
                self.metrics.counters["control_unrouted"] += 1
                return
            route = self.routes[(node, act.name)] = (merge(fids), pairs)
        self._forward(node, IcnPacket(route[0], act.name, msg, self.params.hop_limit))

    # ICN core
    def _size(self, pkt: IcnPacket) -> int:
        inner = pkt.inner.payload_len + 28 if isinstance(pkt.inner, IpMulticastPacket) else CONTROL_BYTES
        return inner + self.params.m // 8 + ICN_HEADER_BYTES

    def _forward(self, node, pkt: IcnPacket):
        if pkt.hop_limit <= 0:
            self.metrics.counters["hop_limit_drops"] += 1
            return
        out = forward_decision(node, pkt.fid, self.view, self.tags)
        if not out:
            return
        nxt = pkt.hop()
        for lid in sorted(out):
            self._send(lid, nxt)

    def _send(self, lid, pkt):
        link = self.topo.links[lid]
        if not link.up:
            self.metrics.counters["lost_on_down_link"] += 1
            return
        bucket = self.params.bucket_us
        self.metrics.link_bytes[(self.engine.now // bucket * bucket, lid)] += self._size(pkt)
        self.engine.after(link.delay_us, EventKind.PACKET_ARRIVAL, self._arrive, link.dst, pkt)

    def _arrive(self, node, pkt: IcnPacket):
        kind = self.topo.nodes[node].kind
        inner = pkt.inner
        if isinstance(inner, IpMulticastPacket):
            if kind is NodeKind.CNAP:
                if self.trace:
                    self.reached[(inner.group, inner.seq)].add(node)
                cnap = self.cnaps.get(node)
                if cnap is not None:
                    before = cnap.stats["false_positive"]
                    copies = cnap.handle_icn_data(pkt)
                    self.metrics.counters["false_positive_deliveries"] += cnap.stats["false_positive"] - before
                    for port, ip in copies:
                        client = self.sim.clients.get((node, port))
                        if client is not None:
                            self.engine.after(self.params.access_delay_us, EventKind.PACKET_ARRIVAL,
                                              client.deliver, ip)
        elif isinstance(inner, ControlMessage):
            if kind is NodeKind.SNAP and pkt.name in self.snap_names.get(node, ()):
                try:
                    self.snaps[node].handle_control(inner)
                except UnconfiguredGroup:
                    pass
        self._forward(node, pkt)

    # faults
    def on_fault(self, links, up):
        now = self.engine.now
        version = self.topo.version
        if self.params.detection_delay_us == 0:
            self._detect(links, up, version)
        else:
            self.engine.after(self.params.detection_delay_us, EventKind.CONTROL_DELIVERY,
                              self._detect, links, up, version)

    def _detect(self, links, up, version):
        for lid in links:
            self.view.set_link_state(lid, up)
        changed = set()
        for lid in links:
            link = self.topo.links[lid]
            if link.failover_group is None:
                changed.add(lid)
                continue
            members = [l for l in self.topo.links.values() if l.failover_group == link.failover_group]
            if not any(l.up for l in members):
                changed.add(min(l.id for l in members))
        if not changed:
            return
        stale = self.pce.notify_topology_change(changed, version)
        if stale:
            self.engine.after(self.params.notification_delay_us, EventKind.CONTROL_DELIVERY,
                              self._invalidate, sorted((e.src, e.dst) for e in stale))
        if any(s.unreachable for s in self.snaps.values()):
            self.engine.after(self.params.notification_delay_us, EventKind.CONTROL_DELIVERY, self._retry)

    def _retry(self):
        for node, snap in sorted(self.snaps.items()):
            if snap.unreachable:
                self._log_pce("notify")
                snap.retry_unreachable()

    def _invalidate(self, pairs):
        by_src = defaultdict(list)
        for src, dst in pairs:
            by_src[src].append((src, dst))
        for src, ps in sorted(by_src.items()):
            self._log_pce("notify")
            if src in self.snaps:
                self.snaps[src].handle_invalidation(ps)
            if src in self.cnaps:
                dead = set(ps)
                for key, (_, used) in list(self.routes.items()):
                    if key[0] == src and used & dead:
                        del self.routes[key]

    def audit(self):
        for snap in self.snaps.values():
            for state in snap.groups.values():
                if not state.consistent():
                    raise AssertionError(f"snap {snap.node} group {state.group} merged FID out of sync")
