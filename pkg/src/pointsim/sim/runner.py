"""Scenario execution: wires streams, clients and faults to a backend."""
from __future__ import annotations

import random

from ..errors import InvalidScenario, UnknownLink
from ..model import IpMulticastPacket
from ..scenario import Scenario, validate_scenario
from .engine import Engine, EventKind
from .hosts import ClientHost
from .ip import IpNetwork
from .metrics import Metrics, detect_outages
from .point import PointNetwork

BACKENDS = ("point", "ip")


class Simulation:
    def __init__(self, scenario: Scenario, backend: str, audit: bool = False, trace: bool = False):
        if backend not in BACKENDS:
            raise InvalidScenario(f"unknown backend {backend!r}")
        validate_scenario(scenario)
        self.scenario = scenario
        self.backend = backend
        self.engine = Engine()
        self.topology = scenario.build_topology()
        self.metrics = Metrics(backend, scenario.name)
        # STB query-response jitter; tag assignment seeds itself from the same seed
        self.rng = random.Random(f"stb-{scenario.params.seed}")
        self.clients = {(c.cnap, c.port): ClientHost(self, c) for c in scenario.clients}
        self.net = PointNetwork(self, trace) if backend == "point" else IpNetwork(self)
        if audit:
            self.engine.after_event.append(self.net.audit)

    def inject_fault(self, link: int, kind: str):
        if link not in self.topology.links:
            raise UnknownLink(link)
        up = kind == "up"
        changed = [l for l in self.topology.cable(link) if self.topology.set_link_state(l, up)]
        self.metrics.counters[f"link_{kind}"] += 1
        if changed:
            self.net.on_fault(changed, up)

    def _emit(self, stream, i):
        t = stream.emission_time(i)
        if t >= self.scenario.stream_stop(stream):
            return
        self.metrics.emitted[str(stream.group)] = i + 1
        self.net.source_send(IpMulticastPacket(stream.group, i, stream.payload, t))
        nxt = stream.emission_time(i + 1)
        self.engine.schedule(nxt, EventKind.PACKET_ARRIVAL, self._emit, stream, i + 1)

    def run(self) -> Metrics:
        sc = self.scenario
        for f in sc.faults:
            kind = EventKind.LINK_UP if f.kind == "up" else EventKind.LINK_DOWN
            self.engine.schedule(f.time_us, kind, self.inject_fault, f.link, f.kind)
        self.net.start()
        for client in self.clients.values():
            for a in client.script.actions:
                self.engine.schedule(a.time_us, EventKind.CLIENT_ACTION, client.act, a)
        for s in sc.streams:
            self.engine.schedule(s.start_us, EventKind.PACKET_ARRIVAL, self._emit, s, 0)
        self.engine.run(sc.params.duration_us)
        self._finalize()
        return self.metrics

    def _finalize(self):
        sc = self.scenario
        p = sc.params
        streams = {str(s.group): s for s in sc.streams}
        if self.backend == "point":
            for node, cnap in sorted(self.net.cnaps.items()):
                for group, n in cnap.episodes.items():
                    self.metrics.nap_groups[(node, str(group))]["episodes"] = n
        for m in self.metrics.memberships:
            stream = streams.get(m.group)
            if stream is None:
                continue
            end = p.duration_us if m.leave_us is None else m.leave_us
            end = min(end, sc.stream_stop(stream))
            times = [t for _, t in m.arrivals]
            m.outages = detect_outages(times, stream.interval_us, p.gap_threshold, end)
        self.metrics.counters["events"] = self.engine.processed


def run(scenario: Scenario, backend: str, **kwargs) -> Metrics:
    return Simulation(scenario, backend, **kwargs).run()
