"""Per-client delivery logs, outage detection and counters."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True, order=True)
class Outage:
    start_us: int
    duration_us: int


def detect_outages(arrivals: list[int], nominal_interval: int, gap_threshold: float = 3.0,
                   end: Optional[int] = None) -> list[Outage]:
    """Gaps strictly longer than ``gap_threshold * nominal_interval``.

    ``arrivals`` are time-ordered arrival times within one membership. If
    ``end`` is given, a silent stretch from the last arrival to ``end`` also
    counts. An episode starts one nominal interval after the arrival that
    precedes the gap and lasts ``gap - nominal_interval``.
    """
    limit = gap_threshold * nominal_interval
    out = []
    for prev, cur in zip(arrivals, arrivals[1:]):
        gap = cur - prev
        if gap > limit:
            out.append(Outage(prev + nominal_interval, gap - nominal_interval))
    if end is not None and arrivals and end - arrivals[-1] > limit:
        out.append(Outage(arrivals[-1] + nominal_interval, end - arrivals[-1] - nominal_interval))
    return out


@dataclass
class Membership:
    client: str
    group: str
    join_us: int
    leave_us: Optional[int] = None
    # (seq, arrival time) for first copies; duplicates only counted
    arrivals: list = field(default_factory=list)
    seen: set = field(default_factory=set)
    duplicates: int = 0
    outages: list = field(default_factory=list)


@dataclass
class ClientGroupRow:
    client: str
    group: str
    episodes: int
    received: int
    duplicates: int
    first_arrival_us: Optional[int]
    last_arrival_us: Optional[int]
    outages: int
    outage_us: int


@dataclass
class Metrics:
    backend: str = ""
    scenario: str = ""
    memberships: list = field(default_factory=list)
    link_bytes: dict = field(default_factory=lambda: defaultdict(int))  # (bucket_us, link) -> bytes
    counters: Counter = field(default_factory=Counter)
    # (cnap, group) -> Counter(episodes, subscribes, unsubscribes)
    nap_groups: dict = field(default_factory=lambda: defaultdict(Counter))
    pce_log: list = field(default_factory=list)  # (time, kind)
    emitted: dict = field(default_factory=dict)  # group -> packets emitted

    def rows(self) -> list[ClientGroupRow]:
        grouped = defaultdict(list)
        for m in self.memberships:
            grouped[(m.client, m.group)].append(m)
        rows = []
        for (client, group), ms in sorted(grouped.items()):
            times = [t for m in ms for _, t in m.arrivals]
            outs = [o for m in ms for o in m.outages]
            rows.append(ClientGroupRow(
                client, group, len(ms), sum(len(m.arrivals) for m in ms), sum(m.duplicates for m in ms),
                min(times) if times else None, max(times) if times else None,
                len(outs), sum(o.duration_us for o in outs)))
        return rows

    def outage_rows(self) -> list[tuple[str, str, int, int]]:
        out = []
        for m in self.memberships:
            for o in m.outages:
                out.append((m.client, m.group, o.start_us, o.duration_us))
        return sorted(out)

    def outages_for(self, client: str, group: Optional[str] = None) -> list[Outage]:
        return sorted(o for m in self.memberships if m.client == client and (group is None or m.group == group)
                      for o in m.outages)

    def received_seqs(self, client: str, group: str, lo_us: int = 0, hi_us: Optional[int] = None,
                      emit_time=None) -> set[int]:
        """Sequence numbers received; optionally filtered by emission time window."""
        out = set()
        for m in self.memberships:
            if m.client != client or m.group != group:
                continue
            for seq, _ in m.arrivals:
                if emit_time is None or (emit_time(seq) >= lo_us and (hi_us is None or emit_time(seq) < hi_us)):
                    out.add(seq)
        return out

    def pce_interactions_after(self, t_us: int) -> int:
        return sum(1 for t, _ in self.pce_log if t >= t_us)
