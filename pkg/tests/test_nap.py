import ipaddress
import random

import pytest
from hypothesis import given, settings, strategies as st

from pointsim.errors import InvalidGroup, NoPath, UnconfiguredGroup
from pointsim.fid import Fid, assign_tags, merge
from pointsim.igmp import IgmpKind, IgmpMessage
from pointsim.model import IcnPacket, IpMulticastPacket
from pointsim.nap import (
    Cnap, ControlKind, ControlMessage, NameMapping, Publish, SendIgmp, Snap, StartTimer,
    check_digest_collisions, fnv1a64, group_to_names,
)
from pointsim.pce import IcnName, Pce

from conftest import random_topology

G1 = ipaddress.IPv4Address("239.1.1.1")
G2 = ipaddress.IPv4Address("239.1.1.2")


def fnv_reference(data):
    # written from the published algorithm description, no shared constants
    h = 14695981039346656037
    for byte in data:
        h ^= byte
        h = (h * 1099511628211) % (1 << 64)
    return h


@pytest.mark.parametrize("data,expected", [
    (b"", 0xCBF29CE484222325),
    (b"a", 0xAF63DC4C8601EC8C),
    (b"foobar", 0x85944171F73967E8),
])
def test_fnv_known_vectors(data, expected):
    assert fnv1a64(data) == expected
    assert fnv_reference(data) == expected


def test_group_names():
    c, d = group_to_names("239.1.1.1")
    h = fnv_reference(bytes([239, 1, 1, 1])).to_bytes(8, "big")
    assert c == IcnName((b"IPMoverICN", b"C", h))
    assert d == IcnName((b"IPMoverICN", b"D", h))
    assert group_to_names(G1) == group_to_names(G1)
    assert group_to_names(G1) != group_to_names(G2)


@given(st.integers(0xE0000000, 0xEFFFFFFF))
def test_digest_matches_reference(value):
    g = ipaddress.IPv4Address(value)
    assert NameMapping().digest(g) == fnv_reference(g.packed).to_bytes(8, "big")


def test_invalid_group_rejected():
    with pytest.raises(InvalidGroup):
        group_to_names("10.0.0.1")


def test_collision_detected():
    class Truncated(NameMapping):
        def digest(self, group):
            return b"\0" * 8
    check_digest_collisions([G1, G1])
    with pytest.raises(InvalidGroup):
        check_digest_collisions([G1, G2], Truncated())


# cNAP

def test_first_report_subscribes():
    cnap = Cnap(5)
    actions = cnap.handle_igmp(IgmpMessage.report(G1), 1)
    c, _ = group_to_names(G1)
    assert actions == [Publish(c, ControlMessage(ControlKind.SUBSCRIBE, G1, 5))]
    assert cnap.groups[G1].member_ports == {1}
    assert cnap.handle_igmp(IgmpMessage.report(G1), 2) == []
    assert cnap.groups[G1].member_ports == {1, 2}


def test_leave_queries_then_unsubscribes():
    cnap = Cnap(5)
    cnap.handle_igmp(IgmpMessage.report(G1), 1)
    acts = cnap.handle_igmp(IgmpMessage.leave(G1), 1)
    q = IgmpMessage.group_query(G1, 10)
    token = cnap.groups[G1].token
    assert acts == [SendIgmp(1, q), StartTimer(1_000_000, G1, token)]
    assert cnap.on_timer(G1, token) == [SendIgmp(1, q), StartTimer(1_000_000, G1, token)]
    acts = cnap.on_timer(G1, token)
    c, _ = group_to_names(G1)
    assert acts == [Publish(c, ControlMessage(ControlKind.UNSUBSCRIBE, G1, 5))]
    assert G1 not in cnap.groups


def test_report_during_leave_cancels():
    cnap = Cnap(5)
    cnap.handle_igmp(IgmpMessage.report(G1), 1)
    cnap.handle_igmp(IgmpMessage.leave(G1), 1)
    token = cnap.groups[G1].token
    assert cnap.handle_igmp(IgmpMessage.report(G1), 1) == []
    assert cnap.on_timer(G1, token) == []
    assert cnap.groups[G1].member_ports == {1}
    assert cnap.stats["implicit-unsubscribe"] == 0


def test_leave_with_other_port_still_member():
    cnap = Cnap(5)
    cnap.handle_igmp(IgmpMessage.report(G1), 1)
    cnap.handle_igmp(IgmpMessage.report(G1), 2)
    acts = cnap.handle_igmp(IgmpMessage.leave(G1), 1)
    assert [a.port for a in acts if isinstance(a, SendIgmp)] == [1]
    token = cnap.groups[G1].token
    cnap.on_timer(G1, token)
    assert cnap.on_timer(G1, token) == []
    assert cnap.groups[G1].member_ports == {2}


def test_unexpected_leave_and_query():
    cnap = Cnap(5)
    assert cnap.handle_igmp(IgmpMessage.leave(G1), 1) == []
    assert cnap.handle_igmp(IgmpMessage.general_query(), 1) == []
    assert cnap.stats["unexpected"] == 2


def test_icn_data_delivery_and_false_positive():
    cnap = Cnap(5)
    cnap.handle_igmp(IgmpMessage.report(G1), 2)
    cnap.handle_igmp(IgmpMessage.report(G1), 1)
    inner = IpMulticastPacket(G1, 0, 100, 0)
    _, d1 = group_to_names(G1)
    _, d2 = group_to_names(G2)
    assert cnap.handle_icn_data(IcnPacket(Fid.zero(), d1, inner)) == [(1, inner), (2, inner)]
    assert cnap.handle_icn_data(IcnPacket(Fid.zero(), d2, inner)) == []
    assert cnap.stats["false_positive"] == 1


def test_general_query():
    q = IgmpMessage.general_query(100)
    assert Cnap(1).general_query([2, 1]) == [SendIgmp(1, q), SendIgmp(2, q)]


igmp_ops = st.lists(
    st.one_of(
        st.tuples(st.just("report"), st.integers(1, 3)),
        st.tuples(st.just("leave"), st.integers(1, 3)),
        st.tuples(st.just("timer"), st.just(0)),
    ),
    max_size=40,
)


@settings(max_examples=200)
@given(igmp_ops)
def test_one_subscribe_per_episode(ops):
    cnap = Cnap(9)
    subscribed = False
    pending = []
    for op, port in ops:
        if op == "report":
            acts = cnap.handle_igmp(IgmpMessage.report(G1), port)
        elif op == "leave":
            acts = cnap.handle_igmp(IgmpMessage.leave(G1), port)
        elif pending:
            acts = cnap.on_timer(G1, pending.pop(0).token)
        else:
            acts = []
        for a in acts:
            if isinstance(a, StartTimer):
                pending.append(a)
            if isinstance(a, Publish):
                # alternate strictly: subscribe, unsubscribe, subscribe ...
                assert (a.message.kind is ControlKind.SUBSCRIBE) == (not subscribed)
                subscribed = not subscribed
        assert subscribed == (G1 in cnap.groups)
    assert cnap.stats["implicit-subscribe"] == cnap.episodes[G1]


@settings(max_examples=100)
@given(st.integers(1, 3), st.integers(0, 2))
def test_leave_then_report_never_unsubscribes(port, timers_before_report):
    cnap = Cnap(9)
    cnap.handle_igmp(IgmpMessage.report(G1), port)
    acts = cnap.handle_igmp(IgmpMessage.leave(G1), port)
    token = acts[-1].token
    for _ in range(min(timers_before_report, 1)):
        cnap.on_timer(G1, token)
    cnap.handle_igmp(IgmpMessage.report(G1), port)
    for _ in range(4):
        cnap.on_timer(G1, token)
    assert cnap.stats["implicit-unsubscribe"] == 0
    assert G1 in cnap.groups


# sNAP

class FakePce:
    def __init__(self, table):
        self.table = table
        self.calls = 0

    def __call__(self, src, dst):
        self.calls += 1
        if dst not in self.table:
            raise NoPath(src, dst)
        return self.table[dst]


F10 = Fid.from_positions([1, 2], 256)
F20 = Fid.from_positions([2, 3], 256)


def sub(g, origin):
    return ControlMessage(ControlKind.SUBSCRIBE, ipaddress.IPv4Address(g), origin)


def unsub(g, origin):
    return ControlMessage(ControlKind.UNSUBSCRIBE, ipaddress.IPv4Address(g), origin)


def test_snap_init_subscribes_control_names():
    snap = Snap(1, [G2, G1], FakePce({}), 256)
    seen = []
    snap.init(lambda name, node: seen.append((name, node)))
    assert seen == [(group_to_names(G1)[0], 1), (group_to_names(G2)[0], 1)]


def test_snap_merge_and_fid_cache():
    pce = FakePce({10: (F10, 0), 20: (F20, 0)})
    snap = Snap(1, [G1, G2], pce, 256)
    snap.handle_control(sub(G1, 10))
    snap.handle_control(sub(G1, 20))
    assert snap.groups[G1].merged_fid == F10 | F20
    pkt = snap.handle_ip_packet(IpMulticastPacket(G1, 0, 10, 0))
    assert pkt.fid == F10 | F20 and pkt.name == group_to_names(G1)[1]
    snap.handle_control(unsub(G1, 20))
    assert snap.groups[G1].merged_fid == F10
    snap.handle_control(sub(G2, 20))  # served from the local cache
    assert pce.calls == 2
    snap.handle_control(sub(G2, 20))
    assert snap.stats["duplicate"] == 1


def test_snap_unconfigured_and_idle():
    snap = Snap(1, [G1], FakePce({10: (F10, 0)}), 256)
    with pytest.raises(UnconfiguredGroup):
        snap.handle_control(sub("239.9.9.9", 10))
    assert snap.stats["unconfigured"] == 1
    assert snap.handle_ip_packet(IpMulticastPacket(G1, 0, 10, 0)) is None
    snap.handle_control(unsub(G1, 10))
    assert snap.stats["ignored_unsubscribe"] == 1


def test_snap_invalidation_refetches():
    pce = FakePce({10: (F10, 0), 20: (F20, 0)})
    snap = Snap(1, [G1], pce, 256)
    snap.handle_control(sub(G1, 10))
    snap.handle_control(sub(G1, 20))
    new = Fid.from_positions([7, 8], 256)
    pce.table[10] = (new, 1)
    snap.handle_invalidation([(1, 10), (99, 20)])
    assert snap.groups[G1].cnap_fids[10] == (new, 1)
    assert snap.groups[G1].cnap_fids[20] == (F20, 0)
    assert snap.groups[G1].merged_fid == new | F20


def test_snap_invalidation_unreachable_cnap():
    pce = FakePce({10: (F10, 0), 20: (F20, 0)})
    snap = Snap(1, [G1, G2], pce, 256)
    snap.handle_control(sub(G1, 10))
    snap.handle_control(sub(G1, 20))
    snap.handle_control(sub(G2, 20))
    del pce.table[20]
    snap.handle_invalidation([(1, 20)])
    assert snap.groups[G1].subscribed_cnaps == {10}
    assert snap.groups[G1].merged_fid == F10
    assert G2 not in snap.groups
    assert snap.stats["lost_cnap"] == 2


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.tuples(st.booleans(), st.integers(0, 1), st.integers(0, 3)), max_size=30))
def test_merged_fid_invariant(seed, ops):
    topo, snap_id, cnaps = random_topology(seed, max_switches=6, max_cables=12)
    pce = Pce(topo, assign_tags(topo, 256, 5, seed))
    snap = Snap(snap_id, [G1, G2], pce.get_fid, 256)
    rng = random.Random(seed)
    for subscribe, gi, ci in ops:
        g = (G1, G2)[gi]
        cnap = cnaps[ci % len(cnaps)]
        snap.handle_control(sub(g, cnap) if subscribe else unsub(g, cnap))
        if rng.random() < 0.2:
            lid = rng.choice(sorted(topo.links))
            if topo.set_link_state(lid, not topo.links[lid].up):
                stale = pce.notify_topology_change({lid}, topo.version)
                snap.handle_invalidation({(e.src, e.dst) for e in stale})
        for state in snap.groups.values():
            assert state.consistent()
            assert state.merged_fid == merge(f for f, _ in state.cnap_fids.values())


def test_snap_retries_unreachable_cnap():
    pce = FakePce({10: (F10, 0), 20: (F20, 0)})
    snap = Snap(1, [G1], pce, 256)
    snap.handle_control(sub(G1, 10))
    snap.handle_control(sub(G1, 20))
    del pce.table[20]
    snap.handle_invalidation([(1, 20)])
    assert snap.retry_unreachable() == 0
    pce.table[20] = (F20, 2)
    assert snap.retry_unreachable() == 1
    assert snap.groups[G1].cnap_fids[20] == (F20, 2)
    assert snap.groups[G1].merged_fid == F10 | F20
    assert snap.unreachable == {}


def test_unsubscribe_forgets_unreachable_cnap():
    pce = FakePce({})
    snap = Snap(1, [G1], pce, 256)
    snap.handle_control(sub(G1, 10))
    assert snap.unreachable == {G1: {10}}
    snap.handle_control(unsub(G1, 10))
    assert snap.unreachable == {}
    pce.table[10] = (F10, 0)
    assert snap.retry_unreachable() == 0 and G1 not in snap.groups
