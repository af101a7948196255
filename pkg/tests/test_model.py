import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from pointsim.errors import InvalidGroup
from pointsim.model import Link, NodeKind, Topology, failover_groups, group_addr, validate_topology

from conftest import chain


def parallel(ids, group):
    topo = Topology()
    topo.add_node(0, NodeKind.SWITCH)
    topo.add_node(1, NodeKind.SWITCH)
    for i in ids:
        topo.add_link(Link(i, 0, 1, 10, failover_group=group))
    return topo


def test_minimal_topology_is_valid():
    assert validate_topology(chain(2)) == []


def test_self_loop_reported():
    topo = chain(2)
    topo.add_link(Link(7, 1, 1))
    violations = validate_topology(topo)
    assert len(violations) == 1
    assert violations[0].target == "link 7"


def test_failover_group_with_mixed_endpoints():
    topo = chain(3)
    topo.add_link(Link(10, 0, 1, failover_group=3))
    topo.add_link(Link(11, 1, 2, failover_group=3))
    violations = validate_topology(topo)
    # independent scan: members of each group must share (src, dst)
    groups = {}
    for l in topo.links.values():
        if l.failover_group is not None:
            groups.setdefault(l.failover_group, set()).add((l.src, l.dst))
    expected = sum(1 for ends in groups.values() if len(ends) > 1)
    assert expected == 1
    assert [v.target for v in violations] == ["failover group 3"]


def test_failover_groups_empty():
    assert failover_groups(chain(4)) == {}


def test_failover_groups_ordering():
    assert failover_groups(parallel([4, 9], 0)) == {0: [4, 9]}
    assert failover_groups(parallel([7, 2, 5], 1)) == {1: sorted([7, 2, 5])}


# each mutation breaks exactly one invariant
MUTATIONS = {
    "self-loop": lambda l: dataclasses.replace(l, dst=l.src, peer=None),
    "unknown source node": lambda l: dataclasses.replace(l, src=99, peer=None),
    "unknown destination node": lambda l: dataclasses.replace(l, dst=99, peer=None),
    "negative delay": lambda l: dataclasses.replace(l, delay_us=-1),
    "peer": lambda l: dataclasses.replace(l, peer=l.id),
}


@pytest.mark.parametrize("what", sorted(MUTATIONS))
def test_single_mutation_gives_single_violation(what):
    topo = chain(4)
    topo.add_link(Link(20, 0, 1, 10))  # unpaired, so endpoint edits cannot upset a peer
    assert validate_topology(topo) == []
    lid = 2 if what == "peer" else 20
    topo.links[lid] = MUTATIONS[what](topo.links[lid])
    violations = validate_topology(topo)
    assert len(violations) == 1, violations
    assert violations[0].target == f"link {lid}"
    assert what.split()[0] in violations[0].message


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), max_size=40))
def test_version_counts_mutations(flips):
    topo = chain(4)
    v0 = topo.version
    changes = 0
    for lid, up in flips:
        changes += topo.set_link_state(lid, up)
    assert topo.version == v0 + changes
    before = topo.version
    topo.add_node(50, NodeKind.CNAP)
    topo.add_cable(40, 3, 50)
    assert topo.version == before + 3


def test_group_addr():
    assert str(group_addr("239.1.1.1")) == "239.1.1.1"
    with pytest.raises(InvalidGroup):
        group_addr("10.0.0.1")
    with pytest.raises(InvalidGroup):
        group_addr("not an address")
