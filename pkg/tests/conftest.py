import sys
import random
from collections import deque

import pytest

from pointsim.model import NodeKind, Topology


def chain(n, delay=100):
    """Switches 0..n-1 in a line, cable i joins i and i+1 (links 2i, 2i+1)."""
    topo = Topology()
    for i in range(n):
        topo.add_node(i, NodeKind.SWITCH)
    for i in range(n - 1):
        topo.add_cable(2 * i, i, i + 1, delay)
    return topo


def random_topology(seed, max_switches=10, max_cables=25, max_cnaps=4):
    """Connected random switch graph with one sNAP and some cNAPs hung off it.

    Returns (topology, snap id, [cnap ids]).
    """
    rng = random.Random(seed)
    n = rng.randint(2, max_switches)
    n_cnaps = rng.randint(1, max_cnaps)
    topo = Topology()
    for i in range(n):
        topo.add_node(i, NodeKind.SWITCH)
    cables = []
    for i in range(1, n):
        cables.append((rng.randrange(i), i))
    budget = max_cables - (n - 1) - 1 - n_cnaps
    for _ in range(rng.randint(0, max(0, budget))):
        a, b = rng.sample(range(n), 2)
        cables.append((a, b))
    snap = n
    topo.add_node(snap, NodeKind.SNAP)
    cables.append((snap, rng.randrange(n)))
    cnaps = []
    for j in range(n_cnaps):
        c = n + 1 + j
        topo.add_node(c, NodeKind.CNAP)
        cables.append((rng.randrange(n), c))
        cnaps.append(c)
    for idx, (a, b) in enumerate(cables):
        topo.add_cable(2 * idx, a, b, rng.choice([50, 100, 200]))
    return topo, snap, cnaps


def bfs_hops(topo, src):
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        for link in topo.out_links(u):
            if link.up and link.dst not in dist:
                dist[link.dst] = dist[u] + 1
                q.append(link.dst)
    return dist


def flood_oracle(topo, tags, fid_bits, start):
    """Nodes a FID reaches from ``start``, testing every link bit by bit.

    Works on raw ints and position sets, independent of the Fid class.
    Failover groups are ignored; callers use ungrouped topologies.
    Returns (reached nodes, traversed links).
    """
    positions = {lid: {i for i in range(tags.m) if tags.tags[lid].bits >> i & 1} for lid in tags.tags}
    fid_pos = {i for i in range(tags.m) if fid_bits >> i & 1}
    reached, used = {start}, set()
    q = deque([start])
    while q:
        u = q.popleft()
        for link in topo.out_links(u):
            if link.up and positions[link.id] <= fid_pos:
                used.add(link.id)
                if link.dst not in reached:
                    reached.add(link.dst)
                    q.append(link.dst)
    return reached, used


@pytest.fixture
def trial_topology():
    from pointsim.scenario import load_scenario
    return load_scenario("trial").build_topology()


def pytest_terminal_summary(terminalreporter):
    lines = getattr(sys.modules.get("test_acceptance"), "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
