"""In-packet Bloom filter forwarding identifiers.

A link tag is an ``m``-bit value with exactly ``k`` bits set. A FID is the
bitwise OR of the tags of the links a packet should traverse; a node sends
the packet on every outgoing link whose tag is contained in the FID.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from functools import reduce
from typing import Iterable

from .errors import InvalidParams, UnknownLink, WidthMismatch
from .model import Topology

DEFAULT_M = 256
DEFAULT_K = 5


@dataclass(frozen=True)
class Fid:
    bits: int
    width: int = DEFAULT_M

    @classmethod
    def zero(cls, width: int = DEFAULT_M) -> "Fid":
        return cls(0, width)

    @classmethod
    def ones(cls, width: int = DEFAULT_M) -> "Fid":
        return cls((1 << width) - 1, width)

    @classmethod
    def from_positions(cls, positions: Iterable[int], width: int = DEFAULT_M) -> "Fid":
        bits = 0
        for p in positions:
            bits |= 1 << p
        return cls(bits, width)

    def _check(self, other: "Fid"):
        if self.width != other.width:
            raise WidthMismatch(f"{self.width} != {other.width}")

    def __or__(self, other: "Fid") -> "Fid":
        self._check(other)
        return Fid(self.bits | other.bits, self.width)

    def __and__(self, other: "Fid") -> "Fid":
        self._check(other)
        return Fid(self.bits & other.bits, self.width)

    def popcount(self) -> int:
        return bin(self.bits).count("1")

    def positions(self) -> list[int]:
        return [i for i in range(self.width) if self.bits >> i & 1]

    def hex(self) -> str:
        return format(self.bits, f"0{self.width // 4}x")


LinkTag = Fid


@dataclass(frozen=True)
class TagAssignment:
    tags: dict
    m: int
    k: int
    seed: int

    def __getitem__(self, link_id: int) -> Fid:
        try:
            return self.tags[link_id]
        except KeyError:
            raise UnknownLink(link_id) from None

    def __contains__(self, link_id: int) -> bool:
        return link_id in self.tags


def assign_tags(topology: Topology, m: int = DEFAULT_M, k: int = DEFAULT_K, seed: int = 0) -> TagAssignment:
    if k < 1 or m < k:
        raise InvalidParams(f"need m >= k >= 1, got m={m} k={k}")
    rng = random.Random(seed)
    tags: dict[int, Fid] = {}
    seen: set[int] = set()
    for link_id in sorted(topology.links):
        while True:
            tag = Fid.from_positions(rng.sample(range(m), k), m)
            if tag.bits not in seen:
                break
        seen.add(tag.bits)
        tags[link_id] = tag
    return TagAssignment(tags, m, k, seed)


def encode_path(path: Iterable[int], tags: TagAssignment) -> Fid:
    fid = Fid.zero(tags.m)
    for link_id in path:
        fid = fid | tags[link_id]
    return fid


def merge(fids: Iterable[Fid]) -> Fid:
    fids = list(fids)
    if not fids:
        raise InvalidParams("merge of an empty list has no width")
    return reduce(lambda a, b: a | b, fids)


def matches(fid: Fid, tag: Fid) -> bool:
    return (fid & tag) == tag


def forward_decision(node: int, fid: Fid, topology: Topology, tags: TagAssignment) -> set[int]:
    """Outgoing links of ``node`` the packet is sent on.

    Links in a failover group are treated as one logical link: if any member
    matches, the first member that is up (lowest id) is used.
    """
    out = set()
    grouped: dict[int, list] = {}
    hit_groups = set()
    for link in topology.out_links(node):
        hit = matches(fid, tags[link.id])
        if link.failover_group is None:
            if hit and link.up:
                out.add(link.id)
            continue
        grouped.setdefault(link.failover_group, []).append(link)
        if hit:
            hit_groups.add(link.failover_group)
    for gid in hit_groups:
        for link in sorted(grouped[gid], key=lambda l: l.id):
            if link.up:
                out.add(link.id)
                break
    return out


def false_positive_estimate(n_links_in_fid: int, m: int = DEFAULT_M, k: int = DEFAULT_K) -> float:
    """Probability that an unrelated tag matches a FID built from ``n`` tags."""
    if n_links_in_fid < 0 or m <= 0 or k <= 0:
        raise InvalidParams("inputs must be positive")
    return (1.0 - (1.0 - 1.0 / m) ** (k * n_links_in_fid)) ** k
