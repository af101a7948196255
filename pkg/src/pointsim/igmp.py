"""IGMPv2 message codec (RFC 2236 8-byte layout)."""
from __future__ import annotations

import enum
import ipaddress
import struct
from dataclasses import dataclass

from .errors import BadChecksum, BadGroup, BadLength, InvalidMessage, UnknownType
from .model import GroupAddr

TYPE_QUERY = 0x11
TYPE_REPORT_V2 = 0x16
TYPE_LEAVE = 0x17

ZERO = ipaddress.IPv4Address(0)


class IgmpKind(enum.Enum):
    QUERY_GENERAL = "general-query"
    QUERY_GROUP = "group-query"
    REPORT = "report"
    LEAVE = "leave"


_TYPE_OF = {
    IgmpKind.QUERY_GENERAL: TYPE_QUERY,
    IgmpKind.QUERY_GROUP: TYPE_QUERY,
    IgmpKind.REPORT: TYPE_REPORT_V2,
    IgmpKind.LEAVE: TYPE_LEAVE,
}


@dataclass(frozen=True)
class IgmpMessage:
    kind: IgmpKind
    group: GroupAddr = ZERO
    max_resp_time: int = 0  # deciseconds

    @classmethod
    def general_query(cls, max_resp_time=100):
        return cls(IgmpKind.QUERY_GENERAL, ZERO, max_resp_time)

    @classmethod
    def group_query(cls, group, max_resp_time=10):
        return cls(IgmpKind.QUERY_GROUP, ipaddress.IPv4Address(group), max_resp_time)

    @classmethod
    def report(cls, group):
        return cls(IgmpKind.REPORT, ipaddress.IPv4Address(group))

    @classmethod
    def leave(cls, group):
        return cls(IgmpKind.LEAVE, ipaddress.IPv4Address(group))

    @property
    def is_query(self):
        return self.kind in (IgmpKind.QUERY_GENERAL, IgmpKind.QUERY_GROUP)


def checksum(data: bytes) -> int:
    """16-bit ones' complement of the ones' complement sum."""
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _check(msg: IgmpMessage):
    if not 0 <= msg.max_resp_time <= 255:
        raise InvalidMessage(f"max_resp_time {msg.max_resp_time} outside 0-255")
    if msg.kind is IgmpKind.QUERY_GENERAL:
        if msg.group != ZERO:
            raise InvalidMessage("general query must carry group 0.0.0.0")
        return
    if not msg.group.is_multicast:
        raise InvalidMessage(f"{msg.group} is not a multicast group")
    if msg.kind in (IgmpKind.REPORT, IgmpKind.LEAVE) and msg.max_resp_time != 0:
        raise InvalidMessage("reports and leaves carry max_resp_time 0")


def encode(msg: IgmpMessage) -> bytes:
    _check(msg)
    head = struct.pack("!BBH4s", _TYPE_OF[msg.kind], msg.max_resp_time, 0, msg.group.packed)
    return head[:2] + struct.pack("!H", checksum(head)) + head[4:]


def decode(frame: bytes) -> IgmpMessage:
    if len(frame) != 8:
        raise BadLength(f"expected 8 bytes, got {len(frame)}")
    if checksum(frame) != 0:
        raise BadChecksum("checksum mismatch")
    mtype, max_resp, _, raw_group = struct.unpack("!BBH4s", frame)
    group = ipaddress.IPv4Address(raw_group)
    if mtype == TYPE_QUERY:
        if group == ZERO:
            return IgmpMessage(IgmpKind.QUERY_GENERAL, ZERO, max_resp)
        kind = IgmpKind.QUERY_GROUP
    elif mtype == TYPE_REPORT_V2:
        kind = IgmpKind.REPORT
    elif mtype == TYPE_LEAVE:
        kind = IgmpKind.LEAVE
    else:
        raise UnknownType(f"type 0x{mtype:02x}")
    if not group.is_multicast:
        raise BadGroup(f"{group} is not a multicast group")
    # max_resp_time is meaningless in reports and leaves; senders set it to 0
    if kind is not IgmpKind.QUERY_GROUP:
        max_resp = 0
    return IgmpMessage(kind, group, max_resp)
