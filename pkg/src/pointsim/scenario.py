"""Scenario description, YAML loading/dumping and cross-validation.

Times in scenario files are seconds (floats allowed); internally everything
is integer microseconds. A cable with id ``c`` yields link ``2c`` (a->b) and
``2c + 1`` (b->a). Cables sharing a ``failover_group`` label form two groups,
one per direction.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import yaml

from .errors import InvalidGroup, ParseError, ValidationError
from .l2 import T_CONV_PRESETS_US
from .model import GroupAddr, NodeKind, Topology, group_addr, validate_topology
from .nap import check_digest_collisions

US = 1_000_000


def to_us(seconds) -> int:
    return int(round(float(seconds) * US))


def to_s(us: int):
    s = us / US
    return int(s) if s == int(s) else s


@dataclass
class Params:
    m: int = 256
    k: int = 5
    seed: int = 0
    t_conv: Union[str, float] = "classic"
    detection_delay_us: int = 50_000
    notification_delay_us: int = 10_000
    access_delay_us: int = 500
    query_count: int = 2
    query_interval_us: int = 1_000_000
    query_max_resp_ds: int = 10
    general_query_interval_us: int = 125_000_000
    general_query_max_resp_ds: int = 100
    triggered_query_max_resp_ds: int = 20
    gap_threshold: float = 3.0
    hop_limit: int = 32
    bucket_us: int = 1_000_000
    warmup_us: int = 0
    duration_us: int = 60_000_000

    @property
    def t_conv_us(self) -> int:
        if isinstance(self.t_conv, str):
            return T_CONV_PRESETS_US[self.t_conv]
        return to_us(self.t_conv)


# file key -> (attribute, converter to internal, converter to file)
_PARAM_KEYS = {
    "m": ("m", int, int),
    "k": ("k", int, int),
    "seed": ("seed", int, int),
    "t_conv": ("t_conv", None, None),
    "detection_delay": ("detection_delay_us", to_us, to_s),
    "notification_delay": ("notification_delay_us", to_us, to_s),
    "access_delay": ("access_delay_us", to_us, to_s),
    "query_count": ("query_count", int, int),
    "query_interval": ("query_interval_us", to_us, to_s),
    "query_max_resp_ds": ("query_max_resp_ds", int, int),
    "general_query_interval": ("general_query_interval_us", to_us, to_s),
    "general_query_max_resp_ds": ("general_query_max_resp_ds", int, int),
    "triggered_query_max_resp_ds": ("triggered_query_max_resp_ds", int, int),
    "gap_threshold": ("gap_threshold", float, float),
    "hop_limit": ("hop_limit", int, int),
    "bucket": ("bucket_us", to_us, to_s),
    "warmup": ("warmup_us", to_us, to_s),
    "duration": ("duration_us", to_us, to_s),
}


@dataclass
class NodeSpec:
    id: int
    kind: NodeKind
    name: str = ""


@dataclass
class CableSpec:
    id: int
    a: int
    b: int
    delay_us: int = 100
    failover_group: Optional[str] = None

    @property
    def links(self) -> tuple[int, int]:
        return 2 * self.id, 2 * self.id + 1


@dataclass
class SnapConfig:
    node: int
    groups: list


@dataclass
class CnapConfig:
    node: int
    ports: list


@dataclass
class Stream:
    group: GroupAddr
    rate_pps: int
    payload: int = 1316
    start_us: int = 0
    stop_us: Optional[int] = None

    def emission_time(self, i: int) -> int:
        return self.start_us + i * US // self.rate_pps

    @property
    def interval_us(self) -> int:
        return US // self.rate_pps


@dataclass
class ClientAction:
    time_us: int
    kind: str  # join | leave
    group: GroupAddr


@dataclass
class ClientScript:
    name: str
    cnap: int
    port: int
    actions: list = field(default_factory=list)


@dataclass
class Fault:
    time_us: int
    link: int
    kind: str  # down | up


@dataclass
class Scenario:
    name: str = "scenario"
    nodes: list = field(default_factory=list)
    cables: list = field(default_factory=list)
    snaps: list = field(default_factory=list)
    cnaps: list = field(default_factory=list)
    streams: list = field(default_factory=list)
    clients: list = field(default_factory=list)
    faults: list = field(default_factory=list)
    params: Params = field(default_factory=Params)

    def group_ids(self) -> dict[tuple[str, int, int], int]:
        labels = sorted({c.failover_group for c in self.cables if c.failover_group is not None})
        ids = {}
        for j, label in enumerate(labels):
            ends = next((c.a, c.b) for c in self.cables if c.failover_group == label)
            lo, hi = sorted(ends)
            ids[(label, lo, hi)] = 2 * j
            ids[(label, hi, lo)] = 2 * j + 1
        return ids

    def build_topology(self) -> Topology:
        topo = Topology()
        for n in self.nodes:
            topo.add_node(n.id, n.kind, n.name)
        gids = self.group_ids()
        for c in self.cables:
            groups = (None, None)
            if c.failover_group is not None:
                groups = (gids.get((c.failover_group, c.a, c.b), -1), gids.get((c.failover_group, c.b, c.a), -1))
            topo.add_cable(c.links[0], c.a, c.b, c.delay_us, groups)
        topo.version = 0
        return topo

    def snap_for(self, group: GroupAddr) -> Optional[int]:
        for s in self.snaps:
            if group in s.groups:
                return s.node
        return None

    def stream_stop(self, stream: Stream) -> int:
        return self.params.duration_us if stream.stop_us is None else stream.stop_us

    def with_seed(self, seed: int) -> "Scenario":
        return dataclasses.replace(self, params=dataclasses.replace(self.params, seed=seed))

    def with_params(self, **changes) -> "Scenario":
        return dataclasses.replace(self, params=dataclasses.replace(self.params, **changes))


def validate_scenario(sc: Scenario) -> None:
    errs = []
    node_ids = [n.id for n in sc.nodes]
    if len(set(node_ids)) != len(node_ids):
        errs.append("duplicate node ids")
    kinds = {n.id: n.kind for n in sc.nodes}
    cable_ids = [c.id for c in sc.cables]
    if len(set(cable_ids)) != len(cable_ids):
        errs.append("duplicate cable ids")
    for c in sc.cables:
        for end in (c.a, c.b):
            if end not in kinds:
                errs.append(f"cable {c.id}: unknown node {end}")
    by_label: dict = {}
    for c in sc.cables:
        if c.failover_group is not None:
            by_label.setdefault(c.failover_group, set()).add(frozenset((c.a, c.b)))
    for label, ends in sorted(by_label.items()):
        if len(ends) > 1:
            errs.append(f"failover group {label!r}: cables join different node pairs")
    if not errs:
        errs.extend(str(v) for v in validate_topology(sc.build_topology()))
    p = sc.params
    if p.duration_us <= 0:
        errs.append("params.duration must be positive")
    if isinstance(p.t_conv, str) and p.t_conv not in T_CONV_PRESETS_US:
        errs.append(f"params.t_conv: unknown preset {p.t_conv!r}")
    if not 1 <= p.k <= p.m:
        errs.append("params: need 1 <= k <= m")
    served: dict = {}
    for s in sc.snaps:
        if kinds.get(s.node) is not NodeKind.SNAP:
            errs.append(f"snap config: node {s.node} is not a snap")
        for g in s.groups:
            if g in served:
                errs.append(f"group {g} configured at snaps {served[g]} and {s.node}")
            served[g] = s.node
    try:
        check_digest_collisions(served)
    except InvalidGroup as exc:
        errs.append(str(exc))
    ports = {}
    for c in sc.cnaps:
        if kinds.get(c.node) is not NodeKind.CNAP:
            errs.append(f"cnap config: node {c.node} is not a cnap")
        ports[c.node] = set(c.ports)
    for st in sc.streams:
        if st.group not in served:
            errs.append(f"stream group {st.group} is not configured at any snap")
        if st.rate_pps <= 0:
            errs.append(f"stream {st.group}: rate must be positive")
        if st.stop_us is not None and st.stop_us <= st.start_us:
            errs.append(f"stream {st.group}: stop before start")
    names = set()
    for cl in sc.clients:
        if cl.name in names:
            errs.append(f"duplicate client name {cl.name!r}")
        names.add(cl.name)
        if cl.cnap not in ports:
            errs.append(f"client {cl.name}: node {cl.cnap} has no cnap config")
        elif cl.port not in ports[cl.cnap]:
            errs.append(f"client {cl.name}: cnap {cl.cnap} has no port {cl.port}")
        last = -1
        for a in cl.actions:
            if a.time_us < last:
                errs.append(f"client {cl.name}: actions not time-ordered")
            last = a.time_us
            if a.time_us > p.duration_us:
                errs.append(f"client {cl.name}: action at {to_s(a.time_us)} s beyond duration")
    link_ids = {l for c in sc.cables for l in c.links}
    for f in sc.faults:
        if f.link not in link_ids:
            errs.append(f"fault: unknown link {f.link}")
        if f.kind not in ("down", "up"):
            errs.append(f"fault: unknown kind {f.kind!r}")
        if f.time_us > p.duration_us:
            errs.append(f"fault at {to_s(f.time_us)} s beyond duration")
    if errs:
        raise ValidationError("; ".join(errs))


def _get(d, key, where, default=...):
    if not isinstance(d, dict):
        raise ValidationError(f"{where}: expected a mapping")
    if key not in d:
        if default is ...:
            raise ValidationError(f"{where}: missing {key!r}")
        return default
    return d[key]


def _group(value, where):
    try:
        return group_addr(str(value))
    except InvalidGroup as exc:
        raise ValidationError(f"{where}: {exc}") from None


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ValidationError("scenario file must be a mapping")
    params = Params()
    for key, value in (doc.get("params") or {}).items():
        if key not in _PARAM_KEYS:
            raise ValidationError(f"params: unknown key {key!r}")
        attr, conv, _ = _PARAM_KEYS[key]
        if conv is None:
            value = value if isinstance(value, str) else float(value)
        else:
            value = conv(value)
        setattr(params, attr, value)
    sc = Scenario(name=str(doc.get("name", "scenario")), params=params)
    for i, n in enumerate(doc.get("nodes") or []):
        where = f"nodes[{i}]"
        try:
            kind = NodeKind(_get(n, "kind", where))
        except ValueError:
            raise ValidationError(f"{where}: unknown kind {n.get('kind')!r}") from None
        sc.nodes.append(NodeSpec(int(_get(n, "id", where)), kind, str(n.get("name", ""))))
    for i, c in enumerate(doc.get("cables") or []):
        where = f"cables[{i}]"
        label = c.get("failover_group") if isinstance(c, dict) else None
        sc.cables.append(CableSpec(int(_get(c, "id", where, i)), int(_get(c, "a", where)),
                                   int(_get(c, "b", where)), to_us(_get(c, "delay", where, 0.0001)),
                                   None if label is None else str(label)))
    naps = doc.get("naps") or {}
    for i, s in enumerate(naps.get("snaps") or []):
        where = f"naps.snaps[{i}]"
        groups = [_group(g, where) for g in _get(s, "groups", where)]
        sc.snaps.append(SnapConfig(int(_get(s, "node", where)), groups))
    for i, c in enumerate(naps.get("cnaps") or []):
        where = f"naps.cnaps[{i}]"
        sc.cnaps.append(CnapConfig(int(_get(c, "node", where)), [int(p) for p in _get(c, "ports", where)]))
    for i, s in enumerate(doc.get("streams") or []):
        where = f"streams[{i}]"
        stop = s.get("stop") if isinstance(s, dict) else None
        sc.streams.append(Stream(_group(_get(s, "group", where), where), int(_get(s, "rate", where)),
                                 int(_get(s, "payload", where, 1316)), to_us(_get(s, "start", where, 0)),
                                 None if stop is None else to_us(stop)))
    for i, c in enumerate(doc.get("clients") or []):
        where = f"clients[{i}]"
        script = ClientScript(str(_get(c, "name", where)), int(_get(c, "cnap", where)), int(_get(c, "port", where)))
        for j, a in enumerate(_get(c, "actions", where, [])):
            aw = f"{where}.actions[{j}]"
            t = to_us(_get(a, "at", aw))
            if "join" in a:
                script.actions.append(ClientAction(t, "join", _group(a["join"], aw)))
            elif "leave" in a:
                script.actions.append(ClientAction(t, "leave", _group(a["leave"], aw)))
            elif "switch" in a:
                old, new = a["switch"]
                script.actions.append(ClientAction(t, "leave", _group(old, aw)))
                script.actions.append(ClientAction(t, "join", _group(new, aw)))
            else:
                raise ValidationError(f"{aw}: expected join, leave or switch")
        sc.clients.append(script)
    for i, f in enumerate(doc.get("faults") or []):
        where = f"faults[{i}]"
        sc.faults.append(Fault(to_us(_get(f, "at", where)), int(_get(f, "link", where)), str(_get(f, "kind", where))))
    validate_scenario(sc)
    return sc


def scenario_to_dict(sc: Scenario) -> dict:
    params = {}
    default = Params()
    for key, (attr, _, back) in _PARAM_KEYS.items():
        value = getattr(sc.params, attr)
        if value != getattr(default, attr) or key == "duration":
            params[key] = value if back is None else back(value)
    doc = {"name": sc.name, "params": params}
    doc["nodes"] = [{"id": n.id, "kind": n.kind.value, "name": n.name} for n in sc.nodes]
    cables = []
    for c in sc.cables:
        d = {"id": c.id, "a": c.a, "b": c.b, "delay": to_s(c.delay_us)}
        if c.failover_group is not None:
            d["failover_group"] = c.failover_group
        cables.append(d)
    doc["cables"] = cables
    doc["naps"] = {
        "snaps": [{"node": s.node, "groups": [str(g) for g in s.groups]} for s in sc.snaps],
        "cnaps": [{"node": c.node, "ports": list(c.ports)} for c in sc.cnaps],
    }
    streams = []
    for s in sc.streams:
        d = {"group": str(s.group), "rate": s.rate_pps, "payload": s.payload, "start": to_s(s.start_us)}
        if s.stop_us is not None:
            d["stop"] = to_s(s.stop_us)
        streams.append(d)
    doc["streams"] = streams
    doc["clients"] = [
        {"name": c.name, "cnap": c.cnap, "port": c.port,
         "actions": [{"at": to_s(a.time_us), a.kind: str(a.group)} for a in c.actions]}
        for c in sc.clients
    ]
    doc["faults"] = [{"at": to_s(f.time_us), "link": f.link, "kind": f.kind} for f in sc.faults]
    return doc


def parse_scenario(text: str) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ParseError(str(exc.problem or exc), mark.line + 1 if mark else None,
                         mark.column + 1 if mark else None) from None
    except yaml.YAMLError as exc:
        raise ParseError(str(exc)) from None
    return scenario_from_dict(doc)


def bundled_scenarios() -> list[str]:
    root = resources.files("pointsim") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Load a scenario file; a bare bundled name such as ``trial`` also works."""
    p = Path(path)
    if not p.exists() and str(path) in bundled_scenarios():
        text = (resources.files("pointsim") / "scenarios" / f"{path}.yaml").read_text()
    else:
        try:
            text = p.read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read scenario {path}: {exc.strerror}") from None
    return parse_scenario(text)


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False)
