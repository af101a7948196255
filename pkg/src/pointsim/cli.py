"""Command line: run a scenario on one backend, or compare both."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .errors import InvalidScenario
from .sim import BACKENDS, Metrics, run
from .scenario import load_scenario

CLIENT_COLUMNS = ["client", "group", "episodes", "received", "duplicates",
                  "first_arrival_us", "last_arrival_us", "outages", "outage_us"]
OUTAGE_COLUMNS = ["client", "group", "start_us", "duration_us"]
LINK_COLUMNS = ["time_bucket_us", "link_id", "bytes"]


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else v for v in row])


def summary(metrics: Metrics) -> dict:
    rows = metrics.rows()
    outages = metrics.outage_rows()
    return {
        "scenario": metrics.scenario,
        "backend": metrics.backend,
        "totals": {
            "received": sum(r.received for r in rows),
            "duplicates": sum(r.duplicates for r in rows),
            "outages": len(outages),
            "outage_us": sum(o[3] for o in outages),
            "link_bytes": sum(metrics.link_bytes.values()),
            "pce_interactions": len(metrics.pce_log),
        },
        "emitted": dict(sorted(metrics.emitted.items())),
        "counters": dict(sorted(metrics.counters.items())),
        "cnap_groups": [
            {"cnap": cnap, "group": group, **dict(sorted(c.items()))}
            for (cnap, group), c in sorted(metrics.nap_groups.items())
        ],
        "outages": [dict(zip(OUTAGE_COLUMNS, o)) for o in outages],
    }


def emit_metrics(metrics: Metrics, out_dir, formats=("csv", "json-summary")) -> list[Path]:
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "csv" in formats:
            _write_csv(out / "clients.csv", CLIENT_COLUMNS,
                       [[getattr(r, c) for c in CLIENT_COLUMNS] for r in metrics.rows()])
            _write_csv(out / "outages.csv", OUTAGE_COLUMNS, metrics.outage_rows())
            _write_csv(out / "links.csv", LINK_COLUMNS,
                       [(t, l, b) for (t, l), b in sorted(metrics.link_bytes.items())])
            written += [out / "clients.csv", out / "outages.csv", out / "links.csv"]
        if "json-summary" in formats:
            (out / "summary.json").write_text(json.dumps(summary(metrics), indent=2) + "\n")
            written.append(out / "summary.json")
    except OSError as exc:
        raise IOError(f"cannot write metrics to {out}: {exc.strerror}") from exc
    return written


def comparison_rows(ip: Metrics, point: Metrics) -> list[dict]:
    rows = []
    keys = sorted({(r.client, r.group) for r in ip.rows()} | {(r.client, r.group) for r in point.rows()})
    for client, group in keys:
        a = ip.outages_for(client, group)
        b = point.outages_for(client, group)
        rows.append({
            "client": client, "group": group,
            "ip_outages": len(a), "ip_max_outage_us": max((o.duration_us for o in a), default=0),
            "point_outages": len(b), "point_max_outage_us": max((o.duration_us for o in b), default=0),
        })
    return rows


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="pointsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run one backend")
    r.add_argument("scenario", help="scenario file, or the name of a bundled scenario")
    r.add_argument("--backend", choices=BACKENDS, default="point")
    r.add_argument("--seed", type=int)
    r.add_argument("--t-conv", help="override spanning tree convergence: classic, fast or seconds")
    r.add_argument("--out", default="out")
    c = sub.add_parser("compare", help="run both backends and tabulate outages")
    c.add_argument("scenario")
    c.add_argument("--seed", type=int)
    c.add_argument("--t-conv")
    c.add_argument("--out", default="out")
    return parser


def _prepare(args):
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    if args.t_conv is not None:
        tc = args.t_conv
        sc = sc.with_params(t_conv=tc if tc in ("classic", "fast") else float(tc))
    return sc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = _prepare(args)
        if args.command == "run":
            metrics = run(sc, args.backend)
            emit_metrics(metrics, args.out)
            s = summary(metrics)["totals"]
            print(f"{sc.name} [{args.backend}]: received={s['received']} outages={s['outages']} "
                  f"outage_us={s['outage_us']} -> {args.out}")
            return 0
        ip = run(sc, "ip")
        point = run(sc, "point")
        out = Path(args.out)
        emit_metrics(ip, out / "ip")
        emit_metrics(point, out / "point")
        rows = comparison_rows(ip, point)
        header = list(rows[0]) if rows else ["client", "group", "ip_outages", "ip_max_outage_us",
                                             "point_outages", "point_max_outage_us"]
        _write_csv(out / "comparison.csv", header, [list(r.values()) for r in rows])
        print(f"{'client':<10} {'group':<16} {'ip#':>4} {'ip max (s)':>11} {'point#':>7} {'point max (s)':>14}")
        for r in rows:
            print(f"{r['client']:<10} {r['group']:<16} {r['ip_outages']:>4} {r['ip_max_outage_us'] / 1e6:>11.3f} "
                  f"{r['point_outages']:>7} {r['point_max_outage_us'] / 1e6:>14.3f}")
        return 0
    except (InvalidScenario, ValueError) as exc:
        print(f"pointsim: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"pointsim: internal error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
