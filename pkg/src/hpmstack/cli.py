"""``hpmstack``: list, stat, metrics and sbi subcommands."""

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import catalog as cat
from .driver import DEFAULT_MUX_QUANTUM, PerfDriver, replay
from .errors import HpmError, UnknownEvent
from .metrics import compute_metrics, round_half_up
from .platform import builtin_platform, load_platform
from .pmu import PmuState
from .sbi import EXT_HPM, FUNCTIONS, SbiCall, sbi_dispatch
from .trace import BUILTIN_TRACES, load_trace

DEFAULT_CLOCK_MHZ = 100.0
COUNT_WIDTH = 18

# generic hardware events backed by the base counters
_BASE_EVENTS = {
    "cpu-cycles": (0x0, 0xFFFF_FFFE),
    "cycles": (0x0, 0xFFFF_FFFE),
    "instructions": (0x2, 0xFFFF_FFFB),
}
_HW_ALIASES = {
    "branch-instructions": "branches",
    "cpu-cycles": "cycles",
}
SOFTWARE_EVENTS = (
    "alignment-faults", "context-switches OR cs", "cpu-clock", "cpu-migrations OR migrations",
    "emulation-faults", "major-faults", "minor-faults", "page-faults OR faults", "task-clock",
)


def _entry(name, kind):
    return f"  {name:<40} [{kind}]"


def cmd_list(platform, catalog):
    """perf-list style listing: generic events, then catalog events by group."""
    lines = []
    hw = ["cpu-cycles", "instructions"]
    hw += [name for name, _ in platform.hardware_event_map if name not in hw]
    for name in hw:
        alias = _HW_ALIASES.get(name)
        lines.append(_entry(f"{name} OR {alias}" if alias else name, "Hardware event"))
    for name in SOFTWARE_EVENTS:
        lines.append(_entry(name, "Software event"))
    for name, _ in platform.hardware_cache_event_map:
        lines.append(_entry(name, "Hardware cache event"))
    for group, events in catalog.groups().items():
        lines.append("")
        lines.append(f"{group}:")
        for ev in events:
            lines.append(f"  {ev.name.lower()}")
            lines.append(f"       [{ev.brief}]")
    return "\n".join(lines) + "\n"


def resolve_event(spec, catalog, platform):
    """Catalog name, generic perf name, or raw spec -> (display name, code, map)."""
    ev = catalog.get(spec)
    if ev is not None:
        return ev.name.lower(), ev.event_code, ev.counter_map
    key = spec.strip().lower()
    if key in _BASE_EVENTS:
        return key, *_BASE_EVENTS[key]
    generic = dict((n.lower(), c) for n, c in platform.hardware_event_map)
    generic.update((n.lower(), c) for n, c in platform.hardware_cache_event_map)
    for name, alias in _HW_ALIASES.items():
        if key == alias and name in generic:
            key = name
    if key in generic:
        code = generic[key]
        known = catalog.by_code(code)
        return key, code, known.counter_map if known else cat.DEFAULT_RAW_MASK
    code, mask = cat.resolve(None, spec)
    return spec.strip(), code, mask


@dataclass
class EventResult:
    name: str
    event_code: int = None
    counter_map: int = None
    count: int = None
    time_enabled: int = 0
    time_running: int = 0
    error: str = None

    @property
    def scaled(self):
        if self.count is None:
            return None
        if self.time_running == self.time_enabled:
            return self.count
        if not self.time_running:
            return None
            return self.count
        return round(self.count * self.time_enabled / self.time_running)

    def to_dict(self):
        return {
            "name": self.name, "event_code": self.event_code, "counter_map": self.counter_map,
            "count": self.count, "scaled": self.scaled, "time_enabled": self.time_enabled,
            "time_running": self.time_running, "error": self.error,
        }


@dataclass
class StatResult:
    workload: str
    events: list = field(default_factory=list)
    cycles: int = 0
    clock_mhz: float = DEFAULT_CLOCK_MHZ
    report: object = None

    @property
    def elapsed(self):
        return self.cycles / (self.clock_mhz * 1e6)

    @property
    def ok(self):
        return all(e.error is None for e in self.events)

    def counts(self, scaled=True):
        out = {}
        for e in self.events:
            value = e.scaled if scaled else e.count
            if value is not None:
                out[e.name] = value
        return out

    def to_dict(self):
        return {
            "workload": self.workload,
            "events": [e.to_dict() for e in self.events],
            "cycles": self.cycles,
            "clock_mhz": self.clock_mhz,
            "elapsed_s": self.elapsed,
            "metrics": self.report.to_dict() if self.report is not None else None,
        }

    def format(self, raw=False):
        lines = [f" Performance counter stats for '{self.workload}':", ""]
        for e in self.events:
            if e.error is not None:
                lines.append(f"{'<not supported>':>{COUNT_WIDTH}}  {e.name}")
                continue
            if e.scaled is None:
                lines.append(f"{'<not counted>':>{COUNT_WIDTH}}  {e.name}")
                continue
            value = e.count if raw else e.scaled
            line = f"{value:>{COUNT_WIDTH}}  {e.name}"
            if e.time_running != e.time_enabled:
                pct = round_half_up(100 * e.time_running / e.time_enabled, 2)
                line += f"  ({pct:.2f}%)"
                if raw:
                    line += f"  [enabled={e.time_enabled} running={e.time_running}]"
            lines.append(line)
        lines += [
            "",
            f"{self.elapsed:>18.9f} seconds time elapsed",
            "",
            f"{self.elapsed:>18.9f} seconds user",
            f"{0.0:>18.9f} seconds sys",
        ]
        if self.report is not None:
            lines += ["", " Metrics:", self.report.format()]
        return "\n".join(lines) + "\n"


def cmd_stat(specs, trace, platform, catalog, workload="workload",
             clock_mhz=DEFAULT_CLOCK_MHZ, mux_quantum=DEFAULT_MUX_QUANTUM, metrics=False):
    """Open and enable every event, replay ``trace``, then read and close them."""
    state = PmuState(platform)
    driver = PerfDriver(state, mux_quantum=mux_quantum)
    result = StatResult(workload, clock_mhz=clock_mhz)
    handles = []
    for spec in specs:
        try:
            name, code, mask = resolve_event(spec, catalog, platform)
        except UnknownEvent:
            result.events.append(EventResult(spec, error="unknown event"))
            handles.append(None)
            continue
        res = EventResult(name, code, mask)
        result.events.append(res)
        try:
            handles.append(driver.event_open(code, mask))
        except HpmError as exc:
            res.error = str(exc)
            handles.append(None)
    for res, h in zip(result.events, handles):
        if h is None:
            continue
        try:
            driver.event_enable(h)
        except HpmError as exc:
            res.error = str(exc)
    start = driver.now()
    replay(driver, trace, state)
    result.cycles = driver.now() - start
    for h in handles:
        if h is not None and driver.events[h].state.value in ("running", "enabled"):
            driver.event_disable(h)
    for res, h in zip(result.events, handles):
        if h is None or res.error is not None:
            continue
        res.count, res.time_enabled, res.time_running = driver.event_read(h)
        driver.event_close(h)
    if metrics:
        result.report = compute_metrics(result.counts())
        if not result.cycles:
            result.report.metrics.clear()
    return result


# argument handling -----------------------------------------------------------

def _int(text):
    return int(text, 0)


def _load_platform(arg):
    if arg is None:
        return builtin_platform("cva6")
    if Path(arg).is_file():
        return load_platform(arg)
    return builtin_platform(arg)


def _load_catalog(platform, args):
    return cat.load_catalog_for(platform, mapfile=args.mapfile, events_root=args.events_dir)


def _add_platform_args(p):
    p.add_argument("--platform", help="platform description file or builtin name (default: cva6)")
    p.add_argument("--events-dir", help="root holding the per-CPU event directories")
    p.add_argument("--mapfile", help="CPU ID mapfile (default: <events-dir>/mapfile.csv)")


def build_parser():
    parser = argparse.ArgumentParser(prog="hpmstack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="list available events")
    _add_platform_args(p)

    p = sub.add_parser("stat", help="count events over a trace")
    _add_platform_args(p)
    p.add_argument("-e", "--events", action="append", default=[],
                   help="comma separated event names or raw specs rNNNN[:mask]")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", help="trace file")
    src.add_argument("--builtin", choices=sorted(BUILTIN_TRACES), help="builtin workload")
    p.add_argument("--slices", type=int, default=1, help="slices for builtin workloads")
    p.add_argument("--metrics", action="store_true", help="print derived metrics")
    p.add_argument("--json", action="store_true", help="machine readable output")
    p.add_argument("--raw", action="store_true", help="report unscaled counts")
    p.add_argument("--clock-mhz", type=float, default=DEFAULT_CLOCK_MHZ)
    p.add_argument("--mux-quantum", type=int, default=DEFAULT_MUX_QUANTUM)

    p = sub.add_parser("metrics", help="compute metrics from a `stat --json` dump")
    p.add_argument("file", nargs="?", help="JSON file (default: stdin)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("sbi", help="issue HPM SBI calls against a freshly reset hart")
    p.add_argument("--platform", help="platform description file or builtin name (default: cva6)")
    p.add_argument("--ext", type=_int, default=EXT_HPM, help="extension id")
    p.add_argument("calls", nargs="+", metavar="fn args",
                   help="function name followed by its arguments; several calls may follow")
    return parser


class UsageError(Exception):
    pass


def _is_int(tok):
    try:
        _int(tok)
    except ValueError:
        return False
    return True


def _split_calls(tokens):
    calls = []
    for tok in tokens:
        if calls and _is_int(tok):
            calls[-1][1].append(tok)
        else:
            calls.append([tok, []])
    return calls


def _run_sbi(args, out):
    platform = _load_platform(args.platform)
    state = PmuState(platform)
    for name, raw_args in _split_calls(args.calls):
        if name in FUNCTIONS:
            fid = int(FUNCTIONS[name])
        else:
            try:
                fid = _int(name)
            except ValueError:
                raise UsageError(f"unknown SBI function {name!r}") from None
        values = [_int(a) for a in raw_args]
        ret = sbi_dispatch(SbiCall(args.ext, fid, tuple(values)), state)
        print(ret, file=out)
    return 0


def _run_stat(args, out):
    platform = _load_platform(args.platform)
    catalog = _load_catalog(platform, args)
    specs = [s.strip() for chunk in args.events for s in chunk.split(",") if s.strip()]
    if not specs:
        specs = [ev.name.lower() for events in catalog.groups().values() for ev in events]
    if args.builtin:
        trace = BUILTIN_TRACES[args.builtin](args.slices)
        workload = args.builtin
    else:
        trace = load_trace(args.trace)
        workload = args.trace
    result = cmd_stat(specs, trace, platform, catalog, workload=workload,
                      clock_mhz=args.clock_mhz, mux_quantum=args.mux_quantum,
                      metrics=args.metrics)
    if args.json:
        json.dump(result.to_dict(), out, indent=2)
        out.write("\n")
    else:
        out.write(result.format(raw=args.raw))
    return 0 if result.ok else 1


def _run_metrics(args, out):
    text = Path(args.file).read_text() if args.file else sys.stdin.read()
    data = json.loads(text)
    if isinstance(data, dict) and "events" in data:
        counts = {e["name"]: e["scaled"] for e in data["events"] if e.get("scaled") is not None}
    else:
        counts = data
    report = compute_metrics(counts)
    if args.json:
        json.dump(report.to_dict(), out, indent=2)
        out.write("\n")
    else:
        out.write(report.format() + "\n")
    return 0


def main(argv=None, out=None):
    out = out if out is not None else sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            platform = _load_platform(args.platform)
            out.write(cmd_list(platform, _load_catalog(platform, args)))
            return 0
        if args.command == "stat":
            return _run_stat(args, out)
        if args.command == "metrics":
            return _run_metrics(args, out)
        return _run_sbi(args, out)
    except UsageError as exc:
        parser.error(str(exc))
    except (HpmError, OSError, ValueError) as exc:
        print(f"hpmstack: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
