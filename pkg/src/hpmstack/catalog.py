"""CPU identification, mapfile parsing and JSON event catalogs."""

import csv
import io
import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import (
    DuplicateCpuId, DuplicateEventName, EncodeOverflow, InvalidMask, ParseError,
    UnknownCpu, UnknownEvent,
)

log = logging.getLogger(__name__)

MASK32 = 0xFFFF_FFFF
# raw events without an explicit map stay off cycle/time/instret
DEFAULT_RAW_MASK = 0x0000_0007

JSON_KEYS = ("Public Description", "Brief Description", "Event Code", "Counter Mask", "Event Name")
EVENT_TYPES = {"core"}


def derive_cpu_id(marchid, mimpid):
    """Low 24 bits of marchid followed by the low 8 bits of mimpid."""
    return ((marchid & 0xFF_FFFF) << 8) | (mimpid & 0xFF)


@dataclass(frozen=True)
class MapfileEntry:
    cpu_id: int
    file_version: int
    events_dirname: str
    events_type: str


def _parse_int(text, what, source, line):
    try:
        return int(text.strip(), 0)
    except ValueError:
        raise ParseError(f"bad {what} {text.strip()!r}", source, line) from None


def parse_mapfile(text, source="mapfile"):
    entries = []
    seen = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        cells = [c.strip() for c in row]
        if not cells or not any(cells) or cells[0].startswith("#"):
            continue
        if cells[0].lower().replace(" ", "") == "cpuid":
            continue  # header
        if len(cells) != 4:
            raise ParseError(f"expected 4 columns, got {len(cells)}", source, lineno)
        cpu_id = _parse_int(cells[0], "CPU ID", source, lineno)
        if not 0 <= cpu_id <= MASK32:
            raise ParseError(f"CPU ID {cpu_id:#x} exceeds 32 bits", source, lineno)
        version = _parse_int(cells[1], "file version", source, lineno)
        dirname, etype = cells[2], cells[3]
        if not dirname:
            raise ParseError("empty events filename", source, lineno)
        if etype not in EVENT_TYPES:
            raise ParseError(f"unsupported events type {etype!r}", source, lineno)
        if cpu_id in seen:
            raise DuplicateCpuId(
                f"CPU ID {cpu_id:#x} already mapped on line {seen[cpu_id]}", source, lineno)
        seen[cpu_id] = lineno
        entries.append(MapfileEntry(cpu_id, version, dirname, etype))
    return entries


def lookup_cpu(entries, cpu_id):
    for entry in entries:
        if entry.cpu_id == cpu_id:
            return entry
    raise UnknownCpu(f"CPU ID {cpu_id:#x} not in mapfile")


@dataclass(frozen=True)
class EventDescriptor:
    name: str
    event_code: int
    counter_map: int
    brief: str = ""
    public_description: str = ""
    group: str = ""

    def usable_counters(self, platform):
        return usable_counters(self.counter_map, platform)


def usable_counters(counter_map, platform):
    """Implemented counter indices whose bit is clear in ``counter_map``."""
    return [n for n in range(32)
            if platform.is_counter_implemented(n) and not counter_map >> n & 1]


def canonical_name(name):
    return name.strip().upper().replace("-", "_")


def _hex_field(obj, key, source):
    value = obj.get(key)
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    if isinstance(value, str):
        try:
            return int(value.strip(), 16)
        except ValueError:
            pass
    raise ParseError(f"bad or missing {key!r}: {value!r}", source)


def parse_event_object(obj, group, source, platform=None):
    if not isinstance(obj, dict):
        raise ParseError("event entry must be an object", source)
    for key in obj:
        if key not in JSON_KEYS:
            log.warning("%s: ignoring unknown key %r", source, key)
    name = obj.get("Event Name")
    if not isinstance(name, str) or not name.strip():
        raise ParseError("bad or missing 'Event Name'", source)
    code = _hex_field(obj, "Event Code", source)
    mask = _hex_field(obj, "Counter Mask", source)
    if not 0 <= mask <= MASK32:
        raise ParseError(f"'Counter Mask' {mask:#x} exceeds 32 bits", source)
    if code < 0:
        raise ParseError("'Event Code' must be non-negative", source)
    name = canonical_name(name)
    if platform is None:
        if mask == MASK32:
            raise InvalidMask(f"{source}: {name}: counter mask excludes every counter")
    elif not usable_counters(mask, platform):
        raise InvalidMask(
            f"{source}: {name}: counter mask {mask:#x} excludes every implemented counter")
    return EventDescriptor(
        name=name,
        event_code=code,
        counter_map=mask,
        brief=str(obj.get("Brief Description", "")).strip(),
        public_description=" ".join(str(obj.get("Public Description", "")).split()),
        group=group,
    )


class Catalog:
    """Immutable name-indexed set of event descriptors."""

    def __init__(self, events=()):
        by_name = {}
        for ev in events:
            if ev.name in by_name:
                raise DuplicateEventName(
                    f"{ev.name} defined in both {by_name[ev.name].group} and {ev.group}")
            by_name[ev.name] = ev
        self._by_name = dict(sorted(by_name.items()))

    def __len__(self):
        return len(self._by_name)

    def __iter__(self):
        return iter(self._by_name.values())

    def __contains__(self, name):
        return canonical_name(name) in self._by_name

    def __eq__(self, other):
        return isinstance(other, Catalog) and list(self) == list(other)

    def get(self, name):
        return self._by_name.get(canonical_name(name))

    def by_code(self, code):
        for ev in self:
            if ev.event_code == code:
                return ev
        return None

    def groups(self):
        """``{group: [descriptors sorted by name]}`` with groups sorted."""
        out = {}
        for ev in self:
            out.setdefault(ev.group, []).append(ev)
        return dict(sorted(out.items()))

    def resolve(self, spec):
        return resolve(self, spec)


def load_event_dir(path, platform=None):
    """Parse every ``*.json`` file under ``path``; returns descriptors sorted by name."""
    path = Path(path)
    events = []
    for file in sorted(path.glob("*.json")):
        try:
            data = json.loads(file.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, str(file), exc.lineno) from None
        objs = data if isinstance(data, list) else [data]
        for obj in objs:
            events.append(parse_event_object(obj, file.stem, str(file), platform))
    return list(Catalog(events))


def parse_raw_spec(spec):
    """``rNNNN[:mask]`` with NNNN in hex -> (code, mask)."""
    body = spec.strip()
    if not body[:1] in ("r", "R"):
        raise ValueError(spec)
    code_s, _, mask_s = body[1:].partition(":")
    code = int(code_s, 16)
    mask = int(mask_s, 0) if mask_s else DEFAULT_RAW_MASK
    if not 0 <= mask <= MASK32 or code < 0:
        raise ValueError(spec)
    return code, mask


def resolve(catalog, spec):
    """Event name (case-insensitive) or raw ``rNNNN[:mask]`` -> (code, map)."""
    ev = catalog.get(spec) if catalog is not None else None
    if ev is not None:
        return ev.event_code, ev.counter_map
    try:
        return parse_raw_spec(spec)
    except ValueError:
        raise UnknownEvent(spec) from None


def encode_raw(event_code, counter_map):
    if not 0 <= event_code < 1 << 32:
        raise EncodeOverflow(f"event code {event_code:#x} does not fit 32 bits")
    if not 0 <= counter_map <= MASK32:
        raise EncodeOverflow(f"counter map {counter_map:#x} does not fit 32 bits")
    return (counter_map << 32) | event_code


def decode_raw(config):
    return config & MASK32, (config >> 32) & MASK32


def builtin_events_root():
    return Path(str(resources.files("hpmstack") / "data" / "events"))


def load_catalog_for(platform, mapfile=None, events_root=None):
    """Pick the event directory for ``platform``'s CPU ID and load it."""
    events_root = Path(events_root) if events_root is not None else builtin_events_root()
    mapfile = Path(mapfile) if mapfile is not None else events_root / "mapfile.csv"
    entries = parse_mapfile(mapfile.read_text(), str(mapfile))
    entry = lookup_cpu(entries, derive_cpu_id(platform.marchid, platform.mimpid))
    directory = events_root / entry.events_dirname
    if not directory.is_dir():
        return Catalog()
    return Catalog(load_event_dir(directory, platform))
