"""Platform descriptions: the static PMU capabilities of one emulated hart.

A description is a YAML document whose keys mirror :class:`PlatformDescription`::

    name: CVA6
    xlen: 64
    base_counter_width: 64
    event_counter_width: 64
    num_event_counters: 14
    marchid: 0x3
    mimpid: 0x0
    fixed_bindings:            # optional, (event code, counter index) pairs
      - {event: 0x3, counter: 3}
    hardware_event_map:        # generic perf name -> raw event code
      branch-misses: 0xE
    hardware_cache_event_map:
      L1-dcache-load-misses: 0x4

Optional booleans ``has_mcounteren``, ``has_scounteren`` and
``has_mcountinhibit`` (default true) describe harts that omit those CSRs.
"""

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .errors import ParseError, ValidationError

FIRST_HPM = 3
LAST_HPM = 31
MAX_EVENT_COUNTERS = LAST_HPM - FIRST_HPM + 1

# counter indices of the three base counters
CYCLE, TIME, INSTRET = 0, 1, 2

_KNOWN_KEYS = {
    "name", "xlen", "base_counter_width", "event_counter_width",
    "num_event_counters", "marchid", "mimpid", "fixed_bindings",
    "hardware_event_map", "hardware_cache_event_map",
    "has_mcounteren", "has_scounteren", "has_mcountinhibit",
}


@dataclass(frozen=True)
class PlatformDescription:
    xlen: int
    base_counter_width: int
    event_counter_width: int
    num_event_counters: int
    marchid: int = 0
    mimpid: int = 0
    fixed_bindings: tuple = ()
    hardware_event_map: tuple = ()
    hardware_cache_event_map: tuple = ()
    name: str = "unnamed"
    has_mcounteren: bool = True
    has_scounteren: bool = True
    has_mcountinhibit: bool = True
    _bound: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.validate()
        object.__setattr__(self, "_bound", {idx: code for code, idx in self.fixed_bindings})

    def validate(self):
        if self.xlen not in (32, 64):
            raise ValidationError("xlen", f"must be 32 or 64, got {self.xlen}")
        if not 1 <= self.base_counter_width <= 64:
            raise ValidationError(
                "base_counter_width", f"must be within 1..64, got {self.base_counter_width}")
        if not 0 <= self.event_counter_width <= 64:
            raise ValidationError(
                "event_counter_width", f"must be within 0..64, got {self.event_counter_width}")
        if not 0 <= self.num_event_counters <= MAX_EVENT_COUNTERS:
            raise ValidationError(
                "num_event_counters",
                f"num_event_counters + 3 must fit 32 counters, got {self.num_event_counters}")
        for key in ("marchid", "mimpid"):
            value = getattr(self, key)
            if not 0 <= value < 1 << 64:
                raise ValidationError(key, f"must be an unsigned 64-bit value, got {value:#x}")
        seen = set()
        for code, idx in self.fixed_bindings:
            if not self.is_hpm_implemented(idx):
                raise ValidationError(
                    "fixed_bindings",
                    f"counter {idx} is not implemented "
                    f"(implemented: 3..{FIRST_HPM + self.num_event_counters - 1})")
            if idx in seen:
                raise ValidationError("fixed_bindings", f"counter {idx} bound twice")
            seen.add(idx)
            if not 0 <= code < 1 << self.xlen:
                raise ValidationError("fixed_bindings", f"event code {code:#x} exceeds xlen")
        for attr in ("hardware_event_map", "hardware_cache_event_map"):
            for name, code in getattr(self, attr):
                if not 0 <= code < 1 << self.xlen:
                    raise ValidationError(attr, f"{name}: event code {code:#x} exceeds xlen")

    def is_hpm_implemented(self, idx):
        return FIRST_HPM <= idx < FIRST_HPM + self.num_event_counters

    def is_counter_implemented(self, idx):
        return 0 <= idx < FIRST_HPM or self.is_hpm_implemented(idx)

    @property
    def hpm_indices(self):
        return range(FIRST_HPM, FIRST_HPM + self.num_event_counters)

    @property
    def implemented_mask(self):
        """Bitmask of every implemented counter (base counters included)."""
        return (1 << (FIRST_HPM + self.num_event_counters)) - 1

    @property
    def hpm_mask(self):
        return self.implemented_mask & ~0b111

    def counter_width(self, idx):
        return self.base_counter_width if idx < FIRST_HPM else self.event_counter_width

    def bound_event(self, idx):
        """Event code hardwired to counter ``idx``, or None."""
        return self._bound.get(idx)

    @property
    def has_fixed_bindings(self):
        return bool(self.fixed_bindings)


def _pairs(value, key):
    if value is None:
        return ()
    if isinstance(value, dict):
        items = value.items()
    elif isinstance(value, list):
        items = []
        for entry in value:
            if isinstance(entry, dict) and len(entry) == 1:
                items.extend(entry.items())
            elif isinstance(entry, (list, tuple)) and len(entry) == 2:
                items.append(tuple(entry))
            else:
                raise ParseError(f"{key}: bad entry {entry!r}")
    else:
        raise ParseError(f"{key}: expected a mapping or list of pairs")
    return tuple((str(name), _int(code, key)) for name, code in items)


def _int(value, key):
    if isinstance(value, bool):
        raise ParseError(f"{key}: expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value, 0)
        except ValueError:
            pass
    raise ParseError(f"{key}: expected an integer, got {value!r}")


def _bindings(value):
    if value is None:
        return ()
    if not isinstance(value, list):
        raise ParseError("fixed_bindings: expected a list")
    out = []
    for entry in value:
        if isinstance(entry, dict):
            try:
                out.append((_int(entry["event"], "fixed_bindings.event"),
                            _int(entry["counter"], "fixed_bindings.counter")))
            except KeyError as exc:
                raise ParseError(f"fixed_bindings: missing key {exc}") from None
        elif isinstance(entry, (list, tuple)) and len(entry) == 2:
            out.append((_int(entry[0], "fixed_bindings"), _int(entry[1], "fixed_bindings")))
        else:
            raise ParseError(f"fixed_bindings: bad entry {entry!r}")
    return tuple(out)


def parse_platform(document, source=None):
    """Parse and validate a platform description from YAML text."""
    try:
        data = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        line = getattr(getattr(exc, "problem_mark", None), "line", None)
        raise ParseError(str(exc), source, None if line is None else line + 1) from None
    if not isinstance(data, dict):
        raise ParseError("platform description must be a mapping", source)
    unknown = set(data) - _KNOWN_KEYS
    if unknown:
        raise ParseError(f"unknown keys: {', '.join(sorted(unknown))}", source)
    required = ("xlen", "base_counter_width", "event_counter_width", "num_event_counters")
    missing = [k for k in required if k not in data]
    if missing:
        raise ParseError(f"missing keys: {', '.join(missing)}", source)
    try:
        kwargs = {k: _int(data[k], k) for k in required}
        kwargs["marchid"] = _int(data.get("marchid", 0), "marchid")
        kwargs["mimpid"] = _int(data.get("mimpid", 0), "mimpid")
        kwargs["fixed_bindings"] = _bindings(data.get("fixed_bindings"))
        kwargs["hardware_event_map"] = _pairs(data.get("hardware_event_map"), "hardware_event_map")
        kwargs["hardware_cache_event_map"] = _pairs(
            data.get("hardware_cache_event_map"), "hardware_cache_event_map")
    except ParseError as exc:
        raise ParseError(str(exc), source) from None
    for flag in ("has_mcounteren", "has_scounteren", "has_mcountinhibit"):
        if flag in data:
            if not isinstance(data[flag], bool):
                raise ParseError(f"{flag}: expected a boolean", source)
            kwargs[flag] = data[flag]
    kwargs["name"] = str(data.get("name", source or "unnamed"))
    return PlatformDescription(**kwargs)


def load_platform(path):
    path = Path(path)
    return parse_platform(path.read_text(), source=str(path))


def builtin_platform(name):
    """Load one of the shipped descriptions (``cva6``, ``spike``)."""
    ref = resources.files("hpmstack") / "data" / "platforms" / f"{name.lower()}.yaml"
    if not ref.is_file():
        raise FileNotFoundError(f"no builtin platform named {name!r}")
    return parse_platform(ref.read_text(), source=f"builtin:{name}")
