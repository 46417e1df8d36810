"""Synthetic workloads: streams of per-slice event deltas.

Trace files are line oriented::

    # comment
    cycles=100 instret=60 0x05:7 0x11:3

``cycles`` and ``instret`` feed the base counters; every ``<hexcode>:<n>``
pair says event ``hexcode`` fired ``n`` times during the slice.
"""

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError

DEFAULT_ISSUE_BOUND = 8

# event codes of the shipped CVA6 catalog (code == counter index)
CVA6_CODES = {
    "l1_icache_miss": 0x3,
    "l1_dcache_miss": 0x4,
    "itlb_miss": 0x5,
    "dtlb_miss": 0x6,
    "load": 0x7,
    "store": 0x8,
    "exception": 0x9,
    "exception_ret": 0xA,
    "branch_jump": 0xB,
    "call": 0xC,
    "ret": 0xD,
    "mis_predict": 0xE,
    "sb_full": 0xF,
    "if_empty": 0x10,
}

# CoreMark 1.0 on CVA6 at 100 MHz, as reported by perf stat
COREMARK_CVA6_TOTALS = {
    "cycles": 2_368_685_119,
    "instret": 1_467_339_227,
    "branch_jump": 236_011_286,
    "call": 5_312_578,
    "mis_predict": 44_038_701,
    "ret": 1_406_812,
    "dtlb_miss": 1_118,
    "itlb_miss": 6_869_722,
    "l1_dcache_miss": 2_786_559,
    "l1_icache_miss": 8_443_755,
    "load": 229_104_327,
    "store": 64_628_214,
    "exception": 22_486,
    "exception_ret": 22_486,
    "if_empty": 239_773_306,
    "sb_full": 9_094_173,
}


@dataclass(frozen=True)
class TraceSlice:
    cycles: int
    instructions: int = 0
    deltas: dict = field(default_factory=dict)

    def validate(self, issue_bound=DEFAULT_ISSUE_BOUND):
        if self.cycles < 1:
            raise ValueError(f"slice must span at least one cycle, got {self.cycles}")
        if self.instructions < 0:
            raise ValueError("instruction count must be non-negative")
        if self.instructions > self.cycles * issue_bound:
            raise ValueError(
                f"{self.instructions} instructions in {self.cycles} cycles "
                f"exceeds issue bound {issue_bound}")
        for code, n in self.deltas.items():
            if code < 0 or n < 0:
                raise ValueError(f"negative event code or delta: {code:#x}:{n}")
        return self


def parse_line(line, issue_bound=DEFAULT_ISSUE_BOUND, source=None, lineno=None):
    """Parse one trace line; returns None for blank and comment lines."""
    text = line.split("#", 1)[0].strip()
    if not text:
        return None
    cycles = None
    instret = 0
    deltas = {}
    for token in text.split():
        try:
            if token.startswith("cycles="):
                cycles = int(token[7:], 0)
            elif token.startswith("instret="):
                instret = int(token[8:], 0)
            elif ":" in token:
                code_s, n_s = token.split(":", 1)
                code = int(code_s, 16)
                n = int(n_s, 0)
                if n < 0:
                    raise ParseError(f"negative delta in {token!r}", source, lineno)
                deltas[code] = deltas.get(code, 0) + n
            else:
                raise ParseError(f"unrecognised token {token!r}", source, lineno)
        except ValueError:
            raise ParseError(f"bad number in {token!r}", source, lineno) from None
    if cycles is None:
        raise ParseError("missing cycles=<n>", source, lineno)
    try:
        return TraceSlice(cycles, instret, deltas).validate(issue_bound)
    except ValueError as exc:
        raise ParseError(str(exc), source, lineno) from None


def iter_trace(lines, issue_bound=DEFAULT_ISSUE_BOUND, source=None):
    for lineno, line in enumerate(lines, 1):
        sl = parse_line(line, issue_bound, source, lineno)
        if sl is not None:
            yield sl


def load_trace(path, issue_bound=DEFAULT_ISSUE_BOUND):
    """Stream slices from a trace file, preserving order."""
    path = Path(path)
    with path.open() as fh:
        yield from iter_trace(fh, issue_bound, source=str(path))


def format_slice(sl):
    parts = [f"cycles={sl.cycles}", f"instret={sl.instructions}"]
    parts += [f"{code:#x}:{n}" for code, n in sorted(sl.deltas.items())]
    return " ".join(parts)


def _split(total, parts):
    base, rem = divmod(total, parts)
    return [base] * (parts - 1) + [base + rem]


def split_totals(cycles, instructions, deltas, slices):
    """Divide totals evenly over ``slices`` slices, remainders in the last one."""
    if slices < 1:
        raise ValueError("slices must be >= 1")
    cyc = _split(cycles, slices)
    ins = _split(instructions, slices)
    per_code = {code: _split(n, slices) for code, n in deltas.items()}
    return [
        TraceSlice(cyc[i], ins[i], {code: per_code[code][i] for code in per_code})
        for i in range(slices)
    ]


def coremark_cva6_trace(slices=1):
    """The CoreMark/CVA6 workload, its totals matching the published run exactly."""
    totals = COREMARK_CVA6_TOTALS
    deltas = {CVA6_CODES[name]: n for name, n in totals.items() if name in CVA6_CODES}
    return split_totals(totals["cycles"], totals["instret"], deltas, slices)


def uniform_trace(total_cycles, slice_cycles, rates, ipc=0.5):
    """A constant-rate trace: ``rates`` maps event code to events per cycle."""
    out = []
    done = 0
    while done < total_cycles:
        c = min(slice_cycles, total_cycles - done)
        out.append(TraceSlice(c, int(c * ipc), {code: int(r * c) for code, r in rates.items()}))
        done += c
    return out


BUILTIN_TRACES = {"coremark-cva6": coremark_cva6_trace}
