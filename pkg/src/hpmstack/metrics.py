"""Derived metrics over counted events (miss rates, stall fractions, IPC)."""

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal


@dataclass(frozen=True)
class MetricDef:
    key: str
    label: str
    numerator: tuple
    denominator: tuple
    percent: bool = True


METRICS = (
    MetricDef("branch_missrate", "Branch MissRate", ("mis_predict",), ("branch_jump", "call", "ret")),
    MetricDef("l1d_missrate", "L1D MissRate", ("l1_dcache_miss",), ("load", "store")),
    MetricDef("l1i_missrate", "L1I MissRate", ("l1_icache_miss",), ("instret",)),
    MetricDef("sb_full_frac", "ScoreBoard Full (cycles)", ("sb_full",), ("cycles",)),
    MetricDef("if_empty_frac", "Instruction Fetch Empty (cycles)", ("if_empty",), ("cycles",)),
    MetricDef("ipc", "Instructions Per Cycle", ("instret",), ("cycles",), percent=False),
    MetricDef("dtlb_missrate", "Translation MissRate (Data)", ("dtlb_miss",), ("load", "store")),
    MetricDef("itlb_missrate", "Translation MissRate (Instructions)", ("itlb_miss",), ("instret",)),
)

_PREFIXES = ("ariane_", "riscv_")


def short_name(name):
    """``ARIANE_L1_DCACHE_MISS`` -> ``l1_dcache_miss``; generic aliases folded."""
    n = name.lower().replace("-", "_")
    for prefix in _PREFIXES:
        if n.startswith(prefix):
            n = n[len(prefix):]
            break
    return {"cpu_cycles": "cycles", "instructions": "instret"}.get(n, n)


def round_half_up(value, places):
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class Metric:
    definition: MetricDef
    value: float

    @property
    def display(self):
        if self.definition.percent:
            return f"{round_half_up(self.value * 100, 2):.2f}%"
        return f"{round_half_up(self.value, 4):.4f}"


@dataclass
class MetricReport:
    metrics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __getattr__(self, key):
        metrics = self.__dict__.get("metrics", {})
        if key in metrics:
            return metrics[key].value
        raise AttributeError(key)

    def to_dict(self):
        return {
            "metrics": {
                k: {"value": m.value, "display": m.display, "label": m.definition.label,
                    "numerator": list(m.definition.numerator),
                    "denominator": list(m.definition.denominator)}
                for k, m in self.metrics.items()
            },
            "notes": list(self.notes),
        }

    def format(self):
        if not self.metrics:
            return "\n".join(f"  note: {n}" for n in self.notes)
        width = max(len(m.definition.label) for m in self.metrics.values())
        lines = []
        for m in self.metrics.values():
            d = m.definition
            events = " / ".join((", ".join(d.numerator), ", ".join(d.denominator)))
            lines.append(f"  {d.label:<{width}}  {m.display:>8}  {events}")
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


def compute_metrics(counts):
    """Build a :class:`MetricReport` from ``{event name: count}``.

    Names may carry the ``ariane_``/``riscv_`` prefixes. A metric whose events
    are missing, or whose denominator sums to zero, is left out with a note.
    """
    table = {}
    for name, value in counts.items():
        table[short_name(name)] = value
    report = MetricReport()
    for d in METRICS:
        missing = [e for e in d.numerator + d.denominator if e not in table]
        if missing:
            report.notes.append(f"{d.key}: missing {', '.join(missing)}")
            continue
        den = sum(table[e] for e in d.denominator)
        if den == 0:
            report.notes.append(f"{d.key}: zero denominator")
            continue
        num = sum(table[e] for e in d.numerator)
        report.metrics[d.key] = Metric(d, num / den)
    return report
