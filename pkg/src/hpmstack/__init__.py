"""Executable model of a RISC-V hardware performance monitoring stack.

Layers, bottom up: an emulated HPM register file (:mod:`hpmstack.pmu`), the
HPM SBI extension (:mod:`hpmstack.sbi`), a perf-style kernel driver
(:mod:`hpmstack.driver`), the event catalog (:mod:`hpmstack.catalog`) and the
``hpmstack`` command line tool (:mod:`hpmstack.cli`).
"""

from .catalog import (
    Catalog, EventDescriptor, MapfileEntry, decode_raw, derive_cpu_id, encode_raw,
    load_catalog_for, load_event_dir, parse_mapfile, resolve,
)
from .driver import EventState, PerfDriver, PerfEvent, allocate_counter, replay
from .metrics import MetricReport, compute_metrics
from .platform import PlatformDescription, builtin_platform, load_platform, parse_platform
from .pmu import PmuState, Privilege
from .sbi import EXT_HPM, Fn, HpmSbi, SbiCall, SbiRet, read_counter64_rv32, sbi_dispatch
from .trace import TraceSlice, coremark_cva6_trace, load_trace

__version__ = "0.1.0"
