"""Emulated RISC-V HPM register file with privileged-architecture counting semantics."""

import enum
import re

from .errors import AccessFault, CsrNotImplemented
from .platform import CYCLE, FIRST_HPM, INSTRET, LAST_HPM, TIME

MASK32 = 0xFFFF_FFFF
MASK64 = (1 << 64) - 1


class Privilege(enum.IntEnum):
    USER = 0
    SUPERVISOR = 1
    MACHINE = 3


_BASE_M = {"mcycle": CYCLE, "mtime": TIME, "minstret": INSTRET}
_BASE_U = {"cycle": CYCLE, "time": TIME, "instret": INSTRET}
_COUNTER_RE = re.compile(r"^(m?)(?:hpmcounter(\d+)|(cycle|time|instret))(h?)$")
_EVENT_RE = re.compile(r"^mhpmevent(\d+)$")


def _mask(width):
    return (1 << width) - 1


class PmuState:
    """Live machine-level CSR file of one hart.

    Counters are stored at full width; ``csr_read`` exposes the XLEN-wide
    architectural view (with ``...h`` high halves on RV32).
    """

    def __init__(self, platform):
        self.platform = platform
        self.reset()

    def reset(self):
        p = self.platform
        self.counters = [0] * 32
        self.events = [0] * 32
        for idx in p.hpm_indices:
            bound = p.bound_event(idx)
            if bound is not None:
                self.events[idx] = bound
        self.mcounteren = 0
        self.scounteren = 0
        self.mcountinhibit = 0

    @property
    def marchid(self):
        return self.platform.marchid

    @property
    def mimpid(self):
        return self.platform.mimpid

    # raw accessors, no privilege checks -----------------------------------

    def counter_mask(self, idx):
        if not self.platform.is_counter_implemented(idx):
            return 0
        return _mask(self.platform.counter_width(idx))

    def counter(self, idx):
        return self.counters[idx]

    def set_counter(self, idx, value):
        if idx == TIME:
            return
        self.counters[idx] = value & self.counter_mask(idx)

    def event(self, idx):
        return self.events[idx]

    def set_event(self, idx, code):
        p = self.platform
        if not p.is_hpm_implemented(idx) or p.bound_event(idx) is not None:
            return
        self.events[idx] = code & _mask(p.xlen)

    @property
    def counteren_mask(self):
        return self.platform.implemented_mask

    @property
    def inhibit_mask(self):
        return self.platform.implemented_mask & ~(1 << TIME)

    def set_mcounteren(self, value):
        if self.platform.has_mcounteren:
            self.mcounteren = value & self.counteren_mask

    def set_scounteren(self, value):
        if self.platform.has_scounteren:
            self.scounteren = value & self.counteren_mask

    def set_mcountinhibit(self, value):
        if self.platform.has_mcountinhibit:
            self.mcountinhibit = value & self.inhibit_mask

    # architectural CSR interface -----------------------------------------

    def _check_counter_access(self, idx, priv):
        if priv >= Privilege.MACHINE:
            return
        bit = 1 << idx
        if not self.mcounteren & bit:
            raise AccessFault(f"counter {idx}: mcounteren bit clear")
        if priv == Privilege.USER and not self.scounteren & bit:
            raise AccessFault(f"counter {idx}: scounteren bit clear")

    def _parse_counter(self, csr):
        if csr in _BASE_M:
            return _BASE_M[csr], True, False
        m = _COUNTER_RE.match(csr)
        if m is None:
            return None
        machine, hpm, base, high = m.groups()
        if hpm is not None:
            idx = int(hpm)
            if not FIRST_HPM <= idx <= LAST_HPM:
                return None
        else:
            idx = _BASE_U[base]
            if machine and idx == TIME:
                # mtime has no high-half CSR form here
                if high:
                    return None
        if high and self.platform.xlen != 32:
            return None
        return idx, bool(machine), bool(high)

    def csr_read(self, csr, priv=Privilege.MACHINE):
        priv = Privilege(priv)
        p = self.platform
        parsed = self._parse_counter(csr)
        if parsed is not None:
            idx, machine, high = parsed
            if machine and priv < Privilege.MACHINE:
                raise AccessFault(f"{csr} requires machine privilege")
            if not machine:
                self._check_counter_access(idx, priv)
            value = self.counters[idx]
            if p.xlen == 32:
                value = (value >> 32) if high else value & MASK32
            return value
        m = _EVENT_RE.match(csr)
        if m and FIRST_HPM <= int(m.group(1)) <= LAST_HPM:
            if priv < Privilege.MACHINE:
                raise AccessFault(f"{csr} requires machine privilege")
            return self.events[int(m.group(1))]
        if csr in ("mcounteren", "mcountinhibit", "marchid", "mimpid"):
            if priv < Privilege.MACHINE:
                raise AccessFault(f"{csr} requires machine privilege")
            if csr == "mcounteren" and not p.has_mcounteren:
                raise CsrNotImplemented(csr)
            if csr == "mcountinhibit" and not p.has_mcountinhibit:
                raise CsrNotImplemented(csr)
            return getattr(self, csr)
        if csr == "scounteren":
            if priv < Privilege.SUPERVISOR:
                raise AccessFault(f"{csr} requires supervisor privilege")
            if not p.has_scounteren:
                raise CsrNotImplemented(csr)
            return self.scounteren
        raise ValueError(f"unknown CSR {csr!r}")

    def csr_write(self, csr, value, priv=Privilege.MACHINE):
        """WARL write; unimplemented registers silently drop the value."""
        if Privilege(priv) != Privilege.MACHINE:
            raise AccessFault(f"write to {csr} requires machine privilege")
        value &= MASK64
        parsed = self._parse_counter(csr)
        if parsed is not None:
            idx, _, high = parsed
            if self.platform.xlen == 32:
                cur = self.counters[idx]
                value &= MASK32
                value = (value << 32) | (cur & MASK32) if high else (cur & ~MASK32) | value
            self.set_counter(idx, value)
            return
        m = _EVENT_RE.match(csr)
        if m and FIRST_HPM <= int(m.group(1)) <= LAST_HPM:
            self.set_event(int(m.group(1)), value)
            return
        if csr == "mcounteren":
            self.set_mcounteren(value)
        elif csr == "scounteren":
            self.set_scounteren(value)
        elif csr == "mcountinhibit":
            self.set_mcountinhibit(value)
        elif csr in ("marchid", "mimpid"):
            pass  # read-only identity
        else:
            raise ValueError(f"unknown CSR {csr!r}")

    # counting -------------------------------------------------------------

    def _add(self, idx, delta):
        self.counters[idx] = (self.counters[idx] + delta) & self.counter_mask(idx)

    def advance(self, sl):
        inhibit = self.mcountinhibit
        if not inhibit & (1 << CYCLE):
            self._add(CYCLE, sl.cycles)
        self._add(TIME, sl.cycles)
        if not inhibit & (1 << INSTRET):
            self._add(INSTRET, sl.instructions)
        deltas = sl.deltas
        if not deltas:
            return
        for idx in self.platform.hpm_indices:
            code = self.events[idx]
            if code == 0 or inhibit & (1 << idx):
                continue
            delta = deltas.get(code)
            if delta:
                self._add(idx, delta)


def register_names(platform):
    """Every CSR name the model understands for ``platform``."""
    names = ["mcycle", "mtime", "minstret", "cycle", "time", "instret",
             "mcounteren", "scounteren", "mcountinhibit", "marchid", "mimpid"]
    names += [f"mhpmcounter{i}" for i in range(FIRST_HPM, LAST_HPM + 1)]
    names += [f"hpmcounter{i}" for i in range(FIRST_HPM, LAST_HPM + 1)]
    names += [f"mhpmevent{i}" for i in range(FIRST_HPM, LAST_HPM + 1)]
    if platform.xlen == 32:
        names += ["mcycleh", "minstreth", "cycleh", "timeh", "instreth"]
        names += [f"mhpmcounter{i}h" for i in range(FIRST_HPM, LAST_HPM + 1)]
        names += [f"hpmcounter{i}h" for i in range(FIRST_HPM, LAST_HPM + 1)]
    return names
