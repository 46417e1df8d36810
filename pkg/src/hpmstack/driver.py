"""Kernel-driver analogue: event lifecycle, counter allocation and multiplexing.

All machine-level configuration goes through the HPM SBI extension. Counter
values are read directly with supervisor CSR reads whenever ``mcounteren``
allows it, falling back to SBI otherwise.
"""

import enum
import threading
from collections import deque
from dataclasses import dataclass, field

from .catalog import usable_counters
from .errors import NoUsableCounter, SbiError, StateError
from .platform import CYCLE, FIRST_HPM, INSTRET, TIME
from .pmu import Privilege
from .sbi import SBI_ERR_NOT_SUPPORTED, HpmSbi, SbiRet, read_counter64_rv32

DEFAULT_MUX_QUANTUM = 10_000
U64_MAX = (1 << 64) - 1

_USER_NAMES = {CYCLE: "cycle", TIME: "time", INSTRET: "instret"}


class EventState(enum.Enum):
    OPEN = "open"
    ENABLED = "enabled"
    RUNNING = "running"
    STOPPED = "stopped"
    CLOSED = "closed"


@dataclass
class PerfEvent:
    handle: int
    event_code: int
    counter_map: int
    state: EventState = EventState.OPEN
    assigned_counter: int = None
    accumulated: int = 0
    last_raw: int = 0
    time_enabled: int = 0
    time_running: int = 0
    stamp: int = field(default=0, repr=False)


def allocate_counter(counter_map, free, platform):
    """Lowest implemented HPM counter that is free and allowed by the map."""
    for n in platform.hpm_indices:
        if not counter_map >> n & 1 and free >> n & 1:
            return n
    return None


class PerfDriver:
    def __init__(self, state, mux_quantum=DEFAULT_MUX_QUANTUM, sbi=None):
        self.state = state
        self.platform = state.platform
        self.sbi = sbi if sbi is not None else HpmSbi(state)
        self.mux_quantum = mux_quantum
        self.events = {}
        self.queue = deque()
        self.occupant = {}
        self._base_users = {}
        self._next_handle = 1
        self._lock = threading.RLock()

    # helpers -----------------------------------------------------------

    def _call(self, name, ret, tolerate_missing=False):
        if ret.ok or (tolerate_missing and ret.error == SBI_ERR_NOT_SUPPORTED):
            return ret
        raise SbiError(name, ret.error)

    def _get_event(self, handle):
        try:
            return self.events[handle]
        except KeyError:
            raise StateError(f"unknown handle {handle}") from None

    @property
    def free_counters(self):
        occupied = 0
        for idx in self.occupant:
            occupied |= 1 << idx
        return self.platform.hpm_mask & ~occupied

    def now(self):
        ret = self._call("hpm_get_mcounter", self.sbi.read_counter64(TIME))
        return ret.value

    def _elapsed(self, since, now):
        return (now - since) % (1 << self.platform.base_counter_width)

    def _update_times(self, now):
        for ev in self.events.values():
            if ev.state in (EventState.ENABLED, EventState.RUNNING):
                dt = self._elapsed(ev.stamp, now)
                ev.time_enabled += dt
                if ev.state is EventState.RUNNING:
                    ev.time_running += dt
                ev.stamp = now

    def read_raw(self, idx):
        """Current value of counter ``idx``, via the supervisor fast path if enabled."""
        en = self.state.mcounteren if self.platform.has_mcounteren else 0
        if en >> idx & 1:
            name = _USER_NAMES.get(idx, f"hpmcounter{idx}")
            if self.platform.xlen == 64:
                return self.state.csr_read(name, Privilege.SUPERVISOR)
            ret = read_counter64_rv32(
                lambda half: SbiRet(self.state.csr_read(name + ("h" if half else ""),
                                                         Privilege.SUPERVISOR)))
            return ret.value
        return self._call("hpm_get_mcounter", self.sbi.read_counter64(idx)).value

    def _delta(self, ev, raw):
        width = self.platform.counter_width(ev.assigned_counter)
        return (raw - ev.last_raw) % (1 << width) if width else 0

    def _fold(self, ev):
        raw = self.read_raw(ev.assigned_counter)
        ev.accumulated = min(ev.accumulated + self._delta(ev, raw), U64_MAX)
        ev.last_raw = raw

    def _set_bit(self, getter, setter, name, bit, on):
        cur = self._call(f"hpm_get_{name}", getter(), tolerate_missing=True)
        if not cur.ok:
            return None
        old = cur.unsigned(32)
        new = old | bit if on else old & ~bit
        if new != old:
            self._call(f"hpm_set_{name}", setter(new))
        return old

    def _set_inhibit(self, idx, on):
        return self._set_bit(self.sbi.get_mcountinhibit, self.sbi.set_mcountinhibit,
                             "mcountinhibit", 1 << idx, on)

    def _set_counteren(self, idx, on):
        return self._set_bit(lambda: self.sbi.get_counteren("m"),
                             lambda v: self.sbi.set_counteren(v, "m"),
                             "mcounteren", 1 << idx, on)

    def _base_target(self, ev):
        # cycle/time/instret are only used when the map rules out every HPM counter
        usable = usable_counters(ev.counter_map, self.platform)
        if any(n >= FIRST_HPM for n in usable):
            return None
        return usable[0] if usable else None

    # hardware programming ------------------------------------------------

    def _install(self, ev, idx):
        sbi = self.sbi
        prev_event = self._call("hpm_get_mevent", sbi.get_mevent(idx)).unsigned(self.platform.xlen)
        prev_inhibit = prev_en = None
        try:
            if prev_event != ev.event_code:
                self._call("hpm_set_mevent", sbi.set_mevent(idx, ev.event_code))
            self._call("hpm_set_mcounter", sbi.set_counter(idx, 0))
            prev_inhibit = self._set_inhibit(idx, False)
            prev_en = self._set_counteren(idx, True)
        except SbiError:
            if prev_event != ev.event_code and self.platform.bound_event(idx) is None:
                sbi.set_mevent(idx, prev_event)
            if prev_inhibit is not None:
                sbi.set_mcountinhibit(prev_inhibit)
            if prev_en is not None:
                sbi.set_counteren(prev_en, "m")
            raise
        ev.assigned_counter = idx
        ev.last_raw = 0
        ev.state = EventState.RUNNING
        self.occupant[idx] = ev.handle

    def _uninstall(self, ev):
        idx = ev.assigned_counter
        self._fold(ev)
        if idx < FIRST_HPM:
            self._base_users[idx] -= 1
            if not self._base_users[idx]:
                del self._base_users[idx]
                self._set_counteren(idx, False)
        else:
            self._set_inhibit(idx, True)
            if self.platform.bound_event(idx) is None:
                self._call("hpm_set_mevent", self.sbi.set_mevent(idx, 0))
            self._set_counteren(idx, False)
            del self.occupant[idx]
        ev.assigned_counter = None

    def _attach_base(self, ev, idx):
        if idx not in self._base_users:
            self._set_counteren(idx, True)
        self._base_users[idx] = self._base_users.get(idx, 0) + 1
        ev.assigned_counter = idx
        ev.last_raw = self.read_raw(idx)
        ev.state = EventState.RUNNING

    def _fill_free(self):
        for handle in list(self.queue):
            ev = self.events[handle]
            idx = allocate_counter(ev.counter_map, self.free_counters, self.platform)
            if idx is not None:
                self._install(ev, idx)
                self.queue.remove(handle)

    # public API ------------------------------------------------------------

    def event_open(self, code, counter_map):
        with self._lock:
            if not usable_counters(counter_map, self.platform):
                raise NoUsableCounter(
                    f"counter map {counter_map:#010x} leaves no implemented counter usable")
            handle = self._next_handle
            self._next_handle += 1
            self.events[handle] = PerfEvent(handle, code, counter_map)
            return handle

    def event_enable(self, handle):
        with self._lock:
            ev = self._get_event(handle)
            if ev.state not in (EventState.OPEN, EventState.STOPPED):
                raise StateError(f"cannot enable event {handle} in state {ev.state.value}")
            now = self.now()
            self._update_times(now)
            base = self._base_target(ev)
            if base is not None:
                self._attach_base(ev, base)
            else:
                idx = allocate_counter(ev.counter_map, self.free_counters, self.platform)
                if idx is None:
                    ev.state = EventState.ENABLED
                    self.queue.append(handle)
                else:
                    self._install(ev, idx)
            ev.stamp = now

    def event_disable(self, handle):
        with self._lock:
            ev = self._get_event(handle)
            if ev.state not in (EventState.RUNNING, EventState.ENABLED):
                raise StateError(f"cannot disable event {handle} in state {ev.state.value}")
            self._update_times(self.now())
            if ev.state is EventState.RUNNING:
                self._uninstall(ev)
            else:
                self.queue.remove(handle)
            ev.state = EventState.STOPPED
            self._fill_free()

    def event_read(self, handle):
        """(count, time_enabled, time_running) for ``handle``."""
        with self._lock:
            ev = self._get_event(handle)
            if ev.state is EventState.CLOSED:
                raise StateError(f"event {handle} is closed")
            self._update_times(self.now())
            count = ev.accumulated
            if ev.state is EventState.RUNNING:
                count = min(count + self._delta(ev, self.read_raw(ev.assigned_counter)), U64_MAX)
            return count, ev.time_enabled, ev.time_running

    def event_close(self, handle):
        with self._lock:
            ev = self._get_event(handle)
            if ev.state is EventState.CLOSED:
                raise StateError(f"event {handle} already closed")
            if ev.state in (EventState.RUNNING, EventState.ENABLED):
                self.event_disable(handle)
            ev.state = EventState.CLOSED

    def multiplex_tick(self, now=None):
        """Round-robin: every counter wanted by a queued event changes hands."""
        with self._lock:
            self._update_times(self.now() if now is None else now)
            if not self.queue:
                return
            for idx in sorted(self.occupant):
                pick = None
                for handle in self.queue:
                    if not self.events[handle].counter_map >> idx & 1:
                        pick = handle
                        break
                if pick is None:
                    continue
                current = self.events[self.occupant[idx]]
                self._uninstall(current)
                current.state = EventState.ENABLED
                self.queue.remove(pick)
                self.queue.append(current.handle)
                self._install(self.events[pick], idx)
            self._fill_free()


def replay(driver, trace, state=None):
    """Feed ``trace`` into the hart, ticking the multiplexer every quantum."""
    state = state if state is not None else driver.state
    since_tick = 0
    for sl in trace:
        state.advance(sl)
        since_tick += sl.cycles
        if driver.mux_quantum and since_tick >= driver.mux_quantum:
            driver.multiplex_tick()
            since_tick = 0
