import pytest

from hpmstack.driver import EventState, PerfDriver, allocate_counter, replay
from hpmstack.errors import NoUsableCounter, SbiError, StateError
from hpmstack.pmu import PmuState, Privilege
from hpmstack.sbi import SBI_ERR_DENIED, HpmSbi, SbiRet
from hpmstack.trace import TraceSlice, uniform_trace

from conftest import make_platform

ONLY_3 = 0xFFFF_FFFF & ~(1 << 3)


def _driver(platform, **kw):
    state = PmuState(platform)
    return state, PerfDriver(state, **kw)


def test_allocate_counter(sixteen):
    all_free = sixteen.hpm_mask
    assert allocate_counter(0xF8FF, all_free, sixteen) == 8
    assert allocate_counter(0xF8FF, all_free & ~(1 << 8 | 1 << 9), sixteen) == 10
    assert allocate_counter(0xF8FF, all_free & ~(0b111 << 8), sixteen) is None


def test_allocate_never_picks_base_counters(sixteen):
    assert allocate_counter(0, 0xFFFF_FFFF, sixteen) == 3


def test_open(sixteen):
    _, drv = _driver(sixteen)
    h1 = drv.event_open(0x11, 0xF8FF)
    h2 = drv.event_open(0x11, 0xF8FF)
    assert h1 != h2
    assert drv.events[h1].state is EventState.OPEN
    with pytest.raises(NoUsableCounter):
        drv.event_open(0x05, 0xFFFF_FFFF)


def test_open_touches_no_hardware(sixteen):
    state, drv = _driver(sixteen)
    before = (list(state.counters), list(state.events), state.mcounteren, state.mcountinhibit)
    drv.event_open(0x11, 0xF8FF)
    assert before == (list(state.counters), list(state.events), state.mcounteren,
                      state.mcountinhibit)


def test_enable_programs_lowest_usable_counter(sixteen):
    state, drv = _driver(sixteen)
    h = drv.event_open(0x11, 0xF8FF)
    drv.event_enable(h)
    ev = drv.events[h]
    assert ev.state is EventState.RUNNING
    assert ev.assigned_counter == min(set(range(8, 11)) & set(sixteen.hpm_indices))
    assert state.events[8] == 0x11
    assert state.mcounteren & (1 << 8)
    assert not state.mcountinhibit & (1 << 8)
    assert drv.event_read(h) == (0, 0, 0)


def test_pigeonhole_and_promotion(sixteen):
    state, drv = _driver(sixteen)
    hs = [drv.event_open(0x11, 0xF8FF) for _ in range(4)]
    for h in hs:
        drv.event_enable(h)
    states = [drv.events[h].state for h in hs]
    assert states.count(EventState.RUNNING) == 3
    assert states[3] is EventState.ENABLED
    drv.event_disable(hs[0])
    assert drv.events[hs[3]].state is EventState.RUNNING
    assert drv.events[hs[3]].assigned_counter == 8


def test_disable_folds_count(spike):
    state, drv = _driver(spike)
    h = drv.event_open(0x05, 0x7)
    drv.event_enable(h)
    state.advance(TraceSlice(100, 10, {0x05: 42}))
    drv.event_disable(h)
    ev = drv.events[h]
    assert ev.accumulated == 42 and ev.state is EventState.STOPPED
    assert drv.free_counters & (1 << 3)
    assert state.events[3] == 0
    assert state.mcountinhibit & (1 << 3)
    assert not state.mcounteren & (1 << 3)
    state.advance(TraceSlice(100, 10, {0x05: 5}))
    assert drv.event_read(h)[0] == 42


def test_disable_queued_event(sixteen):
    _, drv = _driver(sixteen)
    hs = [drv.event_open(0x11, 0xF8FF) for _ in range(4)]
    for h in hs:
        drv.event_enable(h)
    drv.event_disable(hs[3])
    assert drv.events[hs[3]].state is EventState.STOPPED
    assert drv.events[hs[3]].accumulated == 0


def test_reenable_accumulates(spike):
    state, drv = _driver(spike)
    h = drv.event_open(0x05, 0x7)
    for n in (3, 4):
        drv.event_enable(h)
        state.advance(TraceSlice(10, 0, {0x05: n}))
        drv.event_disable(h)
    assert drv.event_read(h)[0] == 7


def test_state_machine(spike):
    _, drv = _driver(spike)
    h = drv.event_open(0x05, 0x7)
    with pytest.raises(StateError):
        drv.event_disable(h)
    drv.event_enable(h)
    with pytest.raises(StateError):
        drv.event_enable(h)
    drv.event_close(h)
    assert drv.events[h].state is EventState.CLOSED
    for op in (drv.event_enable, drv.event_disable, drv.event_read, drv.event_close):
        with pytest.raises(StateError):
            op(h)
    with pytest.raises(StateError):
        drv.event_read(999)


def test_wrap_safe_delta():
    p = make_platform(num_event_counters=1, event_counter_width=40)
    state, drv = _driver(p)
    h = drv.event_open(0x05, 0x7)
    drv.event_enable(h)
    start = 2 ** 40 - 5
    state.set_counter(3, start)
    drv.events[h].last_raw = start
    state.advance(TraceSlice(1, 0, {0x05: 8}))
    assert state.counter(3) == 3
    # oracle: modular difference
    assert drv.event_read(h)[0] == (3 - start) % 2 ** 40 == 8


def test_accumulation_saturates():
    state, drv = _driver(make_platform(num_event_counters=1))
    h = drv.event_open(0x05, 0x7)
    drv.event_enable(h)
    drv.events[h].accumulated = (1 << 64) - 3
    state.advance(TraceSlice(1, 0, {0x05: 10}))
    drv.event_disable(h)
    assert drv.events[h].accumulated == (1 << 64) - 1


def test_base_counter_events(cva6):
    state, drv = _driver(cva6)
    cyc = drv.event_open(0x0, 0xFFFF_FFFE)
    ins = drv.event_open(0x2, 0xFFFF_FFFB)
    drv.event_enable(cyc)
    drv.event_enable(ins)
    assert drv.events[cyc].assigned_counter == 0
    state.advance(TraceSlice(1000, 600))
    assert drv.event_read(cyc)[0] == 1000
    assert drv.event_read(ins)[0] == 600
    drv.event_disable(cyc)
    assert not state.mcounteren & 1
    assert drv.events[cyc].accumulated == 1000


def test_fixed_platform_keeps_bindings(cva6):
    state, drv = _driver(cva6)
    h = drv.event_open(0xB, 0xFFFF_FFFF & ~(1 << 11))
    drv.event_enable(h)
    state.advance(TraceSlice(50, 20, {0xB: 17, 0xC: 4}))
    drv.event_disable(h)
    assert drv.events[h].accumulated == 17
    assert state.events[11] == 0xB


def test_multiplex_two_events_one_counter():
    state, drv = _driver(make_platform(num_event_counters=1), mux_quantum=100)
    a = drv.event_open(0x1, 0x7)
    b = drv.event_open(0x2, 0x7)
    drv.event_enable(a)
    drv.event_enable(b)
    replay(drv, uniform_trace(1000, 100, {0x1: 1.0, 0x2: 1.0}), state)
    for h in (a, b):
        count, enabled, running = drv.event_read(h)
        assert enabled == 1000
        assert abs(running - 500) <= 100
        assert count == running


def test_single_event_rotation_is_noop(spike):
    state, drv = _driver(spike, mux_quantum=10)
    h = drv.event_open(0x1, 0x7)
    drv.event_enable(h)
    counter = drv.events[h].assigned_counter
    for _ in range(5):
        state.advance(TraceSlice(10, 0, {0x1: 3}))
        drv.multiplex_tick()
    assert drv.events[h].assigned_counter == counter
    assert drv.event_read(h) == (15, 50, 50)


def test_disjoint_masks_never_swap(sixteen):
    state, drv = _driver(sixteen, mux_quantum=10)
    a1 = drv.event_open(0x1, 0xFFFF_FFFF & ~(1 << 3))
    a2 = drv.event_open(0x2, 0xFFFF_FFFF & ~(1 << 3))
    b = drv.event_open(0x3, 0xFFFF_FFFF & ~(1 << 4))
    for h in (a1, a2, b):
        drv.event_enable(h)
    for _ in range(6):
        state.advance(TraceSlice(10, 0, {0x3: 1}))
        drv.multiplex_tick()
        assert drv.events[b].assigned_counter == 4
        for h in (a1, a2):
            assert drv.events[h].assigned_counter in (3, None)


def test_fast_path_matches_sbi(spike):
    state, drv = _driver(spike)
    h = drv.event_open(0x1, 0x7)
    drv.event_enable(h)
    state.advance(TraceSlice(10, 0, {0x1: 99}))
    idx = drv.events[h].assigned_counter
    assert state.mcounteren >> idx & 1
    via_csr = state.csr_read(f"hpmcounter{idx}", Privilege.SUPERVISOR)
    via_sbi = HpmSbi(state).get_counter(idx).unsigned(64)
    assert via_csr == via_sbi == drv.read_raw(idx) == 99


def test_rv32_driver_reads(rv32):
    state, drv = _driver(rv32)
    h = drv.event_open(0x1, 0x7)
    drv.event_enable(h)
    state.advance(TraceSlice(10, 0, {0x1: (1 << 32) + 5}))
    assert drv.event_read(h)[0] == (1 << 32) + 5


class FailingSbi(HpmSbi):
    def __init__(self, state, fail):
        super().__init__(state)
        self.fail = fail

    def call(self, fn, *args):
        if fn.call_name == self.fail:
            return SbiRet(0, SBI_ERR_DENIED)
        return super().call(fn, *args)


@pytest.mark.parametrize("fail", ["hpm_set_mcountinhibit", "hpm_set_mcounteren",
                                  "hpm_set_mcounter"])
def test_enable_rolls_back_on_sbi_error(spike, fail):
    state = PmuState(spike)
    state.set_mcountinhibit(1 << 3)
    drv = PerfDriver(state, sbi=FailingSbi(state, fail))
    h = drv.event_open(0x1, 0x7)
    before = (list(state.events), state.mcounteren, state.mcountinhibit)
    with pytest.raises(SbiError):
        drv.event_enable(h)
    assert drv.events[h].state is EventState.OPEN
    assert drv.free_counters == spike.hpm_mask
    assert (list(state.events), state.mcounteren, state.mcountinhibit) == before


def test_replay_ticks_every_quantum(spike):
    state, drv = _driver(spike, mux_quantum=100)
    ticks = []
    drv.multiplex_tick = lambda now=None: ticks.append(state.counter(1))
    replay(drv, [TraceSlice(40, 0)] * 10, state)
    assert ticks == [120, 240, 360]
